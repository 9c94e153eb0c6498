"""Price-time priority limit order book with discrete ticks and order expiry.

Orders rest in FIFO queues per price level. An incoming order matches against
the opposite side while prices cross, always trading at the resting order's
limit price. Matching can be suppressed per submission (orders then rest
untouched), which is how opening/closing no-execution windows are realised.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum


class Side(Enum):
    BUY = "buy"
    SELL = "sell"


class DuplicateOrderError(ValueError):
    """An order_id was submitted twice to the same book."""


def align_to_tick(price: float, tick: float) -> float:
    """Snap a raw price to the nearest multiple of the tick size.

    Ties round away from zero. The comparison happens on the decimal value
    of the float (its shortest repr), so e.g. 300.00005 with tick 1e-4 is an
    exact tie and aligns to 300.0001.
    """
    if not math.isfinite(price):
        raise ValueError(f"price must be finite, got {price!r}")
    dtick = Decimal(repr(tick))
    n = (Decimal(repr(price)) / dtick).to_integral_value(rounding=ROUND_HALF_UP)
    return float(n * dtick)


@dataclass
class Order:
    order_id: int
    agent_id: int
    side: Side
    limit_price: float  # multiple of the book's tick size
    volume: int  # remaining unfilled volume, decremented by fills
    submitted_step: int
    expiry_step: int


@dataclass(frozen=True)
class Trade:
    buy_order_id: int
    sell_order_id: int
    price: float  # the resting order's limit price
    volume: int
    step: int


@dataclass
class Book:
    """Two-sided book; price levels keyed by integer tick counts."""

    tick: float
    bids: dict[int, deque[Order]] = field(default_factory=dict)
    asks: dict[int, deque[Order]] = field(default_factory=dict)
    last_trade_price: float | None = None

    def __post_init__(self) -> None:
        self._bid_levels: list[int] = []  # max-heap via negation
        self._ask_levels: list[int] = []  # min-heap
        self._expiry_heap: list[tuple[int, int]] = []  # (expiry_step, order_id)
        self._orders: dict[int, Order] = {}
        # running per-side totals; volume conservation means
        # submitted == executed + expired + resting at all times
        self.submitted_volume = {Side.BUY: 0, Side.SELL: 0}
        self.executed_volume = {Side.BUY: 0, Side.SELL: 0}
        self.expired_volume = {Side.BUY: 0, Side.SELL: 0}

    def _ticks(self, price: float) -> int:
        return int(round(price / self.tick))

    def best_bid(self) -> float | None:
        heap, levels = self._bid_levels, self.bids
        while heap and -heap[0] not in levels:
            heapq.heappop(heap)
        return -heap[0] * self.tick if heap else None

    def best_ask(self) -> float | None:
        heap, levels = self._ask_levels, self.asks
        while heap and heap[0] not in levels:
            heapq.heappop(heap)
        return heap[0] * self.tick if heap else None

    def mid_price(self, fallback: float) -> float:
        """Quote midpoint; last trade price if one side is empty; else fallback."""
        bb, ba = self.best_bid(), self.best_ask()
        if bb is not None and ba is not None:
            return (bb + ba) / 2.0
        if self.last_trade_price is not None:
            return self.last_trade_price
        return fallback

    def resting_volume(self, side: Side) -> int:
        levels = self.bids if side is Side.BUY else self.asks
        return sum(o.volume for q in levels.values() for o in q)

    def iter_orders(self, side: Side):
        levels = self.bids if side is Side.BUY else self.asks
        for queue in levels.values():
            yield from queue

    def _rest(self, order: Order, ticks: int) -> None:
        if order.side is Side.BUY:
            queue = self.bids.get(ticks)
            if queue is None:
                queue = self.bids[ticks] = deque()
                heapq.heappush(self._bid_levels, -ticks)
        else:
            queue = self.asks.get(ticks)
            if queue is None:
                queue = self.asks[ticks] = deque()
                heapq.heappush(self._ask_levels, ticks)
        queue.append(order)
        heapq.heappush(self._expiry_heap, (order.expiry_step, order.order_id))

    def submit(self, order: Order, execution_enabled: bool = True) -> list[Trade]:
        """Match an incoming order while prices cross, then rest any residual.

        With execution disabled the order rests untouched regardless of
        crossing. Trades execute at the resting order's price, FIFO within a
        level. Returns the trades in execution sequence.
        """
        if order.order_id in self._orders:
            raise DuplicateOrderError(f"order_id {order.order_id} already submitted")
        if order.volume < 1:
            raise ValueError(f"order volume must be >= 1, got {order.volume}")
        self._orders[order.order_id] = order
        self.submitted_volume[order.side] += order.volume
        ticks = self._ticks(order.limit_price)

        trades: list[Trade] = []
        if execution_enabled:
            buying = order.side is Side.BUY
            if buying:
                opp_levels, opp_heap, sign = self.asks, self._ask_levels, 1
            else:
                opp_levels, opp_heap, sign = self.bids, self._bid_levels, -1
            while order.volume > 0:
                while opp_heap and sign * opp_heap[0] not in opp_levels:
                    heapq.heappop(opp_heap)
                if not opp_heap:
                    break
                level = sign * opp_heap[0]
                if (level > ticks) if buying else (level < ticks):
                    break
                queue = opp_levels[level]
                resting = queue[0]
                vol = min(order.volume, resting.volume)
                price = resting.limit_price
                buy_id, sell_id = (
                    (order.order_id, resting.order_id)
                    if order.side is Side.BUY
                    else (resting.order_id, order.order_id)
                )
                trades.append(Trade(buy_id, sell_id, price, vol, order.submitted_step))
                order.volume -= vol
                resting.volume -= vol
                self.executed_volume[Side.BUY] += vol
                self.executed_volume[Side.SELL] += vol
                self.last_trade_price = price
                if resting.volume == 0:
                    queue.popleft()
                    if not queue:
                        del opp_levels[level]

        if order.volume > 0:
            self._rest(order, ticks)
        return trades

    def expire(self, step: int) -> int:
        """Drop every resting order whose expiry_step is <= step. Returns the count."""
        removed = 0
        heap = self._expiry_heap
        while heap and heap[0][0] <= step:
            _, order_id = heapq.heappop(heap)
            order = self._orders.get(order_id)
            if order is None or order.volume == 0:
                continue  # already fully filled
            levels = self.bids if order.side is Side.BUY else self.asks
            ticks = self._ticks(order.limit_price)
            queue = levels.get(ticks)
            if queue is None or order not in queue:
                continue
            queue.remove(order)
            if not queue:
                del levels[ticks]
            self.expired_volume[order.side] += order.volume
            order.volume = 0
            removed += 1
        return removed
