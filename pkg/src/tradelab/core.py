"""Shared domain vocabulary for posted-price bilateral trade.

A round of trade is described by a context (a point in the unit hypercube),
a posted price, and a hidden seller/buyer valuation pair.  The trade clears
exactly when the price lies between the two valuations, and the welfare it
creates is the gain from trade.  Everything here is a pure function on
immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# A context is a length-d vector with entries in [0, 1]; prices are floats
# in [0, 1]; feedback is the single acceptance bit.
Context = np.ndarray
Price = float
Feedback = bool


class ValuationPair(NamedTuple):
    """Hidden (seller, buyer) valuations for one round.

    No ordering is imposed: b < s is legal and simply means no price can
    clear the trade.
    """

    s: float
    b: float


def validate_context(x: Context, d: int) -> None:
    """Raise ValueError unless x is a length-d vector inside [0, 1]^d."""
    if len(x) != d:
        raise ValueError(f"context has dimension {len(x)}, expected {d}")
    for c in x:
        if not (0.0 <= c <= 1.0):
            raise ValueError(f"context coordinate {c!r} outside [0, 1]")


def clip01(p: float) -> float:
    """Project a real onto [0, 1]."""
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


def gft(p: Price, v: ValuationPair) -> float:
    """Gain from trade of posting price p against valuations v.

    Returns b - s when the trade clears (s <= p <= b, boundaries included),
    else 0.  Never negative: if b < s no price clears.
    """
    if v.s <= p <= v.b:
        return v.b - v.s
    return 0.0


def best_gft(v: ValuationPair) -> float:
    """Best achievable gain from trade for one round: max(b - s, 0)."""
    return max(v.b - v.s, 0.0)


@dataclass(frozen=True)
class PriceGrid:
    """A finite set of candidate prices from a uniform grid capped to [0, 1].

    ``points`` is sorted ascending and duplicate-free; uniform sampling is
    over the distinct points.
    """

    points: tuple[float, ...]
    a: float
    b: float
    eps: float

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, p: float) -> bool:
        return p in self.points

    def sample(self, rng: np.random.Generator) -> float:
        """Draw one point uniformly at random."""
        return self.points[int(rng.integers(len(self.points)))]


def capped_grid(a: float, b: float, eps: float) -> PriceGrid:
    """Uniform grid {a, a+eps, ..., a+k*eps, b} projected onto [0, 1].

    k = floor((b - a) / eps).  Points falling outside [0, 1] are clamped to
    the nearest endpoint and duplicates are removed, so the result is a
    nonempty, strictly increasing tuple.
    """
    if not a <= b:
        raise ValueError(f"need a <= b, got a={a!r}, b={b!r}")
    if not eps > 0:
        raise ValueError(f"need eps > 0, got {eps!r}")
    k = math.floor((b - a) / eps)
    pts = [a + i * eps for i in range(k + 1)]
    pts.append(b)
    # a + k*eps <= b exactly; min() guards the float overshoot case.
    # "+ 0.0" normalises -0.0 so identical inputs give identical bits.
    pts = [clip01(min(p, b)) + 0.0 for p in pts]
    return PriceGrid(points=tuple(sorted(set(pts))), a=a, b=b, eps=eps)
