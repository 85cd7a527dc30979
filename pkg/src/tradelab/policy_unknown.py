"""Posting policy that works without knowing the Lipschitz bound.

The calibration and guessing protocols of the known-bound policy are run
over a ladder of geometrically increasing trial smoothness scales.
Calibration sweeps every scale (two rejections per scale).  Guessing keeps
an internal clock and widens its candidate grid only as fast as the clock
allows, so the time wasted on any scale is proportional to the size of its
grid.  The true smoothness of the environment never enters any decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Context, Price, PriceGrid, capped_grid, clip01
from .policy_known import Phase
from .tree import NodeId, NodePhase, PartitionTree, TreeParams, parent


@dataclass(frozen=True)
class ScaleLadder:
    """Trial smoothness scales L0 * 2^j for j in 0..j_bar.

    With the default base L0 = 1/2, j_bar equals the node level and the
    top scale's price window (after clamping) already covers [0, 1].
    """

    L0: float
    level: int
    scales: tuple[float, ...]

    @classmethod
    def for_level(cls, level: int, L0: float = 0.5) -> "ScaleLadder":
        if level < 1:
            raise ValueError("ladders are defined for levels >= 1")
        j_bar = max(0, math.ceil(level + math.log2(2.0 * L0)))
        return cls(L0=L0, level=level, scales=tuple(L0 * 2.0 ** j for j in range(j_bar + 1)))

    @property
    def j_bar(self) -> int:
        return len(self.scales) - 1


@dataclass
class GeoReduceState:
    """Two-price calibration repeated once per scale, smallest first."""

    prices_low: tuple[Price, ...]
    prices_high: tuple[Price, ...]
    j: int = 0
    posting_high: bool = False

    @property
    def done(self) -> bool:
        return self.j >= len(self.prices_low)

    def current_price(self) -> Price:
        if self.done:
            raise RuntimeError("calibration already finished")
        return self.prices_high[self.j] if self.posting_high else self.prices_low[self.j]

    def on_rejection(self) -> None:
        if self.posting_high:
            self.posting_high = False
            self.j += 1
        else:
            self.posting_high = True


@dataclass
class GeoGuessState:
    """Clock-gated uniform sampling over per-scale grids.

    At internal time tau the active grid is the largest one whose size is
    at most tau; before any grid qualifies the smallest scale is used.
    """

    grids: tuple[PriceGrid, ...]
    tau: int = 0

    def scale_index(self) -> int:
        best = 0
        for j, grid in enumerate(self.grids):
            if len(grid) <= self.tau:
                best = j
        return best

    def sample(self, rng: np.random.Generator) -> Price:
        grid = self.grids[self.scale_index()]
        self.tau += 1
        return grid.sample(rng)


@dataclass
class _NodeRoutines:
    reduce: GeoReduceState | None  # None at the root
    guess: GeoGuessState | None
    center: Price | None
    ladder: ScaleLadder | None

    @property
    def reduce_done(self) -> bool:
        return self.reduce is not None and self.reduce.done


@dataclass(frozen=True)
class UnknownLConfig:
    """Configuration: tree shape, ladder base, grid step.

    eps defaults to T^(-1/d).  L0 stays at 1/2 except in sensitivity
    experiments.
    """

    params: TreeParams
    L0: float = 0.5
    eps: float | None = None

    def __post_init__(self) -> None:
        if self.L0 <= 0:
            raise ValueError("L0 must be positive")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def grid_step(self) -> float:
        if self.eps is not None:
            return self.eps
        return self.params.T ** (-1.0 / self.params.d)


class UnknownLipschitzPolicy:
    """Multi-scale one-bit posted-price policy, no smoothness input."""

    def __init__(self, config: UnknownLConfig):
        self.config = config
        self.tree = PartitionTree(config.params)
        self._pending: tuple[NodeId, Phase, Price] | None = None

    def post_price(self, x: Context, rng: np.random.Generator) -> tuple[Price, NodeId, Phase]:
        if self._pending is not None:
            raise RuntimeError("previous post has no feedback yet")
        node = self.tree.traverse(x)
        st = self.tree.state(node)
        if st.phase is NodePhase.MARKED:
            price, phase = st.marking_price, Phase.LEAF
        else:
            sub = st.substate
            if sub is None:
                sub = self._activate(node)
                st.substate = sub
            if sub.reduce is not None and not sub.reduce.done:
                st.phase = NodePhase.REDUCING
                price, phase = sub.reduce.current_price(), Phase.REDUCE
            else:
                st.phase = NodePhase.GUESSING
                price, phase = sub.guess.sample(rng), Phase.GUESS
        self._pending = (node, phase, price)
        return price, node, phase

    def observe(self, node: NodeId, phase: Phase, price: Price, accepted: bool) -> None:
        if self._pending != (node, phase, price):
            raise RuntimeError("feedback does not match a pending post")
        self._pending = None
        st = self.tree.state(node)
        if phase is Phase.REDUCE:
            if not accepted:
                sub = st.substate
                sub.reduce.on_rejection()
                if sub.reduce.done:
                    sub.guess = self._build_guess(node, sub)
        elif phase is Phase.GUESS:
            if accepted:
                self.tree.mark(node, price)

    def _activate(self, node: NodeId) -> _NodeRoutines:
        if node.level == 0:
            grid = capped_grid(0.0, 1.0, self.config.grid_step)
            return _NodeRoutines(reduce=None, guess=GeoGuessState(grids=(grid,)),
                                 center=None, ladder=None)
        pstate = self.tree.state(parent(node))
        if pstate.phase is not NodePhase.MARKED:
            raise RuntimeError(f"activated {node} with unmarked parent")
        center = pstate.marking_price
        ladder = ScaleLadder.for_level(node.level, self.config.L0)
        half = 2.0 ** (1 - node.level)
        reduce = GeoReduceState(
            prices_low=tuple(clip01(center - s * half) for s in ladder.scales),
            prices_high=tuple(clip01(center + s * half) for s in ladder.scales),
        )
        return _NodeRoutines(reduce=reduce, guess=None, center=center, ladder=ladder)

    def _build_guess(self, node: NodeId, sub: _NodeRoutines) -> GeoGuessState:
        half = 2.0 ** (1 - node.level)
        eps = self.config.grid_step
        grids = tuple(
            capped_grid(sub.center - s * half, sub.center + s * half, eps)
            for s in sub.ladder.scales
        )
        return GeoGuessState(grids=grids)
