"""Posting policy for a known Lipschitz bound on the valuation functions.

Each active node runs two protocols in sequence.  First a calibration step
posts the two extreme prices around the parent's marking price until each
has been rejected once; the two rejections geometrically cap the gain from
trade achievable anywhere in the cell.  Then a guessing step samples prices
uniformly from a capped grid around the parent's price until one is
accepted, which marks the node.  Marked leaves replay their price.

The policy sees one bit per round and never touches valuations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import Context, Price, PriceGrid, capped_grid, clip01
from .tree import NodeId, NodePhase, PartitionTree, TreeParams, parent


class Phase(enum.Enum):
    """Which protocol produced the price of a round."""

    REDUCE = "reduce"
    GUESS = "guess"
    LEAF = "leaf"


class ReduceStage(enum.Enum):
    POSTING_LOW = "posting_low"
    POSTING_HIGH = "posting_high"
    DONE = "done"


@dataclass
class ReduceState:
    """Two-price calibration: post low until rejected, then high."""

    p_low: Price
    p_high: Price
    stage: ReduceStage = ReduceStage.POSTING_LOW

    @property
    def done(self) -> bool:
        return self.stage is ReduceStage.DONE

    def current_price(self) -> Price:
        if self.stage is ReduceStage.POSTING_LOW:
            return self.p_low
        if self.stage is ReduceStage.POSTING_HIGH:
            return self.p_high
        raise RuntimeError("calibration already finished")

    def on_rejection(self) -> None:
        # Stage-based on purpose: if clamping made p_low == p_high we still
        # require one rejection per stage.
        if self.stage is ReduceStage.POSTING_LOW:
            self.stage = ReduceStage.POSTING_HIGH
        elif self.stage is ReduceStage.POSTING_HIGH:
            self.stage = ReduceStage.DONE


@dataclass
class GuessState:
    """Uniform sampling over a fixed candidate grid until acceptance."""

    grid: PriceGrid
    draws: int = 0

    def sample(self, rng: np.random.Generator) -> Price:
        self.draws += 1
        return self.grid.sample(rng)


@dataclass
class _NodeRoutines:
    """Per-node protocol bundle stored in the tree's NodeState.substate."""

    reduce: ReduceState | None  # None at the root (calibration skipped)
    guess: GuessState | None
    center: Price | None        # parent's marking price
    radius: float | None        # price window half-width at this level

    @property
    def reduce_done(self) -> bool:
        return self.reduce is not None and self.reduce.done


@dataclass(frozen=True)
class KnownLConfig:
    """Policy configuration: Lipschitz bound, grid step, tree shape.

    eps defaults to L * T^(-1/d); override only for sensitivity studies.
    """

    L: float
    params: TreeParams
    eps: float | None = None

    def __post_init__(self) -> None:
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def grid_step(self) -> float:
        if self.eps is not None:
            return self.eps
        return self.L * self.params.T ** (-1.0 / self.params.d)


class KnownLipschitzPolicy:
    """One-bit posted-price policy using an explicit Lipschitz bound."""

    def __init__(self, config: KnownLConfig):
        self.config = config
        self.tree = PartitionTree(config.params)
        self._pending: tuple[NodeId, Phase, Price] | None = None

    def post_price(self, x: Context, rng: np.random.Generator) -> tuple[Price, NodeId, Phase]:
        """Pick the price for the round whose context is x."""
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
        """Consume the acceptance bit for the round just posted.

        This is the full state transition of the policy: it sees node,
        phase, price and one bit, nothing else.
        """
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
        # Phase.LEAF: marked leaf replay, nothing to learn.

    def _activate(self, node: NodeId) -> _NodeRoutines:
        if node.level == 0:
            # Root bootstrap: no parent price exists, so skip calibration
            # and guess over the full price range.
            grid = capped_grid(0.0, 1.0, self.config.grid_step)
            return _NodeRoutines(reduce=None, guess=GuessState(grid), center=None, radius=None)
        pstate = self.tree.state(parent(node))
        if pstate.phase is not NodePhase.MARKED:
            raise RuntimeError(f"activated {node} with unmarked parent")
        center = pstate.marking_price
        radius = self.config.L * 2.0 ** (1 - node.level)
        reduce = ReduceState(p_low=clip01(center - radius), p_high=clip01(center + radius))
        return _NodeRoutines(reduce=reduce, guess=None, center=center, radius=radius)

    def _build_guess(self, node: NodeId, sub: _NodeRoutines) -> GuessState:
        grid = capped_grid(sub.center - sub.radius, sub.center + sub.radius, self.config.grid_step)
        return GuessState(grid)
