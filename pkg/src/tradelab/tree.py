"""Hierarchical 2^d-ary partition of the unit hypercube.

A node at level l covers an axis-aligned cube of side 2^-l.  Cells are
half-open ([z_i, z_i + 2^-l) per axis) with the top face of the hypercube
closed, so every context belongs to exactly one cell per level and child
lookup is deterministic.  Node identity uses integer lattice coordinates
(z_i = k_i * 2^-l), which keeps parent/child arithmetic exact.

Nodes are materialised lazily: only cells actually visited by a run exist.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Any, Iterator

from .core import Context, Price


@dataclass(frozen=True)
class NodeId:
    """Identity of one partition cell: level and integer lattice point."""

    level: int
    lattice: tuple[int, ...]

    @classmethod
    def root(cls, d: int) -> "NodeId":
        return cls(0, (0,) * d)

    @property
    def d(self) -> int:
        return len(self.lattice)

    def side(self) -> float:
        """Edge length of the cell, 2^-level."""
        return 2.0 ** -self.level

    def reference_point(self) -> tuple[float, ...]:
        """Lower corner of the cell."""
        return tuple(k * self.side() for k in self.lattice)


def _check_lattice(node: NodeId) -> None:
    top = (1 << node.level) - 1
    for k in node.lattice:
        if not 0 <= k <= top:
            raise ValueError(f"lattice coordinate {k} out of range at level {node.level}")


def region_contains(node: NodeId, x: Context) -> bool:
    """Whether x lies in the node's half-open cell (top face inclusive)."""
    if len(x) != node.d:
        raise ValueError(f"context dimension {len(x)} != node dimension {node.d}")
    scale = 1 << node.level
    for k, xi in zip(node.lattice, x):
        t = xi * scale  # exact: scale is a power of two
        if k <= t < k + 1:
            continue
        if t == k + 1 == scale:  # x_i == 1 on the closed top face
            continue
        return False
    return True


def child_containing(node: NodeId, x: Context) -> NodeId:
    """The unique child of ``node`` whose cell contains x."""
    if not region_contains(node, x):
        raise ValueError(f"context {tuple(x)} not in region of {node}")
    scale2 = 1 << (node.level + 1)
    lattice = tuple(
        2 * k + (1 if xi * scale2 >= 2 * k + 1 else 0)
        for k, xi in zip(node.lattice, x)
    )
    return NodeId(node.level + 1, lattice)


def parent(node: NodeId) -> NodeId:
    """Parent cell (floor-halve every lattice coordinate)."""
    if node.level < 1:
        raise ValueError("root has no parent")
    return NodeId(node.level - 1, tuple(k // 2 for k in node.lattice))


def max_height(d: int, T: int) -> int:
    """Largest H with 2^(d*H) <= T, computed in integer arithmetic."""
    if d < 1 or T < 1:
        raise ValueError("need d >= 1 and T >= 1")
    H = 0
    while (1 << (d * (H + 1))) <= T:
        H += 1
    return H


@dataclass(frozen=True)
class TreeParams:
    """Dimension, horizon and derived tree height cap."""

    d: int
    T: int
    H: int

    @classmethod
    def for_horizon(cls, d: int, T: int) -> "TreeParams":
        return cls(d=d, T=T, H=max_height(d, T))

    def __post_init__(self) -> None:
        if self.H != max_height(self.d, self.T):
            raise ValueError("H must be the largest integer with 2^(d*H) <= T")


class NodePhase(enum.Enum):
    PENDING = "pending"        # created, no protocol started yet
    REDUCING = "reducing"      # soliciting the two calibrating rejections
    GUESSING = "guessing"      # sampling candidate prices
    MARKED = "marked"          # an accepted price is attached


@dataclass
class NodeState:
    """Mutable per-node bookkeeping.

    ``substate`` belongs to whichever policy drives the run; the tree only
    enforces the marking discipline.
    """

    phase: NodePhase = NodePhase.PENDING
    marking_price: Price | None = None
    visit_rounds: int = 0
    substate: Any = None


class PartitionTree:
    """Lazily materialised partition tree owned by a single run."""

    def __init__(self, params: TreeParams):
        self.params = params
        self._root = NodeId.root(params.d)
        self._nodes: dict[NodeId, NodeState] = {}
        self.traverse_calls = 0

    @property
    def root(self) -> NodeId:
        return self._root

    def is_leaf(self, node: NodeId) -> bool:
        return node.level >= self.params.H

    def state(self, node: NodeId) -> NodeState:
        st = self._nodes.get(node)
        if st is None:
            st = NodeState()
            self._nodes[node] = st
        return st

    def is_marked(self, node: NodeId) -> bool:
        st = self._nodes.get(node)
        return st is not None and st.phase is NodePhase.MARKED

    def traverse(self, x: Context) -> NodeId:
        """Descend from the root through marked cells containing x.

        Stops at the first unmarked node, or at the leaf level; counts the
        visit on the node where it stops.
        """
        node = self._root
        st = self.state(node)
        while st.phase is NodePhase.MARKED and node.level < self.params.H:
            node = child_containing(node, x)
            st = self.state(node)
        st.visit_rounds += 1
        self.traverse_calls += 1
        return node

    def mark(self, node: NodeId, price: Price) -> None:
        """Attach an accepted price to a node.

        Only legal when the parent is already marked (marked nodes always
        form a rooted subtree) and the node itself is not marked yet.
        """
        if not 0.0 <= price <= 1.0:
            raise ValueError(f"marking price {price!r} outside [0, 1]")
        st = self.state(node)
        if st.phase is NodePhase.MARKED:
            raise ValueError(f"{node} already marked")
        if node.level > 0 and not self.is_marked(parent(node)):
            raise ValueError(f"cannot mark {node}: parent not marked")
        st.phase = NodePhase.MARKED
        st.marking_price = price

    def visited(self) -> Iterator[tuple[NodeId, NodeState]]:
        """All materialised nodes in deterministic (level, lattice) order."""
        for node in sorted(self._nodes, key=lambda n: (n.level, n.lattice)):
            yield node, self._nodes[node]

    def dump(self) -> str:
        """Serialise visited nodes as JSON lines for debugging/plotting."""
        lines = []
        for node, st in self.visited():
            lines.append(json.dumps({
                "level": node.level,
                "lattice": list(node.lattice),
                "phase": st.phase.value,
                "marking_price": st.marking_price,
                "visit_rounds": st.visit_rounds,
            }))
        return "\n".join(lines)
