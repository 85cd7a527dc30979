"""Valuation-generating environments and context generators.

An environment hides a map from contexts to (seller, buyer) valuations and
answers posted prices with a single acceptance bit.  The true valuations
are reachable only through ``oracle``, which the harness calls once per
round for regret accounting; policies never hold an environment handle.

Includes the quadratic synthetic family, arbitrary user-supplied Lipschitz
functions, the infimal-convolution extension of a function from a finite
grid to the whole cube, and the two-valuation hard instance family used
for lower-bound experiments.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .core import Context, Price, ValuationPair


class Environment(ABC):
    """Hidden valuation map plus the one-bit price feedback channel."""

    d: int
    lipschitz_bound: float

    def __init__(self, d: int, lipschitz_bound: float):
        self.d = d
        self.lipschitz_bound = lipschitz_bound
        self.oracle_calls = 0

    @abstractmethod
    def _valuations(self, x: Context) -> tuple[float, float]:
        """(f_s(x), f_b(x)); both in [0, 1]."""

    def feedback(self, x: Context, p: Price) -> bool:
        """One bit: did the trade clear at price p."""
        s, b = self._valuations(x)
        return s <= p <= b

    def oracle(self, x: Context) -> ValuationPair:
        """True valuations, for harness-side regret accounting only."""
        self.oracle_calls += 1
        s, b = self._valuations(x)
        return ValuationPair(s, b)

    def oracle_batch(self, xs: np.ndarray) -> np.ndarray:
        """Vectorised oracle for validators: rows of (s, b)."""
        self.oracle_calls += len(xs)
        return np.array([self._valuations(x) for x in xs])


class ConstantEnv(Environment):
    """Context-independent valuations (0-Lipschitz)."""

    def __init__(self, s: float, b: float, d: int = 1, lipschitz_bound: float = 0.0):
        if not (0.0 <= s <= 1.0 and 0.0 <= b <= 1.0):
            raise ValueError("valuations must lie in [0, 1]")
        super().__init__(d, lipschitz_bound)
        self.s = s
        self.b = b

    def _valuations(self, x: Context) -> tuple[float, float]:
        return self.s, self.b

    def oracle_batch(self, xs: np.ndarray) -> np.ndarray:
        self.oracle_calls += len(xs)
        return np.tile((self.s, self.b), (len(xs), 1))


class FunctionEnv(Environment):
    """User-supplied valuation functions with a declared Lipschitz bound."""

    def __init__(self, fs: Callable[[Context], float], fb: Callable[[Context], float],
                 d: int, lipschitz_bound: float):
        super().__init__(d, lipschitz_bound)
        self.fs = fs
        self.fb = fb

    def _valuations(self, x: Context) -> tuple[float, float]:
        return float(self.fs(x)), float(self.fb(x))


class QuadraticEnv(Environment):
    """Valuations (x'Ax + d^2) / (2 d^2) with A, B entries in [-1, 1].

    The 2*d^2 denominator keeps both functions inside [0, 1] and makes them
    1-Lipschitz in the sup norm.
    """

    def __init__(self, A: np.ndarray, B: np.ndarray):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
            raise ValueError("A and B must be square matrices of equal shape")
        if np.abs(A).max() > 1.0 or np.abs(B).max() > 1.0:
            raise ValueError("matrix entries must lie in [-1, 1]")
        d = A.shape[0]
        super().__init__(d, lipschitz_bound=1.0)
        self.A = A
        self.B = B
        self._denom = 2.0 * d * d

    @classmethod
    def sample(cls, d: int, rng: np.random.Generator) -> "QuadraticEnv":
        return cls(rng.uniform(-1.0, 1.0, (d, d)), rng.uniform(-1.0, 1.0, (d, d)))

    def _valuations(self, x: Context) -> tuple[float, float]:
        x = np.asarray(x)
        dd = float(self.d * self.d)
        s = (float(x @ self.A @ x) + dd) / self._denom
        b = (float(x @ self.B @ x) + dd) / self._denom
        return s, b

    def oracle_batch(self, xs: np.ndarray) -> np.ndarray:
        self.oracle_calls += len(xs)
        dd = float(self.d * self.d)
        s = (np.einsum("ti,ij,tj->t", xs, self.A, xs) + dd) / self._denom
        b = (np.einsum("ti,ij,tj->t", xs, self.B, xs) + dd) / self._denom
        return np.column_stack([s, b])


class LipschitzExtension:
    """Tightest-from-above Lipschitz extension of values on a finite set.

    f(x) = min over anchor points x' of (f(x') + L * ||x - x'||_inf).
    Agrees exactly with the anchors on the anchor set and is L-Lipschitz
    on the whole cube.
    """

    def __init__(self, points: np.ndarray, values: np.ndarray, L: float):
        self.points = points
        self.values = values
        self.L = L

    def __call__(self, x: Context) -> float:
        x = np.asarray(x, dtype=float)
        # Exact anchor hits short-circuit so grid agreement is bit-exact.
        hits = np.nonzero((self.points == x).all(axis=1))[0]
        if hits.size:
            return float(self.values[hits[0]])
        dist = np.abs(self.points - x).max(axis=1)
        return float(np.min(self.values + self.L * dist))

    def batch(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate many queries at once; anchor hits stay bit-exact."""
        xs = np.asarray(xs, dtype=float)
        dist = np.abs(xs[:, None, :] - self.points[None, :, :]).max(axis=2)
        out = np.min(self.values[None, :] + self.L * dist, axis=1)
        hit_rows, hit_cols = np.nonzero(dist == 0.0)
        out[hit_rows] = self.values[hit_cols]
        return out


def mcshane_extend(grid_values: Mapping[tuple[float, ...], float], L: float,
                   validate: bool = True) -> LipschitzExtension:
    """Extend a function from finitely many points to all of [0, 1]^d.

    ``grid_values`` maps coordinate tuples to values.  When ``validate`` is
    set, the finite-domain Lipschitz condition is checked pairwise first
    (with 1e-12 slack for rounding) and violations are rejected.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    if not grid_values:
        raise ValueError("need at least one grid point")
    items = sorted(grid_values.items())
    points = np.array([p for p, _ in items], dtype=float)
    values = np.array([v for _, v in items], dtype=float)
    if points.ndim != 2:
        raise ValueError("grid points must share a common dimension")
    if validate:
        for i in range(len(points)):
            dist = np.abs(points - points[i]).max(axis=1)
            gap = np.abs(values - values[i])
            bad = np.nonzero(gap > L * dist + 1e-12)[0]
            if bad.size:
                j = int(bad[0])
                raise ValueError(
                    f"grid values are not {L}-Lipschitz: points {i} and {j} "
                    f"differ by {gap[j]} over distance {dist[j]}"
                )
    return LipschitzExtension(points, values, L)


@dataclass(frozen=True)
class HardInstanceParams:
    """Derived parameters of the two-valuation hard family."""

    L: float
    T: int
    d: int
    delta: float      # context grid pitch, 1 / floor(T^(1/d))
    gamma: float      # 2 L T^(-1/d)
    eps_lb: float     # gamma / 2
    pair0: ValuationPair
    pair1: ValuationPair


def _int_root(T: int, d: int) -> int:
    """floor(T^(1/d)) without float error."""
    m = int(round(T ** (1.0 / d)))
    while m ** d > T:
        m -= 1
    while (m + 1) ** d <= T:
        m += 1
    return m


def hard_instance_params(L: float, T: int, d: int) -> HardInstanceParams:
    if T <= (4.0 * L) ** d:
        raise ValueError(f"need T > (4L)^d = {(4.0 * L) ** d}, got T={T}")
    m = _int_root(T, d)
    gamma = 2.0 * L * T ** (-1.0 / d)
    eps_lb = gamma / 2.0
    return HardInstanceParams(
        L=L, T=T, d=d, delta=1.0 / m, gamma=gamma, eps_lb=eps_lb,
        pair0=ValuationPair(0.5 - gamma, 0.5 - eps_lb),
        pair1=ValuationPair(0.5 + eps_lb, 0.5 + gamma),
    )


class HardInstanceEnv(Environment):
    """Grid contexts assigned to one of two non-overlapping valuation pairs.

    On-grid queries are exact dictionary lookups; off-grid queries fall
    back to the Lipschitz extension of the grid assignment.
    """

    def __init__(self, params: HardInstanceParams, grid: np.ndarray, h: np.ndarray):
        super().__init__(params.d, lipschitz_bound=params.L)
        self.params = params
        self.grid = grid
        self.h = h
        m = round(1.0 / params.delta)
        self._m = m
        pairs = (params.pair0, params.pair1)
        self._table = {
            tuple(np.rint(row * m).astype(int)): pairs[int(bit)]
            for row, bit in zip(grid, h)
        }
        s_vals = {tuple(row): pairs[int(bit)].s for row, bit in zip(grid, h)}
        b_vals = {tuple(row): pairs[int(bit)].b for row, bit in zip(grid, h)}
        # Lipschitz on the grid holds structurally: values differ by
        # gamma - eps_lb = L * T^(-1/d) <= L * delta, the minimal spacing.
        assert params.gamma - params.eps_lb <= params.L * params.delta + 1e-12
        self._ext_s = mcshane_extend(s_vals, params.L, validate=False)
        self._ext_b = mcshane_extend(b_vals, params.L, validate=False)

    def _valuations(self, x: Context) -> tuple[float, float]:
        key = tuple(int(round(xi * self._m)) for xi in x)
        pair = self._table.get(key)
        if pair is not None and all(xi == k / self._m for xi, k in zip(x, key)):
            return pair.s, pair.b
        return self._ext_s(x), self._ext_b(x)


def hypercube_grid(m: int, d: int) -> np.ndarray:
    """All lattice points {0, 1/m, ..., 1}^d in lexicographic order."""
    axis = np.arange(m + 1) / m
    return np.array(list(itertools.product(axis, repeat=d)))


def build_hard_instance(L: float, T: int, d: int, rng: np.random.Generator,
                        shuffle: bool = False) -> tuple[HardInstanceEnv, "GridSequenceContexts"]:
    """Sample one hard instance and its matching context schedule.

    The assignment vector is drawn uniformly over all binary vectors; the
    context generator replays the grid points (optionally shuffled once,
    up front) each exactly once.
    """
    params = hard_instance_params(L, T, d)
    grid = hypercube_grid(_int_root(T, d), d)
    h = rng.integers(0, 2, size=len(grid))
    env = HardInstanceEnv(params, grid, h)
    return env, GridSequenceContexts(grid, shuffle=shuffle)


class UniformRandomContexts:
    """Fresh i.i.d. uniform contexts."""

    def __init__(self, d: int):
        self.d = d

    def generate(self, T: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((T, self.d))

    def max_rounds(self, T: int) -> int:
        return T


class GridSequenceContexts:
    """Replays a fixed point set, each point exactly once."""

    def __init__(self, grid: np.ndarray, shuffle: bool = False):
        self.grid = grid
        self.shuffle = shuffle

    def generate(self, T: int, rng: np.random.Generator) -> np.ndarray:
        if T > len(self.grid):
            raise ValueError(f"only {len(self.grid)} distinct contexts available, asked for {T}")
        if self.shuffle:
            order = rng.permutation(len(self.grid))[:T]
            return self.grid[order]
        return self.grid[:T]

    def max_rounds(self, T: int) -> int:
        return min(T, len(self.grid))


class FileReplayContexts:
    """Replays contexts from a text file: one row of d decimals per line."""

    def __init__(self, path: str | Path, d: int):
        self.path = Path(path)
        self.d = d

    def _load(self) -> np.ndarray:
        rows = []
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) != self.d:
                    raise ValueError(f"{self.path}:{lineno}: expected {self.d} values, got {len(parts)}")
                try:
                    row = [float(p) for p in parts]
                except ValueError as exc:
                    raise ValueError(f"{self.path}:{lineno}: {exc}") from None
                for c in row:
                    if not 0.0 <= c <= 1.0:
                        raise ValueError(f"{self.path}:{lineno}: coordinate {c} outside [0, 1]")
                rows.append(row)
        return np.array(rows)

    def generate(self, T: int, rng: np.random.Generator) -> np.ndarray:
        xs = self._load()
        if len(xs) < T:
            raise ValueError(f"{self.path} holds {len(xs)} contexts, need {T}")
        return xs[:T]

    def max_rounds(self, T: int) -> int:
        return T
