"""Experiment orchestration: runs, regret accounting, aggregation, checks.

Seeding: every random stream is a PCG64 generator keyed by
SeedSequence([seed, repetition, purpose]) where purpose is one of the
module constants below.  Identical (seed, config) therefore reproduces
every output byte.

Results files are CSV with header ``t,mean_cum_regret,ci_halfwidth,n_reps``
(LF endings, floats via repr so parsing round-trips exactly).  A sidecar
``<out>.meta`` records the config and slope estimates as key=value lines.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .core import ValuationPair, best_gft, gft
from .environments import (
    ConstantEnv,
    Environment,
    FileReplayContexts,
    GridSequenceContexts,
    QuadraticEnv,
    UniformRandomContexts,
    build_hard_instance,
    hard_instance_params,
)
from .policy_known import KnownLConfig, KnownLipschitzPolicy, Phase
from .policy_unknown import UnknownLConfig, UnknownLipschitzPolicy
from .tree import NodeId, TreeParams

# Purpose tags for seed substreams.
SEED_ENV = 0
SEED_CONTEXTS = 1
SEED_POLICY = 2
SEED_VALIDATE = 3

_CONFIG_KEYS = {"policy", "env", "d", "T", "L", "eps", "seed",
                "repetitions", "out_path", "checkpoints"}


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for (seed, repetition, purpose, ...)."""
    if seed < 0 or any(p < 0 for p in path):
        raise ValueError("seed components must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, path)])))


@dataclass(frozen=True)
class RunConfig:
    """One experiment: policy kind, environment spec, sizes, seeding."""

    policy: str                 # "known-L" | "unknown-L"
    env: dict[str, Any]         # {"kind": ..., env params..., "context": {...}}
    d: int
    T: int
    L: float | None = None      # required for known-L and for oracles
    eps: float | None = None
    seed: int = 0
    repetitions: int = 1
    out_path: str | None = None
    checkpoints: str = "auto"   # "auto" | "all"

    def __post_init__(self) -> None:
        if self.policy not in ("known-L", "unknown-L"):
            raise ValueError(f"unknown policy kind {self.policy!r}")
        if self.d < 1 or self.T < 1 or self.repetitions < 1:
            raise ValueError("d, T, repetitions must be positive")
        if self.checkpoints not in ("auto", "all"):
            raise ValueError("checkpoints must be 'auto' or 'all'")
        if self.policy == "known-L" and (self.L is None or self.L <= 0):
            raise ValueError("known-L policy needs a positive L")
        if "kind" not in self.env:
            raise ValueError("env spec needs a 'kind'")
        if self.env["kind"] == "hard":
            hard_instance_params(self.L, self.T, self.d)  # enforce constraints
        if self.T <= 2 ** self.d:
            warnings.warn(f"T={self.T} not large against 2^d={2 ** self.d}; "
                          "regret guarantees are vacuous at this size", stacklevel=2)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        extra = set(raw) - _CONFIG_KEYS
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def flat_items(self) -> list[tuple[str, Any]]:
        """Dotted key/value pairs for the sidecar metadata file."""
        items: list[tuple[str, Any]] = [("policy", self.policy)]
        def walk(prefix: str, obj: Any) -> None:
            if isinstance(obj, dict):
                for k in sorted(obj):
                    walk(f"{prefix}.{k}", obj[k])
            else:
                items.append((prefix, obj))
        walk("env", self.env)
        items += [("d", self.d), ("T", self.T), ("L", self.L), ("eps", self.eps),
                  ("seed", self.seed), ("repetitions", self.repetitions),
                  ("out_path", self.out_path), ("checkpoints", self.checkpoints)]
        return items


@dataclass(frozen=True)
class RunRecord:
    """Per-round ledger entry."""

    t: int
    node: NodeId
    phase: Phase
    price: float
    accepted: bool
    inst_regret: float
    cum_regret: float


def run_round(policy, env: Environment, x, t: int, prev_cum: float,
              rng: np.random.Generator) -> RunRecord:
    """Post one price, feed the bit back, account the regret."""
    price, node, phase = policy.post_price(x, rng)
    accepted = bool(env.feedback(x, price))
    policy.observe(node, phase, price, accepted)
    v = env.oracle(x)
    inst = best_gft(v) - gft(price, v)
    return RunRecord(t=t, node=node, phase=phase, price=price,
                     accepted=accepted, inst_regret=inst, cum_regret=prev_cum + inst)


@dataclass
class RunResult:
    """Everything one repetition produced."""

    rep: int
    rounds: int
    prices: np.ndarray
    accepted: np.ndarray
    inst_regret: np.ndarray
    cum_regret: np.ndarray
    node_regret: dict[NodeId, float]
    policy: Any
    env: Environment
    records: list[RunRecord] | None = None


def build_policy(cfg: RunConfig):
    params = TreeParams.for_horizon(cfg.d, cfg.T)
    if cfg.policy == "known-L":
        return KnownLipschitzPolicy(KnownLConfig(L=cfg.L, params=params, eps=cfg.eps))
    return UnknownLipschitzPolicy(UnknownLConfig(params=params, eps=cfg.eps))


def build_instance(cfg: RunConfig, rep: int):
    """Environment plus context generator for one repetition."""
    spec = cfg.env
    kind = spec["kind"]
    env_rng = substream(cfg.seed, rep, SEED_ENV)
    context_spec = spec.get("context", {"kind": "uniform"})
    if kind == "constant":
        env = ConstantEnv(spec["s"], spec["b"], d=cfg.d,
                          lipschitz_bound=spec.get("lipschitz_bound", 0.0))
    elif kind == "quadratic":
        if "A" in spec or "B" in spec:
            env = QuadraticEnv(np.asarray(spec["A"]), np.asarray(spec["B"]))
        else:
            env = QuadraticEnv.sample(cfg.d, env_rng)
        if env.d != cfg.d:
            raise ValueError("environment dimension does not match config")
    elif kind == "hard":
        env, gen = build_hard_instance(cfg.L, cfg.T, cfg.d, env_rng,
                                       shuffle=spec.get("shuffle", False))
        return env, gen
    else:
        raise ValueError(f"unknown environment kind {kind!r}")
    if context_spec["kind"] == "uniform":
        gen = UniformRandomContexts(cfg.d)
    elif context_spec["kind"] == "file":
        gen = FileReplayContexts(context_spec["path"], cfg.d)
    else:
        raise ValueError(f"unknown context generator {context_spec['kind']!r}")
    return env, gen


def run_single(cfg: RunConfig, rep: int, keep_records: bool = False) -> RunResult:
    """Run one repetition for cfg and collect its ledger."""
    env, gen = build_instance(cfg, rep)
    rounds = gen.max_rounds(cfg.T)
    contexts = gen.generate(rounds, substream(cfg.seed, rep, SEED_CONTEXTS))
    policy = build_policy(cfg)
    rng = substream(cfg.seed, rep, SEED_POLICY)

    prices = np.empty(rounds)
    accepted = np.empty(rounds, dtype=bool)
    inst = np.empty(rounds)
    cum = np.empty(rounds)
    node_regret: dict[NodeId, float] = {}
    records: list[RunRecord] | None = [] if keep_records else None

    prev = 0.0
    for t in range(rounds):
        rec = run_round(policy, env, contexts[t], t + 1, prev, rng)
        prices[t] = rec.price
        accepted[t] = rec.accepted
        inst[t] = rec.inst_regret
        cum[t] = rec.cum_regret
        node_regret[rec.node] = node_regret.get(rec.node, 0.0) + rec.inst_regret
        prev = rec.cum_regret
        if records is not None:
            records.append(rec)

    return RunResult(rep=rep, rounds=rounds, prices=prices, accepted=accepted,
                     inst_regret=inst, cum_regret=cum, node_regret=node_regret,
                     policy=policy, env=env, records=records)


def run_experiment(cfg: RunConfig, keep_records: bool = False) -> list[RunResult]:
    """All repetitions of cfg, in deterministic repetition order."""
    return [run_single(cfg, rep, keep_records=keep_records)
            for rep in range(cfg.repetitions)]


def default_tail_len(T: int) -> int:
    return min(10_000, max(2, T // 10))


def checkpoint_rounds(T: int, mode: str = "auto", tail_len: int | None = None) -> np.ndarray:
    """Round indices persisted to the results file (1-based)."""
    if mode == "all" or T <= 100_000:
        return np.arange(1, T + 1)
    tail = default_tail_len(T) if tail_len is None else tail_len
    geo = np.unique(np.rint(np.geomspace(1, T, 512)).astype(int))
    tail_rounds = np.arange(T - tail + 1, T + 1)
    return np.unique(np.concatenate([geo, tail_rounds]))


@dataclass
class AggregateResult:
    """Mean regret curve across repetitions plus derived statistics."""

    t: np.ndarray
    mean_cum_regret: np.ndarray
    ci_halfwidth: np.ndarray
    n_reps: int
    tail_slope: float | None
    tail_len: int
    per_node_regret: dict[NodeId, float] | None = None
    config: RunConfig | None = None
    final_mean_cum_regret: float = 0.0


def fit_tail_slope(mean_cum_regret: Sequence[float], tail_len: int) -> float:
    """Least-squares slope of log R_t against log t over the last rounds.

    ``mean_cum_regret`` is indexed from round 1.  Raises on nonpositive
    values in the window (slope undefined; happens only for trivially
    solved instances).
    """
    series = np.asarray(mean_cum_regret, dtype=float)
    T = len(series)
    if not 2 <= tail_len <= T:
        raise ValueError(f"need 2 <= tail_len <= {T}, got {tail_len}")
    window = series[T - tail_len:]
    if np.any(window <= 0.0):
        raise ValueError("nonpositive regret in tail window: slope undefined")
    ts = np.arange(T - tail_len + 1, T + 1, dtype=float)
    slope, _ = np.polyfit(np.log(ts), np.log(window), 1)
    return float(slope)


def aggregate(results: list[RunResult], cfg: RunConfig | None = None,
              tail_len: int | None = None, per_node: bool = False) -> AggregateResult:
    """Mean curve, t-distribution 95% CI and tail slope across repetitions."""
    if not results:
        raise ValueError("no runs")
    rounds = min(r.rounds for r in results)
    curves = np.stack([r.cum_regret[:rounds] for r in results])
    n = len(results)
    mean = curves.mean(axis=0)
    if n >= 2:
        sd = curves.std(axis=0, ddof=1)
        ci = float(stats.t.ppf(0.975, n - 1)) * sd / math.sqrt(n)
    else:
        ci = np.zeros(rounds)
    tail = default_tail_len(rounds) if tail_len is None else tail_len
    try:
        slope = fit_tail_slope(mean, tail)
    except ValueError:
        slope = None
    mode = cfg.checkpoints if cfg is not None else "auto"
    marks = checkpoint_rounds(rounds, mode, tail)
    node_sums: dict[NodeId, float] | None = None
    if per_node:
        node_sums = {}
        for r in results:
            for node, v in r.node_regret.items():
                node_sums[node] = node_sums.get(node, 0.0) + v
    return AggregateResult(
        t=marks, mean_cum_regret=mean[marks - 1], ci_halfwidth=ci[marks - 1] if n >= 2 else np.zeros(len(marks)),
        n_reps=n, tail_slope=slope, tail_len=tail, per_node_regret=node_sums,
        config=cfg, final_mean_cum_regret=float(mean[-1]),
    )


def emit_results(agg: AggregateResult, path: str | Path) -> Path:
    """Write the results CSV and its sidecar metadata file."""
    if agg.n_reps < 1 or len(agg.t) == 0:
        raise ValueError("no runs")
    path = Path(path)
    try:
        lines = ["t,mean_cum_regret,ci_halfwidth,n_reps"]
        for t, m, c in zip(agg.t, agg.mean_cum_regret, agg.ci_halfwidth):
            lines.append(f"{int(t)},{float(m)!r},{float(c)!r},{agg.n_reps}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        meta = Path(str(path) + ".meta")
        mlines = []
        if agg.config is not None:
            mlines += [f"{k}={v}" for k, v in agg.config.flat_items()]
        mlines += [f"n_reps={agg.n_reps}",
                   f"tail_len={agg.tail_len}",
                   f"tail_slope={agg.tail_slope}",
                   f"final_mean_cum_regret={agg.final_mean_cum_regret!r}"]
        meta.write_text("\n".join(mlines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def run_and_emit(cfg: RunConfig, path: str | Path | None = None) -> AggregateResult:
    """Convenience wrapper: run, aggregate, write files if a path is known."""
    results = run_experiment(cfg)
    agg = aggregate(results, cfg)
    out = path or cfg.out_path
    if out is not None:
        emit_results(agg, out)
    return agg


# ---------------------------------------------------------------------------
# Claim validators


def validate_markov(N: int, trials: int, seed: int) -> tuple[float, float]:
    """Monte Carlo mean hitting time of the doubling-block success chain.

    States {0} u {N, N+1, ...}; from s in [2^k N, 2^(k+1) N) the chain
    absorbs at 0 with probability 1/(2^k N), else moves to s+1.  This
    models a guesser whose success odds halve each time its candidate set
    doubles; the absorption time from state N should stay below 4N.
    Returns (mean steps to absorption, standard error).

    Within block k every step has the same absorption probability, so the
    time spent in a block is an independent geometric draw truncated at
    the block length; sampling per block is exact and fast.
    """
    if N < 1 or trials < 1:
        raise ValueError("need N >= 1 and trials >= 1")
    rng = substream(seed, SEED_VALIDATE)
    steps = np.zeros(trials, dtype=np.int64)
    active = np.ones(trials, dtype=bool)
    k = 0
    while active.any():
        block_len = (1 << k) * N
        q = 1.0 / block_len
        g = rng.geometric(q, size=int(active.sum()))
        absorbed = g <= block_len
        idx = np.nonzero(active)[0]
        steps[idx] += np.where(absorbed, g, block_len)
        active[idx[absorbed]] = False
        k += 1
    mean = float(steps.mean())
    stderr = float(steps.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return mean, stderr


@dataclass(frozen=True)
class NodeBoundCheck:
    node: NodeId
    bound: float
    max_gft: float

    @property
    def ok(self) -> bool:
        return self.max_gft <= self.bound


@dataclass
class LemmaBoundReport:
    """Region GFT caps after finished calibrations, one entry per node."""

    checks: list[NodeBoundCheck] = field(default_factory=list)

    @property
    def violations(self) -> list[NodeBoundCheck]:
        return [c for c in self.checks if not c.ok]

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_lemma_bounds(cfg: RunConfig, samples_per_node: int = 1000,
                          results: list[RunResult] | None = None) -> LemmaBoundReport:
    """Check the post-calibration GFT cap on every finished node.

    Runs cfg (or reuses ``results`` from it), then densely samples the
    region of every node whose calibration completed and compares the
    oracle GFT against 6 L 2^-level (known-L) or 10 L 2^-level (unknown-L).
    """
    if cfg.L is None or cfg.L <= 0:
        raise ValueError("lemma validation needs the environment's true L in cfg.L")
    factor = 6.0 if cfg.policy == "known-L" else 10.0
    report = LemmaBoundReport()
    for res in (results if results is not None else run_experiment(cfg)):
        rng = substream(cfg.seed, res.rep, SEED_VALIDATE)
        tree = res.policy.tree
        for node, st in tree.visited():
            sub = st.substate
            if sub is None or not sub.reduce_done:
                continue
            side = node.side()
            lo = np.array(node.reference_point())
            pts = lo + rng.random((samples_per_node, node.d)) * side
            vals = res.env.oracle_batch(pts)
            max_gft = float(np.max(vals[:, 1] - vals[:, 0]))
            bound = factor * cfg.L * 2.0 ** -node.level
            report.checks.append(NodeBoundCheck(node=node, bound=bound, max_gft=max_gft))
    return report


def node_decomposition_gap(result: RunResult) -> float:
    """|sum of per-node regret - total cum regret| at the final round."""
    total = float(result.cum_regret[-1]) if result.rounds else 0.0
    return abs(math.fsum(result.node_regret.values()) - total)
