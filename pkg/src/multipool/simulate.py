"""Seeded Monte Carlo simulation of pooled-testing strategies.

Six strategies are available, labelled as in the comparison tables:

``A``  one individual test per person
``B``  one round of fixed-size batches, members of positive batches retested once
``C``  one round at the optimal batch size, up to three sequential retests
``D``  parallel square-matrix pooling, sequential retests of flagged people
``E``  multi-round pooling plan, one individual test at positive terminals
``F``  multi-round pooling plan, up to three sequential retests

Each repetition draws its own generator from a ``SeedSequence`` keyed on the
master seed, the infection rate, the repetition index and the strategy name,
so results do not depend on execution order.
"""

from __future__ import annotations

import math
import zlib
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .exceptions import InvertibilityError, SimulationError, StrategyError
from .metrics import UNDEFINED, ConfusionMatrix, Measure, summarize
from .optimize import ObjectiveSpec, optimal_batch_size
from .plan import DEFAULT_P_CUT, Disposition, build_plan
from .prob import ErrorModel, invert_batch_negative_rate

__all__ = [
    "Population",
    "Strategy",
    "TestCounter",
    "RunResult",
    "CellSummary",
    "SimulationReport",
    "MEASURES",
    "generate_population",
    "run_batch_test",
    "run_batches",
    "individual_tests",
    "sequential_tests",
    "estimate_pilot_rate",
    "run_strategy",
    "simulate_repetition",
    "run_experiment",
    "seed_sequence",
]

MEASURES = (
    "accuracy",
    "sensitivity",
    "specificity",
    "ppv",
    "npv",
    "total_tests",
    "batch_tests",
    "individual_tests",
)
P_MAX = 0.5
CLAMP_EPS = 1e-9


@dataclass(frozen=True)
class Population:
    infected: np.ndarray
    true_rate: float

    @property
    def size(self) -> int:
        return int(self.infected.size)

    @property
    def n_infected(self) -> int:
        return int(np.count_nonzero(self.infected))


@dataclass(frozen=True)
class Strategy:
    """A testing policy and its parameters.

    ``batch_size=None`` means "use the optimal size"; setting it on ``E``/``F``
    gives the multi-round fixed-size variant.  ``followup`` is ``"single"`` or
    ``"sequential"``; ``None`` picks the kind's default.  ``replicates``
    repeats the pooling stage in parallel (``D``, or ``B``/``C`` for parallel
    one-step batches).  ``matrix_rule`` chooses how matrix replicates combine:
    ``"pooled-or"`` flags a person whose row pool was positive in some
    replicate and whose column pool was positive in some replicate;
    ``"intersection"`` needs both in the same replicate.

    ``round_assignment`` controls how later multi-round batches are formed:
    ``"carry"`` keeps the order a subpopulation inherited from the previous
    round and cuts it into consecutive batches (only round 1 is shuffled),
    ``"shuffle"`` draws a fresh permutation every round.
    """

    kind: str
    batch_size: Optional[int] = None
    matrix_dim: int = 12
    replicates: Optional[int] = None
    sequential_cap: int = 3
    p_cut: Optional[float] = None
    followup: Optional[str] = None
    matrix_rule: str = "pooled-or"
    rerandomize_replicates: bool = False
    round_assignment: str = "carry"
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in "ABCDEF" or len(self.kind) != 1:
            raise StrategyError(f"unknown strategy kind {self.kind!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise StrategyError("batch_size must be positive")
        if self.kind == "D" and self.matrix_dim < 2:
            raise StrategyError("matrix dimension must be at least 2")
        if self.replicates is not None and self.replicates < 1:
            raise StrategyError("replicates must be positive")
        if self.sequential_cap < 1:
            raise StrategyError("sequential cap must be at least 1")
        if self.p_cut is not None and not 0.0 < self.p_cut <= 1.0:
            raise StrategyError("p_cut must be in (0, 1]")
        if self.followup not in (None, "single", "sequential"):
            raise StrategyError(f"unknown followup {self.followup!r}")
        if self.matrix_rule not in ("pooled-or", "intersection"):
            raise StrategyError(f"unknown matrix rule {self.matrix_rule!r}")
        if self.round_assignment not in ("carry", "shuffle"):
            raise StrategyError(f"unknown round assignment {self.round_assignment!r}")

    @classmethod
    def default(cls, kind: str) -> "Strategy":
        if kind == "B":
            return cls("B", batch_size=10)
        return cls(kind)

    @property
    def label(self) -> str:
        return self.name or self.kind

    @property
    def sequential(self) -> bool:
        if self.followup is not None:
            return self.followup == "sequential"
        return self.kind in "CDF"

    @property
    def n_replicates(self) -> int:
        if self.replicates is not None:
            return self.replicates
        return 3 if self.kind == "D" else 1

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for f in ("batch_size", "replicates", "p_cut", "followup", "name"):
            if getattr(self, f) is not None:
                out[f] = getattr(self, f)
        if self.kind == "D":
            out["matrix_dim"] = self.matrix_dim
            out["matrix_rule"] = self.matrix_rule
            out["rerandomize_replicates"] = self.rerandomize_replicates
        if self.kind in "EF":
            out["round_assignment"] = self.round_assignment
        if self.sequential_cap != 3:
            out["sequential_cap"] = self.sequential_cap
        return out

    @classmethod
    def from_dict(cls, d) -> "Strategy":
        if isinstance(d, str):
            return cls.default(d)
        d = dict(d)
        kind = d.pop("kind")
        base = cls.default(kind)
        return replace(base, **d)


@dataclass
class TestCounter:
    __test__ = False  # not a pytest class

    batch: int = 0
    individual: int = 0

    @property
    def total(self) -> int:
        return self.batch + self.individual


@dataclass(frozen=True)
class RunResult:
    confusion: ConfusionMatrix
    batch_tests: int
    individual_tests: int
    estimated_rate: Optional[float] = None

    @property
    def total_tests(self) -> int:
        return self.batch_tests + self.individual_tests

    def measures(self) -> Dict[str, Measure]:
        out = dict(summarize(self.confusion).as_dict())
        out["total_tests"] = float(self.total_tests)
        out["batch_tests"] = float(self.batch_tests)
        out["individual_tests"] = float(self.individual_tests)
        return out


def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def _rate_key(rate: float) -> int:
    return int(round(rate * 1e9))


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def generate_population(size: int, p: float, seed) -> Population:
    """Independent Bernoulli(``p``) infection marks for ``size`` people."""
    if size < 1:
        raise ValueError("population size must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p!r} outside [0, 1]")
    rng = np.random.default_rng(seed)
    return Population(infected=rng.random(size) < p, true_rate=p)


def _assay(infected: np.ndarray, err: ErrorModel, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(infected.shape[0])
    return np.where(infected, u < 1.0 - err.beta, u < err.alpha)


def run_batch_test(members_infected, err: ErrorModel, rng: np.random.Generator,
                   counter: Optional[TestCounter] = None) -> bool:
    """One pooled assay over a nonempty batch; ``True`` means positive."""
    members_infected = np.asarray(members_infected, dtype=bool)
    if members_infected.size == 0:
        raise ValueError("batch is empty")
    if counter is not None:
        counter.batch += 1
    u = rng.random()
    if members_infected.any():
        return bool(u < 1.0 - err.beta)
    return bool(u < err.alpha)


def run_batches(members: np.ndarray, n: int, infected: np.ndarray, err: ErrorModel,
                rng: np.random.Generator, counter: TestCounter,
                shuffle: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Shuffle ``members`` into batches of ``n`` and pool-test each.

    With ``shuffle=False`` consecutive runs of ``members`` form the batches.
    The last batch holds the remainder.  Returns ``(negative_members,
    positive_members)`` as index arrays.
    """
    m = members.size
    if m == 0:
        return members, members
    perm = rng.permutation(members) if shuffle else np.asarray(members)
    k = -(-m // n)
    padded = np.zeros(k * n, dtype=bool)
    padded[:m] = infected[perm]
    any_inf = padded.reshape(k, n).any(axis=1)
    counter.batch += k
    pos_batch = _assay(any_inf, err, rng)
    pos_member = np.repeat(pos_batch, n)[:m]
    return perm[~pos_member], perm[pos_member]


def individual_tests(members: np.ndarray, infected: np.ndarray, err: ErrorModel,
                     rng: np.random.Generator, counter: TestCounter) -> np.ndarray:
    """One assay per member; returns the members concluded positive."""
    counter.individual += members.size
    return members[_assay(infected[members], err, rng)]


def sequential_tests(members: np.ndarray, infected: np.ndarray, err: ErrorModel,
                     rng: np.random.Generator, counter: TestCounter, cap: int = 3) -> np.ndarray:
    """Retest each member until the first positive, at most ``cap`` times."""
    positive = []
    pending = members
    for _ in range(cap):
        if pending.size == 0:
            break
        counter.individual += pending.size
        hit = _assay(infected[pending], err, rng)
        positive.append(pending[hit])
        pending = pending[~hit]
    if not positive:
        return members[:0]
    return np.concatenate(positive)


def estimate_pilot_rate(sample: np.ndarray, n_guess: int, infected: np.ndarray, err: ErrorModel,
                        rng: np.random.Generator, counter: Optional[TestCounter] = None,
                        p_max: float = P_MAX) -> float:
    """Estimate the infection rate from the batch-negative fraction of a pilot.

    The pilot batches ``sample`` at ``n_guess`` (full batches only).  The
    observed fraction is clamped into the invertible range before inversion
    and the estimate is capped at ``p_max``.
    """
    n_batches = sample.size // n_guess
    if n_batches < 1:
        raise ValueError(f"pilot of {sample.size} cannot fill one batch of {n_guess}")
    counter = counter if counter is not None else TestCounter()
    used = rng.permutation(sample)[: n_batches * n_guess]
    neg, _ = run_batches(used, n_guess, infected, err, rng, counter)
    A_hat = neg.size / (n_batches * n_guess)
    A_hat = min(max(A_hat, err.beta + CLAMP_EPS), 1.0 - err.alpha - CLAMP_EPS)
    try:
        q_hat = invert_batch_negative_rate(A_hat, n_guess, err)
    except InvertibilityError:
        return p_max
    return min(1.0 - q_hat, p_max)


def _conclude(pop: Population, positives: np.ndarray) -> ConfusionMatrix:
    flagged = np.zeros(pop.size, dtype=bool)
    flagged[positives] = True
    return ConfusionMatrix.from_labels(pop.infected, flagged)


def _followup(members, pop, err, rng, counter, strat: Strategy):
    if strat.sequential:
        return sequential_tests(members, pop.infected, err, rng, counter, strat.sequential_cap)
    return individual_tests(members, pop.infected, err, rng, counter)


def _matrix_layout(size: int, dim: int):
    """Row and column pool ids for people ``0..size-1`` laid out in grids.

    Full ``dim x dim`` grids first; the remainder fills a square grid of side
    ``ceil(sqrt(r))`` row by row.
    """
    idx = np.arange(size)
    per = dim * dim
    full = size // per
    rows = np.empty(size, dtype=np.int64)
    cols = np.empty(size, dtype=np.int64)
    cut = full * per
    grid, cell = np.divmod(idx[:cut], per)
    rows[:cut] = grid * dim + cell // dim
    cols[:cut] = grid * dim + cell % dim
    rem = size - cut
    if rem:
        side = math.isqrt(rem - 1) + 1
        cell = idx[cut:] - cut
        rows[cut:] = full * dim + cell // side
        cols[cut:] = full * dim + cell % side
    return rows, cols


def _run_matrix(pop: Population, strat: Strategy, err: ErrorModel, rng, counter: TestCounter):
    size = pop.size
    rows, cols = _matrix_layout(size, strat.matrix_dim)
    n_rows = int(rows.max()) + 1
    n_cols = int(cols.max()) + 1
    row_hit = np.zeros(size, dtype=bool)
    col_hit = np.zeros(size, dtype=bool)
    flagged = np.zeros(size, dtype=bool)
    perm = rng.permutation(size)
    for rep in range(strat.n_replicates):
        if rep and strat.rerandomize_replicates:
            perm = rng.permutation(size)
        inf = pop.infected[perm]
        row_inf = np.bincount(rows, weights=inf, minlength=n_rows) > 0
        col_inf = np.bincount(cols, weights=inf, minlength=n_cols) > 0
        occupied_rows = np.bincount(rows, minlength=n_rows) > 0
        occupied_cols = np.bincount(cols, minlength=n_cols) > 0
        counter.batch += int(occupied_rows.sum() + occupied_cols.sum())
        row_pos = _assay(row_inf, err, rng) & occupied_rows
        col_pos = _assay(col_inf, err, rng) & occupied_cols
        # map results back to people (perm[i] sits in cell i)
        r_p = np.empty(size, dtype=bool)
        c_p = np.empty(size, dtype=bool)
        r_p[perm] = row_pos[rows]
        c_p[perm] = col_pos[cols]
        if strat.matrix_rule == "pooled-or":
            row_hit |= r_p
            col_hit |= c_p
        else:
            flagged |= r_p & c_p
    if strat.matrix_rule == "pooled-or":
        flagged = row_hit & col_hit
    return _followup(np.flatnonzero(flagged), pop, err, rng, counter, strat)


def _run_one_step(pop, strat, err, rng, counter, n):
    everyone = np.arange(pop.size)
    in_positive = np.zeros(pop.size, dtype=bool)
    for _ in range(strat.n_replicates):
        _, pos = run_batches(everyone, n, pop.infected, err, rng, counter)
        in_positive[pos] = True
    return _followup(np.flatnonzero(in_positive), pop, err, rng, counter, strat)


def _run_multi_step(pop, strat, err, rng, counter, p_plan, p_cut):
    plan = build_plan(p_plan, pop.size, err, p_cut=p_cut, prune_below=0.0,
                      batch_size=strat.batch_size)
    nodes = plan.by_pattern()
    positives = []
    queue = deque([("", np.arange(pop.size))])
    while queue:
        pattern, members = queue.popleft()
        if members.size == 0:
            continue
        node = nodes[pattern]
        if node.terminal is Disposition.NONE:
            shuffle = not pattern or strat.round_assignment == "shuffle"
            neg, pos = run_batches(members, node.state.n, pop.infected, err, rng, counter,
                                   shuffle=shuffle)
            queue.append((pattern + "-", neg))
            queue.append((pattern + "+", pos))
        elif node.terminal.individual:
            positives.append(_followup(members, pop, err, rng, counter, strat))
    if not positives:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(positives)


def _planning_rate(pop, rate, err, rng, counter, pilot) -> Tuple[float, Optional[float]]:
    if not pilot:
        return rate, None
    size = min(pilot.get("size", 10_000), pop.size)
    n_guess = pilot.get("batch_size", 10)
    sample = rng.choice(pop.size, size=size, replace=False)
    p_hat = estimate_pilot_rate(sample, n_guess, pop.infected, err, rng, counter)
    return max(p_hat, 1e-6), p_hat


def run_strategy(pop: Population, strat: Strategy, err: ErrorModel, rng: np.random.Generator,
                 p_cut: float = DEFAULT_P_CUT, pilot: Optional[dict] = None,
                 counter: Optional[TestCounter] = None) -> RunResult:
    """Apply ``strat`` to ``pop`` and score the conclusions against the truth.

    ``pilot`` (a dict with ``size`` and ``batch_size``) turns on rate
    estimation from a pilot subset for the strategies that size their
    batches from the infection rate; its tests count as batch tests.
    """
    counter = counter if counter is not None else TestCounter()
    p_cut = strat.p_cut if strat.p_cut is not None else p_cut
    kind = strat.kind
    p_hat = None
    if kind == "A":
        pos = _followup(np.arange(pop.size), pop, err, rng, counter, strat)
    elif kind == "D":
        pos = _run_matrix(pop, strat, err, rng, counter)
    elif kind in "BC":
        n = strat.batch_size
        if n is None:
            p_plan, p_hat = _planning_rate(pop, pop.true_rate, err, rng, counter, pilot)
            n = optimal_batch_size(ObjectiveSpec(p=p_plan, err=err)).n_star
        pos = _run_one_step(pop, strat, err, rng, counter, n)
    else:
        p_plan, p_hat = _planning_rate(pop, pop.true_rate, err, rng, counter, pilot)
        pos = _run_multi_step(pop, strat, err, rng, counter, p_plan, p_cut)
    return RunResult(_conclude(pop, pos), counter.batch, counter.individual, p_hat)


# -- experiments --------------------------------------------------------------


@dataclass(frozen=True)
class CellSummary:
    strategy: str
    rate: float
    mean: Dict[str, Measure]
    std: Dict[str, Measure]
    repetitions: int


@dataclass(frozen=True)
class SimulationReport:
    config: "object"
    cells: Tuple[CellSummary, ...]

    def cell(self, strategy: str, rate: float) -> CellSummary:
        for c in self.cells:
            if c.strategy == strategy and math.isclose(c.rate, rate):
                return c
        raise KeyError((strategy, rate))


def _aggregate(values: List[Measure]) -> Tuple[Measure, Measure]:
    vals = np.array([v for v in values if v is not UNDEFINED], dtype=float)
    if vals.size == 0:
        return UNDEFINED, UNDEFINED
    std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return float(vals.mean()), std


def simulate_repetition(config, rate_index: int, rep: int) -> List[Dict[str, Measure]]:
    """Run every configured strategy on one generated population."""
    rate = config.rates[rate_index]
    err = ErrorModel(config.alpha, config.beta)
    pop = generate_population(config.population_size, rate,
                              seed_sequence(config.seed, 0, _rate_key(rate), rep))
    pilot = {"size": config.pilot_size, "batch_size": config.pilot_batch_size} if config.pilot else None
    out = []
    for strat in config.strategy_objects():
        rng = np.random.default_rng(
            seed_sequence(config.seed, 1, _rate_key(rate), rep, _name_key(strat.label))
        )
        try:
            result = run_strategy(pop, strat, err, rng, p_cut=config.p_cut, pilot=pilot)
        except Exception as exc:  # noqa: BLE001 - re-raised with coordinates
            raise SimulationError(strat.label, rate, rep, exc) from exc
        out.append(result.measures())
    return out


def _task(args):
    config, rate_index, rep = args
    return simulate_repetition(config, rate_index, rep)


def run_experiment(config, workers: Optional[int] = None, progress=None) -> SimulationReport:
    """Run all (strategy, rate) cells for ``config.repetitions`` repetitions.

    Repetitions may run in worker processes; results are collected in a
    fixed (rate, repetition, strategy) order so the report is deterministic.
    """
    strategies = config.strategy_objects()
    if not strategies:
        raise ValueError("no strategies configured")
    if not config.rates:
        raise ValueError("no infection rates configured")
    if config.repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    workers = workers if workers is not None else getattr(config, "workers", 1)
    tasks = [(config, ri, rep) for ri in range(len(config.rates)) for rep in range(config.repetitions)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = []
        for i, t in enumerate(tasks):
            results.append(_task(t))
            if progress is not None:
                progress(i + 1, len(tasks))

    cells = []
    for ri, rate in enumerate(config.rates):
        block = results[ri * config.repetitions:(ri + 1) * config.repetitions]
        for si, strat in enumerate(strategies):
            mean, std = {}, {}
            for m in MEASURES:
                mean[m], std[m] = _aggregate([rep_out[si][m] for rep_out in block])
            cells.append(CellSummary(strat.label, rate, mean, std, config.repetitions))
    # strategy-major order reads like the comparison tables
    order = {s.label: i for i, s in enumerate(strategies)}
    cells.sort(key=lambda c: (order[c.strategy], config.rates.index(c.rate)))
    return SimulationReport(config=config, cells=tuple(cells))
