"""Multi-round pooling plan: the expected-value tree of batch outcomes.

Each subpopulation is identified by the signs of the batch results its
members have seen so far.  A subpopulation is pooled at the batch size that
is optimal for its expected infection rate, then splits into the members of
negative batches and the members of positive batches.  A branch stops once
it has collected three results of the same sign, when its infection rate
exceeds ``p_cut``, or when the optimal batch size drops to two or below.
Branches that stop on negatives are cleared; every other stop goes to
individual testing.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Tuple

from .exceptions import BatchingNotBeneficial
from .optimize import N_MAX, ObjectiveSpec, optimal_batch_size
from .prob import NO_ERROR, ErrorModel, RoundState, subpop_after_negative, subpop_after_positive

__all__ = [
    "Disposition",
    "TerminalMode",
    "PlanNode",
    "Plan",
    "SequentialTestModel",
    "TestCounts",
    "ProcedureAccuracy",
    "classify",
    "build_plan",
    "expected_test_counts",
    "sequential_model",
    "sequential_detection",
    "sequential_false_flag",
    "path_miss_probability",
    "case_false_negative_rates",
    "CASE_PATTERNS",
    "analytic_procedure_accuracy",
    "format_plan",
    "pattern_sort_key",
]

NEG, POS = "-", "+"
DEFAULT_P_CUT = 0.30
DEFAULT_STOP_AFTER = 3


class Disposition(str, Enum):
    NONE = "none"
    CLEARED = "cleared"
    THREE_POSITIVE = "individual-tests (three positives)"
    HIGH_RATE = "individual-tests (rate above cut)"
    SMALL_BATCH = "individual-tests (batch size <= 2)"
    EMPTY = "empty"

    @property
    def individual(self) -> bool:
        return self in (Disposition.THREE_POSITIVE, Disposition.HIGH_RATE, Disposition.SMALL_BATCH)


class TerminalMode(str, Enum):
    SINGLE = "single-individual"
    SEQUENTIAL = "sequential-3"


@dataclass(frozen=True)
class PlanNode:
    pattern: str
    state: RoundState
    terminal: Disposition

    @property
    def round_index(self) -> int:
        return len(self.pattern) + 1

    @property
    def negatives(self) -> int:
        return self.pattern.count(NEG)

    @property
    def positives(self) -> int:
        return self.pattern.count(POS)

    @property
    def batch_tests(self) -> int:
        if self.terminal is not Disposition.NONE or self.state.n is None:
            return 0
        return math.ceil(self.state.N / self.state.n)


@dataclass(frozen=True)
class Plan:
    p1: float
    N1: float
    err: ErrorModel
    p_cut: float
    nodes: Tuple[PlanNode, ...]

    @property
    def root(self) -> PlanNode:
        return self.nodes[0]

    @property
    def terminals(self) -> List[PlanNode]:
        return [nd for nd in self.nodes if nd.terminal is not Disposition.NONE]

    def node(self, pattern: str) -> PlanNode:
        for nd in self.nodes:
            if nd.pattern == pattern:
                return nd
        raise KeyError(pattern)

    def by_pattern(self) -> Dict[str, PlanNode]:
        return {nd.pattern: nd for nd in self.nodes}


class TestCounts(NamedTuple):
    batch_tests: float
    individual_tests: float
    total: float


@dataclass(frozen=True)
class SequentialTestModel:
    """Up to three individual tests, stopping at the first positive.

    ``s1``, ``s2``, ``s3`` are the probabilities that the person's testing
    ends on the first, second or third test.
    """

    s1: float
    s2: float
    s3: float

    @property
    def expected_tests_per_person(self) -> float:
        return self.s1 + 2.0 * self.s2 + 3.0 * self.s3


class ProcedureAccuracy(NamedTuple):
    sensitivity: float
    specificity: float
    case_weighted_false_negative_rate: float
    infected_to_individual: float
    uninfected_to_individual: float


def classify(pattern: str, p: float, err: ErrorModel, p_cut: float = DEFAULT_P_CUT,
             stop_after: int = DEFAULT_STOP_AFTER,
             batch_size: Optional[int] = None) -> Tuple[Disposition, Optional[int]]:
    """Decide what happens to a subpopulation and at which batch size.

    Returns ``(Disposition.NONE, n)`` when the subpopulation is pooled again.
    A fixed ``batch_size`` replaces the optimised one but keeps the stopping
    rules on counts and rate.
    """
    if pattern.count(NEG) >= stop_after:
        return Disposition.CLEARED, None
    if pattern.count(POS) >= stop_after:
        return Disposition.THREE_POSITIVE, None
    if p > p_cut:
        return Disposition.HIGH_RATE, None
    if batch_size is not None:
        return Disposition.NONE, batch_size
    if p <= 0.0:
        # nothing left to find; pool at the largest size allowed
        return Disposition.NONE, N_MAX
    try:
        n = optimal_batch_size(ObjectiveSpec(p=p, err=err)).n_star
    except BatchingNotBeneficial:
        return Disposition.SMALL_BATCH, None
    if n <= 2:
        return Disposition.SMALL_BATCH, None
    return Disposition.NONE, n


def build_plan(p1: float, N1: float, err: ErrorModel = NO_ERROR, p_cut: float = DEFAULT_P_CUT,
               stop_after: int = DEFAULT_STOP_AFTER, prune_below: float = 1.0,
               batch_size: Optional[int] = None) -> Plan:
    """Expand the outcome tree breadth first.

    Nodes whose expected size falls below ``prune_below`` people are kept as
    ``EMPTY`` terminals and charged nothing.
    """
    if not 0.0 < p1 < 1.0:
        raise ValueError(f"p1={p1!r} must be in (0, 1)")
    if not 0.0 < p_cut <= 1.0:
        raise ValueError(f"invalid p_cut={p_cut!r}: must be in (0, 1]")
    if N1 <= 0:
        raise ValueError(f"N1={N1!r} must be positive")

    nodes: List[PlanNode] = []
    queue = deque([("", RoundState(p=p1, N=float(N1)))])
    while queue:
        pattern, state = queue.popleft()
        if pattern and state.N < prune_below:
            nodes.append(PlanNode(pattern, state, Disposition.EMPTY))
            continue
        disp, n = classify(pattern, state.p, err, p_cut, stop_after, batch_size)
        if disp is not Disposition.NONE:
            nodes.append(PlanNode(pattern, state, disp))
            continue
        state = state.with_batch_size(n)
        nodes.append(PlanNode(pattern, state, Disposition.NONE))
        queue.append((pattern + NEG, subpop_after_negative(state, err)))
        queue.append((pattern + POS, subpop_after_positive(state, err)))
    return Plan(p1=p1, N1=float(N1), err=err, p_cut=p_cut, nodes=tuple(nodes))


def sequential_model(p: float, err: ErrorModel = NO_ERROR) -> SequentialTestModel:
    a, b = err.alpha, err.beta
    s1 = (1.0 - b) * p + a * (1.0 - p)
    s2 = b * (1.0 - b) * p + (1.0 - a) * a * (1.0 - p)
    return SequentialTestModel(s1=s1, s2=s2, s3=1.0 - s1 - s2)


def sequential_detection(err: ErrorModel, cap: int = 3) -> float:
    """Probability an infected person tests positive at least once in ``cap`` tries."""
    return 1.0 - err.beta**cap


def sequential_false_flag(err: ErrorModel, cap: int = 3) -> float:
    return 1.0 - (1.0 - err.alpha) ** cap


def _individual_tests_per_person(p: float, err: ErrorModel, mode: TerminalMode) -> float:
    if mode is TerminalMode.SINGLE:
        return 1.0
    return sequential_model(p, err).expected_tests_per_person


def expected_test_counts(plan: Plan, terminal_mode: TerminalMode = TerminalMode.SINGLE) -> TestCounts:
    terminal_mode = TerminalMode(terminal_mode)
    batch = float(sum(nd.batch_tests for nd in plan.nodes))
    individual = sum(
        nd.state.N * _individual_tests_per_person(nd.state.p, plan.err, terminal_mode)
        for nd in plan.terminals
        if nd.terminal.individual
    )
    return TestCounts(batch, individual, batch + individual)


def path_miss_probability(pattern: str, disposition: Disposition, err: ErrorModel,
                          mode: TerminalMode = TerminalMode.SEQUENTIAL) -> float:
    """Probability an infected person follows ``pattern`` and is not detected.

    Treats each batch outcome seen by an infected person as its own assay
    (positive with probability ``1 - beta``).
    """
    b = err.beta
    path = (1.0 - b) ** pattern.count(POS) * b ** pattern.count(NEG)
    if disposition is Disposition.CLEARED:
        return path
    if disposition.individual:
        miss = b**3 if TerminalMode(mode) is TerminalMode.SEQUENTIAL else b
        return path * miss
    return 0.0


CASE_PATTERNS: Dict[int, str] = {
    1: "---", 2: "--+-", 3: "-+--", 4: "+---",
    5: "--++-", 6: "-+-+-", 7: "-++--", 8: "+--+-", 9: "+-+--", 10: "++---",
    11: "+++", 12: "++-+", 13: "+-++", 14: "-+++",
    15: "++--+", 16: "+-+-+", 17: "+--++", 18: "-++-+", 19: "-+-++", 20: "--+++",
}


def case_false_negative_rates(err: ErrorModel = NO_ERROR) -> Dict[int, float]:
    """False negative probability of each of the twenty three-of-a-kind paths.

    Cases 1-10 end on three negatives, cases 11-20 on three positives followed
    by up to three sequential individual tests.
    """
    out = {}
    for case, pattern in CASE_PATTERNS.items():
        disp = Disposition.CLEARED if case <= 10 else Disposition.THREE_POSITIVE
        out[case] = path_miss_probability(pattern, disp, err, TerminalMode.SEQUENTIAL)
    return out


def analytic_procedure_accuracy(plan: Plan, terminal_mode: TerminalMode = TerminalMode.SINGLE) -> ProcedureAccuracy:
    """Expected sensitivity and specificity of the whole procedure.

    Infected people reaching individual testing are detected with probability
    ``1 - beta`` (single test) or ``1 - beta^3`` (sequential); uninfected ones
    are falsely flagged with ``alpha`` or ``1 - (1 - alpha)^3``.  The
    case-weighted false negative rate sums each terminal's path miss
    probability times its expected size, over the population size.
    """
    terminal_mode = TerminalMode(terminal_mode)
    err = plan.err
    if terminal_mode is TerminalMode.SINGLE:
        detect, false_flag = 1.0 - err.beta, err.alpha
    else:
        detect, false_flag = sequential_detection(err), sequential_false_flag(err)
    ind = [nd for nd in plan.terminals if nd.terminal.individual]
    infected = sum(nd.state.N * nd.state.p for nd in ind)
    uninfected = sum(nd.state.N * (1.0 - nd.state.p) for nd in ind)
    sens = detect * infected / (plan.N1 * plan.p1)
    spec = 1.0 - false_flag * uninfected / (plan.N1 * (1.0 - plan.p1))
    weighted = sum(
        path_miss_probability(nd.pattern, nd.terminal, err, terminal_mode) * nd.state.N
        for nd in plan.terminals
    ) / plan.N1
    return ProcedureAccuracy(sens, spec, weighted, infected, uninfected)


def pattern_sort_key(node: PlanNode):
    bits = tuple(0 if c == NEG else 1 for c in node.pattern)
    if node.terminal.individual:
        return (1, len(bits), tuple(-x for x in bits))
    return (0, len(bits), bits)


def _fmt_p(p: float) -> str:
    if p == 0:
        return "0"
    if p < 1e-3:
        return f"{p:.0e}"
    return f"{p:.3g}".lstrip("0") if p < 1 else f"{p:.3g}"


def format_plan(plan: Plan) -> str:
    """Plain-text plan laid out like a per-pattern round table.

    One row per terminal subpopulation; for each round after the first it
    lists the expected infection rate, size and batch size of the ancestor
    subpopulation.  A ``*`` marks the row where that subpopulation is
    charged (its first appearance).
    """
    table = plan.by_pattern()
    max_round = max((nd.round_index for nd in plan.nodes if nd.terminal is Disposition.NONE), default=1)
    root = plan.root
    lines = [
        f"# multi-round pooling plan: p1={plan.p1:g} N1={plan.N1:g} "
        f"alpha={plan.err.alpha:g} beta={plan.err.beta:g} p_cut={plan.p_cut:g}",
    ]
    if root.terminal is Disposition.NONE:
        lines.append(f"round 1: {root.batch_tests} tests with batch size {root.state.n}")
    else:
        lines.append(f"round 1: root is terminal ({root.terminal.value})")

    header = ["pattern"]
    for r in range(2, max_round + 1):
        header += [f"p{r}", f"N{r}", f"n{r}"]
    header += ["p_final", "N_final", "disposition"]
    lines.append("\t".join(header))

    if root.terminal is not Disposition.NONE:
        lines.append("\t".join(["(all)", _fmt_p(root.state.p), f"{root.state.N:.0f}", root.terminal.value]))
    rows = sorted((nd for nd in plan.terminals if nd.pattern), key=pattern_sort_key)
    # charge each ancestor on the shortest row that shows it, earliest row on ties
    charged_on = {}
    for idx, term in sorted(enumerate(rows), key=lambda t: (len(t[1].pattern), t[0])):
        for r in range(1, len(term.pattern)):
            charged_on.setdefault(term.pattern[:r], idx)
    for idx, term in enumerate(rows):
        cells = [" ".join(term.pattern)]
        for r in range(2, max_round + 1):
            prefix = term.pattern[: r - 1]
            if len(prefix) < r - 1 or prefix == term.pattern:
                cells += ["", "", ""]
                continue
            nd = table[prefix]
            mark = "*" if charged_on.get(prefix) == idx else ""
            cells += [_fmt_p(nd.state.p), f"{mark}{nd.state.N:.0f}", f"{mark}{nd.state.n}"]
        cells += [_fmt_p(term.state.p), f"{term.state.N:.0f}", term.terminal.value]
        lines.append("\t".join(cells))

    for mode in TerminalMode:
        c = expected_test_counts(plan, mode)
        acc = analytic_procedure_accuracy(plan, mode)
        lines.append(
            f"[{mode.value}] batch={c.batch_tests:.0f} individual={c.individual_tests:.0f} "
            f"total={c.total:.0f} sensitivity={acc.sensitivity:.4f} "
            f"specificity={acc.specificity:.6f} case_weighted_fnr={acc.case_weighted_false_negative_rate:.6f}"
        )
    return "\n".join(lines) + "\n"
