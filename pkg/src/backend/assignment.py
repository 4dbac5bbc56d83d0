"""
Admissibility of configurations for test cases, run cost estimates and the
assignment of a test suite to admissible configurations.

Two solvers share one candidate table: a regret-ordered greedy heuristic and an
exhaustive branch-and-bound oracle for small instances. Both minimize
(number of unassignable test cases, total cost) and never relax admissibility.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from src.backend.configuration import (
    TestBenchConfiguration,
    TestMethodName,
    classify_test_method,
    count_configurations,
    enumerate_configurations,
    selected_elements,
)
from src.backend.errors import InstanceTooLarge, InvalidBudget
from src.backend.taxonomy import CANONICAL_IDS, TestBench
from src.backend.testcase import RequirementProfile, SuiteEntry, TestCase
from src.utils.numbers import Number, to_fraction

logger = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600
EXACT_MAX_TEST_CASES = 8
EXACT_MAX_CONFIGURATIONS = 32

REASON_NO_ADMISSIBLE = "no-admissible-configuration"
REASON_CAPACITY = "capacity-exhausted"


class ViolationCode(Enum):
    MISSING_DIMENSION = "MISSING_DIMENSION"
    STAGE_NOT_ADMISSIBLE = "STAGE_NOT_ADMISSIBLE"
    NOT_VALIDATED_FOR_PURPOSE = "NOT_VALIDATED_FOR_PURPOSE"


@dataclass(frozen=True)
class Violation:
    dimension: str
    code: ViolationCode
    element_id: Optional[str] = None

    def __str__(self) -> str:
        where = f"{self.dimension}/{self.element_id}" if self.element_id else self.dimension
        return f"{self.code.value} at {where}"


@dataclass(frozen=True)
class AdmissibilityReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def admissible(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class CostEstimate:
    execution_time: Fraction  # seconds
    monetary_cost: Fraction


@dataclass(frozen=True)
class CapacityBudget:
    limits: Tuple[Tuple[str, Optional[Fraction]], ...] = ()  # bench id -> max bench time in seconds

    def __post_init__(self):
        cleaned = []
        for bench_id, limit in self.limits:
            if limit is not None:
                try:
                    limit = to_fraction(limit)
                except (TypeError, ValueError):
                    raise InvalidBudget(f"max_bench_time of {bench_id!r} is not a number") from None
                if limit <= 0:
                    raise InvalidBudget(f"max_bench_time of {bench_id!r} must be > 0, got {limit}")
            cleaned.append((str(bench_id), limit))
        object.__setattr__(self, "limits", tuple(sorted(cleaned, key=lambda item: item[0])))

    @classmethod
    def from_mapping(cls, limits: Mapping[str, Optional[Number]]) -> "CapacityBudget":
        return cls(tuple(limits.items()))

    def limit(self, bench_id: str) -> Optional[Fraction]:
        for key, value in self.limits:
            if key == bench_id:
                return value
        return None

    @property
    def is_bounded(self) -> bool:
        return any(value is not None for _, value in self.limits)


@dataclass(frozen=True)
class Candidate:
    bench_id: str
    config_index: int
    configuration: TestBenchConfiguration
    cost: CostEstimate

    @property
    def sort_key(self) -> Tuple[Fraction, str, int]:
        return self.cost.monetary_cost, self.bench_id, self.config_index


@dataclass(frozen=True)
class Assignment:
    test_case_id: str
    bench_id: str
    config_index: int
    configuration: TestBenchConfiguration
    cost: CostEstimate
    test_method: TestMethodName


@dataclass(frozen=True)
class Unassignable:
    test_case_id: str
    reason: str
    # closest configuration per bench: (bench id, configuration index, report)
    reports: Tuple[Tuple[str, int, AdmissibilityReport], ...] = ()


@dataclass(frozen=True)
class AssignmentPlan:
    assignments: Tuple[Assignment, ...]
    unassignable: Tuple[Unassignable, ...]
    total_cost: Fraction
    total_bench_time: Tuple[Tuple[str, Fraction], ...]
    solver: str = field(default="greedy", compare=False)

    def assignment_for(self, test_case_id: str) -> Optional[Assignment]:
        for assignment in self.assignments:
            if assignment.test_case_id == test_case_id:
                return assignment
        return None

    def bench_time(self, bench_id: str) -> Fraction:
        return dict(self.total_bench_time).get(bench_id, Fraction(0))

    @property
    def complete(self) -> bool:
        return not self.unassignable

    @property
    def objective(self) -> Tuple[int, Fraction]:
        return len(self.unassignable), self.total_cost


def check_admissibility(
    config: TestBenchConfiguration, bench: TestBench, profile: RequirementProfile
) -> AdmissibilityReport:
    """Collect every violation, not just the first."""
    elements = selected_elements(config, bench)
    leaves = bench.leaves()
    violations: List[Violation] = []

    for dimension in profile.required_dimensions():
        if dimension in CANONICAL_IDS:
            covered = any(bench.canonical_of(leaf.id) == dimension for leaf in leaves)
        else:
            covered = any(leaf.id == dimension for leaf in leaves)
        if not covered:
            violations.append(Violation(dimension, ViolationCode.MISSING_DIMENSION))

    for element in elements:
        admissible = profile.admissible_for(element.dimension, bench.canonical_of(element.dimension))
        if element.stage not in admissible:
            violations.append(Violation(element.dimension, ViolationCode.STAGE_NOT_ADMISSIBLE, element.id))
    for element in elements:
        if not element.characteristics.is_validated_for(profile.purpose):
            violations.append(Violation(element.dimension, ViolationCode.NOT_VALIDATED_FOR_PURPOSE, element.id))

    return AdmissibilityReport(tuple(violations))


def estimate_cost(config: TestBenchConfiguration, bench: TestBench, tc: TestCase) -> CostEstimate:
    """
    The closed loop runs at the pace of its slowest element; every element is
    billed for the whole run plus its setup cost.
    """
    elements = selected_elements(config, bench)
    slowest = max(e.characteristics.time_factor for e in elements)
    execution_time = tc.scenario.nominal_duration * slowest
    rate = sum((e.characteristics.cost_rate for e in elements), Fraction(0))
    setup = sum((e.characteristics.setup_cost for e in elements), Fraction(0))
    monetary_cost = execution_time / SECONDS_PER_HOUR * rate + setup
    return CostEstimate(execution_time=execution_time, monetary_cost=monetary_cost)


@dataclass
class _CaseCandidates:
    entry: SuiteEntry
    candidates: List[Candidate]
    closest: List[Tuple[str, int, AdmissibilityReport]]

    @property
    def regret(self) -> Optional[Fraction]:
        if len(self.candidates) < 2:
            return None
        return self.candidates[1].cost.monetary_cost - self.candidates[0].cost.monetary_cost


def _candidate_table(
    suite: Sequence[SuiteEntry], benches: Sequence[TestBench], cap: Optional[int]
) -> List[_CaseCandidates]:
    ordered = sorted(benches, key=lambda b: b.id)
    configs = {bench.id: enumerate_configurations(bench, cap) for bench in ordered}

    table = []
    for entry in suite:
        profile = entry.profile()
        candidates: List[Candidate] = []
        closest: List[Tuple[str, int, AdmissibilityReport]] = []
        for bench in ordered:
            best: Optional[Tuple[int, AdmissibilityReport]] = None
            for index, config in enumerate(configs[bench.id]):
                report = check_admissibility(config, bench, profile)
                if report.admissible:
                    cost = estimate_cost(config, bench, entry.test_case)
                    candidates.append(Candidate(bench.id, index, config, cost))
                    logger.debug(f"{entry.test_case.id}: {bench.id}#{index} admissible, cost {float(cost.monetary_cost):.4f}")
                elif best is None or len(report.violations) < len(best[1].violations):
                    best = (index, report)
            if best is not None:
                closest.append((bench.id, best[0], best[1]))
        candidates.sort(key=lambda c: c.sort_key)
        table.append(_CaseCandidates(entry, candidates, closest))
    return table


def _fits(candidate: Candidate, remaining: Dict[str, Optional[Fraction]]) -> bool:
    left = remaining.get(candidate.bench_id)
    return left is None or candidate.cost.execution_time <= left


def _remaining(benches: Sequence[TestBench], budget: Optional[CapacityBudget]) -> Dict[str, Optional[Fraction]]:
    budget = budget or CapacityBudget()
    return {bench.id: budget.limit(bench.id) for bench in benches}


def _consume(remaining: Dict[str, Optional[Fraction]], candidate: Candidate, sign: int = 1) -> None:
    if remaining.get(candidate.bench_id) is not None:
        remaining[candidate.bench_id] -= sign * candidate.cost.execution_time


def _build_plan(
    table: List[_CaseCandidates],
    choices: Sequence[Optional[Candidate]],
    benches: Sequence[TestBench],
    solver: str,
) -> AssignmentPlan:
    by_id = {bench.id: bench for bench in benches}
    assignments = []
    unassignable = []
    bench_time = {bench.id: Fraction(0) for bench in benches}
    total = Fraction(0)
    for case, choice in zip(table, choices):
        tc_id = case.entry.test_case.id
        if choice is None:
            reason = REASON_CAPACITY if case.candidates else REASON_NO_ADMISSIBLE
            unassignable.append(Unassignable(tc_id, reason, tuple(case.closest)))
            logger.warning(f"Test case {tc_id} is unassignable ({reason})")
            continue
        bench = by_id[choice.bench_id]
        assignments.append(Assignment(
            test_case_id=tc_id,
            bench_id=choice.bench_id,
            config_index=choice.config_index,
            configuration=choice.configuration,
            cost=choice.cost,
            test_method=classify_test_method(choice.configuration, bench),
        ))
        bench_time[choice.bench_id] += choice.cost.execution_time
        total += choice.cost.monetary_cost

    plan = AssignmentPlan(
        assignments=tuple(assignments),
        unassignable=tuple(unassignable),
        total_cost=total,
        total_bench_time=tuple(sorted(bench_time.items())),
        solver=solver,
    )
    logger.info(
        f"{solver} plan: {len(assignments)} assigned, {len(unassignable)} unassignable, "
        f"total cost {float(total):.2f}"
    )
    return plan


def assign_greedy(
    suite: Sequence[SuiteEntry],
    benches: Sequence[TestBench],
    budget: Optional[CapacityBudget] = None,
    cap: Optional[int] = None,
) -> AssignmentPlan:
    """
    Cheapest admissible configuration per test case. Under a budget, test cases
    are served in descending regret (second cheapest minus cheapest), a test case
    with a single candidate first, each taking the cheapest candidate that still fits.
    """
    table = _candidate_table(suite, benches, cap)
    remaining = _remaining(benches, budget)
    order = list(range(len(table)))
    if budget is not None and budget.is_bounded:
        def urgency(i: int):
            case = table[i]
            if not case.candidates:
                return 2, Fraction(0), i
            if case.regret is None:
                return 0, Fraction(0), i
            return 1, -case.regret, i
        order.sort(key=urgency)

    choices: List[Optional[Candidate]] = [None] * len(table)
    for i in order:
        pick = next((c for c in table[i].candidates if _fits(c, remaining)), None)
        if pick is not None:
            _consume(remaining, pick)
            choices[i] = pick
    return _build_plan(table, choices, benches, "greedy")


def check_exact_guard(
    suite: Sequence[SuiteEntry],
    benches: Sequence[TestBench],
    max_test_cases: int = EXACT_MAX_TEST_CASES,
    max_configurations: int = EXACT_MAX_CONFIGURATIONS,
) -> None:
    if len(suite) > max_test_cases:
        raise InstanceTooLarge(
            f"exact assignment handles at most {max_test_cases} test cases, got {len(suite)}"
        )
    total = sum(count_configurations(bench) for bench in benches)
    if total > max_configurations:
        raise InstanceTooLarge(
            f"exact assignment handles at most {max_configurations} candidate configurations, got {total}"
        )


def assign_exact(
    suite: Sequence[SuiteEntry],
    benches: Sequence[TestBench],
    budget: Optional[CapacityBudget] = None,
    cap: Optional[int] = None,
    max_test_cases: int = EXACT_MAX_TEST_CASES,
    max_configurations: int = EXACT_MAX_CONFIGURATIONS,
) -> AssignmentPlan:
    """
    Exhaustive branch and bound over all candidate combinations. Candidates are
    tried cheapest first and "leave unassigned" last, and only strictly better
    plans replace the incumbent, so ties resolve exactly like the greedy solver.
    """
    check_exact_guard(suite, benches, max_test_cases, max_configurations)
    table = _candidate_table(suite, benches, cap)
    remaining = _remaining(benches, budget)
    n = len(table)

    # lower bounds for the undecided suffix
    min_cost = [Fraction(0)] * (n + 1)
    forced = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        cands = table[i].candidates
        min_cost[i] = min_cost[i + 1] + (cands[0].cost.monetary_cost if cands else 0)
        forced[i] = forced[i + 1] + (0 if cands else 1)

    best: Dict[str, Union[Tuple[int, Fraction], List[Optional[Candidate]], None]] = {"key": None, "choices": None}
    choices: List[Optional[Candidate]] = []

    def search(i: int, unassigned: int, cost: Fraction) -> None:
        bound = (unassigned + forced[i], cost + min_cost[i])
        if best["key"] is not None and bound >= best["key"]:
            return
        if i == n:
            best["key"] = (unassigned, cost)
            best["choices"] = list(choices)
            return
        for candidate in table[i].candidates:
            if not _fits(candidate, remaining):
                continue
            _consume(remaining, candidate)
            choices.append(candidate)
            search(i + 1, unassigned, cost + candidate.cost.monetary_cost)
            choices.pop()
            _consume(remaining, candidate, sign=-1)
        choices.append(None)
        search(i + 1, unassigned + 1, cost)
        choices.pop()

    search(0, 0, Fraction(0))
    return _build_plan(table, best["choices"] or [], benches, "exact")
