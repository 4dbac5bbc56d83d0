"""
Test bench configurations: every composition of the elements a bench provides.

Indices into the enumeration are stable (leaf order, then element declaration
order), so "configuration 3 of bench sil" means the same thing in every report.
"""
import itertools
import logging
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from src.backend.errors import CombinatorialLimitExceeded, ForeignConfiguration
from src.backend.taxonomy import Element, Stage, TestBench

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_CAP = 10 ** 6
CONFIG_CAP_ENV = "BENCHLATTICE_CONFIG_CAP"


class TestMethodName(Enum):
    __test__ = False

    SOFTWARE_IN_THE_LOOP = "software-in-the-loop"
    HARDWARE_IN_THE_LOOP = "hardware-in-the-loop"
    DRIVER_IN_THE_LOOP = "driver-in-the-loop"
    VEHICLE_IN_THE_LOOP = "vehicle-in-the-loop"
    TEST_VEHICLE = "test-vehicle"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class TestBenchConfiguration:
    __test__ = False

    bench_id: str
    selection: Tuple[Tuple[str, Tuple[str, ...]], ...]  # (leaf id, element ids) in leaf order

    @classmethod
    def from_mapping(cls, bench_id: str, selection: Mapping[str, Sequence[str]]) -> "TestBenchConfiguration":
        return cls(bench_id, tuple((leaf, tuple(ids)) for leaf, ids in selection.items()))

    def selected(self, leaf_id: str) -> Tuple[str, ...]:
        for leaf, ids in self.selection:
            if leaf == leaf_id:
                return ids
        return ()

    def element_ids(self) -> List[str]:
        return [element_id for _, ids in self.selection for element_id in ids]

    def as_dict(self) -> Dict[str, List[str]]:
        return {leaf: list(ids) for leaf, ids in self.selection}


def resolve_config_cap(explicit: Optional[int] = None, configured: Optional[int] = None) -> int:
    """explicit argument > BENCHLATTICE_CONFIG_CAP > configured value > 10^6."""
    if explicit is not None:
        if int(explicit) < 1:
            raise ValueError(f"configuration cap must be >= 1, got {explicit}")
        return int(explicit)
    raw = os.environ.get(CONFIG_CAP_ENV)
    if raw:
        try:
            value = int(raw)
            if value > 0:
                return value
        except ValueError:
            pass
        logger.warning(f"Ignoring {CONFIG_CAP_ENV}={raw!r}: expected a positive integer")
    if configured is not None and int(configured) > 0:
        return int(configured)
    return DEFAULT_CONFIG_CAP


def _leaf_options(bench: TestBench) -> List[Tuple[str, List[Tuple[str, ...]]]]:
    options = []
    for leaf in bench.leaves():
        ids = [e.id for e in bench.elements_of(leaf.id)]
        if leaf.combinable:
            # non-empty subsets, by size then declaration order
            choices = [c for r in range(1, len(ids) + 1) for c in itertools.combinations(ids, r)]
        else:
            choices = [(element_id,) for element_id in ids]
        options.append((leaf.id, choices))
    return options


def count_configurations(bench: TestBench) -> int:
    """Closed form; never materializes the product."""
    counts = []
    for leaf in bench.leaves():
        n = len(bench.elements_of(leaf.id))
        counts.append(2 ** n - 1 if leaf.combinable else n)
    return math.prod(counts)


def iter_configurations(bench: TestBench) -> Iterator[TestBenchConfiguration]:
    """Uncapped stream in enumeration order."""
    options = _leaf_options(bench)
    leaf_ids = [leaf_id for leaf_id, _ in options]
    for combo in itertools.product(*(choices for _, choices in options)):
        yield TestBenchConfiguration(bench.id, tuple(zip(leaf_ids, combo)))


def enumerate_configurations(bench: TestBench, cap: Optional[int] = None) -> List[TestBenchConfiguration]:
    cap = resolve_config_cap(cap)
    count = count_configurations(bench)
    if count > cap:
        raise CombinatorialLimitExceeded(count, cap)
    configs = list(iter_configurations(bench))
    logger.debug(f"Enumerated {len(configs)} configurations of bench {bench.id}")
    return configs


def configuration_at(bench: TestBench, index: int) -> TestBenchConfiguration:
    """The configuration at a position of the enumeration order."""
    count = count_configurations(bench)
    if index < 0 or index >= count:
        raise IndexError(f"bench {bench.id!r} has {count} configuration(s); index {index} is out of range")
    return next(itertools.islice(iter_configurations(bench), index, None))


def check_membership(config: TestBenchConfiguration, bench: TestBench) -> None:
    """Raise ForeignConfiguration unless config is a composition of bench's elements."""
    if config.bench_id != bench.id:
        raise ForeignConfiguration(f"configuration belongs to bench {config.bench_id!r}, not {bench.id!r}")
    leaves = bench.leaves()
    if [leaf_id for leaf_id, _ in config.selection] != [leaf.id for leaf in leaves]:
        raise ForeignConfiguration(f"configuration does not select along the leaves of bench {bench.id!r}")
    for leaf in leaves:
        ids = config.selected(leaf.id)
        available = {e.id for e in bench.elements_of(leaf.id)}
        if not ids or len(set(ids)) != len(ids):
            raise ForeignConfiguration(f"leaf {leaf.id!r} needs a non-empty selection without repeats")
        if not leaf.combinable and len(ids) != 1:
            raise ForeignConfiguration(f"leaf {leaf.id!r} is not combinable but selects {len(ids)} elements")
        unknown = [element_id for element_id in ids if element_id not in available]
        if unknown:
            raise ForeignConfiguration(f"elements {unknown} are not provided at leaf {leaf.id!r} of bench {bench.id!r}")


def selected_elements(config: TestBenchConfiguration, bench: TestBench) -> List[Element]:
    check_membership(config, bench)
    return [bench.element(element_id) for element_id in config.element_ids()]


def classify_test_method(config: TestBenchConfiguration, bench: TestBench) -> TestMethodName:
    """
    Conventional test method name for the stage pattern of a configuration.
    First matching rule wins; anything else is unclassified.
    """
    elements = selected_elements(config, bench)
    stages: Dict[str, set] = {}
    for element in elements:
        stages.setdefault(bench.canonical_of(element.dimension), set()).add(element.stage)
    every = {e.stage for e in elements}

    def only(dimension: str, stage: Stage) -> bool:
        return stages.get(dimension) == {stage}

    def rest_simulated(dimension: str) -> bool:
        return all(s == {Stage.SIMULATED} for d, s in stages.items() if d != dimension)

    if every == {Stage.REAL}:
        return TestMethodName.TEST_VEHICLE
    if every == {Stage.SIMULATED}:
        return TestMethodName.SOFTWARE_IN_THE_LOOP
    if only("test-object", Stage.REAL) and rest_simulated("test-object"):
        return TestMethodName.HARDWARE_IN_THE_LOOP
    if only("driver-user-behavior", Stage.REAL) and rest_simulated("driver-user-behavior"):
        return TestMethodName.DRIVER_IN_THE_LOOP
    if (
        only("test-object", Stage.REAL)
        and only("vehicle-dynamics", Stage.REAL)
        and only("residual-vehicle", Stage.REAL)
        and stages.get("movable-objects", set()) & {Stage.SIMULATED, Stage.EMULATED}
    ):
        return TestMethodName.VEHICLE_IN_THE_LOOP
    return TestMethodName.UNCLASSIFIED


def method_summary(bench: TestBench, cap: Optional[int] = None) -> Dict[TestMethodName, int]:
    """How many configurations of a bench fall under each test method."""
    summary = {name: 0 for name in TestMethodName}
    for config in enumerate_configurations(bench, cap):
        summary[classify_test_method(config, bench)] += 1
    return {name: n for name, n in summary.items() if n}
