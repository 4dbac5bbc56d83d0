"""
Test cases (a five-layer scenario plus evaluation criteria and a purpose) and the
per-dimension requirement profiles derived from them.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

from src.backend.errors import (
    ContradictoryOverride,
    MalformedTestCase,
    MissingLayer,
    MissingPurpose,
    NoEvaluationCriteria,
    NonPositiveDuration,
)
from src.backend.taxonomy import ALL_STAGES, CANONICAL_IDS, Stage
from src.utils.numbers import to_fraction

logger = logging.getLogger(__name__)

LAYER_FIELDS = (
    "road_level",
    "traffic_infrastructure",
    "temporary_manipulation",
    "movable_objects",
    "environment_conditions",
)

# Needed to run any test case at all, whatever the scenario says.
ALWAYS_REQUIRED_DIMENSIONS: FrozenSet[str] = frozenset(
    {"test-object", "vehicle-dynamics", "driver-user-behavior", "residual-vehicle"}
)
# Required only when an evaluation criterion or an override refers to them.
ON_DEMAND_DIMENSIONS: FrozenSet[str] = frozenset(
    {"environment-sensor-system", "localization-sensor-system", "v2x-communication"}
)

StageOverrides = Mapping[str, Iterable[Union[Stage, str]]]


@dataclass(frozen=True)
class MovableObject:
    type: str
    count: int = 1


@dataclass(frozen=True)
class EvaluationCriterion:
    name: str
    threshold: str = ""
    dimensions: Tuple[str, ...] = ()  # dimensions the criterion observes, e.g. a sensor range check


@dataclass(frozen=True)
class ScenarioLayers:
    road_level: str
    traffic_infrastructure: str
    temporary_manipulation: str
    movable_objects: Tuple[MovableObject, ...]
    environment_conditions: Tuple[str, ...]
    nominal_duration: Fraction  # seconds


@dataclass(frozen=True)
class TestCase:
    __test__ = False

    id: str
    scenario: ScenarioLayers
    evaluation_criteria: Tuple[EvaluationCriterion, ...]
    purpose: str


@dataclass(frozen=True)
class DimensionRequirement:
    admissible_stages: FrozenSet[Stage]
    required: bool


@dataclass(frozen=True)
class RequirementProfile:
    # keyed by canonical dimension id or by a sub-dimension id such as "radar"
    requirements: Tuple[Tuple[str, DimensionRequirement], ...]
    purpose: str
    nominal_duration: Fraction

    def get(self, dimension_id: str) -> Optional[DimensionRequirement]:
        for key, requirement in self.requirements:
            if key == dimension_id:
                return requirement
        return None

    def required_dimensions(self) -> List[str]:
        return [key for key, requirement in self.requirements if requirement.required]

    def admissible_for(self, leaf_id: str, canonical_id: str) -> FrozenSet[Stage]:
        """The most specific entry wins: a sub-dimension entry before its canonical one."""
        requirement = self.get(leaf_id) or self.get(canonical_id)
        return requirement.admissible_stages if requirement else ALL_STAGES


@dataclass(frozen=True)
class SuiteEntry:
    test_case: TestCase
    overrides: Tuple[Tuple[str, FrozenSet[Stage]], ...] = ()

    def profile(self) -> RequirementProfile:
        return derive_requirement_profile(self.test_case, dict(self.overrides))


def _text(raw: Mapping[str, Any], key: str) -> str:
    value = raw.get(key)
    return "" if value is None else str(value).strip()


def _movable_object(raw: Any, test_case_id: str) -> MovableObject:
    if not isinstance(raw, Mapping) or not isinstance(raw.get("type"), str) or not raw["type"].strip():
        raise MalformedTestCase(f"test case {test_case_id!r} has a movable object without a type", test_case_id)
    count = raw.get("count", 1)
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise MalformedTestCase(
            f"test case {test_case_id!r}: movable object {raw['type']!r} needs a positive integer count, got {count!r}",
            test_case_id,
        )
    return MovableObject(type=raw["type"].strip(), count=count)


def _criterion(raw: Any, test_case_id: str) -> EvaluationCriterion:
    if not isinstance(raw, Mapping) or not isinstance(raw.get("name"), str) or not raw["name"].strip():
        raise MalformedTestCase(f"test case {test_case_id!r} has an evaluation criterion without a name", test_case_id)
    threshold = raw.get("threshold", "")
    if not isinstance(threshold, str):
        raise MalformedTestCase(f"test case {test_case_id!r}: threshold of {raw['name']!r} must be a string",
                                test_case_id)
    dimensions = raw.get("dimensions") or []
    if not isinstance(dimensions, (list, tuple)) or not all(isinstance(d, str) and d.strip() for d in dimensions):
        raise MalformedTestCase(
            f"test case {test_case_id!r}: dimensions of {raw['name']!r} must be a list of dimension ids", test_case_id
        )
    return EvaluationCriterion(name=raw["name"].strip(), threshold=threshold,
                               dimensions=tuple(d.strip() for d in dimensions))


def validate_test_case(raw: Mapping[str, Any]) -> TestCase:
    test_case_id = str(raw.get("id", "")).strip()
    scenario = raw.get("scenario")
    if not isinstance(scenario, Mapping):
        raise MissingLayer(f"test case {test_case_id!r} has no scenario", test_case_id)

    missing = [layer for layer in LAYER_FIELDS if layer not in scenario]
    if missing:
        raise MissingLayer(f"test case {test_case_id!r} lacks scenario layer(s): {', '.join(missing)}", test_case_id)
    if not _text(scenario, "road_level"):
        raise MissingLayer(f"test case {test_case_id!r} has an empty road level", test_case_id)

    try:
        duration = to_fraction(scenario.get("nominal_duration", 0))
    except (TypeError, ValueError):
        raise NonPositiveDuration(f"test case {test_case_id!r} has no numeric nominal_duration", test_case_id) from None
    if duration <= 0:
        raise NonPositiveDuration(f"test case {test_case_id!r} needs nominal_duration > 0, got {duration}", test_case_id)

    criteria = tuple(_criterion(c, test_case_id) for c in raw.get("evaluation_criteria") or ())
    if not criteria:
        raise NoEvaluationCriteria(f"test case {test_case_id!r} has no evaluation criteria", test_case_id)

    purpose = _text(raw, "purpose")
    if not purpose:
        raise MissingPurpose(f"test case {test_case_id!r} has no purpose", test_case_id)

    layers = ScenarioLayers(
        road_level=_text(scenario, "road_level"),
        traffic_infrastructure=_text(scenario, "traffic_infrastructure"),
        temporary_manipulation=_text(scenario, "temporary_manipulation"),
        movable_objects=tuple(_movable_object(o, test_case_id) for o in scenario.get("movable_objects") or ()),
        environment_conditions=tuple(str(c) for c in scenario.get("environment_conditions") or ()),
        nominal_duration=duration,
    )
    return TestCase(id=test_case_id, scenario=layers, evaluation_criteria=criteria, purpose=purpose)


def _required_by_scenario(tc: TestCase) -> FrozenSet[str]:
    required = set(ALWAYS_REQUIRED_DIMENSIONS)
    s = tc.scenario
    if s.road_level or s.traffic_infrastructure or s.temporary_manipulation:
        required.add("scenery")
    if s.movable_objects:
        required.add("movable-objects")
    if s.environment_conditions:
        required.add("environmental-conditions")
    for criterion in tc.evaluation_criteria:
        required.update(criterion.dimensions)
    return frozenset(required)


def derive_requirement_profile(tc: TestCase, overrides: Optional[StageOverrides] = None) -> RequirementProfile:
    """
    Map scenario layers onto dimensions: layers 1-3 need scenery, layer 4 movable
    objects, layer 5 environmental conditions. Stages default to all three and are
    only ever narrowed by overrides; an overridden dimension becomes required.
    """
    overrides = overrides or {}
    required = _required_by_scenario(tc)
    entries: Dict[str, DimensionRequirement] = {
        dim: DimensionRequirement(ALL_STAGES, dim in required) for dim in CANONICAL_IDS
    }
    # criteria may name sub-dimensions directly
    for dim in sorted(required - set(CANONICAL_IDS)):
        entries[dim] = DimensionRequirement(ALL_STAGES, True)

    for dim in sorted(overrides):
        stages = frozenset(Stage.parse(s) for s in overrides[dim])
        current = entries.get(dim, DimensionRequirement(ALL_STAGES, True))
        narrowed = current.admissible_stages & stages
        if not narrowed:
            raise ContradictoryOverride(
                f"override for {dim!r} in test case {tc.id!r} leaves no admissible stage", tc.id
            )
        entries[dim] = DimensionRequirement(narrowed, True)

    ordered = [(dim, entries[dim]) for dim in CANONICAL_IDS]
    ordered += [(dim, entries[dim]) for dim in sorted(entries) if dim not in CANONICAL_IDS]
    return RequirementProfile(
        requirements=tuple(ordered),
        purpose=tc.purpose,
        nominal_duration=tc.scenario.nominal_duration,
    )
