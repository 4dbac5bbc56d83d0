"""
Dimension/stage model of test benches.

A test bench provides elements; every element implements one functionality
(a leaf dimension) at one stage. Canonical dimensions may be substantiated one
level deep, e.g. the environment sensor system by the sensor types of a bench.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

from src.backend.errors import (
    AlreadySubstantiated,
    DuplicateId,
    ElementOnNonLeaf,
    EmptyLeaf,
    EmptySubNames,
    InvalidCharacteristics,
    ParentHoldsElements,
    TaxonomyError,
    UnknownDimension,
)
from src.utils.numbers import Number, to_fraction

logger = logging.getLogger(__name__)


class Stage(Enum):
    """Nominal scale: members define no ordering."""

    SIMULATED = "simulated"
    EMULATED = "emulated"
    REAL = "real"

    @property
    def chart_index(self) -> int:
        """Radius index on the radar chart (1=simulated, 2=emulated, 3=real)."""
        return _CHART_INDEX[self]

    @classmethod
    def parse(cls, value: Union["Stage", str]) -> "Stage":
        if isinstance(value, Stage):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            allowed = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown stage {value!r} (expected one of {allowed})") from None


_CHART_INDEX = {Stage.SIMULATED: 1, Stage.EMULATED: 2, Stage.REAL: 3}

ALL_STAGES: FrozenSet[Stage] = frozenset(Stage)


class DimensionKind(Enum):
    CANONICAL = "canonical"
    SUB_DIMENSION = "sub-dimension"


@dataclass(frozen=True)
class CanonicalDimension:
    id: str
    display_name: str
    definition: str


CANONICAL_DIMENSIONS: Tuple[CanonicalDimension, ...] = (
    CanonicalDimension("test-object", "Test object",
                       "System components under test, including their execution platform."),
    CanonicalDimension("driver-user-behavior", "Driver / user behavior",
                       "Behavior of the driver or user and how they operate the vehicle interfaces."),
    CanonicalDimension("vehicle-dynamics", "Vehicle dynamics",
                       "Movement of the vehicle caused by its actuators."),
    CanonicalDimension("environment-sensor-system", "Environment sensor system",
                       "Characteristics of the sensors perceiving the surroundings."),
    CanonicalDimension("scenery", "Scenery",
                       "Geo-spatially stationary parts of the environment."),
    CanonicalDimension("movable-objects", "Movable objects",
                       "Objects that move, or are able to move, on their own energy."),
    CanonicalDimension("environmental-conditions", "Environmental conditions",
                       "External influences such as weather and lighting."),
    CanonicalDimension("localization-sensor-system", "Localization sensor system",
                       "Characteristics of the sensors used for self-localization."),
    CanonicalDimension("v2x-communication", "V2X communication",
                       "Wireless communication with other participants and infrastructure."),
    CanonicalDimension("residual-vehicle", "Residual vehicle",
                       "Remaining vehicle parts needed to operate the test object."),
)

CANONICAL_IDS: Tuple[str, ...] = tuple(d.id for d in CANONICAL_DIMENSIONS)

# Mixing stages inside one leaf is only shown for movable objects (e.g. real and
# balloon vehicles next to simulated traffic on a vehicle-in-the-loop bench).
DEFAULT_COMBINABLE: FrozenSet[str] = frozenset({"movable-objects"})

# Typical elements per dimension and stage, used by `describe` as a reference.
EXAMPLE_ELEMENTS: Dict[str, Dict[Stage, str]] = {
    "test-object": {
        Stage.REAL: "series control unit",
        Stage.EMULATED: "rapid prototyping control unit",
        Stage.SIMULATED: "program code in the development environment",
    },
    "driver-user-behavior": {
        Stage.REAL: "test driver",
        Stage.EMULATED: "driving robot operating the steering wheel",
        Stage.SIMULATED: "driver model",
    },
    "vehicle-dynamics": {
        Stage.REAL: "dynamics of the series vehicle",
        Stage.EMULATED: "another vehicle with identical dynamic behavior",
        Stage.SIMULATED: "vehicle dynamics model",
    },
    "environment-sensor-system": {
        Stage.REAL: "series radar sensor",
        Stage.EMULATED: "pre-series radar sensor",
        Stage.SIMULATED: "radar sensor model",
    },
    "scenery": {
        Stage.REAL: "real curb or tree",
        Stage.EMULATED: "artificial curb or tree",
        Stage.SIMULATED: "curb or tree model",
    },
    "movable-objects": {
        Stage.REAL: "series vehicle",
        Stage.EMULATED: "balloon vehicle or crash target",
        Stage.SIMULATED: "traffic participant model",
    },
    "environmental-conditions": {
        Stage.REAL: "real rain or fog",
        Stage.EMULATED: "wetted lane or sprinkler rain",
        Stage.SIMULATED: "rain model",
    },
    "localization-sensor-system": {
        Stage.REAL: "series localization sensors",
        Stage.EMULATED: "development localization sensors",
        Stage.SIMULATED: "localization model",
    },
    "v2x-communication": {
        Stage.REAL: "messages sent by another vehicle",
        Stage.EMULATED: "messages from a prototype transmitter",
        Stage.SIMULATED: "V2X message model",
    },
    "residual-vehicle": {
        Stage.REAL: "series vehicle operating the test object",
        Stage.EMULATED: "similar vehicle or hardware",
        Stage.SIMULATED: "rest-bus simulation",
    },
}


@dataclass(frozen=True)
class DimensionNode:
    id: str
    display_name: str
    kind: DimensionKind
    parent: Optional[str] = None
    combinable: bool = False


@dataclass(frozen=True)
class Characteristics:
    validated_for: FrozenSet[str] = frozenset()
    cost_rate: Fraction = Fraction(0)  # currency per hour of operation
    time_factor: Fraction = Fraction(1)  # multiplier on nominal scenario duration
    setup_cost: Fraction = Fraction(0)  # currency per configuration run
    attributes: Tuple[Tuple[str, Any], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "validated_for", frozenset(str(tag) for tag in self.validated_for))
        for name in ("cost_rate", "time_factor", "setup_cost"):
            try:
                object.__setattr__(self, name, to_fraction(getattr(self, name)))
            except (TypeError, ValueError, ZeroDivisionError) as e:
                raise InvalidCharacteristics(f"{name}: {e}", name) from None
        attributes = self.attributes.items() if isinstance(self.attributes, Mapping) else self.attributes
        object.__setattr__(self, "attributes", tuple(sorted((str(k), v) for k, v in attributes)))

        if self.cost_rate < 0:
            raise InvalidCharacteristics(f"cost_rate must be >= 0, got {self.cost_rate}", "cost_rate")
        if self.time_factor <= 0:
            raise InvalidCharacteristics(f"time_factor must be > 0, got {self.time_factor}", "time_factor")
        if self.setup_cost < 0:
            raise InvalidCharacteristics(f"setup_cost must be >= 0, got {self.setup_cost}", "setup_cost")

    def is_validated_for(self, purpose: str) -> bool:
        return purpose in self.validated_for

    def scaled(self, cost_factor: Number) -> "Characteristics":
        """Copy with cost_rate multiplied by cost_factor."""
        return replace(self, cost_rate=self.cost_rate * to_fraction(cost_factor))


@dataclass(frozen=True)
class Element:
    id: str
    display_name: str
    dimension: str
    stage: Stage
    characteristics: Characteristics = field(default_factory=Characteristics)

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage.parse(self.stage))


@dataclass(frozen=True)
class TestBench:
    __test__ = False  # keeps test collectors away from this domain class

    id: str
    display_name: str
    dimensions: Tuple[DimensionNode, ...]
    elements: Tuple[Element, ...] = ()
    warnings: Tuple[str, ...] = field(default=(), compare=False)

    @classmethod
    def skeleton(cls, bench_id: str, display_name: Optional[str] = None) -> "TestBench":
        """Unvalidated bench holding the ten canonical dimensions and no elements."""
        return cls(
            id=bench_id,
            display_name=display_name or bench_id,
            dimensions=tuple(_canonical_node(d) for d in CANONICAL_DIMENSIONS),
        )

    def dimension(self, dimension_id: str) -> Optional[DimensionNode]:
        for node in self.dimensions:
            if node.id == dimension_id:
                return node
        return None

    def children(self, dimension_id: str) -> List[DimensionNode]:
        return [node for node in self.dimensions if node.parent == dimension_id]

    def is_leaf(self, dimension_id: str) -> bool:
        return self.dimension(dimension_id) is not None and not self.children(dimension_id)

    def leaves(self) -> List[DimensionNode]:
        parents = {node.parent for node in self.dimensions if node.parent}
        return [node for node in self.dimensions if node.id not in parents]

    def canonical_of(self, dimension_id: str) -> str:
        node = self.dimension(dimension_id)
        if node is None:
            raise UnknownDimension(f"bench {self.id!r} has no dimension {dimension_id!r}")
        return node.parent or node.id

    def element(self, element_id: str) -> Optional[Element]:
        for element in self.elements:
            if element.id == element_id:
                return element
        return None

    def elements_of(self, dimension_id: str) -> List[Element]:
        return [e for e in self.elements if e.dimension == dimension_id]

    def with_elements(self, *elements: Element) -> "TestBench":
        return replace(self, elements=self.elements + tuple(elements))

    def with_combinable(self, dimension_id: str, combinable: bool) -> "TestBench":
        if self.dimension(dimension_id) is None:
            raise UnknownDimension(f"bench {self.id!r} has no dimension {dimension_id!r}")
        dims = tuple(replace(n, combinable=combinable) if n.id == dimension_id else n for n in self.dimensions)
        return replace(self, dimensions=dims)


def _canonical_node(dim: CanonicalDimension, combinable: Optional[bool] = None) -> DimensionNode:
    return DimensionNode(
        id=dim.id,
        display_name=dim.display_name,
        kind=DimensionKind.CANONICAL,
        combinable=dim.id in DEFAULT_COMBINABLE if combinable is None else combinable,
    )


def _display_name(identifier: str) -> str:
    text = identifier.replace("-", " ").replace("_", " ").strip()
    return text[:1].upper() + text[1:]


def _substantiate(
    dims: List[DimensionNode], parent: str, sub_names: Sequence[str], location: Optional[str] = None
) -> List[DimensionNode]:
    """Structural part of substantiation; element checks are the caller's job."""
    node = next((n for n in dims if n.id == parent), None)
    if node is None:
        raise UnknownDimension(f"cannot substantiate unknown dimension {parent!r}", location)
    if node.kind is not DimensionKind.CANONICAL:
        raise AlreadySubstantiated(f"{parent!r} is a sub-dimension; substantiation is one level deep", location)
    if any(n.parent == parent for n in dims):
        raise AlreadySubstantiated(f"{parent!r} is already substantiated", location)
    names = [str(name).strip() for name in sub_names]
    if not names or any(not name for name in names):
        raise EmptySubNames(f"substantiation of {parent!r} needs non-empty sub-dimension names", location)
    taken = {n.id for n in dims}
    seen = set()
    for name in names:
        if name in taken or name in seen:
            raise DuplicateId(f"dimension id {name!r} is used twice", location)
        seen.add(name)

    subs = [
        DimensionNode(
            id=name,
            display_name=_display_name(name),
            kind=DimensionKind.SUB_DIMENSION,
            parent=parent,
            combinable=node.combinable,
        )
        for name in names
    ]
    index = dims.index(node)
    return dims[: index + 1] + subs + dims[index + 1:]


def _substantiation_warning(parent: str) -> Optional[str]:
    if parent == "test-object":
        return "the test-object dimension is substantiated; check that sub-dimensions describe parts of one test object"
    return None


def substantiate_dimension(bench: TestBench, parent: str, sub_names: Sequence[str]) -> TestBench:
    """Refine a canonical leaf into sub-dimension leaves that inherit its combinable flag."""
    if bench.elements_of(parent):
        raise ParentHoldsElements(f"{parent!r} already holds elements; move them to sub-dimensions first")
    dims = _substantiate(list(bench.dimensions), parent, sub_names)
    warnings = bench.warnings
    warning = _substantiation_warning(parent)
    if warning:
        logger.warning(f"Bench {bench.id}: {warning}")
        warnings = warnings + (warning,)
    return replace(bench, dimensions=tuple(dims), warnings=warnings)


def leaf_dimensions(bench: TestBench) -> List[DimensionNode]:
    """Spoke order: canonical order, sub-dimensions in place of their parent."""
    return bench.leaves()


def stage_profile(bench: TestBench) -> Dict[str, FrozenSet[Stage]]:
    """Per leaf, the stages at which the bench provides at least one element."""
    return {
        leaf.id: frozenset(e.stage for e in bench.elements_of(leaf.id))
        for leaf in bench.leaves()
    }


def describe_bench(bench: TestBench) -> Dict[str, Any]:
    """Registry description of a bench; validate_bench(describe_bench(b)) rebuilds b."""
    substantiations: Dict[str, List[str]] = {}
    combinable: Dict[str, bool] = {}
    by_id = {node.id: node for node in bench.dimensions}
    for node in bench.dimensions:
        if node.parent:
            substantiations.setdefault(node.parent, []).append(node.id)
            inherited = by_id[node.parent].combinable
            if node.combinable != inherited:
                combinable[node.id] = node.combinable
        elif node.combinable != (node.id in DEFAULT_COMBINABLE):
            combinable[node.id] = node.combinable

    return {
        "id": bench.id,
        "display_name": bench.display_name,
        "substantiations": substantiations,
        "combinable": combinable,
        "elements": [_describe_element(e) for e in bench.elements],
    }


def _describe_element(element: Element) -> Dict[str, Any]:
    c = element.characteristics
    described = {
        "id": element.id,
        "display_name": element.display_name,
        "dimension": element.dimension,
        "stage": element.stage.value,
        "validated_for": sorted(c.validated_for),
        "cost_rate": c.cost_rate,
        "time_factor": c.time_factor,
        "setup_cost": c.setup_cost,
    }
    if c.attributes:
        described["attributes"] = dict(c.attributes)
    return described


def collect_bench_issues(raw: Union[Mapping[str, Any], TestBench]) -> Tuple[Optional[TestBench], List[TaxonomyError]]:
    """
    Build a bench from its description and gather every taxonomy problem
    instead of stopping at the first. The bench is None when issues exist.
    """
    if isinstance(raw, TestBench):
        raw = describe_bench(raw)

    issues: List[TaxonomyError] = []
    bench_id = str(raw["id"])
    display_name = str(raw.get("display_name") or bench_id)
    overrides: Mapping[str, bool] = raw.get("combinable") or {}
    substantiations: Mapping[str, Sequence[str]] = raw.get("substantiations") or {}

    dims = [_canonical_node(d, overrides.get(d.id)) for d in CANONICAL_DIMENSIONS]

    warnings: List[str] = []
    parents = sorted(substantiations, key=lambda p: CANONICAL_IDS.index(p) if p in CANONICAL_IDS else len(CANONICAL_IDS))
    for parent in parents:
        location = f"substantiations.{parent}"
        try:
            dims = _substantiate(dims, parent, substantiations[parent], location)
        except TaxonomyError as e:
            issues.append(e)
            continue
        warning = _substantiation_warning(parent)
        if warning:
            logger.warning(f"Bench {bench_id}: {warning}")
            warnings.append(warning)

    known = {n.id for n in dims}
    for dim_id in sorted(overrides):
        if dim_id not in known:
            issues.append(UnknownDimension(f"combinable override for unknown dimension {dim_id!r}",
                                           f"combinable.{dim_id}"))
    dims = [replace(n, combinable=bool(overrides[n.id])) if n.parent and n.id in overrides else n for n in dims]

    parent_ids = {n.parent for n in dims if n.parent}
    leaf_order = {n.id: i for i, n in enumerate(n for n in dims if n.id not in parent_ids)}

    elements: List[Element] = []
    seen_ids = set()
    for i, entry in enumerate(raw.get("elements") or []):
        location = f"elements[{i}]"
        element_id = str(entry["id"])
        dimension = str(entry["dimension"])
        if element_id in seen_ids:
            issues.append(DuplicateId(f"element id {element_id!r} is used twice in bench {bench_id!r}",
                                      f"{location}.id"))
            continue
        seen_ids.add(element_id)
        if dimension not in known:
            issues.append(UnknownDimension(f"element {element_id!r} refers to unknown dimension {dimension!r}",
                                           f"{location}.dimension"))
            continue
        if dimension not in leaf_order:
            issues.append(ElementOnNonLeaf(
                f"element {element_id!r} sits on {dimension!r}, which is substantiated; use one of its sub-dimensions",
                f"{location}.dimension"))
            continue
        try:
            stage = Stage.parse(entry["stage"])
        except ValueError as e:
            issues.append(TaxonomyError(str(e), f"{location}.stage"))
            continue
        try:
            characteristics = Characteristics(
                validated_for=frozenset(entry.get("validated_for") or ()),
                cost_rate=entry.get("cost_rate", 0),
                time_factor=entry.get("time_factor", 1),
                setup_cost=entry.get("setup_cost", 0),
                attributes=entry.get("attributes") or (),
            )
        except InvalidCharacteristics as e:
            issues.append(InvalidCharacteristics(e.message, f"{location}.{e.location}"))
            continue
        elements.append(Element(
            id=element_id,
            display_name=str(entry.get("display_name") or element_id),
            dimension=dimension,
            stage=stage,
            characteristics=characteristics,
        ))

    populated = {e.dimension for e in elements}
    for leaf_id in leaf_order:
        if leaf_id not in populated:
            issues.append(EmptyLeaf(f"leaf dimension {leaf_id!r} of bench {bench_id!r} holds no element",
                                    f"dimensions.{leaf_id}"))

    if issues:
        return None, issues

    elements.sort(key=lambda e: leaf_order[e.dimension])
    return TestBench(
        id=bench_id,
        display_name=display_name,
        dimensions=tuple(dims),
        elements=tuple(elements),
        warnings=tuple(warnings),
    ), issues


def validate_bench(raw: Union[Mapping[str, Any], TestBench]) -> TestBench:
    """
    Turn a bench description (or a draft TestBench) into a validated bench.
    Raises the first taxonomy problem; use collect_bench_issues to see all of them.
    """
    bench, issues = collect_bench_issues(raw)
    if issues:
        raise issues[0]
    logger.debug(f"Validated bench {bench.id}: {len(bench.leaves())} leaves, {len(bench.elements)} elements")
    return bench


def canonical_dimension(dimension_id: str) -> Optional[CanonicalDimension]:
    for dim in CANONICAL_DIMENSIONS:
        if dim.id == dimension_id:
            return dim
    return None
