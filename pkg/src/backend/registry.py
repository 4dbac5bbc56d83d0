"""
JSON documents: bench registries, test suites, capacity budgets and plans.

Registries are written by hand, so loading reports every problem at once with
a path-like location ("benches[0].elements[3].stage") instead of failing fast.
Saving is canonical: sorted keys, two-space indent, trailing newline.
"""
import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

from src.backend.assignment import AssignmentPlan, CapacityBudget
from src.backend.errors import (
    BenchLatticeError,
    RegistryIoError,
    RegistryIssue,
    RegistrySyntaxError,
    RegistryValidationError,
    SchemaError,
    SuiteValidationError,
    TaxonomyError,
)
from src.backend.taxonomy import Stage, TestBench, collect_bench_issues, describe_bench
from src.backend.testcase import LAYER_FIELDS, SuiteEntry, derive_requirement_profile, validate_test_case
from src.utils.numbers import to_fraction, to_json_number
from src.utils.paths import atomic_write_text

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1"
STAGE_VALUES = tuple(s.value for s in Stage)

PathLike = Union[str, Path]


class _SchemaChecker:
    """Collects structural issues; every check returns whether the value passed."""

    def __init__(self):
        self.issues: List[RegistryIssue] = []

    def fail(self, location: str, code: str, message: str) -> bool:
        self.issues.append(RegistryIssue(location, code, message))
        return False

    def mapping(self, value: Any, location: str, required: Sequence[str], optional: Sequence[str] = ()) -> bool:
        if not isinstance(value, dict):
            return self.fail(location, "type", "expected an object")
        complete = True
        for key in required:
            if key not in value:
                complete = self.fail(_join(location, key), "missing", "required field is missing")
        for key in sorted(value):
            if key not in required and key not in optional:
                self.fail(_join(location, key), "unknown-field", "field is not part of the format")
        # unknown fields are reported but do not stop checks of the known ones
        return complete

    def string(self, value: Any, location: str, allow_empty: bool = False) -> bool:
        if not isinstance(value, str):
            return self.fail(location, "type", "expected a string")
        if not allow_empty and not value.strip():
            return self.fail(location, "empty", "must not be empty")
        return True

    def number(self, value: Any, location: str, positive: bool = False) -> bool:
        if isinstance(value, str):
            # exact ratios such as "1/3" are written as strings
            try:
                value = to_fraction(value)
            except (ValueError, ZeroDivisionError):
                return self.fail(location, "type", f"expected a number or a ratio like \"1/3\", got {value!r}")
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            return self.fail(location, "type", "expected a number")
        elif isinstance(value, float) and (value != value or value in (float("inf"), float("-inf"))):
            return self.fail(location, "range", f"must be finite, got {value}")
        if positive and value <= 0:
            return self.fail(location, "range", f"must be > 0, got {value}")
        if not positive and value < 0:
            return self.fail(location, "range", f"must be >= 0, got {value}")
        return True

    def array(self, value: Any, location: str, item: Optional[Callable[[Any, str], bool]] = None) -> bool:
        if not isinstance(value, list):
            return self.fail(location, "type", "expected an array")
        ok = True
        if item is not None:
            for i, entry in enumerate(value):
                ok = item(entry, f"{location}[{i}]") and ok
        return ok

    def stage(self, value: Any, location: str) -> bool:
        if value not in STAGE_VALUES:
            return self.fail(location, "enum", f"unknown stage {value!r}; expected one of {', '.join(STAGE_VALUES)}")
        return True

    def version(self, document: Dict[str, Any]) -> None:
        if document.get("format_version") != FORMAT_VERSION:
            self.fail("format_version", "version",
                      f"unsupported format_version {document.get('format_version')!r}; expected {FORMAT_VERSION!r}")


def _join(location: str, key: str) -> str:
    return f"{location}.{key}" if location else key


def _json_default(value: Any) -> Any:
    if isinstance(value, Fraction):
        return to_json_number(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _dumps(document: Any) -> str:
    return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default) + "\n"


def _parse_json(text: str, source: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise RegistrySyntaxError(source, [RegistryIssue(f"line {e.lineno}, column {e.colno}", "syntax", e.msg)]) from None


def _read(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise RegistryIoError(str(path), [RegistryIssue("", "io-error", e.strerror or str(e))]) from None


def _write(path: PathLike, text: str) -> None:
    try:
        atomic_write_text(path, text)
    except OSError as e:
        raise RegistryIoError(str(path), [RegistryIssue("", "io-error", e.strerror or str(e))]) from None
    logger.info(f"Wrote {path}")


# registries

def _check_element(check: _SchemaChecker, element: Any, location: str) -> bool:
    if not check.mapping(element, location,
                         ("id", "dimension", "stage", "validated_for", "cost_rate", "time_factor", "setup_cost"),
                         ("display_name", "attributes")):
        return False
    ok = check.string(element["id"], f"{location}.id")
    ok = check.string(element["dimension"], f"{location}.dimension") and ok
    ok = check.stage(element["stage"], f"{location}.stage") and ok
    ok = check.array(element["validated_for"], f"{location}.validated_for", check.string) and ok
    ok = check.number(element["cost_rate"], f"{location}.cost_rate") and ok
    ok = check.number(element["time_factor"], f"{location}.time_factor", positive=True) and ok
    ok = check.number(element["setup_cost"], f"{location}.setup_cost") and ok
    if "display_name" in element:
        ok = check.string(element["display_name"], f"{location}.display_name") and ok
    if "attributes" in element:
        attributes = element["attributes"]
        if not isinstance(attributes, dict):
            ok = check.fail(f"{location}.attributes", "type", "expected an object")
        else:
            for key in sorted(attributes):
                if not isinstance(attributes[key], (str, int, float, bool)):
                    ok = check.fail(f"{location}.attributes.{key}", "type", "attribute values must be scalars")
    return ok


def _check_bench(check: _SchemaChecker, bench: Any, location: str) -> bool:
    if not check.mapping(bench, location, ("id", "display_name", "elements"), ("substantiations", "combinable")):
        return False
    ok = check.string(bench["id"], f"{location}.id")
    ok = check.string(bench["display_name"], f"{location}.display_name") and ok
    substantiations = bench.get("substantiations", {})
    if not isinstance(substantiations, dict):
        ok = check.fail(f"{location}.substantiations", "type", "expected an object")
    else:
        for parent in sorted(substantiations):
            ok = check.array(substantiations[parent], f"{location}.substantiations.{parent}", check.string) and ok
    combinable = bench.get("combinable", {})
    if not isinstance(combinable, dict):
        ok = check.fail(f"{location}.combinable", "type", "expected an object")
    else:
        for dim in sorted(combinable):
            if not isinstance(combinable[dim], bool):
                ok = check.fail(f"{location}.combinable.{dim}", "type", "expected true or false")
    return check.array(bench["elements"], f"{location}.elements",
                       lambda e, loc: _check_element(check, e, loc)) and ok


def parse_registry(text: str, source: str = "<registry>") -> List[TestBench]:
    document = _parse_json(text, source)
    check = _SchemaChecker()
    if check.mapping(document, "", ("format_version", "benches")):
        check.version(document)
        check.array(document["benches"], "benches", lambda b, loc: _check_bench(check, b, loc))
    if check.issues:
        raise SchemaError(source, check.issues)

    benches: List[TestBench] = []
    causes: List[TaxonomyError] = []
    issues: List[RegistryIssue] = []
    failed_id: Optional[str] = None
    seen = set()
    for i, raw in enumerate(document["benches"]):
        location = f"benches[{i}]"
        if raw["id"] in seen:
            issues.append(RegistryIssue(f"{location}.id", "duplicate-id", f"bench id {raw['id']!r} is used twice"))
            failed_id = failed_id or raw["id"]
            continue
        seen.add(raw["id"])
        bench, errors = collect_bench_issues(raw)
        for error in errors:
            where = _join(location, error.location) if error.location else location
            issues.append(RegistryIssue(where, error.code, f"bench {raw['id']!r}: {error.message}"))
        if errors:
            causes.extend(errors)
            failed_id = failed_id or raw["id"]
        else:
            benches.append(bench)
    if issues:
        raise RegistryValidationError(source, failed_id, causes, issues)
    return benches


def load_registry(path: PathLike) -> List[TestBench]:
    benches = parse_registry(_read(path), str(path))
    logger.info(f"Loaded {len(benches)} bench(es) from {path}")
    return benches


def serialize_registry(benches: Sequence[TestBench]) -> str:
    return _dumps({"format_version": FORMAT_VERSION, "benches": [describe_bench(b) for b in benches]})


def save_registry(benches: Sequence[TestBench], path: PathLike) -> None:
    _write(path, serialize_registry(benches))


# suites

def _check_movable_object(check: _SchemaChecker, raw: Any, location: str) -> bool:
    if not check.mapping(raw, location, ("type",), ("count",)):
        return False
    ok = check.string(raw["type"], f"{location}.type")
    if "count" in raw:
        count = raw["count"]
        if isinstance(count, bool) or not isinstance(count, int):
            ok = check.fail(f"{location}.count", "type", f"expected an integer, got {count!r}")
        elif count < 1:
            ok = check.fail(f"{location}.count", "range", f"must be >= 1, got {count}")
    return ok


def _check_criterion(check: _SchemaChecker, raw: Any, location: str) -> bool:
    if not check.mapping(raw, location, ("name",), ("threshold", "dimensions")):
        return False
    ok = check.string(raw["name"], f"{location}.name")
    if "threshold" in raw:
        ok = check.string(raw["threshold"], f"{location}.threshold", allow_empty=True) and ok
    if "dimensions" in raw:
        ok = check.array(raw["dimensions"], f"{location}.dimensions", check.string) and ok
    return ok


def _check_test_case(check: _SchemaChecker, raw: Any, location: str) -> bool:
    if not check.mapping(raw, location, ("id", "purpose", "scenario", "evaluation_criteria"), ("overrides",)):
        return False
    ok = check.string(raw["id"], f"{location}.id")
    ok = check.string(raw["purpose"], f"{location}.purpose", allow_empty=True) and ok
    scenario = raw["scenario"]
    if not isinstance(scenario, dict):
        ok = check.fail(f"{location}.scenario", "type", "expected an object")
    else:
        for key in sorted(scenario):
            if key not in LAYER_FIELDS and key != "nominal_duration":
                ok = check.fail(f"{location}.scenario.{key}", "unknown-field", "field is not part of the format")
        for key in ("road_level", "traffic_infrastructure", "temporary_manipulation"):
            if key in scenario:
                ok = check.string(scenario[key], f"{location}.scenario.{key}", allow_empty=True) and ok
        if "movable_objects" in scenario:
            ok = check.array(scenario["movable_objects"], f"{location}.scenario.movable_objects",
                             lambda o, loc: _check_movable_object(check, o, loc)) and ok
        if "environment_conditions" in scenario:
            ok = check.array(scenario["environment_conditions"], f"{location}.scenario.environment_conditions",
                             check.string) and ok
        if "nominal_duration" in scenario:
            duration = scenario["nominal_duration"]
            if isinstance(duration, bool) or not isinstance(duration, (int, float)):
                ok = check.fail(f"{location}.scenario.nominal_duration", "type", "expected a number")
    ok = check.array(raw["evaluation_criteria"], f"{location}.evaluation_criteria",
                     lambda c, loc: _check_criterion(check, c, loc)) and ok
    overrides = raw.get("overrides", {})
    if not isinstance(overrides, dict):
        ok = check.fail(f"{location}.overrides", "type", "expected an object")
    else:
        for dim in sorted(overrides):
            ok = check.array(overrides[dim], f"{location}.overrides.{dim}", check.stage) and ok
    return ok


def parse_suite(text: str, source: str = "<suite>") -> List[SuiteEntry]:
    document = _parse_json(text, source)
    check = _SchemaChecker()
    if check.mapping(document, "", ("format_version", "test_cases")):
        check.version(document)
        check.array(document["test_cases"], "test_cases", lambda t, loc: _check_test_case(check, t, loc))
    if check.issues:
        raise SchemaError(source, check.issues)

    entries: List[SuiteEntry] = []
    causes: List[BenchLatticeError] = []
    issues: List[RegistryIssue] = []
    seen = set()
    for i, raw in enumerate(document["test_cases"]):
        location = f"test_cases[{i}]"
        if raw["id"] in seen:
            issues.append(RegistryIssue(f"{location}.id", "duplicate-id", f"test case id {raw['id']!r} is used twice"))
            continue
        seen.add(raw["id"])
        try:
            tc = validate_test_case(raw)
            overrides = {dim: frozenset(Stage.parse(s) for s in stages)
                         for dim, stages in (raw.get("overrides") or {}).items()}
            derive_requirement_profile(tc, overrides)
        except BenchLatticeError as e:
            causes.append(e)
            issues.append(RegistryIssue(location, type(e).__name__, str(e)))
            continue
        entries.append(SuiteEntry(tc, tuple(sorted(overrides.items()))))
    if issues:
        raise SuiteValidationError(source, causes, issues)
    return entries


def load_suite(path: PathLike) -> List[SuiteEntry]:
    entries = parse_suite(_read(path), str(path))
    logger.info(f"Loaded {len(entries)} test case(s) from {path}")
    return entries


# budgets

def parse_budget(text: str, source: str = "<budget>") -> CapacityBudget:
    document = _parse_json(text, source)
    check = _SchemaChecker()
    if check.mapping(document, "", ("format_version", "benches")):
        check.version(document)
        benches = document["benches"]
        if not isinstance(benches, dict):
            check.fail("benches", "type", "expected an object")
        else:
            for bench_id in sorted(benches):
                location = f"benches.{bench_id}"
                if check.mapping(benches[bench_id], location, (), ("max_bench_time",)):
                    limit = benches[bench_id].get("max_bench_time")
                    if limit is not None:
                        check.number(limit, f"{location}.max_bench_time", positive=True)
    if check.issues:
        raise SchemaError(source, check.issues)
    return CapacityBudget.from_mapping(
        {bench_id: entry.get("max_bench_time") for bench_id, entry in document["benches"].items()}
    )


def load_budget(path: PathLike) -> CapacityBudget:
    return parse_budget(_read(path), str(path))


# plans

def plan_document(plan: AssignmentPlan) -> Dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "solver": plan.solver,
        "complete": plan.complete,
        "total_cost": plan.total_cost,
        "total_bench_time": dict(plan.total_bench_time),
        "assignments": [
            {
                "test_case": a.test_case_id,
                "bench": a.bench_id,
                "configuration_index": a.config_index,
                "test_method": a.test_method.value,
                "selection": a.configuration.as_dict(),
                "execution_time": a.cost.execution_time,
                "monetary_cost": a.cost.monetary_cost,
            }
            for a in plan.assignments
        ],
        "unassignable": [
            {
                "test_case": u.test_case_id,
                "reason": u.reason,
                "closest": [
                    {
                        "bench": bench_id,
                        "configuration_index": index,
                        "violations": [
                            {"dimension": v.dimension, "code": v.code.value, "element": v.element_id}
                            for v in report.violations
                        ],
                    }
                    for bench_id, index, report in u.reports
                ],
            }
            for u in plan.unassignable
        ],
    }


def serialize_plan(plan: AssignmentPlan) -> str:
    return _dumps(plan_document(plan))


def save_plan(plan: AssignmentPlan, path: PathLike) -> None:
    _write(path, serialize_plan(plan))
