import json
import random
import tempfile
import unittest
from fractions import Fraction
from pathlib import Path

from src.backend.assignment import assign_greedy
from src.backend.errors import (
    RegistryIoError,
    RegistrySyntaxError,
    RegistryValidationError,
    SchemaError,
    SuiteValidationError,
    UnknownDimension,
)
from src.backend.registry import (
    load_budget,
    load_registry,
    load_suite,
    parse_budget,
    parse_registry,
    parse_suite,
    plan_document,
    save_plan,
    save_registry,
    serialize_plan,
    serialize_registry,
)
from src.backend.taxonomy import Stage, describe_bench, validate_bench
from src.utils.paths import get_fixtures_dir
from tests.builders import raw_case, random_bench, sil_bench


def registry_text(*benches) -> str:
    return json.dumps({"format_version": "1", "benches": list(benches)}, default=float)


def raw_sil() -> dict:
    return json.loads(serialize_registry([sil_bench()]))["benches"][0]


def suite_text(*cases) -> str:
    return json.dumps({"format_version": "1", "test_cases": list(cases)})


class TestLoadRegistry(unittest.TestCase):
    def test_lab_registry(self):
        benches = load_registry(get_fixtures_dir() / "lab_registry.json")
        self.assertEqual([b.id for b in benches], ["sil", "test-vehicle", "vil"])
        self.assertEqual(benches[0], sil_bench())

    def test_syntax_error_has_position(self):
        with self.assertRaises(RegistrySyntaxError) as ctx:
            parse_registry('{"format_version": "1",\n  "benches": [,]}', "broken.json")
        self.assertEqual(ctx.exception.path, "broken.json")
        self.assertTrue(ctx.exception.location.startswith("line 2, column"))

    def test_schema_issues_are_aggregated(self):
        raw = raw_sil()
        raw["elements"][0]["stage"] = "virtual"
        raw["elements"][1]["colour"] = "red"
        del raw["elements"][2]["cost_rate"]
        raw["elements"][3]["time_factor"] = 0
        with self.assertRaises(SchemaError) as ctx:
            parse_registry(registry_text(raw))
        issues = {(issue.location, issue.code) for issue in ctx.exception.issues}
        self.assertEqual(issues, {
            ("benches[0].elements[0].stage", "enum"),
            ("benches[0].elements[1].colour", "unknown-field"),
            ("benches[0].elements[2].cost_rate", "missing"),
            ("benches[0].elements[3].time_factor", "range"),
        })

    def test_unsupported_version(self):
        text = json.dumps({"format_version": "2", "benches": []})
        with self.assertRaises(SchemaError) as ctx:
            parse_registry(text)
        self.assertEqual(ctx.exception.issues[0].code, "version")

    def test_taxonomy_issue_location(self):
        raw = raw_sil()
        raw["elements"][4]["dimension"] = "lidar"
        with self.assertRaises(RegistryValidationError) as ctx:
            parse_registry(registry_text(raw))
        error = ctx.exception
        self.assertEqual(error.bench_id, "sil")
        self.assertIsInstance(error.cause, UnknownDimension)
        self.assertEqual(error.location, "benches[0].elements[4].dimension")

    def test_element_on_substantiated_parent(self):
        raw = raw_sil()
        raw["elements"][4]["dimension"] = "environment-sensor-system"
        with self.assertRaises(RegistryValidationError) as ctx:
            parse_registry(registry_text(raw))
        codes = [issue.code for issue in ctx.exception.issues]
        self.assertIn("element-on-non-leaf", codes)
        self.assertIn("empty-leaf", codes)

    def test_duplicate_bench_ids(self):
        with self.assertRaises(RegistryValidationError) as ctx:
            parse_registry(registry_text(raw_sil(), raw_sil()))
        self.assertEqual(ctx.exception.issues[0].location, "benches[1].id")
        self.assertEqual(ctx.exception.issues[0].code, "duplicate-id")

    def test_missing_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(RegistryIoError):
                load_registry(Path(tmp) / "absent.json")


class TestSaveRegistry(unittest.TestCase):
    def test_save_and_load(self):
        benches = load_registry(get_fixtures_dir() / "lab_registry.json")
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "registry.json"
            save_registry(benches, path)
            self.assertEqual(load_registry(path), benches)
            text = path.read_text(encoding="utf-8")
        self.assertTrue(text.endswith("}\n"))
        self.assertEqual(text, serialize_registry(benches))

    def test_unwritable_target(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(RegistryIoError):
                save_registry([sil_bench()], Path(tmp) / "missing" / "registry.json")

    def test_integral_numbers_stay_integers(self):
        document = json.loads(serialize_registry([sil_bench()]))
        element = document["benches"][0]["elements"][0]
        self.assertEqual(element["cost_rate"], 5)
        self.assertIsInstance(element["cost_rate"], int)
        self.assertEqual(element["time_factor"], 0.1)

    def test_random_round_trips(self):
        rng = random.Random(99)
        for n in range(100):
            benches = [random_bench(rng, bench_id=f"bench-{n}-{k}", max_elements=2) for k in range(rng.randint(1, 3))]
            text = serialize_registry(benches)
            loaded = parse_registry(text)
            self.assertEqual(loaded, benches)
            self.assertEqual(serialize_registry(loaded), text)

    def test_exact_ratios_round_trip(self):
        raw = describe_bench(sil_bench())
        raw["elements"][0]["cost_rate"] = Fraction(1, 3)
        raw["elements"][1]["time_factor"] = Fraction(2, 7)
        bench = validate_bench(raw)
        text = serialize_registry([bench])
        element = json.loads(text)["benches"][0]["elements"][0]
        self.assertEqual(element["cost_rate"], "1/3")
        loaded = parse_registry(text)
        self.assertEqual(loaded, [bench])
        self.assertEqual(loaded[0].elements[0].characteristics.cost_rate, Fraction(1, 3))
        self.assertEqual(serialize_registry(loaded), text)

    def test_malformed_ratio_string(self):
        raw = raw_sil()
        raw["elements"][0]["cost_rate"] = "a third"
        raw["elements"][1]["time_factor"] = "0/5"
        with self.assertRaises(SchemaError) as ctx:
            parse_registry(registry_text(raw))
        self.assertEqual([issue.location for issue in ctx.exception.issues],
                         ["benches[0].elements[0].cost_rate", "benches[0].elements[1].time_factor"])

    def test_attributes_survive(self):
        raw = raw_sil()
        raw["elements"][0]["attributes"] = {"vendor": "acme", "channels": 4}
        bench = parse_registry(registry_text(raw))[0]
        self.assertEqual(dict(bench.element("sw-under-test").characteristics.attributes),
                         {"vendor": "acme", "channels": 4})
        self.assertEqual(describe_bench(bench)["elements"][0]["attributes"], {"channels": 4, "vendor": "acme"})


class TestSuites(unittest.TestCase):
    def test_highway_suite(self):
        suite = load_suite(get_fixtures_dir() / "highway_suite.json")
        self.assertEqual([e.test_case.id for e in suite],
                         ["cut-in-rain", "night-overtake", "radar-range", "balloon-emergency-brake"])
        radar = suite[2].profile()
        self.assertEqual(radar.get("environment-sensor-system").admissible_stages, frozenset({Stage.REAL}))
        self.assertTrue(radar.get("environment-sensor-system").required)
        self.assertEqual(suite[0].test_case.scenario.nominal_duration, 60)

    def test_domain_errors_are_collected(self):
        text = suite_text(raw_case(case_id="a", duration=0), raw_case(case_id="b", criteria=[]), raw_case(case_id="c"))
        with self.assertRaises(SuiteValidationError) as ctx:
            parse_suite(text)
        self.assertEqual([issue.location for issue in ctx.exception.issues], ["test_cases[0]", "test_cases[1]"])
        self.assertEqual([issue.code for issue in ctx.exception.issues], ["NonPositiveDuration", "NoEvaluationCriteria"])

    def test_contradictory_override(self):
        case = raw_case()
        case["overrides"] = {"scenery": []}
        with self.assertRaises(SuiteValidationError) as ctx:
            parse_suite(suite_text(case))
        self.assertEqual(ctx.exception.issues[0].code, "ContradictoryOverride")

    def test_bad_override_stage(self):
        case = raw_case()
        case["overrides"] = {"scenery": ["virtual"]}
        with self.assertRaises(SchemaError) as ctx:
            parse_suite(suite_text(case))
        self.assertEqual(ctx.exception.location, "test_cases[0].overrides.scenery[0]")

    def test_duplicate_test_case(self):
        with self.assertRaises(SuiteValidationError):
            parse_suite(suite_text(raw_case(), raw_case()))

    def test_movable_object_fields_are_checked(self):
        case = raw_case(objects=[{"type": "car", "count": "two"}, {"type": "truck", "count": -3},
                                 {"type": "bike", "count": 1.5}, {"type": 7}, {"type": "van", "count": None}])
        with self.assertRaises(SchemaError) as ctx:
            parse_suite(suite_text(case))
        self.assertEqual([issue.location for issue in ctx.exception.issues], [
            "test_cases[0].scenario.movable_objects[0].count",
            "test_cases[0].scenario.movable_objects[1].count",
            "test_cases[0].scenario.movable_objects[2].count",
            "test_cases[0].scenario.movable_objects[3].type",
            "test_cases[0].scenario.movable_objects[4].count",
        ])

    def test_criterion_fields_are_checked(self):
        case = raw_case(criteria=[{"name": "range", "dimensions": "radar"},
                                  {"name": "", "threshold": 3},
                                  {"name": "ttc", "dimensions": ["radar", 4]}])
        with self.assertRaises(SchemaError) as ctx:
            parse_suite(suite_text(case))
        self.assertEqual([issue.location for issue in ctx.exception.issues], [
            "test_cases[0].evaluation_criteria[0].dimensions",
            "test_cases[0].evaluation_criteria[1].name",
            "test_cases[0].evaluation_criteria[1].threshold",
            "test_cases[0].evaluation_criteria[2].dimensions[1]",
        ])

    def test_criterion_dimensions_are_kept_whole(self):
        case = raw_case(criteria=[{"name": "range", "dimensions": ["radar"]}])
        profile = parse_suite(suite_text(case))[0].profile()
        self.assertIn("radar", profile.required_dimensions())
        self.assertNotIn("r", profile.required_dimensions())


class TestBudgets(unittest.TestCase):
    def test_lab_budget(self):
        budget = load_budget(get_fixtures_dir() / "lab_budget.json")
        self.assertIsNone(budget.limit("sil"))
        self.assertEqual(budget.limit("test-vehicle"), 150)
        self.assertEqual(budget.limit("vil"), 3600)

    def test_non_positive_limit(self):
        text = json.dumps({"format_version": "1", "benches": {"sil": {"max_bench_time": 0}}})
        with self.assertRaises(SchemaError) as ctx:
            parse_budget(text)
        self.assertEqual(ctx.exception.location, "benches.sil.max_bench_time")


class TestPlans(unittest.TestCase):
    def setUp(self):
        fixtures = get_fixtures_dir()
        self.plan = assign_greedy(load_suite(fixtures / "highway_suite.json"), [sil_bench()])

    def test_plan_document(self):
        document = plan_document(self.plan)
        self.assertFalse(document["complete"])
        self.assertEqual(document["solver"], "greedy")
        self.assertEqual(document["assignments"][0]["test_method"], "software-in-the-loop")
        self.assertEqual(document["assignments"][0]["selection"]["vehicle-dynamics"], ["single-track-model"])
        closest = document["unassignable"][0]["closest"][0]
        self.assertEqual(closest["bench"], "sil")
        self.assertEqual({v["code"] for v in closest["violations"]}, {"STAGE_NOT_ADMISSIBLE"})

    def test_serialized_plan(self):
        text = serialize_plan(self.plan)
        self.assertEqual(text, serialize_plan(self.plan))
        document = json.loads(text)
        self.assertAlmostEqual(document["total_cost"], float(self.plan.total_cost))
        self.assertEqual(Fraction(str(document["assignments"][0]["monetary_cost"])), Fraction(39, 200))

    def test_save_plan(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "plan.json"
            save_plan(self.plan, path)
            self.assertEqual(json.loads(path.read_text(encoding="utf-8"))["unassignable"][1]["test_case"],
                             "balloon-emergency-brake")


if __name__ == '__main__':
    unittest.main()
