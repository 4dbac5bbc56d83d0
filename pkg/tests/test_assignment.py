import random
import unittest
from fractions import Fraction

from src.backend.assignment import (
    REASON_CAPACITY,
    REASON_NO_ADMISSIBLE,
    CapacityBudget,
    ViolationCode,
    assign_exact,
    assign_greedy,
    check_admissibility,
    check_exact_guard,
    estimate_cost,
)
from src.backend.configuration import TestMethodName, configuration_at, enumerate_configurations
from src.backend.errors import InstanceTooLarge, InvalidBudget
from src.backend.registry import load_registry, load_suite
from src.backend.taxonomy import CANONICAL_IDS, Stage
from src.utils.paths import get_fixtures_dir
from tests.builders import (
    bench_with,
    element,
    entry,
    make_case,
    random_bench,
    scale_cost_rates,
    sil_bench,
    test_vehicle_bench,
    uniform_bench,
    vil_bench,
)


def lab():
    fixtures = get_fixtures_dir()
    return load_registry(fixtures / "lab_registry.json"), load_suite(fixtures / "highway_suite.json")


def choices(plan):
    return [(a.test_case_id, a.bench_id, a.config_index) for a in plan.assignments]


def random_suite(rng, size):
    suite = []
    for i in range(size):
        overrides = {}
        for dim in rng.sample(["test-object", "scenery", "movable-objects", "vehicle-dynamics"], rng.randint(0, 2)):
            overrides[dim] = rng.sample(list(Stage), rng.randint(1, 3))
        tc = make_case(case_id=f"tc{i}", duration=rng.randint(10, 120),
                       purpose=rng.choice(["safety-validation", "development"]))
        suite.append(entry(tc, overrides))
    return suite


class TestAdmissibility(unittest.TestCase):
    def test_sil_admits_simulation_case(self):
        bench = sil_bench()
        profile = entry(make_case()).profile()
        self.assertTrue(check_admissibility(configuration_at(bench, 0), bench, profile).admissible)

    def test_stage_violations_on_sub_dimensions(self):
        bench = sil_bench()
        profile = entry(make_case(), {"environment-sensor-system": [Stage.REAL]}).profile()
        report = check_admissibility(configuration_at(bench, 0), bench, profile)
        self.assertFalse(report.admissible)
        self.assertEqual(
            {(v.dimension, v.code, v.element_id) for v in report.violations},
            {
                ("radar", ViolationCode.STAGE_NOT_ADMISSIBLE, "radar-model"),
                ("camera", ViolationCode.STAGE_NOT_ADMISSIBLE, "camera-model"),
            },
        )

    def test_purpose_is_checked_for_every_element(self):
        bench = test_vehicle_bench()
        profile = entry(make_case(purpose="development")).profile()
        report = check_admissibility(configuration_at(bench, 0), bench, profile)
        codes = [v.code for v in report.violations]
        self.assertEqual(codes, [ViolationCode.NOT_VALIDATED_FOR_PURPOSE] * 10)

    def test_missing_sub_dimension(self):
        bench = sil_bench()
        criteria = [{"name": "lidar range", "dimensions": ["lidar"]}]
        profile = entry(make_case(criteria=criteria)).profile()
        report = check_admissibility(configuration_at(bench, 0), bench, profile)
        self.assertEqual([(v.dimension, v.code) for v in report.violations],
                         [("lidar", ViolationCode.MISSING_DIMENSION)])

    def test_collects_all_violations(self):
        bench = test_vehicle_bench()
        profile = entry(make_case(purpose="development"), {"scenery": [Stage.SIMULATED]}).profile()
        report = check_admissibility(configuration_at(bench, 0), bench, profile)
        self.assertEqual(len(report.violations), 11)
        self.assertEqual(report.violations[0].code, ViolationCode.STAGE_NOT_ADMISSIBLE)


class TestCostEstimate(unittest.TestCase):
    def test_sil_costs(self):
        bench = sil_bench()
        tc = make_case(duration=60)
        first = estimate_cost(configuration_at(bench, 0), bench, tc)
        second = estimate_cost(configuration_at(bench, 1), bench, tc)
        self.assertEqual(first.execution_time, 18)
        self.assertEqual(first.monetary_cost, Fraction(39, 200))
        self.assertEqual(second.execution_time, 24)
        self.assertEqual(second.monetary_cost, Fraction(43, 150))

    def test_setup_cost_is_added_once(self):
        bench = test_vehicle_bench()
        cost = estimate_cost(configuration_at(bench, 0), bench, make_case(duration=3600))
        self.assertEqual(cost.execution_time, 3600)
        self.assertEqual(cost.monetary_cost, 710 + 200)

    def test_slowest_element_sets_the_pace(self):
        per_leaf = {dim: [element(f"fast-{dim}", dim, Stage.SIMULATED, time_factor=0.2)] for dim in CANONICAL_IDS}
        per_leaf["test-object"] = [element("ecu", "test-object", Stage.SIMULATED, rate=60, time_factor=0.2)]
        per_leaf["scenery"] = [element("road", "scenery", Stage.SIMULATED, rate=40, time_factor=0.5)]
        per_leaf["v2x-communication"] = [element("v2x", "v2x-communication", Stage.SIMULATED, time_factor=0.5)]
        bench = bench_with("pace", per_leaf)
        cost = estimate_cost(configuration_at(bench, 0), bench, make_case(duration=360))
        self.assertEqual(cost.execution_time, 180)
        self.assertEqual(cost.monetary_cost, 5)

    def test_identity_case(self):
        bench = bench_with("idle", {})
        cost = estimate_cost(configuration_at(bench, 0), bench, make_case(duration=75))
        self.assertEqual((cost.execution_time, cost.monetary_cost), (75, 0))

    def test_slower_than_real_time(self):
        ecu = element("ecu", "test-object", Stage.SIMULATED, rate=36, time_factor=2, setup=1)
        bench = bench_with("slow", {"test-object": [ecu]})
        cost = estimate_cost(configuration_at(bench, 0), bench, make_case(duration=100))
        self.assertEqual(cost.execution_time, 200)
        self.assertEqual(cost.monetary_cost, 3)

    def test_adding_elements_never_gets_cheaper(self):
        bench = vil_bench()
        tc = make_case(duration=45)
        configs = enumerate_configurations(bench)
        costs = [estimate_cost(config, bench, tc) for config in configs]
        for index, config in enumerate(configs):
            chosen = set(config.selected("movable-objects"))
            for other, other_config in enumerate(configs):
                if chosen < set(other_config.selected("movable-objects")):
                    self.assertLessEqual(costs[index].monetary_cost, costs[other].monetary_cost)
                    self.assertLessEqual(costs[index].execution_time, costs[other].execution_time)


class TestCapacityBudget(unittest.TestCase):
    def test_limits(self):
        budget = CapacityBudget.from_mapping({"vil": 3600, "sil": None})
        self.assertEqual(budget.limit("vil"), 3600)
        self.assertIsNone(budget.limit("sil"))
        self.assertIsNone(budget.limit("unknown"))
        self.assertTrue(budget.is_bounded)
        self.assertFalse(CapacityBudget.from_mapping({"sil": None}).is_bounded)

    def test_invalid_limits(self):
        with self.assertRaises(InvalidBudget):
            CapacityBudget.from_mapping({"vil": 0})
        with self.assertRaises(InvalidBudget):
            CapacityBudget.from_mapping({"vil": "plenty"})


class TestGreedy(unittest.TestCase):
    def test_lab_plan(self):
        benches, suite = lab()
        plan = assign_greedy(suite, benches)
        self.assertTrue(plan.complete)
        self.assertEqual(choices(plan), [
            ("cut-in-rain", "sil", 0),
            ("night-overtake", "sil", 0),
            ("radar-range", "vil", 2),
            ("balloon-emergency-brake", "vil", 1),
        ])
        radar = plan.assignment_for("radar-range")
        self.assertEqual(radar.test_method, TestMethodName.VEHICLE_IN_THE_LOOP)
        self.assertEqual(radar.cost.monetary_cost, Fraction(353, 3))
        self.assertEqual(plan.assignment_for("cut-in-rain").test_method, TestMethodName.SOFTWARE_IN_THE_LOOP)
        self.assertEqual(plan.assignment_for("balloon-emergency-brake").cost.monetary_cost, Fraction(1099, 8))
        self.assertEqual(plan.bench_time("vil"), 165)
        self.assertEqual(plan.bench_time("test-vehicle"), 0)

    def test_sil_only_registry(self):
        _, suite = lab()
        plan = assign_greedy(suite, [sil_bench()])
        self.assertFalse(plan.complete)
        self.assertEqual([u.test_case_id for u in plan.unassignable], ["radar-range", "balloon-emergency-brake"])
        balloon = plan.unassignable[1]
        self.assertEqual(balloon.reason, REASON_NO_ADMISSIBLE)
        bench_id, index, report = balloon.reports[0]
        self.assertEqual((bench_id, index), ("sil", 0))
        self.assertEqual([v.element_id for v in report.violations], ["traffic-model"])

    def test_budget_moves_long_case_elsewhere(self):
        benches, suite = lab()
        budget = CapacityBudget.from_mapping({"vil": 100, "test-vehicle": 150})
        plan = assign_greedy(suite, benches, budget)
        self.assertTrue(plan.complete)
        self.assertEqual(plan.assignment_for("balloon-emergency-brake").bench_id, "vil")
        radar = plan.assignment_for("radar-range")
        self.assertEqual((radar.bench_id, radar.test_method), ("test-vehicle", TestMethodName.TEST_VEHICLE))
        self.assertEqual(radar.cost.monetary_cost, Fraction(671, 3))
        self.assertLessEqual(plan.bench_time("vil"), 100)

    def test_capacity_exhausted(self):
        benches, suite = lab()
        budget = CapacityBudget.from_mapping({"vil": 100, "test-vehicle": 100})
        plan = assign_greedy(suite, benches, budget)
        self.assertEqual([(u.test_case_id, u.reason) for u in plan.unassignable],
                         [("radar-range", REASON_CAPACITY)])

    def test_ties_break_on_bench_id(self):
        suite = [entry(make_case())]
        plan = assign_greedy(suite, [uniform_bench("b", Stage.REAL), uniform_bench("a", Stage.REAL)])
        self.assertEqual(choices(plan), [("cut-in", "a", 0)])

    def test_deterministic(self):
        benches, suite = lab()
        self.assertEqual(assign_greedy(suite, benches), assign_greedy(suite, list(reversed(benches))))


class TestExact(unittest.TestCase):
    def test_matches_greedy_on_lab(self):
        benches, suite = lab()
        greedy = assign_greedy(suite, benches)
        exact = assign_exact(suite, benches)
        self.assertEqual(choices(exact), choices(greedy))
        self.assertEqual(exact.total_cost, greedy.total_cost)
        self.assertEqual(exact.solver, "exact")

    def test_beats_greedy_under_tight_budget(self):
        cheap = bench_with("a", {"test-object": [element("a-ecu", "test-object", Stage.SIMULATED, setup=1)]})
        dear = bench_with("b", {"test-object": [element("b-ecu", "test-object", Stage.SIMULATED, setup=4)]})
        suite = [
            entry(make_case(case_id="long", duration=10)),
            entry(make_case(case_id="short-1", duration=5)),
            entry(make_case(case_id="short-2", duration=5)),
        ]
        budget = CapacityBudget.from_mapping({"a": 10})
        greedy = assign_greedy(suite, [cheap, dear], budget)
        exact = assign_exact(suite, [cheap, dear], budget)
        self.assertEqual(greedy.total_cost, 9)
        self.assertEqual(exact.total_cost, 6)
        self.assertEqual(exact.assignment_for("long").bench_id, "b")
        self.assertEqual(exact.bench_time("a"), 10)

    def test_guard(self):
        benches, suite = lab()
        with self.assertRaises(InstanceTooLarge):
            check_exact_guard(suite * 3, benches)
        with self.assertRaises(InstanceTooLarge):
            check_exact_guard(suite, benches, max_configurations=5)
        check_exact_guard(suite, benches)

    def test_guard_applies_before_solving(self):
        suite = [entry(make_case(case_id=f"tc{i}")) for i in range(9)]
        with self.assertRaises(InstanceTooLarge):
            assign_exact(suite, [sil_bench()])


class TestRandomInstances(unittest.TestCase):
    def test_solvers_agree_and_stay_sound(self):
        rng = random.Random(7)
        for n in range(200):
            benches = [random_bench(rng, bench_id=f"b{k}", max_elements=2, max_count=16)
                       for k in range(rng.randint(1, 2))]
            suite = random_suite(rng, rng.randint(1, 5))
            budget = None
            if n % 2:
                budget = CapacityBudget.from_mapping(
                    {b.id: rng.choice([None, rng.randint(5, 300)]) for b in benches})
            greedy = assign_greedy(suite, benches, budget)
            exact = assign_exact(suite, benches, budget)
            self.assertLessEqual(exact.objective, greedy.objective)
            by_id = {b.id: b for b in benches}
            profiles = {e.test_case.id: e.profile() for e in suite}
            for plan in (greedy, exact):
                for a in plan.assignments:
                    report = check_admissibility(a.configuration, by_id[a.bench_id], profiles[a.test_case_id])
                    self.assertTrue(report.admissible)
                if budget is not None:
                    for bench in benches:
                        limit = budget.limit(bench.id)
                        if limit is not None:
                            self.assertLessEqual(plan.bench_time(bench.id), limit)
            if budget is None:
                self.assertEqual(exact.total_cost, greedy.total_cost)
                for u in greedy.unassignable:
                    self.assertEqual(u.reason, REASON_NO_ADMISSIBLE)
                    profile = profiles[u.test_case_id]
                    for bench in benches:
                        for config in enumerate_configurations(bench):
                            self.assertFalse(check_admissibility(config, bench, profile).admissible)

    def test_scaling_cost_rates(self):
        rng = random.Random(11)
        for _ in range(100):
            benches = [random_bench(rng, bench_id=f"b{k}", max_elements=2, max_count=16, allow_setup=False)
                       for k in range(2)]
            suite = random_suite(rng, rng.randint(1, 4))
            scaled = [scale_cost_rates(b, 10) for b in benches]
            plan = assign_greedy(suite, benches)
            scaled_plan = assign_greedy(suite, scaled)
            self.assertEqual(choices(scaled_plan), choices(plan))
            self.assertEqual(scaled_plan.total_cost, plan.total_cost * 10)
            for suite_entry in suite:
                profile = suite_entry.profile()
                for bench, bench_scaled in zip(benches, scaled):
                    for config in enumerate_configurations(bench):
                        self.assertEqual(check_admissibility(config, bench, profile),
                                         check_admissibility(config, bench_scaled, profile))


if __name__ == '__main__':
    unittest.main()
