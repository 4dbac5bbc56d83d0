import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

from src.backend.assignment import (
    AssignmentPlan,
    assign_exact,
    assign_greedy,
)
from src.backend.chart import render_bench_chart, render_configuration_chart, render_scale_chart
from src.backend.configuration import (
    classify_test_method,
    configuration_at,
    count_configurations,
    enumerate_configurations,
    method_summary,
)
from src.backend.errors import (
    BenchLatticeError,
    CombinatorialLimitExceeded,
    InstanceTooLarge,
    RegistryIoError,
    RegistryIssue,
    RegistrySyntaxError,
    SchemaError,
)
from src.backend.registry import load_budget, load_registry, load_suite, save_plan
from src.backend.settings import SettingsManager
from src.backend.taxonomy import EXAMPLE_ELEMENTS, TestBench, canonical_dimension, stage_profile
from src.utils.paths import atomic_write_text

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1  # e.g. a plan was written but some test cases are unassignable
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="benchlattice",
        description="Classify test benches for automated-vehicle testing and plan test case execution.",
        epilog="Configuration indices refer to the deterministic enumeration order shown by `enumerate`.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    parser.add_argument("--config-cap", type=positive_int, default=None,
                        help="Maximum number of configurations to materialize (default: settings or 10^6)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("validate", help="Load a registry and report its benches")
    p.add_argument("registry", type=Path)
    p.set_defaults(handler=BenchLatticeApp.cmd_validate)

    p = subparsers.add_parser("describe", help="Print the classification of one bench")
    p.add_argument("registry", type=Path)
    p.add_argument("--bench", required=True)
    p.add_argument("--examples", action="store_true", help="Also list typical elements per dimension and stage")
    p.set_defaults(handler=BenchLatticeApp.cmd_describe)

    p = subparsers.add_parser("enumerate", help="List or count the configurations of a bench")
    p.add_argument("registry", type=Path)
    p.add_argument("--bench", required=True)
    p.add_argument("--count-only", action="store_true")
    p.set_defaults(handler=BenchLatticeApp.cmd_enumerate)

    p = subparsers.add_parser("chart", help="Render a bench or configuration radar chart as SVG")
    p.add_argument("registry", type=Path, nargs="?")
    p.add_argument("--bench")
    p.add_argument("--config", type=int, help="Configuration index; draws the composition line")
    p.add_argument("--empty", action="store_true", help="Render the blank stage template instead")
    p.add_argument("--hide-unselected", action="store_true", help="Omit elements outside the configuration")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=BenchLatticeApp.cmd_chart)

    p = subparsers.add_parser("classify", help="Print the test method of a configuration")
    p.add_argument("registry", type=Path)
    p.add_argument("--bench", required=True)
    p.add_argument("--config", type=int, required=True)
    p.set_defaults(handler=BenchLatticeApp.cmd_classify)

    p = subparsers.add_parser("assign", help="Assign a test suite to admissible configurations")
    p.add_argument("registry", type=Path)
    p.add_argument("suite", type=Path)
    p.add_argument("--budget", type=Path, help="Per-bench time budget file")
    p.add_argument("--exact", action="store_true", help="Use the exhaustive solver (small instances only)")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=BenchLatticeApp.cmd_assign)
    return parser


class BenchLatticeApp:
    def __init__(self, settings_manager: Optional[SettingsManager] = None, out: Optional[TextIO] = None):
        self.settings_manager = settings_manager or SettingsManager()
        self.out = out or sys.stdout
        self.parser = build_parser()
        self.config_cap = None

    def run(self, argv: Sequence[str]) -> int:
        try:
            args = self.parser.parse_args(list(argv))
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_USAGE

        self.setup_logging(args.verbose)
        self.config_cap = self.settings_manager.config_cap(args.config_cap)

        try:
            return args.handler(self, args)
        except UsageError as e:
            self.fail(str(e))
            return EXIT_USAGE
        except InstanceTooLarge as e:
            self.fail(f"{e}; drop --exact to use the greedy solver")
            return EXIT_USAGE
        except (RegistrySyntaxError, SchemaError, RegistryIoError) as e:
            self.fail(str(e))
            return EXIT_USAGE
        except BenchLatticeError as e:
            self.fail(str(e))
            return EXIT_DOMAIN

    def setup_logging(self, verbose: bool):
        level = "DEBUG" if verbose else str(self.settings_manager.get("log_level", "INFO")).upper()
        logging.basicConfig(level=getattr(logging, level, logging.INFO), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        logging.getLogger().setLevel(getattr(logging, level, logging.INFO))

    def print(self, text: str = ""):
        self.out.write(text + "\n")

    def fail(self, message: str):
        sys.stderr.write(f"error: {message}\n")

    def find_bench(self, benches: List[TestBench], bench_id: str) -> TestBench:
        for bench in benches:
            if bench.id == bench_id:
                return bench
        known = ", ".join(b.id for b in benches) or "none"
        raise UsageError(f"no bench {bench_id!r} in registry (known: {known})")

    def write_output(self, path: Path, text: str):
        try:
            atomic_write_text(path, text)
        except OSError as e:
            raise RegistryIoError(str(path), [RegistryIssue("", "io-error", e.strerror or str(e))]) from None
        logger.info(f"Wrote {path}")

    def configuration(self, bench: TestBench, index: int):
        try:
            return configuration_at(bench, index)
        except IndexError as e:
            raise UsageError(str(e)) from None

    def cmd_validate(self, args) -> int:
        benches = load_registry(args.registry)
        for bench in benches:
            self.print(f"{bench.id} ({bench.display_name}): {len(bench.leaves())} leaf dimensions, "
                       f"{len(bench.elements)} elements, {count_configurations(bench)} configurations")
            for warning in bench.warnings:
                self.print(f"  warning: {warning}")
        self.print(f"{len(benches)} bench(es) valid")
        return EXIT_OK

    def cmd_describe(self, args) -> int:
        bench = self.find_bench(load_registry(args.registry), args.bench)
        profile = stage_profile(bench)
        self.print(f"{bench.display_name} [{bench.id}]")
        for leaf in bench.leaves():
            stages = ", ".join(sorted(s.value for s in profile[leaf.id]))
            marker = " (combinable)" if leaf.combinable else ""
            self.print(f"  {leaf.display_name}{marker}: {stages}")
            for element in bench.elements_of(leaf.id):
                c = element.characteristics
                validated = ", ".join(sorted(c.validated_for)) or "-"
                self.print(f"    {element.id:<24} {element.stage.value:<9} "
                           f"rate {float(c.cost_rate):>8.2f}/h  time x{float(c.time_factor):<5g} "
                           f"setup {float(c.setup_cost):>7.2f}  valid for: {validated}")
            canonical = canonical_dimension(leaf.parent or leaf.id)
            if args.examples and canonical is not None and not leaf.parent:
                self.print(f"    {canonical.definition}")
                examples = EXAMPLE_ELEMENTS.get(canonical.id, {})
                for stage, text in sorted(examples.items(), key=lambda item: item[0].chart_index):
                    self.print(f"      typical {stage.value}: {text}")

        count = count_configurations(bench)
        self.print(f"{count} configuration(s)")
        if count <= self.config_cap:
            for method, n in method_summary(bench, self.config_cap).items():
                self.print(f"  {method.value}: {n}")
        return EXIT_OK

    def cmd_enumerate(self, args) -> int:
        bench = self.find_bench(load_registry(args.registry), args.bench)
        if args.count_only:
            self.print(str(count_configurations(bench)))
            return EXIT_OK
        try:
            configs = enumerate_configurations(bench, self.config_cap)
        except CombinatorialLimitExceeded as e:
            self.fail(f"{e} (try --count-only)")
            return EXIT_DOMAIN
        for index, config in enumerate(configs):
            method = classify_test_method(config, bench)
            selection = "; ".join(f"{leaf}={'+'.join(ids)}" for leaf, ids in config.selection)
            self.print(f"{index}\t{method.value}\t{selection}")
        return EXIT_OK

    def cmd_chart(self, args) -> int:
        style = self.settings_manager.chart_style()
        if args.hide_unselected:
            style = replace(style, show_unselected=False)
        if args.empty:
            self.write_output(args.output, render_scale_chart(style))
            return EXIT_OK
        if args.registry is None or not args.bench:
            raise UsageError("chart needs a registry and --bench (or --empty)")
        bench = self.find_bench(load_registry(args.registry), args.bench)
        if args.config is None:
            svg = render_bench_chart(bench, style)
        else:
            config = self.configuration(bench, args.config)
            svg = render_configuration_chart(config, bench, style,
                                             title=f"{bench.display_name}: configuration {args.config}")
        self.write_output(args.output, svg)
        return EXIT_OK

    def cmd_classify(self, args) -> int:
        bench = self.find_bench(load_registry(args.registry), args.bench)
        config = self.configuration(bench, args.config)
        self.print(classify_test_method(config, bench).value)
        return EXIT_OK

    def cmd_assign(self, args) -> int:
        benches = load_registry(args.registry)
        suite = load_suite(args.suite)
        budget = load_budget(args.budget) if args.budget else None
        if args.exact:
            plan = assign_exact(
                suite, benches, budget, self.config_cap,
                max_test_cases=int(self.settings_manager.get("exact_max_test_cases", 8)),
                max_configurations=int(self.settings_manager.get("exact_max_configurations", 32)),
            )
        else:
            plan = assign_greedy(suite, benches, budget, self.config_cap)
        save_plan(plan, args.output)
        self.print_plan(plan)
        return EXIT_OK if plan.complete else EXIT_DOMAIN

    def print_plan(self, plan: AssignmentPlan):
        header = f"{'test case':<20} {'bench':<14} {'config':>6}  {'method':<22} {'cost':>10} {'time [s]':>10}"
        self.print(header)
        self.print("-" * len(header))
        for a in plan.assignments:
            self.print(f"{a.test_case_id:<20} {a.bench_id:<14} {a.config_index:>6}  {a.test_method.value:<22} "
                       f"{float(a.cost.monetary_cost):>10.2f} {float(a.cost.execution_time):>10.1f}")
        for u in plan.unassignable:
            detail = ""
            if u.reports:
                _, _, report = u.reports[0]
                detail = ": " + ", ".join(str(v) for v in report.violations[:3])
            self.print(f"{u.test_case_id:<20} UNASSIGNABLE ({u.reason}){detail}")
        self.print("-" * len(header))
        self.print(f"total cost {float(plan.total_cost):.2f} ({plan.solver}), "
                   f"{len(plan.assignments)} assigned, {len(plan.unassignable)} unassignable")


def main(argv: Optional[Sequence[str]] = None) -> int:
    app = BenchLatticeApp()
    return app.run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
