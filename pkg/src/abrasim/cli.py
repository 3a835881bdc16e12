"""Command-line entry point.

    abrasim run --config s.cfg [--seed N] [--variant NAME] [--out DIR] [--trace]
    abrasim sweep --config sweep.cfg --out DIR [--jobs N] [--trace]
    abrasim trace-check --config s.cfg [--expect FILE]
    abrasim --print-defaults

Outputs (``metrics.csv`` and ``trace-<scenario>.txt``) are written to
temporary files and renamed into place only after every run succeeded.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .cc import Variant
from .config import ConfigFileError, defaults_text, load_config, scenario_from_config, sweep_from_config
from .experiment import Scenario, check_trends, results_csv, run_scenario, run_sweep
from .metrics import emit_csv

log = logging.getLogger("abrasim")

COMMANDS = ("run", "sweep", "trace-check")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    command: Optional[str]
    config_path: Optional[Path] = None
    output_dir: Path = Path(".")
    seed: Optional[int] = None
    variant: Optional[Variant] = None
    jobs: int = 1
    trace: bool = False
    expect: Optional[Path] = None
    print_defaults: bool = False
    verbosity: int = 0


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would sys.exit(2) itself
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="abrasim", description="TCP Reno / New Reno / ABRA New Reno over a failure-prone path")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="scenario or sweep file")
    p.add_argument("--out", type=Path, help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--variant", choices=[v.value for v in Variant], help="override the TCP variant")
    p.add_argument("--jobs", type=int, help="parallel worker processes for sweep (default 1)")
    p.add_argument("--trace", action="store_true", help="write trace-<scenario>.txt files")
    p.add_argument("--expect", type=Path, help="trace-check: golden trace to compare against")
    p.add_argument("--print-defaults", action="store_true", help="print every default setting and exit")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def parse_args(argv: Sequence[str]) -> CliConfig:
    args = build_parser().parse_args(list(argv))
    if args.print_defaults:
        if args.command or args.config:
            raise UsageError("--print-defaults takes no command or --config")
        return CliConfig(command=None, print_defaults=True)
    if args.command is None:
        raise UsageError("a command is required: " + ", ".join(COMMANDS))
    if args.config is None:
        raise UsageError(f"{args.command}: --config is required")
    if args.jobs is not None and args.command != "sweep":
        raise UsageError("--jobs only applies to sweep")
    if args.jobs is not None and args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    if args.expect is not None and args.command != "trace-check":
        raise UsageError("--expect only applies to trace-check")
    if args.command == "trace-check" and args.out is not None:
        raise UsageError("--out does not apply to trace-check")
    return CliConfig(
        command=args.command,
        config_path=args.config,
        output_dir=args.out or Path("."),
        seed=args.seed,
        variant=Variant(args.variant) if args.variant else None,
        jobs=args.jobs or 1,
        trace=args.trace,
        expect=args.expect,
        verbosity=args.verbose,
    )


def _override(s: Scenario, cfg: CliConfig) -> Scenario:
    if cfg.seed is not None:
        s = replace(s, seed=cfg.seed)
    if cfg.variant is not None:
        s = replace(s, variant=cfg.variant)
    return s


def _check_output_dir(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")


def _write_all(out_dir: Path, files: dict[str, str]) -> None:
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def _cmd_run(cfg: CliConfig, scenarios: list[Scenario]) -> int:
    _check_output_dir(cfg.output_dir)
    results = run_sweep(scenarios, jobs=cfg.jobs, trace=cfg.trace)
    failed = [r for r in results if r.error]
    for r in failed:
        log.error("scenario %s failed: %s", r.scenario.name, r.error)
    if failed:
        return 1
    files = {"metrics.csv": results_csv(results)}
    if cfg.trace:
        for r in results:
            files[f"trace-{r.scenario.name}.txt"] = r.trace
    _write_all(cfg.output_dir, files)
    if cfg.command == "sweep":
        for check in check_trends(results):
            log.info("%s %s: %s (%s)", check.knob, check.claim, check.status, check.detail)
    log.info("wrote %d file(s) to %s", len(files), cfg.output_dir)
    return 0


def _cmd_trace_check(cfg: CliConfig, scenario: Scenario) -> int:
    first = run_scenario(scenario, trace=True)
    second = run_scenario(scenario, trace=True)
    if first.error:
        log.error("scenario failed: %s", first.error)
        return 1
    ok = True
    if first.trace != second.trace:
        log.error("trace differs between two identical runs")
        ok = False
    if emit_csv([({}, first.metrics)]) != emit_csv([({}, second.metrics)]):
        log.error("metrics differ between two identical runs")
        ok = False
    if not first.metrics.conserved():
        log.error("segment conservation violated")
        ok = False
    if cfg.expect is not None:
        expected = cfg.expect.read_text()
        if expected != first.trace:
            got = first.trace.splitlines()
            want = expected.splitlines()
            for i, (a, b) in enumerate(zip(got, want), start=1):
                if a != b:
                    log.error("trace line %d differs:\n  expected: %s\n  got:      %s", i, b, a)
                    break
            else:
                log.error("trace length differs: expected %d lines, got %d", len(want), len(got))
            ok = False
    if ok:
        log.info("trace-check passed (%d trace lines)", len(first.trace.splitlines()))
    return 0 if ok else 1


def execute(cfg: CliConfig) -> int:
    if cfg.print_defaults:
        sys.stdout.write(defaults_text())
        return 0
    try:
        file = load_config(cfg.config_path)
        if cfg.command == "sweep":
            scenarios = [_override(s, cfg) for s in sweep_from_config(file)]
            return _cmd_run(cfg, scenarios)
        scenario = _override(scenario_from_config(file), cfg)
        if cfg.command == "run":
            return _cmd_run(cfg, [scenario])
        return _cmd_trace_check(cfg, scenario)
    except ConfigFileError as exc:
        log.error("%s", exc)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"abrasim: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(
        level=logging.DEBUG if cfg.verbosity > 1 else logging.INFO,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
