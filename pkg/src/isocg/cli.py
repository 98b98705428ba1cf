"""Command-line front end.

Subcommands::

    isocg solve     dense CG on a generated or file-backed SPD system
    isocg solve-ss  self-stabilizing CG under seeded bit-flip injection
    isocg iso       iso-performance / iso-power / iso-capacity matching
    isocg ets       energy-to-solution curves and the break-even point

Exit codes: 0 success, 2 solver did not converge, 64 usage error,
65 bad or inconsistent data, 66 missing input file.  ``--json`` and
``--csv`` outputs are byte-stable for identical invocations.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import iso as iso_mod
from .errors import (
    InfeasibleError,
    IsocgError,
    NoBreakEvenError,
    SampleSetError,
    SolverDivergedError,
    UnknownMachineError,
)
from .faults import FaultPolicy
from .linalg import as_square_matrix, as_vector, gemv, gen_spd_diag_dominant
from .machine import default_data_dir, load_sampleset
from .solvers import SolveConfig, cg_solve, sscg_solve

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_NOINPUT = 66

_MODE_BY_FLAG = {
    "perf": iso_mod.ISO_PERFORMANCE,
    "power": iso_mod.ISO_POWER,
    "capacity": iso_mod.ISO_CAPACITY,
    "iso-perf": iso_mod.ISO_PERFORMANCE,
    "iso-power": iso_mod.ISO_POWER,
    "iso-capacity": iso_mod.ISO_CAPACITY,
}

_FAULT_BITS = {"sign", "mantissa", "sign-mantissa", "exponent", "any"}


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _CliDataError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit_json(doc) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _fmt(value: float) -> str:
    return repr(float(value))


def _load_system(path: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliDataError(EXIT_NOINPUT, f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
        a = as_square_matrix(doc["A"])
        b = as_vector(doc["b"]) if "b" in doc else gemv(a, np.ones(a.shape[0]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise _CliDataError(EXIT_DATAERR, f"bad system file {path}: {exc}") from exc
    if b.size != a.shape[0]:
        raise _CliDataError(
            EXIT_DATAERR, f"bad system file {path}: A is {a.shape[0]}x{a.shape[1]} but b has length {b.size}"
        )
    return a, b


def _build_problem(args) -> tuple[np.ndarray, np.ndarray]:
    if args.matrix is not None:
        a, b = _load_system(args.matrix)
        if args.size is not None and args.size != a.shape[0]:
            raise _CliDataError(
                EXIT_DATAERR,
                f"--size {args.size} does not match the {a.shape[0]}x{a.shape[1]} system in {args.matrix}",
            )
        return a, b
    a = gen_spd_diag_dominant(args.size, args.seed)
    # Deterministic right-hand side with known solution x = 1.
    return a, gemv(a, np.ones(args.size))


def _print_solve_report(name, n, report, x) -> None:
    final = report.relative_residuals[-1] if report.relative_residuals else 0.0
    print(f"solver: {name}")
    print(f"n: {n}")
    print(f"converged: {'yes' if report.converged else 'no'}")
    print(f"iterations: {report.iterations}")
    print(f"relative residual: {final:.6e}")
    print(f"flops: {report.flops}")
    if report.fault_events or report.rng_algorithm:
        print(f"fault events: {len(report.fault_events)}")
    if n <= 8:
        print("solution: [" + ", ".join(_fmt(v) for v in x) + "]")


def _solve_json_doc(name, n, args, report, x) -> dict:
    final = report.relative_residuals[-1] if report.relative_residuals else 0.0
    return {
        "solver": name,
        "n": n,
        "tol": args.tol,
        "converged": report.converged,
        "iterations": report.iterations,
        "relative_residual": final,
        "relative_residuals": report.relative_residuals,
        "flops": report.flops,
        "solution": [float(v) for v in x],
    }


def _require_problem_source(args) -> None:
    if args.size is None and args.matrix is None:
        args.parser.error("one of --size or --matrix is required")
    if args.size is not None and args.matrix is None and args.size < 1:
        args.parser.error(f"--size must be >= 1, got {args.size}")


def _cmd_solve(args) -> int:
    _require_problem_source(args)
    a, b = _build_problem(args)
    cfg = SolveConfig(tol=args.tol, max_iter=args.max_iter)
    try:
        x, report = cg_solve(a, b, cfg)
    except SolverDivergedError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if args.json:
        _emit_json(_solve_json_doc("cg", b.size, args, report, x))
    else:
        _print_solve_report("cg", b.size, report, x)
    return EXIT_OK if report.converged else EXIT_NONCONVERGENCE


def _cmd_solve_ss(args) -> int:
    _require_problem_source(args)
    a, b = _build_problem(args)
    policy = None
    if args.fault_rate > 0:
        policy = FaultPolicy(
            rate=args.fault_rate,
            flips_per_event=args.flips,
            bit_domain=args.fault_bits.replace("-", "_"),
            seed=args.fault_seed,
        )
    cfg = SolveConfig(tol=args.tol, max_iter=args.max_iter, ss_period=args.ss_period,
                      fault_policy=policy)
    baseline_cfg = SolveConfig(tol=args.tol, max_iter=args.max_iter, ss_period=args.ss_period)
    try:
        _, baseline = sscg_solve(a, b, baseline_cfg)
        x, report = sscg_solve(a, b, cfg)
    except SolverDivergedError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    overhead = None
    if baseline.converged and baseline.iterations > 0:
        overhead = 100.0 * (report.iterations - baseline.iterations) / baseline.iterations
    if args.json:
        doc = _solve_json_doc("sscg", b.size, args, report, x)
        doc.update(
            {
                "ss_period": args.ss_period,
                "fault_rate": args.fault_rate,
                "fault_bits": args.fault_bits,
                "flips_per_event": args.flips,
                "fault_seed": args.fault_seed,
                "fault_events": [e.to_dict() for e in report.fault_events],
                "rng_algorithm": report.rng_algorithm,
                "baseline_iterations": baseline.iterations,
                "overhead_percent": overhead,
            }
        )
        _emit_json(doc)
    else:
        _print_solve_report("sscg", b.size, report, x)
        if overhead is not None:
            print(f"iteration overhead: {overhead:.1f}% (fault-free baseline: {baseline.iterations})")
    return EXIT_OK if report.converged else EXIT_NONCONVERGENCE


def _parse_ref(value: str, parser, *, want: str):
    parts = value.split(":")
    if want == "full" and len(parts) != 3:
        parser.error(f"expected machine:cores:freq, got {value!r}")
    if len(parts) == 1:
        return parts[0], None, None
    if len(parts) == 2:
        name, freq = parts
        try:
            return name, None, float(freq)
        except ValueError:
            parser.error(f"bad frequency in {value!r}")
    if len(parts) == 3:
        name, cores, freq = parts
        try:
            return name, int(cores), float(freq)
        except ValueError:
            parser.error(f"bad cores/frequency in {value!r}")
    parser.error(f"cannot parse machine reference {value!r}")


def _load_data(args):
    path = Path(args.data) if args.data else default_data_dir()
    try:
        return load_sampleset(path)
    except OSError as exc:
        raise _CliDataError(EXIT_NOINPUT, f"cannot read data set: {exc}") from exc


def _print_iso_report(report: iso_mod.IsoReport) -> None:
    print(f"mode: {report.mode}")
    print(f"clusters: {report.cluster_count:.4f}")
    if report.achieved_gflops is not None:
        print(f"achieved GFLOPS: {report.achieved_gflops:.4f}")
    if report.achieved_watts is not None:
        print(f"achieved W: {report.achieved_watts:.4f}")
    for key in sorted(report.ratios):
        print(f"{key}: {report.ratios[key]:.4f}")


def _emit_iso_csv(report: iso_mod.IsoReport) -> None:
    print(",".join(iso_mod.ISO_REPORT_COLUMNS))
    print(",".join(report.csv_row()))


def _cmd_iso(args) -> int:
    parser = args.parser
    mode = _MODE_BY_FLAG[args.mode]
    sset = _load_data(args)
    ref_name, ref_cores, ref_freq = _parse_ref(args.ref, parser, want="any")
    tgt_name, tgt_cores, tgt_freq = _parse_ref(args.target, parser, want="any")
    if tgt_cores is not None:
        parser.error("--target takes machine[:freq], cores are fixed per cluster")

    ref_spec = sset.spec(ref_name)
    tgt_spec = sset.spec(tgt_name)
    ref_sample = None
    if ref_cores is not None and ref_freq is not None:
        ref_sample = sset.sample(ref_name, ref_cores, ref_freq, args.problem_class)
    tgt_sample = None
    if tgt_freq is not None:
        tgt_sample = sset.sample(tgt_name, tgt_spec.cores_per_unit, tgt_freq, args.problem_class)

    if args.hybrid:
        if ref_sample is None or tgt_sample is None:
            parser.error("--hybrid requires --ref machine:cores:freq and --target machine:freq")
        template = iso_mod.HybridSystem(
            reliable=ref_sample, unreliable=tgt_sample, n_unreliable=1.0,
            ss_fraction=args.ss_fraction,
        )
        report = iso_mod.solve_hybrid_for_mode(
            mode, template, ref_sample,
            ref_llc_bytes=ref_spec.llc_bytes, unreliable_llc_bytes=tgt_spec.llc_bytes,
        )
    elif mode == iso_mod.ISO_CAPACITY:
        count = iso_mod.iso_capacity_clusters(ref_spec.llc_bytes, tgt_spec.llc_bytes)
        achieved_g = count * tgt_sample.gflops if tgt_sample else None
        achieved_w = count * tgt_sample.watts if tgt_sample else None
        ratios = {}
        if ref_sample is not None and tgt_sample is not None:
            ratios = iso_mod._ratios(achieved_g, achieved_w, ref_sample)
        report = iso_mod.IsoReport(mode, count, achieved_g, achieved_w, ratios)
    else:
        if ref_sample is None or tgt_sample is None:
            parser.error("--mode perf/power requires --ref machine:cores:freq and --target machine:freq")
        if mode == iso_mod.ISO_PERFORMANCE:
            count = iso_mod.iso_performance_clusters(ref_sample.gflops, tgt_sample.gflops)
        else:
            count = iso_mod.iso_power_clusters(ref_sample.watts, tgt_sample.watts)
        achieved_g = count * tgt_sample.gflops
        achieved_w = count * tgt_sample.watts
        report = iso_mod.IsoReport(
            mode, count, achieved_g, achieved_w, iso_mod._ratios(achieved_g, achieved_w, ref_sample)
        )

    if args.json:
        sys.stdout.write(report.to_json())
    elif args.csv:
        _emit_iso_csv(report)
    else:
        _print_iso_report(report)
    return EXIT_OK


def _parse_degradation(value: str) -> list[float]:
    parts = value.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {value!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric range {value!r}") from None
    if start < 0 or stop < start or step <= 0:
        raise argparse.ArgumentTypeError(
            f"range must satisfy 0 <= start <= stop with step > 0, got {value!r}"
        )
    out = []
    d = start
    while d <= stop + 1e-9:
        out.append(round(d, 12))
        d += step
    return out


def _cmd_ets(args) -> int:
    parser = args.parser
    mode = _MODE_BY_FLAG[args.mode]
    sset = _load_data(args)
    ref_name, ref_cores, ref_freq = _parse_ref(args.ref, parser, want="full")
    tgt_name, _, tgt_freq = _parse_ref(args.target, parser, want="any")
    if tgt_freq is None:
        parser.error("--target must be machine:freq")
    ref_spec = sset.spec(ref_name)
    tgt_spec = sset.spec(tgt_name)
    ref_sample = sset.sample(ref_name, ref_cores, ref_freq, "on_chip")
    tgt_sample = sset.sample(tgt_name, tgt_spec.cores_per_unit, tgt_freq, "on_chip")

    template = iso_mod.HybridSystem(
        reliable=ref_sample, unreliable=tgt_sample, n_unreliable=1.0,
        ss_fraction=args.ss_fraction,
    )
    report = iso_mod.solve_hybrid_for_mode(
        mode, template, ref_sample,
        ref_llc_bytes=ref_spec.llc_bytes, unreliable_llc_bytes=tgt_spec.llc_bytes,
    )
    hybrid = template.with_clusters(report.cluster_count)

    # Work for the modelled problem: a fault-free solve fixes the iteration count.
    a = gen_spd_diag_dominant(args.size, args.seed)
    b = gemv(a, np.ones(args.size))
    _, solve_report = cg_solve(a, b, SolveConfig())
    flops_total = solve_report.flops

    percents = list(args.degradation)
    try:
        breakeven = iso_mod.breakeven_degradation(ref_sample, hybrid)
    except NoBreakEvenError:
        breakeven = None
    if breakeven is not None and not any(abs(p - 100.0 * breakeven) < 1e-9 for p in percents):
        percents = sorted(percents + [100.0 * breakeven])
    curve = iso_mod.ets_curve(ref_sample, hybrid, [p / 100.0 for p in percents], flops_total)

    if args.json:
        _emit_json(
            {
                "mode": mode,
                "cluster_count": report.cluster_count,
                "flops_total": flops_total,
                "problem_size": args.size,
                "iterations": solve_report.iterations,
                "reference": {"gflops": ref_sample.gflops, "watts": ref_sample.watts},
                "hybrid": {
                    "gflops": iso_mod.hybrid_gflops(hybrid),
                    "watts": iso_mod.hybrid_watts(hybrid),
                },
                "breakeven_percent": None if breakeven is None else 100.0 * breakeven,
                "points": [
                    {
                        "degradation_percent": 100.0 * rp.degradation,
                        "ets_reference_joules": rp.ets_joules,
                        "ets_hybrid_joules": hp.ets_joules,
                    }
                    for rp, hp in curve
                ],
            }
        )
    else:
        print("degradation_percent,ets_reference_joules,ets_hybrid_joules")
        for rp, hp in curve:
            print(f"{_fmt(100.0 * rp.degradation)},{_fmt(rp.ets_joules)},{_fmt(hp.ets_joules)}")
    return EXIT_OK


def _add_solve_flags(sub, ss: bool) -> None:
    sub.add_argument("--size", type=int, default=None,
                     help="generate an SPD system of this order (with --matrix: expected order)")
    sub.add_argument("--matrix", default=None,
                     help="JSON file with fields A (square) and optional b")
    sub.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    sub.add_argument("--tol", type=float, default=1.0e-8, help="relative residual threshold")
    sub.add_argument("--max-iter", type=int, default=None, help="iteration cap (default 50n)")
    sub.add_argument("--json", action="store_true", help="emit a JSON report")
    if ss:
        sub.add_argument("--ss-period", type=int, default=10,
                         help="iterations between reliable corrections (default 10)")
        sub.add_argument("--fault-rate", type=float, default=0.0,
                         help="fault probability per injectable product (default 0)")
        sub.add_argument("--fault-bits", choices=sorted(_FAULT_BITS), default="sign-mantissa",
                         help="bit region eligible for flips")
        sub.add_argument("--flips", type=int, default=1, help="bits flipped per event")
        sub.add_argument("--fault-seed", type=int, default=0, help="injector RNG seed")


def build_parser() -> _Parser:
    parser = _Parser(prog="isocg", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = subs.add_parser("solve", help="run plain CG")
    _add_solve_flags(solve, ss=False)
    solve.set_defaults(func=_cmd_solve)

    solve_ss = subs.add_parser("solve-ss", help="run self-stabilizing CG with fault injection")
    _add_solve_flags(solve_ss, ss=True)
    solve_ss.set_defaults(func=_cmd_solve_ss)

    iso = subs.add_parser("iso", help="iso-metric cluster matching")
    iso.add_argument("--mode", choices=["perf", "power", "capacity"], required=True)
    iso.add_argument("--ref", required=True, help="reference, machine[:cores:freq]")
    iso.add_argument("--target", required=True, help="target cluster, machine[:freq]")
    iso.add_argument("--data", default=None, help="samples.csv or data directory")
    iso.add_argument("--problem-class", choices=["on_chip", "off_chip"], default="on_chip")
    iso.add_argument("--hybrid", action="store_true",
                     help="compose reliable ref cluster + n unreliable target clusters")
    iso.add_argument("--ss-fraction", type=float, default=0.1,
                     help="fraction of work on the reliable cluster (default 0.1)")
    fmt = iso.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    iso.set_defaults(func=_cmd_iso)

    ets = subs.add_parser("ets", help="energy-to-solution vs degradation")
    ets.add_argument("--mode", choices=["iso-perf", "iso-power", "iso-capacity"],
                     default="iso-perf")
    ets.add_argument("--degradation", type=_parse_degradation, default=_parse_degradation("0:400:10"),
                     help="percent range start:stop:step (default 0:400:10)")
    ets.add_argument("--data", default=None, help="samples.csv or data directory")
    ets.add_argument("--ref", default="a15:4:1.6", help="reliable reference, machine:cores:freq")
    ets.add_argument("--target", default="a7:0.5", help="unreliable cluster, machine:freq")
    ets.add_argument("--ss-fraction", type=float, default=0.1)
    ets.add_argument("--size", type=int, default=512, help="modelled problem order (default 512)")
    ets.add_argument("--seed", type=int, default=1, help="problem generator seed (default 1)")
    ets.add_argument("--json", action="store_true")
    ets.set_defaults(func=_cmd_ets)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.parser = parser
    if hasattr(args, "ss_fraction") and not 0.0 < args.ss_fraction < 1.0:
        parser.error(f"--ss-fraction must lie in (0, 1), got {args.ss_fraction}")
    try:
        return args.func(args)
    except _CliDataError as exc:
        print(f"isocg: {exc}", file=sys.stderr)
        return exc.code
    except UnknownMachineError as exc:
        print(f"isocg: {exc}", file=sys.stderr)
        if exc.available:
            print("available: " + ", ".join(exc.available), file=sys.stderr)
        return EXIT_DATAERR
    except (SampleSetError, InfeasibleError, NoBreakEvenError) as exc:
        print(f"isocg: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except IsocgError as exc:
        print(f"isocg: {exc}", file=sys.stderr)
        return EXIT_DATAERR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
