"""Command-line interface: ``rhpdhg solve | bench | check-certificate``.

Exit codes: 0 optimal (or valid certificate), 1 error or invalid
certificate, 2 infeasible, 3 iteration or time limit.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .infeasibility import DEFAULT_CERT_TOL, validate_dual_infeasibility, validate_primal_infeasibility
from .lp_model import to_standard_form
from .mps_io import (MpsParseError, read_mps, report_from_result, to_json, write_solution_json,
                     write_trace_csv)
from .solver import (AdaptiveResidualDecay, FixedFrequency, NoRestart, SolverConfig, Status, solve,
                     solve_baseline)

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3
SCHEMES = ("halpern", "vanilla", "averaged", "restarted-average")
TOLERANCE_PRESETS = {"high": 1e-8, "moderate": 1e-4}


class CliError(Exception):
    pass


def parse_restart(text: str):
    if text == "adaptive":
        return AdaptiveResidualDecay()
    if text == "none":
        return NoRestart()
    if text.startswith("fixed:"):
        try:
            return FixedFrequency(int(text.split(":", 1)[1]))
        except ValueError as exc:
            raise CliError(f"bad --restart value {text!r}: {exc}") from None
    raise CliError(f"bad --restart value {text!r}; use adaptive, fixed:K or none")


def parse_tolerance(text: str) -> float:
    if text in TOLERANCE_PRESETS:
        return TOLERANCE_PRESETS[text]
    try:
        return float(text)
    except ValueError:
        raise CliError(f"bad --tol value {text!r}") from None


def status_exit_code(status: Status) -> int:
    if status is Status.OPTIMAL:
        return EXIT_OK
    if status.is_infeasible:
        return EXIT_INFEASIBLE
    return EXIT_LIMIT


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", default="1e-8",
                   help="relative KKT tolerance, a number or a preset (high=1e-8, moderate=1e-4)")
    p.add_argument("--time-limit", type=float, default=math.inf, help="seconds")
    p.add_argument("--iter-limit", type=int, default=100_000)
    p.add_argument("--restart", default="adaptive", help="adaptive | fixed:K | none")
    p.add_argument("--scheme", choices=SCHEMES, default="halpern")
    p.add_argument("--eta", type=float, default=None, help="step size override")
    p.add_argument("--check-period", type=int, default=100, help="infeasibility check period (0 disables)")
    p.add_argument("--cert-tol", type=float, default=DEFAULT_CERT_TOL)
    p.add_argument("--seed", type=int, default=0, help="seed for the norm estimate start vector")
    p.add_argument("--fixed-format", action="store_true", help="read fixed-column MPS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhpdhg", description="Restarted Halpern PDHG LP solver")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one MPS file")
    ps.add_argument("path")
    _solver_args(ps)
    ps.add_argument("--json-out", help="write the JSON report here ('-' for stdout)")
    ps.add_argument("--trace", help="write a CSV trace here")
    ps.add_argument("--trace-period", type=int, default=10)
    ps.add_argument("--elide-above", type=int, default=None, help="omit vectors longer than this")

    pb = sub.add_parser("bench", help="solve every MPS file in a directory")
    pb.add_argument("directory")
    _solver_args(pb)
    pb.add_argument("--sgm-shift", type=float, default=10.0)
    pb.add_argument("--jobs", type=int, default=1)
    pb.add_argument("--json-out")

    pc = sub.add_parser("check-certificate", help="validate an infeasibility certificate")
    pc.add_argument("lp")
    pc.add_argument("certificate")
    pc.add_argument("--cert-tol", type=float, default=DEFAULT_CERT_TOL)
    pc.add_argument("--fixed-format", action="store_true")
    return parser


def config_from_args(args, trace_period: int = 0) -> SolverConfig:
    try:
        return SolverConfig(
            restart=parse_restart(args.restart),
            tolerance=parse_tolerance(args.tol),
            iteration_limit=args.iter_limit,
            time_limit=args.time_limit,
            eta=args.eta,
            infeasibility_check_period=args.check_period,
            trace_period=trace_period,
            certificate_tol=args.cert_tol,
        )
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}") from None


def config_echo(args, config: SolverConfig) -> dict:
    restart = config.restart
    return {
        "scheme": args.scheme,
        "restart": type(restart).__name__,
        "restart_params": dataclasses.asdict(restart),
        "tolerance": config.tolerance,
        "iteration_limit": config.iteration_limit,
        "time_limit": config.time_limit,
        "eta_override": config.eta,
        "infeasibility_check_period": config.infeasibility_check_period,
        "certificate_tol": config.certificate_tol,
        "seed": args.seed,
    }


def load_standard(path, fixed: bool, seed: int = 0):
    g = read_mps(path, fixed=fixed)
    std, vmap = to_standard_form(g)
    return g, dataclasses.replace(std, norm_seed=seed), vmap


def run_solve(path, args, trace_period: int = 0):
    config = config_from_args(args, trace_period)
    g, lp, vmap = load_standard(path, args.fixed_format, args.seed)
    if args.scheme == "halpern":
        result = solve(lp, config)
    else:
        result = solve_baseline(lp, config, args.scheme.replace("-", "_"))
    return g, lp, vmap, config, result


def cmd_solve(args) -> int:
    trace_period = args.trace_period if args.trace else 0
    g, lp, vmap, config, result = run_solve(args.path, args, trace_period)
    report = report_from_result(result, lp, instance=g.name or Path(args.path).stem, vmap=vmap,
                                config=config_echo(args, config), elide_threshold=args.elide_above)
    text = write_solution_json(report)
    if args.json_out == "-":
        sys.stdout.write(text)
    elif args.json_out:
        Path(args.json_out).write_text(text, encoding="utf-8")
    if args.trace:
        Path(args.trace).write_text(write_trace_csv(result.trace), encoding="utf-8")
    if args.json_out != "-":
        print(f"status      {report.status}")
        print(f"objective   {report.primal_objective:.12g}")
        print(f"kkt         {report.kkt['max']:.3e}")
        print(f"iterations  {report.iterations} ({report.epochs} epochs)")
        print(f"time        {result.wall_time:.3f}s")
    return status_exit_code(result.status)


def shifted_geometric_mean(times, shift: float = 10.0) -> float:
    """``(prod (t_i + shift))^(1/n) - shift``.

    The direct product keeps small cases exact; log space is used only when
    the product overflows or underflows.
    """
    times = [float(t) for t in times]
    if not times:
        raise ValueError("no times given")
    shifted = [t + shift for t in times]
    if any(s <= 0 for s in shifted):
        raise ValueError("every time plus shift must be positive")
    prod = math.prod(shifted)
    if math.isfinite(prod) and prod > 0:
        return prod ** (1.0 / len(shifted)) - shift
    return math.exp(math.fsum(math.log(s) for s in shifted) / len(shifted)) - shift


SIZE_BUCKETS = ((1_000, "small"), (100_000, "medium"), (math.inf, "large"))


def size_bucket(nnz: int) -> str:
    return next(name for limit, name in SIZE_BUCKETS if nnz < limit)


@dataclass
class BenchRow:
    name: str
    status: str
    iterations: int
    time: float
    nnz: int

    @property
    def solved(self) -> bool:
        return self.status == Status.OPTIMAL.value or "infeasible" in self.status


@dataclass
class BenchSummary:
    rows: list[BenchRow]
    time_limit: float
    shift: float = 10.0
    sgm: float = field(init=False)
    solved_by_bucket: dict[str, tuple[int, int]] = field(init=False)

    def __post_init__(self):
        self.sgm = shifted_geometric_mean([self.charged_time(r) for r in self.rows], self.shift)
        buckets: dict[str, tuple[int, int]] = {}
        for r in self.rows:
            solved, total = buckets.get(size_bucket(r.nnz), (0, 0))
            buckets[size_bucket(r.nnz)] = (solved + r.solved, total + 1)
        self.solved_by_bucket = dict(sorted(buckets.items()))

    def charged_time(self, row: BenchRow) -> float:
        """Unsolved instances count at the time limit."""
        return row.time if row.solved else self.time_limit

    def to_dict(self) -> dict:
        return {
            "sgm": self.sgm,
            "shift": self.shift,
            "time_limit": self.time_limit,
            "solved_by_bucket": {k: {"solved": s, "total": t} for k, (s, t) in self.solved_by_bucket.items()},
            "instances": [dataclasses.asdict(r) for r in self.rows],
        }


def _bench_one(path: str, args) -> BenchRow:
    start = time.perf_counter()
    try:
        _, lp, _, _, result = run_solve(path, args)
        status, iterations = result.status.value, result.iterations
        nnz = lp.A.nnz
    except (MpsParseError, ValueError) as exc:
        print(f"{Path(path).name}: {exc}", file=sys.stderr)
        status, iterations, nnz = "error", 0, 0
    return BenchRow(Path(path).stem, status, iterations, time.perf_counter() - start, nnz)


def cmd_bench(args) -> int:
    files = sorted(str(p) for p in Path(args.directory).glob("*.mps"))
    if not files:
        raise CliError(f"no .mps files in {args.directory}")
    config_from_args(args)  # validate flags before starting any work
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, files, [args] * len(files)))
    else:
        rows = [_bench_one(f, args) for f in files]
    limit = args.time_limit if math.isfinite(args.time_limit) else max((r.time for r in rows), default=0.0)
    summary = BenchSummary(rows, limit, args.sgm_shift)
    width = max(len(r.name) for r in rows)
    print(f"{'instance':<{width}}  {'status':<22}  {'iters':>8}  {'time':>9}")
    for r in rows:
        print(f"{r.name:<{width}}  {r.status:<22}  {r.iterations:>8}  {r.time:>9.3f}")
    print(f"SGM{args.sgm_shift:g} = {summary.sgm:.4f}s")
    for bucket, (solved, total) in summary.solved_by_bucket.items():
        print(f"{bucket}: {solved}/{total} solved")
    if args.json_out:
        Path(args.json_out).write_text(to_json(summary.to_dict()), encoding="utf-8")
    return EXIT_OK


def load_certificate(path) -> tuple[str, np.ndarray]:
    """Read ``{"type": "primal"|"dual", "vector": [...]}`` or a report's certificate block."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read certificate {path}: {exc}") from None
    if isinstance(data, dict) and isinstance(data.get("certificate"), dict):
        data = data["certificate"]
    if not isinstance(data, dict) or data.get("type") not in ("primal", "dual"):
        raise CliError("certificate must be an object with type 'primal' or 'dual'")
    vec = data.get("vector")
    if isinstance(vec, dict):
        vec = vec.get("values")
    if not isinstance(vec, list) or not all(isinstance(t, (int, float)) for t in vec):
        raise CliError("certificate vector must be a list of numbers")
    return data["type"], np.asarray(vec, dtype=np.float64)


def cmd_check_certificate(args) -> int:
    _, lp, _ = load_standard(args.lp, args.fixed_format)
    kind, vec = load_certificate(args.certificate)
    expected = lp.m if kind == "primal" else lp.n
    if vec.size != expected:
        raise CliError(f"{kind} certificate has length {vec.size}, expected {expected}")
    if kind == "primal":
        report = validate_primal_infeasibility(vec, lp, args.cert_tol)
        ok = report.primal_valid
    else:
        report = validate_dual_infeasibility(vec, lp, args.cert_tol)
        ok = report.dual_valid
    print(report)
    print("valid" if ok else "invalid")
    return EXIT_OK if ok else EXIT_ERROR


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "check-certificate": cmd_check_certificate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CliError, MpsParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
