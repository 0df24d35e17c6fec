"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (lines appear in the ``-v`` output) or directly with
``python3 tests/test_acceptance.py`` for just the twelve summary lines.
"""

from __future__ import annotations

import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import CORPUS_SEED, FIXTURES, as_lp, oracle_corpus  # noqa: E402
from oracles import canonical_norm_dense, enumerate_vertices, long_run_displacement  # noqa: E402

from rhpdhg.baselines import equivalence_check  # noqa: E402
from rhpdhg.cli import BenchRow, BenchSummary, shifted_geometric_mean  # noqa: E402
from rhpdhg.diagnostics import PartitionEstimate, identification_iteration  # noqa: E402
from rhpdhg.infeasibility import validate_dual_infeasibility, validate_primal_infeasibility  # noqa: E402
from rhpdhg.lp_model import SparseMatrix, StandardFormLP, spmv, spmv_transpose  # noqa: E402
from rhpdhg.mps_io import (MpsParseError, parse_mps, read_mps, report_from_result, to_json,  # noqa: E402
                           write_mps)
from rhpdhg.pdhg_core import Iterate, canonical_norm, pdhg_step  # noqa: E402
from rhpdhg.solver import AdaptiveResidualDecay, FixedFrequency, SolverConfig, Status, solve, solve_baseline  # noqa: E402

E1 = StandardFormLP.from_dense([[1.0]], [1.0], [0.0], name="E1")
E1_STAR = Iterate([1.0], [0.0])
PINF = StandardFormLP.from_dense([[1.0], [1.0]], [1.0, 2.0], [0.0], name="PINF")
DINF = StandardFormLP.from_dense([[1.0, -1.0]], [0.0], [-1.0, 0.0], name="DINF")

# Displacement T(z) - z of vanilla PDHG on PINF after 1e5 iterations, from
# the dense oracle at the solver's default step size.  The closed form is
# v = (0, eta/2, -eta/2); the frozen value agrees with it to 1e-12.
PINF_ETA = 0.35351803878939475
PINF_V_X = np.array([0.0])
PINF_V_Y = np.array([0.17675901939583127, -0.17675901939583127])

IDENTIFICATION_SEED = 8


def report(number: int, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}")


def _oracle_instances():
    """E1 plus the ten planted instances, each with its unique optimum."""
    out = [(E1, E1_STAR, 0.0)]
    for o in oracle_corpus(10, CORPUS_SEED):
        vs = enumerate_vertices(o.A, o.b, o.c)
        assert len(vs.optimal_vertices) == 1 and vs.dual is not None
        out.append((as_lp(o), Iterate(vs.optimal_vertices[0], vs.dual), vs.objective))
    return out


def _collect(lp, config):
    """Solve and keep every iterate the operator was applied to, grouped by epoch."""
    epochs: list[list[tuple[Iterate, float]]] = []

    def hook(n, k, z, tz, r):
        if k == 0:
            epochs.append([])
        epochs[-1].append((z, r))
    return solve(lp, config, iterate_hook=hook), epochs


# ------------------------------------------------------------------ checks

def check_1():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        m, n = (int(t) for t in rng.integers(1, 11, 2))
        A = rng.standard_normal((m, n))
        lp = StandardFormLP.from_dense(A, rng.standard_normal(m), rng.standard_normal(n))
        z0 = Iterate(rng.standard_normal(n), rng.standard_normal(m))
        worst = max(worst, equivalence_check(lp, z0, 200, 1.0 / (2.0 * np.linalg.norm(A, 2))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 1.0
    return ok, f"Halpern vs averaged PDHG max deviation {worst:.2e} (<= 1e-9), {elapsed:.2f}s (< 1s)"


def check_2():
    start = time.perf_counter()
    worst_slack = -math.inf
    count = 0
    for lp, star, _ in _oracle_instances():
        res, epochs = _collect(lp, SolverConfig())
        for run in epochs:
            d0 = canonical_norm(run[0][0] - star, lp, res.eta)
            for k, (_, r) in enumerate(run[:1001]):
                worst_slack = max(worst_slack, r - 2.0 * d0 / (k + 1))
                count += 1
    elapsed = time.perf_counter() - start
    ok = worst_slack <= 1e-9 and elapsed < 5.0
    return ok, (f"residual <= 2 dist(z0,Z*)/(k+1) on {count} iterates, worst excess {worst_slack:.2e}, "
                f"{elapsed:.2f}s (< 5s)")


def check_3():
    start = time.perf_counter()
    worst = 0.0
    pairs = 0
    bad = 0
    for lp, _, _ in _oracle_instances():
        res = solve(lp, SolverConfig(restart=AdaptiveResidualDecay()))
        for prev, nxt in zip(res.epochs[1:], res.epochs[2:]):
            pairs += 1
            if prev.start_residual > 0:
                worst = max(worst, nxt.start_residual / prev.start_residual)
            if nxt.start_residual > prev.start_residual / math.e + 1e-10:
                bad += 1
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 5.0
    return ok, (f"{pairs} epoch transitions, worst ratio {worst:.4f} vs 1/e = {1 / math.e:.4f}, "
                f"{bad} violations, {elapsed:.2f}s (< 5s)")


def check_4():
    worst_rise = 0.0
    rises = 0
    sandwich_bad = 0
    bound_bad = 0
    for lp, star, _ in _oracle_instances():
        res, epochs = _collect(lp, SolverConfig())
        dists = [canonical_norm(z - star, lp, res.eta) for run in epochs for z, _ in run]
        for a, b in zip(dists, dists[1:]):
            if b > a + 1e-10:
                rises += 1
                worst_rise = max(worst_rise, b - a)
        # what is guaranteed: d(z^{n+1,0}) <= d(z^{n,last}) and d(z^{n,k}) <= d(z^{n,0})
        starts = [canonical_norm(run[0][0] - star, lp, res.eta) for run in epochs]
        for n, run in enumerate(epochs):
            inner = [canonical_norm(z - star, lp, res.eta) for z, _ in run]
            if max(inner) > starts[n] + 1e-10:
                sandwich_bad += 1
            if n + 1 < len(starts) and starts[n + 1] > inner[-1] + 1e-10:
                sandwich_bad += 1
        z00 = epochs[0][0][0]
        radius = 2.0 * ((z00 - star).norm2() + star.norm2())
        if max(z.norm2() for run in epochs for z, _ in run) > radius + 1e-8:
            bound_bad += 1
    ok = rises == 0 and bound_bad == 0
    return ok, (f"full-sequence distance increases {rises} times (worst {worst_rise:.2e}); "
                f"epoch sandwich violations {sandwich_bad}; boundedness violations {bound_bad}")


def check_6():
    lines = []
    ok = True
    for lp, kind in ((PINF, "primal"), (DINF, "dual")):
        start = time.perf_counter()
        res = solve(lp, SolverConfig(iteration_limit=10_000))
        elapsed = time.perf_counter() - start
        want = Status.PRIMAL_INFEASIBLE if kind == "primal" else Status.DUAL_INFEASIBLE
        cert = res.certificate_of(kind)
        valid = False
        residual = margin = math.nan
        if cert is not None:
            if kind == "primal":
                rep = validate_primal_infeasibility(cert.vector, lp)
                valid, residual, margin = rep.primal_valid, rep.primal_cert_residual, rep.primal_cert_margin
                direct = float(np.max(spmv_transpose(lp.A, cert.vector))) <= 1e-6 and lp.b @ cert.vector > 0
            else:
                rep = validate_dual_infeasibility(cert.vector, lp)
                valid, residual, margin = rep.dual_valid, rep.dual_cert_residual, rep.dual_cert_margin
                direct = (float(np.max(np.abs(spmv(lp.A, cert.vector)))) <= 1e-6
                          and cert.vector.min() >= -1e-6 and lp.c @ cert.vector < 0)
            valid = valid and direct
        this = res.status is want and valid and residual <= 1e-6 and margin > 0 and elapsed < 2.0
        ok = ok and this
        lines.append(f"{lp.name} -> {res.status.value} at {res.iterations} its, residual {residual:.1e}, "
                     f"margin {margin:.3f}, {elapsed:.2f}s")
    return ok, "; ".join(lines)


def check_7():
    res, epochs = None, []
    config = SolverConfig(restart=FixedFrequency(200), infeasibility_check_period=0, iteration_limit=201 * 25)
    errors = []

    def hook(n, k, z, tz, r):
        if k == 0:
            d = tz - z
            errors.append(float(np.linalg.norm(np.concatenate([d.x - PINF_V_X, d.y - PINF_V_Y]))))
    res = solve(PINF, config, iterate_hook=hook)
    if abs(res.eta - PINF_ETA) > 1e-15:
        return False, f"step size {res.eta!r} differs from the one the oracle was frozen at"
    reached = next((n for n, e in enumerate(errors) if e <= 1e-6), None)
    ratios = [b / a for a, b in zip(errors[2:], errors[3:]) if a > 1e-6]
    ok = reached is not None and all(r <= 0.9 for r in ratios)
    worst = max(ratios) if ratios else math.nan
    return ok, (f"epoch-start errors {', '.join(f'{e:.1e}' for e in errors[:5])}...; worst ratio after "
                f"epoch 2 {worst:.3f} (<= 0.9); <= 1e-6 at epoch {reached}")


def check_8():
    faster = 0
    stable = 0
    details = []
    corpus = oracle_corpus(20, IDENTIFICATION_SEED)
    for o in corpus:
        lp = as_lp(o)
        oracle = PartitionEstimate(o.nonbasic, frozenset(o.basis), frozenset())
        h = solve(lp, SolverConfig(trace_period=1))
        v = solve_baseline(lp, SolverConfig(trace_period=1, iteration_limit=50_000), "vanilla")
        ih = identification_iteration(h.trace, oracle)
        iv = identification_iteration(v.trace, oracle)
        if h.status is Status.OPTIMAL and ih is not None:
            stable += 1
        if ih is not None and (iv is None or ih <= iv):
            faster += 1
        details.append((ih, iv))
    share = faster / len(corpus)
    ok = stable == len(corpus) and share >= 0.5
    return ok, (f"partition identified before termination on {stable}/{len(corpus)}; "
                f"rHPDHG no later than vanilla on {faster}/{len(corpus)} ({share:.0%}, floor 50%, "
                f"expected 70%)")


def check_9():
    rng = np.random.default_rng(909)
    worst_adj = worst_ne = worst_eq = 0.0
    for _ in range(100):
        m, n = (int(t) for t in rng.integers(1, 30, 2))
        dense = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.4)
        A = SparseMatrix.from_dense(dense)
        x, y = rng.standard_normal(n), rng.standard_normal(m)
        lhs, rhs = float(y @ spmv(A, x)), float(spmv_transpose(A, y) @ x)
        scale = max(1.0, float(np.abs(y) @ np.abs(dense) @ np.abs(x)))
        worst_adj = max(worst_adj, abs(lhs - rhs) / scale)
    for seed in range(100):
        o = oracle_corpus(1, seed=10_000 + seed)[0]
        lp = as_lp(o)
        eta = lp.default_step_size()
        z = Iterate(rng.standard_normal(lp.n) * 3, rng.standard_normal(lp.m) * 3)
        w = Iterate(rng.standard_normal(lp.n) * 3, rng.standard_normal(lp.m) * 3)
        excess = (canonical_norm(pdhg_step(z, lp, eta) - pdhg_step(w, lp, eta), lp, eta)
                  - canonical_norm(z - w, lp, eta))
        worst_ne = max(worst_ne, excess)
        # eigenvalues of the metric are 1/eta +- singular values of A
        P = np.block([[np.eye(lp.n) / eta, -o.A.T], [-o.A, np.eye(lp.m) / eta]])
        lam = np.linalg.eigvalsh(P)
        v = rng.standard_normal(lp.n + lp.m)
        zv = Iterate(v[:lp.n], v[lp.n:])
        nv = canonical_norm(zv, lp, eta)
        two = float(np.linalg.norm(v))
        assert abs(nv - canonical_norm_dense(zv.x, zv.y, o.A, eta)) <= 1e-12 * max(1.0, nv)
        worst_eq = max(worst_eq, math.sqrt(lam[0]) * two - nv, nv - math.sqrt(lam[-1]) * two)
    ok = worst_adj <= 1e-12 and worst_ne <= 1e-10 and worst_eq <= 1e-10
    return ok, (f"adjointness {worst_adj:.1e} (<= 1e-12), nonexpansive excess {worst_ne:.1e} (<= 1e-10), "
                f"norm equivalence excess {worst_eq:.1e}")


def check_5():
    start = time.perf_counter()
    worst_kkt = worst_obj = 0.0
    all_opt = True
    for lp, star, objective in _oracle_instances():
        res = solve(lp, SolverConfig(tolerance=1e-8))
        all_opt = all_opt and res.status is Status.OPTIMAL
        worst_kkt = max(worst_kkt, res.kkt.max_relative)
        got = float(lp.c @ res.iterate.x)
        worst_obj = max(worst_obj, abs(got - objective) / max(1.0, abs(objective)))
    elapsed = time.perf_counter() - start
    ok = all_opt and worst_kkt <= 1e-8 and worst_obj <= 1e-6 and elapsed < 10.0
    return ok, (f"11 instances optimal={all_opt}, worst KKT {worst_kkt:.1e}, worst objective error "
                f"{worst_obj:.1e} (<= 1e-6), {elapsed:.2f}s (< 10s)")


def check_10():
    valid = sorted((FIXTURES / "valid").glob("*.mps"))
    manifest = json.loads((FIXTURES / "corrupt" / "manifest.json").read_text())
    tripped = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for path in valid:
            fixed = path.stem == "fixed_format"
            g = read_mps(path, fixed=fixed)
            for mode in ([True] if fixed else [False, True]):
                if not g.identical(parse_mps(write_mps(g, fixed=mode), fixed=mode)):
                    tripped.append(f"{path.stem} round trip")
    for name, expected in manifest.items():
        try:
            read_mps(FIXTURES / "corrupt" / name, **expected["options"])
            tripped.append(f"{name} parsed")
        except MpsParseError as exc:
            if exc.kind != expected["kind"] or exc.line != expected["line"]:
                tripped.append(f"{name} gave {exc.kind}@{exc.line}")
    texts = " ".join(p.read_text() for p in valid)
    coverage = ("RANGES" in texts and all(f" {b} " in texts for b in ("UP", "LO", "FX", "FR", "MI", "PL",
                                                                       "BV", "LI", "UI")))
    ok = not tripped and coverage and len(valid) + len(manifest) >= 12 and len(manifest) >= 6
    return ok, (f"{len(valid)} valid files round-trip, {len(manifest)} corrupt files raise the designated "
                f"error and line; problems: {tripped or 'none'}")


def check_11():
    a = shifted_geometric_mean([0.0, 0.0])
    b = shifted_geometric_mean([10.0, 40.0])
    rows = [BenchRow("solved", "optimal", 1, 10.0, 1), BenchRow("unsolved", "time_limit", 1, 7.0, 1)]
    c = BenchSummary(rows, time_limit=60.0).sgm
    ok = a == 0.0 and b == math.sqrt(1000.0) - 10.0 and c == math.sqrt(20.0 * 70.0) - 10.0
    return ok, f"SGM10(0,0) = {a!r}, SGM10(10,40) = {b:.6f}, unsolved charged at limit 60 -> {c:.6f}"


def check_12():
    instances = [E1, PINF, DINF] + [as_lp(o) for o in oracle_corpus(3)]
    same = 0
    for lp in instances:
        docs = []
        for _ in range(2):
            rep = report_from_result(solve(lp, SolverConfig()), lp, instance=lp.name)
            d = rep.to_dict()
            d.pop("timing")
            docs.append(to_json(d))
        same += docs[0] == docs[1]
    ok = same == len(instances)
    return ok, f"{same}/{len(instances)} instances give byte-identical reports without timing"


CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6, 7: check_7, 8: check_8,
          9: check_9, 10: check_10, 11: check_11, 12: check_12}


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, capsys):
    ok, detail = CHECKS[number]()
    with capsys.disabled():
        print()
        report(number, ok, detail)
    assert ok, detail


def test_frozen_displacement_matches_oracle():
    """Re-derive the frozen displacement with the dense oracle."""
    A = np.array([[1.0], [1.0]])
    v_x, v_y = long_run_displacement(A, np.array([1.0, 2.0]), np.array([0.0]), PINF_ETA)
    np.testing.assert_allclose(v_x, PINF_V_X, atol=1e-9)
    np.testing.assert_allclose(v_y, PINF_V_Y, atol=1e-9)
    np.testing.assert_allclose(PINF_V_Y, [PINF_ETA / 2, -PINF_ETA / 2], atol=1e-12)


if __name__ == "__main__":
    failed = 0
    for number, check in CHECKS.items():
        ok, detail = check()
        report(number, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
