"""Reference methods: vanilla PDHG, its running average, and the average
restarted on a residual trigger.  Also the side-by-side harness showing that
on unconstrained bilinear problems Halpern iterates are exactly the running
averages of vanilla PDHG."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .diagnostics import TraceRecord, TraceSink, partition_estimate
from .infeasibility import CandidateSource, CertificateCandidate
from .lp_model import StandardFormLP, spmv
from .pdhg_core import Iterate, KktError, StepSize, _norm_from_parts, apply_operator, kkt_error, \
    kkt_from_products, pdhg_step

MODES = ("vanilla", "averaged", "restarted_average")


@dataclass(frozen=True)
class RunningAverage:
    mean: Iterate
    count: int = 0

    @classmethod
    def empty(cls, like: Iterate) -> "RunningAverage":
        return cls(Iterate(np.zeros_like(like.x), np.zeros_like(like.y)), 0)


def update_average(avg: RunningAverage, z: Iterate) -> RunningAverage:
    if z.x.shape != avg.mean.x.shape or z.y.shape != avg.mean.y.shape:
        raise ValueError("iterate dimensions do not match the average")
    w = 1.0 / (avg.count + 1)
    return RunningAverage(Iterate(avg.mean.x + w * (z.x - avg.mean.x),
                                  avg.mean.y + w * (z.y - avg.mean.y)), avg.count + 1)


def equivalence_check(lp: StandardFormLP, z0: Iterate, k_max: int, eta=None, *,
                      unconstrained: bool = True) -> float:
    """Max over ``k <= k_max`` of ``||z_halpern^k - mean(z_vanilla^0..k)||_inf``.

    Both runs skip the projection onto ``x >= 0`` unless ``unconstrained``
    is False, in which case the deviation is generally nonzero.
    """
    from .solver import halpern_step

    eta = StepSize.for_lp(lp, eta).eta
    h = z0.copy()
    v = z0.copy()
    avg = update_average(RunningAverage.empty(z0), v)
    worst = 0.0
    for k in range(k_max):
        h = halpern_step(h, z0, k, lp, eta, unconstrained=unconstrained)
        v = pdhg_step(v, lp, eta, unconstrained=unconstrained)
        avg = update_average(avg, v)
        worst = max(worst, (h - avg.mean).max_abs())
    return worst


def run_baseline(lp: StandardFormLP, config, mode: str = "vanilla", *,
                 trace_sink: TraceSink | None = None, iterate_hook=None):
    """Run a reference method under the same termination rules as ``solve``.

    ``averaged`` reports and tests the running average; ``restarted_average``
    restarts vanilla PDHG at the epoch average, using the restart scheme in
    ``config`` evaluated on the fixed-point residual of that average.
    """
    from .solver import NoRestart, SolveResult, Status, EpochStats, _Certifier, _status_for, \
        restart_trigger

    if mode not in MODES:
        raise ValueError(f"unknown baseline mode {mode!r}; expected one of {MODES}")
    start = time.perf_counter()
    eta = StepSize.for_lp(lp, config.eta).eta
    scheme = config.restart if mode == "restarted_average" else NoRestart()
    use_average = mode != "vanilla"

    z0 = config.initial.copy() if config.initial is not None else Iterate.zeros(lp)
    x, y = z0.x, z0.y
    ax = spmv(lp.A, x)
    spmv_count = 1
    result = SolveResult(Status.ITERATION_LIMIT, z0.copy(), KktError(math.inf, math.inf, math.inf), eta,
                         scheme=mode)
    best = math.inf
    certifier = _Certifier(lp, config)
    total = 0
    n = 0

    def finish(status, z=None, kkt=None):
        if z is not None:
            result.iterate = z
        result.status = status
        result.kkt = kkt if kkt is not None else kkt_error(result.iterate, lp)
        result.iterations = total
        result.spmv_count = spmv_count
        result.wall_time = time.perf_counter() - start
        return result

    while True:
        k = 0
        # running sums are kept as means of x, y, Ax and A'y
        mx = np.zeros_like(x)
        my = np.zeros_like(y)
        max_ = np.zeros_like(ax)
        maty = np.zeros(lp.n)
        r0 = None
        epoch = None
        while True:
            if total >= config.iteration_limit:
                return finish(Status.ITERATION_LIMIT)
            if time.perf_counter() - start >= config.time_limit:
                return finish(Status.TIME_LIMIT)
            xt, yt, aty, axt = apply_operator(x, y, lp, eta, ax)
            spmv_count += 2
            total += 1
            residual = _norm_from_parts(x - xt, y - yt, ax - axt, eta)

            w = 1.0 / (k + 1)
            mx += w * (x - mx)
            my += w * (y - my)
            max_ += w * (ax - max_)
            maty += w * (aty - maty)
            if use_average:
                rx, ry, rax, raty = mx, my, max_, maty
            else:
                rx, ry, rax, raty = x, y, ax, aty
            kkt = kkt_from_products(rx, ry, rax, raty, lp)

            if mode == "restarted_average":
                # residual of the average drives the restart decision
                avg_x, avg_y, _, avg_axt = apply_operator(mx, my, lp, eta, max_)
                spmv_count += 2
                trigger_residual = _norm_from_parts(mx - avg_x, my - avg_y, max_ - avg_axt, eta)
            else:
                trigger_residual = residual
            if k == 0:
                r0 = trigger_residual
                epoch = EpochStats(n, total - 1, trigger_residual, kkt)
                if result.epochs and result.epochs[-1].start_residual > 0:
                    epoch.residual_ratio = trigger_residual / result.epochs[-1].start_residual
                result.epochs.append(epoch)

            if iterate_hook is not None:
                iterate_hook(n, k, Iterate(x.copy(), y.copy()), Iterate(xt.copy(), yt.copy()), residual)

            if kkt.max_relative < best:
                best = kkt.max_relative
                result.iterate = Iterate(rx.copy(), ry.copy())
            if kkt.max_relative <= config.tolerance and (rx.size == 0 or rx.min() >= 0.0):
                z = Iterate(rx.copy(), ry.copy())
                exact = kkt_error(z, lp)
                spmv_count += 2
                if exact.max_relative <= config.tolerance:
                    epoch.length = k
                    return finish(Status.OPTIMAL, z, exact)

            if config.trace_period and total % config.trace_period == 0:
                rec = TraceRecord(
                    epoch=n, inner=k, iteration=total - 1, fixed_point_residual=residual,
                    kkt_primal=kkt.primal_residual, kkt_dual=kkt.dual_residual, kkt_gap=kkt.gap_residual,
                    partition=partition_estimate(Iterate(rx, ry), lp, config.tol_active, aty=raty),
                    cert_difference_norm=residual, wall_time=time.perf_counter() - start,
                )
                result.trace.append(rec)
                if trace_sink is not None:
                    trace_sink(rec)

            period = config.infeasibility_check_period
            if period and total % period == 0:
                cand = CertificateCandidate(xt - x, yt - y, CandidateSource.ITERATE_DIFFERENCE, total - 1)
                spmv_count += 4
                certs = certifier.check([cand], kkt_from_products(x, y, ax, aty, lp), total - 1)
                if certs is not None:
                    result.certificates = certs
                    return finish(_status_for(certs), Iterate(x.copy(), y.copy()))

            trigger = restart_trigger(scheme, n, k, trigger_residual, r0)
            if trigger is not None:
                epoch.length = k
                epoch.trigger = trigger
                x, y = mx.copy(), my.copy()
                ax = spmv(lp.A, x)
                spmv_count += 1
                n += 1
                break
            x, y, ax = xt, yt, axt
            k += 1
