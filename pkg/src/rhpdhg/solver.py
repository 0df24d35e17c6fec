"""Restarted Halpern PDHG.

Each epoch runs the anchored iteration

    z^{k+1} = (k+1)/(k+2) * T(z^k) + 1/(k+2) * z^0

from its anchor ``z^0``.  When the restart rule fires at inner step ``k``
the next epoch is anchored at ``T(z^k)``, which is already on hand.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .diagnostics import DEFAULT_TOL_ACTIVE, TraceRecord, TraceSink, partition_estimate
from .infeasibility import (
    DEFAULT_CERT_TOL,
    CandidateSource,
    CertificateCandidate,
    FarkasReport,
    classify,
)
from .lp_model import StandardFormLP, spmv
from .pdhg_core import (
    Iterate,
    KktError,
    StepSize,
    _norm_from_parts,
    apply_operator,
    kkt_error,
    kkt_from_products,
    pdhg_step,
)


@dataclass(frozen=True)
class FixedFrequency:
    """Restart every ``k_star`` inner iterations."""

    k_star: int

    def __post_init__(self):
        if self.k_star < 1:
            raise ValueError("k_star must be at least 1")


@dataclass(frozen=True)
class AdaptiveResidualDecay:
    """Restart once the fixed-point residual has fallen by ``beta`` within
    the epoch; the first epoch instead runs ``tau0`` inner iterations.

    On infeasible problems the residual tends to the nonzero displacement
    and never decays, so an epoch that reaches ``stall_length`` inner
    iterations is restarted anyway.  ``stall_length=None`` disables this.
    """

    beta: float = 1.0 / math.e
    tau0: int = 32
    stall_length: int | None = 1000

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.tau0 < 1:
            raise ValueError("tau0 must be at least 1")
        if self.stall_length is not None and self.stall_length < 1:
            raise ValueError("stall_length must be at least 1")


@dataclass(frozen=True)
class NoRestart:
    pass


RestartScheme = Union[FixedFrequency, AdaptiveResidualDecay, NoRestart]


class Status(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    PRIMAL_DUAL_INFEASIBLE = "primal_dual_infeasible"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"

    @property
    def is_infeasible(self) -> bool:
        return self in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE,
                        Status.PRIMAL_DUAL_INFEASIBLE)

    @property
    def is_limit(self) -> bool:
        return self in (Status.ITERATION_LIMIT, Status.TIME_LIMIT)


@dataclass
class SolverConfig:
    restart: RestartScheme = field(default_factory=AdaptiveResidualDecay)
    tolerance: float = 1e-8
    iteration_limit: int = 100_000
    time_limit: float = math.inf
    eta: float | None = None
    infeasibility_check_period: int = 100
    trace_period: int = 0
    certificate_tol: float = DEFAULT_CERT_TOL
    tol_active: float = DEFAULT_TOL_ACTIVE
    initial: Iterate | None = None

    def __post_init__(self):
        if not (self.tolerance > 0 and math.isfinite(self.tolerance)):
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.iteration_limit < 0:
            raise ValueError("iteration_limit must be nonnegative")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.infeasibility_check_period < 0 or self.trace_period < 0:
            raise ValueError("periods must be nonnegative (0 disables)")
        if not self.certificate_tol > 0:
            raise ValueError("certificate_tol must be positive")


@dataclass
class EpochStats:
    epoch: int
    start_iteration: int
    start_residual: float
    start_kkt: KktError
    length: int | None = None
    residual_ratio: float | None = None
    trigger: str | None = None


@dataclass
class Certificate:
    kind: str  # "primal" (Farkas y) or "dual" (improving ray x)
    vector: np.ndarray
    report: FarkasReport
    source: CandidateSource
    iteration: int


@dataclass
class SolveResult:
    status: Status
    iterate: Iterate
    kkt: KktError
    eta: float
    iterations: int = 0
    spmv_count: int = 0
    wall_time: float = 0.0
    epochs: list[EpochStats] = field(default_factory=list)
    certificates: list[Certificate] = field(default_factory=list)
    trace: list[TraceRecord] = field(default_factory=list)
    scheme: str = "halpern"

    @property
    def certificate(self) -> Certificate | None:
        return self.certificates[0] if self.certificates else None

    def certificate_of(self, kind: str) -> Certificate | None:
        return next((c for c in self.certificates if c.kind == kind), None)


IterateHook = Callable[[int, int, Iterate, Iterate, float], None]


def halpern_step(z_k: Iterate, z_anchor: Iterate, k: int, lp: StandardFormLP, eta,
                 *, unconstrained: bool = False) -> Iterate:
    """``((k+1) T(z_k) + z_anchor) / (k+2)``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    tz = pdhg_step(z_k, lp, eta, unconstrained=unconstrained)
    w = 1.0 / (k + 2)
    return Iterate((1.0 - w) * tz.x + w * z_anchor.x, (1.0 - w) * tz.y + w * z_anchor.y)


def restart_trigger(scheme: RestartScheme, n: int, k: int, residual_now: float,
                    residual_epoch_start: float) -> str | None:
    """Name of the rule that fires at inner step ``k`` of epoch ``n``, or None."""
    if isinstance(scheme, FixedFrequency):
        return "fixed" if k >= scheme.k_star else None
    if isinstance(scheme, AdaptiveResidualDecay):
        if n == 0:
            return "tau0" if k > scheme.tau0 else None
        if residual_now <= scheme.beta * residual_epoch_start:
            return "decay"
        if scheme.stall_length is not None and k >= scheme.stall_length:
            return "stall"
        return None
    if isinstance(scheme, NoRestart):
        return None
    raise TypeError(f"unknown restart scheme {scheme!r}")


def should_restart(scheme: RestartScheme, n: int, k: int, residual_now: float,
                   residual_epoch_start: float) -> bool:
    return restart_trigger(scheme, n, k, residual_now, residual_epoch_start) is not None


class _Certifier:
    """Runs periodic certificate checks and decides when to stop on them.

    A one-sided certificate is held back while the other half of the
    displacement is still clearly nonzero, since the problem may turn out
    infeasible on both sides.
    """

    def __init__(self, lp: StandardFormLP, config: SolverConfig):
        self.lp = lp
        self.tol = config.certificate_tol
        self.opt_tol = config.tolerance
        self.pending: list[Certificate] = []

    def check(self, candidates, kkt: KktError, iteration: int) -> list[Certificate] | None:
        result = classify(candidates, self.lp, self.tol)
        found: dict[str, Certificate] = {}
        diff = next((c for c in candidates if c.source is CandidateSource.ITERATE_DIFFERENCE), candidates[0])
        # a point feasible to tolerance on one side cannot be certified infeasible on that side
        if result.primal is not None and kkt.primal_residual > self.opt_tol:
            found["primal"] = Certificate("primal", result.primal_vector, result.primal,
                                          result.primal_source, iteration)
        if result.dual is not None and kkt.dual_residual > self.opt_tol:
            found["dual"] = Certificate("dual", result.dual_vector, result.dual,
                                        result.dual_source, iteration)
        for cert in self.pending:
            found.setdefault(cert.kind, cert)
        if not found:
            return None
        if len(found) == 2:
            return [found["primal"], found["dual"]]
        self.pending = list(found.values())
        (kind,) = found
        other = diff.v_x if kind == "primal" else diff.v_y
        own = diff.v_y if kind == "primal" else diff.v_x
        own_size = float(np.max(np.abs(own), initial=0.0))
        other_size = float(np.max(np.abs(other), initial=0.0))
        if other_size <= math.sqrt(self.tol) * max(own_size, 1e-300):
            return self.pending
        return None


def _status_for(certs: list[Certificate]) -> Status:
    kinds = {c.kind for c in certs}
    if kinds == {"primal", "dual"}:
        return Status.PRIMAL_DUAL_INFEASIBLE
    return Status.PRIMAL_INFEASIBLE if "primal" in kinds else Status.DUAL_INFEASIBLE


def solve(lp: StandardFormLP, config: SolverConfig | None = None, *,
          trace_sink: TraceSink | None = None,
          iterate_hook: IterateHook | None = None) -> SolveResult:
    """Restarted Halpern PDHG with relative-KKT termination.

    ``trace_sink`` receives a ``TraceRecord`` every ``config.trace_period``
    iterations; ``iterate_hook(n, k, z, T(z), residual)`` is called after
    every operator evaluation (meant for tests and analysis).
    """
    config = config or SolverConfig()
    start = time.perf_counter()
    eta = StepSize.for_lp(lp, config.eta).eta
    scheme = config.restart

    z0 = config.initial.copy() if config.initial is not None else Iterate.zeros(lp)
    if z0.x.shape != (lp.n,) or z0.y.shape != (lp.m,):
        raise ValueError("initial iterate dimensions do not match the LP")
    x, y = z0.x, z0.y
    ax = spmv(lp.A, x)
    spmv_count = 1

    result = SolveResult(Status.ITERATION_LIMIT, z0.copy(), KktError(math.inf, math.inf, math.inf), eta)
    best_kkt = math.inf
    certifier = _Certifier(lp, config)
    check_period = config.infeasibility_check_period
    trace_period = config.trace_period

    def finish(status: Status, z: Iterate | None = None, kkt: KktError | None = None):
        if z is not None:
            result.iterate = z
        result.status = status
        result.kkt = kkt if kkt is not None else kkt_error(result.iterate, lp)
        result.iterations = total
        result.spmv_count = spmv_count
        result.wall_time = time.perf_counter() - start
        return result

    total = 0
    n = 0
    while True:
        x0, y0, ax0 = x, y, ax
        k = 0
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
            dx, dy = x - xt, y - yt
            residual = _norm_from_parts(dx, dy, ax - axt, eta)
            kkt = kkt_from_products(x, y, ax, aty, lp)

            if k == 0:
                r0 = residual
                epoch = EpochStats(n, total - 1, residual, kkt)
                if result.epochs and result.epochs[-1].start_residual > 0:
                    epoch.residual_ratio = residual / result.epochs[-1].start_residual
                result.epochs.append(epoch)

            if iterate_hook is not None:
                iterate_hook(n, k, Iterate(x.copy(), y.copy()), Iterate(xt.copy(), yt.copy()), residual)

            if kkt.max_relative < best_kkt:
                best_kkt = kkt.max_relative
                result.iterate = Iterate(x.copy(), y.copy())

            if kkt.max_relative <= config.tolerance and (x.size == 0 or x.min() >= 0.0):
                z = Iterate(x.copy(), y.copy())
                exact = kkt_error(z, lp)
                spmv_count += 2
                if exact.max_relative <= config.tolerance:
                    epoch.length = k
                    return finish(Status.OPTIMAL, z, exact)

            if trace_period and total % trace_period == 0:
                rec = TraceRecord(
                    epoch=n, inner=k, iteration=total - 1, fixed_point_residual=residual,
                    kkt_primal=kkt.primal_residual, kkt_dual=kkt.dual_residual, kkt_gap=kkt.gap_residual,
                    partition=partition_estimate(Iterate(x, y), lp, config.tol_active, aty=aty),
                    cert_normalized_norm=(
                        (2.0 / k) * _norm_from_parts(x - x0, y - y0, ax - ax0, eta) if k else math.nan),
                    cert_difference_norm=residual,
                    wall_time=time.perf_counter() - start,
                )
                result.trace.append(rec)
                if trace_sink is not None:
                    trace_sink(rec)

            at_boundary = k == 0 and n >= 1
            if check_period and (total % check_period == 0 or at_boundary):
                cands = [CertificateCandidate(xt - x, yt - y, CandidateSource.ITERATE_DIFFERENCE, total - 1)]
                if k >= 1:
                    cands.append(CertificateCandidate((2.0 / k) * (x - x0), (2.0 / k) * (y - y0),
                                                      CandidateSource.NORMALIZED_ITERATE, total - 1))
                spmv_count += 4 * len(cands)
                certs = certifier.check(cands, kkt, total - 1)
                if certs is not None:
                    epoch.length = k
                    result.certificates = certs
                    return finish(_status_for(certs), Iterate(x.copy(), y.copy()))

            trigger = restart_trigger(scheme, n, k, residual, r0)
            if trigger is not None:
                epoch.length = k
                epoch.trigger = trigger
                x, y, ax = xt, yt, axt
                n += 1
                break

            w = 1.0 / (k + 2)
            x = (1.0 - w) * xt + w * x0
            y = (1.0 - w) * yt + w * y0
            ax = (1.0 - w) * axt + w * ax0
            k += 1


def solve_baseline(lp: StandardFormLP, config: SolverConfig | None = None, mode: str = "vanilla",
                   **kwargs) -> SolveResult:
    """Reference methods: ``vanilla``, ``averaged`` or ``restarted_average`` PDHG."""
    from .baselines import run_baseline

    return run_baseline(lp, config or SolverConfig(), mode, **kwargs)
