"""Infeasibility certificates recovered from PDHG iterates.

On an infeasible or unbounded LP the displacement ``T(z) - z`` does not go
to zero; it converges to the minimum-norm element ``v = (v_x, v_y)`` of the
range of ``T - I``.  ``v_y`` (up to sign) is a Farkas ray for the primal
system and ``v_x`` an improving primal ray.  Two estimators of ``v`` are
available along Halpern iterates: ``(2/k)(z^k - z^0)`` and ``T(z^k) - z^k``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .lp_model import StandardFormLP, spmv, spmv_transpose
from .pdhg_core import Iterate

DEFAULT_CERT_TOL = 1e-6


class CandidateSource(enum.Enum):
    NORMALIZED_ITERATE = "normalized_iterate"
    ITERATE_DIFFERENCE = "iterate_difference"


class Orientation(enum.Enum):
    AS_IS = "as_is"
    NEGATED = "negated"


class Feasibility(enum.Enum):
    FEASIBLE = "feasible"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    PRIMAL_DUAL_INFEASIBLE = "primal_dual_infeasible"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class CertificateCandidate:
    v_x: np.ndarray
    v_y: np.ndarray
    source: CandidateSource
    at_iteration: int

    def __post_init__(self):
        if not (np.all(np.isfinite(self.v_x)) and np.all(np.isfinite(self.v_y))):
            raise ValueError("certificate candidate has non-finite entries")

    def as_iterate(self) -> Iterate:
        return Iterate(self.v_x, self.v_y)


@dataclass(frozen=True)
class FarkasReport:
    """Outcome of checking one candidate vector against a Farkas system.

    Residuals are relative: the violated amount divided by the vector's
    scale.  Margins are the normalized strict-inequality slack, e.g.
    ``b'y / (||y|| ||b||)``; a certificate needs a margin of at least ``tol``.
    """

    tol: float
    orientation: Orientation | None = None
    primal_cert_residual: float | None = None
    primal_cert_margin: float | None = None
    primal_valid: bool = False
    dual_cert_residual: float | None = None
    dual_cert_margin: float | None = None
    dual_valid: bool = False

    @property
    def valid(self) -> bool:
        return self.primal_valid or self.dual_valid


def extract_candidates(z_k: Iterate, z_0: Iterate, tz_k: Iterate, k: int):
    """Both estimators of the displacement vector at Halpern step ``k >= 1``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    normalized = (2.0 / k) * (z_k - z_0)
    difference = tz_k - z_k
    return (
        CertificateCandidate(normalized.x, normalized.y, CandidateSource.NORMALIZED_ITERATE, k),
        CertificateCandidate(difference.x, difference.y, CandidateSource.ITERATE_DIFFERENCE, k),
    )


def _primal_check(v_y, lp: StandardFormLP, tol: float, sign: float):
    y = sign * v_y
    aty = spmv_transpose(lp.A, y)
    scale = float(np.max(np.abs(v_y))) * max(1.0, lp.spectral_norm)
    residual = float(np.max(np.maximum(aty, 0.0), initial=0.0)) / scale
    denom = float(np.linalg.norm(v_y)) * lp.b_norm
    margin = float(lp.b @ y) / denom if denom > 0 else 0.0
    return residual, margin, residual <= tol and margin >= tol and margin > 0


def validate_primal_infeasibility(v_y, lp: StandardFormLP, tol: float = DEFAULT_CERT_TOL) -> FarkasReport:
    """Test ``+-v_y`` against ``A'y <= 0, b'y > 0``.

    Valid when ``||[A'y]^+||_inf <= tol * ||v_y||_inf * max(1, ||A||)`` and
    ``b'y >= tol * ||v_y||_2 * ||b||_2``.  The zero vector is never valid.
    """
    v_y = np.asarray(v_y, dtype=np.float64)
    if v_y.shape != (lp.m,):
        raise ValueError(f"v_y has shape {v_y.shape}, expected ({lp.m},)")
    if not np.any(v_y):
        return FarkasReport(tol=tol)
    best = None
    for orientation, sign in ((Orientation.AS_IS, 1.0), (Orientation.NEGATED, -1.0)):
        residual, margin, ok = _primal_check(v_y, lp, tol, sign)
        report = FarkasReport(tol=tol, orientation=orientation, primal_cert_residual=residual,
                              primal_cert_margin=margin, primal_valid=ok)
        if ok:
            return report
        if best is None or margin > best.primal_cert_margin:
            best = report
    return best


def _dual_check(v_x, lp: StandardFormLP, tol: float, sign: float):
    u = sign * v_x
    vmax = float(np.max(np.abs(v_x)))
    au = spmv(lp.A, u)
    residual = max(
        float(np.max(np.abs(au), initial=0.0)) / (vmax * max(1.0, lp.spectral_norm)),
        float(np.max(np.maximum(-u, 0.0), initial=0.0)) / vmax,
    )
    denom = float(np.linalg.norm(v_x)) * max(1.0, lp.c_norm)
    margin = -float(lp.c @ u) / denom
    return residual, margin, residual <= tol and margin >= tol and margin > 0


def validate_dual_infeasibility(v_x, lp: StandardFormLP, tol: float = DEFAULT_CERT_TOL) -> FarkasReport:
    """Test ``+-v_x`` as an improving ray: ``Au = 0, u >= 0, c'u < 0``.

    Valid when ``||Au||_inf <= tol * ||v_x||_inf * max(1, ||A||)``,
    ``||[-u]^+||_inf <= tol * ||v_x||_inf`` and
    ``c'u <= -tol * ||v_x||_2 * max(1, ||c||_2)``.
    """
    v_x = np.asarray(v_x, dtype=np.float64)
    if v_x.shape != (lp.n,):
        raise ValueError(f"v_x has shape {v_x.shape}, expected ({lp.n},)")
    if not np.any(v_x):
        return FarkasReport(tol=tol)
    best = None
    for orientation, sign in ((Orientation.AS_IS, 1.0), (Orientation.NEGATED, -1.0)):
        residual, margin, ok = _dual_check(v_x, lp, tol, sign)
        report = FarkasReport(tol=tol, orientation=orientation, dual_cert_residual=residual,
                              dual_cert_margin=margin, dual_valid=ok)
        if ok:
            return report
        if best is None or margin > best.dual_cert_margin:
            best = report
    return best


@dataclass(frozen=True)
class Classification:
    status: Feasibility
    primal: FarkasReport | None = None
    primal_vector: np.ndarray | None = None
    dual: FarkasReport | None = None
    dual_vector: np.ndarray | None = None
    primal_source: CandidateSource | None = None
    dual_source: CandidateSource | None = None


def oriented(vec: np.ndarray, report: FarkasReport) -> np.ndarray:
    return -vec if report.orientation is Orientation.NEGATED else vec


def classify(candidates, lp: StandardFormLP, tol: float = DEFAULT_CERT_TOL,
             zero_tol: float | None = None) -> Classification:
    """Combine validator outcomes over all candidates into one of the four cases.

    A validated ``v_y`` means primal infeasible, a validated ``v_x`` dual
    infeasible, both means both.  If nothing validates the result is
    FEASIBLE when every candidate is below ``zero_tol`` in max-norm
    (default ``tol * max(1, ||b||_inf, ||c||_inf)``) and UNDETERMINED otherwise.
    """
    primal = dual = None
    primal_vec = dual_vec = None
    primal_src = dual_src = None
    small = True
    if zero_tol is None:
        zero_tol = tol * max(1.0, float(np.max(np.abs(lp.b), initial=0.0)),
                             float(np.max(np.abs(lp.c), initial=0.0)))
    for cand in candidates:
        if cand.as_iterate().max_abs() > zero_tol:
            small = False
        if primal is None and lp.m:
            rep = validate_primal_infeasibility(cand.v_y, lp, tol)
            if rep.primal_valid:
                primal, primal_vec, primal_src = rep, oriented(cand.v_y, rep), cand.source
        if dual is None and lp.n:
            rep = validate_dual_infeasibility(cand.v_x, lp, tol)
            if rep.dual_valid:
                dual, dual_vec, dual_src = rep, oriented(cand.v_x, rep), cand.source
    if primal is not None and dual is not None:
        status = Feasibility.PRIMAL_DUAL_INFEASIBLE
    elif primal is not None:
        status = Feasibility.PRIMAL_INFEASIBLE
    elif dual is not None:
        status = Feasibility.DUAL_INFEASIBLE
    elif small:
        status = Feasibility.FEASIBLE
    else:
        status = Feasibility.UNDETERMINED
    return Classification(status, primal, primal_vec, dual, dual_vec, primal_src, dual_src)
