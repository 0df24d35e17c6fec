"""The PDHG operator for ``min_{x>=0} max_y c'x + y'Ax - b'y`` and its metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lp_model import StandardFormLP, spmv, spmv_transpose


class StepSizeError(ValueError):
    pass


class NormError(ArithmeticError):
    """The canonical quadratic form came out negative: the step size is too large."""


@dataclass
class Iterate:
    """Primal-dual pair ``z = (x, y)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)

    @classmethod
    def zeros(cls, lp: StandardFormLP) -> "Iterate":
        return cls(np.zeros(lp.n), np.zeros(lp.m))

    @classmethod
    def from_vector(cls, vec, n: int) -> "Iterate":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[:n].copy(), vec[n:].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.x, self.y))

    def copy(self) -> "Iterate":
        return Iterate(self.x.copy(), self.y.copy())

    def __add__(self, other: "Iterate") -> "Iterate":
        return Iterate(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Iterate") -> "Iterate":
        return Iterate(self.x - other.x, self.y - other.y)

    def __mul__(self, t: float) -> "Iterate":
        return Iterate(t * self.x, t * self.y)

    __rmul__ = __mul__

    def __neg__(self) -> "Iterate":
        return Iterate(-self.x, -self.y)

    def norm2(self) -> float:
        return math.sqrt(float(self.x @ self.x + self.y @ self.y))

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.x), initial=0.0), np.max(np.abs(self.y), initial=0.0)))


@dataclass(frozen=True)
class StepSize:
    """Common primal and dual step ``eta``, checked against ``1/(2 ||A||)``.

    The check uses the power-iteration estimate, which never exceeds the
    true norm, so ``eta = 1/(2 ||A||_2)`` computed exactly is accepted.
    """

    eta: float

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise StepSizeError(f"step size must be positive and finite, got {self.eta}")

    @classmethod
    def for_lp(cls, lp: StandardFormLP, eta: float | None = None) -> "StepSize":
        if eta is None:
            return cls(lp.default_step_size())
        sigma = lp.spectral_norm
        if sigma > 0 and eta > (1.0 + 1e-12) / (2.0 * sigma):
            raise StepSizeError(
                f"eta={eta} exceeds 1/(2*||A||) = {1.0 / (2.0 * sigma)}")
        return cls(float(eta))

    def __float__(self) -> float:
        return self.eta


def _eta(eta) -> float:
    return eta.eta if isinstance(eta, StepSize) else float(eta)


def apply_operator(x, y, lp: StandardFormLP, eta: float, ax=None, *, unconstrained=False):
    """One PDHG step on raw arrays.

    Returns ``(x_new, y_new, aty, ax_new)`` where ``aty = A'y`` for the input
    and ``ax_new = A x_new``.  With ``ax = A x`` supplied the step costs one
    ``A'`` product and one ``A`` product.
    """
    aty = spmv_transpose(lp.A, y)
    x_new = x - eta * (aty + lp.c)
    if not unconstrained:
        np.maximum(x_new, 0.0, out=x_new)
    ax_new = spmv(lp.A, x_new)
    if ax is None:
        ext = spmv(lp.A, 2.0 * x_new - x)
    else:
        ext = 2.0 * ax_new - ax
    y_new = y + eta * (ext - lp.b)
    return x_new, y_new, aty, ax_new


def pdhg_step(z: Iterate, lp: StandardFormLP, eta, *, unconstrained: bool = False) -> Iterate:
    """``T(z)``: projected primal descent step, then extrapolated dual ascent step.

    ``unconstrained=True`` drops the projection onto ``x >= 0`` (the bilinear
    problem without sign constraints).
    """
    if z.x.shape != (lp.n,) or z.y.shape != (lp.m,):
        raise ValueError("iterate dimensions do not match the LP")
    x_new, y_new, _, _ = apply_operator(z.x, z.y, lp, _eta(eta), unconstrained=unconstrained)
    return Iterate(x_new, y_new)


def quadratic_form(dx, dy, a_dx, eta: float) -> float:
    """``dx'dx/eta - 2 dy'(A dx) + dy'dy/eta`` given ``a_dx = A dx``."""
    return float(dx @ dx) / eta - 2.0 * float(dy @ a_dx) + float(dy @ dy) / eta


def _sqrt_form(q: float, scale: float) -> float:
    if q >= 0.0:
        return math.sqrt(q)
    # rounding can push a zero form slightly negative
    if q >= -1e-12 * scale:
        return 0.0
    raise NormError(f"canonical quadratic form is negative ({q:.3e}); step size too large")


def _norm_from_parts(dx, dy, a_dx, eta: float) -> float:
    q = quadratic_form(dx, dy, a_dx, eta)
    return _sqrt_form(q, (float(dx @ dx) + float(dy @ dy)) / eta)


class CanonicalNorm:
    """Norm induced by ``P = [[I/eta, -A'], [-A, I/eta]]``, evaluated without forming P."""

    def __init__(self, lp: StandardFormLP, eta):
        self.lp = lp
        self.eta = _eta(eta)
        sigma = lp.spectral_norm
        if sigma > 0 and self.eta * sigma >= 1.0:
            raise StepSizeError(
                f"eta={self.eta} gives an indefinite canonical form (need eta < 1/||A||)")

    def __call__(self, z: Iterate) -> float:
        return _norm_from_parts(z.x, z.y, spmv(self.lp.A, z.x), self.eta)


def canonical_norm(z: Iterate, lp: StandardFormLP, eta) -> float:
    """``sqrt(x'x/eta - 2 y'Ax + y'y/eta)``; one ``A`` product."""
    return _norm_from_parts(z.x, z.y, spmv(lp.A, z.x), _eta(eta))


def fixed_point_residual(z: Iterate, lp: StandardFormLP, eta, *, unconstrained: bool = False) -> float:
    """``||z - T(z)||`` in the canonical norm."""
    return canonical_norm(z - pdhg_step(z, lp, eta, unconstrained=unconstrained), lp, eta)


@dataclass(frozen=True)
class KktError:
    primal_residual: float
    dual_residual: float
    gap_residual: float

    @property
    def max_relative(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.gap_residual)


def kkt_from_products(x, y, ax, aty, lp: StandardFormLP) -> KktError:
    """Relative KKT error from cached ``Ax`` and ``A'y``."""
    primal = float(np.linalg.norm(ax - lp.b)) / (1.0 + lp.b_norm)
    dual = float(np.linalg.norm(np.maximum(-(lp.c + aty), 0.0))) / (1.0 + lp.c_norm)
    pobj = float(lp.c @ x)
    bty = float(lp.b @ y)
    gap = abs(pobj + bty) / (1.0 + abs(pobj) + abs(bty))
    return KktError(primal, dual, gap)


def kkt_error(z: Iterate, lp: StandardFormLP) -> KktError:
    """Relative primal feasibility, dual feasibility and duality gap.

    primal = ||Ax - b|| / (1 + ||b||)
    dual   = ||[-(c + A'y)]^+|| / (1 + ||c||)
    gap    = |c'x + b'y| / (1 + |c'x| + |b'y|)
    """
    return kkt_from_products(z.x, z.y, spmv(lp.A, z.x), spmv_transpose(lp.A, z.y), lp)

