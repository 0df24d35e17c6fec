"""Instrumentation for the two-stage behaviour: active-set partitions,
non-degeneracy metrics, empirical sharpness ratios and trace records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lp_model import StandardFormLP, spmv_transpose
from .pdhg_core import Iterate, canonical_norm, fixed_point_residual

DEFAULT_TOL_ACTIVE = 1e-6


@dataclass(frozen=True)
class PartitionEstimate:
    """Primal indices split into non-basic ``N``, non-degenerate basic ``B1``
    and degenerate basic ``B2``."""

    N: frozenset[int]
    B1: frozenset[int]
    B2: frozenset[int]
    tol_active: float = DEFAULT_TOL_ACTIVE

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.N), len(self.B1), len(self.B2)

    def same_nondegenerate_part(self, other: "PartitionEstimate") -> bool:
        return self.N == other.N and self.B1 == other.B1


@dataclass
class TraceRecord:
    epoch: int
    inner: int
    iteration: int
    fixed_point_residual: float
    kkt_primal: float
    kkt_dual: float
    kkt_gap: float
    partition: PartitionEstimate | None = None
    cert_normalized_norm: float = math.nan
    cert_difference_norm: float = math.nan
    wall_time: float = 0.0

    @property
    def kkt_max(self) -> float:
        return max(self.kkt_primal, self.kkt_dual, self.kkt_gap)

    @property
    def partition_sizes(self) -> tuple[int, int, int]:
        if self.partition is None:
            return (-1, -1, -1)
        return self.partition.sizes


def reduced_costs(z: Iterate, lp: StandardFormLP, aty=None) -> np.ndarray:
    if aty is None:
        aty = spmv_transpose(lp.A, z.y)
    return lp.c + aty


def partition_estimate(z: Iterate, lp: StandardFormLP, tol_active: float = DEFAULT_TOL_ACTIVE,
                       aty=None) -> PartitionEstimate:
    """Classify every primal index by its reduced cost ``c + A'y`` and value.

    ``N``: reduced cost above ``tol_active * ||A||``; ``B1``: reduced cost
    within that band and ``x_i > tol_active``; everything else is ``B2``.
    """
    rc = reduced_costs(z, lp, aty)
    band = tol_active * lp.spectral_norm
    in_n = rc > band
    in_b1 = (np.abs(rc) <= band) & (z.x > tol_active)
    in_b2 = ~(in_n | in_b1)
    return PartitionEstimate(
        frozenset(np.flatnonzero(in_n).tolist()),
        frozenset(np.flatnonzero(in_b1).tolist()),
        frozenset(np.flatnonzero(in_b2).tolist()),
        tol_active,
    )


def compute_delta(z_star: Iterate, p: PartitionEstimate, lp: StandardFormLP) -> float:
    """Non-degeneracy metric: the smallest normalized reduced cost over ``N``
    or primal value over ``B1``.  Returns ``inf`` when both sets are empty."""
    terms = []
    if p.N:
        rc = reduced_costs(z_star, lp)
        terms.append(min(rc[i] for i in p.N) / lp.spectral_norm)
    if p.B1:
        terms.append(min(z_star.x[i] for i in p.B1))
    return float(min(terms)) if terms else math.inf


@dataclass(frozen=True)
class DisplacementPartition:
    B: frozenset[int]
    N1: frozenset[int]
    N2: frozenset[int]


def compute_delta_v(v, lp: StandardFormLP, tol: float = DEFAULT_TOL_ACTIVE):
    """Partition ``{B, N1, N2}`` of primal indices induced by a displacement
    vector ``v`` and the matching closeness-to-degeneracy ``delta_v``."""
    v_x = np.asarray(v.v_x if hasattr(v, "v_x") else v.x, dtype=np.float64)
    v_y = np.asarray(v.v_y if hasattr(v, "v_y") else v.y, dtype=np.float64)
    atv = spmv_transpose(lp.A, v_y)
    in_b = v_x > tol
    in_n2 = ~in_b & (atv > tol)
    in_n1 = ~(in_b | in_n2)
    part = DisplacementPartition(
        frozenset(np.flatnonzero(in_b).tolist()),
        frozenset(np.flatnonzero(in_n1).tolist()),
        frozenset(np.flatnonzero(in_n2).tolist()),
    )
    terms = []
    if part.B:
        terms.append(float(np.min(v_x[in_b])))
    if part.N2:
        terms.append(float(np.min(atv[in_n2])) / lp.spectral_norm)
    return part, (min(terms) if terms else math.inf)


def identification_iteration(trace: Sequence[TraceRecord], oracle: PartitionEstimate) -> int | None:
    """First logged iteration from which ``(N, B1)`` agrees with the oracle
    on every later record, or ``None`` if the last record disagrees."""
    first = None
    for rec in trace:
        if rec.partition is not None and rec.partition.same_nondegenerate_part(oracle):
            if first is None:
                first = rec.iteration
        else:
            first = None
    return first


def measure_sharpness(z: Iterate, lp: StandardFormLP, oracle_optimal_set, eta) -> float:
    """Empirical ratio ``||z - T(z)|| / dist(z, Z*)`` in the canonical norm.

    ``oracle_optimal_set`` is either a single optimal ``Iterate`` or a
    callable returning the canonical distance to the optimal set.  Returns
    ``inf`` when ``z`` lies in the set.
    """
    if isinstance(oracle_optimal_set, Iterate):
        dist = canonical_norm(z - oracle_optimal_set, lp, eta)
    else:
        dist = float(oracle_optimal_set(z))
    if dist == 0.0:
        return math.inf
    return fixed_point_residual(z, lp, eta) / dist


@dataclass
class TraceCollector:
    """Simple sink that keeps every record it is handed."""

    records: list[TraceRecord] = field(default_factory=list)

    def __call__(self, record: TraceRecord) -> None:
        self.records.append(record)


TraceSink = Callable[[TraceRecord], None]
