"""Problem data: sparse matrices, standard-form and general-form LPs.

The solver works on the standard form ``min c'x  s.t.  Ax = b, x >= 0``.
``GeneralFormLP`` is what the MPS reader produces; ``to_standard_form``
reduces it and returns a ``VariableMap`` that undoes the reduction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_NORM_TOL = 1e-4
DEFAULT_NORM_MAX_ITERS = 5000
DEFAULT_NORM_SEED = 0


class DimensionError(ValueError):
    pass


class SparseMatrix:
    """Immutable sparse matrix kept in both row- and column-compressed order.

    ``spmv`` walks the row-major copy and ``spmv_transpose`` the column-major
    copy.  Both use the same accumulation kernel, so ``A.spmv_transpose(y)``
    is bit-identical to ``A.transpose().spmv(y)``.
    """

    def __init__(self, rows, cols, values, shape: tuple[int, int]):
        n_rows, n_cols = (int(s) for s in shape)
        if n_rows < 0 or n_cols < 0:
            raise DimensionError(f"negative shape {shape}")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == values.shape):
            raise DimensionError("rows, cols and values must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise IndexError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise IndexError("column index out of range")
        if not np.all(np.isfinite(values)):
            raise ValueError("matrix entries must be finite")

        self.n_rows = n_rows
        self.n_cols = n_cols

        row_order = np.lexsort((cols, rows))
        r, c = rows[row_order], cols[row_order]
        dup = (np.diff(r) == 0) & (np.diff(c) == 0)
        if np.any(dup):
            i = int(np.flatnonzero(dup)[0])
            raise ValueError(f"duplicate entry at ({r[i]}, {c[i]})")
        self._row_idx = r
        self._row_cols = c
        self._row_vals = values[row_order]
        self.row_ptr = np.concatenate(([0], np.cumsum(np.bincount(r, minlength=n_rows))))

        col_order = np.lexsort((rows, cols))
        self._col_idx = cols[col_order]
        self._col_rows = rows[col_order]
        self._col_vals = values[col_order]
        self.col_ptr = np.concatenate(([0], np.cumsum(np.bincount(self._col_idx, minlength=n_cols))))

        for arr in (self._row_idx, self._row_cols, self._row_vals, self.row_ptr,
                    self._col_idx, self._col_rows, self._col_vals, self.col_ptr):
            arr.setflags(write=False)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.atleast_2d(np.asarray(dense, dtype=np.float64))
        r, c = np.nonzero(dense)
        return cls(r, c, dense[r, c], dense.shape)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        idx = np.arange(n)
        return cls(idx, idx, np.ones(n), (n, n))

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return int(self._row_vals.size)

    def triplets(self, order: str = "row") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(row, col, value) triples in row-major or column-major order."""
        if order == "row":
            return self._row_idx, self._row_cols, self._row_vals
        if order == "col":
            return self._col_rows, self._col_idx, self._col_vals
        raise ValueError(f"unknown order {order!r}")

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self._row_cols[lo:hi], self._row_vals[lo:hi]

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self._col_rows[lo:hi], self._col_vals[lo:hi]

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self._row_cols, self._row_idx, self._row_vals, (self.n_cols, self.n_rows))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self._row_idx, self._row_cols] = self._row_vals
        return out

    def spmv(self, x) -> np.ndarray:
        return spmv(self, x)

    def spmv_transpose(self, y) -> np.ndarray:
        return spmv_transpose(self, y)

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """Return ``A @ x``, accumulating each row's entries in column order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise DimensionError(f"x has shape {x.shape}, expected ({A.n_cols},)")
    # bincount adds weights sequentially in entry order
    return np.bincount(A._row_idx, weights=A._row_vals * x[A._row_cols], minlength=A.n_rows)


def spmv_transpose(A: SparseMatrix, y) -> np.ndarray:
    """Return ``A.T @ y``, accumulating each column's entries in row order."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.n_rows,):
        raise DimensionError(f"y has shape {y.shape}, expected ({A.n_rows},)")
    return np.bincount(A._col_idx, weights=A._col_vals * y[A._col_rows], minlength=A.n_cols)


def estimate_spectral_norm(A: SparseMatrix, tol: float = DEFAULT_NORM_TOL,
                           max_iters: int = DEFAULT_NORM_MAX_ITERS,
                           seed: int = DEFAULT_NORM_SEED, block: int = 4) -> float:
    """Block power iteration on ``A'A``; returns a lower estimate of ``||A||_2``.

    A few vectors are iterated together and the estimate is the largest Ritz
    value on their span, which never exceeds the true norm and is far less
    prone than a single vector to stalling on a near-tie between the top two
    singular values.  Stops once the estimate has changed by at most
    ``tol / 100`` (relative) on three consecutive iterations.  Returns 0.0 for
    a zero matrix.
    """
    if A.nnz == 0 or not np.any(A._row_vals):
        return 0.0
    p = min(block, A.n_cols)
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((A.n_cols, p)))
    sigma = prev = 0.0
    calm = 0
    for _ in range(max_iters):
        images = np.column_stack([spmv(A, basis[:, j]) for j in range(p)])
        gram = images.T @ images
        sigma = math.sqrt(max(float(np.linalg.eigvalsh(0.5 * (gram + gram.T))[-1]), 0.0))
        calm = calm + 1 if abs(sigma - prev) <= 1e-2 * tol * sigma else 0
        if calm >= 3:
            break
        prev = sigma
        back = np.column_stack([spmv_transpose(A, images[:, j]) for j in range(p)])
        basis, _ = np.linalg.qr(back)
    return sigma


@dataclass(frozen=True, eq=False)
class StandardFormLP:
    """``min c'x  s.t.  Ax = b,  x >= 0``."""

    A: SparseMatrix
    b: np.ndarray
    c: np.ndarray
    name: str = ""
    norm_seed: int = DEFAULT_NORM_SEED

    def __post_init__(self):
        b = np.array(self.b, dtype=np.float64).ravel()
        c = np.array(self.c, dtype=np.float64).ravel()
        if b.shape != (self.A.n_rows,) or c.shape != (self.A.n_cols,):
            raise DimensionError(
                f"A is {self.A.shape} but b has {b.size} and c has {c.size} entries")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("b and c must be finite")
        b.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_dense(cls, A, b, c, name: str = "", norm_seed: int = DEFAULT_NORM_SEED) -> "StandardFormLP":
        return cls(SparseMatrix.from_dense(A), b, c, name, norm_seed)

    @property
    def m(self) -> int:
        return self.A.n_rows

    @property
    def n(self) -> int:
        return self.A.n_cols

    @cached_property
    def b_norm(self) -> float:
        return float(np.linalg.norm(self.b))

    @cached_property
    def c_norm(self) -> float:
        return float(np.linalg.norm(self.c))

    @cached_property
    def spectral_norm(self) -> float:
        """Power-iteration estimate of ``||A||_2`` (a lower bound)."""
        return estimate_spectral_norm(self.A, seed=self.norm_seed)

    def default_step_size(self, tol: float = DEFAULT_NORM_TOL) -> float:
        """``1 / (2 * sigma_hat * (1 + tol))``; 1.0 when ``A`` is zero."""
        sigma = self.spectral_norm
        if sigma == 0.0:
            return 1.0
        return 1.0 / (2.0 * sigma * (1.0 + tol))


class Relation(enum.Enum):
    LE = "L"
    EQ = "E"
    GE = "G"


@dataclass(eq=False)
class GeneralFormLP:
    """LP as read from a file: row relations, ranges, bounds, names.

    ``ranges`` holds the raw MPS range value per row (NaN when absent) so a
    normalized file can be written back unchanged; ``row_bounds`` turns it
    into an interval.
    """

    c: np.ndarray
    A: SparseMatrix
    relations: list[Relation]
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    ranges: np.ndarray | None = None
    maximize: bool = False
    obj_constant: float = 0.0
    name: str = ""
    objective_name: str = "OBJ"
    row_names: list[str] = field(default_factory=list)
    col_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        m, n = self.A.shape
        self.c = np.asarray(self.c, dtype=np.float64).ravel()
        self.rhs = np.asarray(self.rhs, dtype=np.float64).ravel()
        self.lb = np.asarray(self.lb, dtype=np.float64).ravel()
        self.ub = np.asarray(self.ub, dtype=np.float64).ravel()
        self.ranges = (np.full(m, np.nan) if self.ranges is None
                       else np.asarray(self.ranges, dtype=np.float64).ravel())
        self.relations = [Relation(r) if not isinstance(r, Relation) else r for r in self.relations]
        if not self.row_names:
            self.row_names = [f"R{i}" for i in range(m)]
        if not self.col_names:
            self.col_names = [f"C{j}" for j in range(n)]
        if (self.c.size != n or self.lb.size != n or self.ub.size != n
                or self.rhs.size != m or self.ranges.size != m
                or len(self.relations) != m or len(self.row_names) != m
                or len(self.col_names) != n):
            raise DimensionError("GeneralFormLP fields have inconsistent sizes")
        bad = np.flatnonzero(self.lb > self.ub)
        if bad.size:
            j = int(bad[0])
            raise ValueError(
                f"variable {self.col_names[j]!r} has lower bound {self.lb[j]} > upper bound {self.ub[j]}")

    @property
    def n_rows(self) -> int:
        return self.A.n_rows

    @property
    def n_cols(self) -> int:
        return self.A.n_cols

    def row_bounds(self, i: int) -> tuple[float, float]:
        """Interval ``[lo, hi]`` for row activity, ranges applied."""
        rel, rhs, r = self.relations[i], self.rhs[i], self.ranges[i]
        if np.isnan(r):
            if rel is Relation.LE:
                return -math.inf, rhs
            if rel is Relation.GE:
                return rhs, math.inf
            return rhs, rhs
        if rel is Relation.LE:
            return rhs - abs(r), rhs
        if rel is Relation.GE:
            return rhs, rhs + abs(r)
        return (rhs, rhs + r) if r >= 0 else (rhs + r, rhs)

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=np.float64)) + self.obj_constant

    def identical(self, other: "GeneralFormLP") -> bool:
        """Exact equality of every field, names included (NaN ranges compare equal)."""
        if self.A.shape != other.A.shape:
            return False
        mine, theirs = self.A.triplets("row"), other.A.triplets("row")
        return (all(np.array_equal(u, v) for u, v in zip(mine, theirs))
                and np.array_equal(self.c, other.c)
                and np.array_equal(self.rhs, other.rhs)
                and np.array_equal(self.lb, other.lb)
                and np.array_equal(self.ub, other.ub)
                and np.array_equal(self.ranges, other.ranges, equal_nan=True)
                and self.relations == other.relations
                and self.maximize == other.maximize
                and self.obj_constant == other.obj_constant
                and self.name == other.name
                and self.objective_name == other.objective_name
                and self.row_names == other.row_names
                and self.col_names == other.col_names)

    def max_violation(self, x) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=np.float64)
        viol = max(0.0, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        act = spmv(self.A, x)
        for i in range(self.n_rows):
            lo, hi = self.row_bounds(i)
            viol = max(viol, lo - act[i], act[i] - hi)
        return viol


@dataclass(frozen=True, eq=False)
class VariableMap:
    """Affine map from standard-form variables back to the original ones.

    ``x_orig = offset + sum_k sign[k] * x_std[col[k]]`` over the standard
    columns assigned to each original variable.
    """

    n_original: int
    n_standard: int
    offset: np.ndarray
    # (original index, standard column, sign) for every structural column
    links: tuple[tuple[int, int, float], ...]
    # standard row -> slack column whose value that row determines (-1: none)
    row_slack: tuple[int, ...]
    slack_coef: tuple[float, ...]
    obj_sign: float
    obj_constant: float

    def recover(self, x_std) -> np.ndarray:
        x_std = np.asarray(x_std, dtype=np.float64)
        x = self.offset.copy()
        for j, col, sign in self.links:
            x[j] += sign * x_std[col]
        return x

    def recover_ray(self, u_std) -> np.ndarray:
        """Map a standard-form direction (no offset) to original variables."""
        u_std = np.asarray(u_std, dtype=np.float64)
        u = np.zeros(self.n_original)
        for j, col, sign in self.links:
            u[j] += sign * u_std[col]
        return u

    def objective(self, std_objective: float) -> float:
        """Original objective value from the standard-form objective ``c_std'x_std``."""
        return self.obj_sign * std_objective + self.obj_constant

    def lift(self, x, std: StandardFormLP) -> np.ndarray:
        """Standard-form point for an original point ``x`` (slacks filled in)."""
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(self.n_standard)
        parts: dict[int, list[tuple[int, float]]] = {}
        for j, col, sign in self.links:
            parts.setdefault(j, []).append((col, sign))
        for j, cols in parts.items():
            shifted = x[j] - self.offset[j]
            if len(cols) == 1:
                col, sign = cols[0]
                out[col] = sign * shifted
            else:
                # free split: x = x_plus - x_minus
                (cp, _), (cm, _) = cols
                out[cp] = max(shifted, 0.0)
                out[cm] = max(-shifted, 0.0)
        for i, col in enumerate(self.row_slack):
            if col < 0:
                continue
            cols, vals = std.A.row(i)
            mask = cols != col
            act = float(vals[mask] @ out[cols[mask]])
            out[col] = (std.b[i] - act) / self.slack_coef[i]
        return out


def to_standard_form(g: GeneralFormLP) -> tuple[StandardFormLP, VariableMap]:
    """Reduce ``g`` to ``min c'x, Ax = b, x >= 0`` plus a recovery map.

    Finite lower bounds are shifted into ``b``; variables with only an upper
    bound are reflected; free variables are split into two nonnegative parts.
    Inequality rows get a slack column, ranged rows a slack whose upper bound
    becomes an extra row, and finite upper bounds on variables become
    explicit rows ``x' + s = u - l``.
    """
    m, n = g.A.shape
    bad = np.flatnonzero(g.lb > g.ub)
    if bad.size:
        raise ValueError(f"inconsistent bounds on variable {g.col_names[int(bad[0])]!r}")
    obj_sign = -1.0 if g.maximize else 1.0

    offset = np.zeros(n)
    links: list[tuple[int, int, float]] = []
    c_std: list[float] = []
    # original column j -> list of (std col, sign)
    col_parts: list[list[tuple[int, float]]] = []
    ub_rows: list[tuple[int, float]] = []  # (std col, width)

    def new_col(cost: float) -> int:
        c_std.append(cost)
        return len(c_std) - 1

    for j in range(n):
        lo, hi = g.lb[j], g.ub[j]
        cj = obj_sign * g.c[j]
        if np.isfinite(lo):
            offset[j] = lo
            k = new_col(cj)
            parts = [(k, 1.0)]
            if np.isfinite(hi):
                ub_rows.append((k, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            k = new_col(-cj)
            parts = [(k, -1.0)]
        else:
            kp = new_col(cj)
            km = new_col(-cj)
            parts = [(kp, 1.0), (km, -1.0)]
        col_parts.append(parts)
        links.extend((j, k, s) for k, s in parts)

    rows_out: list[int] = []
    cols_out: list[int] = []
    vals_out: list[float] = []
    b_std: list[float] = []
    row_slack: list[int] = []
    slack_coef: list[float] = []

    act_offset = spmv(g.A, offset)
    _, c_idx, v_idx = g.A.triplets("row")
    range_rows: list[tuple[int, float]] = []
    for i in range(m):
        row_id = len(b_std)
        lo_i, hi_i = g.row_bounds(i)
        for k in range(g.A.row_ptr[i], g.A.row_ptr[i + 1]):
            j = int(c_idx[k])
            for col, sign in col_parts[j]:
                rows_out.append(row_id)
                cols_out.append(col)
                vals_out.append(sign * v_idx[k])
        if lo_i == hi_i:
            b_std.append(lo_i - act_offset[i])
            row_slack.append(-1)
            slack_coef.append(0.0)
        elif math.isinf(lo_i):
            s = new_col(0.0)
            rows_out.append(row_id); cols_out.append(s); vals_out.append(1.0)
            b_std.append(hi_i - act_offset[i])
            row_slack.append(s)
            slack_coef.append(1.0)
        else:
            s = new_col(0.0)
            rows_out.append(row_id); cols_out.append(s); vals_out.append(-1.0)
            b_std.append(lo_i - act_offset[i])
            row_slack.append(s)
            slack_coef.append(-1.0)
            if not math.isinf(hi_i):
                range_rows.append((s, hi_i - lo_i))

    for col, width in ub_rows + range_rows:
        row_id = len(b_std)
        s = new_col(0.0)
        rows_out += [row_id, row_id]
        cols_out += [col, s]
        vals_out += [1.0, 1.0]
        b_std.append(width)
        row_slack.append(s)
        slack_coef.append(1.0)

    n_std = len(c_std)
    A_std = SparseMatrix(rows_out, cols_out, vals_out, (len(b_std), n_std))
    std = StandardFormLP(A_std, np.array(b_std), np.array(c_std), g.name)
    vmap = VariableMap(
        n_original=n,
        n_standard=n_std,
        offset=offset,
        links=tuple(links),
        row_slack=tuple(row_slack),
        slack_coef=tuple(slack_coef),
        obj_sign=obj_sign,
        obj_constant=float(g.c @ offset) + g.obj_constant,
    )
    return std, vmap


def general_from_standard(lp: StandardFormLP) -> GeneralFormLP:
    """Wrap a standard-form LP as a general-form one (equality rows, x >= 0)."""
    return GeneralFormLP(
        c=lp.c, A=lp.A, relations=[Relation.EQ] * lp.m, rhs=lp.b,
        lb=np.zeros(lp.n), ub=np.full(lp.n, np.inf), name=lp.name,
    )
