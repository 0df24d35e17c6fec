"""MPS reading and writing, JSON solution reports and CSV traces."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .diagnostics import TraceRecord
from .lp_model import GeneralFormLP, Relation, SparseMatrix

SECTIONS = ("NAME", "OBJSENSE", "OBJSENCE", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")
BOUND_TYPES = ("UP", "LO", "FX", "FR", "MI", "PL", "BV", "LI", "UI")
_VALUED_BOUNDS = ("UP", "LO", "FX", "LI", "UI")

# fixed-format field columns (0-based, end exclusive)
_FIXED_FIELDS = ((1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61))


class MpsParseError(ValueError):
    """Parse failure with the 1-based source line and a short error kind."""

    def __init__(self, message: str, line: int, kind: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.kind = kind


def _number(tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsParseError(f"malformed number {tok!r}", line, "malformed number") from None


def _fixed_fields(raw: str) -> list[str]:
    out = []
    for lo, hi in _FIXED_FIELDS:
        piece = raw[lo:hi].strip()
        if lo < len(raw):
            out.append(piece)
    while out and not out[-1]:
        out.pop()
    return out


def parse_mps(text: str, *, fixed: bool = False, multiple_objectives: str = "first") -> GeneralFormLP:
    """Parse free-format (default) or fixed-format MPS text.

    Integer markers and BV bounds are relaxed to continuous variables.  With
    several N rows the first is the objective and the rest are dropped with a
    warning, unless ``multiple_objectives="error"``.
    """
    if multiple_objectives not in ("first", "error"):
        raise ValueError("multiple_objectives must be 'first' or 'error'")
    name = ""
    maximize = False
    objective = None
    dropped_objectives: set[str] = set()
    row_index: dict[str, int] = {}
    row_names: list[str] = []
    relations: list[Relation] = []
    col_index: dict[str, int] = {}
    col_names: list[str] = []
    entries: dict[tuple[int, int], float] = {}
    cost: dict[int, float] = {}
    rhs: dict[int, float] = {}
    ranges: dict[int, float] = {}
    obj_constant = 0.0
    bounds: list[tuple[str, int, float, int]] = []
    section = None
    expect_sense = False
    lineno = 0

    def row_of(tok: str, line: int, allow_objective: bool = True) -> int | None:
        if tok == objective and allow_objective:
            return -1
        if tok in dropped_objectives:
            return None
        if tok not in row_index:
            raise MpsParseError(f"undeclared row {tok!r}", line, "undeclared row")
        return row_index[tok]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        if not raw[0].isspace():
            head, _, rest = stripped.partition(" ")
            head = head.upper()
            if head not in SECTIONS:
                raise MpsParseError(f"unknown section {head!r}", lineno, "unknown section")
            section = head
            rest = rest.strip()
            if head == "NAME":
                name = rest
            elif head in ("OBJSENSE", "OBJSENCE"):
                expect_sense = not rest
                if rest:
                    maximize = _sense(rest, lineno)
            elif head == "ENDATA":
                break
            continue

        if fixed:
            fields = _fixed_fields(raw)
            if section in ("COLUMNS", "RHS", "RANGES") and fields:
                fields = fields[1:]
                if section != "COLUMNS" and fields and not fields[0]:
                    fields = fields[1:]
        else:
            fields = stripped.split()
        if section in ("OBJSENSE", "OBJSENCE"):
            if not expect_sense:
                raise MpsParseError("extra OBJSENSE data", lineno, "malformed line")
            maximize = _sense(stripped, lineno)
            expect_sense = False
        elif section == "ROWS":
            if len(fields) != 2:
                raise MpsParseError("ROWS line needs a type and a name", lineno, "malformed line")
            kind, rname = fields[0].upper(), fields[1]
            if kind == "N":
                if objective is None:
                    objective = rname
                elif multiple_objectives == "error":
                    raise MpsParseError(f"second objective row {rname!r}", lineno, "multiple objectives")
                else:
                    warnings.warn(f"MPS line {lineno}: extra N row {rname!r} dropped", stacklevel=2)
                    dropped_objectives.add(rname)
            elif kind in ("L", "G", "E"):
                if rname in row_index or rname == objective:
                    raise MpsParseError(f"row {rname!r} declared twice", lineno, "duplicate row")
                row_index[rname] = len(row_names)
                row_names.append(rname)
                relations.append(Relation(kind))
            else:
                raise MpsParseError(f"unknown row type {kind!r}", lineno, "unknown row type")
        elif section == "COLUMNS":
            if len(fields) >= 2 and fields[1].strip("'\"").upper() == "MARKER":
                continue  # integrality markers: relaxed
            if len(fields) not in (3, 5):
                raise MpsParseError("COLUMNS line needs column and 1 or 2 (row, value) pairs",
                                    lineno, "malformed line")
            cname = fields[0]
            if cname not in col_index:
                col_index[cname] = len(col_names)
                col_names.append(cname)
            j = col_index[cname]
            for rtok, vtok in zip(fields[1::2], fields[2::2]):
                i = row_of(rtok, lineno)
                val = _number(vtok, lineno)
                if i is None:
                    continue
                if (i, j) in entries or (i == -1 and j in cost):
                    raise MpsParseError(f"duplicate entry for column {cname!r}, row {rtok!r}",
                                        lineno, "duplicate entry")
                if i == -1:
                    cost[j] = val
                else:
                    entries[(i, j)] = val
        elif section in ("RHS", "RANGES"):
            pairs = fields[1:] if len(fields) % 2 == 1 else fields
            if not pairs or len(pairs) > 4:
                raise MpsParseError(f"malformed {section} line", lineno, "malformed line")
            for rtok, vtok in zip(pairs[0::2], pairs[1::2]):
                i = row_of(rtok, lineno)
                val = _number(vtok, lineno)
                if i is None:
                    continue
                if section == "RHS":
                    if i == -1:
                        obj_constant = -val
                    else:
                        rhs[i] = val
                elif i == -1:
                    raise MpsParseError("range on the objective row", lineno, "malformed line")
                else:
                    ranges[i] = val
        elif section == "BOUNDS":
            btype = fields[0].upper() if fields else ""
            if btype not in BOUND_TYPES:
                raise MpsParseError(f"unknown bound type {btype!r}", lineno, "unknown bound type")
            wants_value = btype in _VALUED_BOUNDS
            rest = fields[1:]
            # the bound-set name is optional in free format
            if wants_value:
                if len(rest) == 3:
                    rest = rest[1:]
                if len(rest) != 2:
                    raise MpsParseError(f"{btype} bound needs a column and a value", lineno, "malformed line")
            elif len(rest) == 2 and not (btype == "BV" and rest[0] in col_index
                                         and rest[1] not in col_index):
                rest = rest[1:]
            elif len(rest) == 3:
                rest = rest[1:]
            if not rest:
                raise MpsParseError("bound without a column", lineno, "malformed line")
            cname = rest[0]
            if cname not in col_index:
                raise MpsParseError(f"undeclared column {cname!r}", lineno, "undeclared column")
            if len(rest) > 2:
                raise MpsParseError("too many fields in BOUNDS line", lineno, "malformed line")
            val = _number(rest[1], lineno) if len(rest) > 1 else math.nan
            bounds.append((btype, col_index[cname], val, lineno))
        elif section in ("NAME",):
            raise MpsParseError("unexpected data after NAME", lineno, "malformed line")
        else:
            raise MpsParseError("data line outside any section", lineno, "malformed line")

    if objective is None:
        raise MpsParseError("no objective (N) row", lineno, "missing objective")

    m, n = len(row_names), len(col_names)
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    lb = np.zeros(n)
    ub = np.full(n, math.inf)
    for btype, j, val, lineno in bounds:
        if btype == "UP":
            ub[j] = val
            if val < 0 and lb[j] == 0:
                warnings.warn(f"MPS line {lineno}: negative UP bound with zero lower bound; "
                              "lower bound set to -inf", stacklevel=2)
                lb[j] = -math.inf
        elif btype in ("LO", "LI"):
            lb[j] = val
        elif btype == "UI":
            ub[j] = val
        elif btype == "FX":
            lb[j] = ub[j] = val
        elif btype == "FR":
            lb[j], ub[j] = -math.inf, math.inf
        elif btype == "MI":
            lb[j] = -math.inf
        elif btype == "PL":
            ub[j] = math.inf
        elif btype == "BV":
            lb[j], ub[j] = 0.0, 1.0
    bad = np.flatnonzero(lb > ub)
    if bad.size:
        j = int(bad[0])
        line = max(ln for _, jj, _, ln in bounds if jj == j)
        raise MpsParseError(f"column {col_names[j]!r} has lower bound > upper bound", line,
                            "inconsistent bounds")

    kept = [(i, j, v) for (i, j), v in entries.items() if v != 0.0]
    A = SparseMatrix([t[0] for t in kept], [t[1] for t in kept], [t[2] for t in kept], (m, n))
    rhs_vec = np.zeros(m)
    for i, v in rhs.items():
        rhs_vec[i] = v
    rng = np.full(m, np.nan)
    for i, v in ranges.items():
        rng[i] = v
    return GeneralFormLP(
        c=c, A=A, relations=relations, rhs=rhs_vec, lb=lb, ub=ub, ranges=rng,
        maximize=maximize, obj_constant=obj_constant, name=name, objective_name=objective,
        row_names=row_names, col_names=col_names,
    )


def _sense(tok: str, line: int) -> bool:
    word = tok.strip().upper()
    if word in ("MAX", "MAXIMIZE"):
        return True
    if word in ("MIN", "MINIMIZE"):
        return False
    raise MpsParseError(f"unknown objective sense {tok.strip()!r}", line, "malformed line")


def read_mps(path, **kwargs) -> GeneralFormLP:
    with open(path, encoding="utf-8") as fh:
        return parse_mps(fh.read(), **kwargs)


def _fixed_line(*fields: str) -> str:
    """Place up to six fields at the fixed-format column positions."""
    widths = [hi - lo for lo, hi in _FIXED_FIELDS]
    line = [" "] * _FIXED_FIELDS[len(fields) - 1][1]
    for (lo, _), width, text in zip(_FIXED_FIELDS, widths, fields):
        if len(text) > width:
            raise ValueError(f"{text!r} does not fit a {width}-character fixed-format field")
        line[lo:lo + len(text)] = text
    return "".join(line).rstrip()


def write_mps(g: GeneralFormLP, *, fixed: bool = False) -> str:
    """Normalized MPS text; reparsing (with the same ``fixed``) gives back an
    identical problem.

    Numbers are written with ``repr`` so they round-trip exactly.  Free format
    cannot hold names with spaces; fixed format cannot hold names longer than
    8 characters or numbers longer than 12.
    """
    names = [g.objective_name, *g.row_names, *g.col_names]
    if not fixed and any(len(t.split()) != 1 for t in names):
        raise ValueError("names with whitespace need fixed=True")

    def data(*fields: str) -> str:
        return _fixed_line(*fields) if fixed else "    " + "  ".join(t for t in fields if t)

    out = [f"NAME          {g.name}".rstrip() if fixed else f"NAME {g.name}".rstrip()]
    if g.maximize:
        out += ["OBJSENSE", "    MAX"]
    out.append("ROWS")
    out.append(data("N", g.objective_name))
    out += [data(rel.value, rname) for rel, rname in zip(g.relations, g.row_names)]
    out.append("COLUMNS")
    for j, cname in enumerate(g.col_names):
        rows, vals = g.A.column(j)
        if g.c[j] != 0.0 or rows.size == 0:
            out.append(data("", cname, g.objective_name, repr(float(g.c[j]))))
        out += [data("", cname, g.row_names[i], repr(float(v))) for i, v in zip(rows, vals)]
    out.append("RHS")
    if g.obj_constant != 0.0:
        out.append(data("", "RHS", g.objective_name, repr(float(-g.obj_constant))))
    out += [data("", "RHS", g.row_names[i], repr(float(v))) for i, v in enumerate(g.rhs) if v != 0.0]
    if np.any(~np.isnan(g.ranges)):
        out.append("RANGES")
        out += [data("", "RNG", g.row_names[i], repr(float(v)))
                for i, v in enumerate(g.ranges) if not np.isnan(v)]
    bound_lines = []
    for j, cname in enumerate(g.col_names):
        lo, hi = float(g.lb[j]), float(g.ub[j])
        if lo == hi:
            bound_lines.append(data("FX", "BND", cname, repr(lo)))
            continue
        if lo == -math.inf and hi == math.inf:
            bound_lines.append(data("FR", "BND", cname))
            continue
        if lo == -math.inf:
            bound_lines.append(data("MI", "BND", cname))
        elif lo != 0.0:
            bound_lines.append(data("LO", "BND", cname, repr(lo)))
        if hi != math.inf:
            bound_lines.append(data("UP", "BND", cname, repr(hi)))
    if bound_lines:
        out.append("BOUNDS")
        out += bound_lines
    out.append("ENDATA")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- reports

REPORT_SCHEMA_VERSION = 1


@dataclass
class SolutionReport:
    """Serializable summary of one solve.

    ``timing`` holds every wall-clock field so that comparisons of two runs
    can drop it.  For optimal and limit statuses ``solution`` is set; for
    infeasible statuses ``certificate`` is set.
    """

    status: str
    instance: str = ""
    scheme: str = "halpern"
    primal_objective: float = math.nan
    dual_objective: float = math.nan
    kkt: dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    epochs: int = 0
    spmv_count: int = 0
    step_size: float = math.nan
    solution: dict[str, Any] | None = None
    certificate: dict[str, Any] | None = None
    config: dict[str, Any] = field(default_factory=dict)
    timing: dict[str, float] = field(default_factory=dict)

    STATUSES = ("optimal", "primal_infeasible", "dual_infeasible", "primal_dual_infeasible",
                "iteration_limit", "time_limit")

    def __post_init__(self):
        if self.status not in self.STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        infeasible = "infeasible" in self.status
        if infeasible and (self.certificate is None or self.solution is not None):
            raise ValueError("infeasible reports carry a certificate and no solution")
        if not infeasible and (self.solution is None or self.certificate is not None):
            raise ValueError("optimal and limit reports carry a solution and no certificate")

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "status": self.status,
            "instance": self.instance,
            "scheme": self.scheme,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "kkt": self.kkt,
            "iterations": self.iterations,
            "epochs": self.epochs,
            "spmv_count": self.spmv_count,
            "step_size": self.step_size,
            "solution": self.solution,
            "certificate": self.certificate,
            "config": self.config,
            "timing": self.timing,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SolutionReport":
        d = dict(d)
        d.pop("schema_version", None)
        return cls(**d)


def _vector(v, threshold: int | None) -> dict[str, Any]:
    v = [float(t) for t in np.asarray(v, dtype=np.float64)]
    if threshold is not None and len(v) > threshold:
        return {"length": len(v), "elided": True, "values": None}
    return {"length": len(v), "elided": False, "values": v}


def _certificate_block(cert, threshold: int | None) -> dict[str, Any]:
    rep = cert.report
    if cert.kind == "primal":
        residual, margin = rep.primal_cert_residual, rep.primal_cert_margin
    else:
        residual, margin = rep.dual_cert_residual, rep.dual_cert_margin
    return {
        "type": cert.kind,
        "orientation": rep.orientation.value,
        "residual": residual,
        "margin": margin,
        "tolerance": rep.tol,
        "source": cert.source.value if cert.source is not None else None,
        "iteration": cert.iteration,
        "vector": _vector(cert.vector, threshold),
    }


def report_from_result(result, lp, *, instance: str = "", vmap=None, config: dict | None = None,
                       elide_threshold: int | None = None) -> SolutionReport:
    """Build a report from a ``SolveResult``.

    Objectives are mapped back to the original problem when ``vmap`` is
    given; solution and certificate vectors stay in standard-form space.
    """
    z = result.iterate
    pobj = float(lp.c @ z.x)
    dobj = -float(lp.b @ z.y)
    if vmap is not None:
        pobj, dobj = vmap.objective(pobj), vmap.objective(dobj)
    solution = certificate = None
    if result.status.is_infeasible:
        blocks = [_certificate_block(c, elide_threshold) for c in result.certificates]
        certificate = blocks[0] if len(blocks) == 1 else {"type": "primal_dual", "parts": blocks}
    else:
        solution = {"x": _vector(z.x, elide_threshold), "y": _vector(z.y, elide_threshold)}
        if vmap is not None:
            solution["x_original"] = _vector(vmap.recover(z.x), elide_threshold)
    return SolutionReport(
        status=result.status.value, instance=instance, scheme=result.scheme,
        primal_objective=pobj, dual_objective=dobj,
        kkt={"primal": result.kkt.primal_residual, "dual": result.kkt.dual_residual,
             "gap": result.kkt.gap_residual, "max": result.kkt.max_relative},
        iterations=result.iterations, epochs=len(result.epochs), spmv_count=result.spmv_count,
        step_size=result.eta, solution=solution, certificate=certificate,
        config=dict(config or {}), timing={"wall_time": result.wall_time},
    )


def _emit(value, out: list[str], indent: int) -> None:
    pad = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for idx, (key, item) in enumerate(value.items()):
            out.append(f"{pad}{json.dumps(str(key))}: ")
            _emit(item, out, indent + 1)
            out.append(",\n" if idx < len(value) - 1 else "\n")
        out.append("  " * indent + "}")
    elif isinstance(value, (list, tuple)):
        if all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in value):
            parts: list[str] = []
            for t in value:
                _emit(t, parts, 0)
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for idx, item in enumerate(value):
            out.append(pad)
            _emit(item, out, indent + 1)
            out.append(",\n" if idx < len(value) - 1 else "\n")
        out.append("  " * indent + "]")
    elif value is None or isinstance(value, (bool, str)):
        out.append(json.dumps(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            out.append("NaN")
        elif math.isinf(v):
            out.append("Infinity" if v > 0 else "-Infinity")
        else:
            out.append(format(v, ".16e"))  # 17 significant digits
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def to_json(value) -> str:
    out: list[str] = []
    _emit(value, out, 0)
    return "".join(out) + "\n"


def write_solution_json(report: SolutionReport) -> str:
    """Deterministic JSON: fixed key order, floats with 17 significant digits,
    non-finite values as ``Infinity``/``NaN``."""
    return to_json(report.to_dict())


def read_solution_json(text: str) -> SolutionReport:
    return SolutionReport.from_dict(json.loads(text))


TRACE_HEADER = ("epoch", "inner", "iteration", "fixed_point_residual", "kkt_primal", "kkt_dual",
                "kkt_gap", "kkt_max", "n_N", "n_B1", "n_B2", "cert_normalized_norm",
                "cert_difference_norm", "wall_time")


def write_trace_csv(trace: Iterable[TraceRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for rec in trace:
        n_n, n_b1, n_b2 = rec.partition_sizes
        writer.writerow([
            rec.epoch, rec.inner, rec.iteration, repr(rec.fixed_point_residual),
            repr(rec.kkt_primal), repr(rec.kkt_dual), repr(rec.kkt_gap), repr(rec.kkt_max),
            n_n, n_b1, n_b2, repr(rec.cert_normalized_norm), repr(rec.cert_difference_norm),
            repr(rec.wall_time),
        ])
    return buf.getvalue()
