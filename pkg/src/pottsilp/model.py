"""Solver-independent MILP models (minimization only) and CPLEX LP text I/O."""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"

LE, GE, EQ = "<=", ">=", "="
_SENSES = (LE, GE, EQ)

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")
_model_ids = itertools.count()


@dataclass(frozen=True)
class VarRef:
    model_id: int
    index: int


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass(frozen=True)
class LinearConstraint:
    """``sum(coef * var) sense rhs`` with terms as ``(column index, coef)``."""

    terms: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    name: str = ""

    def activity(self, values: np.ndarray) -> float:
        return float(sum(c * values[j] for j, c in self.terms))

    def violation(self, values: np.ndarray) -> float:
        act = self.activity(values)
        if self.sense == LE:
            return max(0.0, act - self.rhs)
        if self.sense == GE:
            return max(0.0, self.rhs - act)
        return abs(act - self.rhs)


class ModelError(ValueError):
    pass


class MilpModel:
    """Variables, linear constraints and a linear objective to be minimized.

    Builders register named groups of variables (``model.groups["w"]``) so
    that callers can map solver values back onto pixels or edges.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self._id = next(_model_ids)
        self.variables: list[Variable] = []
        self.constraints: list[LinearConstraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self.groups: dict[str, list[VarRef]] = {}
        self.comments: list[str] = []
        self._names: dict[str, int] = {}
        self._frozen = False

    # construction

    def _check_mutable(self):
        if self._frozen:
            raise ModelError("model is frozen")

    def _index(self, ref: VarRef) -> int:
        if not isinstance(ref, VarRef) or ref.model_id != self._id or not 0 <= ref.index < len(self.variables):
            raise ModelError(f"{ref!r} does not belong to model {self.name!r}")
        return ref.index

    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf,
                obj: float = 0.0) -> VarRef:
        self._check_mutable()
        if not _NAME_RE.match(name):
            raise ModelError(f"invalid variable name {name!r}")
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        elif kind != CONTINUOUS:
            raise ModelError(f"unknown variable kind {kind!r}")
        if lb > ub:
            raise ModelError(f"empty bounds [{lb}, {ub}] for {name!r}")
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        self._names[name] = idx
        ref = VarRef(self._id, idx)
        if obj:
            self.add_objective([(ref, obj)])
        return ref

    def add_constraint(self, terms: Iterable[tuple[VarRef, float]], sense: str, rhs: float,
                       name: str = "") -> int:
        self._check_mutable()
        if sense not in _SENSES:
            raise ModelError(f"unknown constraint sense {sense!r}")
        self.constraints.append(LinearConstraint(self._collect(terms), sense, float(rhs), name))
        return len(self.constraints) - 1

    def add_objective(self, terms: Iterable[tuple[VarRef, float]]) -> None:
        self._check_mutable()
        for j, c in self._collect(terms):
            self.objective[j] = self.objective.get(j, 0.0) + c

    def add_group(self, name: str, refs: Sequence[VarRef]) -> None:
        self.groups[name] = list(refs)

    def _collect(self, terms) -> tuple[tuple[int, float], ...]:
        acc: dict[int, float] = {}
        for ref, coef in terms:
            j = self._index(ref)
            acc[j] = acc.get(j, 0.0) + float(coef)
        return tuple(sorted((j, c) for j, c in acc.items() if c != 0.0))

    def freeze(self) -> "MilpModel":
        self._frozen = True
        return self

    # queries

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def var(self, ref: VarRef) -> Variable:
        return self.variables[self._index(ref)]

    def ref(self, name: str) -> VarRef:
        return VarRef(self._id, self._names[name])

    def owns(self, ref: VarRef) -> bool:
        return isinstance(ref, VarRef) and ref.model_id == self._id

    def binary_indices(self) -> np.ndarray:
        return np.array([j for j, v in enumerate(self.variables) if v.kind == BINARY], dtype=np.intp)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, coef in self.objective.items():
            c[j] = coef
        return c

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def evaluate(self, values) -> float:
        values = np.asarray(values, dtype=float)
        return float(self.objective_vector() @ values) + self.objective_constant

    def max_violation(self, values, extra: Iterable[LinearConstraint] = ()) -> float:
        """Largest violation of bounds, integrality or constraints at ``values``."""
        values = np.asarray(values, dtype=float)
        lb, ub = self.bounds()
        worst = float(max(0.0, np.max(lb - values, initial=0.0), np.max(values - ub, initial=0.0)))
        b = self.binary_indices()
        if b.size:
            worst = max(worst, float(np.max(np.abs(values[b] - np.rint(values[b])))))
        for con in itertools.chain(self.constraints, extra):
            worst = max(worst, con.violation(values))
        return worst

    def values_of(self, values, group: str) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return values[[r.index for r in self.groups[group]]]


def add_abs_deviation(model: MilpModel, w: VarRef, y: float) -> tuple[VarRef, VarRef]:
    """Linearize ``|w - y|`` in the objective with two nonnegative parts."""
    var = model.var(w)
    if var.kind != CONTINUOUS:
        raise ModelError(f"{var.name} must be continuous")
    ep = model.add_var(f"{var.name}_ep", lb=0.0)
    em = model.add_var(f"{var.name}_em", lb=0.0)
    model.add_constraint([(w, 1.0), (ep, -1.0), (em, 1.0)], EQ, y, name=f"dev_{var.name}")
    model.add_objective([(ep, 1.0), (em, 1.0)])
    return ep, em


def add_big_m_pair(model: MilpModel, wa: VarRef, wb: VarRef, x: VarRef, big_m: float) -> tuple[int, int]:
    """``|wb - wa| <= big_m * x`` as two linear rows; returns their indices."""
    if not big_m > 0:
        raise ModelError(f"big-M constant must be positive, got {big_m}")
    xv = model.var(x)
    if xv.kind != BINARY:
        raise ModelError(f"{xv.name} must be binary")
    first = model.add_constraint([(wb, 1.0), (wa, -1.0), (x, -big_m)], LE, 0.0, name=f"bm_{xv.name}_a")
    second = model.add_constraint([(wa, 1.0), (wb, -1.0), (x, -big_m)], LE, 0.0, name=f"bm_{xv.name}_b")
    return first, second


# CPLEX LP format

def _num(v: float) -> str:
    return f"{v:.12g}"


def _expr_lines(terms: Sequence[tuple[str, float]], head: str, width: int = 200) -> list[str]:
    lines = []
    line = head
    for k, (name, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        if k == 0:
            tok = f"{'-' if coef < 0 else ''}{_num(abs(coef))} {name}"
        else:
            tok = f"{sign} {_num(abs(coef))} {name}"
        if len(line) + len(tok) + 1 > width and line.strip():
            lines.append(line)
            line = "   "
        line += " " + tok
    lines.append(line)
    return lines


def write_lp_file(model: MilpModel) -> str:
    """Render ``model`` as CPLEX LP text. Output is deterministic."""
    if not model.variables:
        raise ModelError("cannot export an empty model")
    names = [v.name for v in model.variables]
    out = [f"\\ Problem: {model.name}"]
    out += [f"\\ {c}" for c in model.comments]
    out.append("Minimize")
    obj = [(names[j], model.objective[j]) for j in sorted(model.objective) if model.objective[j] != 0.0]
    if not obj:
        obj = [(names[0], 0.0)]
    out += _expr_lines(obj, " obj:")
    out.append("Subject To")
    for k, con in enumerate(model.constraints):
        label = con.name or f"c{k}"
        terms = [(names[j], c) for j, c in con.terms]
        if not terms:
            terms = [(names[0], 0.0)]
        lines = _expr_lines(terms, f" {label}_{k}:")
        lines[-1] += f" {con.sense} {_num(con.rhs)}"
        out += lines
    out.append("Bounds")
    for v in model.variables:
        if v.lb == -math.inf and v.ub == math.inf:
            out.append(f" {v.name} free")
        elif v.ub == math.inf:
            out.append(f" {v.name} >= {_num(v.lb)}")
        elif v.lb == -math.inf:
            out.append(f" -inf <= {v.name} <= {_num(v.ub)}")
        else:
            out.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        out.append("Binaries")
        out += [f" {nm}" for nm in binaries]
    out.append("End")
    return "\n".join(out) + "\n"


_SECTION_RE = re.compile(
    r"^(minimize|minimum|min|maximize|maximum|max|subject\s+to|such\s+that|st|s\.t\.|bounds?|"
    r"binaries|binary|bin|generals?|gen|end)$",
    re.IGNORECASE,
)
_TOKEN_RE = re.compile(r"\s*([<>=]=?|[+-]|[A-Za-z_][A-Za-z0-9_.\[\]]*|[0-9.]+(?:[eE][+-]?[0-9]+)?)")


def _tokens(text: str) -> list[str]:
    toks, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ModelError(f"cannot parse LP fragment {text[pos:]!r}")
        toks.append(m.group(1))
        pos = m.end()
    return toks


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return tok.lower() not in ("inf", "infinity", "nan")


def _parse_expr(toks: list[str]) -> list[tuple[str, float]]:
    terms, sign, coef = [], 1.0, None
    for tok in toks:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
        elif _is_number(tok):
            coef = float(tok)
        else:
            terms.append((tok, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
    return terms


def read_lp_file(text: str) -> MilpModel:
    """Parse the subset of CPLEX LP format produced by :func:`write_lp_file`.

    Kept independent of the writer so that a write/read round trip is a real
    check.  Supports Minimize, Subject To, Bounds, Binaries/Generals-free
    models with ``\\`` comments.
    """
    section = None
    chunks: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": []}
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if _SECTION_RE.match(key):
            if key.startswith("max"):
                raise ModelError("maximization is not supported")
            if key.startswith("gen"):
                raise ModelError("general integer variables are not supported")
            section = {"minimize": "obj", "minimum": "obj", "min": "obj", "bounds": "bounds",
                       "bound": "bounds", "binaries": "bin", "binary": "bin", "bin": "bin",
                       "end": None}.get(key, "st")
            continue
        if section is None:
            raise ModelError(f"content outside a section: {raw!r}")
        chunks[section].append(line)

    # objective and constraints may continue on following lines
    def statements(lines: list[str]) -> list[str]:
        stmts: list[str] = []
        for line in lines:
            starts_new = re.match(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*\s*:", line)
            if starts_new or not stmts:
                stmts.append(line)
            else:
                stmts[-1] += " " + line
        return stmts

    order: list[str] = []
    seen: set[str] = set()

    def note(name: str):
        if name not in seen:
            seen.add(name)
            order.append(name)

    obj_terms: list[tuple[str, float]] = []
    for stmt in statements(chunks["obj"]):
        body = stmt.split(":", 1)[1] if re.match(r"^\w+\s*:", stmt) else stmt
        obj_terms += _parse_expr(_tokens(body))
    rows = []
    for stmt in statements(chunks["st"]):
        label, body = stmt.split(":", 1) if ":" in stmt else ("", stmt)
        toks = _tokens(body)
        k = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "=", "<", ">", "=<", "=>"))
        sense = {"<": LE, "=<": LE, "<=": LE, ">": GE, "=>": GE, ">=": GE, "=": EQ}[toks[k]]
        rhs_toks = toks[k + 1:]
        rhs = float("".join(rhs_toks))
        terms = _parse_expr(toks[:k])
        rows.append((label.strip(), terms, sense, rhs))
    bounds: dict[str, list[float]] = {}
    for line in chunks["bounds"]:
        parts = line.split()
        low = line.lower()
        if low.endswith(" free"):
            bounds[parts[0]] = [-math.inf, math.inf]
            continue
        parts = [p for p in re.split(r"\s*(<=|>=|=<|=>|<|>|=)\s*", line) if p]

        def val(tok: str) -> float:
            t = tok.lower().lstrip("+")
            if t in ("inf", "infinity"):
                return math.inf
            if t in ("-inf", "-infinity"):
                return -math.inf
            return float(tok)

        if len(parts) == 5:
            bounds[parts[2]] = [val(parts[0]), val(parts[4])]
        elif len(parts) == 3:
            name, op, v = parts
            cur = bounds.setdefault(name, [0.0, math.inf])
            if op in (">=", "=>", ">"):
                cur[0] = val(v)
            elif op in ("<=", "=<", "<"):
                cur[1] = val(v)
            else:
                cur[0] = cur[1] = val(v)
        else:
            raise ModelError(f"cannot parse bound {line!r}")
    binaries = [tok for line in chunks["bin"] for tok in line.split()]

    for name, _ in obj_terms:
        note(name)
    for _, terms, _, _ in rows:
        for name, _ in terms:
            note(name)
    for name in bounds:
        note(name)
    for name in binaries:
        note(name)

    model = MilpModel("imported")
    bset = set(binaries)
    refs = {}
    for name in order:
        lb, ub = bounds.get(name, [0.0, math.inf])
        refs[name] = model.add_var(name, BINARY if name in bset else CONTINUOUS, lb, ub)
    model.add_objective([(refs[nm], c) for nm, c in obj_terms])
    for label, terms, sense, rhs in rows:
        model.add_constraint([(refs[nm], c) for nm, c in terms], sense, rhs, name=label)
    return model


def write_solution(model: MilpModel, values) -> str:
    return "".join(f"{v.name} {_num(float(x))}\n" for v, x in zip(model.variables, values))


def read_solution(model: MilpModel, text: str) -> np.ndarray:
    """Read ``name value`` lines; variables not listed default to 0."""
    values = np.zeros(model.num_vars)
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(("#", "\\")):
            continue
        name, val = line.split()[:2]
        values[model.ref(name).index] = float(val)
    return values
