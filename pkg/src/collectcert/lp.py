"""Self-contained linear and mixed-integer linear solving.

A bounded-variable primal simplex (phase 1 by composite infeasibility
minimization, so warm starts from an arbitrary basis are cheap), a
best-first branch-and-bound on top of it, and CPLEX LP text export with a
reference parser for external cross-validation.

Tolerances are fixed constants rather than user flags: certificates must
not silently weaken through loose settings.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from . import _kernels
from .errors import InputError

FEASIBILITY_TOL = 1e-7    # absolute row-residual feasibility
INTEGRALITY_TOL = 1e-6    # distance from integrality at MILP optima
BOUND_GUARD = 1e-9        # slack allowed outside variable bounds
DEFAULT_ITERATION_LIMIT = 1_000_000
DEFAULT_NODE_LIMIT = 100_000
DENSE_COLUMN_LIMIT = 2000  # revised simplex keeps A dense below, CSC above

CONTINUOUS = "continuous"
BINARY = "binary"
INTEGER = "integer"

_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2
_REFACTOR_EVERY = 100


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, BINARY, INTEGER):
            raise InputError(f"unknown variable kind {self.kind!r}")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise InputError(f"variable {self.name}: bounds must be finite")
        if self.lower > self.upper:
            raise InputError(f"variable {self.name}: lower bound exceeds upper bound")
        if self.kind == BINARY and not (self.lower >= 0.0 and self.upper <= 1.0):
            raise InputError(f"binary variable {self.name}: bounds must lie in [0, 1]")


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple  # ((var_index, coefficient), ...) with unique indices
    sense: str     # "<=", ">=" or "="
    rhs: float

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "="):
            raise InputError(f"constraint {self.name}: unknown sense {self.sense!r}")


class LinearProblem:
    """Minimization problem over box-bounded variables with sparse rows."""

    def __init__(self):
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_offset: float = 0.0
        self._index: dict[str, int] = {}

    def add_variable(self, name, kind, lower, upper) -> int:
        if name in self._index:
            raise InputError(f"duplicate variable name {name!r}")
        var = Variable(name, kind, float(lower), float(upper))
        self._index[name] = len(self.variables)
        self.variables.append(var)
        return self._index[name]

    def var_index(self, name: str) -> int:
        return self._index[name]

    def add_constraint(self, coeffs, sense, rhs, name=None) -> int:
        merged: dict[int, float] = {}
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        for idx, c in items:
            if not 0 <= idx < len(self.variables):
                raise InputError(f"constraint references undeclared variable index {idx}")
            merged[idx] = merged.get(idx, 0.0) + float(c)
        row = Constraint(
            name=name or f"c{len(self.constraints)}",
            coeffs=tuple((j, c) for j, c in sorted(merged.items()) if c != 0.0),
            sense=sense,
            rhs=float(rhs),
        )
        self.constraints.append(row)
        return len(self.constraints) - 1

    def set_objective(self, coeffs, offset=0.0) -> None:
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        self.objective = {}
        for idx, c in items:
            if not 0 <= idx < len(self.variables):
                raise InputError(f"objective references undeclared variable index {idx}")
            self.objective[idx] = self.objective.get(idx, 0.0) + float(c)
        self.objective_offset = float(offset)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def integer_indices(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.kind != CONTINUOUS]

    def bounds_arrays(self):
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        return lower, upper

    def objective_array(self) -> np.ndarray:
        c = np.zeros(len(self.variables))
        for idx, coef in self.objective.items():
            c[idx] = coef
        return c


@dataclass
class Solution:
    status: str                      # optimal | infeasible | unbounded | iteration_limit
    objective: float
    values: np.ndarray | None
    dual_bound: float
    iterations: int = 0
    nodes: int = 0
    _warm: tuple | None = field(default=None, repr=False)


def verify_solution(p: LinearProblem, values, check_integrality=False) -> list:
    """Independent feasibility check; returns human-readable violations.

    Walks the original constraint rows rather than any solver-internal
    matrices.
    """
    x = np.asarray(values, dtype=float)
    problems = []
    for j, v in enumerate(p.variables):
        if x[j] < v.lower - BOUND_GUARD or x[j] > v.upper + BOUND_GUARD:
            problems.append(f"variable {v.name} = {x[j]} outside [{v.lower}, {v.upper}]")
        if check_integrality and v.kind != CONTINUOUS:
            if abs(x[j] - round(x[j])) > INTEGRALITY_TOL:
                problems.append(f"variable {v.name} = {x[j]} not integral")
    for row in p.constraints:
        lhs = sum(c * x[j] for j, c in row.coeffs)
        if row.sense == "<=" and lhs > row.rhs + FEASIBILITY_TOL:
            problems.append(f"row {row.name}: {lhs} > {row.rhs}")
        elif row.sense == ">=" and lhs < row.rhs - FEASIBILITY_TOL:
            problems.append(f"row {row.name}: {lhs} < {row.rhs}")
        elif row.sense == "=" and abs(lhs - row.rhs) > FEASIBILITY_TOL:
            problems.append(f"row {row.name}: {lhs} != {row.rhs}")
    return problems


def relax_problem(p: LinearProblem) -> LinearProblem:
    """Continuous relaxation: binary and integer kinds become continuous
    on their existing boxes."""
    q = LinearProblem()
    for v in p.variables:
        q.add_variable(v.name, CONTINUOUS, v.lower, v.upper)
    for row in p.constraints:
        q.add_constraint(list(row.coeffs), row.sense, row.rhs, name=row.name)
    q.set_objective(dict(p.objective), p.objective_offset)
    return q


class _Columns:
    """Constraint matrix of the slack-augmented system, dense or CSC."""

    def __init__(self, p: LinearProblem, force_sparse=None):
        m, n = p.num_constraints, p.num_variables
        self.m, self.n = m, n
        ncols = n + m
        sparse = ncols > DENSE_COLUMN_LIMIT if force_sparse is None else force_sparse
        self.sparse = sparse
        if sparse:
            rows, cols, data = [], [], []
            for i, row in enumerate(p.constraints):
                for j, c in row.coeffs:
                    if c != 0.0:
                        rows.append(i)
                        cols.append(j)
                        data.append(c)
                rows.append(i)
                cols.append(n + i)
                data.append(1.0)
            self.csc = sps.csc_matrix(
                (data, (rows, cols)), shape=(m, ncols), dtype=float
            )
            self.csr = self.csc.tocsr()
            self.dense = None
        else:
            a = np.zeros((m, ncols))
            for i, row in enumerate(p.constraints):
                for j, c in row.coeffs:
                    a[i, j] = c
                a[i, n + i] = 1.0
            self.dense = a
            self.csc = None
            self.csr = None

    def reduced_costs(self, c_full, y):
        if self.sparse:
            return c_full - self.csr.T.dot(y)
        return c_full - self.dense.T @ y

    def col(self, j):
        if self.sparse:
            out = np.zeros(self.m)
            start, end = self.csc.indptr[j], self.csc.indptr[j + 1]
            out[self.csc.indices[start:end]] = self.csc.data[start:end]
            return out
        return self.dense[:, j].copy()

    def basis_matrix(self, basis):
        if self.sparse:
            return self.csc[:, basis].toarray()
        return self.dense[:, basis]


class _StandardForm:
    """Slack-augmented equality system A x + s = b over boxed variables."""

    def __init__(self, p: LinearProblem, force_sparse=None):
        self.problem = p
        self.cols = _Columns(p, force_sparse=force_sparse)
        self.b = np.array([row.rhs for row in p.constraints], dtype=float)
        self.senses = [row.sense for row in p.constraints]
        self.c_struct = p.objective_array()

    def full_bounds(self, lower_struct, upper_struct):
        """Variable boxes plus finite slack boxes derived from the row
        activity ranges under the given structural bounds."""
        m, n = self.cols.m, self.cols.n
        lower = np.empty(n + m)
        upper = np.empty(n + m)
        lower[:n] = lower_struct
        upper[:n] = upper_struct
        for i, row in enumerate(self.problem.constraints):
            lo_act = hi_act = 0.0
            for j, c in row.coeffs:
                a, b = c * lower_struct[j], c * upper_struct[j]
                lo_act += min(a, b)
                hi_act += max(a, b)
            s_lo, s_hi = self.b[i] - hi_act, self.b[i] - lo_act
            sense = self.senses[i]
            if sense == "<=":
                lower[n + i], upper[n + i] = 0.0, max(0.0, s_hi)
            elif sense == ">=":
                lower[n + i], upper[n + i] = min(0.0, s_lo), 0.0
            else:
                lower[n + i] = upper[n + i] = 0.0
        return lower, upper


def _total_violation(x, lower, upper, basis):
    xb = x[basis]
    return float(
        np.sum(np.maximum(xb - upper[basis], 0.0))
        + np.sum(np.maximum(lower[basis] - xb, 0.0))
    )


class _Simplex:
    """One bounded-variable primal simplex run over a standard form."""

    D_TOL = 1e-9
    DEGEN_STEP = 1e-10

    def __init__(self, sf: _StandardForm, lower, upper, iteration_limit):
        self.sf = sf
        self.lower = lower
        self.upper = upper
        self.limit = iteration_limit
        self.m = sf.cols.m
        self.ncols = sf.cols.n + sf.cols.m
        self.iterations = 0
        self.movable = (upper - lower) > 1e-12

    def start(self, warm):
        m, n = self.m, self.sf.cols.n
        if warm is not None:
            basis = np.array(warm[0], dtype=np.int64)
            status = np.array(warm[1], dtype=np.int8)
        else:
            basis = np.arange(n, n + m, dtype=np.int64)
            status = np.full(self.ncols, _AT_LOWER, dtype=np.int8)
            status[basis] = _BASIC
        self.basis = basis
        self.status = status
        self.refactorize()

    def refactorize(self):
        bmat = self.sf.cols.basis_matrix(self.basis)
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError:
            raise RuntimeError("singular basis encountered")
        self.recompute_values()

    def recompute_values(self):
        x = np.empty(self.ncols)
        nonbasic = self.status != _BASIC
        x[nonbasic & (self.status == _AT_UPPER)] = self.upper[
            nonbasic & (self.status == _AT_UPPER)
        ]
        x[nonbasic & (self.status == _AT_LOWER)] = self.lower[
            nonbasic & (self.status == _AT_LOWER)
        ]
        rhs = self.sf.b.copy()
        nb_idx = np.nonzero(nonbasic)[0]
        nz = nb_idx[x[nb_idx] != 0.0]
        for j in nz:
            rhs -= self.sf.cols.col(j) * x[j]
        x[self.basis] = self.binv @ rhs
        self.x = x

    def phase_costs(self):
        c1 = np.zeros(self.ncols)
        xb = self.x[self.basis]
        c1_b = np.where(
            xb > self.upper[self.basis] + FEASIBILITY_TOL,
            1.0,
            np.where(xb < self.lower[self.basis] - FEASIBILITY_TOL, -1.0, 0.0),
        )
        c1[self.basis] = c1_b
        return c1

    def run_phase(self, phase: int, c_full) -> str:
        """Returns 'optimal', 'infeasible' or 'iteration_limit'."""
        degenerate = 0
        bland = False
        bland_threshold = 2 * (self.m + self.ncols)
        since_refactor = 0
        while True:
            if phase == 1:
                c_full = self.phase_costs()
                if not np.any(c_full[self.basis]):
                    return "optimal"  # feasible basis reached
            if self.iterations >= self.limit:
                return "iteration_limit"
            self.iterations += 1

            y = self.binv.T @ c_full[self.basis]
            d = self.sf.cols.reduced_costs(c_full, y)
            improve = np.zeros(self.ncols)
            at_lo = (self.status == _AT_LOWER) & self.movable
            at_up = (self.status == _AT_UPPER) & self.movable
            improve[at_lo] = -d[at_lo]
            improve[at_up] = d[at_up]
            eligible = improve > self.D_TOL
            if not np.any(eligible):
                if phase == 1:
                    total = _total_violation(self.x, self.lower, self.upper, self.basis)
                    return "optimal" if total <= FEASIBILITY_TOL else "infeasible"
                return "optimal"
            if bland:
                entering = int(np.nonzero(eligible)[0][0])
            else:
                entering = int(np.argmax(improve))

            w = self.binv @ self.sf.cols.col(entering)
            sigma = 1.0 if self.status[entering] == _AT_LOWER else -1.0
            rate = -sigma * w
            step_cap = self.upper[entering] - self.lower[entering]
            t, row, hits_lower = _kernels.ratio_test(
                rate,
                self.x[self.basis],
                self.lower[self.basis],
                self.upper[self.basis],
                step_cap,
            )
            if not math.isfinite(t):
                return "unbounded"  # unreachable with finite boxes
            if t <= self.DEGEN_STEP:
                degenerate += 1
                if degenerate > bland_threshold:
                    bland = True

            self.x[self.basis] += rate * t
            if row < 0:
                # entering runs to its other bound: bound flip only
                self.status[entering] = (
                    _AT_UPPER if self.status[entering] == _AT_LOWER else _AT_LOWER
                )
                self.x[entering] = (
                    self.upper[entering]
                    if self.status[entering] == _AT_UPPER
                    else self.lower[entering]
                )
                continue
            leaving = int(self.basis[row])
            self.x[entering] = (
                self.lower[entering] + sigma * t
                if self.status[entering] == _AT_LOWER
                else self.upper[entering] + sigma * t
            )
            self.status[leaving] = _AT_LOWER if hits_lower else _AT_UPPER
            self.x[leaving] = self.lower[leaving] if hits_lower else self.upper[leaving]
            self.status[entering] = _BASIC
            self.basis[row] = entering
            piv = w[row]
            if abs(piv) < 1e-11:
                self.refactorize()
                continue
            self.binv[row] /= piv
            others = np.arange(self.m) != row
            self.binv[others] -= np.outer(w[others], self.binv[row])
            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                since_refactor = 0
                self.refactorize()


def _solve_standard(sf: _StandardForm, lower, upper, warm, iteration_limit):
    sim = _Simplex(sf, lower, upper, iteration_limit)
    sim.start(warm)
    outcome = sim.run_phase(1, None)
    if outcome == "infeasible":
        return "infeasible", None, sim.iterations, None
    if outcome == "iteration_limit":
        return "iteration_limit", None, sim.iterations, None
    c_full = np.zeros(sim.ncols)
    c_full[: sf.cols.n] = sf.c_struct
    outcome = sim.run_phase(2, c_full)
    sim.refactorize()  # tighten residual drift before reporting
    warm_out = (sim.basis.copy(), sim.status.copy())
    if outcome == "iteration_limit":
        return "iteration_limit", sim.x.copy(), sim.iterations, warm_out
    if outcome == "unbounded":
        return "unbounded", None, sim.iterations, warm_out
    return "optimal", sim.x.copy(), sim.iterations, warm_out


def _finish_solution(p, sf, status, x_full, iterations, warm):
    if x_full is None:
        obj = math.nan
        return Solution(
            status=status,
            objective=obj,
            values=None,
            dual_bound=math.inf if status == "infeasible" else -math.inf,
            iterations=iterations,
            _warm=warm,
        )
    values = x_full[: sf.cols.n].copy()
    obj = float(sf.c_struct @ values + p.objective_offset)
    if status == "optimal":
        problems = verify_solution(p, values)
        if problems:
            raise RuntimeError(
                "simplex returned an infeasible point: " + "; ".join(problems[:3])
            )
    dual = obj if status == "optimal" else -math.inf
    return Solution(
        status=status,
        objective=obj,
        values=values,
        dual_bound=dual,
        iterations=iterations,
        _warm=warm,
    )


def solve_lp(
    p: LinearProblem,
    iteration_limit: int = DEFAULT_ITERATION_LIMIT,
    warm=None,
    _standard_form=None,
    _bounds=None,
) -> Solution:
    """Optimal basic solution of the problem's continuous relaxation-as-given.

    Integer and binary kinds are treated as continuous on their boxes;
    use solve_milp to enforce integrality.
    """
    sf = _standard_form or _StandardForm(p)
    if _bounds is None:
        lo_s, up_s = p.bounds_arrays()
    else:
        lo_s, up_s = _bounds
    lower, upper = sf.full_bounds(lo_s, up_s)
    status, x_full, iterations, warm_out = _solve_standard(
        sf, lower, upper, warm, iteration_limit
    )
    return _finish_solution(p, sf, status, x_full, iterations, warm_out)


def _branch_variable(values, int_idx):
    """Fractional integer variable with fractional part closest to 0.5,
    lowest index on ties; -1 when integral."""
    best = -1
    best_gap = math.inf
    for j in int_idx:
        frac = values[j] - math.floor(values[j])
        dist = min(frac, 1.0 - frac)
        if dist <= INTEGRALITY_TOL:
            continue
        gap = abs(frac - 0.5)
        if gap < best_gap - 1e-12:
            best_gap = gap
            best = j
    return best


def solve_milp(
    p: LinearProblem,
    node_limit: int = DEFAULT_NODE_LIMIT,
    iteration_limit: int = DEFAULT_ITERATION_LIMIT,
) -> Solution:
    """Best-first branch-and-bound over the integer-kind variables.

    Node LPs warm-start from the parent basis. At the node limit the
    incumbent is returned together with the best proven lower bound
    (dual_bound), which remains valid for certification.
    """
    int_idx = p.integer_indices()
    if not int_idx:
        return solve_lp(p, iteration_limit=iteration_limit)
    sf = _StandardForm(p)
    base_lower, base_upper = p.bounds_arrays()

    incumbent: Solution | None = None
    incumbent_obj = math.inf
    heap = []
    counter = 0
    heapq.heappush(heap, (-math.inf, counter, {}, None))
    nodes = 0
    total_iters = 0
    hit_node_limit = False

    while heap:
        bound, _, overrides, warm = heapq.heappop(heap)
        if bound >= incumbent_obj - BOUND_GUARD:
            heap.clear()
            break
        if nodes >= node_limit:
            hit_node_limit = True
            heapq.heappush(heap, (bound, -1, overrides, warm))
            break
        nodes += 1
        lo = base_lower.copy()
        up = base_upper.copy()
        for j, (a, b) in overrides.items():
            lo[j], up[j] = a, b
        if np.any(lo > up):
            continue
        sol = solve_lp(
            p,
            iteration_limit=iteration_limit,
            warm=warm,
            _standard_form=sf,
            _bounds=(lo, up),
        )
        total_iters += sol.iterations
        if sol.status == "infeasible":
            continue
        if sol.status != "optimal":
            hit_node_limit = True
            heapq.heappush(heap, (bound, -1, overrides, warm))
            break
        if sol.objective >= incumbent_obj - BOUND_GUARD:
            continue
        j = _branch_variable(sol.values, int_idx)
        if j < 0:
            incumbent = sol
            incumbent_obj = sol.objective
            continue
        xj = sol.values[j]
        counter += 1
        heapq.heappush(
            heap,
            (
                sol.objective,
                counter,
                {**overrides, j: (lo[j], math.floor(xj))},
                sol._warm,
            ),
        )
        counter += 1
        heapq.heappush(
            heap,
            (
                sol.objective,
                counter,
                {**overrides, j: (math.ceil(xj), up[j])},
                sol._warm,
            ),
        )

    open_bounds = [entry[0] for entry in heap]
    if hit_node_limit:
        dual = min(open_bounds + [incumbent_obj])
        if not math.isfinite(dual):  # root never solved cleanly
            dual = -math.inf
        status = "iteration_limit"
    else:
        dual = incumbent_obj if incumbent is not None else math.inf
        status = "optimal" if incumbent is not None else "infeasible"

    if incumbent is None:
        return Solution(
            status=status,
            objective=math.nan,
            values=None,
            dual_bound=dual,
            iterations=total_iters,
            nodes=nodes,
        )
    problems = verify_solution(p, incumbent.values, check_integrality=True)
    if problems:
        raise RuntimeError(
            "branch-and-bound returned an invalid point: " + "; ".join(problems[:3])
        )
    return Solution(
        status=status,
        objective=incumbent.objective,
        values=incumbent.values,
        dual_bound=dual,
        iterations=total_iters,
        nodes=nodes,
    )


# --- CPLEX LP text format -------------------------------------------------

_NAME_SANITIZE = re.compile(r"[^A-Za-z0-9_]")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _sanitize(name: str) -> str:
    clean = _NAME_SANITIZE.sub("_", name)
    if not clean or clean[0].isdigit() or clean[0] == ".":
        clean = "v_" + clean
    return clean


def _format_terms(terms, offset=0.0) -> str:
    parts = []
    for name, coef in terms:
        sign = "-" if coef < 0 else "+"
        parts.append((sign, f"{_fmt(abs(coef))} {name}"))
    if offset != 0.0:
        parts.append(("-" if offset < 0 else "+", _fmt(abs(offset))))
    if not parts:
        return "0"
    first_sign, first_body = parts[0]
    out = ("-" if first_sign == "-" else "") + first_body
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def export_lp(p: LinearProblem, path) -> None:
    """Write the problem in CPLEX LP text format.

    Variable names are sanitized to [A-Za-z0-9_]; every variable gets an
    explicit Bounds line, binaries and integers are listed in their own
    sections, and coefficients carry 17 significant digits so that a
    round trip through the reference parser is exact.
    """
    names = []
    used = set()
    for v in p.variables:
        name = _sanitize(v.name)
        while name in used:
            name += "_"
        used.add(name)
        names.append(name)
    lines = ["Minimize"]
    obj_terms = [(names[j], c) for j, c in sorted(p.objective.items()) if c != 0.0]
    lines.append(" obj: " + _format_terms(obj_terms, p.objective_offset))
    lines.append("Subject To")
    row_names = set()
    for row in p.constraints:
        rname = _sanitize(row.name)
        while rname in row_names:
            rname += "_"
        row_names.add(rname)
        body = _format_terms([(names[j], c) for j, c in row.coeffs if c != 0.0])
        lines.append(f" {rname}: {body} {row.sense} {_fmt(row.rhs)}")
    lines.append("Bounds")
    for j, v in enumerate(p.variables):
        if v.lower == v.upper:
            lines.append(f" {names[j]} = {_fmt(v.lower)}")
        else:
            lines.append(f" {_fmt(v.lower)} <= {names[j]} <= {_fmt(v.upper)}")
    binaries = [names[j] for j, v in enumerate(p.variables) if v.kind == BINARY]
    generals = [names[j] for j, v in enumerate(p.variables) if v.kind == INTEGER]
    if binaries:
        lines.append("Binaries")
        lines.extend(" " + " ".join(binaries[i : i + 8]) for i in range(0, len(binaries), 8))
    if generals:
        lines.append("Generals")
        lines.extend(" " + " ".join(generals[i : i + 8]) for i in range(0, len(generals), 8))
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


_TOKEN = re.compile(
    r"(<=|>=|=<|=>|<|>|=|\+|-|:|[A-Za-z_][A-Za-z0-9_.]*|[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)"
)
_SECTIONS = {
    "minimize": "objective",
    "min": "objective",
    "subject": "rows",
    "st": "rows",
    "bounds": "bounds",
    "bound": "bounds",
    "binaries": "binaries",
    "binary": "binaries",
    "bin": "binaries",
    "generals": "generals",
    "general": "generals",
    "gen": "generals",
    "end": "end",
}


def _tokenize_lp(text: str):
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0]
        for tok in _TOKEN.findall(line):
            yield tok


def parse_lp(path) -> LinearProblem:
    """Reference parser for the subset of the CPLEX LP format written by
    export_lp (plus minor tolerated variations)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    tokens = list(_tokenize_lp(text))
    if not tokens:
        raise InputError(f"LP file {path}: empty")

    # split into sections
    sections: dict[str, list] = {}
    current = None
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        low = tok.lower()
        if low == "maximize" or low == "max":
            raise InputError("only minimization problems are supported")
        if low in _SECTIONS:
            current = _SECTIONS[low]
            if low == "subject" and i + 1 < len(tokens) and tokens[i + 1].lower() == "to":
                i += 1
            if low == "st" and i + 1 < len(tokens) and tokens[i + 1].lower() == ".":
                i += 1
            sections.setdefault(current, [])
            i += 1
            continue
        if current is None:
            raise InputError(f"LP file {path}: token {tok!r} before any section")
        sections[current].append(tok)
        i += 1

    p = LinearProblem()
    kind_of: dict[str, str] = {}
    bounds_of: dict[str, tuple] = {}
    order: list[str] = []

    def register(name):
        if name not in bounds_of:
            bounds_of[name] = (None, None)
            order.append(name)

    def _is_number(tok):
        return bool(re.fullmatch(r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?", tok))

    # bounds first so the writer's variable order is reproduced
    btoks = sections.get("bounds", [])
    i = 0
    while i < len(btoks):
        # forms: lo <= name <= hi | name <= hi | name >= lo | name = v
        if _is_number(btoks[i]) or btoks[i] in ("+", "-"):
            sign = 1.0
            while btoks[i] in ("+", "-"):
                if btoks[i] == "-":
                    sign = -sign
                i += 1
            lo = sign * float(btoks[i])
            i += 1
            if btoks[i] not in ("<=", "<", "=<"):
                raise InputError(f"LP bounds: expected <= after number, got {btoks[i]!r}")
            i += 1
            name = btoks[i]
            i += 1
            register(name)
            cur = bounds_of[name]
            if i < len(btoks) and btoks[i] in ("<=", "<", "=<"):
                i += 1
                sign = 1.0
                while btoks[i] in ("+", "-"):
                    if btoks[i] == "-":
                        sign = -sign
                    i += 1
                hi = sign * float(btoks[i])
                i += 1
                bounds_of[name] = (lo, hi)
            else:
                bounds_of[name] = (lo, cur[1])
        else:
            name = btoks[i]
            i += 1
            register(name)
            cur = bounds_of[name]
            if i >= len(btoks):
                raise InputError(f"LP bounds: dangling variable {name!r}")
            op = btoks[i]
            i += 1
            if op.lower() == "free":
                raise InputError(f"LP bounds: free variable {name!r} not supported (finite bounds required)")
            sign = 1.0
            while btoks[i] in ("+", "-"):
                if btoks[i] == "-":
                    sign = -sign
                i += 1
            val = sign * float(btoks[i])
            i += 1
            if op in ("<=", "<", "=<"):
                bounds_of[name] = (cur[0], val)
            elif op in (">=", ">", "=>"):
                bounds_of[name] = (val, cur[1])
            elif op == "=":
                bounds_of[name] = (val, val)
            else:
                raise InputError(f"LP bounds: unexpected token {op!r}")

    for name in sections.get("binaries", []):
        register(name)
        kind_of[name] = BINARY
    for name in sections.get("generals", []):
        register(name)
        kind_of[name] = INTEGER

    def parse_expression(toks, start, stop_tokens):
        """Parse signed terms until a stop token; returns (terms, const, next)."""
        terms = []
        const = 0.0
        i = start
        sign = 1.0
        pending = None  # pending coefficient
        while i < len(toks) and toks[i] not in stop_tokens:
            tok = toks[i]
            if tok == "+":
                if pending is not None:
                    const += sign * pending
                    pending = None
                sign = 1.0
            elif tok == "-":
                if pending is not None:
                    const += sign * pending
                    pending = None
                sign = -1.0
            elif _is_number(tok):
                if pending is not None:
                    const += sign * pending
                pending = float(tok)
            else:
                coef = sign * (pending if pending is not None else 1.0)
                terms.append((tok, coef))
                pending = None
                sign = 1.0
            i += 1
        if pending is not None:
            const += sign * pending
        return terms, const, i

    # objective
    otoks = sections.get("objective", [])
    ostart = 0
    if len(otoks) >= 2 and otoks[1] == ":":
        ostart = 2
    obj_terms, obj_const, _ = parse_expression(otoks, ostart, stop_tokens=())
    for name, _c in obj_terms:
        register(name)

    # rows
    rtoks = sections.get("rows", [])
    rows = []
    i = 0
    while i < len(rtoks):
        if i + 1 < len(rtoks) and rtoks[i + 1] == ":":
            rname = rtoks[i]
            i += 2
        else:
            rname = f"c{len(rows)}"
        terms, const, i = parse_expression(rtoks, i, stop_tokens=("<=", ">=", "<", ">", "=", "=<", "=>"))
        if i >= len(rtoks):
            raise InputError("LP row missing comparison operator")
        op = rtoks[i]
        sense = "<=" if op in ("<=", "<", "=<") else ">=" if op in (">=", ">", "=>") else "="
        i += 1
        sign = 1.0
        while rtoks[i] in ("+", "-"):
            if rtoks[i] == "-":
                sign = -sign
            i += 1
        rhs = sign * float(rtoks[i]) - const
        i += 1
        for name, _c in terms:
            register(name)
        rows.append((rname, terms, sense, rhs))

    for name in order:
        lo, hi = bounds_of[name]
        kind = kind_of.get(name, CONTINUOUS)
        if lo is None and hi is None and kind == BINARY:
            lo, hi = 0.0, 1.0
        if lo is None:
            lo = 0.0
        if hi is None:
            raise InputError(f"LP variable {name!r}: missing finite upper bound")
        p.add_variable(name, kind, lo, hi)
    for rname, terms, sense, rhs in rows:
        p.add_constraint(
            [(p.var_index(n), c) for n, c in terms], sense, rhs, name=rname
        )
    p.set_objective({p.var_index(n): c for n, c in obj_terms}, obj_const)
    return p
