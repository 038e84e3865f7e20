"""Collective certificates: fuse per-node base certificates into one MILP.

The adversary distributes a shared perturbation budget over the graph;
a prediction counts as attacked only when the perturbation mass inside
its receptive field dominates some point of its uncertifiable-budget
front. Minimizing the number of surviving predictions over all feasible
budget allocations yields a lower bound on simultaneous robustness; the
LP relaxation of the same problem is a cheaper, still-sound bound.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError
from .graph import AXES, BudgetVector, Graph, ReceptiveField, ThreatModel, receptive_field
from .lp import (
    BINARY,
    INTEGER,
    LinearProblem,
    relax_problem,
    solve_lp,
    solve_milp,
)
from .pareto import BaseCertificate

COUNT_GUARD = 1e-6  # absorbed solver round-off when ceiling objectives


@dataclass(frozen=True)
class CertOptions:
    relaxed: bool = False
    undirected_vars: bool | None = None  # None: oriented pairs iff graph undirected
    layers: int = 2

    def resolve_undirected_vars(self, g: Graph) -> bool:
        if self.undirected_vars is None:
            return not g.directed
        if self.undirected_vars and g.directed:
            raise InputError("undirected_vars requested on a directed graph")
        return self.undirected_vars


@dataclass(frozen=True)
class CertInstance:
    graph: Graph
    certs: dict
    fields: dict
    tm: ThreatModel
    targets: tuple
    options: CertOptions = CertOptions()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(sorted(int(t) for t in self.targets)))
        self.tm.validate_for(self.graph)
        gb = self.tm.global_budget
        for n in self.targets:
            cert = self.certs.get(n)
            if cert is None:
                raise InputError(f"target {n} has no base certificate")
            if n not in self.fields:
                raise InputError(f"target {n} has no receptive field")
            if not gb.covered_by(cert.budget_box):
                raise InputError(
                    f"certificate box {cert.budget_box.as_tuple()} of node {n} does not "
                    f"cover the global budget {gb.as_tuple()}"
                )


def build_instance(
    g: Graph,
    tm: ThreatModel,
    certs: dict,
    targets=None,
    options: CertOptions = CertOptions(),
) -> CertInstance:
    """Assemble an instance, computing receptive fields for the targets."""
    if targets is None:
        targets = range(g.num_nodes)
    targets = tuple(sorted(int(t) for t in targets))
    fields = {n: receptive_field(g, n, options.layers, tm) for n in targets}
    return CertInstance(
        graph=g, certs=dict(certs), fields=fields, tm=tm, targets=targets, options=options
    )


@dataclass
class CertResult:
    certified_count: int
    objective_value: float
    status: str
    witness: dict


def naive_certificate(inst: CertInstance) -> int:
    """Certified count when every prediction is attacked independently:
    a target survives only if its front stays outside the full global
    budget box."""
    corner = inst.tm.global_budget
    return sum(
        1 for n in inst.targets if not inst.certs[n].is_uncertified(corner)
    )


# --- problem construction ---------------------------------------------------


@dataclass
class ProblemMeta:
    """Index maps from MILP variables back to instance entities."""

    fast_path: bool
    t_vars: dict = field(default_factory=dict)
    bxa_vars: dict = field(default_factory=dict)
    bxd_vars: dict = field(default_factory=dict)
    a_vars: dict = field(default_factory=dict)
    del_vars: dict = field(default_factory=dict)  # (i, j) -> index
    add_vars: dict = field(default_factory=dict)


def _single_active_axis(gb: BudgetVector):
    active = [axis for axis in AXES if getattr(gb, axis) > 0]
    return active[0] if len(active) == 1 else None


def _axis_threshold(cert: BaseCertificate, axis: str):
    """Smallest on-axis front value, None when no front point lies on the
    axis (prediction certified throughout the single-axis box)."""
    best = None
    for p in cert.front:
        others = [getattr(p, a) for a in AXES if a != axis]
        if any(v > 0 for v in others):
            continue
        v = getattr(p, axis)
        if best is None or v < best:
            best = v
    return best


def _deletable_positions(g: Graph):
    return list(g.sorted_edges)


def _addable_positions(g: Graph):
    out = []
    for i in range(g.num_nodes):
        start = 0 if g.directed else i + 1
        for j in range(start, g.num_nodes):
            if i != j and not g.has_edge(i, j):
                out.append((i, j))
    return out


def _use_fast_path(inst: CertInstance) -> bool:
    return (
        _single_active_axis(inst.tm.global_budget) is not None
        and not inst.tm.has_local_budgets
        and inst.tm.sigma is None
    )


def _build_fast(inst: CertInstance) -> LinearProblem:
    """Compact single-axis problem: one budget variable per perturbable
    position (or node row), one robustness indicator per target."""
    g, tm = inst.graph, inst.tm
    axis = _single_active_axis(tm.global_budget)
    radius = getattr(tm.global_budget, axis)
    p = LinearProblem()
    meta = ProblemMeta(fast_path=True)

    budget_vars = []  # (index, mass-membership test)
    if axis == "x_add" or axis == "x_del":
        prefix = "bxa" if axis == "x_add" else "bxd"
        store = meta.bxa_vars if axis == "x_add" else meta.bxd_vars
        for m in range(g.num_nodes):
            idx = p.add_variable(f"{prefix}_{m}", INTEGER, 0, radius)
            store[m] = idx
            budget_vars.append((idx, ("node", m)))
    else:
        positions = _deletable_positions(g) if axis == "a_del" else _addable_positions(g)
        prefix = "Bd" if axis == "a_del" else "Ba"
        store = meta.del_vars if axis == "a_del" else meta.add_vars
        for (i, j) in positions:
            idx = p.add_variable(f"{prefix}_{i}_{j}", BINARY, 0, 1)
            store[(i, j)] = idx
            budget_vars.append((idx, ("edge", (i, j))))

    for n in inst.targets:
        threshold = _axis_threshold(inst.certs[n], axis)
        upper = 0 if threshold is None else 1
        meta.t_vars[n] = p.add_variable(f"t_{n}", BINARY, 0, upper)

    for n in inst.targets:
        fld = inst.fields[n]
        threshold = _axis_threshold(inst.certs[n], axis)
        coeffs = []
        for idx, member in budget_vars:
            kind, where = member
            inside = fld.contains_node(where) if kind == "node" else fld.contains_edge(*where)
            if inside:
                coeffs.append((idx, 1.0))
        coeffs.append((meta.t_vars[n], -float(threshold if threshold is not None else 0)))
        p.add_constraint(coeffs, ">=", 0.0, name=f"ind_{n}")
    p.add_constraint(
        [(idx, 1.0) for idx, _ in budget_vars], "<=", float(radius), name=f"g{axis}"
    )
    p.set_objective(
        {meta.t_vars[n]: -1.0 for n in inst.targets}, offset=float(len(inst.targets))
    )
    p.meta = meta
    return p


def _build_general(inst: CertInstance) -> LinearProblem:
    g, tm = inst.graph, inst.tm
    gb = tm.global_budget
    oriented = inst.options.resolve_undirected_vars(g)
    machinery = tm.sigma is not None or tm.has_local_budgets
    p = LinearProblem()
    meta = ProblemMeta(fast_path=False)

    def local_cap(vec, m, global_cap):
        return global_cap if vec is None else min(global_cap, vec[m])

    # per-target indicator block: Q two-dimensionally per front row, s per
    # row, t per target; degenerate front entries (value 0) pin Q to 1
    q_vars = {}
    s_vars = {}
    for n in inst.targets:
        cert = inst.certs[n]
        for pi, point in enumerate(cert.front):
            for d, axis in enumerate(AXES):
                fixed = getattr(point, axis) == 0
                q_vars[(n, pi, d)] = p.add_variable(
                    f"Q_{n}_{pi}_{d}", BINARY, 1 if fixed else 0, 1
                )
            s_vars[(n, pi)] = p.add_variable(f"s_{n}_{pi}", BINARY, 0, 1)
        upper = 0 if len(cert.front) == 0 else 1
        meta.t_vars[n] = p.add_variable(f"t_{n}", BINARY, 0, upper)

    for m in range(g.num_nodes):
        meta.bxa_vars[m] = p.add_variable(
            f"bxa_{m}", INTEGER, 0, local_cap(tm.local_x_add, m, gb.x_add)
        )
    for m in range(g.num_nodes):
        meta.bxd_vars[m] = p.add_variable(
            f"bxd_{m}", INTEGER, 0, local_cap(tm.local_x_del, m, gb.x_del)
        )
    if machinery:
        for m in range(g.num_nodes):
            meta.a_vars[m] = p.add_variable(f"a_{m}", BINARY, 0, 1)

    del_positions = _deletable_positions(g)
    add_positions = _addable_positions(g) if gb.a_add > 0 else []
    for (i, j) in del_positions:
        meta.del_vars[(i, j)] = p.add_variable(f"Bd_{i}_{j}", BINARY, 0, 1)
        if oriented:
            meta.del_vars[(j, i)] = p.add_variable(f"Bd_{j}_{i}", BINARY, 0, 1)
    for (i, j) in add_positions:
        meta.add_vars[(i, j)] = p.add_variable(f"Ba_{i}_{j}", BINARY, 0, 1)
        if oriented:
            meta.add_vars[(j, i)] = p.add_variable(f"Ba_{j}_{i}", BINARY, 0, 1)

    def in_field_edge_terms(fld: ReceptiveField, var_map):
        return [
            (idx, 1.0) for (i, j), idx in var_map.items() if fld.contains_edge(i, j)
        ]

    # indicator wiring
    for n in inst.targets:
        cert = inst.certs[n]
        fld = inst.fields[n]
        node_terms_a = [
            (meta.bxa_vars[m], 1.0) for m in range(g.num_nodes) if fld.contains_node(m)
        ]
        node_terms_d = [
            (meta.bxd_vars[m], 1.0) for m in range(g.num_nodes) if fld.contains_node(m)
        ]
        edge_terms_add = in_field_edge_terms(fld, meta.add_vars)
        edge_terms_del = in_field_edge_terms(fld, meta.del_vars)
        mass_terms = [node_terms_a, node_terms_d, edge_terms_add, edge_terms_del]
        for pi, point in enumerate(cert.front):
            for d, axis in enumerate(AXES):
                value = getattr(point, axis)
                coeffs = list(mass_terms[d])
                if value > 0:
                    coeffs.append((q_vars[(n, pi, d)], -float(value)))
                p.add_constraint(coeffs, ">=", 0.0, name=f"q_{n}_{pi}_{d}")
            for d in range(4):
                p.add_constraint(
                    [(q_vars[(n, pi, d)], 1.0), (s_vars[(n, pi)], -1.0)],
                    ">=",
                    0.0,
                    name=f"l_{n}_{pi}_{d}",
                )
        coeffs = [(s_vars[(n, pi)], 1.0) for pi in range(len(cert.front))]
        coeffs.append((meta.t_vars[n], -1.0))
        p.add_constraint(coeffs, ">=", 0.0, name=f"ssum_{n}")

    # global budgets
    p.add_constraint(
        [(idx, 1.0) for idx in meta.bxa_vars.values()], "<=", float(gb.x_add), name="gx_add"
    )
    p.add_constraint(
        [(idx, 1.0) for idx in meta.bxd_vars.values()], "<=", float(gb.x_del), name="gx_del"
    )
    p.add_constraint(
        [(idx, 1.0) for idx in meta.add_vars.values()], "<=", float(gb.a_add), name="ga_add"
    )
    p.add_constraint(
        [(idx, 1.0) for idx in meta.del_vars.values()], "<=", float(gb.a_del), name="ga_del"
    )
    if tm.sigma is not None:
        p.add_constraint(
            [(idx, 1.0) for idx in meta.a_vars.values()], "<=", float(tm.sigma), name="sig"
        )

    if machinery:
        # attributes can only change at attacker-controlled rows
        for m in range(g.num_nodes):
            p.add_constraint(
                [(meta.bxa_vars[m], 1.0), (meta.a_vars[m], -float(local_cap(tm.local_x_add, m, gb.x_add)))],
                "<=",
                0.0,
                name=f"lxa_{m}",
            )
        for m in range(g.num_nodes):
            p.add_constraint(
                [(meta.bxd_vars[m], 1.0), (meta.a_vars[m], -float(local_cap(tm.local_x_del, m, gb.x_del)))],
                "<=",
                0.0,
                name=f"lxd_{m}",
            )

    def incident_vars(var_map, m, charged_only):
        """Edge variables counting toward node m's tally.

        Directed graphs meter row m (positions (m, j)); undirected graphs
        meter every incident pair, either only the m-charged orientation
        or both, depending on charged_only.
        """
        out = []
        for (i, j), idx in var_map.items():
            if g.directed or charged_only:
                if i == m:
                    out.append((idx, 1.0))
            elif m in (i, j):
                out.append((idx, 1.0))
        return out

    # plain per-node adjacency budgets (both orientations for undirected)
    if tm.local_a_add is not None and add_positions:
        for m in range(g.num_nodes):
            p.add_constraint(
                incident_vars(meta.add_vars, m, charged_only=False),
                "<=",
                float(tm.local_a_add[m]),
                name=f"laa_{m}",
            )
    if tm.local_a_del is not None and del_positions:
        for m in range(g.num_nodes):
            p.add_constraint(
                incident_vars(meta.del_vars, m, charged_only=False),
                "<=",
                float(tm.local_a_del[m]),
                name=f"lad_{m}",
            )

    if machinery:
        if oriented:
            # an oriented flip is charged to its row owner, who must be an
            # attacker; the cap bounds how much can be charged to one node
            for m in range(g.num_nodes):
                if add_positions:
                    coeffs = incident_vars(meta.add_vars, m, charged_only=True)
                    coeffs.append((meta.a_vars[m], -float(local_cap(tm.local_a_add, m, gb.a_add))))
                    p.add_constraint(coeffs, "<=", 0.0, name=f"oaa_{m}")
            for m in range(g.num_nodes):
                if del_positions:
                    coeffs = incident_vars(meta.del_vars, m, charged_only=True)
                    coeffs.append((meta.a_vars[m], -float(local_cap(tm.local_a_del, m, gb.a_del))))
                    p.add_constraint(coeffs, "<=", 0.0, name=f"oad_{m}")
        else:
            # one row per edge variable: some endpoint must be controlled
            for (i, j), idx in sorted(meta.del_vars.items(), key=lambda kv: kv[1]):
                p.add_constraint(
                    [(idx, 1.0), (meta.a_vars[i], -1.0), (meta.a_vars[j], -1.0)],
                    "<=",
                    0.0,
                    name=f"cov_d_{i}_{j}",
                )
            for (i, j), idx in sorted(meta.add_vars.items(), key=lambda kv: kv[1]):
                p.add_constraint(
                    [(idx, 1.0), (meta.a_vars[i], -1.0), (meta.a_vars[j], -1.0)],
                    "<=",
                    0.0,
                    name=f"cov_a_{i}_{j}",
                )

    if oriented:
        # an undirected pair must not be perturbed through both orientations
        for (i, j) in del_positions:
            p.add_constraint(
                [(meta.del_vars[(i, j)], 1.0), (meta.del_vars[(j, i)], 1.0)],
                "<=",
                1.0,
                name=f"exd_{i}_{j}",
            )
        for (i, j) in add_positions:
            p.add_constraint(
                [(meta.add_vars[(i, j)], 1.0), (meta.add_vars[(j, i)], 1.0)],
                "<=",
                1.0,
                name=f"exa_{i}_{j}",
            )

    p.set_objective(
        {meta.t_vars[n]: -1.0 for n in inst.targets}, offset=float(len(inst.targets))
    )
    p.meta = meta
    return p


def build_problem(inst: CertInstance) -> LinearProblem:
    """Mixed-integer encoding of the adversary's budget-allocation problem.

    Indicators express, per target and front point, whether the in-field
    perturbation mass reaches the point in each dimension; a target is
    counted as attacked when some front point is reached in all four.
    The single-axis instance without local budgets or an attacker cap
    uses the compact scalar-threshold form instead.
    """
    if _use_fast_path(inst):
        return _build_fast(inst)
    return _build_general(inst)


@dataclass(frozen=True)
class ProblemSize:
    rows: int
    declarations: int
    variables: int

    @property
    def constraints(self) -> int:
        # integrality/binarity declarations are counted as constraints,
        # matching the size formula's accounting
        return self.rows + self.declarations


def expected_problem_size(inst: CertInstance) -> ProblemSize:
    """Predicted problem dimensions from the instance's shape.

    On directed edge-deletion-only instances with local budgets, an
    attacker cap and all nodes targeted, this reproduces the closed-form
    count 13*sum(front sizes) + 8N + 2e + 5 constraints and
    5*sum(front sizes) + 4N + e variables; feature-dependent deviations
    are itemized below.
    """
    g, tm = inst.graph, inst.tm
    if _use_fast_path(inst):
        axis = _single_active_axis(tm.global_budget)
        if axis in ("x_add", "x_del"):
            nb = g.num_nodes
        elif axis == "a_del":
            nb = len(g.sorted_edges)
        else:
            nb = len(_addable_positions(g))
        t = len(inst.targets)
        return ProblemSize(rows=t + 1, declarations=nb + t, variables=nb + t)

    oriented = inst.options.resolve_undirected_vars(g)
    machinery = tm.sigma is not None or tm.has_local_budgets
    front_total = sum(len(inst.certs[n].front) for n in inst.targets)
    n_nodes = g.num_nodes
    n_targets = len(inst.targets)
    e_del = len(g.sorted_edges) * (2 if oriented else 1)
    e_add = (len(_addable_positions(g)) if tm.global_budget.a_add > 0 else 0) * (
        2 if oriented else 1
    )

    variables = 5 * front_total + n_targets + 2 * n_nodes + e_del + e_add
    declarations = variables
    if machinery:
        variables += n_nodes
        declarations += n_nodes

    rows = 8 * front_total + n_targets + 4  # indicator block + global budgets
    if tm.sigma is not None:
        rows += 1
    if machinery:
        rows += 2 * n_nodes  # attribute-attacker couplings
    if tm.local_a_add is not None and e_add:
        rows += n_nodes
    if tm.local_a_del is not None and e_del:
        rows += n_nodes
    if machinery:
        if oriented:
            rows += n_nodes if e_add else 0
            rows += n_nodes if e_del else 0
        else:
            rows += (e_del + e_add)  # coverage, one per edge variable
    if oriented:
        rows += (e_del + e_add) // 2  # perturbed-twice exclusions, one per pair
    return ProblemSize(rows=rows, declarations=declarations, variables=variables)


# --- solving ----------------------------------------------------------------


def _extract_witness(problem: LinearProblem, values) -> dict:
    meta: ProblemMeta = problem.meta
    if values is None:
        return {}

    def pick(var_map):
        return {k: float(values[idx]) for k, idx in var_map.items() if values[idx] > 1e-9}

    witness = {
        "x_add": {str(m): v for m, v in pick(meta.bxa_vars).items()},
        "x_del": {str(m): v for m, v in pick(meta.bxd_vars).items()},
        "edges_added": [[i, j, v] for (i, j), v in sorted(pick(meta.add_vars).items())],
        "edges_deleted": [[i, j, v] for (i, j), v in sorted(pick(meta.del_vars).items())],
        "uncertified": {str(n): float(values[idx]) for n, idx in meta.t_vars.items() if values[idx] > 1e-9},
    }
    if meta.a_vars:
        witness["attackers"] = {str(m): v for m, v in pick(meta.a_vars).items()}
    return witness


def certify(inst: CertInstance) -> CertResult:
    """Build, solve and interpret the collective certificate.

    The reported count is ceil(bound - 1e-6) where the bound is the MILP
    optimum (exact mode), the LP optimum (relaxed mode), or the proven
    dual bound when the solver stopped at its node limit; each of these
    lower-bounds the true number of simultaneously robust predictions.
    """
    problem = build_problem(inst)
    n_targets = len(inst.targets)
    if inst.options.relaxed:
        sol = solve_lp(relax_problem(problem))
        if sol.status == "optimal":
            bound = sol.objective
        else:
            bound = -math.inf  # a feasible LP point only upper-bounds the optimum
    else:
        sol = solve_milp(problem)
        if sol.status == "optimal":
            bound = sol.objective
        elif sol.status == "iteration_limit":
            bound = sol.dual_bound
        else:
            raise RuntimeError(f"collective problem unexpectedly {sol.status}")
    if math.isfinite(bound):
        count = int(math.ceil(bound - COUNT_GUARD))
    else:
        count = 0
    count = max(0, min(n_targets, count))
    return CertResult(
        certified_count=count,
        objective_value=float(sol.objective) if sol.values is not None else math.nan,
        status=sol.status,
        witness=_extract_witness(problem, sol.values),
    )


@dataclass(frozen=True)
class SweepPoint:
    radius: int
    collective_count: int
    naive_count: int
    seconds: float
    objective: float
    status: str


def sweep(inst: CertInstance, axis: str, radii) -> list:
    """Certify one budget axis at several radii, reusing the fronts.

    Receptive fields are recomputed only when the radius flips the
    edge-addition admissibility (which changes fields to global).
    """
    if axis not in AXES:
        raise InputError(f"unknown sweep axis {axis!r}")
    results = []
    field_cache: dict[bool, dict] = {}
    for radius in radii:
        tm_r = inst.tm.with_global(axis, int(radius))
        adds = tm_r.allows_edge_addition
        if adds not in field_cache:
            if adds == inst.tm.allows_edge_addition:
                field_cache[adds] = inst.fields
            else:
                field_cache[adds] = {
                    n: receptive_field(inst.graph, n, inst.options.layers, tm_r)
                    for n in inst.targets
                }
        inst_r = CertInstance(
            graph=inst.graph,
            certs=inst.certs,
            fields=field_cache[adds],
            tm=tm_r,
            targets=inst.targets,
            options=inst.options,
        )
        t0 = time.perf_counter()
        res = certify(inst_r)
        naive = naive_certificate(inst_r)
        seconds = time.perf_counter() - t0
        results.append(
            SweepPoint(
                radius=int(radius),
                collective_count=res.certified_count,
                naive_count=naive,
                seconds=seconds,
                objective=res.objective_value,
                status=res.status,
            )
        )
    return results
