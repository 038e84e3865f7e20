"""Independent reference implementations used to validate the package.

Everything here is deliberately brute-force and shares no code with the
paths it checks: vertex enumeration for LPs, exhaustive assignment
enumeration for MILPs, exact binomial tails for confidence bounds,
exhaustive sample-space enumeration for region tables, and full lattice
scans for pareto fronts and collective certificates.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from collectcert.graph import AXES, BudgetVector
from collectcert.lp import CONTINUOUS


def enumerate_vertices_lp(p):
    """Minimize by enumerating candidate basic points of the box polytope.

    Candidates: every choice of k rows treated as equalities (k <= n)
    combined with n - k variables fixed at a bound. Feasible candidates
    cover all vertices, and the box is bounded, so the best feasible
    candidate is the optimum. Returns (status, objective).
    """
    n = p.num_variables
    rows = p.constraints
    lower, upper = p.bounds_arrays()
    c = p.objective_array()

    a_mat = np.zeros((len(rows), n))
    b_vec = np.zeros(len(rows))
    for i, row in enumerate(rows):
        for j, coef in row.coeffs:
            a_mat[i, j] = coef
        b_vec[i] = row.rhs

    def feasible(x):
        if np.any(x < lower - 1e-9) or np.any(x > upper + 1e-9):
            return False
        act = a_mat @ x
        for i, row in enumerate(rows):
            if row.sense == "<=" and act[i] > b_vec[i] + 1e-9:
                return False
            if row.sense == ">=" and act[i] < b_vec[i] - 1e-9:
                return False
            if row.sense == "=" and abs(act[i] - b_vec[i]) > 1e-9:
                return False
        return True

    best = math.inf
    found = False
    row_ids = range(len(rows))
    var_ids = range(n)
    for k in range(0, min(len(rows), n) + 1):
        for active_rows in itertools.combinations(row_ids, k):
            for free_vars in itertools.combinations(var_ids, k):
                fixed_vars = [j for j in var_ids if j not in free_vars]
                for pattern in itertools.product((0, 1), repeat=len(fixed_vars)):
                    x = np.empty(n)
                    for j, bit in zip(fixed_vars, pattern):
                        x[j] = upper[j] if bit else lower[j]
                    if k:
                        sub = a_mat[np.ix_(active_rows, free_vars)]
                        rhs = b_vec[list(active_rows)] - a_mat[
                            np.ix_(active_rows, fixed_vars)
                        ] @ x[fixed_vars]
                        det = np.linalg.det(sub) if sub.shape[0] == sub.shape[1] else 0.0
                        if abs(det) < 1e-9:
                            continue
                        x[list(free_vars)] = np.linalg.solve(sub, rhs)
                    if feasible(x):
                        found = True
                        val = float(c @ x) + p.objective_offset
                        if val < best:
                            best = val
    if not found:
        return "infeasible", math.nan
    return "optimal", best


def enumerate_milp(p):
    """Minimize by trying every assignment of the integer-kind variables,
    substituting them out and solving the continuous remainder by vertex
    enumeration."""
    from collectcert.lp import LinearProblem

    int_idx = [j for j, v in enumerate(p.variables) if v.kind != CONTINUOUS]
    cont_idx = [j for j, v in enumerate(p.variables) if v.kind == CONTINUOUS]
    remap = {j: i for i, j in enumerate(cont_idx)}
    lower, upper = p.bounds_arrays()
    best = math.inf
    found = False
    ranges = [range(int(lower[j]), int(upper[j]) + 1) for j in int_idx]
    for assignment in itertools.product(*ranges):
        fixed = dict(zip(int_idx, assignment))
        q = LinearProblem()
        for j in cont_idx:
            v = p.variables[j]
            q.add_variable(v.name, CONTINUOUS, lower[j], upper[j])
        feasible = True
        for row in p.constraints:
            coeffs = []
            shift = 0.0
            for j, c in row.coeffs:
                if j in fixed:
                    shift += c * fixed[j]
                else:
                    coeffs.append((remap[j], c))
            rhs = row.rhs - shift
            if not coeffs:
                if row.sense == "<=" and 0.0 > rhs + 1e-9:
                    feasible = False
                elif row.sense == ">=" and 0.0 < rhs - 1e-9:
                    feasible = False
                elif row.sense == "=" and abs(rhs) > 1e-9:
                    feasible = False
                continue
            q.add_constraint(coeffs, row.sense, rhs, name=row.name)
        if not feasible:
            continue
        offset = p.objective_offset + sum(
            c * fixed[j] for j, c in p.objective.items() if j in fixed
        )
        q.set_objective(
            {remap[j]: c for j, c in p.objective.items() if j not in fixed}, offset
        )
        if cont_idx:
            status, val = enumerate_vertices_lp(q)
            if status != "optimal":
                continue
        else:
            val = offset
        found = True
        best = min(best, val)
    if not found:
        return "infeasible", math.nan
    return "optimal", best


def _with_bounds(p, lower, upper):
    from collectcert.lp import LinearProblem

    q = LinearProblem()
    for j, v in enumerate(p.variables):
        q.add_variable(v.name, CONTINUOUS, lower[j], upper[j])
    for row in p.constraints:
        q.add_constraint(list(row.coeffs), row.sense, row.rhs, name=row.name)
    q.set_objective(dict(p.objective), p.objective_offset)
    return q


def binomial_tail_lower_bound(k: int, n: int, alpha: float) -> float:
    """Smallest p with Pr[Bin(n, p) >= k] >= alpha, by bisection over an
    exact log-space tail summation."""
    if k == 0:
        return 0.0

    def tail(p):
        if p <= 0.0:
            return 0.0
        if p >= 1.0:
            return 1.0
        log_p, log_q = math.log(p), math.log1p(-p)
        total = 0.0
        for i in range(k, n + 1):
            log_term = (
                math.lgamma(n + 1)
                - math.lgamma(i + 1)
                - math.lgamma(n - i + 1)
                + i * log_p
                + (n - i) * log_q
            )
            total += math.exp(log_term)
        return total

    lo, hi = 0.0, 1.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if tail(mid) >= alpha:
            hi = mid
        else:
            lo = mid
    return hi


def region_table_brute_force(budget: BudgetVector, sp):
    """Region probabilities by enumerating all 2^bits smoothing outcomes
    of the perturbed positions."""
    x_bits = [("add",)] * budget.x_add + [("del",)] * budget.x_del
    a_bits = [("add",)] * budget.a_add + [("del",)] * budget.a_del

    def marginal(bits, theta_add, theta_del, from_clean):
        counts = {}
        for pattern in itertools.product((0, 1), repeat=len(bits)):
            prob = 1.0
            agree = 0
            for (kind,), flip_agreement in zip(bits, pattern):
                # flip_agreement = 1 means the sampled bit AGREES with clean
                if kind == "add":  # clean 0, perturbed 1
                    if from_clean:
                        p_agree = 1.0 - theta_add  # stays 0
                    else:
                        p_agree = theta_del  # perturbed bit 1 flips back to 0
                else:  # deleted bit: clean 1, perturbed 0
                    if from_clean:
                        p_agree = 1.0 - theta_del
                    else:
                        p_agree = theta_add
                prob *= p_agree if flip_agreement else (1.0 - p_agree)
                agree += flip_agreement
            counts[agree] = counts.get(agree, 0.0) + prob
        return np.array([counts.get(q, 0.0) for q in range(len(bits) + 1)])

    clean_x = marginal(x_bits, sp.theta_x_add, sp.theta_x_del, True)
    pert_x = marginal(x_bits, sp.theta_x_add, sp.theta_x_del, False)
    clean_a = marginal(a_bits, sp.theta_a_add, sp.theta_a_del, True)
    pert_a = marginal(a_bits, sp.theta_a_add, sp.theta_a_del, False)
    return (
        np.outer(clean_x, clean_a).ravel(),
        np.outer(pert_x, pert_a).ravel(),
    )


def np_bound_via_lp(rt, p_n: float) -> float:
    """The worst-case-classifier value via the generic simplex solver."""
    from collectcert.lp import LinearProblem, solve_lp

    p = LinearProblem()
    idx = [p.add_variable(f"h_{i}", CONTINUOUS, 0.0, 1.0) for i in range(rt.p_clean.size)]
    p.add_constraint(
        [(idx[i], float(rt.p_clean[i])) for i in range(len(idx))], "=", float(p_n)
    )
    p.set_objective({idx[i]: float(rt.p_perturbed[i]) for i in range(len(idx))})
    sol = solve_lp(p)
    if sol.status != "optimal":
        raise AssertionError(f"reference LP not optimal: {sol.status}")
    return sol.objective


def brute_force_front(oracle, box: BudgetVector):
    """Minimal uncertified lattice points by scanning the whole box."""
    axes_ranges = [range(getattr(box, axis) + 1) for axis in AXES]
    uncertified = [
        pt
        for pt in itertools.product(*axes_ranges)
        if not oracle(BudgetVector.from_tuple(pt))
    ]
    front = [
        p
        for p in uncertified
        if not any(
            q != p and all(a <= b for a, b in zip(q, p)) for q in uncertified
        )
    ]
    return sorted(front)


def _compositions_up_to(total: int, length: int, caps):
    """All non-negative integer vectors of given length with sum <= total
    and vector[i] <= caps[i]."""
    out = []

    def rec(prefix, remaining):
        if len(prefix) == length:
            out.append(tuple(prefix))
            return
        cap = min(remaining, caps[len(prefix)])
        for v in range(cap + 1):
            rec(prefix + [v], remaining - v)

    rec([], total)
    return out


def _min_cover(edges):
    if not edges:
        return 0
    (u, v) = next(iter(edges))
    rest_u = frozenset(e for e in edges if u not in e)
    rest_v = frozenset(e for e in edges if v not in e)
    return 1 + min(_min_cover(rest_u), _min_cover(rest_v))


def brute_force_collective(inst) -> int:
    """Exact adversary: enumerate every admissible budget allocation.

    An allocation assigns per-node attribute flip counts and a set of
    flipped edge positions; admissibility follows the threat model
    (global boxes, per-node caps with both undirected endpoints charged,
    attacker-set existence via exact vertex cover). A target survives an
    allocation when no front point is dominated by its in-field mass.
    """
    g, tm = inst.graph, inst.tm
    gb = tm.global_budget
    n = g.num_nodes
    targets = inst.targets

    def caps(vec, glob):
        return [glob if vec is None else min(glob, vec[m]) for m in range(n)]

    xa_allocs = _compositions_up_to(gb.x_add, n, caps(tm.local_x_add, gb.x_add))
    xd_allocs = _compositions_up_to(gb.x_del, n, caps(tm.local_x_del, gb.x_del))

    del_positions = list(g.sorted_edges)
    add_positions = []
    if gb.a_add > 0:
        for i in range(n):
            start = 0 if g.directed else i + 1
            for j in range(start, n):
                if i != j and not g.has_edge(i, j):
                    add_positions.append((i, j))

    def local_edge_ok(subset, vec, positions_kind):
        if vec is None:
            return True
        tally = [0] * n
        for (i, j) in subset:
            tally[i] += 1
            if not g.directed:
                tally[j] += 1
        return all(tally[m] <= vec[m] for m in range(n))

    del_subsets = [
        s
        for r in range(min(gb.a_del, len(del_positions)) + 1)
        for s in itertools.combinations(del_positions, r)
        if local_edge_ok(s, tm.local_a_del, "del")
    ]
    add_subsets = [
        s
        for r in range(min(gb.a_add, len(add_positions)) + 1)
        for s in itertools.combinations(add_positions, r)
        if local_edge_ok(s, tm.local_a_add, "add")
    ]

    fronts = {
        t: np.array([p.as_tuple() for p in inst.certs[t].front], dtype=np.int64).reshape(
            -1, 4
        )
        for t in targets
    }
    node_masks = {t: inst.fields[t].node_indicator() for t in targets}

    def edge_mass(subset, t):
        fld = inst.fields[t]
        return sum(1 for (i, j) in subset if fld.contains_edge(i, j))

    cover_memo = {}

    def sigma_ok(touched, flips):
        if tm.sigma is None:
            return True
        key = (touched, flips)
        hit = cover_memo.get(key)
        if hit is None:
            uncovered = frozenset(
                (i, j) for (i, j) in flips if i not in touched and j not in touched
            )
            hit = len(touched) + _min_cover(uncovered) <= tm.sigma
            cover_memo[key] = hit
        return hit

    best = len(targets)
    xa_arr = np.array(xa_allocs, dtype=np.int64).reshape(len(xa_allocs), n)
    xd_arr = np.array(xd_allocs, dtype=np.int64).reshape(len(xd_allocs), n)
    for xa in xa_arr:
        for xd in xd_arr:
            touched = frozenset(np.nonzero(xa + xd)[0].tolist())
            for ds in del_subsets:
                for as_ in add_subsets:
                    flips = frozenset(ds) | frozenset(as_)
                    if not sigma_ok(touched, flips):
                        continue
                    survived = 0
                    for t in targets:
                        mask = node_masks[t]
                        mass = (
                            int(xa[mask].sum()),
                            int(xd[mask].sum()),
                            edge_mass(as_, t),
                            edge_mass(ds, t),
                        )
                        rows = fronts[t]
                        attacked = bool(
                            rows.size and np.any(np.all(rows <= np.array(mass), axis=1))
                        )
                        if not attacked:
                            survived += 1
                    if survived < best:
                        best = survived
                        if best == 0:
                            return 0
    return best
