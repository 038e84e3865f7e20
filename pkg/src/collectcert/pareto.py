"""Compact base-certificate representation over the budget lattice.

A base certificate is summarized by the componentwise-minimal budgets at
which robustness cannot be certified; a queried budget is uncertified
exactly when some front point is dominated by it. Fronts are extracted by
flood-filling the certified region from the origin and thinning the
uncertified boundary to its minimal antichain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import InputError, MonotonicityError
from .graph import BudgetVector

_PACK_LIMIT = 0xFFFF


@dataclass(frozen=True)
class BaseCertificate:
    """Pareto front of uncertifiable budgets for one prediction.

    An empty front means the prediction is certified everywhere inside
    budget_box. The front is stored sorted for deterministic output.
    """

    node: int
    front: tuple
    budget_box: BudgetVector

    def __post_init__(self):
        rows = sorted(self.front, key=lambda b: b.as_tuple())
        object.__setattr__(self, "front", tuple(rows))
        for b in rows:
            if b.is_zero():
                raise InputError("origin uncertifiable: (0,0,0,0) cannot be a front point")
            if not b.covered_by(self.budget_box):
                raise InputError(f"front point {b.as_tuple()} lies outside the budget box")
        for i, a in enumerate(rows):
            for j, b in enumerate(rows):
                if i != j and a.covered_by(b):
                    raise InputError(
                        f"dominated front point: {a.as_tuple()} <= {b.as_tuple()}"
                    )

    def is_uncertified(self, budget: BudgetVector) -> bool:
        """True iff some front point is componentwise <= budget."""
        return any(p.covered_by(budget) for p in self.front)


def _pack(p) -> int:
    return p[0] | (p[1] << 16) | (p[2] << 32) | (p[3] << 48)


def compute_front(oracle, box: BudgetVector, node: int = -1) -> BaseCertificate:
    """Flood-fill the certified lattice region and extract the front.

    ``oracle`` maps a BudgetVector to a certified flag and must be
    monotone (shrinking a certified budget keeps it certified); violations
    observed during the fill abort with MonotonicityError. The fill is
    iterative with an explicit stack and memoizes oracle answers, so each
    lattice point is evaluated at most once.
    """
    box_t = box.as_tuple()
    if any(c > _PACK_LIMIT for c in box_t):
        raise InputError(f"budget box components must not exceed {_PACK_LIMIT}")

    memo: dict[int, bool] = {}

    def query(point) -> bool:
        key = _pack(point)
        cached = memo.get(key)
        if cached is None:
            cached = bool(oracle(BudgetVector.from_tuple(point)))
            memo[key] = cached
        return cached

    origin = (0, 0, 0, 0)
    if not query(origin):
        raise MonotonicityError("origin uncertified: oracle((0,0,0,0)) must be true")

    collected: set = set()
    stack = [origin]
    seen = {_pack(origin)}
    while stack:
        point = stack.pop()
        # point is certified; any uncertified point below it breaks Eq.-style
        # monotonicity of the oracle
        for d in range(4):
            if point[d] > 0:
                below = point[:d] + (point[d] - 1,) + point[d + 1 :]
                if memo.get(_pack(below)) is False:
                    raise MonotonicityError(
                        f"oracle not monotone: {below} uncertified below certified {point}"
                    )
        for d in range(4):
            if point[d] >= box_t[d]:
                continue
            succ = point[:d] + (point[d] + 1,) + point[d + 1 :]
            key = _pack(succ)
            if key in seen:
                continue
            seen.add(key)
            if query(succ):
                stack.append(succ)
            else:
                collected.add(succ)
                for e in range(4):
                    if succ[e] < box_t[e]:
                        above = succ[:e] + (succ[e] + 1,) + succ[e + 1 :]
                        if memo.get(_pack(above)) is True:
                            raise MonotonicityError(
                                f"oracle not monotone: {succ} uncertified below "
                                f"certified {above}"
                            )

    # thin to the minimal antichain: a collected point survives iff no
    # other collected point is componentwise smaller-or-equal
    points = sorted(collected)
    front = []
    for p in points:
        dominated = any(
            q != p and all(qc <= pc for qc, pc in zip(q, p)) for q in points
        )
        if not dominated:
            front.append(BudgetVector.from_tuple(p))
    return BaseCertificate(node=node, front=tuple(front), budget_box=box)


def smallest_uncertifiable_radius(oracle, axis: str, r_max: int):
    """Least single-axis radius the oracle cannot certify, or None.

    Binary search over [0, r_max]; assumes the oracle is monotone along
    the axis.
    """
    if r_max < 0:
        raise ValueError("r_max must be >= 0")

    def certified(r: int) -> bool:
        return bool(oracle(BudgetVector().with_axis(axis, r)))

    if certified(r_max):
        return None
    if not certified(0):
        return 0
    lo, hi = 0, r_max  # certified at lo, uncertified at hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if certified(mid):
            lo = mid
        else:
            hi = mid
    return hi


def save_fronts(certs, path) -> None:
    """Persist certificates; nodes with empty fronts are kept explicitly
    so that a round trip reproduces the input exactly."""
    certs = list(certs)
    if not certs:
        raise InputError("cannot save an empty certificate list")
    box = certs[0].budget_box
    if any(c.budget_box != box for c in certs):
        raise InputError("all certificates in one file must share a budget box")
    doc = {
        "budget_box": list(box.as_tuple()),
        "fronts": {
            str(c.node): [list(p.as_tuple()) for p in c.front]
            for c in sorted(certs, key=lambda c: c.node)
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_fronts(path) -> dict:
    """Load certificates as {node: BaseCertificate}.

    Nodes absent from the file are to be treated as empty fronts
    (certified everywhere in the box); use ``get_certificate``.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"fronts file not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"fronts file {path}: parse error at line {e.lineno}: {e.msg}")
    if not isinstance(doc, dict) or "budget_box" not in doc or "fronts" not in doc:
        raise InputError(f"fronts file {path}: expected fields 'budget_box' and 'fronts'")
    try:
        box = BudgetVector.from_tuple(doc["budget_box"])
    except (TypeError, IndexError, InputError) as e:
        raise InputError(f"fronts file {path}: bad budget_box: {e}")
    out = {}
    for node_str, rows in doc["fronts"].items():
        try:
            node = int(node_str)
            front = tuple(BudgetVector.from_tuple(r) for r in rows)
            out[node] = BaseCertificate(node=node, front=front, budget_box=box)
        except (TypeError, IndexError, InputError) as e:
            raise InputError(f"fronts file {path}, node {node_str}: {e}")
    return out


def get_certificate(fronts: dict, node: int, box: BudgetVector) -> BaseCertificate:
    """Certificate for a node, empty-front when the node is absent."""
    cert = fronts.get(node)
    if cert is not None:
        return cert
    return BaseCertificate(node=node, front=(), budget_box=box)
