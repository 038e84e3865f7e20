"""Randomized-smoothing base certificate for sparse binary graph data.

Bits are flipped independently with value-dependent probabilities. The
certificate partitions sample space by the number of sampled bits that
agree with the clean graph but differ from the perturbed one; within each
such region the clean/perturbed likelihood ratio is constant, so the
worst-case smoothed classifier is found by a greedy fill over regions.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import betainc

from . import _kernels
from .errors import InputError
from .graph import BudgetVector, Graph, hop_distances_to

#: attribute-only certification defaults (adjacency noise disabled)
ATTRIBUTE_SMOOTHING_DEFAULTS = dict(
    theta_x_add=0.002, theta_x_del=0.6, theta_a_add=0.0, theta_a_del=0.0
)

_LOG_SPACE_BIT_THRESHOLD = 50
_SAMPLE_CHUNK = 1 << 14


@dataclass(frozen=True)
class SmoothingParams:
    """Per-type flip probabilities of the smoothing distribution."""

    theta_x_add: float = 0.0
    theta_x_del: float = 0.0
    theta_a_add: float = 0.0
    theta_a_del: float = 0.0

    def __post_init__(self):
        for name in ("theta_x_add", "theta_x_del", "theta_a_add", "theta_a_del"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InputError(f"{name} must lie in [0, 1], got {v}")

    @property
    def attribute_only(self) -> bool:
        return self.theta_a_add == 0.0 and self.theta_a_del == 0.0

    @property
    def noiseless(self) -> bool:
        return (
            self.theta_x_add == self.theta_x_del
            == self.theta_a_add == self.theta_a_del == 0.0
        )


def load_smoothing_params(path) -> SmoothingParams:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"smoothing-params file not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"smoothing-params file {path}: parse error at line {e.lineno}: {e.msg}")
    try:
        return SmoothingParams(
            float(doc["theta_x_add"]), float(doc["theta_x_del"]),
            float(doc["theta_a_add"]), float(doc["theta_a_del"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"smoothing-params file {path}: {e}")


@dataclass(frozen=True, eq=False)
class RegionTable:
    """Constant-likelihood-ratio regions for one perturbation budget.

    Row (q_x, q_a) collects the samples with exactly q_x perturbed
    attribute bits and q_a perturbed adjacency bits agreeing with the
    clean graph. Rows are ordered q_x-major, q_a-minor.
    """

    budget: BudgetVector
    q_x: np.ndarray
    q_a: np.ndarray
    p_clean: np.ndarray
    p_perturbed: np.ndarray

    @cached_property
    def greedy_order(self) -> np.ndarray:
        """Row indices by descending clean/perturbed ratio, ties by index."""
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.p_perturbed > 0.0, self.p_clean / self.p_perturbed, np.inf)
        return np.lexsort((np.arange(ratio.size), -ratio))


def _agreement_pmf(n_add: int, n_del: int, pi_add: float, pi_del: float) -> np.ndarray:
    """Distribution of the number of agreeing bits among n_add + n_del
    perturbed bits, where each bit agrees independently (pi_add for bits
    the adversary added, pi_del for bits it deleted).

    A dynamic program over bits; accumulation switches to log space above
    50 bits to avoid underflow of extreme tails.
    """
    total = n_add + n_del
    probs = [pi_add] * n_add + [pi_del] * n_del
    if total <= _LOG_SPACE_BIT_THRESHOLD:
        pmf = np.zeros(total + 1)
        pmf[0] = 1.0
        for nbits, pi in enumerate(probs):
            nxt = pmf * (1.0 - pi)
            nxt[1 : nbits + 2] += pmf[: nbits + 1] * pi
            pmf = nxt
        return pmf
    log_pmf = np.full(total + 1, -np.inf)
    log_pmf[0] = 0.0
    for nbits, pi in enumerate(probs):
        with np.errstate(divide="ignore"):
            log_stay = log_pmf + (math.log(1.0 - pi) if pi < 1.0 else -np.inf)
            shifted = np.full(total + 1, -np.inf)
            if pi > 0.0:
                shifted[1 : nbits + 2] = log_pmf[: nbits + 1] + math.log(pi)
        log_pmf = np.logaddexp(log_stay, shifted)
    return np.exp(log_pmf)


def region_distribution(budget: BudgetVector, sp: SmoothingParams) -> RegionTable:
    """Region probabilities under clean-centred and perturbed-centred smoothing.

    A bit the adversary flipped 0->1 agrees with the clean graph with
    probability 1 - theta_add when smoothing the clean graph and theta_del
    when smoothing the perturbed one; a bit flipped 1->0 agrees with
    probability 1 - theta_del and theta_add respectively. The joint table
    is the outer product of the attribute and adjacency marginals; which
    specific bits were flipped never matters.
    """
    if budget.x_add + budget.x_del > 0 and sp.theta_x_add + sp.theta_x_del == 1.0:
        raise InputError(
            "degenerate attribute smoothing: theta_x_add + theta_x_del = 1 "
            "makes every likelihood ratio 1 and the certificate vacuous"
        )
    if budget.a_add + budget.a_del > 0 and sp.theta_a_add + sp.theta_a_del == 1.0:
        raise InputError(
            "degenerate adjacency smoothing: theta_a_add + theta_a_del = 1 "
            "makes every likelihood ratio 1 and the certificate vacuous"
        )
    clean_x = _agreement_pmf(budget.x_add, budget.x_del, 1.0 - sp.theta_x_add, 1.0 - sp.theta_x_del)
    pert_x = _agreement_pmf(budget.x_add, budget.x_del, sp.theta_x_del, sp.theta_x_add)
    clean_a = _agreement_pmf(budget.a_add, budget.a_del, 1.0 - sp.theta_a_add, 1.0 - sp.theta_a_del)
    pert_a = _agreement_pmf(budget.a_add, budget.a_del, sp.theta_a_del, sp.theta_a_add)
    kx, ka = clean_x.size, clean_a.size
    q_x = np.repeat(np.arange(kx), ka)
    q_a = np.tile(np.arange(ka), kx)
    return RegionTable(
        budget=budget,
        q_x=q_x,
        q_a=q_a,
        p_clean=np.outer(clean_x, clean_a).ravel(),
        p_perturbed=np.outer(pert_x, pert_a).ravel(),
    )


def np_lower_bound(rt: RegionTable, p_n: float) -> float:
    """Worst-case probability that a smoothed classifier keeps its class.

    Optimum of: minimize sum H_r * p_perturbed(r) subject to
    sum H_r * p_clean(r) = p_n, 0 <= H_r <= 1. Solved greedily by filling
    rows in descending likelihood-ratio order (perturbed-mass-free rows
    first), fractionally on the boundary row.
    """
    if not 0.0 <= p_n <= 1.0:
        raise ValueError(f"p_n must lie in [0, 1], got {p_n}")
    remaining = p_n
    lam = 0.0
    for idx in rt.greedy_order:
        if remaining <= 1e-15:
            break
        pc = rt.p_clean[idx]
        if pc <= 0.0:
            continue
        take = min(1.0, remaining / pc)
        lam += take * rt.p_perturbed[idx]
        remaining -= take * pc
    return lam


@lru_cache(maxsize=65536)
def _cached_region_table(budget_tuple, sp: SmoothingParams) -> RegionTable:
    return region_distribution(BudgetVector.from_tuple(budget_tuple), sp)


def is_certified(budget: BudgetVector, p_n: float, sp: SmoothingParams) -> bool:
    """Membership oracle: is the prediction provably stable at this budget?

    The zero budget is always certified (the adversary cannot change the
    input at all); otherwise robustness requires the worst-case retained
    probability to exceed one half.
    """
    if budget.is_zero():
        return True
    rt = _cached_region_table(budget.as_tuple(), sp)
    return np_lower_bound(rt, p_n) > 0.5


def clopper_pearson_lower(k: int, n: int, alpha: float) -> float:
    """One-sided Clopper-Pearson lower confidence bound for k/n successes.

    Solves I_p(k, n - k + 1) = alpha for p by bisection to absolute
    tolerance 1e-10. k = 0 gives 0; k = n gives alpha ** (1/n).
    """
    if not (isinstance(k, (int, np.integer)) and isinstance(n, (int, np.integer))):
        raise ValueError("k and n must be integers")
    if not 0 <= k <= n or n <= 0:
        raise ValueError(f"need 0 <= k <= n with n >= 1, got k={k}, n={n}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if k == 0:
        return 0.0
    if k == n:
        return float(alpha ** (1.0 / n))
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if betainc(k, n - k + 1, mid) < alpha:
            lo = mid
        else:
            hi = mid
    return lo


def _decode_offdiag(idx: int, n: int) -> tuple[int, int]:
    i, r = divmod(idx, n - 1)
    return i, r + (r >= i)


def _decode_triangular(idx: int, n: int) -> tuple[int, int]:
    # offset(i) = i*(n-1) - i*(i-1)/2 positions precede row i
    lo, hi = 0, n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid * (n - 1) - mid * (mid - 1) // 2 <= idx:
            lo = mid
        else:
            hi = mid - 1
    i = lo
    j = i + 1 + (idx - (i * (n - 1) - i * (i - 1) // 2))
    return i, j


def _geometric_hits(rng, space: int, prob: float):
    """Indices of independent Bernoulli(prob) hits over range(space),
    visited by geometric gap skipping so cost tracks the expected number
    of hits rather than the space size."""
    if prob <= 0.0 or space <= 0:
        return
    if prob >= 1.0:
        yield from range(space)
        return
    pos = -1
    while True:
        pos += int(rng.geometric(prob))
        if pos >= space:
            return
        yield pos


def _sample_graph_with_rng(g: Graph, sp: SmoothingParams, rng) -> Graph:
    n, d = g.num_nodes, g.num_features
    # draw order is fixed: attr deletions, attr additions, edge deletions,
    # edge additions -- part of the determinism contract
    attrs = set()
    present_attrs = sorted(g.attributes)
    if present_attrs:
        keep = rng.random(len(present_attrs)) >= sp.theta_x_del
        attrs.update(a for a, kept in zip(present_attrs, keep) if kept)
    present_positions = {m * d + f for (m, f) in g.attributes}
    for idx in _geometric_hits(rng, n * d, sp.theta_x_add):
        if idx not in present_positions:
            attrs.add((idx // d, idx % d))

    edges = set()
    present_edges = sorted(g.edges)
    if present_edges:
        keep = rng.random(len(present_edges)) >= sp.theta_a_del
        edges.update(e for e, kept in zip(present_edges, keep) if kept)
    space = n * (n - 1) if g.directed else n * (n - 1) // 2
    decode = _decode_offdiag if g.directed else _decode_triangular
    for idx in _geometric_hits(rng, space, sp.theta_a_add):
        pos = decode(idx, n)
        if pos not in g.edges:
            edges.add(pos)

    return Graph(
        num_nodes=n,
        num_features=d,
        directed=g.directed,
        edges=frozenset(edges),
        attributes=frozenset(attrs),
        labels=g.labels,
    )


def sample_graph(g: Graph, sp: SmoothingParams, seed: int) -> Graph:
    """One draw from the smoothing distribution, deterministic in seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return _sample_graph_with_rng(g, sp, rng)


def demo_predict(g: Graph, n: int, k: int) -> int:
    """Deterministic k-hop score-sum classifier.

    Class c's score is the number of set bits in attribute column c over
    the nodes within k hops of n (n included); the lowest class id among
    the maximal scores wins. Classes read attribute columns 0..C-1, so the
    receptive field is exactly the k-hop neighborhood.
    """
    if k < 1:
        raise ValueError("layer count k must be >= 1")
    if not (0 <= n < g.num_nodes):
        raise ValueError(f"node {n} out of range")
    c = g.num_classes()
    if c > g.num_features:
        raise InputError(f"class count {c} exceeds feature count {g.num_features}")
    dist = hop_distances_to(g, n)
    members = (dist >= 0) & (dist <= k)
    scores = g.attribute_matrix[members, :c].sum(axis=0)
    return int(np.argmax(scores))


@dataclass(frozen=True)
class SmoothedPrediction:
    """Majority class of a smoothed prediction with a certified lower
    bound on its probability."""

    node: int
    majority_class: int
    p_lower: float

    def __post_init__(self):
        if not 0.0 <= self.p_lower <= 1.0:
            raise InputError(f"p_lower must lie in [0, 1], got {self.p_lower}")


def _node_rng(seed: int, node: int, round_idx: int):
    # splittable scheme: one child stream per (node, sampling round)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(node, round_idx)))


def _sample_classes_attr_only(g, sp, k, node, n_samples, rng, num_classes):
    dist = hop_distances_to(g, node)
    members = np.nonzero((dist >= 0) & (dist <= k))[0]
    x_block = np.ascontiguousarray(g.attribute_matrix[members, :num_classes])
    counts = np.zeros(num_classes, dtype=np.int64)
    done = 0
    while done < n_samples:
        chunk = min(_SAMPLE_CHUNK, n_samples - done)
        uniforms = rng.random((chunk, x_block.shape[0], num_classes))
        preds = _kernels.predict_samples_attr(x_block, uniforms, sp.theta_x_add, sp.theta_x_del)
        counts += np.bincount(preds, minlength=num_classes)
        done += chunk
    return counts


def _sample_classes_general(g, sp, k, node, n_samples, rng, num_classes):
    counts = np.zeros(num_classes, dtype=np.int64)
    for _ in range(n_samples):
        sampled = _sample_graph_with_rng(g, sp, rng)
        counts[demo_predict(sampled, node, k)] += 1
    return counts


def estimate_predictions(
    g: Graph,
    sp: SmoothingParams,
    k: int,
    n_class_samples: int,
    n_prob_samples: int,
    alpha: float,
    seed: int,
    nodes=None,
    workers: int = 1,
) -> list:
    """Monte-Carlo smoothed predictions with Clopper-Pearson lower bounds.

    Per node: the majority class comes from n_class_samples evaluations of
    the smoothed demo classifier, the probability bound from an independent
    second round of n_prob_samples, at Bonferroni-corrected significance
    alpha / N. Every node owns independent sample streams derived from
    (seed, node, round), so results do not depend on execution order or on
    the degree of parallelism.
    """
    if n_class_samples < 1 or n_prob_samples < 1:
        raise ValueError("sample counts must be >= 1")
    if nodes is None:
        nodes = range(g.num_nodes)
    nodes = [int(n) for n in nodes]
    alpha_corrected = alpha / g.num_nodes

    def run(node):
        num_classes = g.num_classes()
        sampler = _sample_classes_attr_only if sp.attribute_only else _sample_classes_general
        counts = sampler(g, sp, k, node, n_class_samples, _node_rng(seed, node, 0), num_classes)
        majority = int(np.argmax(counts))
        counts2 = sampler(g, sp, k, node, n_prob_samples, _node_rng(seed, node, 1), num_classes)
        p_lower = clopper_pearson_lower(int(counts2[majority]), n_prob_samples, alpha_corrected)
        return SmoothedPrediction(node=node, majority_class=majority, p_lower=p_lower)

    if workers <= 1:
        return [run(n) for n in nodes]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, nodes))


def save_predictions(preds, path) -> None:
    doc = [
        {"node": p.node, "class": p.majority_class, "p_lower": p.p_lower}
        for p in preds
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_predictions(path) -> list:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"predictions file not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"predictions file {path}: parse error at line {e.lineno}: {e.msg}")
    if not isinstance(doc, list):
        raise InputError(f"predictions file {path}: expected a JSON array")
    out = []
    for i, row in enumerate(doc):
        try:
            out.append(
                SmoothedPrediction(
                    node=int(row["node"]),
                    majority_class=int(row["class"]),
                    p_lower=float(row["p_lower"]),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"predictions file {path}, entry {i}: {e}")
    return out
