"""Hot numeric kernels with numba and pure-numpy variants.

The jitted variant is selected by default; ``COLLECTCERT_NO_NUMBA=1``
switches every public alias to the numpy implementation. Both variants
of each kernel are importable for benchmarking.
"""

from __future__ import annotations

import numpy as np

from ._accel import JIT_ENABLED, njit


def predict_samples_attr_numpy(x_block, uniforms, theta_add, theta_del):
    """Smoothed class predictions for one node under attribute-only noise.

    x_block: (nb, C) uint8 clean bits of the score-relevant columns within
    the node's receptive field. uniforms: (S, nb, C) draws in [0, 1). A bit
    flips when its draw falls below theta_del (set bits) or theta_add
    (clear bits). Returns per-sample argmax class, lowest id on ties.
    """
    flip_p = np.where(x_block == 1, theta_del, theta_add)
    flips = uniforms < flip_p[None, :, :]
    values = (x_block[None, :, :] == 1) ^ flips
    scores = values.sum(axis=1)
    return np.argmax(scores, axis=1).astype(np.int64)


@njit(cache=True, nogil=True)
def _predict_samples_attr_jit(x_block, uniforms, theta_add, theta_del):
    n_samples, nb, n_classes = uniforms.shape
    out = np.empty(n_samples, dtype=np.int64)
    for s in range(n_samples):
        best_c = 0
        best_score = -1
        for c in range(n_classes):
            score = 0
            for m in range(nb):
                bit = x_block[m, c]
                if bit == 1:
                    flipped = uniforms[s, m, c] < theta_del
                else:
                    flipped = uniforms[s, m, c] < theta_add
                if (bit == 1) != flipped:
                    score += 1
            if score > best_score:
                best_score = score
                best_c = c
        out[s] = best_c
    return out


def predict_samples_attr_jit(x_block, uniforms, theta_add, theta_del):
    return _predict_samples_attr_jit(
        np.ascontiguousarray(x_block),
        np.ascontiguousarray(uniforms),
        float(theta_add),
        float(theta_del),
    )


# Blocking events for a simplex step of size t >= 0. Each basic variable i
# changes at rate direction[i]. Variables inside their bounds block at the
# bound they move toward; a variable currently outside its bounds blocks
# when it re-enters the violated bound (the phase-1 kink) and produces no
# event when moving further out (its cost is already in the composite
# gradient). Returns (t, blocking_row, hits_lower); row -1 means nothing
# blocks before step_cap.


def ratio_test_numpy(direction, values, lowers, uppers, step_cap):
    eps = 1e-11
    below = values < lowers - eps
    above = values > uppers + eps
    up = direction > eps
    down = direction < -eps
    cand_t = np.full(values.shape, np.inf)
    cand_low = np.zeros(values.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        sel = up & below
        cand_t[sel] = (lowers[sel] - values[sel]) / direction[sel]
        cand_low[sel] = True
        sel = up & ~below & ~above
        cand_t[sel] = (uppers[sel] - values[sel]) / direction[sel]
        sel = down & above
        cand_t[sel] = (uppers[sel] - values[sel]) / direction[sel]
        sel = down & ~below & ~above
        cand_t[sel] = (lowers[sel] - values[sel]) / direction[sel]
        cand_low[sel] = True
    cand_t = np.maximum(cand_t, 0.0)
    t_best = float(step_cap)
    row_best = -1
    lower_best = True
    finite = np.nonzero(cand_t < t_best - 1e-12)[0]
    if finite.size:
        t_min = cand_t[finite].min()
        ties = finite[cand_t[finite] <= t_min + 1e-12]
        idx = int(ties[0])
        t_best = float(cand_t[idx])
        row_best = idx
        lower_best = bool(cand_low[idx])
    return t_best, row_best, lower_best


@njit(cache=True, nogil=True)
def _ratio_test_jit(direction, values, lowers, uppers, step_cap):
    eps = 1e-11
    t_best = step_cap
    row_best = -1
    lower_best = True
    m = direction.shape[0]
    for i in range(m):
        d = direction[i]
        below = values[i] < lowers[i] - eps
        above = values[i] > uppers[i] + eps
        if d > eps:
            if above:
                continue
            if below:
                t = (lowers[i] - values[i]) / d
                low = True
            else:
                t = (uppers[i] - values[i]) / d
                low = False
        elif d < -eps:
            if below:
                continue
            if above:
                t = (uppers[i] - values[i]) / d
                low = False
            else:
                t = (lowers[i] - values[i]) / d
                low = True
        else:
            continue
        if t < 0.0:
            t = 0.0
        if t < t_best - 1e-12:
            t_best = t
            row_best = i
            lower_best = low
    return t_best, row_best, lower_best


def ratio_test_jit(direction, values, lowers, uppers, step_cap):
    t, row, low = _ratio_test_jit(direction, values, lowers, uppers, float(step_cap))
    return float(t), int(row), bool(low)


if JIT_ENABLED:
    predict_samples_attr = predict_samples_attr_jit
    ratio_test = ratio_test_jit
else:
    predict_samples_attr = predict_samples_attr_numpy
    ratio_test = ratio_test_numpy
