"""Independent oracles shared across test modules: central finite differences
for gradients and small random model/batch setups."""

import numpy as np

from tridet import learner


def finite_diff_gradients(loss_fn, model, h=1e-5):
    """Central-difference gradients of loss_fn(model) w.r.t. every parameter.

    Perturbs the model's arrays in place and restores them; returns
    (grads_w, grads_b) mirroring the model's parameter lists.
    """
    out = []
    for store in (model.weights, model.biases):
        grads = []
        for arr in store:
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                hi = loss_fn(model)
                arr[idx] = orig - h
                lo = loss_fn(model)
                arr[idx] = orig
                g[idx] = (hi - lo) / (2.0 * h)
            grads.append(g)
        out.append(grads)
    return out[0], out[1]


def max_gradient_error(analytic, numeric, floor=1e-3):
    """Worst relative disagreement; denominators floored so near-zero entries
    are compared absolutely (at floor * rel_tol)."""
    worst = 0.0
    for a, f in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def tri_selection_oracle(pool_ids, probs, theta, k):
    """Exhaustive re-derivation of one tri-training round.

    probs: length-3 list of (n, C) clamped pool probabilities for the current
    models. Returns, per target model i, the expected candidate list of
    (example_id, class_index, score, label_tuple) tuples: the θ-gate on both
    peers, the peer-average score, per-class sort by (-score, id), top k.
    """
    out = []
    n, C = probs[0].shape
    for i in range(3):
        j, h = [x for x in range(3) if x != i]
        expected = []
        for c in range(C):
            cands = []
            for r in range(n):
                if probs[j][r, c] > theta[c] and probs[h][r, c] > theta[c]:
                    label = tuple(
                        1 if (cc == c or (probs[j][r, cc] > theta[cc]
                                          and probs[h][r, cc] > theta[cc])) else 0
                        for cc in range(C))
                    score = 0.5 * (probs[j][r, c] + probs[h][r, c])
                    cands.append((pool_ids[r], c, score, label))
            cands.sort(key=lambda t: (-t[2], t[0]))
            expected.extend(cands[:k])
        out.append(expected)
    return out


def random_small_setup(rng, max_hidden=2, max_width=8, max_batch=6):
    """A random small model plus a matching batch: (model, X, Y, weights)."""
    d = int(rng.integers(2, 6))
    C = int(rng.integers(1, 4))
    depth = int(rng.integers(0, max_hidden + 1))
    hidden = tuple(int(rng.integers(2, max_width + 1)) for _ in range(depth))
    config = learner.ModelConfig(input_dim=d, hidden_layers=hidden, num_classes=C,
                                 seed=int(rng.integers(0, 2 ** 31)))
    model = learner.init_model(config)
    for arr in (*model.weights, *model.biases):
        arr += rng.normal(scale=0.3, size=arr.shape)
    n = int(rng.integers(1, max_batch + 1))
    X = rng.normal(size=(n, d))
    Y = rng.integers(0, 2, size=(n, C)).astype(np.float64)
    w = rng.uniform(0.5, 4.0, size=C)
    return model, X, Y, w
