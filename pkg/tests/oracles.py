"""Independent scalar-loop oracles.

Everything here is deliberately written with plain Python loops, complex
scalars and math functions, sharing no array code with the package, so
the vectorized implementations are checked against a separate derivation.
"""

import math


def triple_score_loop(e_s, e_p, e_o, e_t):
    """Re(sum_c s_c * (p_c * t_c) * conj(o_c)) via per-coordinate complex scalars."""
    acc = 0.0
    for a, b, c, d in zip(e_s, e_p, e_o, e_t):
        acc += (complex(a) * (complex(b) * complex(d)) * complex(c).conjugate()).real
    return acc


def softmax_loop(logits):
    m = max(logits)
    exps = [math.exp(x - m) for x in logits]
    z = sum(exps)
    return [e / z for e in exps]


def attention_loop(flavor, memory, query, w, v):
    """Single-query attention: returns (summary list, weight list).

    memory: list of d-lists; query: d-list; w: list of rows; v: d-list.
    """
    d = len(query)
    logits = []
    for row in memory:
        if flavor == "cat":
            x = list(query) + list(row)
        elif flavor == "dot":
            x = [query[c] * row[c] for c in range(d)]
        elif flavor == "minus":
            x = [query[c] - row[c] for c in range(d)]
        else:
            raise ValueError(flavor)
        h = 0.0
        for e in range(len(v)):
            pre = sum(w[e][c] * x[c] for c in range(len(x)))
            h += v[e] * math.tanh(pre)
        logits.append(h)
    alpha = softmax_loop(logits)
    summary = [
        sum(alpha[j] * memory[j][c] for j in range(len(memory)))
        for c in range(d)
    ]
    return summary, alpha


def multiway_row_loop(query, memory, params):
    """One output row of a multiway direction, composed from attention_loop.

    params: dict flavor -> (w rows, v list) plus "w_out" rows; flavors in
    params["branches"] order.
    """
    features = []
    for flavor in params["branches"]:
        w, v = params[flavor]
        summary, _ = attention_loop(flavor, memory, query, w, v)
        features.extend(list(query))
        features.extend(summary)
    w_out = params["w_out"]
    return [sum(w_out[e][c] * features[c] for c in range(len(features)))
            for e in range(len(w_out))]


def fuse_loop(q_final_rows, s_hat_rows, w_s, b_s, w_g, adaptive=True):
    """Gate fusion per token via scalar loops."""
    d = len(b_s)
    m = len(s_hat_rows)
    mu = [sum(row[c] for row in s_hat_rows) / m for c in range(d)]
    s_tilde = [math.tanh(sum(w_s[e][c] * mu[c] for c in range(d)) + b_s[e]) for e in range(d)]
    out = []
    gates = []
    for q in q_final_rows:
        if adaptive:
            z = sum(w_g[c] * q[c] * s_tilde[c] for c in range(d))
            g = 1.0 / (1.0 + math.exp(-z))
        else:
            g = 0.5
        gates.append(g)
        out.append([g * q[c] + (1.0 - g) * s_tilde[c] for c in range(d)])
    return out, gates


def rank_by_sort(scores):
    """1-based rank per index under descending score, ties by ascending index."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    ranks = [0] * len(scores)
    for pos, idx in enumerate(order):
        ranks[idx] = pos + 1
    return ranks


def select_by_sort(scored, k):
    """Exhaustive sort-plus-prefix selection oracle.

    scored: list of (index, score); returns the first-k indices under
    descending score with ascending-index tie-break.
    """
    order = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    return [idx for idx, _ in order[:k]]


def finite_difference(f, arr, eps=1e-5):
    """Central finite-difference gradient of scalar f() w.r.t. arr, in place."""
    import numpy as np

    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def max_rel_error(analytic, numeric):
    """max |a - n| / max(|a| + |n|, 1e-8) over all coordinates."""
    import numpy as np

    a = np.asarray(analytic).reshape(-1)
    n = np.asarray(numeric).reshape(-1)
    denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
    return float(np.max(np.abs(a - n) / denom))


def scaled_rel_error(analytic, numeric):
    """max |a - n| normalized by the tensor's gradient scale.

    Central differences at eps=1e-5 carry an absolute roundoff floor of
    about machine_eps * |loss| / (2 * eps); coordinates far below the
    tensor's gradient magnitude sit under that floor, so the elementwise
    ratio is meaningless there.  Normalizing by max(|a|_inf, |n|_inf)
    measures every error against the gradient's scale instead, which still
    flags sign or formula errors anywhere in the tensor.
    """
    import numpy as np

    a = np.asarray(analytic).reshape(-1)
    n = np.asarray(numeric).reshape(-1)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(n), initial=0.0), 1e-8)
    return float(np.max(np.abs(a - n)) / scale)
