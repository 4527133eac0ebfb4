"""Numpy reference implementations of the complex scoring kernels.

All kernels work on the split real/imaginary representation: a complex
vector v is passed as two float64 arrays (v.real, v.imag).  The score of
a fact is the real part of the coordinate-wise triple product with the
object conjugated,

    Re(sum_c  s_c * (p_c * t_c) * conj(o_c)),

and the two sweep flavors score one fixed complex vector against every
row of a candidate table:

    sweep_conj : candidates sit in the conjugated slot (object sweeps)
    sweep_plain: candidates sit in an unconjugated slot (time sweeps)
"""

import numpy as np

NAME = "numpy"


def score_single(sr, si, pr, pi, tr, ti, cr, ci):
    """Score one fact from its four complex vectors, object conjugated."""
    wr = pr * tr - pi * ti
    wi = pr * ti + pi * tr
    zr = sr * wr - si * wi
    zi = sr * wi + si * wr
    return float(np.dot(zr, cr) + np.dot(zi, ci))


def sweep_conj(zr, zi, table_r, table_i, out=None):
    """scores[j] = Re(<z, conj(row_j)>) for every row of the table."""
    res = table_r @ zr
    res += table_i @ zi
    if out is not None:
        out[:] = res
        return out
    return res


def sweep_plain(ur, ui, table_r, table_i, out=None):
    """scores[j] = Re(<u, row_j>) for every row of the table."""
    res = table_r @ ur
    res -= table_i @ ui
    if out is not None:
        out[:] = res
        return out
    return res


def sweep_conj_batch(zr, zi, table_r, table_i, out=None):
    """Batched sweep_conj: zr, zi are (B, d); result is (B, N)."""
    res = zr @ table_r.T
    res += zi @ table_i.T
    if out is not None:
        out[:] = res
        return out
    return res


def sweep_plain_batch(ur, ui, table_r, table_i, out=None):
    """Batched sweep_plain: ur, ui are (B, d); result is (B, N)."""
    res = ur @ table_r.T
    res -= ui @ table_i.T
    if out is not None:
        out[:] = res
        return out
    return res
