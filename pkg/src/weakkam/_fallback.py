"""Pure-numpy versions of the compiled min-plus kernels.

Same contracts and bit-identical results as ``weakkam._core``.
"""
import numpy as np


def minplus_apply(u, idx, W):
    return (u[idx] + W).min(axis=0)


def minplus_argmin(u, idx, W):
    vals = u[idx] + W
    best = vals.min(axis=0)
    # ties resolve to the smallest predecessor index
    cand = np.where(vals == best, idx, np.iinfo(np.int64).max)
    return best, cand.min(axis=0)


def karp_table(idx, W, steps):
    D = np.empty((steps + 1, W.shape[1]))
    D[0] = 0.0
    for k in range(1, steps + 1):
        D[k] = (D[k - 1][idx] + W).min(axis=0)
    return D
