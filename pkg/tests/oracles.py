"""Naive-loop convolution oracles."""

import numpy as np


def naive_spatial(x, w, b):
    n, c, t = x.shape
    k = w.shape[0]
    out = np.zeros((n, k, t))
    for s in range(n):
        for i in range(k):
            for tt in range(t):
                acc = b[i]
                for ch in range(c):
                    acc += w[i, ch] * x[s, ch, tt]
                out[s, i, tt] = acc
    return out


def naive_temporal(maps, w, b):
    n, i_maps, t = maps.shape
    j, _, width = w.shape
    out = np.zeros((n, j, t - width + 1))
    for s in range(n):
        for q in range(j):
            for tt in range(t - width + 1):
                acc = b[q]
                for p in range(i_maps):
                    for tau in range(width):
                        acc += w[q, p, tau] * maps[s, p, tt + tau]
                out[s, q, tt] = acc
    return out
