"""Compiled inner loops.

Maps arrive as rows of the 12-coefficient rational table used by ``geometry``;
the evaluation order of every expression matches ``geometry.apply_table`` so
compiled and vectorised results agree bit for bit.
"""
import math

import numpy as np
from numba import njit

DENOM_EPS = 1e-12

STATUS_OK = 0
STATUS_SINGULAR = 1


@njit(nogil=True)
def orbit_points(table, digits, x, y, out):
    """Chaos-game orbit; writes the point after each digit into ``out``.

    Returns (x, y, status).
    """
    for i in range(digits.shape[0]):
        t = table[digits[i]]
        den_x = t[6] * x + t[7] * y + t[8]
        den_y = t[9] * x + t[10] * y + t[11]
        if abs(den_x) < DENOM_EPS or abs(den_y) < DENOM_EPS:
            return x, y, STATUS_SINGULAR
        nx = (t[0] * x + t[1] * y + t[2]) / den_x
        ny = (t[3] * x + t[4] * y + t[5]) / den_y
        x = nx
        y = ny
        out[i, 0] = x
        out[i, 1] = y
    return x, y, STATUS_OK


@njit(nogil=True)
def orbit_counts(table, digits, x, y, skip, counts, xmin, ymin, xmax, ymax):
    """Chaos-game orbit accumulated into a (height, width) visit-count grid.

    The first ``skip`` points are iterated but not counted. Returns
    (x, y, dropped, status) where dropped counts points outside the frame.
    """
    height, width = counts.shape
    sx = width / (xmax - xmin)
    sy = height / (ymax - ymin)
    dropped = 0
    for i in range(digits.shape[0]):
        t = table[digits[i]]
        den_x = t[6] * x + t[7] * y + t[8]
        den_y = t[9] * x + t[10] * y + t[11]
        if abs(den_x) < DENOM_EPS or abs(den_y) < DENOM_EPS:
            return x, y, dropped, STATUS_SINGULAR
        nx = (t[0] * x + t[1] * y + t[2]) / den_x
        ny = (t[3] * x + t[4] * y + t[5]) / den_y
        x = nx
        y = ny
        if i < skip:
            continue
        fx = (x - xmin) * sx
        fy = (ymax - y) * sy
        if fx < 0.0 or fx > width or fy < 0.0 or fy > height:
            dropped += 1
            continue
        col = min(int(math.floor(fx)), width - 1)
        row = min(int(math.floor(fy)), height - 1)
        counts[row, col] += 1
    return x, y, dropped, STATUS_OK


@njit(nogil=True)
def flow_chain(weights, labels, limbs, u, renorm_every):
    """Left-multiply the row vector ``u`` through a chain of flow matrices.

    weights: (N, M) array of s**alpha; labels: (k, V) 0-based IFS labels;
    limbs: (k, V, M) 0-based screen indices. Row v of step j sends
    u[v] * weights[labels[j, v], m] to screen limbs[j, v, m]. ``u`` is
    updated in place and renormalised to unit sum every ``renorm_every``
    steps; returns the accumulated log of the normalising constants.
    """
    k, V = labels.shape
    M = limbs.shape[2]
    log_sum = 0.0
    nxt = np.zeros(V)
    for j in range(k):
        for w in range(V):
            nxt[w] = 0.0
        for v in range(V):
            uv = u[v]
            if uv == 0.0:
                continue
            n = labels[j, v]
            for m in range(M):
                nxt[limbs[j, v, m]] += uv * weights[n, m]
        for w in range(V):
            u[w] = nxt[w]
        if (j + 1) % renorm_every == 0 or j == k - 1:
            c = 0.0
            for w in range(V):
                c += u[w]
            log_sum += math.log(c)
            for w in range(V):
                u[w] /= c
    return log_sum


@njit(nogil=True)
def colour_orbit(table, pal_lin, pal_off, digits, x, y, colour, key, top_power, skip,
                 keys, rgb, xmin, ymin, xmax, ymax):
    """Paired geometry/palette orbit with per-pixel lowest-address colour.

    ``key`` encodes the most recent address digits, newest digit most
    significant; a pixel keeps the colour of the smallest key seen so far.
    Returns (x, y, key, status); ``colour`` is updated in place.
    """
    height, width = keys.shape
    M = table.shape[0]
    sx = width / (xmax - xmin)
    sy = height / (ymax - ymin)
    c0 = colour[0]
    c1 = colour[1]
    c2 = colour[2]
    for i in range(digits.shape[0]):
        m = digits[i]
        t = table[m]
        den_x = t[6] * x + t[7] * y + t[8]
        den_y = t[9] * x + t[10] * y + t[11]
        if abs(den_x) < DENOM_EPS or abs(den_y) < DENOM_EPS:
            colour[0] = c0
            colour[1] = c1
            colour[2] = c2
            return x, y, key, STATUS_SINGULAR
        nx = (t[0] * x + t[1] * y + t[2]) / den_x
        ny = (t[3] * x + t[4] * y + t[5]) / den_y
        x = nx
        y = ny
        a = pal_lin[m]
        b = pal_off[m]
        n0 = a[0, 0] * c0 + a[0, 1] * c1 + a[0, 2] * c2 + b[0]
        n1 = a[1, 0] * c0 + a[1, 1] * c1 + a[1, 2] * c2 + b[1]
        n2 = a[2, 0] * c0 + a[2, 1] * c1 + a[2, 2] * c2 + b[2]
        c0 = n0
        c1 = n1
        c2 = n2
        key = m * top_power + key // M
        if i < skip:
            continue
        fx = (x - xmin) * sx
        fy = (ymax - y) * sy
        if fx < 0.0 or fx > width or fy < 0.0 or fy > height:
            continue
        col = min(int(math.floor(fx)), width - 1)
        row = min(int(math.floor(fy)), height - 1)
        if keys[row, col] < 0 or key < keys[row, col]:
            keys[row, col] = key
            rgb[row, col, 0] = c0
            rgb[row, col, 1] = c1
            rgb[row, col, 2] = c2
    colour[0] = c0
    colour[1] = c1
    colour[2] = c2
    return x, y, key, STATUS_OK


@njit(nogil=True)
def palette_orbit(pal_lin, pal_off, digits, colour, out):
    """Colour orbit c <- A_m c + b_m driven by the given digits; writes each colour into ``out``."""
    c0 = colour[0]
    c1 = colour[1]
    c2 = colour[2]
    for i in range(digits.shape[0]):
        m = digits[i]
        a = pal_lin[m]
        b = pal_off[m]
        n0 = a[0, 0] * c0 + a[0, 1] * c1 + a[0, 2] * c2 + b[0]
        n1 = a[1, 0] * c0 + a[1, 1] * c1 + a[1, 2] * c2 + b[1]
        n2 = a[2, 0] * c0 + a[2, 1] * c1 + a[2, 2] * c2 + b[2]
        c0 = n0
        c1 = n1
        c2 = n2
        out[i, 0] = c0
        out[i, 1] = c1
        out[i, 2] = c2
    colour[0] = c0
    colour[1] = c1
    colour[2] = c2
