"""Numba kernels: lower-star discrete gradient, V-path tracing, labelling."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _key_less(key, a, b):
    for t in range(key.shape[1]):
        if key[a, t] != key[b, t]:
            return key[a, t] < key[b, t]
    return a < b


@njit(cache=True)
def _pop_min(q, nq, key):
    best = 0
    for t in range(1, nq):
        if _key_less(key, q[t], q[best]):
            best = t
    c = q[best]
    q[best] = q[nq - 1]
    return c, nq - 1


@njit(cache=True)
def _classified(c, pair, crit):
    return pair[c] >= 0 or crit[c]


@njit(cache=True)
def _unpaired_faces(c, v, faces, maxv, pair, crit):
    n = 0
    last = -1
    for t in range(faces.shape[1]):
        f = faces[c, t]
        if f < 0:
            break
        if maxv[f] == v and not _classified(f, pair, crit):
            n += 1
            last = f
    return n, last


@njit(cache=True)
def _has_face(c, f, faces):
    for t in range(faces.shape[1]):
        if faces[c, t] == f:
            return True
    return False


@njit(cache=True)
def process_lower_stars(vlist, star_ptr, star_cells, dim, faces, maxv, key, pair, crit):
    """Robins-Wood-Sheppard lower-star gradient; fills ``pair`` / ``crit`` in place.

    ``star_cells[star_ptr[k]:star_ptr[k+1]]`` is the lower star of ``vlist[k]``.
    """
    pq0 = np.empty(64, np.int64)
    pq1 = np.empty(64, np.int64)
    for k in range(vlist.shape[0]):
        v = vlist[k]
        s0 = star_ptr[k]
        s1 = star_ptr[k + 1]
        if s1 - s0 == 1:
            crit[v] = True
            continue
        delta = -1
        for t in range(s0, s1):
            c = star_cells[t]
            if dim[c] == 1 and (delta < 0 or _key_less(key, c, delta)):
                delta = c
        pair[v] = delta
        pair[delta] = v
        n0 = 0
        n1 = 0
        for t in range(s0, s1):
            c = star_cells[t]
            if dim[c] == 1 and c != delta:
                pq0[n0] = c
                n0 += 1
        for t in range(s0, s1):
            c = star_cells[t]
            if dim[c] == 2 and _has_face(c, delta, faces):
                nf, _ = _unpaired_faces(c, v, faces, maxv, pair, crit)
                if nf == 1:
                    pq1[n1] = c
                    n1 += 1
        while n1 > 0 or n0 > 0:
            while n1 > 0:
                a, n1 = _pop_min(pq1, n1, key)
                if _classified(a, pair, crit):
                    continue
                nf, f = _unpaired_faces(a, v, faces, maxv, pair, crit)
                if nf == 0:
                    pq0[n0] = a
                    n0 += 1
                else:
                    pair[a] = f
                    pair[f] = a
                    for t in range(s0, s1):
                        b = star_cells[t]
                        if dim[b] == 2 and not _classified(b, pair, crit) and _has_face(b, f, faces):
                            kk, _ = _unpaired_faces(b, v, faces, maxv, pair, crit)
                            if kk == 1:
                                pq1[n1] = b
                                n1 += 1
            if n0 > 0:
                g, n0 = _pop_min(pq0, n0, key)
                if _classified(g, pair, crit):
                    continue
                crit[g] = True
                if dim[g] == 1:
                    for t in range(s0, s1):
                        b = star_cells[t]
                        if dim[b] == 2 and not _classified(b, pair, crit) and _has_face(b, g, faces):
                            kk, _ = _unpaired_faces(b, v, faces, maxv, pair, crit)
                            if kk == 1:
                                pq1[n1] = b
                                n1 += 1


@njit(cache=True)
def trace_descending(edge, side, faces, pair, crit):
    """V-path from critical edge through its ``side``-th vertex down to a minimum."""
    out = np.empty(64, np.int64)
    n = 0
    out[n] = edge
    n += 1
    w = faces[edge, side]
    while True:
        if n + 2 >= out.shape[0]:
            tmp = np.empty(out.shape[0] * 2, np.int64)
            tmp[:n] = out[:n]
            out = tmp
        out[n] = w
        n += 1
        if crit[w]:
            break
        e = pair[w]
        out[n] = e
        n += 1
        w = faces[e, 0] if faces[e, 0] != w else faces[e, 1]
    return out[:n]


@njit(cache=True)
def trace_ascending(edge, side, cofaces, pair, crit):
    """Dual V-path from critical edge through its ``side``-th coface up to a maximum."""
    out = np.empty(64, np.int64)
    n = 0
    out[n] = edge
    n += 1
    c = cofaces[edge, side]
    while True:
        if n + 2 >= out.shape[0]:
            tmp = np.empty(out.shape[0] * 2, np.int64)
            tmp[:n] = out[:n]
            out = tmp
        out[n] = c
        n += 1
        if crit[c]:
            break
        e = pair[c]
        out[n] = e
        n += 1
        c = cofaces[e, 0] if cofaces[e, 0] != c else cofaces[e, 1]
    return out[:n]


@njit(cache=True)
def descend_labels(vcells, faces, pair, crit, label_of_cell):
    """Destination minimum (as a label) for every vertex cell in ``vcells``."""
    memo = np.full(label_of_cell.shape[0], -2, np.int64)
    stack = np.empty(label_of_cell.shape[0], np.int64)
    out = np.empty(vcells.shape[0], np.int64)
    for t in range(vcells.shape[0]):
        w = vcells[t]
        n = 0
        while True:
            if memo[w] != -2:
                lab = memo[w]
                break
            stack[n] = w
            n += 1
            if crit[w]:
                lab = label_of_cell[w]
                break
            e = pair[w]
            w = faces[e, 0] if faces[e, 0] != w else faces[e, 1]
        for q in range(n):
            memo[stack[q]] = lab
        out[t] = lab
    return out


@njit(cache=True)
def ascend_labels(ccells, cofaces, pair, crit, label_of_cell):
    """Destination maximum (as a label) for every 2-cell in ``ccells``."""
    memo = np.full(label_of_cell.shape[0], -2, np.int64)
    stack = np.empty(label_of_cell.shape[0], np.int64)
    out = np.empty(ccells.shape[0], np.int64)
    for t in range(ccells.shape[0]):
        c = ccells[t]
        n = 0
        while True:
            if memo[c] != -2:
                lab = memo[c]
                break
            stack[n] = c
            n += 1
            if crit[c]:
                lab = label_of_cell[c]
                break
            e = pair[c]
            c = cofaces[e, 0] if cofaces[e, 0] != c else cofaces[e, 1]
        for q in range(n):
            memo[stack[q]] = lab
        out[t] = lab
    return out


@njit(cache=True)
def reverse_path(path, pair, crit):
    """Cancel the critical endpoints of a V-path by re-pairing along it."""
    crit[path[0]] = False
    crit[path[-1]] = False
    for t in range(0, path.shape[0] - 1, 2):
        a = path[t]
        b = path[t + 1]
        pair[a] = b
        pair[b] = a


@njit(cache=True)
def trace_all(saddles, faces, cofaces, pair, crit):
    """All four V-paths of every saddle, concatenated.

    Returns ``(cells, offsets)``; path ``4*i + k`` is descending for
    ``k in (0, 1)`` and ascending for ``k in (2, 3)``.
    """
    n_paths = 4 * saddles.shape[0]
    offsets = np.zeros(n_paths + 1, np.int64)
    buf = np.empty(max(16, 16 * n_paths), np.int64)
    n = 0
    for i in range(saddles.shape[0]):
        for k in range(4):
            if k < 2:
                p = trace_descending(saddles[i], k, faces, pair, crit)
            else:
                p = trace_ascending(saddles[i], k - 2, cofaces, pair, crit)
            if n + p.shape[0] > buf.shape[0]:
                tmp = np.empty(2 * (n + p.shape[0]), np.int64)
                tmp[:n] = buf[:n]
                buf = tmp
            buf[n:n + p.shape[0]] = p
            n += p.shape[0]
            offsets[4 * i + k + 1] = n
    return buf[:n], offsets
