"""Brute-force critical-point classification by 8-neighbour scan.

Independent of the gradient machinery: each pixel is classified from its
lower link, the cycle of its 4 edge neighbours joined through the 4
diagonal squares.  A neighbour counts as lower under the same total order
(value, row-major index) used by :func:`build_complex`.  Pixels outside the
grid act as the virtual minimum, which reproduces the boundary cone.
"""

from __future__ import annotations

import numpy as np


def total_order(values: np.ndarray) -> np.ndarray:
    flat = np.asarray(values, float).ravel()
    n = flat.size
    order = np.empty(n, np.int64)
    order[np.lexsort((np.arange(n), flat))] = np.arange(n)
    return order.reshape(np.shape(values))


def classify(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (kind, multiplicity).

    kind: 0 regular, 1 minimum, 2 saddle, 3 maximum; multiplicity is the
    saddle multiplicity (components of the lower link minus one).
    """
    o = total_order(values)
    H, W = o.shape
    p = np.full((H + 2, W + 2), -1, np.int64)
    p[1:-1, 1:-1] = o
    c = p[1:-1, 1:-1]
    sh = lambda di, dj: p[1 + di:H + 1 + di, 1 + dj:W + 1 + dj] < c  # noqa: E731
    n, e, s, w = sh(-1, 0), sh(0, 1), sh(1, 0), sh(0, -1)
    ne, se, sw, nw = sh(-1, 1), sh(1, 1), sh(1, -1), sh(-1, -1)
    nodes = n.astype(int) + e + s + w
    sq = [n & e & ne, e & s & se, s & w & sw, w & n & nw]
    edges = sum(x.astype(int) for x in sq)
    full = edges == 4
    comps = np.where(full, 1, nodes - edges)
    kind = np.zeros((H, W), np.int8)
    mult = np.zeros((H, W), np.int64)
    kind[nodes == 0] = 1
    kind[full] = 3
    sad = ~full & (comps > 1)
    kind[sad] = 2
    mult[sad] = comps[sad] - 1
    return kind, mult


def neighbor_scan_counts(values: np.ndarray) -> dict[str, int]:
    """Critical-point counts including the virtual boundary minimum."""
    kind, mult = classify(values)
    return {"min": int((kind == 1).sum()) + 1, "saddle": int(mult.sum()),
            "max": int((kind == 3).sum())}
