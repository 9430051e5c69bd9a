"""Cubical cell complex of a pixel grid, closed into a sphere by a cone.

Cells of the ``H x W`` vertex grid live on the doubled lattice
``(2H-1) x (2W-1)``: ``(even, even)`` vertices, mixed-parity edges and
``(odd, odd)`` squares, with id ``i * (2W-1) + j``.  A virtual vertex
``VIRT`` is joined to every boundary vertex (cone edges) and to every
boundary edge (cone triangles).  The result is a regular complex on the
2-sphere, so ``chi = 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True, eq=False)
class CellComplex:
    H: int
    W: int
    n_grid: int
    virt: int
    dim: np.ndarray  # (N,) int8
    verts: np.ndarray  # (N, 4) int64, -1 padded
    faces: np.ndarray  # (N, 4) int64, -1 padded
    cofaces: np.ndarray  # (N, 2) int64, edges only
    pos: np.ndarray  # (N, 2) float (x, y) in pixels; NaN for the virtual vertex
    on_boundary: np.ndarray  # (N,) bool: touches the image boundary or is a cone cell
    bverts: np.ndarray  # boundary vertex cycle (cell ids)

    @property
    def n_cells(self) -> int:
        return self.dim.shape[0]

    def vertex_cell(self, r: int, c: int) -> int:
        return (2 * r) * (2 * self.W - 1) + 2 * c

    def grid_index(self, vcell: np.ndarray) -> np.ndarray:
        """Row-major pixel index of grid vertex cells."""
        NC = 2 * self.W - 1
        i, j = np.divmod(np.asarray(vcell), NC)
        return (i // 2) * self.W + j // 2

    def square_cell(self, r: int, c: int) -> int:
        return (2 * r + 1) * (2 * self.W - 1) + 2 * c + 1


@lru_cache(maxsize=8)
def cell_complex(H: int, W: int) -> CellComplex:
    NR, NC = 2 * H - 1, 2 * W - 1
    NG = NR * NC
    ii, jj = np.divmod(np.arange(NG), NC)
    pi, pj = ii % 2, jj % 2
    cid = lambda i, j: i * NC + j  # noqa: E731

    # boundary cycle
    top = [(0, j) for j in range(0, NC, 2)]
    right = [(i, NC - 1) for i in range(2, NR, 2)]
    bottom = [(NR - 1, j) for j in range(NC - 3, -1, -2)]
    left = [(i, 0) for i in range(NR - 3, 1, -2)]
    bcyc = top + right + bottom + left
    nb = len(bcyc)
    bverts = np.array([cid(i, j) for i, j in bcyc], dtype=np.int64)
    bedges = np.array([cid((bcyc[k][0] + bcyc[(k + 1) % nb][0]) // 2,
                           (bcyc[k][1] + bcyc[(k + 1) % nb][1]) // 2) for k in range(nb)],
                      dtype=np.int64)

    virt = NG
    cedge0 = NG + 1
    ctri0 = NG + 1 + nb
    N = NG + 1 + 2 * nb

    dim = np.empty(N, dtype=np.int8)
    verts = np.full((N, 4), -1, dtype=np.int64)
    faces = np.full((N, 4), -1, dtype=np.int64)
    cofaces = np.full((N, 2), -1, dtype=np.int64)
    pos = np.full((N, 2), np.nan)
    on_b = np.zeros(N, dtype=bool)

    dim[:NG] = pi + pj
    pos[:NG, 0] = jj / 2.0
    pos[:NG, 1] = ii / 2.0
    on_b[:NG] = (ii == 0) | (ii == NR - 1) | (jj == 0) | (jj == NC - 1)

    vg, fg, cg = verts[:NG], faces[:NG], cofaces[:NG]
    ids = np.arange(NG)
    v = (pi == 0) & (pj == 0)
    vg[v, 0] = ids[v]

    h = (pi == 0) & (pj == 1)  # horizontal edge
    vg[h, 0] = ids[h] - 1
    vg[h, 1] = ids[h] + 1
    fg[h, :2] = vg[h, :2]
    cg[h, 0] = np.where(ii[h] > 0, ids[h] - NC, -1)
    cg[h, 1] = np.where(ii[h] < NR - 1, ids[h] + NC, -1)

    vv = (pi == 1) & (pj == 0)  # vertical edge
    vg[vv, 0] = ids[vv] - NC
    vg[vv, 1] = ids[vv] + NC
    fg[vv, :2] = vg[vv, :2]
    cg[vv, 0] = np.where(jj[vv] > 0, ids[vv] - 1, -1)
    cg[vv, 1] = np.where(jj[vv] < NC - 1, ids[vv] + 1, -1)

    s = (pi == 1) & (pj == 1)
    vg[s] = np.stack([ids[s] - NC - 1, ids[s] - NC + 1, ids[s] + NC - 1, ids[s] + NC + 1], 1)
    fg[s] = np.stack([ids[s] - NC, ids[s] - 1, ids[s] + 1, ids[s] + NC], 1)

    # cone
    dim[virt] = 0
    verts[virt, 0] = virt
    on_b[NG:] = True
    for k in range(nb):
        ce = cedge0 + k
        ct = ctri0 + k
        b0, b1 = bverts[k], bverts[(k + 1) % nb]
        be = bedges[k]
        dim[ce] = 1
        verts[ce, :2] = (virt, b0)
        faces[ce, :2] = (virt, b0)
        cofaces[ce] = (ctri0 + (k - 1) % nb, ct)
        pos[ce] = pos[b0]
        dim[ct] = 2
        verts[ct, :3] = (virt, b0, b1)
        faces[ct, :3] = (be, ce, cedge0 + (k + 1) % nb)
        pos[ct] = pos[be]
        # the boundary edge's missing coface is the cone triangle
        slot = 0 if cofaces[be, 0] == -1 else 1
        cofaces[be, slot] = ct

    for a in (dim, verts, faces, cofaces, pos, on_b, bverts):
        a.setflags(write=False)
    return CellComplex(H, W, NG, virt, dim, verts, faces, cofaces, pos, on_b, bverts)
