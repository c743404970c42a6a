"""Pure-NumPy element kernels; reference implementation and import fallback.

Each function returns COO triplets ``(rows, cols, stiffness, mass)`` for the
Laplacian stiffness matrix and the L2 mass matrix on straight triangles.
"""

import numpy as np

_M1 = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0

# local P2 numbering: vertices 0, 1, 2; midpoints 3=(0,1), 4=(1,2), 5=(2,0)
_M2 = np.array([
    [6, -1, -1, 0, -4, 0],
    [-1, 6, -1, 0, 0, -4],
    [-1, -1, 6, -4, 0, 0],
    [0, 0, -4, 32, 16, 16],
    [-4, 0, 0, 16, 32, 16],
    [0, -4, 0, 16, 16, 32],
], dtype=float) / 180.0

_MID_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def _bary_gradients(nodes, tris):
    p0, p1, p2 = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    area2 = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    g = np.empty((len(tris), 3, 2))
    g[:, 0, 0] = p1[:, 1] - p2[:, 1]
    g[:, 0, 1] = p2[:, 0] - p1[:, 0]
    g[:, 1, 0] = p2[:, 1] - p0[:, 1]
    g[:, 1, 1] = p0[:, 0] - p2[:, 0]
    g[:, 2, 0] = p0[:, 1] - p1[:, 1]
    g[:, 2, 1] = p1[:, 0] - p0[:, 0]
    g /= area2[:, None, None]
    return g, 0.5 * area2


def _triplets(elems, ke, me):
    k = elems.shape[1]
    rows = np.repeat(elems, k, axis=1).ravel()
    cols = np.tile(elems, (1, k)).ravel()
    return rows, cols, ke.reshape(-1), me.reshape(-1)


def p1_triplets(nodes, tris):
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    tris = np.ascontiguousarray(tris, dtype=np.int64)
    g, area = _bary_gradients(nodes, tris)
    ke = np.einsum("eid,ejd->eij", g, g) * area[:, None, None]
    me = area[:, None, None] * _M1[None]
    return _triplets(tris, ke, me)


def p2_triplets(nodes, elems):
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    elems = np.ascontiguousarray(elems, dtype=np.int64)
    g, area = _bary_gradients(nodes, elems[:, :3])
    ke = np.zeros((len(elems), 6, 6))
    for lam in _MID_BARY:
        grads = np.empty((len(elems), 6, 2))
        for i in range(3):
            grads[:, i] = (4.0 * lam[i] - 1.0) * g[:, i]
        for m, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
            grads[:, 3 + m] = 4.0 * (lam[i] * g[:, j] + lam[j] * g[:, i])
        ke += np.einsum("eid,ejd->eij", grads, grads)
    ke *= (area / 3.0)[:, None, None]
    me = area[:, None, None] * _M2[None]
    return _triplets(elems, ke, me)
