# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double[3][3] M1 = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]
cdef double[6][6] M2 = [
    [6, -1, -1, 0, -4, 0],
    [-1, 6, -1, 0, 0, -4],
    [-1, -1, 6, -4, 0, 0],
    [0, 0, -4, 32, 16, 16],
    [-4, 0, 0, 16, 32, 16],
    [0, -4, 0, 16, 16, 32],
]


cdef inline double _gradients(const double[:, ::1] nodes, cnp.int64_t a, cnp.int64_t b, cnp.int64_t c,
                              double* g) nogil:
    cdef double x0 = nodes[a, 0], y0 = nodes[a, 1]
    cdef double x1 = nodes[b, 0], y1 = nodes[b, 1]
    cdef double x2 = nodes[c, 0], y2 = nodes[c, 1]
    cdef double area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    g[0] = (y1 - y2) / area2
    g[1] = (x2 - x1) / area2
    g[2] = (y2 - y0) / area2
    g[3] = (x0 - x2) / area2
    g[4] = (y0 - y1) / area2
    g[5] = (x1 - x0) / area2
    return 0.5 * area2


def p1_triplets(nodes, tris):
    cdef const double[:, ::1] X = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] T = np.ascontiguousarray(tris, dtype=np.int64)
    cdef Py_ssize_t ne = T.shape[0], e, i, j, p
    rows_a = np.empty(9 * ne, dtype=np.int64)
    cols_a = np.empty(9 * ne, dtype=np.int64)
    k_a = np.empty(9 * ne)
    m_a = np.empty(9 * ne)
    cdef cnp.int64_t[::1] rows = rows_a, cols = cols_a
    cdef double[::1] kv = k_a, mv = m_a
    cdef double g[6]
    cdef double area
    with nogil:
        for e in range(ne):
            area = _gradients(X, T[e, 0], T[e, 1], T[e, 2], g)
            p = 9 * e
            for i in range(3):
                for j in range(3):
                    rows[p] = T[e, i]
                    cols[p] = T[e, j]
                    kv[p] = area * (g[2 * i] * g[2 * j] + g[2 * i + 1] * g[2 * j + 1])
                    mv[p] = area * M1[i][j] / 12.0
                    p += 1
    return rows_a, cols_a, k_a, m_a


def p2_triplets(nodes, elems):
    cdef const double[:, ::1] X = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] T = np.ascontiguousarray(elems, dtype=np.int64)
    cdef Py_ssize_t ne = T.shape[0], e, i, j, p, q
    rows_a = np.empty(36 * ne, dtype=np.int64)
    cols_a = np.empty(36 * ne, dtype=np.int64)
    k_a = np.empty(36 * ne)
    m_a = np.empty(36 * ne)
    cdef cnp.int64_t[::1] rows = rows_a, cols = cols_a
    cdef double[::1] kv = k_a, mv = m_a
    cdef double g[6]
    cdef double gr[12]
    cdef double ke[36]
    cdef double lam[3]
    cdef double area, w
    cdef int[3] ea = [0, 1, 2]
    cdef int[3] eb = [1, 2, 0]
    with nogil:
        for e in range(ne):
            area = _gradients(X, T[e, 0], T[e, 1], T[e, 2], g)
            for i in range(36):
                ke[i] = 0.0
            for q in range(3):
                lam[0] = 0.5
                lam[1] = 0.5
                lam[2] = 0.5
                lam[(q + 2) % 3] = 0.0
                for i in range(3):
                    gr[2 * i] = (4.0 * lam[i] - 1.0) * g[2 * i]
                    gr[2 * i + 1] = (4.0 * lam[i] - 1.0) * g[2 * i + 1]
                for i in range(3):
                    gr[6 + 2 * i] = 4.0 * (lam[ea[i]] * g[2 * eb[i]] + lam[eb[i]] * g[2 * ea[i]])
                    gr[7 + 2 * i] = 4.0 * (lam[ea[i]] * g[2 * eb[i] + 1] + lam[eb[i]] * g[2 * ea[i] + 1])
                for i in range(6):
                    for j in range(6):
                        ke[6 * i + j] += gr[2 * i] * gr[2 * j] + gr[2 * i + 1] * gr[2 * j + 1]
            w = area / 3.0
            p = 36 * e
            for i in range(6):
                for j in range(6):
                    rows[p] = T[e, i]
                    cols[p] = T[e, j]
                    kv[p] = w * ke[6 * i + j]
                    mv[p] = area * M2[i][j] / 180.0
                    p += 1
    return rows_a, cols_a, k_a, m_a
