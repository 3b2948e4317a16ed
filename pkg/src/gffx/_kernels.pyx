# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan for r-local maxima under the (height, lexicographic) order."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def ball_offsets(int r):
    """Offsets of the l1 ball of radius r minus the origin, nearest first."""
    offs = [(d1, d2) for d1 in range(-r, r + 1) for d2 in range(-r, r + 1)
            if 0 < abs(d1) + abs(d2) <= r]
    offs.sort(key=lambda d: (abs(d[0]) + abs(d[1]), d[0], d[1]))
    return np.asarray(offs, dtype=np.intp).reshape(-1, 2)


def local_maxima_scan(double[:, ::1] h, int r, double threshold):
    """Boolean mask of r-local maxima among sites with height >= threshold.

    Heights outside the array count as 0.  A neighbour ``z`` at offset
    ``(d1, d2)`` beats the centre when its height is larger, or equal with
    ``(d1, d2)`` lexicographically negative.
    """
    cdef Py_ssize_t n1 = h.shape[0], n2 = h.shape[1]
    cdef cnp.intp_t[:, ::1] offs = ball_offsets(r)
    cdef Py_ssize_t n_off = offs.shape[0]
    out = np.zeros((n1, n2), dtype=np.uint8)
    cdef unsigned char[:, ::1] mask = out
    cdef Py_ssize_t i, j, k, a, b
    cdef cnp.intp_t d1, d2
    cdef double v, w
    cdef bint keep
    for i in range(n1):
        for j in range(n2):
            v = h[i, j]
            if v < threshold:
                continue
            keep = True
            for k in range(n_off):
                d1 = offs[k, 0]
                d2 = offs[k, 1]
                a = i + d1
                b = j + d2
                if a < 0 or a >= n1 or b < 0 or b >= n2:
                    w = 0.0
                else:
                    w = h[a, b]
                if w > v or (w == v and (d1 < 0 or (d1 == 0 and d2 < 0))):
                    keep = False
                    break
            if keep:
                mask[i, j] = 1
    return out.view(np.bool_)
