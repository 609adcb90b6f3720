# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled brute-force search over the two-antenna covariance family.

All vectors are given in the coordinates of a fixed orthonormal basis; the
candidate matrix in that basis is

    R' = pt * (u u^H cos^2 psi + u_p u_p^H sin^2 psi),  u = (cos chi, sin chi e^{j phi}).

A quadratic form x^H R' x only needs ``|x0|^2``, ``|x1|^2`` and ``conj(x0) x1``.
Candidates are the product of a list of (chi, psi) pairs with a phi grid.
"""
from libc.math cimport cos, sin

import numpy as np


def grid_search(double hg0, double hg1, double hwr, double hwi,
                double[::1] s0, double[::1] s1, double[::1] swr, double[::1] swi,
                double[::1] ref, double pt, double gain_min,
                double[::1] chi, double[::1] psi, double[::1] phi):
    """Minimum pattern-matching MSE over rate-feasible candidates.

    ``(hg0, hg1, hwr + j hwi)`` describe the channel and ``(s0, s1, swr + j swi)``
    every steering vector.  ``chi[p], psi[p]`` form pair ``p``.  Returns
    ``(best_loss, pair, i_phi)``; ``best_loss`` is ``inf`` when no candidate
    reaches ``gain_min``.
    """
    cdef Py_ssize_t L = ref.shape[0]
    cdef Py_ssize_t p, b, l
    cdef double best = np.inf
    cdef Py_ssize_t bp = -1, bb = -1
    cdef double cx2, sxcx, c2p, cp, sp
    cdef double r00, r11, amp, cr, ci, g, err, acc
    for p in range(chi.shape[0]):
        cx2 = cos(chi[p]) * cos(chi[p])
        sxcx = sin(chi[p]) * cos(chi[p])
        c2p = cos(psi[p]) * cos(psi[p])
        r00 = pt * (c2p * cx2 + (1.0 - c2p) * (1.0 - cx2))
        r11 = pt - r00
        # |R'01| = pt sin(chi) cos(chi) (cos^2 psi - sin^2 psi), phase e^{-j phi}
        amp = pt * sxcx * (2.0 * c2p - 1.0)
        for b in range(phi.shape[0]):
            cp = cos(phi[b])
            sp = sin(phi[b])
            cr = amp * cp
            ci = -amp * sp
            g = r00 * hg0 + r11 * hg1 + 2.0 * (cr * hwr - ci * hwi)
            if g < gain_min:
                continue
            acc = 0.0
            for l in range(L):
                err = ref[l] - (r00 * s0[l] + r11 * s1[l] + 2.0 * (cr * swr[l] - ci * swi[l]))
                acc += err * err
            acc /= L
            if acc < best:
                best = acc
                bp = p
                bb = b
    return best, bp, bb
