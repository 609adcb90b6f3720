"""Numpy fallback for the two-antenna grid search (same contract as the compiled kernel)."""
from __future__ import annotations

import numpy as np


def grid_search(hg0, hg1, hwr, hwi, s0, s1, swr, swi, ref, pt, gain_min, chi, psi, phi):
    s0, s1 = np.asarray(s0), np.asarray(s1)
    sw = np.asarray(swr) + 1j * np.asarray(swi)
    hw = complex(hwr, hwi)
    ref = np.asarray(ref, dtype=float)
    chi, psi = np.asarray(chi), np.asarray(psi)
    rot = np.exp(-1j * np.asarray(phi))
    cx2 = np.cos(chi) ** 2
    c2p = np.cos(psi) ** 2
    r00 = pt * (c2p * cx2 + (1 - c2p) * (1 - cx2))
    r11 = pt - r00
    amp = pt * np.sin(chi) * np.cos(chi) * (2 * c2p - 1)
    best, arg = np.inf, (-1, -1)
    step = max(1, 200_000 // max(len(phi), 1))
    for lo in range(0, len(chi), step):
        sl = slice(lo, lo + step)
        r01 = np.outer(amp[sl], rot)  # (pairs, phi)
        g = r00[sl, None] * hg0 + r11[sl, None] * hg1 + 2 * np.real(r01 * hw)
        ok = g >= gain_min
        if not ok.any():
            continue
        idx = np.argwhere(ok)
        pattern = (np.outer(r00[sl][idx[:, 0]], s0) + np.outer(r11[sl][idx[:, 0]], s1)
                   + 2 * np.real(np.outer(r01[ok], sw)))
        loss = np.mean((ref[None, :] - pattern) ** 2, axis=1)
        i = int(np.argmin(loss))
        if loss[i] < best:
            best = float(loss[i])
            arg = (lo + int(idx[i, 0]), int(idx[i, 1]))
    return (best,) + arg
