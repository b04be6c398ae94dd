"""Compiled endpoint samplers.

Only the time-t state is ever read off, and the state seen from a fixed
event count is what it is regardless of when the events happened, so both
kernels draw a Poisson event count and then a uniform event sequence
instead of carrying clock times.  Each replica reseeds the generator from
its own word, which makes every replica reproducible in isolation.

Coins are drawn lazily (only when a firing actually needs one).  The python
engines in asep.py attach a coin to every firing instead; the two agree in
law, not stream for stream.
"""

import numpy as np
from numba import njit

HOLE = 2 ** 62


@njit(cache=True)
def bond_endpoint_chunk(colors, q, t, seeds):
    """Run the bond engine to time t on every row of ``colors``, in place.

    colors : (R, S) int64, one window row per replica, HOLE for empty sites
    seeds : (R,) uint32 per-replica generator seeds
    Returns an (R,) bool array flagging occupancy changes at the edge bonds.
    """
    R, S = colors.shape
    nb = S - 1
    touched = np.zeros(R, dtype=np.bool_)
    lam = nb * t
    for r in range(R):
        np.random.seed(seeds[r])
        n_ev = np.random.poisson(lam)
        row = colors[r]
        hit = False
        for _ in range(n_ev):
            z = np.random.randint(0, nb)
            cl = row[z]
            cr = row[z + 1]
            if cl < cr:
                do_swap = True
            elif cl > cr:
                do_swap = np.random.random() < q
            else:
                do_swap = False
            if do_swap:
                row[z] = cr
                row[z + 1] = cl
                if (cl == HOLE) != (cr == HOLE) and (z == 0 or z == nb - 1):
                    hit = True
        touched[r] = hit
    return touched


@njit(cache=True)
def particle_endpoint_chunk(pos, lo, hi, q, t, seeds):
    """Run the particle engine to time t on every row of ``pos``, in place.

    pos : (R, n) int64, strictly increasing positions per row, n >= 1
    Returns an (R,) bool array flagging any visit to a window edge site.
    """
    R, n = pos.shape
    touched = np.zeros(R, dtype=np.bool_)
    p_right = 1.0 / (1.0 + q)
    lam = n * (1.0 + q) * t
    for r in range(R):
        np.random.seed(seeds[r])
        row = pos[r]
        hit = row[0] == lo or row[n - 1] == hi
        n_att = np.random.poisson(lam)
        for _ in range(n_att):
            j = np.random.randint(0, n)
            if np.random.random() < p_right:
                tgt = row[j] + 1
                if tgt <= hi and (j == n - 1 or row[j + 1] != tgt):
                    row[j] = tgt
            else:
                tgt = row[j] - 1
                if tgt >= lo and (j == 0 or row[j - 1] != tgt):
                    row[j] = tgt
            if row[j] == lo or row[j] == hi:
                hit = True
        touched[r] = hit
    return touched
