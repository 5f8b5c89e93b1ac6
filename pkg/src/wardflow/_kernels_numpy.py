"""Pure-numpy kernel: processes all active patients in stage-parallel rounds.

Same contract as the numba kernel (see _kernels_numba). Each round samples
one segment for every still-active patient, accumulates occupancy into a
difference array, then resolves terminal events, stage advances and
recovery switches with vectorized draws. A trajectory has at most 5
segments plus death exits, so the loop terminates quickly.
"""

import numpy as np


def simulate_patients(start_days, start_stages, cdfs, recover, death, n_days, seed, rec_reduction, rec_min_days):
    rng = np.random.default_rng(seed)
    cap = cdfs.shape[2]
    occ_diff = np.zeros((n_days, 3))
    terminal = np.zeros((n_days, 2))
    n = start_days.shape[0]
    day = start_days.astype(np.int64).copy()
    stage = start_stages.astype(np.int64).copy()
    health = (rng.random(n) < recover[stage]).astype(np.int64)
    active = np.ones(n, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        st = stage[idx]
        h = health[idx]
        u = rng.random(idx.size)
        dur = (cdfs[st, h] < u[:, None]).sum(axis=1) + 1
        np.minimum(dur, cap, out=dur)
        if rec_reduction > 0.0:
            rec = h == 1
            if rec.any():
                x = dur[rec] * (1.0 - rec_reduction)
                lo = np.floor(x)
                cut = lo.astype(np.int64) + (rng.random(rec.sum()) < (x - lo))
                dur[rec] = np.maximum(cut, rec_min_days)
        a = day[idx]
        b = a + dur
        vis = a < n_days
        np.add.at(occ_diff, (a[vis], st[vis]), 1.0)
        vis_b = b < n_days
        np.add.at(occ_diff, (b[vis_b], st[vis_b]), -1.0)
        day[idx] = b

        recovering = h == 1
        exit_R = recovering & (st == 0)
        exit_T = (~recovering) & (st == 2)
        check = (~recovering) & (st < 2)
        if check.any():
            dies = np.zeros(idx.size, dtype=bool)
            dies[check] = rng.random(check.sum()) < death[st[check]]
            exit_T |= dies
        for mask, col in ((exit_R, 0), (exit_T, 1)):
            t_evt = b[mask]
            ok = t_evt < n_days
            np.add.at(terminal, (t_evt[ok], col), 1.0)

        cont = ~(exit_R | exit_T)
        moved = idx[cont]
        st_c = st[cont]
        rec_c = recovering[cont]
        new_st = np.where(rec_c, st_c - 1, st_c + 1)
        stage[moved] = new_st
        switch = np.array(rec_c)  # recovering patients stay recovering
        arrived_declining = ~rec_c
        if arrived_declining.any():
            switch[arrived_declining] = rng.random(arrived_declining.sum()) < recover[new_st[arrived_declining]]
        health[moved] = switch.astype(np.int64)
        active[idx[~cont]] = False
    return np.cumsum(occ_diff, axis=0), terminal
