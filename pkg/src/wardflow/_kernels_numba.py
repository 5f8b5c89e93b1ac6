"""Numba JIT kernel: per-patient explicit-duration state machine.

Stage codes 0=G, 1=I, 2=V; health 0=declining, 1=recovering. cdfs has shape
(3, 2, cap) holding duration CDFs per (stage, health). Occupancy is
accumulated with a difference array (+1 at segment start, -1 past its end)
and prefix-summed once at the end. rec_reduction > 0 enables the
recovering-duration cut (stochastic rounding, floored at rec_min_days).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def simulate_patients(start_days, start_stages, cdfs, recover, death, n_days, seed, rec_reduction, rec_min_days):
    np.random.seed(seed)
    cap = cdfs.shape[2]
    occ_diff = np.zeros((n_days, 3))
    terminal = np.zeros((n_days, 2))
    for i in range(start_days.shape[0]):
        day = start_days[i]
        stage = start_stages[i]
        health = 1 if np.random.random() < recover[stage] else 0
        while True:
            cdf = cdfs[stage, health]
            dur = 1 + np.searchsorted(cdf, np.random.random())
            if dur > cap:
                dur = cap
            if health == 1 and rec_reduction > 0.0:
                x = dur * (1.0 - rec_reduction)
                lo = int(np.floor(x))
                dur = lo + (1 if np.random.random() < x - lo else 0)
                if dur < rec_min_days:
                    dur = rec_min_days
            if day < n_days:
                occ_diff[day, stage] += 1.0
                if day + dur < n_days:
                    occ_diff[day + dur, stage] -= 1.0
            day = day + dur
            if health == 1:
                if stage == 0:  # recovering out of the general ward -> recovered
                    if day < n_days:
                        terminal[day, 0] += 1.0
                    break
                stage -= 1
            else:
                if stage == 2:  # declining exit from the ventilator is death
                    if day < n_days:
                        terminal[day, 1] += 1.0
                    break
                if np.random.random() < death[stage]:
                    if day < n_days:
                        terminal[day, 1] += 1.0
                    break
                stage += 1
                if np.random.random() < recover[stage]:
                    health = 1
    occupancy = np.empty((n_days, 3))
    for s in range(3):
        total = 0.0
        for t in range(n_days):
            total += occ_diff[t, s]
            occupancy[t, s] = total
    return occupancy, terminal
