import math

import numpy as np

from pfxapp._kernel import run_ttis
from pfxapp.sched import SchedulerParams, UeSchedState, achievable_theta, end_of_tti_update, schedule_tti


def _traffic(n_tti, seed=0):
    rng = np.random.default_rng(seed)
    bprb = rng.integers(20, 400, size=(n_tti, 4))
    arrivals = np.zeros((n_tti, 4), np.int64)
    arrivals[:, 2] = rng.integers(0, 3, n_tti) * 1500
    arrivals[::7, 3] = 12000
    return bprb, arrivals, np.array([True, True, False, False])


def test_kernel_matches_python_reference():
    n_tti, n_rbs, alpha = 3000, 25, 0.01
    betas = (0.8, 1.0, 0.9, 0.95)
    bprb, arrivals, sat = _traffic(n_tti)
    buf = np.zeros(4, np.int64)
    d = np.ones(4)
    out = [np.zeros((n_tti, 4), np.int64), np.zeros((n_tti, 4), np.int64), np.zeros((n_tti, 4)), np.zeros((n_tti, 4))]
    run_ttis(bprb, arrivals, buf, sat, d, np.array(betas), np.zeros(4), False, alpha, n_rbs, 1.0, *out)

    params = SchedulerParams(alpha, betas)
    states = [UeSchedState(i) for i in range(4)]
    queue = [0] * 4
    for t in range(n_tti):
        for i in range(4):
            queue[i] += int(arrivals[t, i])
            states[i].theta = achievable_theta(int(bprb[t, i]), n_rbs)
        buffers = {i: math.inf if sat[i] else queue[i] for i in range(4)}
        channels = {i: int(bprb[t, i]) for i in range(4)}
        alloc = schedule_tti(states, buffers, channels, n_rbs, params)
        end_of_tti_update(states, alloc, alloc.bits, params)
        for i in range(4):
            if not sat[i]:
                queue[i] -= alloc.bits[i]
            assert out[0][t, i] == alloc.rbs[i]
            assert out[1][t, i] == alloc.bits[i]
            assert out[3][t, i] == states[i].d_prev
            assert out[2][t, i] == states[i].gamma
    assert list(buf[~sat]) == [queue[2], queue[3]]


def test_kernel_chunking_is_seamless():
    n_tti = 1000
    bprb, arrivals, sat = _traffic(n_tti, seed=4)
    betas = np.array([0.85, 1.0, 0.9, 0.8])

    def run(cuts):
        buf, d = np.zeros(4, np.int64), np.ones(4)
        rbs = []
        for a, b in zip(cuts, cuts[1:]):
            m = b - a
            out = [np.zeros((m, 4), np.int64), np.zeros((m, 4), np.int64), np.zeros((m, 4)), np.zeros((m, 4))]
            run_ttis(bprb[a:b], arrivals[a:b], buf, sat, d, betas, np.zeros(4), False, 0.01, 25, 1.0, *out)
            rbs.append(out[0])
        return np.concatenate(rbs), d

    whole, d1 = run([0, n_tti])
    pieces, d2 = run([0, 1, 50, 333, 999, n_tti])
    assert np.array_equal(whole, pieces)
    assert np.array_equal(d1, d2)
