"""Compiled TTI loop used by the simulator.

Mirrors :func:`pfxapp.sched.schedule_tti` followed by
:func:`pfxapp.sched.end_of_tti_update` operation for operation, so the two
paths produce identical floats; ``tests/test_kernel.py`` pins that.
"""
import numpy as np
from numba import njit

from .sched import D_FLOOR


@njit(cache=True)
def _denominator(d_prev, phi, alpha, beta):
    v = ((1.0 - alpha) * d_prev + alpha * phi) ** beta
    if v < D_FLOOR:
        return D_FLOOR
    return v


@njit(cache=True)
def run_ttis(bits_per_rb, arrivals, buffer, saturated, d, betas, theta_req, use_requested,
             alpha, n_rbs, tti_ms, rbs_out, bits_out, gamma_out, d_out):
    """Advance ``bits_per_rb.shape[0]`` TTIs in place.

    ``buffer`` and ``d`` are updated in place; per-TTI results go to the
    ``*_out`` arrays (shape ``(n_tti, n_ues)``).
    """
    n_tti, n_ues = bits_per_rb.shape
    remaining = np.empty(n_ues)
    served = np.zeros(n_ues, np.int64)
    d_tent = np.empty(n_ues)
    gam = np.empty(n_ues)
    theta = np.empty(n_ues)
    for t in range(n_tti):
        any_backlog = False
        for i in range(n_ues):
            buffer[i] += arrivals[t, i]
            if saturated[i]:
                remaining[i] = np.inf
            else:
                remaining[i] = buffer[i]
            if remaining[i] > 0:
                any_backlog = True
            served[i] = 0
            if use_requested:
                theta[i] = theta_req[i]
            else:
                theta[i] = bits_per_rb[t, i] * n_rbs / tti_ms
            d_tent[i] = _denominator(d[i], 0.0, alpha, betas[i])
            gam[i] = theta[i] / d_tent[i]
            rbs_out[t, i] = 0

        if any_backlog:
            for _ in range(n_rbs):
                best = -1
                for k in range(n_ues):
                    if remaining[k] > 0 and (best < 0 or gam[k] > gam[best]):
                        best = k
                if best < 0:
                    best = 0
                    for k in range(1, n_ues):
                        if gam[k] > gam[best]:
                            best = k
                    rbs_out[t, best] += 1
                    continue
                grant = min(float(bits_per_rb[t, best]), remaining[best])
                remaining[best] -= grant
                served[best] += np.int64(grant)
                rbs_out[t, best] += 1
                d_tent[best] = _denominator(d[best], served[best] / tti_ms, alpha, betas[best])
                gam[best] = theta[best] / d_tent[best]

        for i in range(n_ues):
            if not saturated[i]:
                buffer[i] -= served[i]
            bits = served[i] if rbs_out[t, i] > 0 else 0
            d[i] = _denominator(d[i], bits / tti_ms, alpha, betas[i])
            bits_out[t, i] = served[i]
            gamma_out[t, i] = theta[i] / d[i]
            d_out[t, i] = d[i]
