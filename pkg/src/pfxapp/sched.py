"""Tunable proportional-fair uplink scheduler.

Each UE carries a priority exponent ``beta`` applied to its smoothed
served-rate denominator. With every ``beta == 1`` the scheduler reduces to
a textbook PF scheduler (achievable rate over EMA of served rate); lowering
a UE's ``beta`` shrinks its denominator and raises its priority.

All rates are in bits/ms. Allocation is greedy, one RB at a time, with the
grantee's denominator re-evaluated after every grant using the bits it has
been served so far in the current TTI.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

D_FLOOR = 1e-6
THETA_MODES = ("achievable", "requested")


@dataclass(frozen=True)
class SchedulerParams:
    alpha: float = 0.01
    betas: tuple[float, ...] = (1.0,)
    d_init: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        for b in self.betas:
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"beta must lie in [0, 1], got {b}")
        if not self.d_init > 0:
            raise ValueError(f"d_init must be positive, got {self.d_init}")
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))


@dataclass
class UeSchedState:
    ue_id: int
    d_prev: float = 1.0
    theta: float = 0.0
    phi_inst: float = 0.0
    gamma: float = 0.0


@dataclass
class Allocation:
    """RBs and bits granted in one TTI, keyed by ue_id."""

    rbs: dict[int, int] = field(default_factory=dict)
    bits: dict[int, int] = field(default_factory=dict)

    @property
    def total_rbs(self) -> int:
        return sum(self.rbs.values())


def update_denominator(d_prev: float, phi_inst: float, alpha: float, beta: float) -> float:
    """One step of the exponentiated EMA: ``((1-alpha)*d_prev + alpha*phi) ** beta``.

    The result is floored at ``D_FLOOR`` so an idle UE cannot drive its
    priority to infinity.
    """
    return max(((1.0 - alpha) * d_prev + alpha * phi_inst) ** beta, D_FLOOR)


def compute_priority(theta: float, d: float) -> float:
    if d <= 0:
        raise ValueError(f"denominator must be positive, got {d}")
    return theta / d


def achievable_theta(bits_per_rb: int, n_rbs: int, tti_ms: float = 1.0) -> float:
    """Rate (bits/ms) the UE would get from a full-TTI grant."""
    return bits_per_rb * n_rbs / tti_ms


def schedule_tti(
    ue_states: Sequence[UeSchedState],
    buffers: Mapping[int, float],
    channels: Mapping[int, int],
    n_rbs: int,
    params: SchedulerParams,
    tti_ms: float = 1.0,
) -> Allocation:
    """Greedy per-RB allocation by highest priority.

    ``buffers`` maps ue_id to queued bits (``math.inf`` for full-buffer UEs),
    ``channels`` maps ue_id to bits carried per RB. Each state's ``theta``
    must be set by the caller. The states' ``gamma`` and ``phi_inst`` are
    left holding the values implied by the final allocation; ``d_prev`` is
    not touched (see :func:`end_of_tti_update`).

    If every buffer is empty at the start of the TTI nothing is allocated.
    RBs left over once all buffers drain mid-TTI go to the highest-priority
    UE as padding and carry no bits.
    """
    if n_rbs < 1:
        raise ValueError("n_rbs must be >= 1")
    alpha = params.alpha
    remaining = [float(buffers[s.ue_id]) for s in ue_states]
    served = [0] * len(ue_states)
    rbs = [0] * len(ue_states)
    d_tent = []
    for s in ue_states:
        beta = params.betas[s.ue_id]
        d_tent.append(update_denominator(s.d_prev, 0.0, alpha, beta))
    gammas = [compute_priority(s.theta, d) for s, d in zip(ue_states, d_tent)]

    if any(r > 0 for r in remaining):
        for _ in range(n_rbs):
            best = -1
            for k, r in enumerate(remaining):
                if r > 0 and (best < 0 or gammas[k] > gammas[best]):
                    best = k
            if best < 0:
                # everyone drained: pad the top-priority UE
                best = max(range(len(gammas)), key=lambda k: (gammas[k], -k))
                rbs[best] += 1
                continue
            s = ue_states[best]
            grant = min(channels[s.ue_id], remaining[best])
            remaining[best] -= grant
            served[best] += int(grant)
            rbs[best] += 1
            d_tent[best] = update_denominator(
                s.d_prev, served[best] / tti_ms, alpha, params.betas[s.ue_id]
            )
            gammas[best] = compute_priority(s.theta, d_tent[best])

    alloc = Allocation()
    for k, s in enumerate(ue_states):
        s.phi_inst = served[k] / tti_ms
        s.gamma = gammas[k]
        alloc.rbs[s.ue_id] = rbs[k]
        alloc.bits[s.ue_id] = served[k]
    return alloc


def end_of_tti_update(
    ue_states: Sequence[UeSchedState],
    allocation: Allocation,
    served_bits: Mapping[int, int],
    params: SchedulerParams,
    tti_ms: float = 1.0,
) -> Sequence[UeSchedState]:
    """Fold the TTI's realized service into each UE's denominator.

    UEs absent from ``served_bits`` (or not in ``allocation``) are treated
    as served zero bits.
    """
    for s in ue_states:
        bits = served_bits.get(s.ue_id, 0) if allocation.rbs.get(s.ue_id, 0) else 0
        s.phi_inst = bits / tti_ms
        s.d_prev = update_denominator(s.d_prev, s.phi_inst, params.alpha, params.betas[s.ue_id])
        s.gamma = compute_priority(s.theta, s.d_prev)
    return ue_states


class TunablePFScheduler:
    """Stateful wrapper driving :func:`schedule_tti` TTI after TTI.

    Beta updates are staged with :meth:`set_betas` and swapped in as a whole
    at the start of the next call to :meth:`step`.
    """

    def __init__(self, n_ues: int, params: SchedulerParams, theta_mode: str = "achievable",
                 requested_rates: Sequence[float] | None = None, tti_ms: float = 1.0):
        if len(params.betas) != n_ues:
            raise ValueError(f"expected {n_ues} betas, got {len(params.betas)}")
        if theta_mode not in THETA_MODES:
            raise ValueError(f"theta_mode must be one of {THETA_MODES}")
        if theta_mode == "requested" and (requested_rates is None or len(requested_rates) != n_ues):
            raise ValueError("requested theta mode needs one requested rate per UE")
        self.params = params
        self.theta_mode = theta_mode
        self.requested_rates = list(requested_rates) if requested_rates is not None else None
        self.tti_ms = tti_ms
        self.states = [UeSchedState(ue_id=i, d_prev=params.d_init) for i in range(n_ues)]
        self._pending: tuple[float, ...] | None = None
        self.tti = 0
        self.trace: list[tuple] = []

    def set_betas(self, betas: Sequence[float]) -> None:
        if len(betas) != len(self.states):
            raise ValueError(f"expected {len(self.states)} betas, got {len(betas)}")
        # validates range
        SchedulerParams(self.params.alpha, tuple(betas), self.params.d_init)
        self._pending = tuple(float(b) for b in betas)

    def step(self, buffers: Mapping[int, float], channels: Mapping[int, int], n_rbs: int) -> Allocation:
        if self._pending is not None:
            self.params = SchedulerParams(self.params.alpha, self._pending, self.params.d_init)
            self._pending = None
        for s in self.states:
            if self.theta_mode == "achievable":
                s.theta = achievable_theta(channels[s.ue_id], n_rbs, self.tti_ms)
            else:
                s.theta = float(self.requested_rates[s.ue_id])
        alloc = schedule_tti(self.states, buffers, channels, n_rbs, self.params, self.tti_ms)
        end_of_tti_update(self.states, alloc, alloc.bits, self.params, self.tti_ms)
        for s in self.states:
            self.trace.append((self.tti, s.ue_id, s.gamma, s.d_prev, alloc.rbs[s.ue_id], alloc.bits[s.ue_id]))
        self.tti += 1
        return alloc

    def dump_state_csv(self, path) -> None:
        """Write the per-TTI trace as ``tti,ue,gamma,d,rbs,bits``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tti", "ue", "gamma", "d", "rbs", "bits"])
            for row in self.trace:
                w.writerow([row[0], row[1], repr(row[2]), repr(row[3]), row[4], row[5]])
