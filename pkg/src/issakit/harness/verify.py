"""Trace-level checks of forward invariance and finite-time convergence."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from issakit.ctrigger import TriggerProps
from issakit.harness.trace import EpisodeTrace


@dataclass
class VerificationReport:
    forward_invariant: bool = True
    first_violation_step: int | None = None
    converged: bool = True
    convergence_step: int | None = None
    bound_steps: float | None = None
    bound_violated: bool = False
    assumption_flags: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.forward_invariant and not self.bound_violated


def check_forward_invariance(trace: EpisodeTrace, tol: float = 0.0) -> VerificationReport:
    """Once ``phi <= 0`` and ``phi0 <= 0`` hold together, both must hold at every later step."""
    rep = VerificationReport()
    entered = None
    for r in trace.records:
        if entered is None:
            if r.phi <= tol and r.phi0 <= tol:
                entered = r.t
            continue
        if r.phi > tol or r.phi0 > tol:
            rep.forward_invariant = False
            rep.first_violation_step = r.t
            break
    if entered is None:
        rep.assumption_flags.append("never-entered")
    return rep


def convergence_bound(phi_start: float, eta0: float, props: TriggerProps) -> float:
    """Step bound ``phi / (eta0 * min(cos_guard, delta_min / 2)) * (v_max / a_sym + 1)``."""
    if phi_start <= 0:
        return 0.0
    if not eta0 > 0:
        return math.inf
    return phi_start / (eta0 * props.cos_threshold) * (props.v_max / props.a_sym + 1.0)


def check_finite_time_convergence(
    trace: EpisodeTrace, eta0: float, props: TriggerProps | None
) -> VerificationReport:
    if props is None:
        raise ValueError("trigger properties are required for the convergence check")
    rep = VerificationReport()
    if not trace.records or trace.records[0].phi <= 0:
        rep.bound_steps = 0.0
        rep.convergence_step = 0 if trace.records else None
        rep.assumption_flags.append("started-inside")
        return rep
    t0 = trace.records[0].t
    rep.bound_steps = convergence_bound(trace.records[0].phi, eta0, props)
    hit = next((r.t for r in trace.records if r.phi <= 0), None)
    rep.convergence_step = None if hit is None else hit - t0
    if hit is None:
        rep.converged = False
        # not converging is only a violation once the episode outlasts the bound
        rep.bound_violated = len(trace.records) > rep.bound_steps
        if not rep.bound_violated:
            rep.assumption_flags.append("episode-shorter-than-bound")
    else:
        rep.bound_violated = rep.convergence_step > rep.bound_steps
    return rep
