"""Generalized hash-and-forward rates and the two-stage dirty-paper relay scheme."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bc import BeamformingPlan, ChannelSpec, build_two_stage_system, dpc_rates_no_relay
from .gaussian import GaussianSystem, cond_mutual_info, covariance, mutual_info

Q_BOUNDS = (1e-12, 1e12)
SOLVE_TOL = 1e-6
MAX_ITER = 100


class Infeasible(ValueError):
    """The relay observation cannot fill the link even at the finest distortion."""


@dataclass(frozen=True)
class QuantizerConfig:
    w_r: np.ndarray
    q: float

    def __post_init__(self):
        w = np.asarray(self.w_r, dtype=complex).reshape(-1)
        if not np.any(w):
            raise ValueError("relay beamformer must be nonzero")
        if not self.q > 0:
            raise ValueError("distortion must be positive")
        object.__setattr__(self, "w_r", w)


@dataclass(frozen=True)
class GhfReport:
    base: float
    bonus: float
    penalty: float
    R0: float
    q: float | None = None
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def delta_r(self) -> float:
        return self.bonus - self.penalty

    @property
    def total(self) -> float:
        return self.base + self.delta_r


@dataclass(frozen=True)
class DistortionSolution:
    q: float
    info: float
    slack: float
    saturated: bool = False
    iterations: int = 0


def theorem1_rate(system: GaussianSystem, X: Sequence[str], Y: Sequence[str],
                  Yr: Sequence[str], Yhat: Sequence[str], R0: float) -> GhfReport:
    """Quantize-and-forward rate ``I(X;Y) + min{R0, I(Yhat;Yr|Y)} - min{R0, I(Yhat;Yr|X,Y)}``."""
    base = mutual_info(system, X, Y)
    bonus = min(R0, cond_mutual_info(system, Yhat, Yr, Y))
    penalty = min(R0, cond_mutual_info(system, Yhat, Yr, list(X) + list(Y)))
    return GhfReport(base, bonus, penalty, R0)


def theorem2_rate(system: GaussianSystem, U: Sequence[str], S: Sequence[str],
                  Y: Sequence[str], Yr: Sequence[str], Yhat: Sequence[str],
                  R0: float) -> GhfReport:
    """Dirty-paper variant: the base rate is ``I(U;Y) - I(U;S)`` and the penalty
    conditions on ``(U, Y)``."""
    base = mutual_info(system, U, Y) - mutual_info(system, U, S)
    bonus = min(R0, cond_mutual_info(system, Yhat, Yr, Y))
    penalty = min(R0, cond_mutual_info(system, Yhat, Yr, list(U) + list(Y)))
    return GhfReport(base, bonus, penalty, R0)


def solve_distortion(system_builder: Callable[[float], GaussianSystem],
                     info_vars: tuple, target_R0: float,
                     q_bounds: tuple[float, float] = Q_BOUNDS) -> DistortionSolution:
    """Find the distortion ``q`` at which ``I(Yhat; Yr | C)`` equals ``target_R0``.

    ``info_vars`` is ``(Yhat, Yr, C)``. The information is decreasing in ``q``,
    so bisection runs on ``log q``.
    """
    yhat, yr, cond = info_vars
    lo, hi = math.log(q_bounds[0]), math.log(q_bounds[1])

    def info(logq):
        return cond_mutual_info(system_builder(math.exp(logq)), yhat, yr, cond)

    if target_R0 <= 0:
        I_hi = info(hi)
        return DistortionSolution(q_bounds[1], I_hi, I_hi - target_R0, saturated=True)
    I_lo = info(lo)
    if I_lo < target_R0:
        raise Infeasible(
            f"information {I_lo:.6g} bits at q={q_bounds[0]:g} is below R0={target_R0:g}")
    I_hi = info(hi)
    if I_hi >= target_R0:
        return DistortionSolution(q_bounds[1], I_hi, I_hi - target_R0, saturated=True)
    for it in range(1, MAX_ITER + 1):
        mid = 0.5 * (lo + hi)
        I_mid = info(mid)
        if abs(I_mid - target_R0) <= SOLVE_TOL:
            return DistortionSolution(math.exp(mid), I_mid, I_mid - target_R0, iterations=it)
        if I_mid > target_R0:
            lo = mid
        else:
            hi = mid
    raise RuntimeError("distortion bisection did not converge")


def with_relay_quantizer(system: GaussianSystem, w_r, q: float,
                         relay: Sequence[str] = ("Yr1", "Yr2")) -> GaussianSystem:
    """Declare ``Yr_tilde = w_r^* Y_r`` and ``Yr_hat = Yr_tilde + eta`` with ``eta ~ CN(0, q)``."""
    w = np.asarray(w_r, dtype=complex)
    proj: dict[str, complex] = {}
    for wi, name in zip(w, relay):
        for src, c in system.signals.get(name, {name: 1}).items():
            proj[src] = proj.get(src, 0) + np.conj(wi) * c
    hat = dict(proj)
    hat["eta"] = 1
    return system.extend(sources={"eta": q},
                         signals={"Yr_tilde": proj, "Yr_hat": hat})


def mmse_combiner(system: GaussianSystem, target: str,
                  relay: Sequence[str] = ("Yr1", "Yr2")) -> np.ndarray:
    """Unit-norm MMSE receive combiner for ``target`` from the relay antennas."""
    K = covariance(system, list(relay) + [target])
    n = len(relay)
    w = np.linalg.solve(K[:n, :n], K[:n, n])
    nw = np.linalg.norm(w)
    if nw == 0:  # relay sees nothing of the target; every direction is equally useless
        return np.eye(n, dtype=complex)[0]
    return w / nw


def _interfered_users(plan: BeamformingPlan) -> tuple[int, int]:
    return (1, 2) if plan.order == "user1-first" else (2, 1)


def _relay_setup(spec, plan, R0, w_r, jitter=False):
    base_sys = build_two_stage_system(spec, plan).with_jitter(jitter)
    first, second = _interfered_users(plan)
    if w_r is None:
        w_r = mmse_combiner(base_sys, f"U{second}")
    return base_sys, first, second, np.asarray(w_r, dtype=complex)


def interfered_user_improvement(spec: ChannelSpec, plan: BeamformingPlan, R0: float,
                                w_r=None, jitter: bool = False) -> GhfReport:
    """Relay gain for the user encoded first, whose interference the relay observes."""
    base_sys, first, second, w_r = _relay_setup(spec, plan, R0, w_r, jitter)
    y = [f"Y{first}"]
    sol = solve_distortion(lambda q: with_relay_quantizer(base_sys, w_r, q),
                           (["Yr_hat"], ["Yr_tilde"], y), R0)
    system = with_relay_quantizer(base_sys, w_r, sol.q)
    rep = theorem1_rate(system, [f"U{first}"], y, ["Yr_tilde"], ["Yr_hat"], R0)
    return GhfReport(rep.base, rep.bonus, rep.penalty, R0, sol.q,
                     {"w_r": w_r, "solution": sol, "user": first})


def failing_noninterfered_improvement(spec: ChannelSpec, plan: BeamformingPlan, R0: float,
                                      w_r=None, q: float | None = None,
                                      jitter: bool = False) -> GhfReport:
    """Gain of the same relay quantizer for the user encoded second.

    ``w_r`` and ``q`` default to the quantizer designed for the interfered user.
    """
    if plan.stages != 2:
        raise ValueError("needs a two-stage plan")
    base_sys, first, second, w_r = _relay_setup(spec, plan, R0, w_r, jitter)
    if q is None:
        q = interfered_user_improvement(spec, plan, R0, w_r, jitter).q
    v, p = plan.vectors, plan.powers
    h = spec.H[second - 1]
    a = h @ v[first - 1]
    b = h @ v[second - 1]
    k = abs(b) ** 2 * p[second - 1] / (abs(b) ** 2 * p[second - 1] + spec.N)
    system = with_relay_quantizer(base_sys, w_r, q).extend(signals={
        "U_tilde": {f"U{first}": k * a, f"U{second}": b},
        "S": {f"U{first}": a},
    })
    rep = theorem2_rate(system, ["U_tilde"], ["S"], [f"Y{second}"], ["Yr_tilde"],
                        ["Yr_hat"], R0)
    return GhfReport(rep.base, rep.bonus, rep.penalty, R0, q,
                     {"w_r": w_r, "k": k, "user": second})


def sum_rate_check(spec: ChannelSpec, plan: BeamformingPlan, report: GhfReport,
                   tol: float = 1e-6) -> bool:
    """Relay-aided sum rate stays within ``R0`` of the no-relay sum."""
    c1, c2 = dpc_rates_no_relay(spec, plan)
    return c1 + c2 + report.delta_r <= c1 + c2 + report.R0 + tol


def noise_observing_system(P: float, N: float, q: float) -> GaussianSystem:
    """Scalar channel ``Y = X + Z`` whose relay observes the noise ``Yr = Z`` exactly."""
    return GaussianSystem({"X": P, "Z": N, "eta": q},
                          {"Y": {"X": 1, "Z": 1}, "Yr": {"Z": 1},
                           "Yr_hat": {"Z": 1, "eta": 1}})


def noise_observing_rate(P: float, N: float, R0: float) -> GhfReport:
    """Quantize-and-forward rate of the noise-observing channel at the solved distortion."""
    sol = solve_distortion(lambda q: noise_observing_system(P, N, q),
                           (["Yr_hat"], ["Yr"], ["Y"]), R0)
    rep = theorem1_rate(noise_observing_system(P, N, sol.q), ["X"], ["Y"], ["Yr"],
                        ["Yr_hat"], R0)
    return GhfReport(rep.base, rep.bonus, rep.penalty, R0, sol.q, {"solution": sol})
