"""Three-stage dirty-paper coding with a cross-deterministic relay projection.

User two's message is split over two virtual streams U2 and U3 (encoding order
U1 -> U2 -> U3). The relay picks a receive beamformer ``w_r`` such that, up to
noise, ``w_r^* Y_r`` is a fixed linear combination of ``Y2`` and the dirty-paper
auxiliary ``U2_tilde``, so quantizing it costs nothing once user two knows
both.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bc import BeamformingPlan, ChannelSpec, dpc_rates_no_relay
from .gaussian import GaussianSystem, cond_mutual_info, covariance
from .ghf import GhfReport, solve_distortion, theorem2_rate, with_relay_quantizer

COND_PREFERRED = 1e10
COND_MAX = 1e12
RESIDUAL_RTOL = 1e-9
RANK_RTOL = 1e-10


class RankDeficient(ValueError):
    """No relay beamformer gives an informative cross-deterministic projection."""


@dataclass(frozen=True)
class ThreeStagePlan:
    """Effective channels of a three-stage plan, evaluated at a given noise level.

    Vectors follow the column convention: the received signal part of user
    ``i`` is ``h_tilde[i]^* U`` and of relay antenna ``i`` is ``g_tilde[i]^* U``,
    with ``U = (U1, U2, U3)``.
    """

    plan: BeamformingPlan
    h_tilde: np.ndarray  # 2x3, rows are h_tilde_i (not conjugated)
    g_tilde: np.ndarray  # 2x3
    k: float
    l: float
    h_hat2: np.ndarray

    @classmethod
    def build(cls, spec: ChannelSpec, plan: BeamformingPlan) -> "ThreeStagePlan":
        if plan.stages != 3:
            raise ValueError("needs a three-stage plan")
        if plan.order != "user1-first":
            raise ValueError("three-stage construction is defined for user1-first order")
        V = np.column_stack(plan.vectors)
        rows_h = spec.H @ V  # entries h_i^* v_j
        rows_g = spec.G @ V
        p1, p2, p3 = plan.powers
        a, b, c = rows_h[1]
        k = abs(b) ** 2 * p2 / (abs(b) ** 2 * p2 + abs(c) ** 2 * p3 + spec.N)
        l = abs(c) ** 2 * p3 / (abs(c) ** 2 * p3 + spec.N)
        h_hat2 = np.conj(np.array([k * a, b, 0]))
        return cls(plan, np.conj(rows_h), np.conj(rows_g), float(k), float(l), h_hat2)


@dataclass(frozen=True)
class BeamformerSolution:
    w_r: np.ndarray
    w_2: np.ndarray
    normalization: str  # "wr2=1", "wr1=1" or "nullspace"
    residual: float
    cond: float


def build_three_stage_system(spec: ChannelSpec, tplan: ThreeStagePlan) -> GaussianSystem:
    """Signals Y1, Y2, Yr1, Yr2, U2_tilde, U3_tilde and the side information S2."""
    p = tplan.plan.powers
    N = spec.N
    sources = {"U1": p[0], "U2": p[1], "U3": p[2], "Z1": N, "Z2": N, "Zr1": N, "Zr2": N}
    us = ("U1", "U2", "U3")
    signals = {}
    for i in range(2):
        signals[f"Y{i + 1}"] = {**dict(zip(us, np.conj(tplan.h_tilde[i]))), f"Z{i + 1}": 1}
        signals[f"Yr{i + 1}"] = {**dict(zip(us, np.conj(tplan.g_tilde[i]))), f"Zr{i + 1}": 1}
    a, b, c = np.conj(tplan.h_tilde[1])
    signals["U2_tilde"] = dict(zip(us, np.conj(tplan.h_hat2)))
    signals["U3_tilde"] = {"U1": tplan.l * a, "U2": tplan.l * b, "U3": c}
    signals["S2"] = {"U1": a}
    signals["S3"] = {"U1": a, "U2": b}
    return GaussianSystem(sources, signals, {"Y_r": ("Yr1", "Yr2")})


def _eq_matrices(h2, h_hat2, g1, g2):
    A44 = np.column_stack([h2, h_hat2, -g1])
    A45 = np.column_stack([h2, h_hat2, -g2])
    return A44, A45


def _residual(G, w_r, T, w_2) -> float:
    return float(np.linalg.norm(G @ w_r - T @ w_2))


def solve_beamformer_equations(h2, h_hat2, g1, g2) -> BeamformerSolution:
    """Solve ``[g1 g2] w_r = [h2 h_hat2] w_2`` for a nonzero, informative ``w_r``.

    Tries the normalizations ``w_r = [w_r1; 1]`` and ``w_r = [1; w_r2]``; if
    both square systems are singular, falls back to the null space of the
    full under-determined system.
    """
    h2, h_hat2, g1, g2 = (np.asarray(x, dtype=complex) for x in (h2, h_hat2, g1, g2))
    G = np.column_stack([g1, g2])
    T = np.column_stack([h2, h_hat2])
    A44, A45 = _eq_matrices(h2, h_hat2, g1, g2)
    cands = []
    for A, rhs, tag in ((A44, g2, "wr2=1"), (A45, g1, "wr1=1")):
        cond = float(np.linalg.cond(A))
        if np.isfinite(cond) and cond <= COND_MAX:
            cands.append((cond, tag, A, rhs))
    good = [c for c in cands if c[0] <= COND_PREFERRED]
    pick = min(good or cands, key=lambda c: c[0]) if cands else None
    if pick is not None:
        cond, tag, A, rhs = pick
        x = np.linalg.solve(A, rhs)
        w_2 = x[:2]
        w_r = np.array([x[2], 1]) if tag == "wr2=1" else np.array([1, x[2]])
        res = _residual(G, w_r, T, w_2)
        if res <= RESIDUAL_RTOL * max(np.linalg.norm(G, 2) * np.linalg.norm(w_r), 1e-300):
            return BeamformerSolution(w_r, w_2, tag, res, cond)
    return _nullspace_solution(G, T, h2, h_hat2)


def _nullspace_solution(G, T, h2, h_hat2) -> BeamformerSolution:
    M = np.hstack([T, -G])  # acts on [w_2; w_r]
    _, s, Vh = np.linalg.svd(M)
    tol = RANK_RTOL * (s[0] if s.size and s[0] > 0 else 1.0)
    rank = int(np.sum(s > tol))
    Nb = Vh[rank:].conj().T  # orthonormal null-space basis, 4 x d
    # the projection carries information beyond Y2 only through the part of
    # h_hat2 orthogonal to h2
    n2 = np.linalg.norm(h2)
    perp = h_hat2 - (np.vdot(h2, h_hat2) / n2 ** 2) * h2 if n2 > 0 else h_hat2
    e = np.zeros(4)
    e[1] = 1
    x = Nb @ (Nb.conj().T @ e)
    informative = np.linalg.norm(x) * np.linalg.norm(perp)
    scale = max(np.linalg.norm(M, 2), 1e-300)
    if Nb.shape[1] == 0 or informative <= RANK_RTOL * scale or not np.any(x[2:]):
        raise RankDeficient("relay beamformer equations admit no informative solution")
    w_2, w_r = x[:2], x[2:]
    nr = np.linalg.norm(w_r)
    if nr <= RANK_RTOL * np.linalg.norm(x):
        raise RankDeficient("null space gives a zero relay beamformer")
    w_2, w_r = w_2 / nr, w_r / nr
    return BeamformerSolution(w_r, w_2, "nullspace", _residual(G, w_r, T, w_2), float("inf"))


def solve_relay_beamformer(tplan: ThreeStagePlan) -> BeamformerSolution:
    return solve_beamformer_equations(tplan.h_tilde[1], tplan.h_hat2,
                                      tplan.g_tilde[0], tplan.g_tilde[1])


def rank_condition_check(tplan: ThreeStagePlan) -> dict:
    A44, A45 = _eq_matrices(tplan.h_tilde[1], tplan.h_hat2, tplan.g_tilde[0],
                            tplan.g_tilde[1])

    def rank(A):
        s = np.linalg.svd(A, compute_uv=False)
        return int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0

    r44, r45 = rank(A44), rank(A45)
    return {"eq46_rank": r44, "eq47_rank": r45, "feasible": r44 == 3 or r45 == 3}


def _relay_system(spec, tplan, sol):
    system = build_three_stage_system(spec, tplan)
    # w_2 combines [Y2; U2_tilde]
    diff = {}
    for wi, name in zip(sol.w_r, ("Yr1", "Yr2")):
        for src, c in system.signals[name].items():
            diff[src] = diff.get(src, 0) + np.conj(wi) * c
    for wi, name in zip(sol.w_2, ("Y2", "U2_tilde")):
        for src, c in system.signals[name].items():
            diff[src] = diff.get(src, 0) - np.conj(wi) * c
    return system.extend(signals={"defect": diff})


def cross_determinism_residual(spec: ChannelSpec, tplan: ThreeStagePlan,
                               sol: BeamformerSolution) -> float:
    """Power of ``w_r^* Y_r - w_2^* [Y2; U2_tilde]``; only noise survives when the solve is exact."""
    system = _relay_system(spec, tplan, sol)
    return float(covariance(system, ["defect"])[0, 0].real)


def signal_defect(tplan: ThreeStagePlan, sol: BeamformerSolution) -> float:
    """Norm of the noise-free part of the cross-determinism defect."""
    G = tplan.g_tilde.T
    T = np.column_stack([tplan.h_tilde[1], tplan.h_hat2])
    return _residual(G, sol.w_r, T, sol.w_2)


def noninterfered_improvement(spec: ChannelSpec, plan: BeamformingPlan, R0: float,
                              tplan: ThreeStagePlan | None = None,
                              jitter: bool = False) -> GhfReport:
    """Relay gain for user two under three-stage encoding.

    The ``extras`` of the report carry ``c1`` (user one rate), ``u3_rate``
    (the U3 stream, interference pre-cancelled), ``r2`` (user two total),
    ``residual``, ``solution`` and the plan.
    """
    if tplan is None:
        tplan = ThreeStagePlan.build(spec, plan)
    sol = solve_relay_beamformer(tplan)
    base_sys = build_three_stage_system(spec, tplan).with_jitter(jitter)
    sol_q = solve_distortion(lambda q: with_relay_quantizer(base_sys, sol.w_r, q),
                             (["Yr_hat"], ["Yr_tilde"], ["Y2"]), R0)
    system = with_relay_quantizer(base_sys, sol.w_r, sol_q.q)
    rep = theorem2_rate(system, ["U2_tilde"], ["S2"], ["Y2"], ["Yr_tilde"], ["Yr_hat"], R0)
    rates = three_stage_rates(spec, tplan)
    extras = {
        "c1": rates[0],
        "u3_rate": rates[2],
        "r2": rep.base + rep.bonus - rep.penalty + rates[2],
        "residual": cross_determinism_residual(spec, tplan, sol),
        "signal_defect": signal_defect(tplan, sol),
        "solution": sol,
        "distortion": sol_q,
        "plan": tplan,
    }
    return GhfReport(rep.base, rep.bonus, rep.penalty, R0, sol_q.q, extras)


def three_stage_rates(spec: ChannelSpec, tplan: ThreeStagePlan) -> tuple[float, float, float]:
    """No-relay rates ``(R1, R2 via U2, R2 via U3)`` of the three-stage encoder."""
    p1, p2, p3 = tplan.plan.powers
    h1 = np.conj(tplan.h_tilde[0])
    h2 = np.conj(tplan.h_tilde[1])
    N = spec.N
    r1 = np.log2(1 + abs(h1[0]) ** 2 * p1 / (abs(h1[1]) ** 2 * p2 + abs(h1[2]) ** 2 * p3 + N))
    r2a = np.log2(1 + abs(h2[1]) ** 2 * p2 / (abs(h2[2]) ** 2 * p3 + N))
    r2b = np.log2(1 + abs(h2[2]) ** 2 * p3 / N)
    return float(r1), float(r2a), float(r2b)


def merged_two_stage(plan: BeamformingPlan) -> BeamformingPlan:
    """Two-stage plan with user two's streams merged (requires v2 = v3)."""
    v1, v2, _ = plan.vectors
    p1, p2, p3 = plan.powers
    return BeamformingPlan((v1, v2), (p1, p2 + p3), plan.order)


def sum_rate_cap_holds(spec: ChannelSpec, plan: BeamformingPlan, report: GhfReport,
                       tol: float = 1e-6) -> bool:
    c1, c2 = dpc_rates_no_relay(spec, merged_two_stage(plan))
    r1, r2a, r2b = three_stage_rates(spec, report.extras["plan"])
    return r1 + r2a + r2b + report.delta_r <= c1 + c2 + report.R0 + tol


def with_effective_vectors(tplan: ThreeStagePlan, **vectors) -> ThreeStagePlan:
    """Copy of ``tplan`` with effective vectors overridden (toy geometries)."""
    return replace(tplan, **vectors)


def penalty_at(spec: ChannelSpec, plan: BeamformingPlan, R0: float) -> float:
    """Penalty ``I(Yr_hat; Yr_tilde | U2_tilde, Y2)`` checked directly with conditional MI."""
    rep = noninterfered_improvement(spec, plan, R0)
    tplan = rep.extras["plan"]
    system = with_relay_quantizer(build_three_stage_system(spec, tplan),
                                  rep.extras["solution"].w_r, rep.q)
    return cond_mutual_info(system, ["Yr_hat"], ["Yr_tilde"], ["U2_tilde", "Y2"])
