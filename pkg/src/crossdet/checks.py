"""Seeded invariant suite behind ``crossdet check``."""
from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from .bc import ChannelSpec, dpc_rates_no_relay, identity_plan
from .detlab import (AuxChoice, DeterministicBRC, full_relay_choice, joint_entropy,
                     linear_det_example, marton_region, mutual_information, no_relay_region,
                     theorem4_region, verify_capacity_match)
from .gaussian import GaussianSystem, OracleMismatch, cond_mutual_info, mutual_info
from .ghf import interfered_user_improvement, noise_observing_rate, sum_rate_check
from .region import RateRegion
from .three_stage import (RankDeficient, ThreeStagePlan, merged_two_stage,
                          noninterfered_improvement, solve_beamformer_equations,
                          sum_rate_cap_holds, three_stage_rates)

TOL = 1e-7
DET_TOL = 1e-12  # only reached with non-dyadic pmfs; dyadic ones compare exactly


def random_system(rng: np.random.Generator, n_sources: int = 6, n_signals: int = 5,
                  perturb: float = 0.0) -> GaussianSystem:
    """Random well-conditioned system with signals ``S0..`` over sources ``Z0..``.

    ``perturb`` adds a tiny rng-drawn offset to every coefficient; the suite uses it
    to recompute one side of an identity on a deliberately wrong model.
    """
    srcs = {f"Z{j}": float(rng.uniform(0.5, 2.0)) for j in range(n_sources)}
    C = rng.normal(size=(n_signals, n_sources)) + 1j * rng.normal(size=(n_signals, n_sources))
    if perturb:
        C = C + perturb * (rng.normal(size=C.shape) + 1j * rng.normal(size=C.shape))
    sigs = {f"S{i}": {f"Z{j}": C[i, j] for j in range(n_sources)} for i in range(n_signals)}
    return GaussianSystem(srcs, sigs)


def random_partition(rng: np.random.Generator, n_signals: int = 5):
    names = [f"S{i}" for i in rng.permutation(n_signals)]
    a, b = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    return names[:a], names[a:a + b], names[a + b:]


def random_det_channel(rng: np.random.Generator, n_inputs: int = 8) -> DeterministicBRC:
    xs = tuple(range(n_inputs))
    draw = lambda k: {x: int(rng.integers(0, k)) for x in xs}  # noqa: E731
    return DeterministicBRC(xs, draw(3), draw(3), draw(4),
                            {x: Fraction(1, n_inputs) for x in xs}, R0=1)


# -- individual properties -------------------------------------------------------

def _gaussian_oracle(rng, trials):
    for _ in range(trials):
        s = random_system(rng)
        A, B, C = random_partition(rng)
        cond_mutual_info(s, A, B, C)  # raises OracleMismatch on disagreement
    return True


def _gaussian_chain_rule(rng, trials, sabotage):
    for _ in range(trials):
        seed = int(rng.integers(2 ** 32))
        s = random_system(np.random.default_rng(seed))
        A, B, C = random_partition(rng)
        lhs = mutual_info(s, A, B + C)
        if sabotage:
            s = random_system(np.random.default_rng(seed), perturb=1e-3)
        rhs = mutual_info(s, A, C) + cond_mutual_info(s, A, B, C)
        if abs(lhs - rhs) > TOL:
            return False
    return True


def _gaussian_symmetry(rng, trials):
    for _ in range(trials):
        s = random_system(rng)
        A, B, C = random_partition(rng)
        ab, ba = cond_mutual_info(s, A, B, C), cond_mutual_info(s, B, A, C)
        if abs(ab - ba) > TOL or ab < -1e-9:
            return False
    return True


def _noise_observing():
    rep = noise_observing_rate(1.0, 1.0, 1.0)
    return abs(rep.q - 0.5) <= 1e-6 and abs(rep.total - 2.0) <= 1e-6 and rep.penalty < 1e-9


def _pinned_spec(N=1.0):
    return ChannelSpec([[1, 0.5], [0.5, 1]], [[1, 0.3], [0.3, 1]], N, 10.0, 1.0)


def _interfered_sum_cap():
    plan = identity_plan(5, 5)
    for N in (1.0, 1e-2, 1e-4, 1e-6):
        spec = _pinned_spec(N)
        rep = interfered_user_improvement(spec, plan, spec.R0)
        if not sum_rate_check(spec, plan, rep) or not -1e-9 <= rep.delta_r <= spec.R0 + 1e-9:
            return False
    return True


def _three_stage_sum_cap():
    plan = identity_plan(5, 5).split(0.5)
    for N in (1.0, 1e-2, 1e-4, 1e-6):
        spec = _pinned_spec(N)
        rep = noninterfered_improvement(spec, plan, spec.R0)
        if not sum_rate_cap_holds(spec, plan, rep):
            return False
    return True


def _three_stage_merge():
    plan = identity_plan(5, 5).split(0.5)
    for N in (1.0, 1e-3):
        spec = _pinned_spec(N)
        c1, c2 = dpc_rates_no_relay(spec, merged_two_stage(plan))
        r1, r2a, r2b = three_stage_rates(spec, ThreeStagePlan.build(spec, plan))
        if abs(r1 - c1) > TOL or abs(r2a + r2b - c2) > TOL:
            return False
    return True


def _beamformer_residuals(rng, trials):
    ok = 0
    for _ in range(trials):
        vecs = rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3))
        try:
            sol = solve_beamformer_equations(*vecs)
        except RankDeficient:
            continue
        G = np.column_stack([vecs[2], vecs[3]])
        T = np.column_stack([vecs[0], vecs[1]])
        defect = np.linalg.norm(G @ sol.w_r - T @ sol.w_2)
        if defect > 1e-9 * np.linalg.norm(G, 2) * np.linalg.norm(sol.w_r):
            return False
        ok += 1
    return ok >= trials - 1


def _det_capacity_match():
    for R0 in (1, 2):
        channel, _, g = linear_det_example(R0)
        if not verify_capacity_match(channel, g).match:
            return False
    return True


def _det_relay_penalty():
    channel, aux, _ = linear_det_example(2)
    return mutual_information(channel, ["Yhat"], ["Yr"], ["U", "Y1"], aux) == 0


def _det_marton(rng, trials):
    for _ in range(trials):
        ch = random_det_channel(rng, int(rng.integers(2, 17)))
        aux = AuxChoice.from_functions(ch, U=ch.f1.get, V=ch.f2.get)
        if not marton_region(ch, aux).same_as(no_relay_region(ch), DET_TOL):
            return False
    return True


def _det_chain_rule(rng, trials):
    for _ in range(trials):
        ch = random_det_channel(rng)
        lhs = mutual_information(ch, ["Yr"], ["Y1", "Y2"])
        rhs = (mutual_information(ch, ["Yr"], ["Y1"])
               + mutual_information(ch, ["Yr"], ["Y2"], ["Y1"]))
        if abs(lhs - rhs) > DET_TOL or joint_entropy(ch, ["Yr"]) < 0:
            return False
    return True


def _det_marton_reduction(rng, trials):
    for _ in range(trials):
        ch = random_det_channel(rng)
        aux = full_relay_choice(ch)
        aux = AuxChoice(aux.U, aux.V, {y: 0 for y in aux.yhat}, aux.g)
        if not theorem4_region(ch, aux).region.same_as(marton_region(ch, aux), DET_TOL):
            return False
    return True


def _region_minkowski(rng, trials):
    for _ in range(trials):
        pts = [tuple(Fraction(int(v)) for v in rng.integers(0, 10, size=2)) for _ in range(5)]
        base = RateRegion.from_points(pts)
        r0 = Fraction(int(rng.integers(0, 4)))
        if base.extend(r0).max_sum() != base.max_sum() + r0:
            return False
    return True


def run_checks(seed: int = 42, sabotage: bool = False):
    """Return ``[(name, passed, seconds)]`` for every property in a fixed order."""
    rng = np.random.default_rng(seed)
    suite = [
        ("gaussian.oracle_equivalence", lambda: _gaussian_oracle(rng, 200)),
        ("gaussian.chain_rule", lambda: _gaussian_chain_rule(rng, 200, sabotage)),
        ("gaussian.symmetry_nonnegativity", lambda: _gaussian_symmetry(rng, 200)),
        ("ghf.noise_observing_closed_form", _noise_observing),
        ("ghf.interfered_sum_rate_cap", _interfered_sum_cap),
        ("three_stage.sum_rate_cap", _three_stage_sum_cap),
        ("three_stage.merged_rates", _three_stage_merge),
        ("three_stage.beamformer_residual", lambda: _beamformer_residuals(rng, 200)),
        ("detlab.capacity_match", _det_capacity_match),
        ("detlab.relay_penalty_zero", _det_relay_penalty),
        ("detlab.marton_reduces_to_no_relay", lambda: _det_marton(rng, 20)),
        ("detlab.exact_chain_rule", lambda: _det_chain_rule(rng, 20)),
        ("detlab.constant_quantizer_is_marton", lambda: _det_marton_reduction(rng, 20)),
        ("region.minkowski_sum_rate", lambda: _region_minkowski(rng, 50)),
    ]
    out = []
    for name, fn in suite:
        t0 = time.perf_counter()
        try:
            ok = bool(fn())
        except (OracleMismatch, ArithmeticError, ValueError):
            ok = False
        out.append((name, ok, time.perf_counter() - t0))
    return out
