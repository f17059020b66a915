"""Two-user Gaussian MIMO broadcast channel with a two-antenna relay.

Channel matrices are stored with rows ``h_i^*`` (resp. ``g_i^*``), so the
received signals are ``Y = H @ X + Z`` and ``Y_r = G @ X + Z_r``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import GaussianSystem
from .region import RateRegion

ORDERS = ("user1-first", "user2-first")
DEFAULT_GRID = 200


@dataclass(frozen=True)
class ChannelSpec:
    H: np.ndarray
    G: np.ndarray
    N: float
    P: float
    R0: float = 0.0

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        G = np.asarray(self.G, dtype=complex)
        for name, M in (("H", H), ("G", G)):
            if M.shape != (2, 2):
                raise ValueError(f"{name} must be 2x2, got shape {M.shape}")
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} has non-finite entries")
        if not self.N > 0:
            raise ValueError(f"N must be positive, got {self.N}")
        if not self.P > 0:
            raise ValueError(f"P must be positive, got {self.P}")
        if not self.R0 >= 0:
            raise ValueError(f"R0 must be nonnegative, got {self.R0}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "N", float(self.N))
        object.__setattr__(self, "P", float(self.P))
        object.__setattr__(self, "R0", float(self.R0))

    def with_noise(self, N: float) -> "ChannelSpec":
        return ChannelSpec(self.H, self.G, N, self.P, self.R0)

    def with_link(self, R0: float) -> "ChannelSpec":
        return ChannelSpec(self.H, self.G, self.N, self.P, R0)


@dataclass(frozen=True)
class BeamformingPlan:
    """Unit-norm transmit beams and per-stream powers.

    For three-stage plans ``vectors[2]`` is the second beam of user two; it
    must equal ``vectors[1]`` unless ``allow_distinct_v3`` is set.
    """

    vectors: tuple
    powers: tuple
    order: str = "user1-first"
    allow_distinct_v3: bool = False
    P: float | None = field(default=None, compare=False)

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=complex).reshape(2) for v in self.vectors)
        powers = tuple(float(p) for p in self.powers)
        if len(vecs) not in (2, 3) or len(powers) != len(vecs):
            raise ValueError("plan needs 2 or 3 beams with one power each")
        for i, v in enumerate(vecs):
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError(f"beam v{i + 1} is not unit norm")
        if any(p < 0 for p in powers):
            raise ValueError("powers must be nonnegative")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        total = sum(powers)
        if self.P is not None and abs(total - self.P) > 1e-9 * self.P:
            raise ValueError(f"powers sum to {total}, budget is {self.P}")
        if len(vecs) == 3 and not self.allow_distinct_v3 and not np.allclose(vecs[1], vecs[2],
                                                                             atol=1e-12):
            raise ValueError("three-stage plans use v3 = v2 unless explicitly overridden")
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "P", total)

    @property
    def stages(self) -> int:
        return len(self.vectors)

    def split(self, ratio: float) -> "BeamformingPlan":
        """Three-stage plan giving ``ratio`` of user two's power to U2 and the rest to U3."""
        if self.stages != 2:
            raise ValueError("only a two-stage plan can be split")
        if not 0 < ratio < 1:
            raise ValueError("power split ratio must lie in (0, 1)")
        v1, v2 = self.vectors
        p1, p2 = self.powers
        return BeamformingPlan((v1, v2, v2), (p1, ratio * p2, (1 - ratio) * p2), self.order)


def identity_plan(p1: float, p2: float, order: str = "user1-first") -> BeamformingPlan:
    return BeamformingPlan((np.array([1, 0]), np.array([0, 1])), (p1, p2), order)


def build_two_stage_system(spec: ChannelSpec, plan: BeamformingPlan) -> GaussianSystem:
    if plan.stages != 2:
        raise ValueError("two-stage system needs a two-stage plan")
    (v1, v2), (p1, p2) = plan.vectors, plan.powers
    N = spec.N
    sources = {"U1": p1, "U2": p2, "Z1": N, "Z2": N, "Zr1": N, "Zr2": N}
    signals = {}
    for i in range(2):
        signals[f"Y{i + 1}"] = {"U1": spec.H[i] @ v1, "U2": spec.H[i] @ v2, f"Z{i + 1}": 1}
        signals[f"Yr{i + 1}"] = {"U1": spec.G[i] @ v1, "U2": spec.G[i] @ v2, f"Zr{i + 1}": 1}
    return GaussianSystem(sources, signals, {"Y_r": ("Yr1", "Yr2")})


def _first_second(plan: BeamformingPlan) -> tuple[int, int]:
    return (0, 1) if plan.order == "user1-first" else (1, 0)


def dpc_rates_no_relay(spec: ChannelSpec, plan: BeamformingPlan) -> tuple[float, float]:
    """Successive dirty-paper rates ``(C1, C2)`` without the relay.

    The user encoded first treats the other stream as noise; the user encoded
    second sees its interference pre-cancelled.
    """
    if plan.stages != 2:
        raise ValueError("dpc_rates_no_relay needs a two-stage plan")
    first, second = _first_second(plan)
    v, p, H, N = plan.vectors, plan.powers, spec.H, spec.N
    rates = [0.0, 0.0]
    gain_ff = abs(H[first] @ v[first]) ** 2
    gain_fs = abs(H[first] @ v[second]) ** 2
    rates[first] = float(np.log2(1 + gain_ff * p[first] / (gain_fs * p[second] + N)))
    rates[second] = float(np.log2(1 + abs(H[second] @ v[second]) ** 2 * p[second] / N))
    return rates[0], rates[1]


def _dual_mac_pentagon(spec: ChannelSpec, q1: float, q2: float):
    h = spec.H.conj()  # row i is the dual-MAC channel vector h_i
    N = spec.N
    r1 = np.log2(1 + q1 * np.vdot(h[0], h[0]).real / N)
    r2 = np.log2(1 + q2 * np.vdot(h[1], h[1]).real / N)
    S = np.eye(2) + (q1 * np.outer(h[0], h[0].conj()) + q2 * np.outer(h[1], h[1].conj())) / N
    rsum = float(np.linalg.slogdet(S)[1] / np.log(2))
    return [(float(r1), max(rsum - float(r1), 0.0)), (max(rsum - float(r2), 0.0), float(r2))]


def capacity_region_no_relay(spec: ChannelSpec, grid_size: int = DEFAULT_GRID) -> RateRegion:
    """Inner approximation of the no-relay capacity region via the dual MAC.

    Sum-power splits ``q1 = i P / grid_size`` for ``i = 0..grid_size`` are
    enumerated, so the split set for ``2k`` contains the one for ``k``.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    pts = []
    for i in range(grid_size + 1):
        q1 = spec.P * i / grid_size
        pts += _dual_mac_pentagon(spec, q1, spec.P - q1)
    return RateRegion.from_points(pts)


def zero_power_region() -> RateRegion:
    return RateRegion.from_points([(0.0, 0.0)])


def duality_plan(spec: ChannelSpec, q1: float, order: str = "user1-first") -> BeamformingPlan:
    """Broadcast beams and powers dual to the MAC point with powers ``(q1, P - q1)``.

    Uses MMSE-SIC receive filters on the dual MAC (decoding order reversed
    from the encoding order) as transmit beams, then solves the broadcast
    powers that reproduce the MAC SINRs. Total power is preserved.
    """
    q = [q1, spec.P - q1]
    if not 0 <= q1 <= spec.P:
        raise ValueError("q1 must lie in [0, P]")
    first, second = (0, 1) if order == "user1-first" else (1, 0)
    h = spec.H.conj()
    N = spec.N
    # dual MAC: the BC user encoded first is decoded last (interference-free)
    u = [None, None]
    u[first] = h[first] / np.linalg.norm(h[first])
    K = N * np.eye(2) + q[first] * np.outer(h[first], h[first].conj())
    w = np.linalg.solve(K, h[second])
    u[second] = w / np.linalg.norm(w)
    sinr = [0.0, 0.0]
    sinr[first] = q[first] * abs(np.vdot(u[first], h[first])) ** 2 / N
    sinr[second] = q[second] * abs(np.vdot(u[second], h[second])) ** 2 / (
        N + q[first] * abs(np.vdot(u[second], h[first])) ** 2)
    H = spec.H
    p = [0.0, 0.0]
    p[second] = sinr[second] * N / abs(H[second] @ u[second]) ** 2
    p[first] = sinr[first] * (N + p[second] * abs(H[first] @ u[second]) ** 2) / abs(
        H[first] @ u[first]) ** 2
    return BeamformingPlan(tuple(u), tuple(p), order)
