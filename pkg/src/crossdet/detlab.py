"""Exact finite-alphabet laboratory for the deterministic broadcast relay channel.

Every variable (outputs, auxiliaries, relay quantizer) is a deterministic
function of the input ``X``, so entropies are computed from pushforwards of
the input pmf. Pmfs given as :class:`~fractions.Fraction` keep entropies exact
whenever every pushforward mass is a power of two; otherwise results are
floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Mapping, Sequence

from .region import RateRegion

MAX_ALPHABET = 64
MAX_SEARCH = 12
TOL = 1e-12

VARIABLES = ("X", "Y1", "Y2", "Yr", "U", "V", "W", "Yhat")


class SearchBoundExceeded(ValueError):
    pass


class PreconditionFailed(ValueError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


@dataclass(frozen=True)
class DeterministicBRC:
    inputs: tuple
    f1: Mapping
    f2: Mapping
    fr: Mapping
    pmf: Mapping
    R0: float | Fraction = 0

    def __post_init__(self):
        inputs = tuple(self.inputs)
        if len(set(inputs)) != len(inputs):
            raise ValueError("duplicate input symbols")
        if not 0 < len(inputs) <= MAX_ALPHABET:
            raise ValueError(f"input alphabet size must be in 1..{MAX_ALPHABET}")
        for name in ("f1", "f2", "fr", "pmf"):
            m = getattr(self, name)
            missing = [x for x in inputs if x not in m]
            if missing:
                raise ValueError(f"{name} is not defined on inputs {missing[:4]}")
            object.__setattr__(self, name, dict(m))
        if any(self.pmf[x] < 0 for x in inputs):
            raise ValueError("pmf has negative mass")
        total = sum(self.pmf[x] for x in inputs)
        exact = all(isinstance(self.pmf[x], (int, Fraction)) for x in inputs)
        if (total != 1) if exact else abs(total - 1) > TOL:
            raise ValueError(f"pmf sums to {total}, not 1")
        if self.R0 < 0:
            raise ValueError("R0 must be nonnegative")
        object.__setattr__(self, "inputs", inputs)
        if isinstance(self.R0, int):
            object.__setattr__(self, "R0", Fraction(self.R0))

    @property
    def exact(self) -> bool:
        return all(isinstance(self.pmf[x], (int, Fraction)) for x in self.inputs)

    def with_link(self, R0) -> "DeterministicBRC":
        return DeterministicBRC(self.inputs, self.f1, self.f2, self.fr, self.pmf, R0)

    def relay_alphabet(self) -> list:
        return sorted({self.fr[x] for x in self.inputs if self.pmf[x] > 0}, key=repr)


@dataclass(frozen=True)
class AuxChoice:
    """Auxiliaries as maps on X (``U``, ``V``) and relay maps on Yr (``yhat``, ``g``)."""

    U: Mapping = field(default_factory=dict)
    V: Mapping = field(default_factory=dict)
    yhat: Mapping = field(default_factory=dict)
    g: Mapping | None = None

    @classmethod
    def from_functions(cls, channel: DeterministicBRC, U: Callable | None = None,
                       V: Callable | None = None, yhat: Callable | None = None,
                       g: Mapping | None = None) -> "AuxChoice":
        xs = channel.inputs
        yrs = {channel.fr[x] for x in xs}
        const = lambda *_: 0  # noqa: E731
        return cls({x: (U or const)(x) for x in xs}, {x: (V or const)(x) for x in xs},
                   {y: (yhat or const)(y) for y in yrs}, g)


def _value(channel: DeterministicBRC, aux: AuxChoice | None, var: str, x):
    if var == "X":
        return x
    if var == "Y1":
        return channel.f1[x]
    if var == "Y2":
        return channel.f2[x]
    if var == "Yr":
        return channel.fr[x]
    if aux is None:
        raise ValueError(f"variable {var} needs an auxiliary choice")
    if var == "U":
        return aux.U[x]
    if var == "V":
        return aux.V[x]
    if var == "Yhat":
        return aux.yhat[channel.fr[x]]
    if var == "W":
        if aux.g is None:
            raise ValueError("W needs an extractor map g")
        return aux.g[channel.fr[x]]
    raise ValueError(f"unknown variable {var!r}")


def pushforward(channel: DeterministicBRC, variables: Sequence[str],
                aux: AuxChoice | None = None) -> dict:
    out: dict = {}
    for x in channel.inputs:
        p = channel.pmf[x]
        if p == 0:
            continue
        key = tuple(_value(channel, aux, v, x) for v in variables)
        out[key] = out.get(key, 0) + p
    return out


def _neg_log2(p):
    """``-log2 p`` exactly when p is a power of two, else as a float."""
    if isinstance(p, (int, Fraction)):
        p = Fraction(p)
        if p.numerator == 1 and p.denominator & (p.denominator - 1) == 0:
            return Fraction(p.denominator.bit_length() - 1)
    return -math.log2(p)


def entropy(pmf: Mapping) -> float | Fraction:
    h = Fraction(0)
    for p in pmf.values():
        if p > 0:
            h += p * _neg_log2(p)
    return h


def joint_entropy(channel: DeterministicBRC, variables: Sequence[str],
                  aux: AuxChoice | None = None):
    """``H(variables)`` in bits, exact where the pushforward is dyadic."""
    if not variables:
        return Fraction(0)
    for v in variables:
        if v not in VARIABLES:
            raise ValueError(f"unknown variable {v!r}")
    return entropy(pushforward(channel, variables, aux))


def cond_entropy(channel, A, B=(), aux=None):
    return joint_entropy(channel, list(A) + list(B), aux) - joint_entropy(channel, B, aux)


def mutual_information(channel, A, B, C=(), aux=None):
    """``I(A; B | C)`` from four joint entropies."""
    A, B, C = list(A), list(B), list(C)
    return (joint_entropy(channel, A + C, aux) + joint_entropy(channel, B + C, aux)
            - joint_entropy(channel, A + B + C, aux) - joint_entropy(channel, C, aux))


def no_relay_region(channel: DeterministicBRC) -> RateRegion:
    h1 = joint_entropy(channel, ["Y1"])
    h2 = joint_entropy(channel, ["Y2"])
    h12 = joint_entropy(channel, ["Y1", "Y2"])
    return RateRegion.from_constraints([(1, 0, h1), (0, 1, h2), (1, 1, h12)])


def outer_bound(channel: DeterministicBRC) -> RateRegion:
    """Cut-set outer bound: each no-relay entropy bound loosened by ``R0``."""
    R0 = channel.R0
    h1 = joint_entropy(channel, ["Y1"])
    h2 = joint_entropy(channel, ["Y2"])
    h12 = joint_entropy(channel, ["Y1", "Y2"])
    return RateRegion.from_constraints([(1, 0, h1 + R0), (0, 1, h2 + R0), (1, 1, h12 + R0)])


def marton_region(channel: DeterministicBRC, aux: AuxChoice) -> RateRegion:
    iu = mutual_information(channel, ["U"], ["Y1"], aux=aux)
    iv = mutual_information(channel, ["V"], ["Y2"], aux=aux)
    iuv = mutual_information(channel, ["U"], ["V"], aux=aux)
    return RateRegion.from_constraints([(1, 0, iu), (0, 1, iv), (1, 1, iu + iv - iuv)])


@dataclass(frozen=True)
class BoostedRegion:
    region: RateRegion
    I_U_Y1: object
    I_V_Y2: object
    I_U_V: object
    bonus1: object
    penalty1: object
    bonus2: object
    penalty2: object

    @property
    def delta1(self):
        return self.bonus1 - self.penalty1

    @property
    def delta2(self):
        return self.bonus2 - self.penalty2

    @property
    def sum_bound(self):
        return self.I_U_Y1 + self.I_V_Y2 - self.I_U_V + self.delta1 + self.delta2


def theorem4_region(channel: DeterministicBRC, aux: AuxChoice) -> BoostedRegion:
    """Marton region with per-user relay bonus and quantization penalty."""
    R0 = channel.R0
    iu = mutual_information(channel, ["U"], ["Y1"], aux=aux)
    iv = mutual_information(channel, ["V"], ["Y2"], aux=aux)
    iuv = mutual_information(channel, ["U"], ["V"], aux=aux)
    b1 = min(R0, mutual_information(channel, ["Yhat"], ["Yr"], ["Y1"], aux))
    p1 = min(R0, mutual_information(channel, ["Yhat"], ["Yr"], ["U", "Y1"], aux))
    b2 = min(R0, mutual_information(channel, ["Yhat"], ["Yr"], ["Y2"], aux))
    p2 = min(R0, mutual_information(channel, ["Yhat"], ["Yr"], ["V", "Y2"], aux))
    d1, d2 = b1 - p1, b2 - p2
    region = RateRegion.from_constraints(
        [(1, 0, iu + d1), (0, 1, iv + d2), (1, 1, iu + iv - iuv + d1 + d2)])
    return BoostedRegion(region, iu, iv, iuv, b1, p1, b2, p2)


# -- W-extractor search ------------------------------------------------------

@dataclass(frozen=True)
class ExtractorReport:
    g: dict | None
    H_W: object
    H_Yr_given_Y: object
    independent: bool
    best: dict | None = None

    @property
    def found(self) -> bool:
        return self.g is not None


def _slices(channel: DeterministicBRC):
    """Joint masses ``p(yr, t)`` with ``t = (y1, y2)``, and marginals."""
    joint, pt, pyr = {}, {}, {}
    for x in channel.inputs:
        p = channel.pmf[x]
        if p == 0:
            continue
        yr, t = channel.fr[x], (channel.f1[x], channel.f2[x])
        joint[(yr, t)] = joint.get((yr, t), 0) + p
        pt[t] = pt.get(t, 0) + p
        pyr[yr] = pyr.get(yr, 0) + p
    return joint, pt, pyr


def _close(a, b, exact):
    return a == b if exact else abs(a - b) <= TOL


def _balanced(block, joint, pt, pyr, exact) -> bool:
    pb = sum(pyr[y] for y in block)
    return all(_close(sum(joint.get((y, t), 0) for y in block), pb * ptt, exact)
               for t, ptt in pt.items())


def check_extractor(channel: DeterministicBRC, g: Mapping) -> ExtractorReport:
    """Verify ``W = g(Yr)`` is independent of (Y1, Y2) and has ``H(W) = H(Yr|Y1 Y2)``."""
    joint, pt, pyr = _slices(channel)
    blocks: dict = {}
    for y in pyr:
        blocks.setdefault(g[y], []).append(y)
    indep = all(_balanced(b, joint, pt, pyr, channel.exact) for b in blocks.values())
    hw = joint_entropy(channel, ["W"], AuxChoice(g=dict(g)))
    target = cond_entropy(channel, ["Yr"], ["Y1", "Y2"])
    exact = isinstance(hw, Fraction) and isinstance(target, Fraction)
    ok = indep and _close(hw, target, exact)
    return ExtractorReport(dict(g) if ok else None, hw, target, indep, dict(g))


def _minimal_balanced_blocks(first, rest, joint, pt, pyr, exact):
    """Balanced subsets containing ``first`` that have no balanced proper subset."""
    found: list[frozenset] = []
    for size in range(0, len(rest) + 1):
        for combo in combinations(rest, size):
            block = frozenset((first,) + combo)
            if any(f < block for f in found):
                continue
            if _balanced(block, joint, pt, pyr, exact):
                found.append(block)
    return found


def find_w_extractor(channel: DeterministicBRC, g: Mapping | None = None) -> ExtractorReport:
    """Find ``g`` with ``W = g(Yr)`` independent of (Y1, Y2) and ``H(W) = H(Yr|Y1 Y2)``.

    Searches set partitions of the relay alphabet whose blocks are minimal
    balanced sets (a block is balanced when ``P(Yr in block | Y1, Y2)`` does not
    depend on the outputs). Refining a block into balanced pieces only raises
    ``H(W)``, so the entropy maximizer is among these partitions.
    """
    if g is not None:
        return check_extractor(channel, g)
    alphabet = channel.relay_alphabet()
    if len(alphabet) > MAX_SEARCH:
        raise SearchBoundExceeded(
            f"relay alphabet has {len(alphabet)} symbols (> {MAX_SEARCH}); supply g")
    joint, pt, pyr = _slices(channel)
    exact = channel.exact
    target = cond_entropy(channel, ["Yr"], ["Y1", "Y2"])
    cache: dict = {}
    best = {"h": None, "g": None}

    def blocks_for(first, rest):
        key = (first, rest)
        if key not in cache:
            cache[key] = _minimal_balanced_blocks(first, tuple(sorted(rest, key=repr)), joint,
                                                  pt, pyr, exact)
        return cache[key]

    def search(remaining: frozenset, parts: list) -> bool:
        if not remaining:
            gmap = {y: i for i, blk in enumerate(parts) for y in sorted(blk, key=repr)}
            hw = entropy({i: sum(pyr[y] for y in blk) for i, blk in enumerate(parts)})
            if best["h"] is None or hw > best["h"]:
                best["h"], best["g"] = hw, gmap
            return _close(hw, target, exact and isinstance(hw, Fraction)
                          and isinstance(target, Fraction))
        first = min(remaining, key=repr)
        rest = remaining - {first}
        for blk in blocks_for(first, rest):
            if search(remaining - blk, parts + [blk]):
                return True
        return False

    search(frozenset(alphabet), [])
    return check_extractor(channel, best["g"])


# -- capacity match ----------------------------------------------------------

def user_one_boost_choice(channel: DeterministicBRC, g: Mapping) -> AuxChoice:
    """U = (Y1, W), V = Y2, relay forwards W."""
    return AuxChoice.from_functions(channel, U=lambda x: (channel.f1[x], g[channel.fr[x]]),
                                    V=lambda x: channel.f2[x], yhat=lambda y: g[y], g=g)


def user_two_boost_choice(channel: DeterministicBRC, g: Mapping) -> AuxChoice:
    """U = Y1, V = (Y2, W), relay forwards W."""
    return AuxChoice.from_functions(channel, U=lambda x: channel.f1[x],
                                    V=lambda x: (channel.f2[x], g[channel.fr[x]]),
                                    yhat=lambda y: g[y], g=g)


def full_relay_choice(channel: DeterministicBRC) -> AuxChoice:
    """U = (Y1, Yr), V = Y2, relay forwards Yr unquantized."""
    return AuxChoice.from_functions(channel, U=lambda x: (channel.f1[x], channel.fr[x]),
                                    V=lambda x: channel.f2[x], yhat=lambda y: y)


@dataclass(frozen=True)
class CapacityCertificate:
    match: bool
    outer: RateRegion
    achieved: RateRegion
    matched: tuple
    extractor: ExtractorReport


def verify_capacity_match(channel: DeterministicBRC, g: Mapping | None = None,
                          tol: float = TOL) -> CapacityCertificate:
    """Time-share the two W-forwarding choices and compare with the outer bound."""
    if channel.R0 == 0:
        rep = ExtractorReport({y: 0 for y in channel.relay_alphabet()}, Fraction(0),
                              cond_entropy(channel, ["Yr"], ["Y1", "Y2"]), True)
    else:
        rep = find_w_extractor(channel, g)
        if not rep.found:
            raise PreconditionFailed("no W-extractor with H(W) = H(Yr | Y1, Y2)")
        if rep.H_W < channel.R0:
            raise PreconditionFailed(
                f"H(W) = {rep.H_W} is below R0 = {channel.R0}", gap=channel.R0 - rep.H_W)
    r_one = theorem4_region(channel, user_one_boost_choice(channel, rep.g)).region
    r_two = theorem4_region(channel, user_two_boost_choice(channel, rep.g)).region
    achieved = r_one.union_hull(r_two)
    outer = outer_bound(channel)
    exact = all(isinstance(c, Fraction) for v in achieved.vertices + outer.vertices for c in v)
    ok = achieved.same_as(outer, 0 if exact else tol)
    matched = tuple(zip(sorted(outer.vertices), sorted(achieved.vertices))) if ok else ()
    return CapacityCertificate(ok, outer, achieved, matched, rep)


# -- built-in example --------------------------------------------------------

def linear_det_example(R0=2):
    """Five-bit linear deterministic instance with the relay seeing the whole input.

    User one sees the top three bits, user two the top two, the relay sees all
    five, and the two least-significant bits are the relay's private part.

    Returns ``(channel, aux, g)`` with ``aux`` the user-one-boosting choice.
    """
    xs = tuple(range(32))
    channel = DeterministicBRC(
        xs,
        f1={x: x >> 2 for x in xs},
        f2={x: x >> 3 for x in xs},
        fr={x: x for x in xs},
        pmf={x: Fraction(1, 32) for x in xs},
        R0=R0,
    )
    g = {x: x & 0b11 for x in xs}
    rep = check_extractor(channel, g)
    assert rep.found and rep.H_W == 2, "example lost its extractor"
    return channel, user_one_boost_choice(channel, g), g


def overlap_example(R0=1):
    """Variant where user two sees a bit the relay sees but user one does not."""
    xs = tuple(range(32))
    channel = DeterministicBRC(
        xs,
        f1={x: x >> 2 for x in xs},
        f2={x: (x >> 4, (x >> 1) & 1) for x in xs},
        fr={x: x for x in xs},
        pmf={x: Fraction(1, 32) for x in xs},
        R0=R0,
    )
    return channel
