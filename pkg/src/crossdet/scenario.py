"""Scenario files: JSON documents describing a Gaussian or a deterministic channel.

Complex numbers are written as ``[re, im]`` pairs (plain numbers are real),
matrices row-major. Deterministic maps are ``{"input": "output"}`` tables and
pmf entries are numbers or rational strings such as ``"1/32"``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bc import BeamformingPlan, ChannelSpec, identity_plan
from .detlab import DeterministicBRC

DEFAULT_SWEEP = tuple(10.0 ** -k for k in range(9))


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario; the message names the offending field."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass(frozen=True)
class GaussianScenario:
    spec: ChannelSpec
    plan: BeamformingPlan
    sweep: tuple = DEFAULT_SWEEP
    w_r: np.ndarray | None = None
    q: float | None = None
    kind: str = "gaussian"


@dataclass(frozen=True)
class DeterministicScenario:
    channel: DeterministicBRC
    g: dict | None = None
    kind: str = "deterministic"
    extras: dict = field(default_factory=dict)


def _complex(v, name):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    raise ScenarioError(name, f"expected a number or [re, im] pair, got {v!r}")


def _vector(v, name, n=2):
    if not isinstance(v, list) or len(v) != n:
        raise ScenarioError(name, f"expected a list of {n} entries")
    return np.array([_complex(x, f"{name}[{i}]") for i, x in enumerate(v)])


def _matrix(v, name):
    if not isinstance(v, list) or len(v) != 2:
        raise ScenarioError(name, "expected a 2x2 matrix (list of two rows)")
    return np.array([_vector(r, f"{name}[{i}]") for i, r in enumerate(v)])


def _number(doc, key, default=None):
    if key not in doc:
        if default is None:
            raise ScenarioError(key, "missing")
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(key, f"expected a number, got {v!r}")
    return float(v)


def _prob(v, name):
    if isinstance(v, bool):
        raise ScenarioError(name, f"invalid probability {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError):
            pass
    raise ScenarioError(name, f"invalid probability {v!r}")


def _table(doc, key, domain):
    t = doc.get(key)
    if not isinstance(t, dict):
        raise ScenarioError(key, "expected an {input: output} table")
    missing = [x for x in domain if x not in t]
    if missing:
        raise ScenarioError(key, f"map is not total, missing inputs {missing[:5]}")
    return {x: str(t[x]) for x in domain}


def parse_gaussian(doc: dict) -> GaussianScenario:
    H = _matrix(doc.get("H"), "H")
    G = _matrix(doc.get("G"), "G")
    try:
        spec = ChannelSpec(H, G, _number(doc, "N", 1.0), _number(doc, "P"),
                           _number(doc, "R0", 0.0))
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError("channel", str(e)) from None
    plan_doc = doc.get("plan")
    try:
        if plan_doc is None:
            plan = identity_plan(spec.P / 2, spec.P / 2)
        else:
            if not isinstance(plan_doc, dict):
                raise ScenarioError("plan", "expected an object")
            vecs = plan_doc.get("vectors")
            if not isinstance(vecs, list):
                raise ScenarioError("plan.vectors", "expected a list of beams")
            vecs = [_vector(v, f"plan.vectors[{i}]") for i, v in enumerate(vecs)]
            powers = plan_doc.get("powers")
            if not isinstance(powers, list):
                raise ScenarioError("plan.powers", "expected a list of powers")
            plan = BeamformingPlan(tuple(vecs), tuple(powers),
                                   plan_doc.get("order", "user1-first"))
    except ScenarioError:
        raise
    except (ValueError, TypeError) as e:
        raise ScenarioError("plan", str(e)) from None
    if abs(plan.P - spec.P) > 1e-9 * spec.P:
        raise ScenarioError("plan.powers", f"powers sum to {plan.P}, P is {spec.P}")
    sweep = doc.get("sweep", list(DEFAULT_SWEEP))
    if (not isinstance(sweep, list) or not sweep
            or not all(isinstance(n, (int, float)) and not isinstance(n, bool) for n in sweep)):
        raise ScenarioError("sweep", "expected a nonempty list of noise powers")
    sweep = tuple(float(n) for n in sweep)
    if any(n <= 0 for n in sweep) or any(b >= a for a, b in zip(sweep, sweep[1:])):
        raise ScenarioError("sweep", "noise powers must be positive and strictly decreasing")
    quant = doc.get("quantizer", {})
    if not isinstance(quant, dict):
        raise ScenarioError("quantizer", "expected an object")
    w_r = _vector(quant["w_r"], "quantizer.w_r") if "w_r" in quant else None
    if w_r is not None and not np.any(w_r):
        raise ScenarioError("quantizer.w_r", "relay beamformer must be nonzero")
    q = _number(quant, "q") if "q" in quant else None
    if q is not None and not q > 0:
        raise ScenarioError("quantizer.q", "distortion must be positive")
    return GaussianScenario(spec, plan, sweep, w_r, q)


def parse_deterministic(doc: dict) -> DeterministicScenario:
    xs = doc.get("X")
    if not isinstance(xs, list) or not xs:
        raise ScenarioError("X", "expected a nonempty list of input symbols")
    xs = tuple(str(x) for x in xs)
    if len(set(xs)) != len(xs):
        raise ScenarioError("X", "duplicate input symbols")
    f1, f2, fr = (_table(doc, k, xs) for k in ("f1", "f2", "fr"))
    pmf_doc = doc.get("pmf")
    if pmf_doc is None:
        pmf = {x: Fraction(1, len(xs)) for x in xs}
    else:
        if not isinstance(pmf_doc, dict):
            raise ScenarioError("pmf", "expected an {input: probability} table")
        pmf = {x: _prob(pmf_doc.get(x, 0), f"pmf[{x}]") for x in xs}
    R0 = doc.get("R0", 0)
    if isinstance(R0, bool) or not isinstance(R0, (int, float, str)):
        raise ScenarioError("R0", f"invalid link rate {R0!r}")
    try:
        R0 = Fraction(R0) if not isinstance(R0, float) else R0
        channel = DeterministicBRC(xs, f1, f2, fr, pmf, R0)
    except (ValueError, ZeroDivisionError) as e:
        raise ScenarioError("channel", str(e)) from None
    g = doc.get("g")
    if g is not None:
        relay = sorted(set(fr.values()))
        if not isinstance(g, dict) or any(y not in g for y in relay):
            raise ScenarioError("g", "extractor must map every relay output")
        g = {y: str(g[y]) for y in relay}
    return DeterministicScenario(channel, g)


def parse(doc) -> GaussianScenario | DeterministicScenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario", "top level must be an object")
    kind = doc.get("kind", "gaussian")
    if kind == "gaussian":
        return parse_gaussian(doc)
    if kind == "deterministic":
        return parse_deterministic(doc)
    raise ScenarioError("kind", f"unknown scenario kind {kind!r}")


def load(path) -> GaussianScenario | DeterministicScenario:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ScenarioError("scenario", f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError("scenario", f"invalid JSON: {e}") from None
    return parse(doc)


def pinned() -> GaussianScenario:
    """Built-in scenario: H = [[1, .5], [.5, 1]], G = [[1, .3], [.3, 1]], P = 10, R0 = 1."""
    return parse_gaussian({
        "H": [[1, 0.5], [0.5, 1]],
        "G": [[1, 0.3], [0.3, 1]],
        "N": 1.0, "P": 10.0, "R0": 1.0,
    })
