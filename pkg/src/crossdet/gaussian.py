"""Mutual information for jointly circularly-symmetric complex Gaussian signals.

Signals are declared as finite linear combinations of independent zero-mean
complex Gaussian sources. All information quantities are in bits.

Internally every covariance is kept in square-root form: a signal tuple is a
matrix ``W`` of whitened coefficient rows (``K = W W^*``). Conditioning on a
tuple ``C`` projects rows onto the orthogonal complement of ``C``'s row span,
which is the Schur complement ``K_AA - K_AC K_CC^-1 K_CA`` without the
cancellation error of forming it from covariances. Log-determinants come from
the triangular factor of a QR decomposition of ``W^*``, i.e. the Cholesky
factor of ``K``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

# Whitened rows whose residual norm falls below this fraction of the largest
# row norm count as linearly dependent (covariance eigenvalue ratio 1e-18).
AMP_RTOL = 1e-9
ORACLE_TOL = 1e-7
JITTER_SCALE = 1e-12


class SingularCovariance(ValueError):
    """Raised when a covariance needed for conditioning is (numerically) singular."""


class OracleMismatch(RuntimeError):
    """Raised when the Schur-complement and chain-rule routes disagree."""


@dataclass(frozen=True)
class GaussianSystem:
    """Immutable linear-Gaussian model.

    Parameters
    ----------
    sources : mapping name -> variance
        Independent CN(0, variance) latent variables.
    signals : mapping name -> {source name: complex coefficient}
        Each signal is a linear combination of sources. Source names are
        accepted wherever a signal name is (the source itself).
    groups : mapping name -> tuple of signal names
        Named tuples usable wherever a signal name is accepted.
    jitter : bool
        Add ``1e-12 * trace`` to the diagonal of every covariance used for an
        information quantity. Results computed this way should be reported
        as jittered.
    """

    sources: Mapping[str, float]
    signals: Mapping[str, Mapping[str, complex]]
    groups: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    jitter: bool = False

    def __post_init__(self):
        sources = {str(k): float(v) for k, v in self.sources.items()}
        for name, var in sources.items():
            if not np.isfinite(var) or var < 0:
                raise ValueError(f"source {name!r} has invalid variance {var}")
        signals = {}
        for name, coeffs in self.signals.items():
            if name in sources:
                raise ValueError(f"signal {name!r} shadows a source name")
            row = {}
            for src, c in coeffs.items():
                if src not in sources:
                    raise NameError(f"signal {name!r} references undeclared source {src!r}")
                row[src] = complex(c)
            signals[name] = MappingProxyType(row)
        groups = {}
        for name, members in self.groups.items():
            if name in signals or name in sources:
                raise ValueError(f"group {name!r} shadows a signal name")
            for m in members:
                if m not in signals and m not in sources:
                    raise NameError(f"group {name!r} references undeclared signal {m!r}")
            groups[name] = tuple(members)
        object.__setattr__(self, "sources", MappingProxyType(sources))
        object.__setattr__(self, "signals", MappingProxyType(signals))
        object.__setattr__(self, "groups", MappingProxyType(groups))
        object.__setattr__(self, "_order", tuple(sources))

    def extend(self, sources=None, signals=None, groups=None) -> "GaussianSystem":
        """Return a new system with extra sources, signals and groups declared."""
        return GaussianSystem(
            {**self.sources, **(sources or {})},
            {**self.signals, **(signals or {})},
            {**self.groups, **(groups or {})},
            jitter=self.jitter,
        )

    def with_jitter(self, on: bool = True) -> "GaussianSystem":
        return GaussianSystem(self.sources, self.signals, self.groups, jitter=on)

    def expand(self, names: Sequence[str]) -> list[str]:
        if isinstance(names, str):
            names = [names]
        out = []
        for n in names:
            if n in self.groups:
                out.extend(self.groups[n])
            elif n in self.signals or n in self.sources:
                out.append(n)
            else:
                raise NameError(f"unknown signal {n!r}")
        return out

    def coefficients(self, names: Sequence[str]) -> np.ndarray:
        """Coefficient matrix (rows = signals, columns = sources in declaration order)."""
        names = self.expand(names)
        C = np.zeros((len(names), len(self._order)), dtype=complex)
        index = {s: j for j, s in enumerate(self._order)}
        for i, n in enumerate(names):
            row = self.signals.get(n, {n: 1})
            for src, c in row.items():
                C[i, index[src]] = c
        return C

    def source_variances(self) -> np.ndarray:
        return np.array([self.sources[s] for s in self._order])

    def whitened(self, names: Sequence[str]) -> np.ndarray:
        """Square-root factor ``W`` with ``covariance(names) = W W^*``."""
        return self.coefficients(names) * np.sqrt(self.source_variances())


def covariance(system: GaussianSystem, names: Sequence[str]) -> np.ndarray:
    """Covariance ``K[i, j] = sum_s var(s) c_i(s) conj(c_j(s))``, Hermitian by construction."""
    C = system.coefficients(names)
    d = system.source_variances()
    K = (C * d) @ C.conj().T
    return 0.5 * (K + K.conj().T)


# -- square-root helpers -------------------------------------------------------

def _project_out(W: np.ndarray, Q: np.ndarray) -> np.ndarray:
    if Q.shape[0] == 0 or W.shape[0] == 0:
        return W
    return W - (W @ Q.conj().T) @ Q


def _independent(W: np.ndarray, tol: float) -> tuple[list[int], np.ndarray]:
    """Greedy maximal linearly independent rows and an orthonormal basis of their span."""
    keep: list[int] = []
    basis: list[np.ndarray] = []
    for i, row in enumerate(W):
        r = row.copy()
        for _ in range(2):  # re-orthogonalize once for stability
            for q in basis:
                r = r - np.vdot(q, r) * q
        nr = np.linalg.norm(r)
        if nr > tol:
            keep.append(i)
            basis.append(r / nr)
    Q = np.array(basis) if basis else np.zeros((0, W.shape[1]), dtype=complex)
    return keep, Q


def _logdet_rows(W: np.ndarray) -> float:
    """``log2 det(W W^*)`` from the Cholesky factor obtained by QR of ``W^*``."""
    if W.shape[0] == 0:
        return 0.0
    R = np.linalg.qr(W.conj().T, mode="r")
    d = np.abs(np.diag(R))
    if d.size < W.shape[0] or np.any(d == 0):
        raise SingularCovariance("covariance is not positive definite")
    return 2.0 * float(np.sum(np.log2(d)))


def _mi_rows(Wa: np.ndarray, Wb: np.ndarray, tol: float) -> float:
    ia, Qa = _independent(Wa, tol)
    ib, Qb = _independent(Wb, tol)
    if len(ia) < Wa.shape[0] and len(ib) < Wb.shape[0]:
        raise SingularCovariance(
            "both marginal covariances are singular; use a reduced representation")
    if not ia or not ib:
        return 0.0
    Wa = Wa[ia]
    Ra = _project_out(Wa, Qb)
    if len(_independent(Ra, tol)[0]) < Ra.shape[0]:
        raise SingularCovariance("one side is a deterministic function of the other")
    return max(_logdet_rows(Wa) - _logdet_rows(Ra), 0.0)


def _factors(system: GaussianSystem, groups: Sequence[list[str]]):
    """Whitened rows for each name list; with jitter every row gets a private source."""
    names = [n for g in groups for n in g]
    W = system.whitened(names)
    if system.jitter and W.shape[0]:
        j = JITTER_SCALE * float(np.sum(np.abs(W) ** 2))
        W = np.hstack([W, np.sqrt(j) * np.eye(W.shape[0])])
    norms = np.linalg.norm(W, axis=1)
    tol = AMP_RTOL * (float(norms.max()) if norms.size else 0.0)
    out, start = [], 0
    for g in groups:
        out.append(W[start:start + len(g)])
        start += len(g)
    return out, tol


def mutual_info(system: GaussianSystem, A: Sequence[str], B: Sequence[str]) -> float:
    """``I(A; B) = log2 det K_AA - log2 det(K_AA - K_AB K_BB^-1 K_BA)`` in bits."""
    (Wa, Wb), tol = _factors(system, [system.expand(A), system.expand(B)])
    return _mi_rows(Wa, Wb, tol)


def cond_mutual_info(system: GaussianSystem, A: Sequence[str], B: Sequence[str],
                     C: Sequence[str] = ()) -> float:
    """``I(A; B | C)`` in bits.

    Computed by conditioning on ``C`` (Schur complement) and cross-checked
    against the chain rule ``I(A; B, C) - I(A; C)``.
    """
    a, b, c = system.expand(A), system.expand(B), system.expand(C)
    if not c:
        return mutual_info(system, a, b)
    (Wa, Wb, Wc), tol = _factors(system, [a, b, c])
    ic, Qc = _independent(Wc, tol)
    if len(ic) < len(c):
        raise SingularCovariance("conditioning covariance cov(C) is singular")
    schur = _mi_rows(_project_out(Wa, Qc), _project_out(Wb, Qc), tol)
    chain = _mi_rows(Wa, np.vstack([Wb, Wc]), tol) - _mi_rows(Wa, Wc, tol)
    if abs(schur - chain) > ORACLE_TOL:
        raise OracleMismatch(
            f"Schur route {schur!r} and chain-rule route {chain!r} disagree")
    return schur
