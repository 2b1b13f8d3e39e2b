"""Truncated Toeplitz matrices and their spectral functionals.

``M[j, k] = int e_k conj(e_j) e^(-alpha|xi|^2) dmu`` in the orthonormal basis
of a :class:`~fockbench.fock_model.FockModel`.  For radial measures on a
radial model the matrix is diagonal; atoms give an exact finite sum; other
densities go through the Fourier-in-angle Gram matrix.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GaugeError, SpectrumError
from .fock_model import FockModel
from .measures import MeasureSpec, average_functions
from .quadrature import DEFAULT_PLAN, QuadraturePlan, gram_matrix
from .weights import Weight

PSD_TOL = 1e-10
GROWTH = 1.5


class OutsideHypothesisWarning(UserWarning):
    """A quantity was computed outside the range where the criteria apply."""


@dataclass(frozen=True, eq=False)
class ToeplitzMatrix:
    """Hermitian truncation of ``T_mu``.

    ``criterion_unbounded`` is set when a coarse scan of the averaging
    function keeps growing, i.e. ``T_mu`` is not expected to be bounded.
    """

    entries: np.ndarray
    model: FockModel
    measure: MeasureSpec
    criterion_unbounded: bool = False
    precheck: tuple = ()

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def leading(self, n: int) -> np.ndarray:
        """Principal ``n x n`` block (the matrix of the degree ``n-1`` truncation)."""
        return self.entries[:n, :n]

    def to_dict(self) -> dict:
        M = self.entries
        return {
            "size": self.size,
            "entries": [[[float(v.real), float(v.imag)] for v in row] for row in M],
            "criterion_unbounded": self.criterion_unbounded,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues ``s_1 >= s_2 >= ... >= 0``."""

    values: np.ndarray
    min_raw: float = 0.0

    def __len__(self):
        return self.values.size

    def to_dict(self) -> dict:
        return {"values": self.values.tolist()}

    def rows(self):
        """``(n, s_n)`` pairs, ``n`` starting at 1."""
        return [(i + 1, float(v)) for i, v in enumerate(self.values)]


def _coarse_precheck(m: FockModel, mu: MeasureSpec, r: float, plan: QuadraturePlan,
                     extents=(1.0, 2.0, 4.0, 8.0), angles: int = 8):
    pts = [0j] + [E * np.exp(2j * np.pi * k / angles) for E in extents for k in range(angles)]
    vals = average_functions(mu, m.weight, r, np.array(pts), m.alpha, plan)
    sups = []
    for E in extents:
        sups.append(float(np.max(vals[np.abs(np.array(pts)) <= E + 1e-12])))
    return tuple(sups), diverges(sups)


def diverges(values, factor: float = GROWTH, steps: int = 3) -> bool:
    """Growth by ``factor`` on each of the last ``min(steps, len-1)`` steps."""
    v = np.asarray(values, dtype=float)
    k = min(steps, v.size - 1)
    if k < 1:
        return False
    tail = v[-(k + 1):]
    if not np.isfinite(tail[-1]):
        return True
    with np.errstate(divide="ignore", invalid="ignore"):
        return bool(np.all(tail[1:] >= factor * tail[:-1]) and tail[0] > 0)


def assemble(m: FockModel, mu: MeasureSpec, plan: QuadraturePlan | None = None,
             precheck: bool = True, r: float = 0.3) -> ToeplitzMatrix:
    """Matrix of ``T_mu`` on the polynomials of degree ``<= N``."""
    plan = plan or m.plan
    N = m.degree
    if mu.kind == "atomic":
        locs = np.array([loc for loc, _ in mu.atoms])
        mass = np.array([mm for _, mm in mu.atoms])
        E = m.basis_values(locs, damped=True)
        M = mu.scale * (np.conj(E).T * mass[None, :]) @ E
    else:
        dens = mu.density_for(m.weight, m.alpha, plan)
        G, _ = gram_matrix(dens, m.alpha, N, m.log_scale, plan)
        if m.coef is None:
            M = G
        else:
            M = np.conj(m.coef) @ G @ m.coef.T
        M = mu.scale * M
    M = 0.5 * (M + np.conj(M).T)
    sups, flag = (), False
    if precheck:
        sups, flag = _coarse_precheck(m, mu, r, plan)
    return ToeplitzMatrix(M, m, mu, flag, sups)


def spectrum(T, tol: float = PSD_TOL) -> Spectrum:
    """Eigenvalues of a Hermitian PSD matrix, descending, clipped at 0.

    Raises
    ------
    SpectrumError
        If an eigenvalue is below ``-tol * ||M||``.
    """
    M = T.entries if isinstance(T, ToeplitzMatrix) else np.asarray(T)
    if M.size == 0:
        return Spectrum(np.zeros(0))
    try:
        ev = np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"Hermitian eigensolver failed: {exc}") from None
    ev = ev[::-1]
    scale = max(abs(ev[0]), abs(ev[-1]))
    if ev[-1] < -tol * scale:
        raise SpectrumError(
            f"eigenvalue {ev[-1]:.3e} below -{tol:g}*||M|| ({scale:.3e}); assembly too inaccurate")
    return Spectrum(np.clip(ev, 0.0, None), float(ev[-1]))


def operator_norm(S: Spectrum) -> float:
    return float(S.values[0]) if len(S) else 0.0


def schatten_norm(S: Spectrum, p: float) -> float:
    """``(sum s_n^p)^(1/p)``; values of ``p < 1`` warn."""
    if p <= 0:
        raise ValueError("p must be positive")
    if p < 1:
        warnings.warn(f"Schatten p={p} < 1 lies outside the tested range", OutsideHypothesisWarning)
    top = operator_norm(S)
    if top == 0:
        return 0.0
    return float(top * np.sum((S.values / top) ** p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# gauges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchattenGauge:
    """Convex increasing ``h`` with ``h(0) = 0`` and a scale ``C``.

    ``kind`` is ``power`` (``h(t) = t^p``), ``log_decay`` (the piecewise gauge
    built from ``eta(t) = (1 + gamma + log t)^(-gamma)``) or ``piecewise``
    (linear interpolation of ``knots``, continued with the last slope).
    """

    kind: str = "power"
    p: float = 1.0
    gamma: float = 1.0
    knots: tuple = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "log_decay", "piecewise"):
            raise GaugeError(f"unknown gauge kind {self.kind!r}")
        if self.kind == "log_decay" and not self.gamma > 0:
            raise GaugeError("gamma must be positive")
        if self.kind == "piecewise":
            knots = tuple((float(t), float(h)) for t, h in self.knots)
            if len(knots) < 2 or knots[0] != (0.0, 0.0):
                raise GaugeError("piecewise gauge needs knots starting at (0, 0)")
            object.__setattr__(self, "knots", knots)
        if not self.scale > 0:
            raise GaugeError("scale must be positive")
        self.verify()

    @classmethod
    def power(cls, p: float, scale: float = 1.0) -> "SchattenGauge":
        return cls(kind="power", p=float(p), scale=scale)

    @classmethod
    def log_decay(cls, gamma: float, scale: float = 1.0) -> "SchattenGauge":
        return cls(kind="log_decay", gamma=float(gamma), scale=scale)

    @classmethod
    def piecewise(cls, knots, scale: float = 1.0) -> "SchattenGauge":
        return cls(kind="piecewise", knots=tuple(knots), scale=scale)

    def with_scale(self, scale: float) -> "SchattenGauge":
        return SchattenGauge(self.kind, self.p, self.gamma, self.knots, float(scale))

    @property
    def name(self) -> str:
        if self.kind == "power":
            return f"power:{self.p:g}"
        if self.kind == "log_decay":
            return f"log_decay:{self.gamma:g}"
        return "piecewise"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return t ** self.p
        if self.kind == "log_decay":
            g = self.gamma
            knee = (1.0 + g) ** (-g)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                small = np.exp(1.0 + g - np.where(t > 0, t, 1.0) ** (-1.0 / g))
            small = np.where(t > 0, small, 0.0)
            large = (1.0 + g) ** (1.0 + g) * t / g - 1.0 / g
            return np.where(t <= knee, small, large)
        ts, hs = zip(*self.knots)
        slope = (hs[-1] - hs[-2]) / (ts[-1] - ts[-2])
        return np.where(t <= ts[-1], np.interp(t, ts, hs), hs[-1] + slope * (t - ts[-1]))

    def verify(self, top: float = 10.0, samples: int = 4001):
        """Check ``h(0) = 0``, monotonicity and convexity on ``[0, top]``."""
        t = np.linspace(0.0, top, samples)
        h = self(t)
        if abs(float(h[0])) > 0:
            raise GaugeError("gauge must vanish at 0", point=0.0)
        if np.any(np.diff(h) < 0):
            i = int(np.argmax(np.diff(h) < 0))
            raise GaugeError(f"gauge decreases near t={t[i]:.4g}", point=float(t[i]))
        d2 = h[:-2] - 2 * h[1:-1] + h[2:]
        if np.any(d2 < -1e-9):
            i = int(np.argmax(d2 < -1e-9))
            raise GaugeError(f"gauge is not convex near t={t[i + 1]:.4g}", point=float(t[i + 1]))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "scale": self.scale}
        if self.kind == "power":
            out["p"] = self.p
        elif self.kind == "log_decay":
            out["gamma"] = self.gamma
        else:
            out["knots"] = [list(k) for k in self.knots]
        return out


def schatten_h_sum(S: Spectrum, g: SchattenGauge) -> float:
    """``sum_n h(C s_n)``."""
    return float(np.sum(g(g.scale * S.values)))


@dataclass(frozen=True)
class DecayProfile:
    """``eta(t) = (1 + gamma + log t)^(-gamma)`` for ``t >= 1``."""

    gamma: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return (1.0 + self.gamma + np.log(t)) ** (-self.gamma)


@dataclass(frozen=True)
class DecayFit:
    holds: bool
    K: float
    K_next: float | None = None
    at_edge: bool = False


def _decay_constant(S: Spectrum, eta, n_min: int) -> tuple:
    """``(K, n*)``: the max of ``s_n / eta(n)`` over ``n >= n_min`` and where it occurs."""
    n = np.arange(1, len(S) + 1)
    sel = n >= n_min
    if not np.any(sel):
        return 0.0, 0
    q = S.values[sel] / eta(n[sel])
    i = int(np.argmax(q))
    return float(q[i]), int(n[sel][i])


def decay_fit(S: Spectrum, eta=DecayProfile(1.0), n_min: int = 2,
              S_next: Spectrum | None = None, stability: float = 0.2) -> DecayFit:
    """``K = max_{n >= n_min} s_n / eta(n)`` and whether it is stable.

    ``S_next`` is the spectrum of a larger truncation.  The bound holds when
    ``K`` is finite, moves by at most ``stability`` relative to it, and is not
    attained at the last index of ``S_next`` (a maximum at the truncation
    edge means the ratio is still growing with ``N``).
    """
    if n_min < 2:
        raise ValueError("n_min must be >= 2")
    K, _ = _decay_constant(S, eta, n_min)
    if S_next is None:
        return DecayFit(bool(np.isfinite(K)), K)
    K2, n2 = _decay_constant(S_next, eta, n_min)
    if K == 0 and K2 == 0:
        return DecayFit(True, K, K2)
    edge = n2 == len(S_next)
    ok = bool(np.isfinite(K) and K > 0 and abs(K2 / K - 1.0) <= stability and not edge)
    return DecayFit(ok, K, K2, edge)


# ---------------------------------------------------------------------------
# criteria on the geometric side
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RingProxy:
    """Ring suprema of the averaging function."""

    rings: tuple
    sups: tuple
    limsup: float
    decreasing: bool


def tends_to_zero(values, drop: float = 0.5) -> bool:
    """Last value at most ``drop`` times the maximum and not above the previous one."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return False
    top = float(np.max(v))
    if top == 0:
        return True
    return bool(v[-1] <= drop * top and v[-1] <= v[-2])


def ring_points(lo: float, hi: float, radial: bool, samples: int = 4, angles: int = 16):
    rad = np.linspace(lo, hi, samples, endpoint=False)
    if radial:
        return rad.astype(complex)
    ph = np.exp(2j * np.pi * (np.arange(angles) + 0.5) / angles)
    return (rad[:, None] * ph[None, :]).ravel()


def essential_norm_proxy(mu: MeasureSpec, w: Weight, r: float, rings, alpha: float = 1.0,
                         plan: QuadraturePlan = DEFAULT_PLAN, samples: int = 4,
                         angles: int = 16) -> RingProxy:
    """Sup of the averaging function over each ring ``rings[k] <= |z| < rings[k+1]``."""
    rings = tuple(float(x) for x in rings)
    if len(rings) < 3 or np.any(np.diff(rings) <= 0):
        raise ValueError("need at least 3 increasing ring radii")
    radial = _radial_measure(mu, w, alpha, plan)
    sups = []
    for lo, hi in zip(rings[:-1], rings[1:]):
        pts = ring_points(lo, hi, radial, samples, angles)
        if mu.kind == "atomic":
            locs = np.array([loc for loc, _ in mu.atoms])
            pts = np.concatenate([pts, locs[(np.abs(locs) >= lo) & (np.abs(locs) < hi)]])
        sups.append(float(np.max(average_functions(mu, w, r, pts, alpha, plan))))
    return RingProxy(rings, tuple(sups), sups[-1], tends_to_zero(sups))


def _radial_measure(mu: MeasureSpec, w: Weight, alpha: float, plan: QuadraturePlan) -> bool:
    if not w.radial:
        return False
    if mu.kind == "atomic":
        return all(loc == 0 for loc, _ in mu.atoms)
    return bool(mu.density_for(w, alpha, plan).radial)


def berezin_from_matrix(T: ToeplitzMatrix, z) -> np.ndarray:
    """``<T b_z, b_z>`` from the truncated matrix (quadratic-form route)."""
    m = T.model
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    e = m.basis_values(z)
    b = np.conj(e) / np.sqrt(np.sum(np.abs(e) ** 2, axis=-1))[:, None]
    return np.real(np.einsum("pj,jk,pk->p", np.conj(b), T.entries, b))


def rayleigh_check(T: ToeplitzMatrix, count: int = 100, seed: int = 0) -> tuple:
    """Max of the quadratic form over random unit vectors, and at the top eigenvector."""
    rng = np.random.default_rng(seed)
    n = T.size
    X = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    X /= np.linalg.norm(X, axis=1)[:, None]
    q = np.real(np.einsum("pj,jk,pk->p", np.conj(X), T.entries, X))
    ev, vec = np.linalg.eigh(T.entries)
    v = vec[:, -1]
    top = float(np.real(np.conj(v) @ T.entries @ v))
    return float(np.max(q)), top
