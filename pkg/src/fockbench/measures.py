"""Positive measures, their averaging functions and Berezin transforms.

A :class:`MeasureSpec` is one of

* ``atomic``   -- finitely many point masses
* ``density``  -- ``rho dA`` with ``rho`` an expression (may use ``w``) or a
  :class:`~fockbench.quadrature.PlaneFunction`
* ``pullback`` -- the pull-back measure of a weighted composition with an
  affine symbol ``phi(z) = a z + b``
* ``volterra`` -- ``|g'|^2 w(D(z,1)) / (1+|z|)^2 dA`` for a polynomial ``g``

Induced densities depend on the weight (and for pull-backs on ``alpha``);
they are built on first use and cached per ``(weight, alpha, plan)``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateMapError, MeasureError
from .expression import Expression
from .fock_model import FockModel, _require_inside
from .quadrature import (
    DEFAULT_PLAN,
    TWO_PI,
    PlaneFunction,
    QuadraturePlan,
    disk_integrals,
    radial_rule,
)
from .weights import DiskAveragedWeight, DiskSpec, Weight, disk_masses

MEASURE_KINDS = ("atomic", "density", "pullback", "volterra")


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


class _NonNegative:
    @staticmethod
    def _check(v):
        v = np.asarray(v, dtype=float)
        if v.size and np.any(v < 0):
            raise MeasureError("density is negative at a quadrature node")
        return v


class ExpressionDensity(_NonNegative, PlaneFunction):
    """Density given by an expression in ``r, x, y`` and optionally ``w``."""

    def __init__(self, expr: Expression, w: Weight | None = None):
        if expr.uses_weight and w is None:
            raise MeasureError(f"density {expr.text!r} refers to w but no weight was given")
        self.expr = expr
        self.w = w
        uses_w = expr.uses_weight
        self.radial = expr.radial and (not uses_w or w.radial)
        self.breakpoints = w.breakpoints if uses_w and w.radial else ()
        if not self.radial:
            # ``r`` and radial weights are only non-smooth about the origin
            self.focus = 0j

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        wv = self.w(z) if self.expr.uses_weight else None
        return self._check(self.expr.evaluate(z, wv))

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        wv = self.w.profile(s) if self.expr.uses_weight else None
        return self._check(self.expr.evaluate(s.astype(complex), wv))


@dataclass(frozen=True)
class Psi:
    """Multiplier of a weighted composition: a polynomial or ``e^(c z)``."""

    poly: tuple = (1.0,)
    exp: complex | None = None

    @classmethod
    def from_config(cls, spec) -> "Psi":
        if spec is None:
            return cls()
        if isinstance(spec, dict):
            if "exp" in spec:
                return cls(poly=(), exp=_as_complex(spec["exp"]))
            if "poly" in spec:
                return cls(poly=tuple(_as_complex(c) for c in spec["poly"]))
        raise MeasureError(f"psi must be {{poly: [...]}} or {{exp: c}}, got {spec!r}")

    @property
    def constant(self) -> bool:
        if self.exp is not None:
            return self.exp == 0
        return all(c == 0 for c in self.poly[1:])

    def log_abs2(self, v):
        v = np.asarray(v, dtype=complex)
        if self.exp is not None:
            return 2.0 * np.real(self.exp * v)
        val = np.polyval(np.array(self.poly[::-1], dtype=complex), v)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(val) ** 2)

    def to_dict(self) -> dict:
        if self.exp is not None:
            return {"exp": _pair(self.exp)}
        return {"poly": [_pair(c) for c in self.poly]}


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _pair(c: complex):
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


class PullbackDensity(_NonNegative, PlaneFunction):
    """``|psi(v)|^2 e^(-alpha(|v|^2 - |u|^2)) w(v) / |a|^2`` with ``v = (u - b)/a``."""

    def __init__(self, a: complex, b: complex, psi: Psi, w: Weight, alpha: float):
        if a == 0:
            raise DegenerateMapError("pull-back needs a != 0 (the map is constant)")
        self.a, self.b, self.psi, self.w, self.alpha = complex(a), complex(b), psi, w, float(alpha)
        self.radial = bool(self.b == 0 and psi.constant and w.radial)
        scale = abs(self.a)
        if w.radial:
            # ``w(v)`` is radial about ``v = 0``, i.e. about ``u = b``
            self.breakpoints = tuple(scale * t for t in w.breakpoints)
            if not self.radial:
                self.focus = self.b

    def log_values(self, u):
        u = np.asarray(u, dtype=complex)
        v = (u - self.b) / self.a
        with np.errstate(divide="ignore"):
            lw = np.log(np.asarray(self.w(v), dtype=float))
        return (self.psi.log_abs2(v) - self.alpha * (np.abs(v) ** 2 - np.abs(u) ** 2)
                + lw - 2 * np.log(abs(self.a)))

    def __call__(self, u):
        return self._check(np.exp(self.log_values(u)))

    def log_profile(self, s):
        return self.log_values(np.asarray(s, dtype=float).astype(complex))

    def profile(self, s):
        return self._check(np.exp(self.log_profile(s)))


class VolterraDensity(_NonNegative, PlaneFunction):
    """``|g'(z)|^2 w(D(z,1)) / (1+|z|)^2`` for a polynomial ``g`` (constant term first)."""

    def __init__(self, g, w: Weight, plan: QuadraturePlan = DEFAULT_PLAN):
        g = np.trim_zeros(np.asarray([_as_complex(c) for c in g], dtype=complex), "b")
        self.g = g
        self.dg = np.array([k * g[k] for k in range(1, g.size)], dtype=complex)
        self.degree = max(g.size - 1, 0)
        self.beyond_hypothesis = self.degree > 1
        self.is_zero = self.dg.size == 0 or not np.any(self.dg)
        self.w = w
        self.what = DiskAveragedWeight(w, 1.0, plan)
        self.radial = bool(w.radial and self.degree <= 1)
        self.breakpoints = self.what.breakpoints

    def _dg_abs2(self, z):
        if self.is_zero:
            return np.zeros(np.shape(z))
        return np.abs(np.polyval(self.dg[::-1], z)) ** 2

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.is_zero:
            return np.zeros(z.shape)
        return self._check(self._dg_abs2(z) * self.what(z) / (1.0 + np.abs(z)) ** 2)

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        if self.is_zero:
            return np.zeros(s.shape)
        c = np.abs(self.dg[0]) ** 2
        return self._check(c * self.what.profile(s) / (1.0 + s) ** 2)


def pullback_density(a: complex, b: complex, psi, w: Weight, alpha: float) -> PullbackDensity:
    """Density of the pull-back measure of ``W_{phi,psi}`` with ``phi(z) = a z + b``.

    Raises
    ------
    DegenerateMapError
        If ``a == 0``.
    """
    if not isinstance(psi, Psi):
        psi = Psi.from_config(psi)
    return PullbackDensity(a, b, psi, w, alpha)


def volterra_density(g, w: Weight, plan: QuadraturePlan = DEFAULT_PLAN) -> VolterraDensity:
    """Density of the measure attached to the Volterra operator with symbol ``g``."""
    return VolterraDensity(g, w, plan)


# ---------------------------------------------------------------------------
# measure specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """A positive measure; see the module docstring for the kinds.

    ``scale`` multiplies the whole measure.  Use :meth:`density_for` to get
    the materialized density for a weight.
    """

    kind: str
    atoms: tuple = ()
    density: object = None
    pullback: tuple | None = None
    volterra: tuple = ()
    scale: float = 1.0
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: object = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise MeasureError(f"unknown measure kind {self.kind!r}")
        if not self.scale > 0:
            raise MeasureError("scale must be positive")
        if self.kind == "atomic":
            atoms = tuple((complex(z), float(m)) for z, m in self.atoms)
            if not atoms:
                raise MeasureError("atomic measure needs at least one atom")
            if any(not m > 0 for _, m in atoms):
                raise MeasureError("atom masses must be positive")
            object.__setattr__(self, "atoms", atoms)
        if self.kind == "density":
            if isinstance(self.density, str):
                object.__setattr__(self, "density", Expression(self.density, allow_weight=True))
            elif not isinstance(self.density, (Expression, PlaneFunction)):
                raise MeasureError("density must be an expression or a PlaneFunction")
        if self.kind == "pullback":
            a, b, psi = self.pullback
            if complex(a) == 0:
                raise DegenerateMapError("pull-back needs a != 0 (the map is constant)")
            if not isinstance(psi, Psi):
                psi = Psi.from_config(psi)
            object.__setattr__(self, "pullback", (complex(a), complex(b), psi))
        if self.kind == "volterra":
            object.__setattr__(self, "volterra", tuple(_as_complex(c) for c in self.volterra))

    # constructors ---------------------------------------------------------

    @classmethod
    def atomic(cls, atoms, label: str = "") -> "MeasureSpec":
        return cls(kind="atomic", atoms=tuple(atoms), label=label)

    @classmethod
    def from_density(cls, density, label: str = "") -> "MeasureSpec":
        return cls(kind="density", density=density, label=label)

    @classmethod
    def weight_measure(cls, label: str = "w dA") -> "MeasureSpec":
        """``w dA`` for whichever weight the measure is used with."""
        return cls(kind="density", density="w", label=label)

    @classmethod
    def from_pullback(cls, a, b=0.0, psi=None, label: str = "") -> "MeasureSpec":
        return cls(kind="pullback", pullback=(a, b, psi if psi is not None else Psi()), label=label)

    @classmethod
    def from_volterra(cls, g, label: str = "") -> "MeasureSpec":
        return cls(kind="volterra", volterra=tuple(g), label=label)

    def scaled(self, c: float) -> "MeasureSpec":
        return MeasureSpec(kind=self.kind, atoms=self.atoms, density=self.density,
                           pullback=self.pullback, volterra=self.volterra,
                           scale=self.scale * float(c), label=self.label)

    # properties -----------------------------------------------------------

    @property
    def beyond_hypothesis(self) -> bool:
        """Volterra symbol of degree > 1."""
        return self.kind == "volterra" and len(np.trim_zeros(np.array(self.volterra), "b")) > 2

    def density_for(self, w: Weight, alpha: float = 1.0,
                    plan: QuadraturePlan = DEFAULT_PLAN) -> PlaneFunction | None:
        """Density of the unscaled measure against ``dA`` (``None`` for atoms)."""
        if self.kind == "atomic":
            return None
        key = (w, float(alpha), plan)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.kind == "density":
            if isinstance(self.density, Expression):
                dens = ExpressionDensity(self.density, w)
            else:
                dens = self.density
        elif self.kind == "pullback":
            a, b, psi = self.pullback
            dens = PullbackDensity(a, b, psi, w, alpha)
        else:
            dens = VolterraDensity(self.volterra, w, plan)
        with self._lock:
            return self._cache.setdefault(key, dens)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "label": self.label, "scale": self.scale}
        if self.kind == "atomic":
            out["atoms"] = [[z.real, z.imag, m] for z, m in self.atoms]
        elif self.kind == "density":
            out["density"] = getattr(self.density, "text", repr(self.density))
        elif self.kind == "pullback":
            a, b, psi = self.pullback
            out["pullback"] = {"a": _pair(a), "b": _pair(b), "psi": psi.to_dict()}
        else:
            out["volterra"] = {"g": [_pair(c) for c in self.volterra]}
        return out


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


def measure_disk_masses(mu: MeasureSpec, centers, radius: float, w: Weight | None = None,
                        alpha: float = 1.0, plan: QuadraturePlan = DEFAULT_PLAN):
    """``mu(D(c, radius))`` for an array of centres.

    Atoms count when strictly inside the disk.  Density kinds that depend on
    the weight need ``w``.
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    if not radius > 0:
        raise ValueError("radius must be positive")
    if mu.kind == "atomic":
        out = np.zeros(centers.size)
        for loc, mass in mu.atoms:
            out += np.where(np.abs(loc - centers) < radius, mass, 0.0)
        return mu.scale * out
    if w is None:
        if mu.kind != "density" or (isinstance(mu.density, Expression) and mu.density.uses_weight):
            raise MeasureError(f"{mu.kind} measure needs a weight")
        w = Weight.constant(1.0)
    dens = mu.density_for(w, alpha, plan)
    if dens.is_zero:
        return np.zeros(centers.size)
    return mu.scale * disk_integrals(dens, centers, radius, plan)


def measure_disk_mass(mu: MeasureSpec, d: DiskSpec, w: Weight | None = None, alpha: float = 1.0,
                      plan: QuadraturePlan = DEFAULT_PLAN) -> float:
    """``mu(D)``."""
    return float(measure_disk_masses(mu, [d.center], d.radius, w, alpha, plan)[0])


def average_functions(mu: MeasureSpec, w: Weight, r: float, z, alpha: float = 1.0,
                      plan: QuadraturePlan = DEFAULT_PLAN):
    """``mu(D(z, r)) / w(D(z, r))`` over an array of points."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if w.radial:
        # the disk mass only depends on |z|
        s, inv = np.unique(np.abs(z), return_inverse=True)
        den = disk_masses(w, s.astype(complex), r, plan)[inv.ravel()]
    else:
        den = disk_masses(w, z, r, plan)
    if np.any(den <= 0):
        raise MeasureError("weight mass of a disk is zero")
    return measure_disk_masses(mu, z, r, w, alpha, plan) / den


def average_function(mu: MeasureSpec, w: Weight, r: float, z: complex, alpha: float = 1.0,
                     plan: QuadraturePlan = DEFAULT_PLAN) -> float:
    """The averaging function ``mu(D(z,r)) / w(D(z,r))`` at one point."""
    return float(average_functions(mu, w, r, [z], alpha, plan)[0])


def _normalized_coefficients(m: FockModel, z):
    """``beta`` with ``b_z(xi) = sum_k beta_k u_k(xi)``, one row per point."""
    e = m.basis_values(z)
    norm = np.sqrt(np.sum(np.abs(e) ** 2, axis=-1))
    beta = np.conj(e) / norm[:, None]
    if m.coef is not None:
        beta = beta @ m.coef
    return beta


def berezin_transforms(m: FockModel, mu: MeasureSpec, z, plan: QuadraturePlan | None = None):
    """``int |b_z(xi)|^2 e^(-alpha|xi|^2) dmu(xi)`` for an array of points.

    Atoms are summed exactly.  Densities are integrated on a polar grid:
    composite Gauss-Legendre in radius (cut off where the integrand has
    dropped by ``plan.log_drop``) and an FFT in angle.  Radial densities use
    the closed-form angular mean of ``|b_z|^2``.
    """
    plan = plan or m.plan
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _require_inside(m, z)
    if mu.kind == "atomic":
        locs = np.array([loc for loc, _ in mu.atoms])
        mass = np.array([mm for _, mm in mu.atoms])
        e_loc = m.basis_values(locs, damped=True)
        e_z = m.basis_values(z)
        norm2 = np.sum(np.abs(e_z) ** 2, axis=-1)
        k = e_loc @ np.conj(e_z).T
        return mu.scale * (np.abs(k) ** 2 * mass[:, None]).sum(axis=0) / norm2
    dens = mu.density_for(m.weight, m.alpha, plan)
    if dens.is_zero:
        return np.zeros(z.size)
    N = m.degree
    beta = _normalized_coefficients(m, z)
    k = np.arange(N + 1)
    if dens.radial:
        rule = radial_rule(dens.log_profile, m.alpha, N, plan, dens.breakpoints)
        s, ws = rule.nodes, rule.weights
        with np.errstate(divide="ignore"):
            lrho = np.asarray(dens.log_profile(s), dtype=float)
            logu = k[None, :] * np.log(s)[:, None] - m.log_scale[None, :] - 0.5 * m.alpha * (s * s)[:, None]
            lring = np.log(TWO_PI * ws * s) + lrho
        # per-degree ring integrals of |u_k|^2 rho, summed in log space
        diag = np.exp(logsumexp(2 * logu + lring[:, None], axis=0))
        return mu.scale * (np.abs(beta) ** 2 @ diag)
    M = max(plan.angular_nodes, 1 << int(np.ceil(np.log2(2 * N + 64))))
    ph = np.exp(2j * np.pi * np.arange(M) / M)

    def log_env(s):
        with np.errstate(divide="ignore"):
            return np.log(np.mean(dens(np.asarray(s)[:, None] * ph[None, :]), axis=1))

    rule = radial_rule(log_env, m.alpha, N, plan)
    s, ws = rule.nodes, rule.weights
    out = np.zeros(z.size)
    for lo in range(0, s.size, 256):
        sc, wc = s[lo:lo + 256], ws[lo:lo + 256]
        rho = np.asarray(dens(sc[:, None] * ph[None, :]), dtype=float)
        with np.errstate(divide="ignore"):
            logu = k[None, :] * np.log(sc)[:, None] - m.log_scale[None, :] - 0.5 * m.alpha * (sc * sc)[:, None]
        u = np.exp(logu)
        for i in range(z.size):
            coeffs = np.zeros((sc.size, M), dtype=complex)
            coeffs[:, : N + 1] = u * beta[i][None, :]
            b = np.fft.ifft(coeffs, axis=1) * M
            out[i] += np.sum((wc * sc * TWO_PI / M)[:, None] * np.abs(b) ** 2 * rho)
    return mu.scale * out


def berezin_transform(m: FockModel, mu: MeasureSpec, z: complex,
                      plan: QuadraturePlan | None = None) -> float:
    """The Berezin transform ``mu~(z)`` computed directly from its integral."""
    return float(berezin_transforms(m, mu, [z], plan)[0])
