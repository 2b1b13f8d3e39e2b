"""Weights on the complex plane and their geometric quantities.

A :class:`Weight` is one of

* ``constant``      -- ``w(z) = level``
* ``power``         -- ``w(z) = (1 + |z|)**gamma``
* ``radial_table``  -- piecewise-linear interpolation of ``(radius, value)`` pairs
* ``expression``    -- a restricted arithmetic expression in ``r, x, y``

Masses of disks and squares are computed with the adaptive rules in
:mod:`fockbench.quadrature`.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import QuadratureError, WeightError
from .expression import Expression
from .quadrature import (
    DEFAULT_PLAN,
    TWO_PI,
    FunctionPower,
    PlaneFunction,
    QuadraturePlan,
    disk_integrals,
    radial_rule,
    square_integrals,
    square_nodes,
)

WEIGHT_KINDS = ("constant", "power", "radial_table", "expression")


@dataclass(frozen=True)
class Weight(PlaneFunction):
    kind: str = "constant"
    gamma: float = 0.0
    level: float = 1.0
    table: tuple = ()
    expr: str = ""
    _expression: Expression | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise WeightError(f"unknown weight kind {self.kind!r}")
        if self.kind == "constant" and not self.level > 0:
            raise WeightError("constant weight needs a positive level")
        if self.kind == "radial_table":
            tab = tuple((float(r), float(v)) for r, v in self.table)
            if len(tab) < 2:
                raise WeightError("radial table needs at least two rows")
            radii = np.array([r for r, _ in tab])
            vals = np.array([v for _, v in tab])
            if np.any(np.diff(radii) <= 0):
                raise WeightError("radial table radii must be strictly increasing")
            if np.any(vals < 0) or radii[0] < 0:
                raise WeightError("radial table values and radii must be nonnegative")
            object.__setattr__(self, "table", tab)
        if self.kind == "expression":
            object.__setattr__(self, "_expression", Expression(self.expr))

    @classmethod
    def constant(cls, level: float = 1.0) -> "Weight":
        return cls(kind="constant", level=float(level))

    @classmethod
    def standard(cls, alpha: float = 1.0) -> "Weight":
        """``alpha / pi``: the weight of the classical Fock space."""
        return cls(kind="constant", level=float(alpha) / np.pi)

    @classmethod
    def power(cls, gamma: float) -> "Weight":
        return cls(kind="power", gamma=float(gamma))

    @classmethod
    def radial_table(cls, pairs) -> "Weight":
        return cls(kind="radial_table", table=tuple(tuple(p) for p in pairs))

    @classmethod
    def expression(cls, text: str) -> "Weight":
        return cls(kind="expression", expr=text)

    @property
    def radial(self) -> bool:
        if self.kind == "expression":
            return self._expression.radial
        return True

    @property
    def breakpoints(self) -> tuple:
        if self.kind == "radial_table":
            return tuple(r for r, _ in self.table if r > 0)
        return ()

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.full(s.shape, self.level)
        if self.kind == "power":
            return (1.0 + s) ** self.gamma
        if self.kind == "radial_table":
            radii, vals = zip(*self.table)
            return np.interp(s, radii, vals)
        return self._expression.evaluate(s.astype(complex))

    def log_profile(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return self.gamma * np.log1p(s)
        if self.kind == "constant":
            return np.full(s.shape, np.log(self.level))
        return super().log_profile(s)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.radial:
            return self.profile(np.abs(z))
        return self._expression.evaluate(z)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "constant":
            out["level"] = self.level
        elif self.kind == "power":
            out["gamma"] = self.gamma
        elif self.kind == "radial_table":
            out["table"] = [list(p) for p in self.table]
        else:
            out["expr"] = self.expr
        return out


@dataclass(frozen=True)
class DiskSpec:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")


@dataclass(frozen=True)
class SquareSpec:
    center: complex
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError("square side must be positive")


class _Positive(PlaneFunction):
    """Guard that raises as soon as the wrapped weight is not positive at a node."""

    def __init__(self, base):
        self.base = base
        self.radial = base.radial
        self.breakpoints = base.breakpoints

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.size and not np.all(v > 0):
            raise WeightError("weight is not strictly positive at a quadrature node")
        return v

    def __call__(self, z):
        return self._check(self.base(z))

    def profile(self, s):
        return self._check(self.base.profile(s))


def disk_masses(w: PlaneFunction, centers, radius: float,
                plan: QuadraturePlan = DEFAULT_PLAN, check_positive: bool = True):
    """``w(D(c, radius))`` for an array of centres."""
    f = _Positive(w) if check_positive else w
    return disk_integrals(f, centers, radius, plan)


def disk_mass(w: PlaneFunction, d: DiskSpec, plan: QuadraturePlan = DEFAULT_PLAN) -> float:
    """``int_D w dA``."""
    return float(disk_masses(w, [d.center], d.radius, plan)[0])


def square_masses(w: PlaneFunction, centers, side: float,
                  plan: QuadraturePlan = DEFAULT_PLAN, check_positive: bool = True):
    f = _Positive(w) if check_positive else w
    return square_integrals(f, centers, side, plan)


def square_mass(w: PlaneFunction, q: SquareSpec, plan: QuadraturePlan = DEFAULT_PLAN) -> float:
    """``int_Q w dA`` over an axis-parallel square."""
    return float(square_masses(w, [q.center], q.side, plan)[0])


class WeightMassCache:
    """Memo of ``w(D(z, r))`` keyed by (grid index, radius).

    Reads are lock-free; population goes through a single lock so parallel
    readers never see a half-written entry.
    """

    def __init__(self, weight: PlaneFunction, step: float, plan: QuadraturePlan = DEFAULT_PLAN):
        self.weight = weight
        self.step = float(step)
        self.plan = plan
        self.tolerance = plan.rel_tol
        self._data: dict = {}
        self._lock = threading.Lock()

    def _key(self, z, radius):
        return (int(round(z.real / self.step)), int(round(z.imag / self.step)), float(radius))

    def masses(self, centers, radius: float):
        centers = np.atleast_1d(np.asarray(centers, dtype=complex))
        keys = [self._key(z, radius) for z in centers]
        missing = [i for i, k in enumerate(keys) if k not in self._data]
        if missing:
            grid = np.array([complex(keys[i][0], keys[i][1]) * self.step for i in missing])
            vals = disk_masses(self.weight, grid, radius, self.plan)
            with self._lock:
                for i, v in zip(missing, vals):
                    self._data.setdefault(keys[i], float(v))
        return np.array([self._data[k] for k in keys])

    def __len__(self):
        return len(self._data)


def grid_points(step: float, extent: float):
    """``step * Z^2`` intersected with the closed disk of radius ``extent``."""
    n = int(np.floor(extent / step + 1e-9))
    k = np.arange(-n, n + 1)
    pts = (k[:, None] + 1j * k[None, :]).ravel() * step
    return pts[np.abs(pts) <= extent + 1e-12]


@dataclass(frozen=True)
class ApConstant:
    value: float
    divergent: bool
    argmax: complex
    squares: int


def restricted_ap_constant(w: Weight, p: float, side: float = 1.0, extent: float = 8.0,
                           step: float | None = None, ceiling: float = 1e12,
                           plan: QuadraturePlan = DEFAULT_PLAN) -> ApConstant:
    """Grid supremum of the restricted ``A_p`` product over squares of one side.

    For ``p > 1`` the product is ``<w>_Q <w^(-1/(p-1))>_Q^(p-1)``; for ``p = 1``
    it is ``<w>_Q * max(1/w)`` with the max taken over quadrature nodes (a
    lower estimate of the essential supremum).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    step = side / 2 if step is None else step
    if step > side:
        raise ValueError("grid step must not exceed the square side")
    centers = grid_points(step, extent)
    area = side * side
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        try:
            avg_w = square_masses(w, centers, side, plan, check_positive=False) / area
        except QuadratureError:
            return ApConstant(np.inf, True, complex(np.nan), centers.size)
        if p == 1:
            dual = np.empty(centers.size)
            for i, c in enumerate(centers):
                vals = np.asarray(w(square_nodes(c, side)), dtype=float)
                dual[i] = np.inf if np.any(vals <= 0) else np.max(1.0 / vals)
            prod = avg_w * dual
        else:
            try:
                avg_d = square_masses(FunctionPower(w, -1.0 / (p - 1)), centers, side, plan,
                                      check_positive=False) / area
            except QuadratureError:
                return ApConstant(np.inf, True, complex(np.nan), centers.size)
            prod = avg_w * avg_d ** (p - 1)
    prod = np.where(np.isnan(prod), np.inf, prod)
    i = int(np.argmax(prod))
    value = float(prod[i])
    return ApConstant(value, bool(not np.isfinite(value) or value > ceiling), complex(centers[i]),
                      int(centers.size))


def growth_constant(w: Weight, r: float = 1.0, extent: float = 8.0,
                    plan: QuadraturePlan = DEFAULT_PLAN) -> float:
    """Smallest ``C >= 1`` with ``w(Q_r(v)) / w(Q_r(v')) <= C^|v - v'|`` on the grid."""
    if r <= 0:
        raise ValueError("r must be positive")
    nodes = grid_points(r, extent)
    masses = square_masses(w, nodes, r, plan, check_positive=False)
    if np.any(masses <= 0):
        raise WeightError("square with zero weight mass in growth_constant")
    logm = np.log(masses)
    dist = np.abs(nodes[:, None] - nodes[None, :])
    np.fill_diagonal(dist, np.inf)
    rate = np.max((logm[:, None] - logm[None, :]) / dist) if nodes.size > 1 else 0.0
    return float(np.exp(max(rate, 0.0)))


def gaussian_total(w: Weight, alpha: float, plan: QuadraturePlan = DEFAULT_PLAN,
                   tol: float = 1e-10):
    """``int_C e^(-alpha|z|^2) w dA`` and a bound on the part beyond the cutoff.

    The tail bound assumes the growth-constant envelope
    ``w(z) <= max_{|u|=R} w(u) * C^(|z| - R)`` beyond the cutoff ``R``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    nt = plan.angular_nodes
    phase = np.exp(2j * np.pi * np.arange(nt) / nt)
    if w.radial:
        log_env = w.log_profile
    else:
        def log_env(s):
            with np.errstate(divide="ignore"):
                return np.log(np.mean(w(np.asarray(s)[:, None] * phase[None, :]), axis=1))
    rule = radial_rule(log_env, alpha, 0, plan, w.breakpoints)
    s, ws = rule.nodes, rule.weights
    if w.radial:
        ring = TWO_PI * np.asarray(w.profile(s), dtype=float)
    else:
        ring = TWO_PI * np.mean(w(s[:, None] * phase[None, :]), axis=1)
    value = float(np.sum(ws * s * np.exp(-alpha * s * s) * ring))
    R = rule.cutoff
    W_R = float(np.max(w(R * phase)))
    C = growth_constant(w, 1.0, extent=min(R, 8.0), plan=plan)
    kappa = 2 * alpha * R - np.log(C) - 1.0 / R
    tail = TWO_PI * W_R * R * np.exp(-alpha * R * R) / kappa if kappa > 0 else np.inf
    if not tail <= tol * max(abs(value), 1e-300):
        raise QuadratureError(
            f"gaussian_total tail bound {tail:.3e} exceeds tolerance at cutoff {R:.3f}",
            estimates=(value, tail))
    return value, tail


class DiskAveragedWeight(PlaneFunction):
    """``z -> w(D(z, r))``, the disk-mass weight.

    For radial ``w`` the profile is interpolated in log by Chebyshev pieces
    split where the disk boundary meets a non-smooth point of ``w`` (``|z| = r``
    and ``t +- r`` for breakpoints ``t``).  The range grows on demand and
    ``interp_error`` records the validation error of the current pieces.
    """

    def __init__(self, w: Weight, r: float, plan: QuadraturePlan = DEFAULT_PLAN):
        if r <= 0:
            raise ValueError("r must be positive")
        self.w = w
        self.r = float(r)
        self.plan = plan
        self.radial = w.radial
        self.breakpoints = self._kinks() if w.radial else ()
        self._pieces = None
        self._span = 0.0
        self.interp_error = 0.0
        self._lock = threading.Lock()

    def _kinks(self):
        if getattr(self.w, "kind", None) == "constant":
            return ()
        pts = {self.r} | {t + d for t in self.w.breakpoints for d in (-self.r, self.r)}
        return tuple(sorted(p for p in pts if p > 0))

    def _exact(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return disk_masses(self.w, s.astype(complex), self.r, self.plan)

    def _build(self, span):
        from numpy.polynomial import Chebyshev

        def logf(x):
            return np.log(self._exact(x))

        # graded pieces towards each kink keep the endpoint singularities small
        cuts = set(self.breakpoints)
        for t in self.breakpoints:
            cuts |= {t + d * self.r * 4.0 ** -k for k in range(1, 6) for d in (-1, 1)}
        edges = [0.0] + sorted(t for t in cuts if 0 < t < span) + [span]
        pieces, worst = [], 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            probe = a + (b - a) * (0.5 - 0.5 * np.cos(np.pi * (np.arange(41) + 0.5) / 41))
            exact = logf(probe)
            best = None
            for deg in (24, 48, 96, 192):
                cheb = Chebyshev.interpolate(logf, deg, domain=[a, b])
                err = float(np.max(np.abs(np.expm1(cheb(probe) - exact))))
                if best is None or err < best[1]:
                    best = (cheb, err)
                if err < 1e-13:
                    break
            pieces.append(best[0])
            worst = max(worst, best[1])
        self._pieces = (np.array(edges), pieces)
        self.interp_error = worst
        self._span = span

    def profile(self, s):
        s = np.asarray(s, dtype=float)
        if getattr(self.w, "kind", None) == "constant":
            return np.full(s.shape, self.w.level * np.pi * self.r ** 2)
        smax = float(np.max(s)) if s.size else 0.0
        with self._lock:
            if self._pieces is None or smax > self._span:
                self._build(max(2.0 * smax, 16.0, 2.0 * self._span))
            edges, pieces = self._pieces
        idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(pieces) - 1)
        out = np.empty(s.shape)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = np.exp(pieces[k](s[sel]))
        return out

    def log_profile(self, s):
        return np.log(self.profile(s))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.radial:
            return self.profile(np.abs(z))
        flat = z.ravel()
        return disk_masses(self.w, flat, self.r, self.plan).reshape(z.shape)
