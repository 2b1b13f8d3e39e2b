"""Truncated models of weighted Fock spaces.

A :class:`FockModel` holds an orthonormal polynomial basis ``e_0..e_N`` of
the space of polynomials of degree ``<= N`` under

    <f, g> = int f conj(g) e^(-alpha |z|^2) w dA.

Basis values are computed from scaled monomials ``u_k(z) = z^k e^(-s_k)`` with
``s_k`` half the log of the reference moment, so that nothing overflows for
degrees of a few hundred.  For radial weights the monomials are already
orthogonal and ``e_k = u_k``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DegreeTooHighError,
    FockbenchError,
    QuadratureError,
    TruncationError,
    UnsupportedPathError,
)
from .quadrature import (
    DEFAULT_PLAN,
    CallableFunction,
    QuadraturePlan,
    disk_integrals,
    gram_matrix,
    radial_log_moments,
)
from .weights import DiskAveragedWeight, Weight, disk_masses

GRAM_TOL = 1e-8
EVAL_TAIL = 1e-12


@dataclass(frozen=True, eq=False)
class FockModel:
    """Degree-``N`` truncation of ``F^2_{alpha,w}``.

    Attributes
    ----------
    alpha : float
        Gaussian parameter.
    weight : Weight
    degree : int
    log_scale : ndarray
        ``s_k`` in ``u_k = z^k e^(-s_k)``.
    coef : ndarray or None
        Lower-triangular ``C`` with ``e_j = sum_k C[j, k] u_k``; ``None`` means
        the identity (radial path).
    log_moments : ndarray or None
        ``log m_n`` for the radial path.
    plan : QuadraturePlan
    eval_radius : float
        Radius inside which the truncated kernel is trusted.
    gram_error : float
        Max deviation from the identity of the re-checked Gram matrix.
    """

    alpha: float
    weight: Weight
    degree: int
    log_scale: np.ndarray
    coef: np.ndarray | None = None
    log_moments: np.ndarray | None = None
    plan: QuadraturePlan = DEFAULT_PLAN
    eval_radius: float = np.inf
    gram_error: float = 0.0
    _meta: dict = field(default_factory=dict, repr=False)

    @property
    def radial(self) -> bool:
        return self.coef is None

    @property
    def basis(self) -> np.ndarray:
        """Raw coefficients ``L`` with ``e_j(z) = sum_k L[j, k] z^k``."""
        scale = np.exp(-self.log_scale)
        if self.coef is None:
            return np.diag(scale)
        return self.coef * scale[None, :]

    @property
    def moments(self) -> np.ndarray | None:
        return None if self.log_moments is None else np.exp(self.log_moments)

    def scaled_monomials(self, z, damped: bool = False):
        """``u_k(z)`` (times ``e^(-alpha|z|^2/2)`` if ``damped``), shape ``z.shape + (N+1,)``."""
        z = np.asarray(z, dtype=complex)
        k = np.arange(self.degree + 1)
        s = np.abs(z)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            logmag = np.where(k == 0, 0.0, k * np.log(s)) - self.log_scale
        if damped:
            logmag = logmag - 0.5 * self.alpha * s * s
        phase = np.exp(1j * k * np.angle(z)[..., None])
        return np.exp(logmag) * phase

    def basis_values(self, z, damped: bool = False):
        """``e_j(z)`` for all ``j``; last axis indexes ``j``."""
        u = self.scaled_monomials(z, damped)
        if self.coef is None:
            return u
        return u @ self.coef.T

    def kernel_diagonal(self, z, damped: bool = False):
        """``B_z(z) = sum_j |e_j(z)|^2`` (times ``e^(-alpha|z|^2)`` if damped)."""
        e = self.basis_values(z, damped)
        return np.sum(e.real ** 2 + e.imag ** 2, axis=-1)

    def coefficients_to_monomials(self, c):
        """Raw monomial coefficients of ``sum_j c_j e_j``."""
        return np.asarray(c, dtype=complex) @ self.basis

    def evaluate(self, c, z, damped: bool = False):
        """``sum_j c_j e_j(z)``."""
        c = np.asarray(c, dtype=complex)
        e = self.basis_values(z, damped)[..., : c.size]
        return e @ c

    def to_dict(self) -> dict:
        out = {
            "alpha": self.alpha,
            "degree": self.degree,
            "weight": self.weight.to_dict(),
            "eval_radius": self.eval_radius,
            "gram_error": self.gram_error,
            "log_scale": self.log_scale.tolist(),
        }
        if self.log_moments is not None:
            out["log_moments"] = self.log_moments.tolist()
        if self.coef is not None:
            out["coef_real"] = self.coef.real.tolist()
            out["coef_imag"] = self.coef.imag.tolist()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _log_moments(w, alpha, degree, plan):
    logm, tail = radial_log_moments(w.log_profile, alpha, degree, plan, w.breakpoints)
    if not np.all(np.isfinite(logm)):
        raise QuadratureError("non-finite radial moment", estimates=(logm,))
    if np.max(tail) > plan.rel_tol:
        raise QuadratureError(f"radial moment tail {np.max(tail):.2e} above tolerance",
                              estimates=(logm, tail))
    return logm


def _check_log_convex(logm):
    if logm.size >= 3:
        gap = logm[:-2] + logm[2:] - 2 * logm[1:-1]
        if np.min(gap) < -1e-9:
            raise QuadratureError("radial moments are not log-convex", estimates=(gap,))


def radial_moments(w: Weight, alpha: float, count: int,
                   plan: QuadraturePlan = DEFAULT_PLAN) -> np.ndarray:
    """``m_n = 2 pi int_0^inf s^(2n+1) e^(-alpha s^2) w(s) ds`` for ``n = 0..count``.

    Raises
    ------
    UnsupportedPathError
        If ``w`` is not radial; use :func:`gram_orthonormalize`.
    """
    if not w.radial:
        raise UnsupportedPathError("non-radial weight: use gram_orthonormalize")
    if count < 1:
        raise ValueError("count must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    logm = _log_moments(w, alpha, count, plan)
    _check_log_convex(logm)
    return np.exp(logm)


def cholesky_regularized(G, eps: float = 1e-12):
    """Lower ``C`` with ``G ~ C C^H``; pivots below ``eps`` are bumped by ``eps``.

    Raises
    ------
    DegreeTooHighError
        When a pivot is still below ``eps`` after the bump.
    """
    n = G.shape[0]
    C = np.zeros_like(G, dtype=complex)
    for k in range(n):
        piv = G[k, k].real - np.sum(np.abs(C[k, :k]) ** 2)
        if piv < eps:
            piv += eps
            if piv < eps:
                raise DegreeTooHighError(
                    f"Gram pivot {piv:.3e} below {eps:g} at degree {k}", stable_degree=k - 1)
        C[k, k] = np.sqrt(piv)
        if k + 1 < n:
            C[k + 1:, k] = (G[k + 1:, k] - C[k + 1:, :k] @ np.conj(C[k, :k])) / C[k, k]
    return C


def _eval_radius(model: FockModel, step: float = 0.005) -> float:
    """Largest ``R`` with the last-basis-element tail test passing on ``[0, R]``."""
    alpha, N = model.alpha, model.degree
    top = np.sqrt((N + 1) / alpha) + 8.0 / np.sqrt(alpha)
    s = np.arange(step, top, step)
    if model.radial:
        with np.errstate(divide="ignore"):
            f = 2 * (N * np.log(s) - model.log_scale[N]) - alpha * s * s
    else:
        ang = np.exp(2j * np.pi * np.arange(8) / 8)
        e = model.basis_values(s[:, None] * ang[None, :], damped=True)[..., N]
        with np.errstate(divide="ignore"):
            f = np.log(np.max(np.abs(e) ** 2, axis=1))
    f = f + np.log(np.maximum(1.0, s * s))
    bad = np.nonzero(f > np.log(EVAL_TAIL))[0]
    if bad.size == 0:
        return float(s[-1])
    return float(s[bad[0]] - step) if bad[0] > 0 else 0.0


def gram_orthonormalize(w: Weight, alpha: float, N: int,
                        plan: QuadraturePlan = DEFAULT_PLAN, eps: float = 1e-12) -> FockModel:
    """Orthonormalize ``1, z, .., z^N`` by a regularized Cholesky factorization.

    Works for any weight.  The Gram matrix of the result is recomputed on a
    refined quadrature plan and must equal the identity within ``1e-8``.
    """
    if N < 1:
        raise ValueError("degree must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    G, ls = gram_matrix(w, alpha, N, None, plan)
    C = cholesky_regularized(G, eps)
    coef = np.conj(solve_triangular(C, np.eye(N + 1), lower=True))
    G2, _ = gram_matrix(w, alpha, N, ls, plan.refined())
    err = _gram_error(coef, G2)
    if err > GRAM_TOL:
        raise DegreeTooHighError(
            f"re-checked Gram deviates from identity by {err:.2e}", stable_degree=_stable(coef, G2))
    model = FockModel(alpha=float(alpha), weight=w, degree=int(N), log_scale=ls, coef=coef,
                      plan=plan, gram_error=err)
    object.__setattr__(model, "eval_radius", _eval_radius(model))
    return model


def _gram_error(coef, G):
    E = np.conj(coef) @ G @ coef.T
    return float(np.max(np.abs(E - np.eye(G.shape[0]))))


def _stable(coef, G):
    for n in range(G.shape[0], 0, -1):
        if _gram_error(coef[:n, :n], G[:n, :n]) <= GRAM_TOL:
            return n - 1
    return -1


def build_model(w: Weight, alpha: float = 1.0, N: int = 80,
                plan: QuadraturePlan = DEFAULT_PLAN, eval_radius: float | None = None) -> FockModel:
    """Model of ``F^2_{alpha,w}`` truncated at degree ``N``.

    Radial weights use the moment path; the moments are recomputed on a
    refined plan and the implied Gram diagonal must be 1 within ``1e-8``.
    """
    if not w.radial:
        model = gram_orthonormalize(w, alpha, N, plan)
    else:
        if N < 1:
            raise ValueError("degree must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        logm = _log_moments(w, alpha, N, plan)
        _check_log_convex(logm)
        fine = _log_moments(w, alpha, N, plan.refined())
        err = float(np.max(np.abs(np.expm1(fine - logm))))
        if err > GRAM_TOL:
            raise QuadratureError(f"moment refinement changed the Gram diagonal by {err:.2e}",
                                  estimates=(logm, fine))
        model = FockModel(alpha=float(alpha), weight=w, degree=int(N), log_scale=0.5 * logm,
                          log_moments=logm, plan=plan, gram_error=err)
        object.__setattr__(model, "eval_radius", _eval_radius(model))
    if eval_radius is not None:
        object.__setattr__(model, "eval_radius", float(eval_radius))
    return model


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelEvaluation:
    """``B_a(z)``, ``||B_a||`` and ``b_a(z) = B_a(z) / ||B_a||``."""

    value: complex
    norm_a: float
    normalized: complex


def _require_inside(m: FockModel, pts):
    pts = np.atleast_1d(np.asarray(pts, dtype=complex))
    far = np.abs(pts) > m.eval_radius + 1e-12
    if np.any(far):
        p = pts[far][0]
        e = np.abs(m.basis_values(p, damped=True)[-1]) ** 2 * max(1.0, abs(p) ** 2)
        raise TruncationError(
            f"|z| = {abs(p):.4g} outside evaluation radius {m.eval_radius:.4g}", tail=float(e))


def _pair_sum(ez, ea):
    """``sum_j ez_j conj(ea_j)`` from real parts, so swapping arguments conjugates exactly."""
    re = np.sum(ez.real * ea.real + ez.imag * ea.imag, axis=-1)
    im = np.sum(ez.imag * ea.real - ez.real * ea.imag, axis=-1)
    return re + 1j * im


def kernel_eval(m: FockModel, a: complex, z: complex) -> KernelEvaluation:
    """Truncated reproducing kernel ``B_a(z) = sum_j e_j(z) conj(e_j(a))``."""
    _require_inside(m, [a, z])
    ea = m.basis_values(complex(a))
    ez = m.basis_values(complex(z))
    value = complex(_pair_sum(ez, ea))
    norm_a = float(np.sqrt(np.sum(ea.real ** 2 + ea.imag ** 2)))
    return KernelEvaluation(value, norm_a, value / norm_a)


def kernel_values(m: FockModel, a, z, damped: bool = False, check: bool = True):
    """Elementwise ``B_a(z)`` over broadcast arrays.

    With ``damped`` the result is multiplied by ``e^(-alpha(|a|^2+|z|^2)/2)``.
    """
    a, z = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(z, dtype=complex))
    if check:
        _require_inside(m, np.concatenate([a.ravel(), z.ravel()]))
    ea = m.basis_values(a, damped)
    ez = m.basis_values(z, damped)
    return _pair_sum(ez, ea)


# ---------------------------------------------------------------------------
# kernel estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioTable:
    points: np.ndarray
    ratios: np.ndarray

    @property
    def min(self) -> float:
        return float(np.min(self.ratios))

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))

    @property
    def spread(self) -> float:
        return self.max / self.min if self.min > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"min": self.min, "max": self.max, "spread": self.spread, "count": int(self.ratios.size)}


def kernel_norm_check(m: FockModel, r: float, grid) -> RatioTable:
    """``B_a(a) w(D(a, r)) e^(-alpha|a|^2)`` over the grid."""
    grid = np.atleast_1d(np.asarray(grid, dtype=complex))
    _require_inside(m, grid)
    diag = m.kernel_diagonal(grid, damped=True)
    mass = disk_masses(m.weight, grid, r, m.plan)
    return RatioTable(grid, diag * mass)


def pointwise_upper_check(m: FockModel, r: float, pairs) -> RatioTable:
    """``|B_a(z)| sqrt(w(D(z,r)) w(D(a,r))) e^(-alpha(|a|^2+|z|^2)/2)`` over pairs."""
    pairs = np.asarray(pairs, dtype=complex).reshape(-1, 2)
    a, z = pairs[:, 0], pairs[:, 1]
    _require_inside(m, pairs.ravel())
    val = np.abs(kernel_values(m, a, z, damped=True, check=False))
    pts, inv = np.unique(pairs.ravel(), return_inverse=True)
    mass = disk_masses(m.weight, pts, r, m.plan)[inv].reshape(-1, 2)
    return RatioTable(pairs, val * np.sqrt(mass[:, 0] * mass[:, 1]))


@dataclass(frozen=True)
class LowerBoundScan:
    delta_est: float
    constant_est: float
    c0: float
    table: dict


def local_lower_bound_scan(m: FockModel, r: float, radii, centers=None, rings: int = 4,
                           angles: int = 16, floor: float = 1e-3) -> LowerBoundScan:
    """Empirical ``delta`` for the local lower kernel bound.

    ``c(delta)`` is the minimum over sample centres ``a`` and points
    ``z`` in ``D(a, delta)`` of ``|B_a(z)| w(D(a,r)) e^(-alpha(|a|^2+|z|^2)/2)``.
    The largest candidate with ``c(delta) >= floor * c0`` is returned, where
    ``c0`` is the diagonal minimum.
    """
    radii = sorted((float(d) for d in radii), reverse=True)
    if not radii or radii[-1] <= 0 or radii[0] >= 1:
        raise ValueError("radii must lie in (0, 1)")
    if centers is None:
        lim = max(m.eval_radius - 1.0, 0.0)
        centers = np.array([0.0] + [t * lim * np.exp(0.7j * k) for k, t in
                                    enumerate(np.linspace(0.2, 1.0, 6))])
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    mass = disk_masses(m.weight, centers, r, m.plan)
    c0 = float(np.min(m.kernel_diagonal(centers, damped=True) * mass))
    t = np.arange(1, rings + 1) / rings
    ph = np.exp(2j * np.pi * np.arange(angles) / angles)
    offsets = (t[:, None] * ph[None, :]).ravel()
    table = {}
    for d in radii:
        z = centers[:, None] + d * offsets[None, :]
        q = np.abs(kernel_values(m, centers[:, None], z, damped=True)) * mass[:, None]
        table[d] = min(c0, float(np.min(q)))
    passing = [d for d in radii if table[d] >= floor * c0]
    if not passing:
        raise FockbenchError("no candidate radius passes the lower-bound floor; increase the degree")
    best = passing[0]
    return LowerBoundScan(best, table[best], c0, table)


def weak_convergence_profile(m: FockModel, k: int, radii, angles: int = 8) -> np.ndarray:
    """``max_theta |e_k(z)| / ||B_z||`` at ``|z| = radii``."""
    if not 0 <= k <= m.degree:
        raise ValueError("k must lie in [0, N]")
    radii = np.asarray(radii, dtype=float)
    z = radii[:, None] * np.exp(2j * np.pi * np.arange(angles) / angles)[None, :]
    _require_inside(m, z.ravel())
    e = m.basis_values(z, damped=True)
    norm = np.sqrt(np.sum(np.abs(e) ** 2, axis=-1))
    return np.max(np.abs(e[..., k]) / norm, axis=1)


def sample_polynomials(m: FockModel, count: int = 6, seed: int = 0):
    """Coefficient vectors (in the model basis) of a few test polynomials."""
    rng = np.random.default_rng(seed)
    top = min(5, m.degree)
    out = []
    for j in sorted({0, min(3, top), top}):
        c = np.zeros(top + 1, dtype=complex)
        c[j] = 1.0
        out.append(c)
    while len(out) < count:
        out.append(rng.standard_normal(top + 1) + 1j * rng.standard_normal(top + 1))
    return out


def norm_equivalence_check(m: FockModel, r: float, samples=None,
                           plan: QuadraturePlan | None = None) -> RatioTable:
    """``||f||^2`` under ``w(D(., r))`` divided by ``||f||^2`` under ``w``, per sample."""
    plan = plan or m.plan
    samples = sample_polynomials(m) if samples is None else samples
    deg = max(len(c) for c in samples) - 1
    if deg > m.degree:
        raise ValueError("sample degree exceeds the model degree")
    what = DiskAveragedWeight(m.weight, r, plan)
    ls = m.log_scale[: deg + 1]
    Gh, _ = gram_matrix(what, m.alpha, deg, ls, plan)
    Gw, _ = gram_matrix(m.weight, m.alpha, deg, ls, plan)
    coef = np.eye(deg + 1) if m.coef is None else m.coef[: deg + 1, : deg + 1]
    ratios = []
    for c in samples:
        b = coef.T[:, : len(c)] @ np.asarray(c, dtype=complex)
        num = np.real(np.conj(b) @ Gh @ b)
        den = np.real(np.conj(b) @ Gw @ b)
        ratios.append(num / den)
    return RatioTable(np.arange(len(samples)), np.array(ratios))


def pointwise_bound_check(m: FockModel, r: float, samples=None, grid=None) -> RatioTable:
    """Ratio of ``|f(z)|^2 e^(-alpha|z|^2)`` to the weighted local mean of ``|f|^2``.

    The table's ``max`` is the constant of the local pointwise estimate.
    """
    samples = sample_polynomials(m) if samples is None else samples
    if grid is None:
        lim = max(m.eval_radius - 1.0, 0.5)
        grid = np.array([t * lim * np.exp(0.9j * k) for k, t in enumerate(np.linspace(0, 1, 9))])
    grid = np.atleast_1d(np.asarray(grid, dtype=complex))
    _require_inside(m, grid + r)
    mass = disk_masses(m.weight, grid, r, m.plan)
    w = m.weight
    ratios = []
    for c in samples:
        def dens(xi, c=c):
            return np.abs(m.evaluate(c, xi, damped=True)) ** 2 * w(xi)
        local = disk_integrals(CallableFunction(dens), grid, r, m.plan) / mass
        lhs = np.abs(m.evaluate(c, grid, damped=True)) ** 2
        ratios.append(lhs / local)
    ratios = np.concatenate(ratios)
    return RatioTable(np.tile(grid, len(samples)), ratios)
