"""Quadrature rules on the plane.

Everything here is written for integrands that are either radial (a function
of ``|z|`` with possible kinks on known circles) or smooth functions of
``(x, y)``.  Radial integrands are integrated in polar coordinates about the
origin so that kinks never fall inside a Gauss panel; general integrands use a
polar product rule about the disk centre, or tensor Gauss-Legendre on squares.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import QuadratureError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class QuadraturePlan:
    """Resolution settings shared by every integrator.

    ``panel_width`` and ``panel_nodes`` control the composite Gauss-Legendre
    rule used for radial integrals over ``[0, inf)``; ``level_start`` and
    ``level_max`` bound the adaptive refinement of disk and square rules.
    """

    panel_width: float = 0.25
    panel_nodes: int = 16
    angular_nodes: int = 64
    level_start: int = 2
    level_max: int = 7
    rel_tol: float = 1e-10
    log_drop: float = 75.0

    def refined(self) -> "QuadraturePlan":
        """Same plan with every step halved."""
        return replace(
            self,
            panel_width=self.panel_width / 2,
            angular_nodes=self.angular_nodes * 2,
            level_start=self.level_start + 1,
            level_max=self.level_max + 1,
        )


DEFAULT_PLAN = QuadraturePlan()


class PlaneFunction:
    """A nonnegative function on the complex plane.

    Subclasses implement ``__call__`` on complex arrays.  Radial subclasses
    set ``radial = True`` and implement ``profile`` on arrays of radii.
    ``breakpoints`` lists radii about ``focus`` (the origin for radial
    functions) where the function is not smooth.  A non-radial function with
    a ``focus`` is smooth in polar coordinates about that point away from
    the breakpoint circles, which disk rules exploit.
    """

    radial = False
    breakpoints: tuple = ()
    focus: complex | None = None
    is_zero = False

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.radial:
            return self.profile(np.abs(z))
        raise NotImplementedError

    def profile(self, s):
        raise NotImplementedError

    def log_profile(self, s):
        with np.errstate(divide="ignore"):
            return np.log(self.profile(s))

    def log_values(self, z):
        with np.errstate(divide="ignore"):
            return np.log(self(z))


class FunctionPower(PlaneFunction):
    """``f ** exponent`` for a positive plane function ``f``."""

    def __init__(self, base: PlaneFunction, exponent: float):
        self.base = base
        self.exponent = float(exponent)
        self.radial = base.radial
        self.breakpoints = base.breakpoints
        self.focus = base.focus

    def __call__(self, z):
        with np.errstate(divide="ignore", over="ignore"):
            return np.asarray(self.base(z), dtype=float) ** self.exponent

    def profile(self, s):
        with np.errstate(divide="ignore", over="ignore"):
            return np.asarray(self.base.profile(s), dtype=float) ** self.exponent


class CallableFunction(PlaneFunction):
    """Wrap a plain callable ``f(z)`` (or ``f(s)`` when ``radial``)."""

    def __init__(self, func, radial=False, breakpoints=()):
        self.func = func
        self.radial = radial
        self.breakpoints = tuple(breakpoints)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.radial:
            return np.asarray(self.func(np.abs(z)), dtype=float)
        return np.asarray(self.func(z), dtype=float)

    def profile(self, s):
        return np.asarray(self.func(np.asarray(s, dtype=float)), dtype=float)


@lru_cache(maxsize=64)
def gauss_legendre(n: int):
    """Nodes and weights of the ``n``-point rule on ``[-1, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(a: float, b: float, width: float, nodes: int, breakpoints=()):
    """Composite Gauss-Legendre rule on ``[a, b]`` with panel edges at breakpoints."""
    edges = [a] + sorted(t for t in breakpoints if a < t < b) + [b]
    xs, ws = [], []
    x0, w0 = gauss_legendre(nodes)
    for lo, hi in zip(edges[:-1], edges[1:]):
        npan = max(1, int(np.ceil((hi - lo) / width)))
        cuts = np.linspace(lo, hi, npan + 1)
        half = 0.5 * np.diff(cuts)
        mid = 0.5 * (cuts[:-1] + cuts[1:])
        xs.append((mid[:, None] + half[:, None] * x0[None, :]).ravel())
        ws.append((half[:, None] * w0[None, :]).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def _level_sizes(level: int):
    return 2 ** (level + 1), 2 ** (level + 2)


# ---------------------------------------------------------------------------
# radial integrals over the whole plane
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialRule:
    """Nodes/weights on ``[0, cutoff]`` for Gaussian-damped radial moments."""

    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float


def _envelope_logs(log_envelope, alpha, s, orders):
    with np.errstate(divide="ignore", invalid="ignore"):
        ls = np.log(s)
        env = np.asarray(log_envelope(s), dtype=float)
        return [(2 * n + 1) * ls - alpha * s * s + env for n in orders]


def radial_rule(log_envelope, alpha: float, degree: int,
                plan: QuadraturePlan = DEFAULT_PLAN, breakpoints=()) -> RadialRule:
    """Choose a cutoff and composite rule for ``s^(2n+1) e^(-alpha s^2) rho(s)``.

    ``log_envelope`` gives ``log rho``.  The cutoff is placed where the log
    integrand for both ``n = 0`` and ``n = degree`` has dropped by
    ``plan.log_drop`` below its peak.
    """
    orders = (0, degree)
    span = np.sqrt((2 * degree + 1) / (2 * alpha)) + 12.0 / np.sqrt(alpha)
    for _ in range(8):
        s = np.linspace(span * 1e-4, span, 4001)
        logs = _envelope_logs(log_envelope, alpha, s, orders)
        ok = True
        cut = 0.0
        for f in logs:
            f = np.where(np.isnan(f), -np.inf, f)
            peak = np.max(f)
            if not np.isfinite(peak):
                continue
            above = np.nonzero(f > peak - plan.log_drop)[0]
            last = above[-1]
            if last >= len(s) - 2:
                ok = False
                break
            cut = max(cut, s[last + 1])
        if ok:
            break
        span *= 2.0
    else:
        raise QuadratureError(
            "radial integrand does not decay fast enough for a finite cutoff")
    if cut == 0.0:
        cut = span
    width = plan.panel_width / np.sqrt(alpha)
    x, w = composite_rule(0.0, cut, width, plan.panel_nodes, breakpoints)
    return RadialRule(x, w, cut)


def radial_log_moments(log_profile, alpha: float, degree: int,
                       plan: QuadraturePlan = DEFAULT_PLAN, breakpoints=(),
                       rule: RadialRule | None = None):
    """``log(2 pi int_0^inf s^(2n+1) e^(-alpha s^2) rho(s) ds)`` for ``n <= degree``.

    Returns ``(log_moments, rel_tail)`` where ``rel_tail[n]`` bounds the
    neglected tail relative to the moment, assuming the log integrand is
    concave beyond the cutoff.
    """
    if rule is None:
        rule = radial_rule(log_profile, alpha, degree, plan, breakpoints)
    s, w = rule.nodes, rule.weights
    with np.errstate(divide="ignore"):
        lp = np.asarray(log_profile(s), dtype=float)
        base = np.log(w) + np.log(s) - alpha * s * s + lp
    n = np.arange(degree + 1)[:, None]
    terms = base[None, :] + 2 * n * np.log(s)[None, :]
    with np.errstate(divide="ignore"):
        logm = np.log(TWO_PI) + logsumexp(terms, axis=1)
    # tail bound at the cutoff
    R = rule.cutoff
    h = 1e-4 * max(R, 1.0)
    f_lo = np.array([f[0] for f in _envelope_logs(log_profile, alpha, np.array([R - h]), range(degree + 1))])
    f_hi = np.array([f[0] for f in _envelope_logs(log_profile, alpha, np.array([R]), range(degree + 1))])
    slope = -(f_hi - f_lo) / h
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tail = np.where(slope > 0, np.exp(np.log(TWO_PI) + f_hi - logm) / slope, np.inf)
    tail = np.where(np.isfinite(logm), tail, 0.0)
    return logm, tail


def radial_integral(profile, r_max: float, plan: QuadraturePlan = DEFAULT_PLAN,
                    breakpoints=(), width=None):
    """``2 pi int_0^r_max s f(s) ds`` by composite Gauss-Legendre."""
    width = plan.panel_width * 2 if width is None else width
    x, w = composite_rule(0.0, r_max, width, plan.panel_nodes, breakpoints)
    return TWO_PI * float(np.sum(w * x * np.asarray(profile(x), dtype=float)))


def radial_integral_to_infinity(profile, plan: QuadraturePlan = DEFAULT_PLAN,
                                log_span: float = 40.0):
    """``2 pi int_0^inf s f(s) ds`` for algebraically decaying profiles.

    Integrates in ``t = log(1 + s)`` up to ``t = log_span``; the remainder is
    estimated from the local power-law exponent at the end of the range.
    """
    t, w = composite_rule(0.0, log_span, 0.25, plan.panel_nodes)
    s = np.expm1(t)
    jac = np.exp(t)
    vals = np.asarray(profile(s), dtype=float)
    total = TWO_PI * float(np.sum(w * jac * s * vals))
    s_end = np.expm1(log_span)
    f1, f2 = np.asarray(profile(np.array([s_end / 2, s_end])), dtype=float)
    tail = 0.0
    if f2 > 0 and f1 > 0:
        kappa = np.log(f1 / f2) / np.log(2.0)
        tail = TWO_PI * f2 * s_end ** 2 / (kappa - 2) if kappa > 2 else np.inf
    return total, tail


# ---------------------------------------------------------------------------
# Fourier-in-angle Gram matrices
# ---------------------------------------------------------------------------


def gram_matrix(func: PlaneFunction, alpha: float, degree: int,
                log_scale=None, plan: QuadraturePlan = DEFAULT_PLAN,
                angular_nodes: int | None = None):
    """Scaled monomial Gram matrix ``G[b, a] = <u_a, u_b>`` for the measure
    ``e^(-alpha|z|^2) f dA`` where ``u_k = z^k e^(-log_scale[k])``.

    With ``log_scale=None`` the scale is taken from the diagonal so the
    result has unit diagonal.  Returns ``(G, log_scale)``.
    """
    N = degree
    if func.is_zero:
        ls = np.zeros(N + 1) if log_scale is None else np.asarray(log_scale)
        return np.zeros((N + 1, N + 1), dtype=complex), ls
    if func.radial:
        logm, _ = radial_log_moments(func.log_profile, alpha, N, plan, func.breakpoints)
        ls = 0.5 * logm if log_scale is None else np.asarray(log_scale)
        with np.errstate(invalid="ignore"):
            d = np.exp(logm - 2 * ls)
        d = np.where(np.isfinite(logm), d, 0.0)
        return np.diag(d).astype(complex), ls

    M = angular_nodes or max(plan.angular_nodes, 1 << int(np.ceil(np.log2(4 * N + 16))))
    theta = TWO_PI * np.arange(M) / M
    ephase = np.exp(1j * theta)

    def log_env(s):
        s = np.asarray(s, dtype=float)
        vals = func(s[:, None] * ephase[None, :])
        with np.errstate(divide="ignore"):
            return np.log(np.mean(vals, axis=1))

    rule = radial_rule(log_env, alpha, N, plan)
    s, w = rule.nodes, rule.weights
    vals = np.asarray(func(s[:, None] * ephase[None, :]), dtype=float)
    if np.any(vals < 0):
        raise QuadratureError("negative density value at a quadrature node")
    vmax = np.max(vals, axis=1)
    keep = vmax > 0
    s, w, vals, vmax = s[keep], w[keep], vals[keep], vmax[keep]
    F = np.fft.fft(vals / vmax[:, None], axis=1) / M
    k = np.arange(N + 1)
    logA = (k[None, :] * np.log(s)[:, None] - 0.5 * alpha * (s * s)[:, None]
            + 0.5 * (np.log(TWO_PI * w * s) + np.log(vmax))[:, None])
    if log_scale is None:
        diag_terms = 2 * logA + np.log(np.maximum(F[:, 0].real, 1e-300))[:, None]
        ls = 0.5 * logsumexp(diag_terms, axis=0)
    else:
        ls = np.asarray(log_scale, dtype=float)
    A = np.exp(logA - ls[None, :])
    G = np.zeros((N + 1, N + 1), dtype=complex)
    for d in range(N + 1):
        vals_d = np.einsum("qa,qa,q->a", A[:, : N + 1 - d], A[:, d:], F[:, d % M])
        idx = np.arange(N + 1 - d)
        G[idx + d, idx] = vals_d
        G[idx, idx + d] = np.conj(vals_d)
    G[np.diag_indices(N + 1)] = G.diagonal().real
    return G, ls


# ---------------------------------------------------------------------------
# disks
# ---------------------------------------------------------------------------


def _segment_sum(func, lo, hi, ns, breakpoints, evaluate=None):
    """Sum over Gauss nodes of ``f(s) s`` on ``[lo, hi]`` split at breakpoints.

    ``lo`` and ``hi`` are broadcastable arrays; result has their shape.
    ``evaluate`` replaces ``func.profile`` for the values along the rays.
    """
    evaluate = evaluate or func.profile
    x0, w0 = gauss_legendre(ns)
    edges = [0.0] + sorted(breakpoints) + [np.inf]
    total = np.zeros(np.broadcast(lo, hi).shape)
    for e_lo, e_hi in zip(edges[:-1], edges[1:]):
        a = np.clip(e_lo, lo, hi)
        b = np.clip(e_hi, lo, hi)
        half = 0.5 * (b - a)
        if not np.any(half > 0):
            continue
        mid = 0.5 * (a + b)
        s = mid[..., None] + half[..., None] * x0
        vals = np.asarray(evaluate(s), dtype=float)
        total += half * np.sum(w0 * vals * s, axis=-1)
    return total


def _disk_radial(func, centers, radius, level):
    """Annulus form ``int f(s) s L(s) ds``; ``L(s)`` is the arc of ``|xi| = s`` in the disk.

    The partial-arc range ``|R - c| < s < R + c`` is mapped by
    ``s = m - h cos t`` and split at breakpoints, which makes every piece smooth.
    """
    ns, _ = _level_sizes(level)
    x0, w0 = gauss_legendre(ns)
    c = np.abs(centers)
    R = float(radius)
    inner = np.maximum(R - c, 0.0)
    out = TWO_PI * _segment_sum(func, np.zeros_like(inner), inner, ns, func.breakpoints)
    part = c > 0
    if not np.any(part):
        return out
    cp = c[part]
    lo, hi = np.abs(R - cp), R + cp
    m, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
    extra = 2.0 * np.maximum(R - cp, 0.0)
    bps = np.array(sorted(func.breakpoints), dtype=float)
    with np.errstate(invalid="ignore"):
        tb = np.arccos(np.clip((m[:, None] - bps[None, :]) / h[:, None], -1.0, 1.0))
    edges = np.concatenate([np.zeros((cp.size, 1)), tb.reshape(cp.size, -1),
                            np.full((cp.size, 1), np.pi)], axis=1)
    acc = np.zeros(cp.size)
    for k in range(edges.shape[1] - 1):
        a, b = edges[:, k], edges[:, k + 1]
        half = 0.5 * (b - a)
        if not np.any(half > 0):
            continue
        t = 0.5 * (a + b)[:, None] + half[:, None] * x0[None, :]
        sv = m[:, None] - h[:, None] * np.cos(t)
        B = 2.0 * h[:, None] * np.sin(0.5 * t) ** 2 + extra[:, None]
        arg = np.cos(0.5 * t) * np.sqrt(h[:, None] * B / (2.0 * sv * cp[:, None]))
        arc = 4.0 * np.arcsin(np.minimum(arg, 1.0))
        vals = np.asarray(func.profile(sv), dtype=float)
        acc += half * np.sum(w0[None, :] * vals * sv * arc * h[:, None] * np.sin(t), axis=1)
    out[part] += acc
    return out


def _disk_about_focus(func, centers, radius, level):
    """Polar rule about ``func.focus`` (inside each disk), rays cut at the boundary."""
    ns, nt = _level_sizes(level)
    theta = TWO_PI * np.arange(nt) / nt
    ph = np.exp(1j * theta)
    q = (func.focus - centers)[:, None] * np.conj(ph)[None, :]
    hi = -q.real + np.sqrt(np.maximum(radius * radius - q.imag ** 2, 0.0))

    def evaluate(s):
        return func(func.focus + s * ph[None, :, None])

    vals = _segment_sum(func, np.zeros_like(hi), hi, ns, func.breakpoints, evaluate)
    return vals.sum(axis=1) * (TWO_PI / nt)


def _disk_general(func, centers, radius, level):
    if func.focus is not None:
        inside = np.abs(centers - func.focus) < radius
        if np.any(inside):
            out = np.empty(centers.shape)
            out[inside] = _disk_about_focus(func, centers[inside], radius, level)
            if np.any(~inside):
                out[~inside] = _disk_general_plain(func, centers[~inside], radius, level)
            return out
    return _disk_general_plain(func, centers, radius, level)


def _disk_general_plain(func, centers, radius, level):
    ns, nt = _level_sizes(level)
    x0, w0 = gauss_legendre(ns)
    rho = 0.5 * radius * (x0 + 1.0)
    wr = 0.5 * radius * w0 * rho
    theta = TWO_PI * np.arange(nt) / nt
    offs = (rho[:, None] * np.exp(1j * theta)[None, :]).ravel()
    wts = (wr[:, None] * np.full(nt, TWO_PI / nt)[None, :]).ravel()
    pts = centers[:, None] + offs[None, :]
    vals = np.asarray(func(pts), dtype=float)
    return vals @ wts


def _chunks(n, per_item, budget=4_000_000):
    step = max(1, budget // max(per_item, 1))
    for i in range(0, n, step):
        yield slice(i, min(n, i + step))


def _adaptive(kernel, func, centers, size, plan, what):
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    out = np.full(centers.shape, np.nan)
    todo = np.arange(centers.size)
    prev = None
    nb = len(func.breakpoints) + 1
    for level in range(plan.level_start, plan.level_max + 1):
        ns, nt = _level_sizes(level)
        cur = np.empty(todo.size)
        for sl in _chunks(todo.size, ns * nt * nb):
            cur[sl] = kernel(func, centers[todo[sl]], size, level)
        if prev is not None:
            scale = np.maximum(np.abs(cur), 1e-300)
            with np.errstate(invalid="ignore"):
                done = np.abs(cur - prev) <= plan.rel_tol * scale
            done |= (cur == 0) & (prev == 0)
            done |= np.isinf(cur) & np.isinf(prev)
            out[todo[done]] = cur[done]
            todo, cur = todo[~done], cur[~done]
            if todo.size == 0:
                return out
            prev_left = prev[~done]
        else:
            prev_left = None
        prev = cur
    worst = int(np.argmax(np.abs(prev - prev_left) / np.maximum(np.abs(prev), 1e-300)))
    raise QuadratureError(
        f"{what} quadrature did not converge at centre {centers[todo[worst]]}: "
        f"last estimates {prev_left[worst]!r}, {prev[worst]!r}",
        estimates=(float(prev_left[worst]), float(prev[worst])),
    )


def disk_integrals(func: PlaneFunction, centers, radius: float,
                   plan: QuadraturePlan = DEFAULT_PLAN):
    """``int_{D(c, radius)} f dA`` for every centre ``c`` (vectorised, adaptive)."""
    if radius <= 0:
        raise ValueError("disk radius must be positive")
    if func.is_zero:
        return np.zeros(np.atleast_1d(centers).shape)
    kernel = _disk_radial if func.radial else _disk_general
    return _adaptive(kernel, func, centers, radius, plan, "disk")


def disk_nodes(center: complex, radius: float, level: int):
    """Polar product nodes/weights for a disk (for integrands built on the fly)."""
    ns, nt = _level_sizes(level)
    x0, w0 = gauss_legendre(ns)
    rho = 0.5 * radius * (x0 + 1.0)
    wr = 0.5 * radius * w0 * rho
    theta = TWO_PI * np.arange(nt) / nt
    pts = center + (rho[:, None] * np.exp(1j * theta)[None, :]).ravel()
    wts = (wr[:, None] * np.full(nt, TWO_PI / nt)[None, :]).ravel()
    return pts, wts


# ---------------------------------------------------------------------------
# squares
# ---------------------------------------------------------------------------


def _square_radial(func, centers, side, level):
    ns, nt = _level_sizes(level)
    x0, w0 = gauss_legendre(nt)
    h = 0.5 * side
    corners = np.array([h * (1 + 1j), h * (-1 + 1j), h * (-1 - 1j), h * (1 - 1j)])
    # rays start at the square's distance from 0 so far squares do not cancel
    r0 = np.hypot(np.maximum(np.abs(centers.real) - h, 0.0), np.maximum(np.abs(centers.imag) - h, 0.0))
    out = np.zeros(centers.shape)
    for i in range(4):
        P = centers + corners[i]
        Q = centers + corners[(i + 1) % 4]
        edge = Q - P
        # signed distance from origin to the edge line, measured along the outward normal
        normal = -1j * edge / np.abs(edge)
        d = (np.conj(normal) * P).real
        delta = np.angle(Q / np.where(P == 0, 1, P))
        delta = np.where((P == 0) | (Q == 0) | (np.abs(d) < 1e-14), 0.0, delta)
        tP = np.angle(P)
        tn = np.angle(normal)
        t = 0.5 * (x0 + 1.0)
        theta = tP[:, None] + delta[:, None] * t[None, :]
        cosv = np.cos(theta - tn[:, None])
        rho = np.where(np.abs(cosv) > 1e-300, d[:, None] / cosv, 0.0)
        lo = np.broadcast_to(r0[:, None], rho.shape)
        rho = np.maximum(rho, lo)
        vals = _segment_sum(func, lo, rho, ns, func.breakpoints)
        out += 0.5 * delta * np.sum(w0[None, :] * vals, axis=1)
    return out


def _square_general(func, centers, side, level):
    ns, _ = _level_sizes(level)
    n = 2 * ns
    x0, w0 = gauss_legendre(n)
    h = 0.5 * side
    out = np.zeros(centers.shape)
    for j, c in enumerate(centers):
        xs = [c.real - h, c.real + h]
        ys = [c.imag - h, c.imag + h]
        xe = [xs[0]] + ([0.0] if xs[0] < 0 < xs[1] else []) + [xs[1]]
        ye = [ys[0]] + ([0.0] if ys[0] < 0 < ys[1] else []) + [ys[1]]
        px, wx = [], []
        for a, b in zip(xe[:-1], xe[1:]):
            px.append(0.5 * (a + b) + 0.5 * (b - a) * x0)
            wx.append(0.5 * (b - a) * w0)
        py, wy = [], []
        for a, b in zip(ye[:-1], ye[1:]):
            py.append(0.5 * (a + b) + 0.5 * (b - a) * x0)
            wy.append(0.5 * (b - a) * w0)
        px, wx = np.concatenate(px), np.concatenate(wx)
        py, wy = np.concatenate(py), np.concatenate(wy)
        Z = px[:, None] + 1j * py[None, :]
        out[j] = float(np.sum(wx[:, None] * wy[None, :] * np.asarray(func(Z), dtype=float)))
    return out


def square_integrals(func: PlaneFunction, centers, side: float,
                     plan: QuadraturePlan = DEFAULT_PLAN):
    """``int_{Q_side(c)} f dA`` for axis-parallel squares centred at each ``c``."""
    if side <= 0:
        raise ValueError("square side must be positive")
    if func.is_zero:
        return np.zeros(np.atleast_1d(centers).shape)
    kernel = _square_radial if func.radial else _square_general
    return _adaptive(kernel, func, centers, side, plan, "square")


def square_nodes(center: complex, side: float, n: int = 32):
    """Tensor Gauss-Legendre nodes of a square plus its corners and centre."""
    x0, _ = gauss_legendre(n)
    h = 0.5 * side
    g = h * x0
    pts = (center + g[:, None] + 1j * g[None, :]).ravel()
    extra = center + h * np.array([0, 1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
    return np.concatenate([pts, extra])


def polar_plane_rule(r_max: float, plan: QuadraturePlan = DEFAULT_PLAN,
                     angular_nodes: int | None = None, breakpoints=()):
    """Product rule on ``|z| <= r_max``: composite GL in radius, trapezoid in angle."""
    nt = angular_nodes or plan.angular_nodes
    s, ws = composite_rule(0.0, r_max, plan.panel_width, plan.panel_nodes // 2, breakpoints)
    theta = TWO_PI * np.arange(nt) / nt
    pts = (s[:, None] * np.exp(1j * theta)[None, :])
    wts = (ws * s)[:, None] * np.full(nt, TWO_PI / nt)[None, :]
    return pts, wts, s
