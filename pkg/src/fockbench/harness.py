"""Cross-criterion verifications over families of measures.

Every verification collects plain numbers into a record per instance and
then calls a ``decide_*`` function that looks only at that record.  The same
functions re-derive verdicts from a saved ``report.json`` (see
:func:`rederive_verdicts`).

Conventions (recorded in every report under ``params``):

* ratio ceiling 100 and ladder stability 20 %;
* a sequence *diverges* when it grows by 1.5x on each of its last
  ``min(3, len - 1)`` steps;
* a sequence *tends to 0* when its last value is at most half its maximum
  and not above the previous value;
* a spectral series ``sum t_n`` is *finite* when the fitted decay exponent of
  ``t_n`` on ``N/8 <= n <= N/2`` exceeds 1.1, or ``t_{N/2} <= 1e-13 t_1``;
* a plane integral ``int f dA`` is *finite* when the fitted decay exponent of
  the ring mean of ``f`` on ``E/2 <= |z| <= E`` exceeds 2.2, or the ring mean
  there is below ``1e-12`` of its maximum;
* an instance whose operator-norm ladder diverges is neither compact nor in
  any Schatten class.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import FockbenchError
from .fock_model import (
    FockModel,
    build_model,
    kernel_norm_check,
    local_lower_bound_scan,
    norm_equivalence_check,
    pointwise_bound_check,
    pointwise_upper_check,
    sample_polynomials,
    weak_convergence_profile,
)
from .measures import MeasureSpec, Psi, average_functions
from .quadrature import DEFAULT_PLAN, QuadraturePlan, composite_rule, radial_integral_to_infinity
from .toeplitz_spectra import (
    DecayProfile,
    SchattenGauge,
    Spectrum,
    ToeplitzMatrix,
    assemble,
    berezin_from_matrix,
    decay_fit,
    diverges,
    operator_norm,
    schatten_norm,
    spectrum,
    tends_to_zero,
)
from .weights import Weight, grid_points

CEILING = 100.0
STABILITY = 0.2
SERIES_EXPONENT = 1.1
PROFILE_EXPONENT = 2.2
TAIL_SHRINK = 0.8
RING_DROP = 0.5

PASS, FAIL = "PASS", "FAIL"


# ---------------------------------------------------------------------------
# number helpers
# ---------------------------------------------------------------------------


def num(x):
    """JSON-safe float (non-finite values become strings)."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def val(x) -> float:
    return float(x)


def nums(xs):
    return [num(x) for x in xs]


def ratio_entry(a, b) -> dict:
    a, b = val(a), val(b)
    if a == 0 and b == 0:
        r = 1.0
    elif b == 0:
        r = math.inf
    else:
        r = a / b
    return {"num": num(a), "den": num(b), "ratio": num(r)}


def within(ratio, ceiling=CEILING) -> bool:
    r = val(ratio)
    return math.isfinite(r) and 1.0 / ceiling <= r <= ceiling


def stable(values, tol=STABILITY) -> bool:
    v = [val(x) for x in values]
    for a, b in zip(v[:-1], v[1:]):
        if a == 0 and b == 0:
            continue
        if not (math.isfinite(a) and math.isfinite(b)) or a == 0:
            return False
        if abs(b / a - 1.0) > tol:
            return False
    return True


def _fit_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def series_record(terms) -> dict:
    """Decay exponent of ``terms`` (indexed from 1) and the negligible-tail test."""
    t = np.asarray(terms, dtype=float)
    n_total = t.size
    if n_total == 0 or t[0] == 0 and not np.any(t):
        return {"exponent": num(math.inf), "tail_ratio": 0.0}
    lo, hi = max(2, n_total // 8), max(3, n_total // 2)
    n = np.arange(lo, hi + 1)
    seg = t[lo - 1:hi]
    top = float(np.max(t))
    tail_ratio = float(t[hi - 1] / top) if top > 0 else 0.0
    pos = seg > 0
    exponent = -_fit_slope(np.log(n[pos]), np.log(seg[pos])) if np.count_nonzero(pos) >= 2 else math.inf
    return {"exponent": num(exponent), "tail_ratio": num(tail_ratio)}


def series_finite(rec: dict) -> bool:
    return val(rec["tail_ratio"]) <= 1e-13 or val(rec["exponent"]) > SERIES_EXPONENT


def profile_record(s, ring, E) -> dict:
    """Local decay exponent of a ring-mean profile on ``[E/2, E]``."""
    s, ring = np.asarray(s, float), np.asarray(ring, float)
    top = float(np.max(ring)) if ring.size else 0.0
    outer = s >= E / 2
    outer_max = float(np.max(ring[outer])) if np.any(outer) else 0.0
    pos = outer & (ring > 0)
    if np.count_nonzero(pos) >= 2:
        exponent = -_fit_slope(np.log(s[pos]), np.log(ring[pos]))
    else:
        exponent = math.inf
    return {"exponent": num(exponent), "outer_ratio": num(outer_max / top if top > 0 else 0.0)}


def profile_finite(rec: dict) -> bool:
    return val(rec["outer_ratio"]) <= 1e-12 or val(rec["exponent"]) > PROFILE_EXPONENT


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class InstanceFamily:
    """Measures sharing one weight, ``alpha`` and analysis parameters."""

    weight: Weight
    measures: tuple
    alpha: float = 1.0
    r: float = 0.3
    r_secondary: float | None = 0.15
    ladder: tuple = (40, 80, 120)
    extent: float = 8.0
    rings: tuple = (0.0, 1.0, 2.0, 4.0, 8.0)
    plan: QuadraturePlan = DEFAULT_PLAN
    ceiling: float = CEILING
    stability: float = STABILITY
    eval_radius: float | None = None
    _models: dict = field(default_factory=dict, repr=False)
    _mats: dict = field(default_factory=dict, repr=False)
    _specs: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.measures = tuple(self.measures)
        self.ladder = tuple(int(n) for n in self.ladder)
        if not self.measures:
            raise ValueError("family needs at least one measure")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if len(self.ladder) < 2 or any(b <= a for a, b in zip(self.ladder[:-1], self.ladder[1:])):
            raise ValueError("N ladder must be strictly increasing with at least two rungs")
        labels = [mu.label for mu in self.measures]
        if len(set(labels)) != len(labels) or not all(labels):
            raise ValueError("measure labels must be unique and non-empty")

    def params(self) -> dict:
        return {
            "alpha": self.alpha,
            "r": self.r,
            "r_secondary": self.r_secondary,
            "ladder": list(self.ladder),
            "extent": self.extent,
            "rings": list(self.rings),
            "weight": self.weight.to_dict(),
            "ceiling": self.ceiling,
            "stability": self.stability,
            "growth_factor": 1.5,
            "series_exponent": SERIES_EXPONENT,
            "profile_exponent": PROFILE_EXPONENT,
            "tail_shrink": TAIL_SHRINK,
            "ring_drop": RING_DROP,
        }

    # cached pieces -----------------------------------------------------------

    def model(self, N: int) -> FockModel:
        if N not in self._models:
            self._models[N] = build_model(self.weight, self.alpha, N, self.plan, self.eval_radius)
        return self._models[N]

    def matrix(self, mu: MeasureSpec, N: int) -> ToeplitzMatrix:
        key = (mu.label, N)
        if key not in self._mats:
            self._mats[key] = assemble(self.model(N), mu, self.plan, precheck=False)
        return self._mats[key]

    def spectrum(self, mu: MeasureSpec, N: int) -> Spectrum:
        key = (mu.label, N)
        if key not in self._specs:
            self._specs[key] = spectrum(self.matrix(mu, N))
        return self._specs[key]

    def top(self) -> int:
        return self.ladder[-1]

    def model_plus(self, extra: int) -> FockModel:
        return self.model(self.top() + extra)

    def berezin_extent(self, N: int | None = None) -> float:
        return min(self.extent, self.model(N or self.top()).eval_radius)

    def is_radial(self, mu: MeasureSpec) -> bool:
        if not self.weight.radial:
            return False
        if mu.kind == "atomic":
            return all(loc == 0 for loc, _ in mu.atoms)
        return bool(mu.density_for(self.weight, self.alpha, self.plan).radial)

    def sample_points(self, mu: MeasureSpec, E: float):
        """Points of ``|z| <= E`` used for suprema (radial: a fine radius grid)."""
        if self.is_radial(mu):
            return np.linspace(0.0, E, int(np.ceil(E / 0.05)) + 1).astype(complex)
        pts = grid_points(0.25, E)
        if mu.kind == "atomic":
            locs = np.array([loc for loc, _ in mu.atoms])
            pts = np.concatenate([pts, locs[np.abs(locs) <= E]])
        return pts

    def average_values(self, mu: MeasureSpec, r: float, pts):
        return average_functions(mu, self.weight, r, pts, self.alpha, self.plan)

    def berezin_values(self, mu: MeasureSpec, N: int, pts):
        return berezin_from_matrix(self.matrix(mu, N), pts)

    def breakpoints(self, mu: MeasureSpec, r: float):
        if mu.kind != "atomic":
            return ()
        out = set()
        for loc, _ in mu.atoms:
            for d in (-r, r):
                if abs(loc) + d > 0:
                    out.add(abs(loc) + d)
        return tuple(sorted(out))

    def plane_profile(self, mu: MeasureSpec, which: str, E: float, r: float | None = None):
        """Polar nodes, weights and values of the averaging function or Berezin transform."""
        r = self.r if r is None else r
        key = ("profile", mu.label, which, E, r)
        if key in self._cache:
            return self._cache[key]
        radial = self.is_radial(mu)
        bps = self.breakpoints(mu, r) if which == "average" else ()
        if radial:
            s, ws = composite_rule(0.0, E, 0.125, 8, bps)
            pts = s.astype(complex)[:, None]
        else:
            s, ws = composite_rule(0.0, E, 0.25, 8, bps)
            na = 64
            ph = np.exp(2j * np.pi * (np.arange(na) + 0.5) / na)
            pts = s[:, None] * ph[None, :]
        if which == "average":
            v = self.average_values(mu, r, pts.ravel()).reshape(pts.shape)
        else:
            v = self.berezin_values(mu, self.top(), pts.ravel()).reshape(pts.shape)
        v = np.maximum(v, 0.0)
        self._cache[key] = (s, ws, v)
        return self._cache[key]


@dataclass
class VerificationReport:
    """Records, verdicts and parameters of one verification."""

    kind: str
    params: dict
    instances: dict
    verdict: str
    runtimes: dict = field(default_factory=dict)

    def to_dict(self, include_runtimes: bool = True) -> dict:
        out = {"kind": self.kind, "params": self.params, "instances": self.instances,
               "verdict": self.verdict}
        if include_runtimes:
            out["runtimes"] = self.runtimes
        return out

    def digest(self) -> str:
        """Hash of everything except runtimes."""
        text = json.dumps(self.to_dict(include_runtimes=False), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def _family_verdict(instances: dict) -> str:
    return FAIL if any(rec.get("status") in (FAIL, "ERROR") for rec in instances.values()) else PASS


def _run(f: InstanceFamily, kind: str, body, extra_params=None) -> VerificationReport:
    instances, runtimes = {}, {}
    for mu in f.measures:
        t0 = time.perf_counter()
        try:
            rec = body(f, mu)
        except (FockbenchError, ValueError, ArithmeticError) as exc:
            rec = {"status": "ERROR", "error": f"{type(exc).__name__}: {exc}"}
        runtimes[mu.label] = time.perf_counter() - t0
        instances[mu.label] = rec
    params = f.params()
    if extra_params:
        params.update(extra_params)
    return VerificationReport(kind, params, instances, _family_verdict(instances), runtimes)


# ---------------------------------------------------------------------------
# boundedness
# ---------------------------------------------------------------------------


def _sup_within(pts, vals, E):
    sel = np.abs(pts) <= E + 1e-12
    return float(np.max(vals[sel])) if np.any(sel) else 0.0


def boundedness_record(f: InstanceFamily, mu: MeasureSpec) -> dict:
    norms = [operator_norm(f.spectrum(mu, N)) for N in f.ladder]
    # Berezin sup on each rung's own trust region
    ber_ladder = []
    for N in f.ladder:
        E = f.berezin_extent(N)
        pts = f.sample_points(mu, E)
        ber_ladder.append(float(np.max(f.berezin_values(mu, N, pts))))
    Eb = f.berezin_extent()
    pts_b = f.sample_points(mu, Eb)
    vb = f.berezin_values(mu, f.top(), pts_b)
    ber_ext = [Eb / 2 ** k for k in (3, 2, 1, 0)]
    ber_sups = [_sup_within(pts_b, vb, E) for E in ber_ext]
    Ea = f.extent
    pts_a = f.sample_points(mu, Ea)
    va = f.average_values(mu, f.r, pts_a)
    avg_ext = [Ea / 2 ** k for k in (3, 2, 1, 0)]
    avg_sups = [_sup_within(pts_a, va, E) for E in avg_ext]
    rec = {
        "norm_ladder": nums(norms),
        "berezin_ladder": nums(ber_ladder),
        "berezin_extents": nums(ber_ext),
        "berezin_sups": nums(ber_sups),
        "average_extents": nums(avg_ext),
        "average_sups": nums(avg_sups),
    }
    T, B, A = norms[-1], ber_sups[-1], avg_sups[-1]
    rec["criteria"] = {"operator_norm": num(T), "sup_berezin": num(B), "sup_average": num(A)}
    rec["ratios"] = {
        "norm/berezin": ratio_entry(T, B),
        "norm/average": ratio_entry(T, A),
        "berezin/average": ratio_entry(B, A),
    }
    if f.r_secondary:
        va2 = f.average_values(mu, f.r_secondary, pts_a)
        A2 = float(np.max(va2))
        rec["secondary"] = {"r": f.r_secondary, "sup_average": num(A2),
                            "norm/average": ratio_entry(T, A2)}
    rec.update(decide_boundedness(rec, f.ceiling, f.stability))
    return rec


def decide_boundedness(rec: dict, ceiling=CEILING, stability=STABILITY) -> dict:
    div = {
        "operator_norm": diverges([val(x) for x in rec["norm_ladder"]]),
        "sup_berezin": diverges([val(x) for x in rec["berezin_sups"]]),
        "sup_average": diverges([val(x) for x in rec["average_sups"]]),
    }
    if all(div.values()):
        return {"divergent": div, "verdict": "UNBOUNDED", "status": PASS}
    if any(div.values()):
        return {"divergent": div, "verdict": "INCONSISTENT", "status": FAIL}
    ratios_ok = all(within(r["ratio"], ceiling) for r in rec["ratios"].values())
    ladder_ok = stable(rec["norm_ladder"], stability) and stable(rec["berezin_ladder"], stability)
    ok = ratios_ok and ladder_ok
    return {"divergent": div, "ratios_ok": ratios_ok, "ladder_ok": ladder_ok,
            "verdict": "BOUNDED" if ok else "INCONSISTENT", "status": PASS if ok else FAIL}


def verify_boundedness(f: InstanceFamily) -> VerificationReport:
    """Operator norm against the suprema of the Berezin transform and averaging function."""
    return _run(f, "boundedness", boundedness_record)


# ---------------------------------------------------------------------------
# compactness
# ---------------------------------------------------------------------------


def _ring_sups(pts, vals, rings):
    a = np.abs(pts)
    out = []
    for lo, hi in zip(rings[:-1], rings[1:]):
        sel = (a >= lo) & (a < hi + (1e-12 if hi == rings[-1] else 0.0))
        out.append(float(np.max(vals[sel])) if np.any(sel) else 0.0)
    return out


def compactness_record(f: InstanceFamily, mu: MeasureSpec) -> dict:
    rings_a = [float(x) for x in f.rings]
    pts_a = f.sample_points(mu, rings_a[-1])
    va = f.average_values(mu, f.r, pts_a)
    avg = _ring_sups(pts_a, va, rings_a)
    Eb = f.berezin_extent()
    rings_b = [x * Eb / rings_a[-1] for x in rings_a]
    pts_b = f.sample_points(mu, Eb)
    vb = f.berezin_values(mu, f.top(), pts_b)
    ber = _ring_sups(pts_b, vb, rings_b)
    tails, norms = [], []
    for N in f.ladder:
        S = f.spectrum(mu, N)
        k = int(math.ceil(N / 2))
        tails.append(float(S.values[k - 1]))
        norms.append(operator_norm(S))
    rec = {
        "average_rings": nums(rings_a),
        "average_ring_sups": nums(avg),
        "berezin_rings": nums(rings_b),
        "berezin_ring_sups": nums(ber),
        "tail_index": [int(math.ceil(N / 2)) for N in f.ladder],
        "tail_ladder": nums(tails),
        "norm_ladder": nums(norms),
        "essential_norm_proxy": {"limsup_estimate": num(avg[-1]),
                                 "note": "last-ring sup of the averaging function"},
    }
    rec.update(decide_compactness(rec))
    return rec


def decide_compactness(rec: dict) -> dict:
    avg = tends_to_zero([val(x) for x in rec["average_ring_sups"]], RING_DROP)
    ber = tends_to_zero([val(x) for x in rec["berezin_ring_sups"]], RING_DROP)
    tails = [val(x) for x in rec["tail_ladder"]]
    norms = [val(x) for x in rec["norm_ladder"]]
    if diverges(norms):
        flags = {"average_to_zero": avg, "berezin_to_zero": ber, "norm_diverges": True}
        ok = not avg and not ber
        return {"flags": flags, "verdict": "UNBOUNDED" if ok else "INCONSISTENT",
                "status": PASS if ok else FAIL}
    shrink = tails[-1] <= 1e-12 * norms[0] or tails[-1] <= TAIL_SHRINK * tails[0]
    flags = {"average_to_zero": avg, "berezin_to_zero": ber, "tail_shrinks": shrink}
    if all(flags.values()):
        verdict, status = "COMPACT", PASS
    elif not any(flags.values()):
        verdict, status = "NOT_COMPACT", PASS
    else:
        verdict, status = "INCONSISTENT", FAIL
    return {"flags": flags, "verdict": verdict, "status": status}


def verify_compactness(f: InstanceFamily) -> VerificationReport:
    """Ring decay of both criterion functions against shrinking eigenvalue tails."""
    return _run(f, "compactness", compactness_record)


# ---------------------------------------------------------------------------
# Schatten classes
# ---------------------------------------------------------------------------


def _plane_integral(s, ws, v, h):
    ring = np.mean(h(v), axis=1)
    return float(2 * np.pi * np.sum(ws * s * ring)), ring


def lp_record(f: InstanceFamily, mu: MeasureSpec, which: str, h, E: float) -> dict:
    s, ws, v = f.plane_profile(mu, which, E)
    total, ring = _plane_integral(s, ws, v, h)
    rec = profile_record(s, ring, E)
    rec["integral"] = num(total)
    rec["extent"] = num(E)
    return rec


def schatten_record(f: InstanceFamily, mu: MeasureSpec, p: float) -> dict:
    ladder = [schatten_norm(f.spectrum(mu, N), p) for N in f.ladder]
    S = f.spectrum(mu, f.top()).values
    series = series_record(S ** p)

    def hp(x):
        return x ** p

    ber = lp_record(f, mu, "berezin", hp, f.berezin_extent())
    avg = lp_record(f, mu, "average", hp, f.extent)
    rec = {
        "p": p,
        "schatten_ladder": nums(ladder),
        "series": series,
        "berezin_lp": ber,
        "average_lp": avg,
    }
    Sp = ladder[-1]
    Bp = val(ber["integral"]) ** (1 / p)
    Ap = val(avg["integral"]) ** (1 / p)
    rec["criteria"] = {"schatten": num(Sp), "berezin_lp_norm": num(Bp), "average_lp_norm": num(Ap)}
    rec["ratios"] = {
        "schatten/berezin": ratio_entry(Sp, Bp),
        "schatten/average": ratio_entry(Sp, Ap),
        "berezin/average": ratio_entry(Bp, Ap),
    }
    rec.update(decide_schatten(rec))
    return rec


def decide_schatten(rec: dict, ceiling=CEILING) -> dict:
    ladder = [val(x) for x in rec["schatten_ladder"]]
    fin = {
        "schatten": series_finite(rec["series"]) and not diverges(ladder),
        "berezin": profile_finite(rec["berezin_lp"]),
        "average": profile_finite(rec["average_lp"]),
    }
    if all(fin.values()):
        ok = all(within(r["ratio"], ceiling) for r in rec["ratios"].values())
        return {"finite": fin, "verdict": "FINITE" if ok else "INCONSISTENT",
                "status": PASS if ok else FAIL}
    if not any(fin.values()):
        return {"finite": fin, "verdict": "DIVERGENT", "status": PASS}
    return {"finite": fin, "verdict": "INCONSISTENT", "status": FAIL}


def verify_schatten(f: InstanceFamily, p: float) -> VerificationReport:
    """Schatten ``p`` norm against the ``L^p`` norms of both criterion functions."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return _run(f, f"schatten_p{p:g}", lambda fam, mu: schatten_record(fam, mu, p), {"p": p})


# ---------------------------------------------------------------------------
# convex gauges
# ---------------------------------------------------------------------------


def _calibrate(q, lo=-30.0, hi=30.0, iters=80):
    """Scale ``C`` with ``q(C) ~ 1`` by bisection in ``log C``; ``1`` if not bracketed."""
    qlo, qhi = q(math.exp(lo)), q(math.exp(hi))
    if not (qlo < 1.0 < qhi):
        return 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if q(math.exp(mid)) < 1.0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def gauge_quantities(f: InstanceFamily, mu: MeasureSpec, g: SchattenGauge, scales) -> dict:
    C1, C2, C3 = scales
    S = f.spectrum(mu, f.top()).values
    terms = g(C1 * S)
    rec = {"series": series_record(terms), "sum": num(float(np.sum(terms)))}
    rec["sum_ladder"] = nums([float(np.sum(g(C1 * f.spectrum(mu, N).values))) for N in f.ladder])
    rec["berezin"] = lp_record(f, mu, "berezin", lambda x: g(C2 * x), f.berezin_extent())
    rec["average"] = lp_record(f, mu, "average", lambda x: g(C3 * x), f.extent)
    return rec


def decide_gauge(rec: dict) -> dict:
    ladder = [val(x) for x in rec["sum_ladder"]]
    fin = {
        "series": series_finite(rec["series"]) and not diverges(ladder),
        "berezin": profile_finite(rec["berezin"]),
        "average": profile_finite(rec["average"]),
    }
    if all(fin.values()):
        return {"finite": fin, "verdict": "FINITE", "status": PASS}
    if not any(fin.values()):
        return {"finite": fin, "verdict": "DIVERGENT", "status": PASS}
    return {"finite": fin, "verdict": "INCONSISTENT", "status": FAIL}


def verify_schatten_gauge(f: InstanceFamily, g: SchattenGauge,
                          calibration: str | None = None) -> VerificationReport:
    """``sum h(C1 s_n)`` against ``int h(C2 mu~)`` and ``int h(C3 mu^)``.

    The scales are tuned so each quantity is about 1 on the calibration
    instance (default: the first measure).
    """
    g.verify()
    cal = next((mu for mu in f.measures if mu.label == calibration), f.measures[0])
    S = f.spectrum(cal, f.top()).values
    sb, wb, vb = f.plane_profile(cal, "berezin", f.berezin_extent())
    sa, wa, va = f.plane_profile(cal, "average", f.extent)
    C1 = _calibrate(lambda c: float(np.sum(g(c * S))))
    C2 = _calibrate(lambda c: _plane_integral(sb, wb, vb, lambda x: g(c * x))[0])
    C3 = _calibrate(lambda c: _plane_integral(sa, wa, va, lambda x: g(c * x))[0])
    scales = (C1, C2, C3)

    def body(fam, mu):
        rec = gauge_quantities(fam, mu, g, scales)
        if g.kind == "log_decay":
            eta = DecayProfile(g.gamma)
            nxt = spectrum(assemble(fam.model_plus(20), mu, fam.plan, precheck=False))
            fit = decay_fit(fam.spectrum(mu, fam.top()), eta, 2, nxt)
            rec["decay_fit"] = {"holds": fit.holds, "K": num(fit.K), "K_next": num(fit.K_next),
                                "at_edge": fit.at_edge}
        rec.update(decide_gauge(rec))
        return rec

    return _run(f, f"gauge_{g.name}", body,
                {"gauge": g.to_dict(), "scales": nums(scales), "calibration": cal.label})


# ---------------------------------------------------------------------------
# Volterra and composition operators
# ---------------------------------------------------------------------------


def verify_volterra(a: complex, p: float, weight: Weight | None = None, alpha: float = 1.0,
                    b: complex = 0.0, ladder=(40, 80, 160), r: float = 0.3, extent: float = 8.0,
                    plan: QuadraturePlan = DEFAULT_PLAN) -> VerificationReport:
    """Schatten class of the Volterra operator with symbol ``g(z) = a z + b``.

    ``J_g`` lies in ``S_p`` iff ``T_{mu_g}`` lies in ``S_{p/2}``.  For
    ``p = 2`` the trace partial sums are fitted against ``log N``.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    weight = weight or Weight.standard(alpha)
    mu = MeasureSpec.from_volterra([b, a], label="volterra")
    f = InstanceFamily(weight, (mu,), alpha=alpha, r=r, r_secondary=None, ladder=ladder,
                       extent=extent, plan=plan)
    q = p / 2

    def body(fam, mu):
        top = fam.matrix(mu, fam.top())
        rec = {"a": _cpair(a), "b": _cpair(b), "p": p, "zero_matrix": bool(not np.any(top.entries))}
        specs = [fam.spectrum(mu, N) for N in fam.ladder]
        rec["schatten_ladder"] = nums([schatten_norm(S, q) for S in specs])
        rec["trace_ladder"] = nums([float(np.sum(S.values)) for S in specs])
        rec["ladder_n"] = list(fam.ladder)
        rec["log_fit"] = log_fit(fam.ladder, [float(np.sum(S.values)) for S in specs])
        rec["series"] = series_record(specs[-1].values ** q)

        def prof(s):
            return (abs(a) ** 2 / (1.0 + s) ** 2) ** q

        oracle, tail = radial_integral_to_infinity(prof, plan)
        rec["criterion_profile_integral"] = num(oracle)
        rec["criterion_profile_tail"] = num(tail)
        if not rec["zero_matrix"]:
            rec["average_lp"] = lp_record(fam, mu, "average", lambda x: x ** q, fam.extent)
        rec.update(decide_volterra(rec))
        return rec

    return _run(f, "volterra", body, {"a": _cpair(a), "b": _cpair(b), "p": p})


def _cpair(c):
    c = complex(c)
    return [c.real, c.imag]


def log_fit(ns, sums) -> dict:
    x = np.log(np.asarray(ns, float))
    y = np.asarray(sums, float)
    if np.ptp(y) == 0:
        return {"slope": 0.0, "correlation": 0.0}
    return {"slope": num(_fit_slope(x, y)), "correlation": num(float(np.corrcoef(x, y)[0, 1]))}


def decide_volterra(rec: dict, stability=STABILITY) -> dict:
    if rec["zero_matrix"]:
        return {"verdict": "ZERO", "status": PASS}
    p = rec["p"]
    if p == 2:
        fit = rec["log_fit"]
        grows = val(fit["slope"]) > 0 and val(fit["correlation"]) >= 0.99
        crit_div = not profile_finite(rec["average_lp"])
        ok = grows and crit_div and not series_finite(rec["series"])
        return {"verdict": "NOT_HS" if ok else "INCONSISTENT", "status": PASS if ok else FAIL}
    fin = series_finite(rec["series"]) and stable(rec["schatten_ladder"][-2:], stability)
    crit = profile_finite(rec["average_lp"]) and math.isfinite(val(rec["criterion_profile_integral"]))
    ok = fin and crit
    return {"verdict": "IN_CLASS" if ok else "INCONSISTENT", "status": PASS if ok else FAIL}


def verify_composition(a: complex, b: complex = 0.0, psi=None, p_list=(2.0, 4.0),
                       weight: Weight | None = None, alpha: float = 1.0, r: float = 0.3,
                       ladder=(40, 80, 120), extent: float = 8.0,
                       plan: QuadraturePlan = DEFAULT_PLAN) -> VerificationReport:
    """Boundedness, compactness and ``S_p`` class of ``W_{phi,psi}`` with ``phi = a z + b``."""
    weight = weight or Weight.standard(alpha)
    psi = psi if isinstance(psi, Psi) else Psi.from_config(psi)
    mu = MeasureSpec.from_pullback(a, b, psi, label="pullback")
    f = InstanceFamily(weight, (mu,), alpha=alpha, r=r, r_secondary=None, ladder=ladder,
                       extent=extent, plan=plan)

    def body(fam, mu):
        rec = {"bounded": boundedness_record(fam, mu)}
        if rec["bounded"]["verdict"] == "UNBOUNDED":
            rec.update({"verdict": "UNBOUNDED", "status": rec["bounded"]["status"]})
            return rec
        rec["compact"] = compactness_record(fam, mu)
        rec["schatten"] = {}
        for p in p_list:
            if p < 2:
                continue
            rec["schatten"][f"{p:g}"] = schatten_record(fam, mu, p / 2)
        rec.update(decide_composition(rec))
        return rec

    return _run(f, "composition", body,
                {"a": _cpair(a), "b": _cpair(b), "psi": psi.to_dict(), "p_list": list(p_list)})


def decide_composition(rec: dict) -> dict:
    if "compact" not in rec:
        return {"verdict": rec["bounded"]["verdict"], "status": rec["bounded"]["status"]}
    parts = [rec["bounded"], rec["compact"], *rec["schatten"].values()]
    ok = all(part["status"] == PASS for part in parts)
    label = rec["compact"]["verdict"]
    classes = [k for k, v in rec["schatten"].items() if v["verdict"] == "FINITE"]
    return {"verdict": f"{label}; S_p for p in {classes}" if ok else "INCONSISTENT",
            "status": PASS if ok else FAIL}


# ---------------------------------------------------------------------------
# kernel lemmas
# ---------------------------------------------------------------------------


def _lemma_constants(m: FockModel, r: float, grid, pairs, radii, samples, weak_radii) -> dict:
    kn = kernel_norm_check(m, r, grid)
    up = pointwise_upper_check(m, r, pairs)
    lb = local_lower_bound_scan(m, r, radii, centers=grid)
    wk = weak_convergence_profile(m, min(3, m.degree), weak_radii)
    ne = norm_equivalence_check(m, r, samples)
    pb = pointwise_bound_check(m, r, samples, grid)
    return {
        "kernel_norm_spread": num(kn.spread),
        "kernel_norm_min": num(kn.min),
        "upper_bound_max": num(up.max),
        "lower_bound_delta": num(lb.delta_est),
        "lower_bound_constant": num(lb.constant_est),
        "weak_profile_max": num(float(np.max(wk))),
        "weak_profile_last": num(float(wk[-1])),
        "norm_equivalence_spread": num(ne.spread),
        "pointwise_bound_constant": num(pb.max),
    }


def lemma_suite(m: FockModel, r: float = 0.3, grid=None, radii=(0.9, 0.7, 0.5, 0.3, 0.1),
                stability: float = STABILITY) -> VerificationReport:
    """Kernel and norm estimates at the base model, a refined plan and ``N + 20``."""
    t0 = time.perf_counter()
    lim = max(min(3.0, m.eval_radius - 1.0), 0.5)
    if grid is None:
        k = np.arange(-2, 3)
        grid = ((k[:, None] + 1j * k[None, :]).ravel() * (lim / 2 / np.sqrt(2)))
    grid = np.atleast_1d(np.asarray(grid, dtype=complex))
    pairs = np.array([(a, z) for a in grid for z in grid])
    samples = sample_polynomials(m)
    weak_radii = np.linspace(0.0, lim, 7)
    runs = {
        "base": m,
        "refined": build_model(m.weight, m.alpha, m.degree, m.plan.refined()),
        "degree_plus_20": build_model(m.weight, m.alpha, m.degree + 20, m.plan),
    }
    constants = {}
    rec = {}
    try:
        for name, model in runs.items():
            constants[name] = _lemma_constants(model, r, grid, pairs, radii, samples, weak_radii)
        rec["constants"] = constants
        rec.update(decide_lemmas(rec, stability))
    except (FockbenchError, ValueError, ArithmeticError) as exc:
        rec = {"status": "ERROR", "error": f"{type(exc).__name__}: {exc}"}
    params = {"alpha": m.alpha, "degree": m.degree, "weight": m.weight.to_dict(), "r": r,
              "grid_size": int(grid.size), "radii": list(radii), "stability": stability}
    return VerificationReport("lemmas", params, {"model": rec}, _family_verdict({"model": rec}),
                              {"model": time.perf_counter() - t0})


def decide_lemmas(rec: dict, stability=STABILITY) -> dict:
    consts = rec["constants"]
    base = consts["base"]
    unstable = []
    for key, v in base.items():
        ref = val(v)
        if not math.isfinite(ref):
            unstable.append(key)
            continue
        for other in ("refined", "degree_plus_20"):
            o = val(consts[other][key])
            if ref == 0 and o == 0:
                continue
            if not math.isfinite(o) or ref == 0 or abs(o / ref - 1.0) > stability:
                unstable.append(f"{key}@{other}")
    return {"unstable": unstable, "verdict": "STABLE" if not unstable else "UNSTABLE",
            "status": PASS if not unstable else FAIL}


# ---------------------------------------------------------------------------
# structural invariants
# ---------------------------------------------------------------------------


def structural_record(f: InstanceFamily, mu: MeasureSpec) -> dict:
    """Hermitian/PSD/trace/interlacing checks and the two Berezin routes."""
    from .measures import berezin_transforms

    out = {}
    prev = None
    interlace = 0.0
    for N in f.ladder:
        T = f.matrix(mu, N)
        M = T.entries
        S = f.spectrum(mu, N)
        norm = max(operator_norm(S), 1e-300)
        out[str(N)] = {
            "hermitian_exact": bool(np.array_equal(M, np.conj(M).T)),
            "min_eig_rel": num(S.min_raw / norm),
            "trace_gap": num(abs(float(np.sum(S.values)) - float(np.real(np.trace(M))))
                             / max(1.0, abs(float(np.real(np.trace(M)))))),
        }
        if prev is not None:
            k = len(prev)
            interlace = max(interlace, float(np.max(prev - S.values[:k])))
        prev = S.values
    m = f.model(f.top())
    E = min(3.0, m.eval_radius - 0.5)
    zs = np.array([0.0, 0.5 * E, 1j * E, (0.7 - 0.4j) * E])
    q = berezin_from_matrix(f.matrix(mu, f.top()), zs)
    d = berezin_transforms(m, mu, zs, f.plan)
    out["interlacing_violation"] = num(interlace)
    out["berezin_route_gap"] = num(float(np.max(np.abs(q - d))))
    out["berezin_route_scale"] = num(float(max(np.max(np.abs(d)), 1.0)))
    out.update(decide_structural(out))
    return out


def decide_structural(rec: dict) -> dict:
    ok = True
    for key, part in rec.items():
        if isinstance(part, dict) and "hermitian_exact" in part:
            ok &= part["hermitian_exact"]
            ok &= val(part["min_eig_rel"]) >= -1e-10
            ok &= val(part["trace_gap"]) <= 1e-8
    ok &= val(rec["interlacing_violation"]) <= 1e-8
    ok &= val(rec["berezin_route_gap"]) <= 1e-6 * val(rec["berezin_route_scale"])
    return {"verdict": "HOLDS" if ok else "VIOLATED", "status": PASS if ok else FAIL}


def verify_structure(f: InstanceFamily) -> VerificationReport:
    return _run(f, "structure", structural_record)


# ---------------------------------------------------------------------------
# re-derivation
# ---------------------------------------------------------------------------


_DECIDERS = {
    "boundedness": lambda rec, params: decide_boundedness(rec, params["ceiling"], params["stability"]),
    "compactness": lambda rec, params: decide_compactness(rec),
    "volterra": lambda rec, params: decide_volterra(rec),
    "lemmas": lambda rec, params: decide_lemmas(rec, params["stability"]),
    "structure": lambda rec, params: decide_structural(rec),
    "composition": lambda rec, params: decide_composition(rec),
}


def decider_for(kind: str):
    if kind in _DECIDERS:
        return _DECIDERS[kind]
    if kind.startswith("schatten_p"):
        return lambda rec, params: decide_schatten(rec, params["ceiling"])
    if kind.startswith("gauge_"):
        return lambda rec, params: decide_gauge(rec)
    raise KeyError(kind)


def rederive_verdicts(report: dict) -> dict:
    """Recompute instance verdicts of a report dict; returns ``{label: (verdict, status)}``."""
    decide = decider_for(report["kind"])
    out = {}
    for label, rec in report["instances"].items():
        if rec.get("status") == "ERROR":
            out[label] = ("ERROR", "ERROR")
            continue
        d = decide(rec, report["params"])
        out[label] = (d["verdict"], d["status"])
    return out
