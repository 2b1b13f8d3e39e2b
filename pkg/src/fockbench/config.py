"""YAML run configuration.

Key tree (unknown keys are rejected)::

    model:
      alpha: 1.0                  # Gaussian exponent
      degree: 80                  # truncation used by ``kernels``
      r: 0.3                      # default averaging radius
      eval_radius_override: null  # trust radius; computed when null
    weight:
      kind: constant | standard | power | radial_table | expression
      level: 0.318                # constant
      gamma: -1.0                 # power: (1 + |z|)^gamma
      table: [[r, value], ...]    # radial_table, linear in |z|, flat past the end
      expr: "1 + r^2"             # expression over r, x, y
    measures:
      - label: gauss
        kind: density             # atomic | density | pullback | volterra
        density: "exp(-r^2)/pi"   # may also use w, the active weight
        atoms: [[re, im, mass]]   # atomic
        pullback: {a: 0.5, b: 0, psi: {poly: [1]}}
        volterra: {g: [0, 1]}     # coefficients, constant term first
        scale: 1.0
    analysis:
      r: 0.3                      # defaults to model.r
      r_secondary: 0.15           # null disables the second radius
      extent: 8.0
      rings: [0, 1, 2, 4, 8]
      n_ladder: [40, 80, 120]
      p_list: [1, 2, 4]
      gauges: [{kind: power, p: 1}, {kind: log_decay, gamma: 1}]
      structure: true             # run the structural invariants
      lemmas: false               # run the kernel lemma suite at model.degree
      ceiling: 100
      stability: 0.2
    quadrature:                   # optional QuadraturePlan overrides
      panel_width: 0.25
    output:
      dir: out

Complex numbers are written as a real number or ``[re, im]``.  The
expression grammar is documented in :mod:`fockbench.expression`.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import yaml

from .errors import ConfigError, FockbenchError
from .measures import MeasureSpec, Psi
from .quadrature import DEFAULT_PLAN, QuadraturePlan
from .toeplitz_spectra import SchattenGauge
from .weights import Weight

SECTIONS = {"model", "weight", "measures", "analysis", "quadrature", "output"}
MODEL_KEYS = {"alpha", "degree", "r", "eval_radius_override"}
WEIGHT_KEYS = {"kind", "gamma", "level", "table", "expr"}
MEASURE_KEYS = {"label", "kind", "atoms", "density", "pullback", "volterra", "scale"}
PULLBACK_KEYS = {"a", "b", "psi"}
VOLTERRA_KEYS = {"g"}
ANALYSIS_KEYS = {"r", "r_secondary", "extent", "rings", "n_ladder", "p_list", "gauges",
                 "structure", "lemmas", "ceiling", "stability"}
GAUGE_KEYS = {"kind", "p", "gamma", "knots", "calibration"}
OUTPUT_KEYS = {"dir"}
PLAN_KEYS = {f.name for f in fields(QuadraturePlan)}


@dataclass(frozen=True)
class GaugeConfig:
    gauge: SchattenGauge
    calibration: str | None = None


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of a config file."""

    alpha: float
    degree: int
    eval_radius: float | None
    weight: Weight
    measures: tuple
    r: float
    r_secondary: float | None
    extent: float
    rings: tuple
    ladder: tuple
    p_list: tuple
    gauges: tuple
    structure: bool
    lemmas: bool
    ceiling: float
    stability: float
    plan: QuadraturePlan
    output: str
    source: str = ""

    def measure(self, label: str) -> MeasureSpec:
        for mu in self.measures:
            if mu.label == label:
                return mu
        raise ConfigError(f"no measure labelled {label!r}; known: {[m.label for m in self.measures]}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "degree": self.degree,
            "eval_radius_override": self.eval_radius,
            "weight": self.weight.to_dict(),
            "measures": [mu.to_dict() for mu in self.measures],
            "r": self.r,
            "r_secondary": self.r_secondary,
            "extent": self.extent,
            "rings": list(self.rings),
            "n_ladder": list(self.ladder),
            "p_list": list(self.p_list),
            "gauges": [{"gauge": g.gauge.to_dict(), "calibration": g.calibration}
                       for g in self.gauges],
            "structure": self.structure,
            "lemmas": self.lemmas,
            "ceiling": self.ceiling,
            "stability": self.stability,
            "quadrature": {f.name: getattr(self.plan, f.name) for f in fields(QuadraturePlan)},
        }


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def _line_of(node, path) -> int | None:
    """1-based source line of the value at ``path`` in a composed YAML tree."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
        if node is None:
            break
    return line


class _Reader:
    def __init__(self, root, source: str):
        self.root = root
        self.source = source

    def locate(self, path, message) -> str:
        where = ".".join(str(p) for p in path) or "<root>"
        line = _line_of(self.root, path)
        loc = f"{self.source}:{line}" if line else self.source
        return f"{loc}: {where}: {message}"

    def fail(self, path, message):
        raise ConfigError(self.locate(path, message))

    def located(self, exc) -> bool:
        return str(exc).startswith(f"{self.source}:")

    def mapping(self, data, path, allowed):
        if data is None:
            return {}
        if not isinstance(data, dict):
            self.fail(path, "expected a mapping")
        unknown = sorted(set(map(str, data)) - allowed)
        if unknown:
            self.fail(path + [unknown[0]], f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return data

    def number(self, data, path, key, default=None, positive=False, allow_none=False):
        v = data.get(key, default)
        if v is None and (allow_none or default is None and key not in data):
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path + [key], f"expected a number, got {v!r}")
        if positive and not v > 0:
            self.fail(path + [key], "must be positive")
        return float(v)

    def complex_value(self, v, path):
        if isinstance(v, (list, tuple)) and len(v) == 2 and all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            return complex(float(v[0]), float(v[1]))
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return complex(float(v))
        self.fail(path, f"expected a number or [re, im], got {v!r}")

    def number_list(self, data, path, key, default):
        v = data.get(key, default)
        if not isinstance(v, (list, tuple)) or not v or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            self.fail(path + [key], f"expected a non-empty list of numbers, got {v!r}")
        return tuple(float(x) for x in v)


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------


def _weight(rd: _Reader, data, alpha) -> Weight:
    path = ["weight"]
    data = rd.mapping(data, path, WEIGHT_KEYS)
    kind = data.get("kind", "standard")
    try:
        if kind == "standard":
            return Weight.standard(alpha)
        if kind == "constant":
            return Weight.constant(rd.number(data, path, "level", 1.0, positive=True))
        if kind == "power":
            return Weight.power(rd.number(data, path, "gamma", 0.0))
        if kind == "radial_table":
            table = data.get("table")
            if not isinstance(table, list):
                rd.fail(path + ["table"], "expected a list of [r, value] rows")
            for i, row in enumerate(table):
                if not (isinstance(row, list) and len(row) == 2):
                    rd.fail(path + ["table", i], f"expected [r, value], got {row!r}")
            return Weight.radial_table(table)
        if kind == "expression":
            expr = data.get("expr")
            if not isinstance(expr, str):
                rd.fail(path + ["expr"], "expected an expression string")
            return Weight.expression(expr)
    except (FockbenchError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError) and rd.located(exc):
            raise
        rd.fail(path, str(exc))
    rd.fail(path + ["kind"], f"unknown weight kind {kind!r}")


def _measure(rd: _Reader, data, i) -> MeasureSpec:
    path = ["measures", i]
    data = rd.mapping(data, path, MEASURE_KEYS)
    label = data.get("label")
    if not isinstance(label, str) or not label:
        rd.fail(path + ["label"], "every measure needs a non-empty string label")
    kind = data.get("kind")
    scale = rd.number(data, path, "scale", 1.0, positive=True)
    try:
        if kind == "atomic":
            atoms = data.get("atoms")
            if not isinstance(atoms, list) or not atoms:
                rd.fail(path + ["atoms"], "expected a non-empty list of [re, im, mass]")
            parsed = []
            for j, row in enumerate(atoms):
                if not (isinstance(row, list) and len(row) == 3 and all(
                        isinstance(x, (int, float)) and not isinstance(x, bool) for x in row)):
                    rd.fail(path + ["atoms", j], f"expected [re, im, mass], got {row!r}")
                parsed.append((complex(row[0], row[1]), float(row[2])))
            mu = MeasureSpec.atomic(parsed, label=label)
        elif kind == "density":
            dens = data.get("density")
            if not isinstance(dens, str):
                rd.fail(path + ["density"], "expected an expression string")
            mu = MeasureSpec.from_density(dens, label=label)
        elif kind == "pullback":
            pb = rd.mapping(data.get("pullback"), path + ["pullback"], PULLBACK_KEYS)
            if "a" not in pb:
                rd.fail(path + ["pullback"], "missing key 'a'")
            a = rd.complex_value(pb["a"], path + ["pullback", "a"])
            b = rd.complex_value(pb.get("b", 0.0), path + ["pullback", "b"])
            psi = Psi.from_config(pb.get("psi"))
            mu = MeasureSpec.from_pullback(a, b, psi, label=label)
        elif kind == "volterra":
            vo = rd.mapping(data.get("volterra"), path + ["volterra"], VOLTERRA_KEYS)
            g = vo.get("g")
            if not isinstance(g, list) or not g:
                rd.fail(path + ["volterra", "g"], "expected a coefficient list")
            coeffs = [rd.complex_value(c, path + ["volterra", "g", j]) for j, c in enumerate(g)]
            mu = MeasureSpec.from_volterra(coeffs, label=label)
        else:
            rd.fail(path + ["kind"], f"unknown measure kind {kind!r}")
    except ConfigError as exc:
        if rd.located(exc):
            raise
        rd.fail(path, str(exc))
    except FockbenchError as exc:
        # degenerate maps and invalid masses keep their own type
        exc.args = (rd.locate(path, str(exc)),)
        raise
    except (ValueError, TypeError) as exc:
        rd.fail(path, str(exc))
    return mu.scaled(scale) if scale != 1.0 else mu


def _gauge(rd: _Reader, data, i) -> GaugeConfig:
    path = ["analysis", "gauges", i]
    data = rd.mapping(data, path, GAUGE_KEYS)
    kind = data.get("kind", "power")
    try:
        if kind == "power":
            g = SchattenGauge.power(rd.number(data, path, "p", 1.0))
        elif kind == "log_decay":
            g = SchattenGauge.log_decay(rd.number(data, path, "gamma", 1.0))
        elif kind == "piecewise":
            g = SchattenGauge.piecewise([tuple(k) for k in data.get("knots", [])])
        else:
            rd.fail(path + ["kind"], f"unknown gauge kind {kind!r}")
        g.verify()
    except ConfigError:
        raise
    except (FockbenchError, ValueError, TypeError) as exc:
        rd.fail(path, str(exc))
    cal = data.get("calibration")
    return GaugeConfig(g, cal)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse and validate a YAML config; raises :class:`ConfigError` with a location."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{loc}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    rd = _Reader(root, source)
    data = rd.mapping(data, [], SECTIONS)

    model = rd.mapping(data.get("model"), ["model"], MODEL_KEYS)
    alpha = rd.number(model, ["model"], "alpha", 1.0, positive=True)
    degree = model.get("degree", 80)
    if isinstance(degree, bool) or not isinstance(degree, int) or degree < 1:
        rd.fail(["model", "degree"], f"expected a positive integer, got {degree!r}")
    r_model = rd.number(model, ["model"], "r", 0.3, positive=True)
    eval_radius = rd.number(model, ["model"], "eval_radius_override", None, positive=True,
                            allow_none=True)

    weight = _weight(rd, data.get("weight"), alpha)

    raw = data.get("measures")
    if not isinstance(raw, list) or not raw:
        rd.fail(["measures"], "expected a non-empty list of measures")
    measures = tuple(_measure(rd, m, i) for i, m in enumerate(raw))
    labels = [mu.label for mu in measures]
    for i, lab in enumerate(labels):
        if lab in labels[:i]:
            rd.fail(["measures", i, "label"], f"duplicate label {lab!r}")

    an = rd.mapping(data.get("analysis"), ["analysis"], ANALYSIS_KEYS)
    path = ["analysis"]
    r = rd.number(an, path, "r", r_model, positive=True)
    r2 = rd.number(an, path, "r_secondary", 0.15, positive=True, allow_none=True)
    extent = rd.number(an, path, "extent", 8.0, positive=True)
    rings = rd.number_list(an, path, "rings", [0.0, 1.0, 2.0, 4.0, 8.0])
    if len(rings) < 3 or any(b <= a for a, b in zip(rings[:-1], rings[1:])):
        rd.fail(path + ["rings"], "expected at least three strictly increasing radii")
    ladder_raw = an.get("n_ladder", [degree // 2, degree, degree + degree // 2])
    if not isinstance(ladder_raw, list) or not all(
            isinstance(n, int) and not isinstance(n, bool) and n > 0 for n in ladder_raw):
        rd.fail(path + ["n_ladder"], f"expected a list of positive integers, got {ladder_raw!r}")
    ladder = tuple(ladder_raw)
    if len(ladder) < 2 or any(b <= a for a, b in zip(ladder[:-1], ladder[1:])):
        rd.fail(path + ["n_ladder"], "expected at least two strictly increasing degrees")
    p_list = rd.number_list(an, path, "p_list", [1.0, 2.0])
    if any(p < 1 for p in p_list):
        rd.fail(path + ["p_list"], "every p must be >= 1")
    graw = an.get("gauges", [])
    if not isinstance(graw, list):
        rd.fail(path + ["gauges"], "expected a list")
    gauges = tuple(_gauge(rd, g, i) for i, g in enumerate(graw))
    for i, g in enumerate(gauges):
        if g.calibration is not None and g.calibration not in labels:
            rd.fail(path + ["gauges", i, "calibration"], f"unknown measure {g.calibration!r}")
    flags = {}
    for key, default in (("structure", True), ("lemmas", False)):
        v = an.get(key, default)
        if not isinstance(v, bool):
            rd.fail(path + [key], "expected true or false")
        flags[key] = v
    ceiling = rd.number(an, path, "ceiling", 100.0, positive=True)
    stability = rd.number(an, path, "stability", 0.2, positive=True)

    qp = rd.mapping(data.get("quadrature"), ["quadrature"], PLAN_KEYS)
    try:
        plan = replace(DEFAULT_PLAN, **qp)
    except TypeError as exc:
        rd.fail(["quadrature"], str(exc))

    out = rd.mapping(data.get("output"), ["output"], OUTPUT_KEYS)
    outdir = out.get("dir", "out")
    if not isinstance(outdir, str):
        rd.fail(["output", "dir"], "expected a path string")

    return RunConfig(alpha=alpha, degree=int(degree), eval_radius=eval_radius, weight=weight,
                     measures=measures, r=r, r_secondary=r2, extent=extent, rings=rings,
                     ladder=ladder, p_list=p_list, gauges=gauges, structure=flags["structure"],
                     lemmas=flags["lemmas"], ceiling=ceiling, stability=stability, plan=plan,
                     output=outdir, source=source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))
