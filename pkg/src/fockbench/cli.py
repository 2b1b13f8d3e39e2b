"""Command line driver: ``fockbench analyze | spectrum | kernels``.

Exit status: 0 when every verdict is PASS, 2 when any verification fails or
raises, 1 when the config (or a points file) cannot be used at all.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, DegenerateMapError, FockbenchError, MeasureError
from .fock_model import build_model, kernel_values
from .harness import (
    PASS,
    InstanceFamily,
    VerificationReport,
    lemma_suite,
    rederive_verdicts,
    verify_boundedness,
    verify_compactness,
    verify_schatten,
    verify_schatten_gauge,
    verify_structure,
)
from .toeplitz_spectra import assemble, spectrum
from .weights import disk_masses

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
SCHEMA_VERSION = 1


def _fmt(x) -> str:
    """Shortest round-trip decimal; independent of locale."""
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def report_digest(report: dict) -> str:
    """sha256 of the report without its runtimes and digest fields."""
    body = {k: v for k, v in report.items() if k not in ("runtimes", "digest")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def family_from_config(cfg: RunConfig) -> InstanceFamily:
    return InstanceFamily(cfg.weight, cfg.measures, alpha=cfg.alpha, r=cfg.r,
                          r_secondary=cfg.r_secondary, ladder=cfg.ladder, extent=cfg.extent,
                          rings=cfg.rings, plan=cfg.plan, ceiling=cfg.ceiling,
                          stability=cfg.stability, eval_radius=cfg.eval_radius)


def _error_report(kind: str, exc: Exception) -> VerificationReport:
    rec = {"status": "ERROR", "error": f"{type(exc).__name__}: {exc}"}
    return VerificationReport(kind, {}, {"family": rec}, "FAIL", {})


def run_verifications(cfg: RunConfig, f: InstanceFamily | None = None) -> list[VerificationReport]:
    f = f or family_from_config(cfg)
    jobs = [("boundedness", lambda: verify_boundedness(f)),
            ("compactness", lambda: verify_compactness(f))]
    for p in cfg.p_list:
        jobs.append((f"schatten_p{p:g}", lambda p=p: verify_schatten(f, p)))
    for g in cfg.gauges:
        jobs.append((f"gauge_{g.gauge.name}",
                     lambda g=g: verify_schatten_gauge(f, g.gauge, g.calibration)))
    if cfg.structure:
        jobs.append(("structure", lambda: verify_structure(f)))
    if cfg.lemmas:
        jobs.append(("lemmas", lambda: lemma_suite(
            build_model(cfg.weight, cfg.alpha, cfg.degree, cfg.plan, cfg.eval_radius), cfg.r,
            stability=cfg.stability)))
    out = []
    for kind, job in jobs:
        try:
            out.append(job())
        except (FockbenchError, ValueError, ArithmeticError) as exc:
            out.append(_error_report(kind, exc))
    return out


def build_report(cfg: RunConfig, reports: list[VerificationReport]) -> dict:
    criteria, ratios, verdicts, runtimes = {}, {}, {}, {}
    for rep in reports:
        criteria[rep.kind] = rep.to_dict(include_runtimes=False)
        ratios[rep.kind] = {lab: rec["ratios"] for lab, rec in rep.instances.items()
                            if isinstance(rec, dict) and "ratios" in rec}
        verdicts[rep.kind] = {
            "family": rep.verdict,
            "instances": {lab: {"verdict": rec.get("verdict", "ERROR"), "status": rec["status"]}
                          for lab, rec in rep.instances.items()},
        }
        runtimes[rep.kind] = rep.runtimes
    ok = all(rep.verdict == PASS for rep in reports)
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "params": reports[0].params if reports else {},
        "instances": [mu.to_dict() for mu in cfg.measures],
        "criteria": criteria,
        "ratios": ratios,
        "verdicts": verdicts,
        "status": PASS if ok else "FAIL",
        "runtimes": runtimes,
    }
    report["digest"] = report_digest(report)
    return report


def check_round_trip(report: dict) -> list[str]:
    """Re-derive every instance verdict from the recorded numbers; list mismatches."""
    problems = []
    for kind, crit in report["criteria"].items():
        want = report["verdicts"][kind]["instances"]
        if all(v["status"] == "ERROR" for v in want.values()):
            continue
        got = rederive_verdicts(crit)
        for label, (verdict, status) in got.items():
            if want[label]["verdict"] != verdict or want[label]["status"] != status:
                problems.append(f"{kind}/{label}: recorded {want[label]} but re-derived "
                                f"{verdict}/{status}")
    return problems


def _ladder_rows(rep: VerificationReport, key: str, xs_key: str | None, xs=None):
    rows = []
    for label, rec in rep.instances.items():
        if key not in rec:
            continue
        grid = rec[xs_key] if xs_key else xs
        for x, v in zip(grid, rec[key]):
            rows.append([label, _fmt(x), _fmt(v) if not isinstance(v, str) else v])
    return rows


def write_tables(outdir: Path, cfg: RunConfig, reports: list[VerificationReport]) -> list[Path]:
    written = []
    ladder = list(cfg.ladder)
    for rep in reports:
        specs = []
        if rep.kind == "boundedness":
            specs = [("operator_norm", "norm_ladder", None, "N"),
                     ("sup_berezin", "berezin_sups", "berezin_extents", "extent"),
                     ("sup_average", "average_sups", "average_extents", "extent")]
        elif rep.kind == "compactness":
            specs = [("ring_average", "average_ring_sups", None, "extent"),
                     ("ring_berezin", "berezin_ring_sups", None, "extent"),
                     ("tail_eigenvalue", "tail_ladder", None, "N")]
        elif rep.kind.startswith("schatten_p"):
            specs = [("norm", "schatten_ladder", None, "N")]
        elif rep.kind.startswith("gauge_"):
            specs = [("sum", "sum_ladder", None, "N")]
        for name, key, xs_key, col in specs:
            if rep.kind == "compactness" and key != "tail_ladder":
                rows = []
                rk = "average_rings" if key == "average_ring_sups" else "berezin_rings"
                for label, rec in rep.instances.items():
                    if key in rec:
                        for x, v in zip(rec[rk][1:], rec[key]):
                            rows.append([label, _fmt(x), _fmt(v)])
            else:
                rows = _ladder_rows(rep, key, xs_key, ladder)
            path = outdir / "tables" / f"{rep.kind.replace(':', '_')}_{name}.csv"
            _write_csv(path, ["label", col, "value"], rows)
            written.append(path)
    return written


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    outdir = Path(args.out or cfg.output)
    f = family_from_config(cfg)
    reports = run_verifications(cfg, f)
    report = build_report(cfg, reports)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(dump_report(report), encoding="utf-8")
    write_tables(outdir, cfg, reports)
    reread = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
    problems = check_round_trip(reread)
    for msg in problems:
        print(f"round-trip mismatch: {msg}", file=sys.stderr)
    if not args.quiet:
        for kind, v in report["verdicts"].items():
            detail = ", ".join(f"{lab}={x['verdict']}" for lab, x in v["instances"].items())
            print(f"{kind:<20} {v['family']:<5} {detail}")
        print(f"report written to {outdir / 'report.json'}")
    if problems or report["status"] != PASS:
        return EXIT_FAIL
    return EXIT_OK


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    mu = cfg.measure(args.label)
    outdir = Path(args.out or cfg.output)
    N = cfg.ladder[-1]
    m = build_model(cfg.weight, cfg.alpha, N, cfg.plan, cfg.eval_radius)
    S = spectrum(assemble(m, mu, cfg.plan))
    path = outdir / f"spectrum_{args.label}.csv"
    _write_csv(path, ["n", "s_n"], [[i + 1, _fmt(s)] for i, s in enumerate(S.values)])
    if not args.quiet:
        print(f"{len(S.values)} singular values at N={N} written to {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _parse_complex(text: str) -> complex:
    return complex(text.strip().replace(" ", "").replace("i", "j"))


def read_points(path) -> list[tuple[complex, complex]]:
    """Rows ``a z`` as complex literals or ``a_re a_im z_re z_im``.

    Fields are separated by commas or whitespace; ``#`` starts a comment and
    a non-numeric first row is taken as a header.
    """
    pairs, seen = [], False
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            row = [c for c in re.split(r"[,\s]+", line.split("#", 1)[0].strip()) if c]
            if not row:
                continue
            first, seen = not seen, True
            try:
                if len(row) == 2:
                    pairs.append((_parse_complex(row[0]), _parse_complex(row[1])))
                elif len(row) == 4:
                    x = [float(c) for c in row]
                    pairs.append((complex(x[0], x[1]), complex(x[2], x[3])))
                else:
                    raise ValueError(f"expected 2 or 4 fields, got {len(row)}")
            except ValueError as exc:
                if first:
                    continue
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if not pairs:
        raise ConfigError(f"{path}: no points")
    return pairs


KERNEL_HEADER = ["a_re", "a_im", "z_re", "z_im", "abs_B", "norm_a", "norm_z",
                 "kernel_norm_ratio", "upper_quantity", "lower_quantity", "flag"]


def kernel_rows(cfg: RunConfig, pairs) -> list[list[str]]:
    """Kernel diagnostics per pair; points beyond the trust radius are flagged."""
    m = build_model(cfg.weight, cfg.alpha, cfg.degree, cfg.plan, cfg.eval_radius)
    r, al = cfg.r, cfg.alpha
    rows = []
    for a, z in pairs:
        head = [_fmt(a.real), _fmt(a.imag), _fmt(z.real), _fmt(z.imag)]
        if max(abs(a), abs(z)) > m.eval_radius + 1e-12:
            rows.append(head + [""] * 6 + [f"outside_eval_radius:{m.eval_radius:.6g}"])
            continue
        bz = complex(kernel_values(m, a, z, check=False))
        na = math.sqrt(float(m.kernel_diagonal(np.array([a]))[0]))
        nz = math.sqrt(float(m.kernel_diagonal(np.array([z]))[0]))
        wa, wz = disk_masses(cfg.weight, np.array([a, z]), r, cfg.plan)
        damp_a = math.exp(-al * abs(a) ** 2)
        damp = math.exp(-0.5 * al * (abs(a) ** 2 + abs(z) ** 2))
        ratio = na * na * wa * damp_a
        upper = abs(bz) * math.sqrt(wa * wz) * damp
        lower = abs(bz) * wa * damp
        rows.append(head + [_fmt(abs(bz)), _fmt(na), _fmt(nz), _fmt(ratio), _fmt(upper),
                            _fmt(lower), "ok"])
    return rows


def cmd_kernels(args) -> int:
    cfg = load_config(args.config)
    pairs = read_points(args.points)
    outdir = Path(args.out or cfg.output)
    rows = kernel_rows(cfg, pairs)
    path = outdir / "kernels.csv"
    _write_csv(path, KERNEL_HEADER, rows)
    if not args.quiet:
        flagged = sum(row[-1] != "ok" for row in rows)
        print(f"{len(rows)} rows ({flagged} flagged) written to {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, metavar="DIR",
                        help="output directory (default: output.dir from the config)")
    common.add_argument("--quiet", action="store_true", help="suppress the summary")
    parser = argparse.ArgumentParser(
        prog="fockbench",
        description="Toeplitz operators on weighted Fock spaces: cross-criterion checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    an = sub.add_parser("analyze", parents=[common],
                        help="run boundedness, compactness and Schatten checks")
    an.add_argument("config")
    an.set_defaults(func=cmd_analyze)
    sp = sub.add_parser("spectrum", parents=[common], help="write s_n of one measure as CSV")
    sp.add_argument("config")
    sp.add_argument("label")
    sp.set_defaults(func=cmd_spectrum)
    ke = sub.add_parser("kernels", parents=[common], help="kernel diagnostics at point pairs")
    ke.add_argument("config")
    ke.add_argument("points")
    ke.set_defaults(func=cmd_kernels)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DegenerateMapError, MeasureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FockbenchError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
