"""Command-line front end.

    hyperepp epp --a 0.7 --b 0.1 --c 0.1 --d 0.1
    hyperepp dispersive --dphi-s 0.5 --dphi-f 0.9 --compensation off
    hyperepp nbsa --table --format text
    hyperepp sweep --param dphi_s --from 0 --to 3.14159 --steps 13 --grid 5
    hyperepp ff --model uniform-jitter --delta 3.14159 --samples 100000
    hyperepp factorize --config geometry.json
    hyperepp baseline --f0 0.75 --f-target 0.98 --format csv

A JSON config file (``--config``) may hold the sections noise, fluctuation,
geometry, baseline and output; flags given on the command line override it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import baseline, nbsa, practical
from .epp import NoiseModel, run_epp

COMMANDS = ("epp", "dispersive", "nbsa", "sweep", "ff", "factorize", "baseline")
FORMATS = ("json", "csv", "text")

CONFIG_SECTIONS = {
    "noise": {"a", "b", "c", "d", "dphi_s", "dphi_f"},
    "fluctuation": {"model", "base", "horizon", "samples", "delta", "amplitude", "period", "series", "seed"},
    "geometry": {"L_a1", "L_a2", "L_b1", "L_b2", "omega1", "omega2", "v"},
    "baseline": {"f0", "f_target"},
    "output": {"path", "format", "seed", "mode", "trials"},
}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    command: str
    noise: NoiseModel = field(default_factory=NoiseModel)
    fluctuation: practical.FluctuationSpec | None = None
    geometry: practical.FiberGeometry | None = None
    f0: float | None = None
    f_target: float | None = None
    seed: int = 0
    mode: str = "exhaustive"
    trials: int = 10_000
    out: str | None = None
    format: str = "json"
    options: dict = field(default_factory=dict)


def _check_keys(doc: dict, allowed: set, where: str):
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def load_config_file(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    _check_keys(doc, set(CONFIG_SECTIONS), "config")
    for name, keys in CONFIG_SECTIONS.items():
        if name in doc:
            if not isinstance(doc[name], dict):
                raise ConfigError(f"config section {name!r} must be an object")
            _check_keys(doc[name], keys, name)
    return doc


_FLAG_TARGETS = {
    "a": ("noise", "a"), "b": ("noise", "b"), "c": ("noise", "c"), "d": ("noise", "d"),
    "dphi_s": ("noise", "dphi_s"), "dphi_f": ("noise", "dphi_f"),
    "model": ("fluctuation", "model"), "base": ("fluctuation", "base"), "horizon": ("fluctuation", "horizon"),
    "samples": ("fluctuation", "samples"), "delta": ("fluctuation", "delta"),
    "amplitude": ("fluctuation", "amplitude"), "period": ("fluctuation", "period"),
    "series": ("fluctuation", "series"),
    "L_a1": ("geometry", "L_a1"), "L_a2": ("geometry", "L_a2"), "L_b1": ("geometry", "L_b1"),
    "L_b2": ("geometry", "L_b2"), "omega1": ("geometry", "omega1"), "omega2": ("geometry", "omega2"),
    "v": ("geometry", "v"),
    "f0": ("baseline", "f0"), "f_target": ("baseline", "f_target"),
    "out": ("output", "path"), "format": ("output", "format"), "seed": ("output", "seed"),
    "mode": ("output", "mode"), "trials": ("output", "trials"),
}


def build_config(args: argparse.Namespace) -> ScenarioConfig:
    doc = load_config_file(args.config) if getattr(args, "config", None) else {}
    merged = {k: dict(v) for k, v in doc.items()}
    for flag, (section, key) in _FLAG_TARGETS.items():
        val = getattr(args, flag, None)
        if val is not None:
            merged.setdefault(section, {})[key] = val

    out = merged.get("output", {})
    fmt = out.get("format", "csv" if args.command == "sweep" else "json")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    seed = int(out.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    mode = out.get("mode", "exhaustive")
    if mode not in ("exhaustive", "sampled"):
        raise ConfigError("mode must be exhaustive or sampled")
    trials = int(out.get("trials", 10_000))
    if trials <= 0:
        raise ConfigError("trials must be positive")

    fluct = None
    if "fluctuation" in merged:
        f = dict(merged["fluctuation"])
        if isinstance(f.get("series"), str):
            f["series"] = tuple(float(x) for x in f["series"].split(",") if x.strip())
        f.setdefault("seed", seed)
        fluct = practical.FluctuationSpec(**f)

    noise_kw = merged.get("noise", {})
    noise = NoiseModel(**{k: float(v) for k, v in noise_kw.items()},
                       fluctuation=fluct if args.command == "epp" else None)
    geometry = practical.FiberGeometry(**{k: float(v) for k, v in merged["geometry"].items()}) \
        if "geometry" in merged else None
    base = merged.get("baseline", {})

    opts = {k: getattr(args, k) for k in ("compensation", "table", "input", "param", "start", "stop",
                                          "steps", "grid") if getattr(args, k, None) is not None}
    return ScenarioConfig(
        command=args.command, noise=noise, fluctuation=fluct, geometry=geometry,
        f0=base.get("f0"), f_target=base.get("f_target"), seed=seed, mode=mode, trials=trials,
        out=out.get("path"), format=fmt, options=opts,
    )


# -- rendering -----------------------------------------------------------------------

def _rows_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def _rows_text(rows: list[dict], columns) -> str:
    lines = ["  ".join(f"{c:>14}" for c in columns)]
    for r in rows:
        lines.append("  ".join(f"{r[c]:14.10g}" if isinstance(r[c], float) else f"{r[c]!s:>14}" for c in columns))
    return "\n".join(lines) + "\n"


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _report_output(report, fmt: str) -> str:
    if fmt == "json":
        return report.to_json() + "\n"
    if fmt == "csv":
        return report.to_csv()
    return report.to_text()


def run_scenario(cfg: ScenarioConfig) -> str:
    """Execute one configured command and return the rendered output."""
    cmd, fmt, opts = cfg.command, cfg.format, cfg.options
    if cmd == "epp":
        report = run_epp(cfg.noise, mode=cfg.mode, seed=cfg.seed, trials=cfg.trials)
        return _report_output(report, fmt)

    if cmd == "dispersive":
        comp = opts.get("compensation", "on") == "on"
        return _report_output(practical.dispersive_epp_run(cfg.noise, compensation=comp), fmt)

    if cmd == "nbsa":
        if opts.get("input"):
            label, rec = nbsa.nbsa_classify(opts["input"])
            doc = {"input": opts["input"], "classification": label, "record": rec.to_dict()}
            if fmt == "json":
                return _dump(doc)
            return f"{opts['input']} -> {label} (round1_equal={rec.round1_equal}, round2_equal={rec.round2_equal})\n"
        if fmt == "json":
            return _dump(nbsa.truth_table_dict())
        if fmt == "csv":
            rows = [{"input": k, "round1_equal": v["round1_equal"], "round2_equal": v["round2_equal"],
                     "classification": v["classification"], "total_probability": v["total_probability"]}
                    for k, v in nbsa.truth_table_dict().items()]
            return _rows_csv(rows, list(rows[0]))
        return nbsa.truth_table_text()

    if cmd == "sweep":
        param = opts.get("param", "dphi_s")
        steps = opts.get("steps", 13)
        if steps < 1:
            raise ConfigError("steps must be >= 1")
        values = np.linspace(opts.get("start", 0.0), opts.get("stop", np.pi), steps)
        grid = opts.get("grid")
        points = practical.simplex_grid(grid) if grid else [cfg.noise.weights]
        rows = practical.sweep(points, values, param, fixed=cfg.noise)
        if fmt == "json":
            return _dump({"param": param, "rows": rows, "max_abs_error": max(r["abs_error"] for r in rows)})
        if fmt == "csv":
            return _rows_csv(rows, practical.SWEEP_COLUMNS)
        return _rows_text(rows, practical.SWEEP_COLUMNS)

    if cmd == "ff":
        spec = cfg.fluctuation or practical.FluctuationSpec(seed=cfg.seed)
        res = practical.time_avg_ff(spec)
        doc = {"fluctuation": spec.to_dict(), "F_f": res.ff,
               "rho_e": {"re": res.rho_e.real.tolist(), "im": res.rho_e.imag.tolist()}}
        if fmt == "json":
            return _dump(doc)
        if fmt == "csv":
            return _rows_csv([{"model": spec.model, "samples": spec.samples, "F_f": res.ff}],
                             ["model", "samples", "F_f"])
        return f"model={spec.model} samples={spec.samples} F_f={res.ff:.12f}\n"

    if cmd == "factorize":
        if cfg.geometry is None:
            raise ConfigError("factorize needs a geometry (flags or config section)")
        f = practical.factorization_overlap(cfg.geometry)
        row = {"overlap": f.overlap, "residual_phase": f.residual_phase, "condition": f.condition}
        if fmt == "json":
            doc = dict(row, exact={"re": f.exact.real.tolist(), "im": f.exact.imag.tolist()},
                       factorized={"re": f.factorized.real.tolist(), "im": f.factorized.imag.tolist()})
            return _dump(doc)
        if fmt == "csv":
            return _rows_csv([row], list(row))
        return _rows_text([row], list(row))

    if cmd == "baseline":
        if cfg.f0 is None or cfg.f_target is None:
            raise ConfigError("baseline needs --f0 and --f-target")
        trace, det = baseline.resource_compare(float(cfg.f0), float(cfg.f_target))
        if fmt == "csv":
            return trace.to_csv()
        doc = baseline.comparison_dict(trace, det)
        if fmt == "json":
            return _dump(doc)
        return (trace.to_csv() + f"expected pairs {trace.pairs_consumed_expected:.6g} "
                f"vs {det['hyperentangled_pairs']} hyperentangled pair\n")

    raise ConfigError(f"unknown command {cmd!r}")


def write_output(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".hyperepp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- argument parsing ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=FORMATS)


def _noise_flags(p: argparse.ArgumentParser):
    for name in ("a", "b", "c", "d"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--dphi-s", dest="dphi_s", type=float)
    p.add_argument("--dphi-f", dest="dphi_f", type=float)


def _fluct_flags(p: argparse.ArgumentParser):
    p.add_argument("--model", choices=practical.FLUCTUATION_MODELS)
    p.add_argument("--base", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--period", type=float)
    p.add_argument("--series", help="comma-separated Delta_f samples")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperepp", description="Hyperentanglement purification simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("epp", help="run the two-step purification")
    _common(p)
    _noise_flags(p)
    _fluct_flags(p)
    p.add_argument("--mode", choices=("exhaustive", "sampled"))
    p.add_argument("--trials", type=int)

    p = sub.add_parser("dispersive", help="purification with fixed phase dispersion")
    _common(p)
    _noise_flags(p)
    p.add_argument("--compensation", choices=("on", "off"))

    p = sub.add_parser("nbsa", help="nonlocal Bell-state analysis")
    _common(p)
    p.add_argument("--table", action="store_true", default=None, help="emit the truth table (default)")
    p.add_argument("--input", choices=nbsa.BELL_LABELS, help="classify a single Bell input")

    p = sub.add_parser("sweep", help="formula-vs-simulation sweep over a dispersion phase")
    _common(p)
    _noise_flags(p)
    p.add_argument("--param", choices=("dphi_s", "dphi_f"))
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--grid", type=int, help="use a grid**3 simplex grid instead of --a..--d")

    p = sub.add_parser("ff", help="time-averaged fidelity under a fluctuating frequency phase")
    _common(p)
    _fluct_flags(p)

    p = sub.add_parser("factorize", help="exact vs factorized carrier state for fiber lengths")
    _common(p)
    for name in ("L_a1", "L_a2", "L_b1", "L_b2", "omega1", "omega2", "v"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)

    p = sub.add_parser("baseline", help="conventional recursive purification resource count")
    _common(p)
    p.add_argument("--f0", type=float)
    p.add_argument("--f-target", dest="f_target", type=float)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        text = run_scenario(cfg)
        write_output(text, cfg.out)
    except (ValueError, TypeError, OSError, RuntimeError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
