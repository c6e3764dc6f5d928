"""Command-line front end.

Every command reads optional ``key=value`` defaults from ``--config`` and lets
flags override them. Output is plain data (CSV or JSON); ``--gnuplot`` also
writes a small plotting script next to the data.

Exit codes: 0 success, 2 invalid configuration, 3 runtime or numerical
failure, 4 I/O or input-file errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .detection import BUCKET, MODES, RESOLVING, DetectorModel, SceneParams, joint_density
from .errors import (InvalidParameterError, NoDataError, OutOfModelError, ParseError,
                     QuadratureError, ResolutionError, SpatialHOMError)
from .estimator import TrialConfig, fisher_for, mle, run_trials
from .information import (fi_contribution, fisher_asymptote, fisher_nonresolving,
                          fisher_partial, fisher_resolving)
from .sampler import read_events_csv, sample_batch, write_events_csv
from .units import PhysicalSetup
from .wavepacket import envelope, load_distribution_csv, make_gaussian, qfi

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "nu": "1.0",
    "dx": "4.0",
    "sigma_k": "1.0",
    "n": "3000",
    "trials": "200",
    "seed": "12345",
    "mode": RESOLVING,
    "format": "csv",
    "dx_min": "0.0",
    "dx_max": "6.0",
    "dx_steps": "61",
    "dk_steps": "401",
    "workers": "1",
}


class ConfigError(SpatialHOMError):
    pass


def read_config(path) -> dict[str, str]:
    """Flat ``key=value`` file; ``#`` starts a comment, dashes equal underscores."""
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


class Settings:
    """Merged view of defaults, config file and flags."""

    def __init__(self, args: argparse.Namespace):
        merged = dict(DEFAULTS)
        if args.config:
            merged.update(read_config(args.config))
        for key, value in vars(args).items():
            if key not in ("command", "config", "func") and value is not None:
                merged[key] = str(value) if not isinstance(value, bool) else ("1" if value else "0")
        self.raw = merged

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def num(self, key, cast=float, default=None):
        value = self.raw.get(key)
        if value in (None, ""):
            if default is None:
                raise ConfigError(f"missing required setting {key!r}")
            return default
        try:
            return cast(value)
        except ValueError:
            raise ConfigError(f"setting {key!r}: cannot parse {value!r}") from None

    def optional(self, key) -> float | None:
        value = self.raw.get(key)
        return None if value in (None, "") else self.num(key)

    def floats(self, key) -> list[float]:
        try:
            return [float(v) for v in str(self.raw[key]).split(",") if v.strip()]
        except (KeyError, ValueError):
            raise ConfigError(f"setting {key!r} must be a comma-separated list of numbers") from None

    def flag(self, key) -> bool:
        return str(self.raw.get(key, "0")).lower() in ("1", "true", "yes", "on")


# -- setup helpers ---------------------------------------------------------------

def _physical(s: Settings) -> PhysicalSetup | None:
    if s.get("sigma_x") in (None, ""):
        return None
    return PhysicalSetup(s.num("sigma_x"), s.optional("k0"), s.optional("distance"),
                         s.optional("pixel_y"))


def _envelope(s: Settings):
    if s.get("dist_csv"):
        return envelope(load_distribution_csv(s.get("dist_csv")))
    if _physical(s) is not None:
        return envelope(make_gaussian(1.0))
    return envelope(make_gaussian(s.num("sigma_k")))


def _to_units(s: Settings, length: float) -> float:
    phys = _physical(s)
    return length if phys is None else phys.length_to_units(length)


def _scene(s: Settings, dx: float | None = None) -> SceneParams:
    nu = s.floats("nu")[0]
    dx = s.floats("dx")[0] if dx is None else dx
    return SceneParams(_to_units(s, dx), nu, _envelope(s))


def _detector(s: Settings, scene: SceneParams) -> DetectorModel:
    mode = s.get("mode")
    sigma = scene.sigma_k
    pixel = s.num("pixel", default=0.0) or None
    phys = _physical(s)
    if phys is not None and phys.pixel_dk_units() is not None:
        pixel = phys.pixel_dk_units()
    if s.get("range"):
        parts = s.floats("range")
        k_range = (-abs(parts[0]), abs(parts[0])) if len(parts) == 1 else (parts[0], parts[1])
        det = DetectorModel(mode, pixel, k_range, snap=s.flag("snap"))
    else:
        det = DetectorModel.default(sigma, mode, pixel, snap=s.flag("snap"))
    return det


def _search(s: Settings):
    lo, hi = s.get("search_lo"), s.get("search_hi")
    if lo in (None, "") and hi in (None, ""):
        return None
    sigma = _envelope(s).sigma_k
    lo = _to_units(s, s.num("search_lo", default=0.0))
    hi = _to_units(s, s.num("search_hi", default=20.0 / sigma)) if hi not in (None, "") \
        else 20.0 / sigma
    return lo, hi


def _out(s: Settings, default: str) -> Path:
    return Path(s.get("out") or default)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _csv(header: list[str], rows, meta: dict | None = None) -> str:
    lines = [f"# {k}={v}" for k, v in (meta or {}).items()]
    lines.append(",".join(header))
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _gnuplot(path: Path, data: Path, using: list[str], xlabel: str, ylabel: str) -> None:
    plots = ", \\\n     ".join(f"'{data.name}' using {u}" for u in using)
    _write_text(path, "set datafile separator ','\nset datafile commentschars '#'\n"
                      f"set key autotitle columnhead\nset xlabel '{xlabel}'\n"
                      f"set ylabel '{ylabel}'\nplot {plots}\n")


# -- commands ------------------------------------------------------------------------

def cmd_probability(s: Settings) -> int:
    scene = _scene(s)
    half = s.num("dk_max", default=6.0 * math.sqrt(2.0) * scene.sigma_k)
    dk = np.linspace(-half, half, s.num("dk_steps", int))
    p_a = joint_density(dk, "A", scene)
    p_b = joint_density(dk, "B", scene)
    c = scene.envelope(dk)
    out = _out(s, "probability.csv")
    meta = {"nu": scene.nu, "delta_x": scene.delta_x, "sigma_k": scene.sigma_k}
    _write_text(out, _csv(["dk", "p_a", "p_b", "envelope"], zip(dk, p_a, p_b, c), meta))
    if s.flag("gnuplot"):
        _gnuplot(out.with_suffix(".gp"), out, ["1:2 with lines", "1:3 with lines",
                                               "1:4 with lines"], "dk", "P(dk, X)")
    return EXIT_OK


def cmd_fisher(s: Settings) -> int:
    """fisher_scan.csv (all information columns normalised to H) and fi_contrib.csv."""
    out_dir = _out(s, ".")
    nus = s.floats("nu")
    env = _envelope(s)
    h = qfi(env.sigma_k)
    dxs = np.linspace(_to_units(s, s.num("dx_min")), _to_units(s, s.num("dx_max")),
                      s.num("dx_steps", int))
    rows = []
    for nu in nus:
        for dx in dxs:
            scene = SceneParams(float(dx), nu, env)
            rows.append((dx, nu, fisher_resolving(scene) / h,
                         fisher_partial("A", scene) / h, fisher_partial("B", scene) / h,
                         fisher_nonresolving(scene) / h, fisher_asymptote(nu, env.sigma_k) / h))
    meta = {"sigma_k": env.sigma_k, "normalisation": "H=2*sigma_k^2"}
    scan = out_dir / "fisher_scan.csv"
    _write_text(scan, _csv(["dx", "nu", "f_over_h", "f_partial_a", "f_partial_b",
                            "f_nonresolving", "asymptote"], rows, meta))

    dx0 = _to_units(s, s.floats("dx")[0])
    half = s.num("dk_max", default=6.0 * math.sqrt(2.0) * env.sigma_k)
    dk = np.linspace(-half, half, s.num("dk_steps", int))
    contrib = []
    for nu in nus:
        f = fi_contribution(dk, SceneParams(dx0, nu, env))
        contrib += [(k, nu, v) for k, v in zip(dk, f)]
    fic = out_dir / "fi_contrib.csv"
    _write_text(fic, _csv(["dk", "nu", "f_nu"], contrib, dict(meta, delta_x=dx0)))
    if s.flag("gnuplot"):
        _gnuplot(out_dir / "fisher_scan.gp", scan, ["1:3", "1:5", "1:4", "1:6"],
                 "sigma_k dx", "F / H")
        _gnuplot(out_dir / "fi_contrib.gp", fic, ["1:3"], "dk", "f_nu")
    return EXIT_OK


def cmd_simulate(s: Settings) -> int:
    scene = _scene(s)
    det = _detector(s, scene)
    samples = sample_batch(s.num("n", int), s.num("seed", int), scene, det)
    extra = {}
    phys = _physical(s)
    if phys is not None:
        extra = {"sigma_x": phys.sigma_x, "units": "sigma_k"}
    write_events_csv(samples, _out(s, "events.csv"), extra)
    return EXIT_OK


def _result_json(s: Settings, result, extra: dict | None = None) -> dict:
    d = result.to_dict()
    phys = _physical(s)
    if phys is not None:
        d["delta_x_hat_sigma_units"] = d["delta_x_hat"]
        d["delta_x_hat"] = phys.length_from_units(d["delta_x_hat"])
        d["search_interval"] = [phys.length_from_units(v) for v in d["search_interval"]]
    if extra:
        d.update(extra)
    return d


def cmd_estimate(s: Settings) -> int:
    events = s.get("events")
    if not events:
        raise ConfigError("estimate needs --events")
    env = envelope(load_distribution_csv(s.get("dist_csv"))) if s.get("dist_csv") else None
    samples = read_events_csv(events, env)
    result = mle(samples, _search(s), s.optional("nu_assumed"))
    text = json.dumps(_result_json(s, result), indent=2) + "\n"
    if s.get("out"):
        _write_text(Path(s.get("out")), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_trials(s: Settings) -> int:
    scene = _scene(s)
    det = _detector(s, scene)
    ns = [int(v) for v in s.floats("n")]
    phys = _physical(s)
    rows, records = [], []
    for n in ns:
        cfg = TrialConfig(scene, det, n, s.num("trials", int), s.num("seed", int), _search(s))
        stats = run_trials(cfg, workers=s.num("workers", int))
        if s.get("per_trial"):
            path = Path(s.get("per_trial"))
            if len(ns) > 1:
                path = path.with_name(f"{path.stem}_n{n}{path.suffix}")
            stats.write_trials_csv(path)
        rec = stats.to_dict()
        if phys is not None:
            rec["mean_estimate_physical"] = phys.length_from_units(stats.mean_estimate)
            rec["std_physical"] = phys.length_from_units(math.sqrt(stats.variance))
            rec["crb_std_physical"] = phys.length_from_units(math.sqrt(stats.crb_reference))
        records.append(rec)
        sat = stats.crb_saturation if stats.crb_saturation is not None else math.nan
        bias = stats.bias_relative if stats.bias_relative is not None else math.nan
        row = (n, stats.variance, stats.crb_reference, sat, bias, stats.mean_estimate)
        if phys is not None:
            row += (rec["mean_estimate_physical"], rec["std_physical"], rec["crb_std_physical"])
        rows.append(row)

    if s.get("format") == "json":
        _write_text(_out(s, "trials.json"), json.dumps(records, indent=2) + "\n")
    else:
        out = _out(s, "trials.csv")
        meta = {"nu": scene.nu, "delta_x": scene.delta_x, "sigma_k": scene.sigma_k,
                "mode": det.mode, "trials": s.num("trials", int), "seed": s.num("seed", int),
                "fisher": fisher_for(scene, det)}
        header = ["n", "variance", "crb", "saturation", "bias", "mean"]
        if phys is not None:
            header += ["mean_physical", "std_physical", "crb_std_physical"]
            meta["sigma_x"] = phys.sigma_x
        _write_text(out, _csv(header, rows, meta))
        if s.flag("gnuplot"):
            _gnuplot(out.with_suffix(".gp"), out, ["1:2", "1:3 with lines"], "N", "variance")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("scene")
    g.add_argument("--config", help="key=value file with defaults for any flag")
    g.add_argument("--nu", help="distinguishability in [0, 1]; comma list for fisher")
    g.add_argument("--dx", help="true separation (physical units when --sigma-x is given)")
    g.add_argument("--sigma-k", dest="sigma_k", help="Gaussian momentum spread (default 1)")
    g.add_argument("--dist-csv", dest="dist_csv", help="tabulated |phi(k)|^2 as k,density CSV")
    g = common.add_argument_group("physical units")
    g.add_argument("--sigma-x", dest="sigma_x", help="wavepacket position spread; enables physical units")
    g.add_argument("--k0", help="wavenumber")
    g.add_argument("--distance", help="source-camera distance d")
    g.add_argument("--pixel-y", dest="pixel_y", help="camera pixel size")
    g = common.add_argument_group("detector and run")
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--pixel", help="momentum pitch of a pixel (sigma_k units)")
    g.add_argument("--range", help="dk range 'lo,hi' or a half-width")
    g.add_argument("--snap", action="store_true", default=None, help="snap dk to pixel centres")
    g.add_argument("--n", help="events per run; comma list sweeps trials")
    g.add_argument("--trials", help="Monte Carlo trials per N")
    g.add_argument("--seed", help="master seed")
    g.add_argument("--workers", help="parallel processes for trials")
    g.add_argument("--search-lo", dest="search_lo")
    g.add_argument("--search-hi", dest="search_hi")
    g.add_argument("--out", help="output file (directory for fisher)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--gnuplot", action="store_true", default=None, help="also write a gnuplot script")

    parser = argparse.ArgumentParser(
        prog="spatial-hom",
        description="Momentum-resolved two-photon interference: separation sensing toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probability", parents=[common], help="P(dk, X) table")
    p.add_argument("--dk-max", dest="dk_max")
    p.add_argument("--dk-steps", dest="dk_steps")
    p.set_defaults(func=cmd_probability)

    p = sub.add_parser("fisher", parents=[common], help="Fisher information scans")
    p.add_argument("--dx-min", dest="dx_min")
    p.add_argument("--dx-max", dest="dx_max")
    p.add_argument("--dx-steps", dest="dx_steps")
    p.add_argument("--dk-max", dest="dk_max")
    p.add_argument("--dk-steps", dest="dk_steps")
    p.set_defaults(func=cmd_fisher)

    p = sub.add_parser("simulate", parents=[common], help="sample detection events to CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="maximum-likelihood estimate from events CSV")
    p.add_argument("--events", required=False, help="events CSV written by simulate")
    p.add_argument("--nu-assumed", dest="nu_assumed", help="override nu used by the likelihood")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("trials", parents=[common], help="Monte Carlo estimator statistics")
    p.add_argument("--per-trial", dest="per_trial", help="per-trial CSV output")
    p.set_defaults(func=cmd_trials)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(args)
        return args.func(settings)
    except (ConfigError, InvalidParameterError, ResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NoDataError, OutOfModelError, QuadratureError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
