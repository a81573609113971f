"""Command-line front end.

Subcommands write CSV (or JSON) to stdout, or into ``--out DIR`` together
with ``manifest.json``; ``fmeixner replay DIR/manifest.json`` re-runs a
recorded invocation.  Exit codes: 0 ok, 1 computation error, 2 config or
usage error, 3 threshold failure (``rmt --check`` and ``cfree``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import platform
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cfree import KERNEL_THRESHOLD, kernel_report, model_for
from .experiments import ConfigError, load_config, parse_config, run_experiment
from .fock import FockModel, WordParseError, meixner_moments_fock, parse_word, required_depth, \
    state_moment
from .jacobi import DensityError, MeixnerParams, density_eval, density_mass, density_moments, \
    density_support, moments_tridiagonal
from .partitions import enumerate_nc2, enumerate_nc12, moments_combinatorial
from .rmt import LabelParams

log = logging.getLogger("fmeixner")

EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG, EXIT_THRESHOLD = 0, 1, 2, 3
METHODS = ("comb", "tridiag", "fock")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved invocation: enough to replay a run from its manifest."""

    subcommand: str
    params: dict
    out: str | None = None
    seed: int | None = None
    format: str = "csv"
    outputs: list[str] = field(default_factory=list)

    def manifest(self) -> dict:
        return {
            "run": asdict(self),
            "versions": {"fmeixner": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
        }


# ---------------------------------------------------------------- output helpers

def _table_text(header, rows, fmt) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _emit(cfg: RunConfig, name: str, text: str) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    cfg.outputs.append(name)


def _finish(cfg: RunConfig, figures: bool = False) -> None:
    if cfg.out is None:
        return
    out = Path(cfg.out)
    if figures:
        from .plotting import render_outputs
        cfg.outputs.extend(render_outputs(out, cfg.subcommand, cfg.outputs))
    (out / "manifest.json").write_text(json.dumps(cfg.manifest(), indent=2, sort_keys=True) + "\n")


def _ext(fmt: str) -> str:
    return "json" if fmt == "json" else "csv"


# ---------------------------------------------------------------- subcommands

def _meixner(p: dict) -> MeixnerParams:
    return MeixnerParams(p["a1"], p["a2"], p["b1"], p["b2"])


def fock_route(p: MeixnerParams, state: int = 1) -> str:
    if state == 2:
        return "psi2"
    if p.b1 == 0:
        return "dirac"
    if p.b2 == 0:
        return "beta2-zero"
    return "full"


def cmd_moments(cfg: RunConfig) -> int:
    p = _meixner(cfg.params)
    m_max = cfg.params["mmax"]
    methods = cfg.params["methods"]
    cols = {}
    if "comb" in methods:
        cols["comb"] = moments_combinatorial(p.jacobi(), m_max).moments
    if "tridiag" in methods:
        cols["tridiag"] = moments_tridiagonal(p.jacobi(), m_max).moments
    if "fock" in methods:
        cols["fock"] = meixner_moments_fock(p, m_max).moments
        log.info("fock route: %s", fock_route(p))
    cfg.params["fock_route"] = fock_route(p) if "fock" in methods else None
    rows = []
    for m in range(m_max + 1):
        vals = [float(cols[k][m]) for k in cols]
        dev = max(vals) - min(vals) if len(vals) > 1 else 0.0
        rows.append([m, *vals, dev])
    _emit(cfg, f"moments.{_ext(cfg.format)}", _table_text(["m", *cols, "max_dev"], rows, cfg.format))
    _finish(cfg, cfg.params.get("figures", False))
    return EXIT_OK


def cmd_density(cfg: RunConfig) -> int:
    prm = cfg.params
    p = _meixner(prm)
    if not p.is_standard and not prm["nonstandard"]:
        raise UsageError("density needs a1 = 0 and b1 = 1; pass --nonstandard to evaluate "
                         "the standard formula with (a2, b2) anyway")
    q = MeixnerParams(0.0, p.a2, 1.0, p.b2)
    lo, hi = density_support(q)
    pad = 0.1 * (hi - lo)
    xmin = prm["xmin"] if prm["xmin"] is not None else lo - pad
    xmax = prm["xmax"] if prm["xmax"] is not None else hi + pad
    xs = np.linspace(xmin, xmax, prm["grid"])
    ys = density_eval(q, xs)
    _emit(cfg, f"density.{_ext(cfg.format)}",
          _table_text(["x", "density"], [[float(x), float(y)] for x, y in zip(xs, ys)], cfg.format))
    mass = density_mass(q)
    report = {"support": [lo, hi], "mass": mass, "moment_check": None}
    if prm["moment_check"] and abs(mass - 1.0) <= 1e-3:
        quad = density_moments(q, 6)
        comb = moments_combinatorial(q.jacobi(), 6).moments
        report["moment_check"] = [{"m": m, "quadrature": float(quad[m]), "combinatorial": float(comb[m]),
                                   "abs_error": float(abs(quad[m] - comb[m]))} for m in range(7)]
    text = json.dumps(report, indent=2) + "\n"
    if cfg.out is None:
        sys.stderr.write(text)
    else:
        _emit(cfg, "density_report.json", text)
    _finish(cfg, prm.get("figures", False))
    return EXIT_OK


def cmd_fock(cfg: RunConfig) -> int:
    prm = cfg.params
    ops = parse_word(prm["word"])
    labels = sorted({u for _, u in ops if u is not None}) or ["u"]
    if len(labels) > 1:
        raise UsageError("the command line model carries one label; use the library for several")
    p = _meixner(prm)
    depth = prm["depth"] or required_depth(len(ops))
    model = FockModel(labels, depth, p)
    val = state_moment(model, prm["state"], ops)
    prm["depth"] = depth
    text = json.dumps({"word": prm["word"], "state": prm["state"], "value": val}) + "\n" \
        if cfg.format == "json" else f"{val!r}\n"
    _emit(cfg, f"fock.{'json' if cfg.format == 'json' else 'txt'}", text)
    _finish(cfg)
    return EXIT_OK


def _label_params(spec: str, default: dict) -> tuple[str, LabelParams]:
    name, _, vals = spec.partition("=")
    if not vals:
        return name, LabelParams(default["a1"], default["a2"], 0.0, default["b1"], default["b2"])
    parts = [float(x) for x in vals.split(",")]
    if len(parts) != 4:
        raise UsageError(f"--label {spec!r}: expected name=a1,a2,b1,b2")
    return name, LabelParams(parts[0], parts[1], 0.0, parts[2], parts[3])


def cmd_cfree(cfg: RunConfig) -> int:
    prm = cfg.params
    word = [u for u in prm["word"].split(",") if u]
    if not word:
        raise UsageError("--word needs at least one label")
    params = dict(_label_params(s, prm) for s in prm["labels"])
    for u in word:
        params.setdefault(u, _label_params(u, prm)[1])
    degrees = [int(d) for d in str(prm["degrees"]).split(",")]
    if len(degrees) == 1:
        degrees = degrees * len(word)
    model = model_for(params, sum(degrees))
    report = kernel_report(model, word, degrees, cfg.seed or 0, prm["draws"], prm["centering"],
                           prm["threshold"])
    _emit(cfg, "cfree.json", json.dumps(report, indent=2) + "\n")
    _finish(cfg)
    return EXIT_OK if report["pass"] or not prm["check"] else EXIT_THRESHOLD


def cmd_nc(cfg: RunConfig) -> int:
    m = cfg.params["m"]
    gen = enumerate_nc2(m) if cfg.params["pairs_only"] else enumerate_nc12(m)
    _emit(cfg, "partitions.txt", "".join(f"{p}\n" for p in gen))
    _finish(cfg)
    return EXIT_OK


def cmd_rmt(cfg: RunConfig) -> int:
    prm = cfg.params
    exp = parse_config(prm["config"])
    res = run_experiment(exp, workers=prm["workers"])
    if cfg.format == "json":
        _emit(cfg, "rmt.json", json.dumps(res.rows, indent=2) + "\n")
    else:
        _emit(cfg, "rmt.csv", res.to_csv())
    summary = json.dumps(res.summary(), indent=2) + "\n"
    if cfg.out is None:
        sys.stderr.write(summary)
    else:
        _emit(cfg, "summary.json", summary)
    _finish(cfg, prm.get("figures", False))
    log.info("%d checks, %d failed", len(res.checks), sum(not c["pass"] for c in res.checks))
    return EXIT_OK if res.passed or not prm["check"] else EXIT_THRESHOLD


def cmd_plot(cfg: RunConfig) -> int:
    from .plotting import render_outputs
    src = Path(cfg.params["dir"])
    names = sorted(p.name for p in src.iterdir())
    kind = cfg.params["kind"]
    if kind is None:
        manifest = src / "manifest.json"
        if not manifest.exists():
            raise UsageError("no manifest.json; pass --kind")
        kind = json.loads(manifest.read_text())["run"]["subcommand"]
    made = render_outputs(src, kind, names)
    if not made:
        raise UsageError(f"nothing to plot in {src}")
    for name in made:
        print(src / name)
    return EXIT_OK


COMMANDS = {"moments": cmd_moments, "density": cmd_density, "fock": cmd_fock, "cfree": cmd_cfree,
            "nc": cmd_nc, "rmt": cmd_rmt, "plot": cmd_plot}


# ---------------------------------------------------------------- argument parsing

def _add_law(p, a1=0.0, a2=0.0, b1=1.0, b2=1.0):
    p.add_argument("--a1", type=float, default=a1)
    p.add_argument("--a2", type=float, default=a2)
    p.add_argument("--b1", type=float, default=b1)
    p.add_argument("--b2", type=float, default=b2)


def _add_io(p, formats=True):
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--out", help="write artifacts and manifest.json into this directory")
    if formats:
        p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fmeixner", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("moments", help="moments by several routes side by side")
    _add_law(p)
    p.add_argument("--mmax", type=int, default=8)
    p.add_argument("--methods", default="comb,tridiag,fock")
    p.add_argument("--figures", action="store_true", help="also render PNGs next to the CSV")
    _add_io(p)

    p = sub.add_parser("density", help="density curve on a grid plus mass report")
    _add_law(p)
    p.add_argument("--grid", type=int, default=401)
    p.add_argument("--xmin", type=float)
    p.add_argument("--xmax", type=float)
    p.add_argument("--no-moment-check", dest="moment_check", action="store_false")
    p.add_argument("--nonstandard", action="store_true",
                   help="ignore a1 and b1 and evaluate the standard law with (a2, b2)")
    p.add_argument("--figures", action="store_true")
    _add_io(p)

    p = sub.add_parser("fock", help="exact vacuum moment of an operator word")
    p.add_argument("word", help='e.g. "p1* p2* p2 p1"; empty string for the identity')
    _add_law(p)
    p.add_argument("--state", type=int, choices=(1, 2), default=1)
    p.add_argument("--depth", type=int)
    _add_io(p)

    p = sub.add_parser("cfree", help="conditional freeness kernel test in the Fock model")
    p.add_argument("--word", required=True, help="comma-separated labels, e.g. s,u,s")
    p.add_argument("--label", dest="labels", action="append", default=[],
                   help="name=a1,a2,b1,b2 (labels not given use --a1..--b2)")
    _add_law(p, b2=2.0)
    p.add_argument("--degrees", default="3")
    p.add_argument("--draws", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--centering", choices=("conditional", "psi1", "psi2"), default="conditional")
    p.add_argument("--threshold", type=float, default=KERNEL_THRESHOLD)
    p.add_argument("--check", action="store_true", help="exit 3 when the test fails")
    _add_io(p, formats=False)

    p = sub.add_parser("nc", help="list non-crossing singleton/pair partitions")
    p.add_argument("m", type=int)
    p.add_argument("--pairs-only", action="store_true")
    _add_io(p, formats=False)

    p = sub.add_parser("rmt", help="Monte-Carlo block matrix experiment from a TOML config")
    p.add_argument("--config", required=True,
                   help="TOML file, or bundled:<name> for a packaged config")
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--check", action="store_true", help="exit 3 when any check fails")
    p.add_argument("--figures", action="store_true")
    _add_io(p)

    p = sub.add_parser("plot", help="render PNG figures from a run directory")
    p.add_argument("dir")
    p.add_argument("--kind", choices=("moments", "density", "rmt"))

    p = sub.add_parser("replay", help="re-run the invocation recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="directory for the replayed artifacts (default: stdout)")
    return ap


def _bundled(name: str) -> Path:
    from importlib.resources import files
    path = files("fmeixner") / "configs" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return Path(str(path))


def resolve(ns: argparse.Namespace) -> RunConfig:
    """Turn parsed arguments into a self-contained RunConfig."""
    d = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "verbose", "out", "format", "seed")}
    cfg = RunConfig(ns.subcommand, d, getattr(ns, "out", None), getattr(ns, "seed", None),
                    getattr(ns, "format", "csv"))
    if ns.subcommand == "moments":
        methods = [m for m in d["methods"].split(",") if m]
        bad = [m for m in methods if m not in METHODS]
        if bad or not methods:
            raise UsageError(f"--methods must be a subset of {','.join(METHODS)}")
        d["methods"] = methods
        if d["mmax"] < 0:
            raise UsageError("--mmax must be >= 0")
    elif ns.subcommand == "rmt":
        src = d.pop("config")
        path = _bundled(src.split(":", 1)[1]) if src.startswith("bundled:") else Path(src)
        exp, _ = load_config(path)
        raw = dict(exp.raw)
        for key in ("n", "rho", "trials", "seed"):
            val = getattr(ns, key)
            if val is not None:
                raw[key] = val
        parse_config(raw)
        d["config"] = raw
        d["config_source"] = str(src)
        cfg.seed = raw.get("seed", 0)
    return cfg


def execute(cfg: RunConfig) -> int:
    return COMMANDS[cfg.subcommand](cfg)


def replay(path, out=None) -> int:
    data = json.loads(Path(path).read_text())
    run = data["run"]
    cfg = RunConfig(run["subcommand"], run["params"], out, run["seed"], run["format"])
    return execute(cfg)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if ns.subcommand == "replay":
            return replay(ns.manifest, ns.out)
        return execute(resolve(ns))
    except (ConfigError, UsageError, WordParseError, FileNotFoundError) as exc:
        print(f"fmeixner: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, DensityError) as exc:
        print(f"fmeixner: error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
