"""Declarative Monte-Carlo experiments: TOML config in, CSV rows and checks out.

A config names the geometry (``n``, ``rho``), the sampling budget
(``trials``, ``seed``), a ``[labels.<name>]`` table per matrix and any of
three experiment kinds:

* ``m_max``: moments ``tau_j(M(u)^m)`` of every label for ``j`` in ``states``;
* ``[[words]]``: polynomial words ``tau_j(p_1(M(u_1)) ... p_k(M(u_k)))``;
* ``[sweep]``: one moment followed across the sizes in ``n_list``.

Every estimate is compared against its Fock-model limit.  An estimate passes
when ``|estimate - oracle| <= max(sigmas * stderr, rel * |oracle| + abs)``.
"""

from __future__ import annotations

import csv
import io
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cfree import AlgebraElement, _center_word, model_for, product_moment
from .rmt import BlockSpec, EnsembleSpec, LabelParams, finite_size_sweep, mc_moments_both, mc_words, \
    oracle_moments

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "run_experiment",
           "ExperimentResult", "CSV_HEADER"]

CSV_HEADER = ["target", "index", "n", "estimate", "stderr", "oracle", "abs_error"]

_TOP_KEYS = {"n", "rho", "trials", "seed", "m_max", "states", "tau2_oracle", "output", "labels",
             "words", "sweep", "tol_rel", "tol_abs", "tol_sigmas", "title"}
_LABEL_KEYS = {"a1", "a2", "v11", "v12", "v22"}
_WORD_KEYS = {"id", "labels", "polys", "state", "centering", "tol_rel", "tol_abs", "tol_sigmas"}
_SWEEP_KEYS = {"label", "m", "n_list", "state", "trials"}


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


@dataclass
class Tolerance:
    rel: float = 0.05
    abs: float = 0.02
    sigmas: float = 3.0

    def bound(self, oracle: float, stderr: float) -> float:
        return max(self.sigmas * stderr, self.rel * abs(oracle) + self.abs)


@dataclass
class WordSpec:
    id: str
    labels: list[str]
    polys: list[list[float]]
    state: int = 1
    centering: str = "none"
    tol: Tolerance = field(default_factory=Tolerance)


@dataclass
class SweepSpec:
    label: str
    m: int
    n_list: list[int]
    state: int = 1
    trials: int | None = None


@dataclass
class ExperimentConfig:
    n: int
    labels: dict[str, LabelParams]
    rho: float = 0.5
    trials: int = 400
    seed: int = 0
    m_max: int | None = None
    states: list[int] = field(default_factory=lambda: [1])
    tau2_oracle: str = "ensemble"
    output: str | None = None
    title: str = ""
    tol: Tolerance = field(default_factory=Tolerance)
    words: list[WordSpec] = field(default_factory=list)
    sweep: SweepSpec | None = None
    raw: dict = field(default_factory=dict)

    @property
    def block(self) -> BlockSpec:
        return BlockSpec(self.n, self.labels, self.rho)

    @property
    def ensemble(self) -> EnsembleSpec:
        return EnsembleSpec(self.block, self.trials, self.seed)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        raw = dict(self.raw)
        raw.update({k: v for k, v in kw.items() if v is not None})
        return parse_config(raw)


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    pat = re.compile(rf"^\s*(\[+\s*)?{re.escape(key)}\b")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


def _num(d: dict, key: str, kind, text, default=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required key {key!r}", None)
        return default
    v = d[key]
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind is int:
        ok = isinstance(v, int) and not isinstance(v, bool)
    if not ok:
        raise ConfigError(f"{key!r} must be a {kind.__name__}, got {v!r}", _line_of(text, key))
    return kind(v)


def _unknown(d: dict, allowed: set, where: str, text):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} in {where}", _line_of(text, k))


def _tol(d: dict, base: Tolerance, text) -> Tolerance:
    return Tolerance(
        _num(d, "tol_rel", float, text, base.rel) if "tol_rel" in d else base.rel,
        _num(d, "tol_abs", float, text, base.abs) if "tol_abs" in d else base.abs,
        _num(d, "tol_sigmas", float, text, base.sigmas) if "tol_sigmas" in d else base.sigmas,
    )


def parse_config(raw: dict, text: str | None = None) -> ExperimentConfig:
    """Validate a config mapping; ``text`` is used to report line numbers."""
    _unknown(raw, _TOP_KEYS, "the top level", text)
    if "labels" not in raw or not isinstance(raw["labels"], dict) or not raw["labels"]:
        raise ConfigError("at least one [labels.<name>] table is required", _line_of(text, "labels"))
    labels = {}
    for name, lab in raw["labels"].items():
        if not isinstance(lab, dict):
            raise ConfigError(f"labels.{name} must be a table", _line_of(text, f"labels.{name}"))
        _unknown(lab, _LABEL_KEYS, f"labels.{name}", text)
        try:
            labels[name] = LabelParams(**{k: float(v) for k, v in lab.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"labels.{name}: {exc}", _line_of(text, f"labels.{name}")) from None
    base = Tolerance()
    base = _tol(raw, base, text)
    cfg = ExperimentConfig(
        n=_num(raw, "n", int, text),
        labels=labels,
        rho=_num(raw, "rho", float, text, 0.5),
        trials=_num(raw, "trials", int, text, 400),
        seed=_num(raw, "seed", int, text, 0) if "seed" in raw else 0,
        m_max=_num(raw, "m_max", int, text) if "m_max" in raw else None,
        states=list(raw.get("states", [1])),
        tau2_oracle=raw.get("tau2_oracle", "ensemble"),
        output=raw.get("output"),
        title=str(raw.get("title", "")),
        tol=base,
        raw=dict(raw),
    )
    if any(s not in (1, 2) for s in cfg.states):
        raise ConfigError("states must be a subset of [1, 2]", _line_of(text, "states"))
    if cfg.tau2_oracle not in ("ensemble", "restricted"):
        raise ConfigError("tau2_oracle must be 'ensemble' or 'restricted'", _line_of(text, "tau2_oracle"))
    if cfg.m_max is not None and not 0 <= cfg.m_max <= 8:
        raise ConfigError("m_max must lie in 0..8", _line_of(text, "m_max"))
    for i, w in enumerate(raw.get("words", [])):
        _unknown(w, _WORD_KEYS, f"words[{i}]", text)
        wl = list(w.get("labels", []))
        if not wl or any(u not in labels for u in wl):
            raise ConfigError(f"words[{i}] must list known labels", _line_of(text, "labels = ["))
        polys = w.get("polys", [[0.0, 1.0]] * len(wl))
        if len(polys) != len(wl):
            raise ConfigError(f"words[{i}] needs one polynomial per label", _line_of(text, "polys"))
        centering = w.get("centering", "none")
        if centering not in ("none", "conditional", "psi1"):
            raise ConfigError(f"words[{i}]: unknown centering {centering!r}", _line_of(text, "centering"))
        cfg.words.append(WordSpec(str(w.get("id", i)), wl, [list(map(float, p)) for p in polys],
                                  int(w.get("state", 1)), centering, _tol(w, base, text)))
    if "sweep" in raw:
        sw = raw["sweep"]
        _unknown(sw, _SWEEP_KEYS, "sweep", text)
        if sw.get("label") not in labels:
            raise ConfigError("sweep.label must name a known label", _line_of(text, "sweep"))
        cfg.sweep = SweepSpec(sw["label"], int(sw.get("m", 4)), [int(x) for x in sw["n_list"]],
                              int(sw.get("state", 1)), sw.get("trials"))
    try:
        cfg.block
    except ValueError as exc:
        raise ConfigError(str(exc), _line_of(text, "n")) from None
    return cfg


def load_config(path) -> tuple[ExperimentConfig, str]:
    text = Path(path).read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", int(m.group(1)) if m else None) from None
    return parse_config(raw, text), text


@dataclass
class ExperimentResult:
    rows: list[dict] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)
    sweeps: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r["target"], r["index"], r["n"], repr(r["estimate"]), repr(r["stderr"]),
                        repr(r["oracle"]), repr(r["abs_error"])])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"pass": self.passed,
                "n_checks": len(self.checks),
                "n_failed": sum(not c["pass"] for c in self.checks),
                "checks": self.checks,
                "sweeps": self.sweeps}


def _row(res: ExperimentResult, target, index, n, est, se, oracle, tol: Tolerance | None):
    err = abs(est - oracle)
    res.rows.append({"target": target, "index": index, "n": n, "estimate": est, "stderr": se,
                     "oracle": oracle, "abs_error": err})
    if tol is not None:
        bound = tol.bound(oracle, se)
        res.checks.append({"target": target, "index": index, "n": n, "abs_error": err,
                           "bound": bound, "pass": bool(err <= bound)})


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    res = ExperimentResult()
    block = cfg.block
    if cfg.m_max is not None:
        for u, p in cfg.labels.items():
            t1, t2 = mc_moments_both(block, u, cfg.m_max, cfg.trials, cfg.seed,
                                     workers=workers, tau2=2 in cfg.states)
            for state, tab in ((1, t1), (2, t2)):
                if state not in cfg.states:
                    continue
                oracle = oracle_moments(p, cfg.m_max, state, cfg.tau2_oracle)
                for m in range(cfg.m_max + 1):
                    _row(res, f"{u}@tau{state}", m, cfg.n, float(tab.moments[m]),
                         float(tab.stderr[m]), float(oracle[m]), cfg.tol)
    if cfg.words:
        ens = cfg.ensemble
        for state in (1, 2):
            group = [w for w in cfg.words if w.state == state]
            if not group:
                continue
            prepared = []
            for w in group:
                elems = [AlgebraElement(u, tuple(c)) for u, c in zip(w.labels, w.polys)]
                model = model_for(cfg.labels, sum(e.degree for e in elems))
                if w.centering != "none":
                    elems = _center_word(model, elems, w.centering)
                prepared.append((w, elems, product_moment(model, elems, state)))
            ests = mc_words(ens, [([e.label for e in el], [e.coeffs for e in el])
                                  for _, el, _ in prepared], state, workers=workers)
            for (w, _, oracle), (est, se) in zip(prepared, ests):
                _row(res, ".".join(w.labels) + f"@tau{state}", w.id, cfg.n, est, se, oracle, w.tol)
    if cfg.sweep is not None:
        sw = cfg.sweep
        out = finite_size_sweep(block, sw.label, sw.m, sw.n_list, sw.trials or cfg.trials,
                                cfg.seed, sw.state, workers=workers)
        for r in out.rows:
            _row(res, f"sweep:{sw.label}@tau{sw.state}", sw.m, r["n"], r["estimate"], r["stderr"],
                 out.limit, None)
        first, last = out.rows[0], out.rows[-1]
        allowance = 2.0 * math.hypot(first["stderr"], last["stderr"])
        ok = last["abs_error"] <= first["abs_error"] + allowance
        res.sweeps.append({"label": sw.label, "m": sw.m, "limit": out.limit, "slope": out.slope,
                           "first_error": first["abs_error"], "last_error": last["abs_error"],
                           "allowance": allowance, "pass": bool(ok)})
        res.checks.append({"target": f"sweep:{sw.label}@tau{sw.state}", "index": sw.m,
                           "n": last["n"], "abs_error": last["abs_error"],
                           "bound": first["abs_error"] + allowance, "pass": bool(ok)})
    return res
