"""Experiment configuration files (JSON).

Schema, all keys optional unless noted::

    {
      "kind": "verify-eq9",              # required, one of KINDS
      "name": "normal-harmonic",         # default: file stem
      "modes": 1,                        # required
      "cutoff": 20,                      # integer, or "auto"
      "cutoff_tolerance": 1e-12,         # tail target when cutoff is "auto"
      "hamiltonian": "(phi[1]^2 + pi[1]^2)/2",
      "observables": ["phi[1]^2"],
      "distribution": {"kind": "gaussian", "mean": [...], "std": [...]},
      "distributions": [ ... ],          # zero-point: several ensembles
      "samples": 200,
      "seed": 0,
      "times": [0.7],                    # eq10-gap evaluation times
      "time_pairs": [[0, 0.5]],          # extended-survey, default full grid
      "dt": 1e-3,
      "method": "implicit-midpoint",
      "tolerance": 1e-6,                 # numerical floor of every check
      "expect": "equal",                 # or "differ" (eq10-gap)
      "fd_step": 1e-4,
      "fields": ["phi", "pi"],
      "options": {}                      # kind-specific extras
    }

Polynomials use the text grammar of :mod:`fockbridge.parsing`.  Errors carry
``file:line:col``.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field

from .dynamics import METHODS, DistributionSpec
from .parsing import ParseError, parse_phipi
from .symbolic import PhiPiPolynomial

KINDS = (
    "verify-algebra",
    "verify-eq8",
    "verify-eq9",
    "verify-eq6",
    "eq10-gap",
    "zero-point",
    "extended-survey",
)

_KEYS = {
    "kind", "name", "modes", "cutoff", "cutoff_tolerance", "hamiltonian", "observables",
    "distribution", "distributions", "samples", "seed", "times", "time_pairs", "dt",
    "method", "tolerance", "expect", "fd_step", "fields", "options", "description",
}
_DIST_KEYS = {"kind", "state", "mean", "std", "low", "high", "seed"}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with ``source:line:col``."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    modes: int
    cutoff: int | str = "auto"
    cutoff_tolerance: float = 1e-12
    hamiltonian: PhiPiPolynomial | None = None
    hamiltonian_text: str | None = None
    observables: tuple = ()
    observable_texts: tuple = ()
    distributions: tuple = ()
    samples: int = 1
    seed: int = 0
    times: tuple = ()
    time_pairs: tuple | None = None
    dt: float = 1e-3
    method: str = "implicit-midpoint"
    tolerance: float = 1e-6
    expect: str = "equal"
    fd_step: float = 1e-4
    fields: tuple = ("phi", "pi")
    options: dict = field(default_factory=dict)
    source: str = "<string>"

    @property
    def distribution(self) -> DistributionSpec | None:
        return self.distributions[0] if self.distributions else None

    def descriptor(self) -> dict:
        """Canonical, JSON-ready echo of the configuration."""
        return {
            "name": self.name, "kind": self.kind, "modes": self.modes, "cutoff": self.cutoff,
            "cutoff_tolerance": self.cutoff_tolerance, "hamiltonian": self.hamiltonian_text,
            "observables": list(self.observable_texts),
            "distributions": [d.descriptor() for d in self.distributions],
            "samples": self.samples, "seed": self.seed, "times": list(self.times),
            "time_pairs": None if self.time_pairs is None else [list(p) for p in self.time_pairs],
            "dt": self.dt, "method": self.method, "tolerance": self.tolerance,
            "expect": self.expect, "fd_step": self.fd_step, "fields": list(self.fields),
            "options": self.options,
        }


class _Locator:
    """Maps JSON keys back to positions in the source text."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def where(self, key: str | None) -> str:
        if key is not None:
            m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
            if m:
                return self._pos(m.start())
        return f"{self.source}:1:1"

    def _pos(self, offset: int) -> str:
        line = self.text.count("\n", 0, offset) + 1
        col = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        return f"{self.source}:{line}:{col}"

    def fail(self, key: str | None, message: str) -> ConfigError:
        return ConfigError(f"{self.where(key)}: {message}")


def _number(loc: _Locator, raw: dict, key: str, default, *, positive=False, integer=False):
    if key not in raw:
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise loc.fail(key, f"'{key}' must be a number")
    if integer and (not isinstance(v, int)):
        raise loc.fail(key, f"'{key}' must be an integer")
    if not math.isfinite(v):
        raise loc.fail(key, f"'{key}' must be finite")
    if positive and v <= 0:
        raise loc.fail(key, f"'{key}' must be positive")
    return v


def _poly(loc: _Locator, key: str, text, modes: int) -> PhiPiPolynomial:
    if not isinstance(text, str):
        raise loc.fail(key, f"'{key}' must be a polynomial string")
    try:
        p = parse_phipi(text, modes)
    except ParseError as exc:
        raise loc.fail(key, f"cannot parse {key}: {exc}") from None
    except ValueError as exc:
        raise loc.fail(key, f"invalid {key}: {exc}") from None
    if p.chart != "phipi":
        raise loc.fail(key, f"'{key}' must be written in phi/pi variables")
    return p


def _distribution(loc: _Locator, key: str, raw, modes: int, seed: int) -> DistributionSpec:
    if not isinstance(raw, dict):
        raise loc.fail(key, f"'{key}' must be an object")
    extra = set(raw) - _DIST_KEYS
    if extra:
        raise loc.fail(sorted(extra)[0], f"unknown distribution field {sorted(extra)[0]!r}")
    kw = {"kind": raw.get("kind"), "seed": int(raw.get("seed", seed))}
    for name in ("state", "mean", "std", "low", "high"):
        if name in raw:
            v = raw[name]
            if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
                raise loc.fail(name, f"'{name}' must be a list of numbers")
            if len(v) != 2 * modes:
                raise loc.fail(name, f"'{name}' has {len(v)} entries; need 2*modes = {2 * modes}")
            kw[name] = tuple(float(x) for x in v)
    try:
        return DistributionSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise loc.fail(key, f"invalid distribution: {exc}") from None


def parse_config(text: str, source: str = "<string>", default_name: str | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    loc = _Locator(text, source)
    if not isinstance(raw, dict):
        raise loc.fail(None, "top level must be a JSON object")
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise loc.fail(unknown[0], f"unknown key {unknown[0]!r}")

    kind = raw.get("kind")
    if kind not in KINDS:
        raise loc.fail("kind" if "kind" in raw else None, f"'kind' must be one of {', '.join(KINDS)}")
    name = raw.get("name", default_name or kind)
    if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", name):
        raise loc.fail("name", "'name' must be a non-empty string of letters, digits, '.', '_' or '-'")
    if "modes" not in raw:
        raise loc.fail(None, "'modes' is required")
    modes = _number(loc, raw, "modes", None, positive=True, integer=True)

    cutoff = raw.get("cutoff", "auto")
    if cutoff != "auto" and (isinstance(cutoff, bool) or not isinstance(cutoff, int) or cutoff < 1):
        raise loc.fail("cutoff", "'cutoff' must be a positive integer or \"auto\"")
    cut_tol = _number(loc, raw, "cutoff_tolerance", 1e-12, positive=True)
    if cut_tol >= 1:
        raise loc.fail("cutoff_tolerance", "'cutoff_tolerance' must lie in (0, 1)")

    seed = _number(loc, raw, "seed", 0, integer=True)
    if seed < 0:
        raise loc.fail("seed", "'seed' must be nonnegative")

    h_text = raw.get("hamiltonian")
    ham = _poly(loc, "hamiltonian", h_text, modes) if h_text is not None else None
    if ham is not None and not ham.is_real():
        raise loc.fail("hamiltonian", "Hamiltonian coefficients must be real")

    obs_raw = raw.get("observables", [])
    if not isinstance(obs_raw, list):
        raise loc.fail("observables", "'observables' must be a list of strings")
    observables = tuple(_poly(loc, "observables", t, modes) for t in obs_raw)

    dists = []
    if "distribution" in raw:
        dists.append(_distribution(loc, "distribution", raw["distribution"], modes, seed))
    if "distributions" in raw:
        if not isinstance(raw["distributions"], list):
            raise loc.fail("distributions", "'distributions' must be a list")
        dists += [_distribution(loc, "distributions", d, modes, seed) for d in raw["distributions"]]

    samples = _number(loc, raw, "samples", 1, positive=True, integer=True)
    times = raw.get("times", [])
    if not isinstance(times, list) or not all(isinstance(t, (int, float)) and not isinstance(t, bool) and t >= 0 for t in times):
        raise loc.fail("times", "'times' must be a list of nonnegative numbers")
    pairs = raw.get("time_pairs")
    if pairs is not None:
        ok = isinstance(pairs, list) and all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in p)
            for p in pairs)
        if not ok:
            raise loc.fail("time_pairs", "'time_pairs' must be a list of [t, t'] pairs")
        pairs = tuple(tuple(float(t) for t in p) for p in pairs)

    method = raw.get("method", "implicit-midpoint")
    if method not in METHODS:
        raise loc.fail("method", f"'method' must be one of {', '.join(METHODS)}")
    expect = raw.get("expect", "equal")
    if expect not in ("equal", "differ"):
        raise loc.fail("expect", "'expect' must be \"equal\" or \"differ\"")
    fields = raw.get("fields", ["phi", "pi"])
    if not isinstance(fields, list) or not set(fields) <= {"phi", "pi", "z", "y"} or not fields:
        raise loc.fail("fields", "'fields' must be a non-empty list drawn from phi, pi, z, y")
    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise loc.fail("options", "'options' must be an object")

    cfg = ExperimentConfig(
        name=name, kind=kind, modes=modes, cutoff=cutoff, cutoff_tolerance=float(cut_tol),
        hamiltonian=ham, hamiltonian_text=h_text, observables=observables,
        observable_texts=tuple(obs_raw), distributions=tuple(dists), samples=samples, seed=seed,
        times=tuple(float(t) for t in times), time_pairs=pairs,
        dt=float(_number(loc, raw, "dt", 1e-3, positive=True)), method=method,
        tolerance=float(_number(loc, raw, "tolerance", 1e-6, positive=True)), expect=expect,
        fd_step=float(_number(loc, raw, "fd_step", 1e-4, positive=True)), fields=tuple(fields),
        options=options, source=source,
    )
    _check_kind(cfg, loc)
    return cfg


_NEEDS = {
    "verify-eq8": ("distribution",),
    "verify-eq9": ("distribution",),
    "verify-eq6": ("distribution", "hamiltonian"),
    "eq10-gap": ("distribution", "hamiltonian", "observables", "times"),
}


def _check_kind(cfg: ExperimentConfig, loc: _Locator) -> None:
    for need in _NEEDS.get(cfg.kind, ()):
        present = {"distribution": bool(cfg.distributions), "hamiltonian": cfg.hamiltonian is not None,
                   "observables": bool(cfg.observables), "times": bool(cfg.times)}[need]
        if not present:
            raise loc.fail("kind", f"kind {cfg.kind!r} requires '{need}'")
    if cfg.kind == "verify-eq9" and not cfg.observables and "random" not in cfg.options:
        raise loc.fail("kind", "verify-eq9 needs 'observables' or options.random")
    for d in cfg.distributions:
        if d.dimension != 2 * cfg.modes:
            raise loc.fail("distribution", f"distribution has dimension {d.dimension}, need {2 * cfg.modes}")


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_config(text, source=path, default_name=stem)
