"""Sectioned key=value manifests with strict validation.

Unknown sections or keys are rejected before any computation; values are
parsed as exact fractions where geometry demands it ('p/q', named constants)
and as plain numbers elsewhere.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .circle import OMEGA_GOLDEN, RHO_SILVER
from .errors import ManifestError
from .plgraph import PLGraph
from .systems import QpfSystem

_SCHEMA = {
    "base": {"kind", "omega", "rho", "phi", "phi_base", "phi_amplitude"},
    "curve": {"kind", "value", "base", "amplitude", "peak", "file"},
    "weights": {"mode", "k", "n", "epsilon", "alpha", "s"},
    "grids": {"fibers", "vertical", "bins"},
    "run": {"seed", "depth", "crossings", "burnin", "iters", "anchor",
            "waive_flatness", "probe_points"},
    "cocycle": {"family", "energy", "lam", "angle", "a", "b", "c", "d"},
}

_NAMED = {"golden": OMEGA_GOLDEN, "sqrt2m1": RHO_SILVER}


def parse_fraction(text: str) -> Fraction:
    text = text.strip()
    if text in _NAMED:
        return _NAMED[text]
    if "/" in text:
        num, den = text.split("/")
        return Fraction(int(num), int(den))
    return Fraction(text).limit_denominator(10**15)


@dataclass
class Manifest:
    base_kind: str = "translation"
    omega: Fraction = OMEGA_GOLDEN
    rho: Fraction = RHO_SILVER
    phi_base: Fraction = Fraction(3, 10)
    phi_amplitude: Fraction = Fraction(1, 10)
    curve_kind: str = "constant"
    curve_value: Fraction = Fraction(1, 5)
    curve_base: Fraction = Fraction(1, 5)
    curve_amplitude: Fraction = Fraction(7, 10)
    curve_peak: Fraction = Fraction(1, 2)
    curve_file: str | None = None
    weights_mode: str = "quadratic"
    weights_k: int = 4
    weights_n: int = 8
    epsilon: Fraction = Fraction(1, 2)
    alpha: float | None = None
    s: float | None = None
    fibers: int = 4096
    vertical: int = 4096
    bins: int = 4096
    seed: int = 0
    depth: int = 4
    crossings: int = 0
    burnin: int = 10**5
    iters: int = 10**7
    anchor: int = 0
    waive_flatness: bool = False
    probe_points: int = 64
    cocycle_family: str = "harper"
    cocycle_params: dict = field(default_factory=dict)

    def base_system(self) -> QpfSystem:
        if self.base_kind == "translation":
            return QpfSystem.translation(rho=self.rho, omega=self.omega)
        if self.base_kind == "skew":
            phi = PLGraph.tent(self.phi_base, self.phi_amplitude)
            return QpfSystem.skew(phi, omega=self.omega)
        raise ManifestError(f"unknown base kind {self.base_kind!r}")

    def initial_curve(self) -> PLGraph:
        if self.curve_kind == "constant":
            return PLGraph.constant(self.curve_value)
        if self.curve_kind == "tent":
            return PLGraph.tent(self.curve_base, self.curve_amplitude, self.curve_peak)
        if self.curve_kind == "file":
            if not self.curve_file:
                raise ManifestError("curve kind 'file' needs file=")
            from .artifacts import read_curve
            return read_curve(Path(self.curve_file))
        raise ManifestError(f"unknown curve kind {self.curve_kind!r}")

    def normalized_text(self) -> str:
        """Deterministic echo of the manifest used for artifact reproducibility."""
        lines = ["[base]",
                 f"kind={self.base_kind}", f"omega={self.omega}", f"rho={self.rho}",
                 "[curve]",
                 f"kind={self.curve_kind}", f"value={self.curve_value}",
                 f"base={self.curve_base}", f"amplitude={self.curve_amplitude}",
                 "[weights]",
                 f"mode={self.weights_mode}", f"k={self.weights_k}", f"n={self.weights_n}",
                 f"epsilon={self.epsilon}",
                 "[grids]",
                 f"fibers={self.fibers}", f"vertical={self.vertical}", f"bins={self.bins}",
                 "[run]",
                 f"seed={self.seed}", f"depth={self.depth}", f"crossings={self.crossings}",
                 f"burnin={self.burnin}", f"iters={self.iters}", f"anchor={self.anchor}",
                 "[cocycle]",
                 f"family={self.cocycle_family}"]
        for key in sorted(self.cocycle_params):
            lines.append(f"{key}={self.cocycle_params[key]}")
        return "\n".join(lines) + "\n"


def load_manifest(path) -> Manifest:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ManifestError(f"manifest {path} not found or unreadable")
    m = Manifest()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ManifestError(f"unknown manifest section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ManifestError(f"unknown key {key!r} in section [{section}]")
    try:
        if parser.has_section("base"):
            sec = parser["base"]
            m.base_kind = sec.get("kind", m.base_kind)
            if "omega" in sec:
                m.omega = parse_fraction(sec["omega"])
            if "rho" in sec:
                m.rho = parse_fraction(sec["rho"])
            if "phi_base" in sec:
                m.phi_base = parse_fraction(sec["phi_base"])
            if "phi_amplitude" in sec:
                m.phi_amplitude = parse_fraction(sec["phi_amplitude"])
        if parser.has_section("curve"):
            sec = parser["curve"]
            m.curve_kind = sec.get("kind", m.curve_kind)
            if "value" in sec:
                m.curve_value = parse_fraction(sec["value"])
            if "base" in sec:
                m.curve_base = parse_fraction(sec["base"])
            if "amplitude" in sec:
                m.curve_amplitude = parse_fraction(sec["amplitude"])
            if "peak" in sec:
                m.curve_peak = parse_fraction(sec["peak"])
            m.curve_file = sec.get("file", m.curve_file)
        if parser.has_section("weights"):
            sec = parser["weights"]
            m.weights_mode = sec.get("mode", m.weights_mode)
            m.weights_k = sec.getint("k", m.weights_k)
            m.weights_n = sec.getint("n", m.weights_n)
            if "epsilon" in sec:
                m.epsilon = parse_fraction(sec["epsilon"])
            if "alpha" in sec:
                m.alpha = sec.getfloat("alpha")
            if "s" in sec:
                m.s = sec.getfloat("s")
        if parser.has_section("grids"):
            sec = parser["grids"]
            m.fibers = sec.getint("fibers", m.fibers)
            m.vertical = sec.getint("vertical", m.vertical)
            m.bins = sec.getint("bins", m.bins)
        if parser.has_section("run"):
            sec = parser["run"]
            m.seed = sec.getint("seed", m.seed)
            m.depth = sec.getint("depth", m.depth)
            m.crossings = sec.getint("crossings", m.crossings)
            m.burnin = sec.getint("burnin", m.burnin)
            m.iters = sec.getint("iters", m.iters)
            m.anchor = sec.getint("anchor", m.anchor)
            m.waive_flatness = sec.getboolean("waive_flatness", m.waive_flatness)
            m.probe_points = sec.getint("probe_points", m.probe_points)
        if parser.has_section("cocycle"):
            sec = parser["cocycle"]
            m.cocycle_family = sec.get("family", m.cocycle_family)
            for key in ("energy", "lam", "angle", "a", "b", "c", "d"):
                if key in sec:
                    m.cocycle_params[key] = sec.getfloat(key)
    except (ValueError, ArithmeticError) as exc:
        raise ManifestError(f"malformed manifest value: {exc}") from exc
    _validate(m)
    return m


def _validate(m: Manifest) -> None:
    if m.base_kind not in ("translation", "skew"):
        raise ManifestError(f"base kind {m.base_kind!r} not supported")
    if m.curve_kind not in ("constant", "tent", "file"):
        raise ManifestError(f"curve kind {m.curve_kind!r} not supported")
    if m.weights_mode not in ("quadratic", "hoelder"):
        raise ManifestError(f"weights mode {m.weights_mode!r} not supported")
    for name, val in (("fibers", m.fibers), ("vertical", m.vertical), ("bins", m.bins)):
        if val < 16 or val > 2**20:
            raise ManifestError(f"grid {name}={val} out of range")
    if not (0 < m.epsilon < 1):
        raise ManifestError("epsilon must lie in (0,1)")
    if m.depth < 0 or m.depth > 64:
        raise ManifestError("depth out of range")
    if m.cocycle_family not in ("constant", "rotation", "diagonal", "harper"):
        raise ManifestError(f"cocycle family {m.cocycle_family!r} not supported")
