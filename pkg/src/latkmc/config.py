"""Experiment configuration: INI-style file, flat sections, CLI overrides.

A config file mirrors ExperimentConfig section by section::

    [lattice]
    n = 1024

    [coarse]
    q = 1024

    [potential]
    K = 0.0
    J = 5.0
    L = N            ; integer radius, or N for the mean-field case
    profile = constant
    h = 1.0
    beta = 1.0
    d0 = 1.0

    [sampler]
    kind = mlkmc     ; ssa | bkl | null-event | mlkmc | cgmc
    variant = split  ; exact | split   (mlkmc only)
    bound_mode = crude

    [run]
    t_final = 60.0
    n_replicas = 1000
    seed = 2024
    threshold = 0.99
    burn_in = 5.0
    stride = 0       ; 0 means one evaluation every N events
    threads = 1
    grid_points = 500

    [hysteresis]
    h_min = 2.0
    h_max = 6.0
    n_points = 41
    t_equil = 5.0
    t_measure = 10.0

    [output]
    directory = out
    formats = csv,json

Command-line ``--set section.key=value`` entries override file values; the
dedicated flags (--seed, --threads, ...) override both.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .lattice import CoarseSpec, LatticeSpec
from .potentials import PROFILES, PotentialSpec
from .rates import (
    BOUND_MODES,
    COARSE_GRAINED,
    MICROSCOPIC,
    TWO_LEVEL_EXACT,
    TWO_LEVEL_SPLIT,
    RateModel,
)
from .samplers import SAMPLER_KINDS


@dataclass
class ExperimentConfig:
    # lattice
    n: int = 64
    d: int = 1
    # coarse
    q: int = 1
    # potential
    K: float = 0.0
    J: float = 0.0
    L: int | None = None
    profile: str = "constant"
    h: float = 0.0
    beta: float = 1.0
    d0: float = 1.0
    # sampler
    kind: str = "ssa"
    variant: str = "split"
    bound_mode: str = "crude"
    allow_long_range: bool = False
    batch: bool = True
    # run
    t_final: float = 60.0
    n_replicas: int = 100
    seed: int = 0
    threshold: float = 0.99
    burn_in: float = 0.0
    stride: int = 0
    threads: int = 1
    grid_points: int = 500
    # hysteresis
    h_min: float = 0.0
    h_max: float = 1.0
    n_points: int = 41
    t_equil: float = 5.0
    t_measure: float = 10.0
    # output
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigurationError(f"[lattice] n must be >= 2, got {self.n}")
        if self.d != 1:
            raise ConfigurationError(f"[lattice] only d = 1 is supported, got {self.d}")
        if self.q < 1 or self.n % self.q != 0:
            raise ConfigurationError(f"[coarse] q={self.q} must divide n={self.n}")
        if self.L is not None and self.L < 1:
            raise ConfigurationError(f"[potential] L must be >= 1 or N, got {self.L}")
        if self.profile not in PROFILES:
            raise ConfigurationError(f"[potential] unknown profile {self.profile!r}")
        if self.beta <= 0 or self.d0 <= 0:
            raise ConfigurationError("[potential] beta and d0 must be positive")
        if self.kind not in SAMPLER_KINDS:
            raise ConfigurationError(f"[sampler] kind must be one of {SAMPLER_KINDS}, got {self.kind!r}")
        if self.kind == "mlkmc" and self.variant not in ("exact", "split"):
            raise ConfigurationError(f"[sampler] variant must be exact or split, got {self.variant!r}")
        if self.bound_mode not in BOUND_MODES:
            raise ConfigurationError(f"[sampler] bound_mode must be one of {BOUND_MODES}")
        if self.t_final < 0:
            raise ConfigurationError(f"[run] t_final must be >= 0, got {self.t_final}")
        if self.n_replicas < 1:
            raise ConfigurationError(f"[run] n_replicas must be >= 1, got {self.n_replicas}")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigurationError(f"[run] threshold must be in (0, 1], got {self.threshold}")
        if self.threads < 1:
            raise ConfigurationError(f"[run] threads must be >= 1, got {self.threads}")
        if self.n_points < 2:
            raise ConfigurationError(f"[hysteresis] n_points must be >= 2, got {self.n_points}")
        if self.t_equil < 0 or self.t_measure <= 0:
            raise ConfigurationError("[hysteresis] t_equil must be >= 0 and t_measure > 0")

    # -- model assembly ----------------------------------------------------

    def lattice_spec(self) -> LatticeSpec:
        return LatticeSpec(n=self.n, d=self.d)

    def coarse_spec(self) -> CoarseSpec:
        return CoarseSpec(n=self.n, q=self.q)

    def potential_spec(self, h: float | None = None) -> PotentialSpec:
        return PotentialSpec(
            K=self.K,
            J=self.J,
            L=self.L,
            profile=self.profile,
            h=self.h if h is None else h,
            beta=self.beta,
            d0=self.d0,
        )

    def model_variant(self) -> str:
        if self.kind == "cgmc":
            return COARSE_GRAINED
        if self.kind == "mlkmc":
            return TWO_LEVEL_EXACT if self.variant == "exact" else TWO_LEVEL_SPLIT
        return MICROSCOPIC

    def rate_model(self, h: float | None = None) -> RateModel:
        variant = self.model_variant()
        cs = None if variant == MICROSCOPIC else self.coarse_spec()
        return RateModel(variant, self.potential_spec(h=h), self.n, cs=cs)

    def sampler_options(self) -> dict:
        if self.kind == "mlkmc":
            return {"bound_mode": self.bound_mode}
        if self.kind == "bkl":
            return {"allow_long_range": self.allow_long_range}
        if self.kind == "cgmc":
            return {"batch": self.batch}
        return {}

    def echo(self) -> dict:
        d = asdict(self)
        d["formats"] = list(self.formats)
        return d


_SECTION_FIELDS = {
    "lattice": ("n", "d"),
    "coarse": ("q",),
    "potential": ("K", "J", "L", "profile", "h", "beta", "d0"),
    "sampler": ("kind", "variant", "bound_mode", "allow_long_range", "batch"),
    "run": (
        "t_final",
        "n_replicas",
        "seed",
        "threshold",
        "burn_in",
        "stride",
        "threads",
        "grid_points",
    ),
    "hysteresis": ("h_min", "h_max", "n_points", "t_equil", "t_measure"),
    "output": ("directory", "formats"),
}

_INT_FIELDS = {"n", "d", "q", "n_replicas", "seed", "stride", "threads", "grid_points", "n_points"}
_FLOAT_FIELDS = {"K", "J", "h", "beta", "d0", "t_final", "threshold", "burn_in", "h_min", "h_max", "t_equil", "t_measure"}
_BOOL_FIELDS = {"allow_long_range", "batch"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key == "L":
            return None if raw.upper() == "N" else int(raw)
        if key == "formats":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_FIELDS:
            return float(raw)
        if key in _BOOL_FIELDS:
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse {key} = {raw!r}: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from an optional file plus section.key=value overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str  # keys are case-sensitive (K vs k)
        read = parser.read(str(path))
        if not read:
            raise ConfigurationError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SECTION_FIELDS:
                raise ConfigurationError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in _SECTION_FIELDS[section]:
                    raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
                setattr(cfg, key, _parse_value(key, raw))
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in _SECTION_FIELDS or key not in _SECTION_FIELDS[section]:
            raise ConfigurationError(f"unknown override target {dotted!r}")
        setattr(cfg, key, _parse_value(key, raw))
    cfg.validate()
    return cfg
