"""Flat ``key = value`` run configuration with dotted section prefixes.

Example::

    beam.n = 1
    grid.N = 512
    noise.sigma = 0.01
    shears = 0,0; 0.2,0

``shears`` is either ``table1`` (the tabulated optimum for ``beam.n``) or a
``;``-separated list of ``X,Y`` pairs.  Glass-block keys (``block.*``) have
no fallback in configuration files; the built-in default configuration
supplies them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigurationError


def _int(v):
    return int(v)


def _float(v):
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("not finite")
    return x


def _opt_float(v):
    return None if v in ("", "none", "None") else _float(v)


def _ints(v):
    return tuple(int(p) for p in str(v).replace(" ", "").split(",") if p)


def _shears(v):
    if isinstance(v, (tuple, list)):
        return tuple((float(x), float(y)) for x, y in v)
    text = str(v).strip()
    if text.lower() == "table1":
        return "table1"
    pairs = []
    for chunk in text.split(";"):
        if chunk.strip():
            x, y = chunk.split(",")
            pairs.append((_float(x), _float(y)))
    if not pairs:
        raise ValueError("empty shear list")
    return tuple(pairs)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if v == "table1":
        return v
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return "; ".join(f"{x!r},{y!r}" for x, y in v)
    if isinstance(v, tuple):
        return ",".join(str(c) for c in v)
    return str(v)


# dotted key -> (field name, parser)
KEYS = {
    "beam.n": ("beam_n", _int),
    "beam.m": ("beam_m", _int),
    "beam.waist_um": ("waist_um", _float),
    "beam.wavelength_nm": ("wavelength_nm", _float),
    "grid.N": ("grid_n", _int),
    "grid.extent_waists": ("extent_waists", _float),
    "shears": ("shears", _shears),
    "noise.sigma": ("noise_sigma", _float),
    "noise.seed": ("noise_seed", _int),
    "noise.pedestal": ("noise_pedestal", _opt_float),
    "repetitions": ("repetitions", _int),
    "output_dir": ("output_dir", str),
    "block.mu": ("block_mu", _opt_float),
    "block.thickness_cm": ("block_thickness_cm", _opt_float),
    "block.arm_cm": ("block_arm_cm", _opt_float),
    "block.max_tilt_deg": ("block_max_tilt_deg", _float),
    "block.points": ("block_points", _int),
    "bell.mode": ("bell_mode", str),
    "bell.orders": ("bell_orders", _ints),
    "bell.dimensionality": ("bell_dimensionality", str),
}
FIELD_TO_KEY = {name: key for key, (name, _) in KEYS.items()}


@dataclass(frozen=True)
class RunConfig:
    beam_n: int = 1
    beam_m: int = 0
    waist_um: float = 297.6
    wavelength_nm: float = 532.8
    grid_n: int = 512
    extent_waists: float = 8.0
    shears: object = "table1"
    noise_sigma: float = 0.0
    noise_seed: int = 0
    noise_pedestal: object = None
    repetitions: int = 1
    output_dir: str = "out"
    block_mu: object = None
    block_thickness_cm: object = None
    block_arm_cm: object = None
    block_max_tilt_deg: float = 3.0
    block_points: int = 13
    bell_mode: str = "analytic"
    bell_orders: tuple = (0, 1, 2, 3)
    bell_dimensionality: str = "eight"

    def validate(self) -> "RunConfig":
        """Raise :class:`ConfigurationError` naming the first invalid key."""
        checks = [
            ("beam.n", abs(self.beam_n) <= 8),
            ("beam.m", 0 <= self.beam_m <= 4),
            ("beam.waist_um", self.waist_um > 0),
            ("beam.wavelength_nm", self.wavelength_nm > 0),
            ("grid.N", self.grid_n >= 16 and self.grid_n % 2 == 0),
            ("grid.extent_waists", self.extent_waists >= 4),
            ("noise.sigma", self.noise_sigma >= 0),
            ("noise.pedestal", self.noise_pedestal is None or self.noise_pedestal >= 0),
            ("repetitions", self.repetitions >= 1),
            ("block.max_tilt_deg", 0 < self.block_max_tilt_deg < 89),
            ("block.points", self.block_points >= 2),
            ("bell.mode", self.bell_mode in ("analytic", "simulated")),
            ("bell.orders", bool(self.bell_orders) and all(n in (0, 1, 2, 3) for n in self.bell_orders)),
            ("bell.dimensionality", self.bell_dimensionality in ("two", "eight")),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigurationError(f"invalid value for {key}: {_fmt(getattr(self, KEYS[key][0]))}")
        if self.shears != "table1":
            for x, y in self.shears:
                if abs(x) > 2 or abs(y) > 2:
                    raise ConfigurationError(f"invalid value for shears: ({x}, {y}) outside |shear| <= 2")
        return self

    def require(self, *keys) -> None:
        """Raise if any of the dotted ``keys`` is unset."""
        for key in keys:
            if getattr(self, KEYS[key][0]) is None:
                raise ConfigurationError(f"missing required config key {key}")

    def with_values(self, mapping: dict) -> "RunConfig":
        """Copy with values from a ``{dotted key: text or value}`` mapping."""
        updates = {}
        for key, raw in mapping.items():
            if key not in KEYS:
                raise ConfigurationError(f"unknown config key {key}")
            name, parse = KEYS[key]
            try:
                updates[name] = parse(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"invalid value for {key}: {raw!r} ({exc})") from None
        return replace(self, **updates)

    def shear_list(self):
        """Explicit ``(X, Y)`` pairs; ``table1`` expands to the four optimum shears of ``beam.n``."""
        if self.shears == "table1":
            from .bell_analysis import TABLE1

            if self.beam_n not in TABLE1:
                raise ConfigurationError("shears = table1 needs beam.n in 0..3")
            x1, x2, y1, y2 = TABLE1[self.beam_n][1]
            return [(x1, y1), (x1, y2), (x2, y1), (x2, y2)]
        return list(self.shears)

    def to_text(self) -> str:
        return "".join(f"{FIELD_TO_KEY[f.name]} = {_fmt(getattr(self, f.name))}\n" for f in fields(self))


def parse_config(text: str) -> dict:
    """``{dotted key: raw text}`` from ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigurationError(f"config line {lineno}: unknown key {key}")
        out[key] = value
    return out


DEFAULT_BLOCK = {"block.mu": "1.5", "block.thickness_cm": "1.0", "block.arm_cm": "5.2"}

PRESETS = {
    "table1": {"bell.mode": "analytic", "bell.dimensionality": "eight", "bell.orders": "0,1,2,3",
               "shears": "table1"},
    "fig3": {"beam.n": "1", "shears": "0,0; 0.2,0"},
    "fig4": {"beam.n": "1", "bell.mode": "simulated", "bell.dimensionality": "two", "bell.orders": "1"},
    "fig5": {"bell.mode": "simulated", "bell.dimensionality": "eight", "bell.orders": "0,1,2,3",
             "repetitions": "25", "noise.sigma": "0.01", "shears": "table1"},
}


def default_config() -> RunConfig:
    return RunConfig().with_values(DEFAULT_BLOCK)


def build_config(path=None, preset=None, overrides=None) -> RunConfig:
    """Defaults, then preset, then config file, then explicit overrides.

    Without a file the built-in glass-block parameters apply; a config file
    must state its own ``block.*`` keys.
    """
    cfg = default_config() if path is None else RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        cfg = cfg.with_values(PRESETS[preset])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file {path}: {exc}") from None
        cfg = cfg.with_values(parse_config(text))
    if overrides:
        cfg = cfg.with_values(overrides)
    return cfg.validate()
