"""Virtual shearing Sagnac interferometer.

Covers the glass-block shear calibration, synthesis of the four camera
frames recorded per shear setting, and extraction of the two-point
correlation function (TPCF) from those frames.

Shear convention: a dimensionless shear ``X`` displaces the two
counter-propagating copies of the beam by ``+/- w X / sqrt(2)`` each, and
the extracted correlation is ``Phi(eps) = E(eps + d) E*(eps - d)`` with
``d = (w X / sqrt(2), w Y / sqrt(2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DataIntegrityError, DomainError, RangeError
from .lg_fields import FieldGrid
from .pgm import read_pgm, write_pgm

MAX_SHEAR = 2.0
MAX_TILT_DEG = 3.0
DEFAULT_PIXEL_PITCH_UM = 4.65
FRAME_NAMES = ("i_cw", "i_ccw", "i_phase0", "i_phase90")
SIDECAR = "sidecar.txt"


@dataclass(frozen=True)
class GlassBlock:
    """Tilting glass block on a rotation mount.

    ``scale_reading_t`` is the reading on the mount's linear scale, a
    distance ``mount_arm_l`` from the block centre; ``tan(i) = t / l``.
    """

    refractive_index_mu: float
    thickness_s: float
    mount_arm_l: float
    scale_reading_t: float = 0.0

    def __post_init__(self):
        if not self.refractive_index_mu > 1:
            raise DomainError(f"refractive index must exceed 1, got {self.refractive_index_mu}")
        if self.refractive_index_mu > 2:
            raise DomainError(f"refractive index above 2 is outside the model, got {self.refractive_index_mu}")
        if not self.thickness_s > 0:
            raise DomainError(f"block thickness must be positive, got {self.thickness_s}")
        if not self.mount_arm_l > 0:
            raise DomainError(f"mount arm must be positive, got {self.mount_arm_l}")

    @property
    def incidence(self) -> float:
        """Angle of incidence in radians."""
        ratio = self.scale_reading_t / self.mount_arm_l
        if abs(ratio) >= math.tan(math.radians(89.0)):
            raise DomainError(f"tilt t/l = {ratio:g} is beyond 89 degrees")
        return math.atan(ratio)


def shear_exact(block: GlassBlock) -> float:
    """Lateral beam displacement from Snell's law (signed like ``t``)."""
    i = block.incidence
    r = math.asin(math.sin(i) / block.refractive_index_mu)
    return block.thickness_s * math.sin(i - r) / math.cos(r)


def shear_paraxial(block: GlassBlock) -> float:
    """Small-angle displacement ``s t / l (1 - 1/mu)``."""
    block.incidence  # validates the tilt
    return (block.thickness_s * block.scale_reading_t / block.mount_arm_l
            * (1.0 - 1.0 / block.refractive_index_mu))


def calibration_curve(block: GlassBlock, t_values, waist_w: float,
                      max_tilt_deg: float = MAX_TILT_DEG):
    """Dimensionless shear ``sqrt(2) d / w`` for each scale reading ``t``.

    Returns a list of ``(t, X_shear)`` pairs in input order.
    """
    if not waist_w > 0:
        raise DomainError(f"waist must be positive, got {waist_w}")
    limit = math.tan(math.radians(max_tilt_deg)) * block.mount_arm_l * (1 + 1e-12)
    curve = []
    for t in t_values:
        if abs(t) > limit:
            raise RangeError(
                f"scale reading t = {t:g} exceeds the calibrated tilt of {max_tilt_deg:g} degrees "
                f"(|t| <= {limit:g})")
        d = shear_exact(replace(block, scale_reading_t=float(t)))
        curve.append((float(t), math.sqrt(2.0) * d / waist_w))
    order = sorted(curve)
    xs = [x for _, x in order]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise DataIntegrityError("calibration curve is not monotone in t")
    return curve


def fit_calibration(curve):
    """Least-squares line through a calibration curve.

    Returns ``(slope, intercept, residual)`` where ``residual`` is the largest
    absolute deviation from the line as a fraction of the full shear span.
    """
    t = np.array([c[0] for c in curve])
    x = np.array([c[1] for c in curve])
    slope, intercept = np.polyfit(t, x, 1)
    span = x.max() - x.min()
    resid = np.max(np.abs(x - (slope * t + intercept))) / span if span > 0 else 0.0
    return float(slope), float(intercept), float(resid)


@dataclass(frozen=True)
class ShearSetting:
    X_shear: float = 0.0
    Y_shear: float = 0.0

    def __post_init__(self):
        for name in ("X_shear", "Y_shear"):
            v = getattr(self, name)
            if not math.isfinite(v) or abs(v) > MAX_SHEAR + 1e-12:
                raise RangeError(f"{name} = {v} is outside the calibrated range |shear| <= {MAX_SHEAR}")

    def displacement(self, waist_w: float):
        """Per-arm physical displacement ``(dx, dy)``."""
        f = waist_w / math.sqrt(2.0)
        return self.X_shear * f, self.Y_shear * f

    def negated(self) -> "ShearSetting":
        return ShearSetting(-self.X_shear, -self.Y_shear)


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian camera noise.

    ``gaussian_sigma`` and ``pedestal`` are fractions of the single-beam peak
    intensity.  The pedestal is the camera black level added before
    clipping at zero; by default it is five standard deviations so that
    clipping is negligible and the noise stays unbiased.
    """

    gaussian_sigma: float = 0.0
    seed: int = 0
    pedestal: Optional[float] = None

    def __post_init__(self):
        if not self.gaussian_sigma >= 0:
            raise DomainError(f"gaussian_sigma must be non-negative, got {self.gaussian_sigma}")
        if self.pedestal is not None and self.pedestal < 0:
            raise DomainError(f"pedestal must be non-negative, got {self.pedestal}")

    @property
    def black_level(self) -> float:
        return 5.0 * self.gaussian_sigma if self.pedestal is None else self.pedestal


@dataclass(frozen=True, eq=False)
class InterferogramSet:
    """The four frames recorded at one shear.

    ``dark_level`` is the camera black level present in every frame and
    ``noise_floor`` the per-pixel noise standard deviation, both in the
    frames' intensity units.
    """

    i_cw: np.ndarray
    i_ccw: np.ndarray
    i_phase0: np.ndarray
    i_phase90: np.ndarray
    shear: ShearSetting
    spacing: float
    dark_level: float = 0.0
    noise_floor: float = 0.0

    def frames(self):
        return tuple(getattr(self, k) for k in FRAME_NAMES)


@dataclass(frozen=True, eq=False)
class TPCFRecord:
    """Correlation ``Phi`` over centre coordinates at one shear.

    ``power`` is the single-beam power ``sum(I) * spacing**2`` measured from
    the same frames; it fixes the absolute normalisation of the Wigner slice.
    """

    values: np.ndarray
    shear: ShearSetting
    spacing: float
    power: Optional[float] = None


def two_point_product(field: FieldGrid, shear: ShearSetting, waist_w: float) -> np.ndarray:
    """``E(eps + d) E*(eps - d)`` computed directly from the field."""
    dx, dy = shear.displacement(waist_w)
    return field.shifted(dx, dy) * np.conj(field.shifted(-dx, -dy))


def synthesize_interferograms(field: FieldGrid, shear: ShearSetting, noise: NoiseModel = NoiseModel(),
                              waist_w: float = None) -> InterferogramSet:
    """Render the CW, CCW and two interference frames for one shear.

    The quarter-cycle toggle of the wave plates is an ideal factor ``i`` on
    the counter-clockwise arm.  ``waist_w`` converts the dimensionless shear
    to a physical displacement and is required.
    """
    if waist_w is None or not waist_w > 0:
        raise ConfigurationError("synthesize_interferograms needs the beam waist to scale the shear")
    dx, dy = shear.displacement(waist_w)
    if max(abs(dx), abs(dy)) > field.extent / 4:
        raise ConfigurationError(
            f"shear displacement ({dx:g}, {dy:g}) exceeds a quarter of the grid extent {field.extent:g}")
    e_plus = field.shifted(dx, dy)
    e_minus = field.shifted(-dx, -dy)
    i_cw = np.abs(e_plus) ** 2
    i_ccw = np.abs(e_minus) ** 2
    i_0 = np.abs(e_plus + e_minus) ** 2
    i_90 = np.abs(e_plus + 1j * e_minus) ** 2
    clean = [i_cw, i_ccw, i_0, i_90]

    if noise.gaussian_sigma == 0 and noise.black_level == 0:
        return InterferogramSet(*clean, shear=shear, spacing=field.spacing)

    peak = float(np.max(np.abs(field.samples) ** 2))
    sigma = noise.gaussian_sigma * peak
    dark = noise.black_level * peak
    rng = np.random.default_rng(noise.seed)
    noisy = [np.clip(f + dark + sigma * rng.standard_normal(f.shape), 0.0, None) for f in clean]
    return InterferogramSet(*noisy, shear=shear, spacing=field.spacing, dark_level=dark, noise_floor=sigma)


def extract_tpcf(frames: InterferogramSet, tolerance: float = 6.0) -> TPCFRecord:
    """Subtract the single-beam frames from the interference frames.

    After removing the black level, any pixel more negative than
    ``tolerance`` noise standard deviations (plus a tiny rounding allowance)
    is treated as corrupt data.
    """
    shapes = {f.shape for f in frames.frames()}
    if len(shapes) != 1 or len(next(iter(shapes))) != 2:
        raise ConfigurationError(f"interferogram frames must share one 2-D shape, got {shapes}")
    cw, ccw, p0, p90 = (np.asarray(f, dtype=float) - frames.dark_level for f in frames.frames())
    scale = max(float(np.max(np.abs(p0))), float(np.max(np.abs(cw))), 1e-300)
    floor = -(tolerance * frames.noise_floor + 1e-9 * scale)
    for name, f in zip(FRAME_NAMES, (cw, ccw, p0, p90)):
        low = float(f.min())
        if low < floor:
            raise DataIntegrityError(f"frame {name} has intensity {low:g} below the noise floor {floor:g}")
    values = 0.5 * (p0 - cw - ccw) + 0.5j * (p90 - cw - ccw)
    power = 0.5 * float(np.sum(cw) + np.sum(ccw)) * frames.spacing ** 2
    return TPCFRecord(values, frames.shear, frames.spacing, power)


# --- on-disk frames --------------------------------------------------------

def save_interferograms(frames: InterferogramSet, directory, seed: int = 0, extra: dict = None) -> Path:
    """Write four 16-bit PGM frames plus ``sidecar.txt`` into ``directory``.

    All four frames share one count scale (recorded as ``intensity_scale``)
    so that frame differences survive quantisation.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    top = max(float(np.max(f)) for f in frames.frames())
    scale = 65000.0 / top if top > 0 else 1.0
    for name, f in zip(FRAME_NAMES, frames.frames()):
        counts = np.clip(np.rint(np.asarray(f) * scale), 0, 65535).astype(np.uint16)
        write_pgm(directory / f"{name}.pgm", counts)
    meta = {
        "x_shear": repr(float(frames.shear.X_shear)),
        "y_shear": repr(float(frames.shear.Y_shear)),
        "seed": str(int(seed)),
        "pixel_pitch_um": repr(float(frames.spacing)),
        "intensity_scale": repr(scale),
        "dark_level": repr(float(frames.dark_level)),
        "noise_floor": repr(float(frames.noise_floor)),
    }
    meta.update({k: str(v) for k, v in (extra or {}).items()})
    (directory / SIDECAR).write_text("".join(f"{k} = {v}\n" for k, v in meta.items()))
    return directory


def read_sidecar(directory) -> dict:
    path = Path(directory) / SIDECAR
    meta = {}
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    return meta


def load_interferograms(directory) -> InterferogramSet:
    """Read frames written by :func:`save_interferograms` or recorded in the lab.

    Required sidecar keys are ``x_shear``, ``y_shear``, ``seed`` and
    ``pixel_pitch_um``; ``intensity_scale``, ``dark_level`` and
    ``noise_floor`` default to 1, 0 and one count.
    """
    directory = Path(directory)
    meta = read_sidecar(directory)
    missing = [k for k in ("x_shear", "y_shear", "seed", "pixel_pitch_um") if k not in meta]
    if missing:
        raise ConfigurationError(f"{directory / SIDECAR} lacks keys: {', '.join(missing)}")
    scale = float(meta.get("intensity_scale", 1.0))
    frames = []
    for name in FRAME_NAMES:
        path = directory / f"{name}.pgm"
        try:
            frames.append(read_pgm(path).astype(float) / scale)
        except (OSError, ValueError) as exc:
            raise DataIntegrityError(f"cannot read frame {path}: {exc}") from exc
    shear = ShearSetting(float(meta["x_shear"]), float(meta["y_shear"]))
    return InterferogramSet(*frames, shear=shear, spacing=float(meta["pixel_pitch_um"]),
                            dark_level=float(meta.get("dark_level", 0.0)),
                            noise_floor=float(meta.get("noise_floor", 1.0 / scale)))
