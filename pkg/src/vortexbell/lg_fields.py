"""Laguerre-Gaussian vortex fields sampled on square grids.

All lengths share one unit chosen by the caller (the command-line tools use
micrometres).  Fields are evaluated in the waist plane, so there is no
wavefront curvature or Gouy phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError

MAX_ORDER_N = 8
MAX_ORDER_M = 4
MAX_LAGUERRE_DEGREE = 12

# Units used by the command-line tools: micrometres.  The waist puts eight
# waists across 512 pixels of a 4.65 um camera.
DEFAULT_WAIST_UM = 297.6
DEFAULT_WAVELENGTH_UM = 0.5328

Sampler = Callable[[np.ndarray, np.ndarray], np.ndarray]


def laguerre(m, alpha, x):
    """Generalized Laguerre polynomial ``L_m^alpha(x)``.

    Evaluated with the upward three-term recurrence
    ``(k+1) L_{k+1} = (2k+1+alpha-x) L_k - (k+alpha) L_{k-1}``.

    Parameters
    ----------
    m : int
        degree, ``0 <= m <= 12``
    alpha : int or float
        non-negative shape parameter; ``alpha = 0`` gives the plain polynomial
    x : float or numpy.ndarray
        evaluation points, must be finite

    Returns
    -------
    float or numpy.ndarray
        same shape as ``x``
    """
    if int(m) != m or not 0 <= m <= MAX_LAGUERRE_DEGREE:
        raise DomainError(f"laguerre degree must be an integer in [0, {MAX_LAGUERRE_DEGREE}], got {m}")
    if alpha < 0:
        raise DomainError(f"laguerre alpha must be non-negative, got {alpha}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("laguerre argument must be finite")
    m = int(m)
    prev = np.ones_like(x)
    if m == 0:
        return prev if prev.ndim else float(prev)
    cur = (1.0 + alpha) - x
    for k in range(1, m):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class BeamSpec:
    """Parameters of one Laguerre-Gaussian mode.

    ``order_n`` is the signed azimuthal index (topological charge) and
    ``order_m`` the radial index.
    """

    waist_w: float
    wavelength_lambda: float
    order_n: int = 0
    order_m: int = 0

    def __post_init__(self):
        if not self.waist_w > 0:
            raise DomainError(f"waist_w must be positive, got {self.waist_w}")
        if not self.wavelength_lambda > 0:
            raise DomainError(f"wavelength_lambda must be positive, got {self.wavelength_lambda}")
        if int(self.order_n) != self.order_n or abs(self.order_n) > MAX_ORDER_N:
            raise DomainError(f"order_n must be an integer with |n| <= {MAX_ORDER_N}, got {self.order_n}")
        if int(self.order_m) != self.order_m or not 0 <= self.order_m <= MAX_ORDER_M:
            raise DomainError(f"order_m must be an integer in [0, {MAX_ORDER_M}], got {self.order_m}")

    @property
    def lambda_bar(self) -> float:
        """Reduced wavelength, lambda / 2 pi."""
        return self.wavelength_lambda / (2.0 * math.pi)

    @property
    def parity(self) -> int:
        """Eigenvalue of the field under (x, y) -> (-x, -y)."""
        return -1 if self.order_n % 2 else 1


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Complex field samples on a uniform N x N grid.

    ``samples[row, col]`` is the field at ``y = center_y + (row - N//2) * spacing``
    and ``x = center_x + (col - N//2) * spacing``, so the centre sits exactly
    on a grid node.  An optional ``sampler`` evaluates the same field at
    arbitrary coordinates; it is used for exact sub-pixel displacements.
    """

    samples: np.ndarray
    spacing: float
    center: tuple = (0.0, 0.0)
    sampler: Optional[Sampler] = field(default=None, repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", s)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ConfigurationError(f"field samples must be square, got shape {s.shape}")
        n = s.shape[0]
        if n < 16 or n % 2:
            raise ConfigurationError(f"grid size must be even and >= 16, got {n}")
        if not self.spacing > 0:
            raise ConfigurationError(f"grid spacing must be positive, got {self.spacing}")
        p = self.power()
        if not (np.isfinite(p) and p > 0):
            raise ConfigurationError("field must have finite, non-zero power")

    @property
    def n_pixels(self) -> int:
        return self.samples.shape[0]

    @property
    def extent(self) -> float:
        return self.n_pixels * self.spacing

    def axis(self) -> np.ndarray:
        """Offsets of the grid nodes from the centre along either axis."""
        n = self.n_pixels
        return (np.arange(n) - n // 2) * self.spacing

    def coordinates(self):
        """Absolute ``(x, y)`` coordinate arrays matching ``samples``."""
        a = self.axis()
        return np.meshgrid(a + self.center[0], a + self.center[1], indexing="xy")

    def power(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.spacing ** 2)

    def shifted(self, dx: float, dy: float) -> np.ndarray:
        """Samples of ``E(x + dx, y + dy)`` on this grid.

        Uses the analytic sampler when present, otherwise a Fourier
        (band-limited, periodic) shift of the stored samples.
        """
        if dx == 0 and dy == 0:
            return self.samples.copy()
        if self.sampler is not None:
            xx, yy = self.coordinates()
            return np.asarray(self.sampler(xx + dx, yy + dy), dtype=complex)
        n = self.n_pixels
        k = 2 * np.pi * np.fft.fftfreq(n, d=self.spacing)
        ramp = np.exp(1j * (k[None, :] * dx + k[:, None] * dy))
        return np.fft.ifft2(np.fft.fft2(self.samples) * ramp)


def _lg_raw(spec: BeamSpec, x, y):
    w = spec.waist_w
    r2 = x * x + y * y
    na = abs(spec.order_n)
    radial = (2.0 * r2 / w ** 2) ** (na / 2.0) * np.exp(-r2 / w ** 2)
    if spec.order_m:
        radial = radial * laguerre(spec.order_m, na, 2.0 * r2 / w ** 2)
    if spec.order_n == 0:
        return radial.astype(complex)
    return radial * np.exp(1j * spec.order_n * np.arctan2(y, x))


def default_grid(spec: BeamSpec, n_pixels: int = 512, extent_waists: float = 8.0):
    """``(N, spacing)`` for a grid ``extent_waists`` beam waists wide."""
    return n_pixels, extent_waists * spec.waist_w / n_pixels


def lg_field(spec: BeamSpec, grid_shape=None, center=(0.0, 0.0)) -> FieldGrid:
    """Sample the LG mode ``spec`` with unit total power on the grid.

    ``grid_shape`` is ``(N, spacing)``; it defaults to 512 pixels across
    eight waists.
    """
    n, spacing = grid_shape if grid_shape is not None else default_grid(spec)
    if n < 16 or n % 2:
        raise ConfigurationError(f"grid size must be even and >= 16, got {n}")
    if not spacing > 0:
        raise ConfigurationError(f"grid spacing must be positive, got {spacing}")
    if n * spacing < 4 * spec.waist_w:
        raise ConfigurationError(
            f"grid extent {n * spacing:g} cannot contain 4 waists ({4 * spec.waist_w:g})")
    cx, cy = center
    a = (np.arange(n) - n // 2) * spacing
    xx, yy = np.meshgrid(a, a, indexing="xy")
    raw = _lg_raw(spec, xx, yy)
    norm = math.sqrt(float(np.sum(np.abs(raw) ** 2)) * spacing ** 2)

    def sampler(x, y):
        return _lg_raw(spec, x - cx, y - cy) / norm

    return FieldGrid(raw / norm, spacing, (float(cx), float(cy)), sampler)


def apply_spp(input: FieldGrid, charge: int) -> FieldGrid:
    """Imprint the azimuthal phase ``exp(i * charge * phi)`` of a spiral phase plate.

    The phase is referenced to the grid centre; the singular node at the
    centre gets phase 0.  Amplitudes are untouched, so power is conserved.
    """
    if int(charge) != charge:
        raise DomainError(f"spiral phase plate charge must be an integer, got {charge}")
    charge = int(charge)
    if charge == 0:
        return FieldGrid(input.samples.copy(), input.spacing, input.center, input.sampler)
    cx, cy = input.center
    xx, yy = input.coordinates()
    out = input.samples * np.exp(1j * charge * np.arctan2(yy - cy, xx - cx))
    sampler = None
    if input.sampler is not None:
        inner = input.sampler

        def sampler(x, y):
            return inner(x, y) * np.exp(1j * charge * np.arctan2(y - cy, x - cx))

    return FieldGrid(out, input.spacing, input.center, sampler)


def winding_number(field: FieldGrid, radius: float, n_points: int = 720) -> float:
    """Accumulated phase / 2 pi around a circle of ``radius`` about the centre.

    Phase steps are taken between consecutive points of the circle and
    wrapped to (-pi, pi] before summing.
    """
    cx, cy = field.center
    theta = np.linspace(0.0, 2 * np.pi, n_points, endpoint=False)
    px = cx + radius * np.cos(theta)
    py = cy + radius * np.sin(theta)
    if field.sampler is not None:
        vals = field.sampler(px, py)
    else:
        vals = _bilinear(field.samples, (px - cx) / field.spacing + field.n_pixels // 2,
                         (py - cy) / field.spacing + field.n_pixels // 2)
    steps = np.angle(np.roll(vals, -1) / vals)
    return float(np.sum(steps) / (2 * np.pi))


def _bilinear(samples, col, row):
    c0 = np.floor(col).astype(int)
    r0 = np.floor(row).astype(int)
    fc = col - c0
    fr = row - r0
    s = samples
    return ((1 - fr) * ((1 - fc) * s[r0, c0] + fc * s[r0, c0 + 1])
            + fr * ((1 - fc) * s[r0 + 1, c0] + fc * s[r0 + 1, c0 + 1]))


def inner_product(a: FieldGrid, b: FieldGrid) -> complex:
    """Grid inner product ``sum(conj(a) * b) * spacing**2``."""
    if a.samples.shape != b.samples.shape or not math.isclose(a.spacing, b.spacing):
        raise ConfigurationError("inner product needs fields on the same grid")
    return complex(np.sum(np.conj(a.samples) * b.samples) * a.spacing ** 2)


HEADER_KEYS = ("n_pixels", "spacing", "center_x", "center_y")


def save_field(field: FieldGrid, stem) -> tuple:
    """Write ``<stem>.npy`` (complex128 samples) and ``<stem>.hdr`` (key = value).

    Returns the two paths.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data = stem.with_suffix(".npy")
    header = stem.with_suffix(".hdr")
    np.save(data, field.samples.astype(np.complex128))
    values = (field.n_pixels, repr(float(field.spacing)),
              repr(float(field.center[0])), repr(float(field.center[1])))
    header.write_text("".join(f"{k} = {v}\n" for k, v in zip(HEADER_KEYS, values)))
    return data, header


def load_field(stem) -> FieldGrid:
    """Inverse of :func:`save_field`; the loaded field has no analytic sampler."""
    stem = Path(stem)
    meta = {}
    for line in stem.with_suffix(".hdr").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    missing = [k for k in HEADER_KEYS if k not in meta]
    if missing:
        raise ConfigurationError(f"field header {stem}.hdr lacks keys: {', '.join(missing)}")
    samples = np.load(stem.with_suffix(".npy"))
    if samples.shape != (int(meta["n_pixels"]),) * 2:
        raise ConfigurationError(
            f"field data shape {samples.shape} disagrees with n_pixels = {meta['n_pixels']}")
    return FieldGrid(samples, float(meta["spacing"]),
                     (float(meta["center_x"]), float(meta["center_y"])))
