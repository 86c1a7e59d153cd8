"""Wigner slices from measured two-point correlations.

At a fixed shear ``(X, Y)`` the correlation ``Phi(eps)`` is Fourier
transformed over the centre coordinate ``eps`` with kernel
``exp(-i k . eps)``.  For a field of definite parity ``s`` under
``(x, y) -> (-x, -y)`` (every LG mode, ``s = (-1)**n``) this yields

    F(k) = pi**2 * s * W(X, P_X; Y, P_Y),   P = scale * (w / sqrt(2)) * k

with ``scale = 1/2`` for a unit-power field.  The slice therefore carries
the beam parity as a sign and divides by the measured beam power; the axis
scale can be re-measured with :func:`calibrate_axes`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import minimize_scalar

from .errors import CalibrationError, ConfigurationError, RangeError
from .lg_fields import BeamSpec, default_grid, lg_field
from .ssi_sim import ShearSetting, TPCFRecord, extract_tpcf, synthesize_interferograms
from .wigner_analytic import PI2, QuadraturePoint, wdf_analytic

ANALYTIC_AXIS_SCALE = 0.5
DEFAULT_P_MAX = 3.0
DEFAULT_P_STEP = 0.02


@dataclass(frozen=True)
class AxisCalibration:
    """Fitted momentum-axis scale and its relative rms fit residual."""

    scale: float = ANALYTIC_AXIS_SCALE
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class WignerSlice:
    """``W(X_fixed, P_X; Y_fixed, P_Y)`` on a square momentum grid.

    ``values[i, j]`` belongs to ``P_Y = p_axis[i]`` and ``P_X = p_axis[j]``.
    ``residual_imag`` is the largest imaginary part discarded, in the same
    units as ``values``.
    """

    values: np.ndarray
    X_fixed: float
    Y_fixed: float
    p_axis: np.ndarray
    residual_imag: float = 0.0

    @cached_property
    def _interp(self):
        return RegularGridInterpolator((self.p_axis, self.p_axis), self.values, method="linear")

    def at(self, P_X, P_Y):
        """Bilinear interpolation at momenta inside the grid."""
        P_X = np.asarray(P_X, dtype=float)
        P_Y = np.asarray(P_Y, dtype=float)
        lo, hi = self.p_axis[0], self.p_axis[-1]
        if (np.any(P_X < lo - 1e-12) or np.any(P_X > hi + 1e-12)
                or np.any(P_Y < lo - 1e-12) or np.any(P_Y > hi + 1e-12)):
            raise RangeError(f"momentum outside the slice support [{lo:g}, {hi:g}]")
        py, px = np.broadcast_arrays(np.clip(P_Y, lo, hi), np.clip(P_X, lo, hi))
        out = self._interp(np.stack([py.ravel(), px.ravel()], axis=-1)).reshape(py.shape)
        return out if out.ndim else float(out)


def momentum_axis(p_max: float = DEFAULT_P_MAX, step: float = DEFAULT_P_STEP) -> np.ndarray:
    n = int(round(p_max / step))
    return np.arange(-n, n + 1) * step


def dtft2(values: np.ndarray, spacing: float, kx, ky) -> np.ndarray:
    """``sum(values * exp(-i (kx x + ky y))) * spacing**2`` at arbitrary frequencies.

    ``x`` and ``y`` are measured from node ``N//2``.  Output shape is
    ``(len(ky), len(kx))``.
    """
    values = np.asarray(values)
    n_rows, n_cols = values.shape
    xs = (np.arange(n_cols) - n_cols // 2) * spacing
    ys = (np.arange(n_rows) - n_rows // 2) * spacing
    mx = np.exp(-1j * np.outer(np.asarray(kx, dtype=float), xs))
    my = np.exp(-1j * np.outer(np.asarray(ky, dtype=float), ys))
    return (my @ values @ mx.T) * spacing ** 2


def centered_dft(values: np.ndarray, spacing: float, pad: int = 2):
    """Zero-padded FFT with zero frequency at the centre.

    Returns ``(F, k_axis)``; ``F`` uses the same kernel and normalisation as
    :func:`dtft2` and ``k_axis`` is in radians per unit length.
    """
    values = np.asarray(values)
    n = values.shape[0]
    if values.shape != (n, n):
        raise ConfigurationError(f"centered_dft needs a square grid, got {values.shape}")
    m = pad * n
    padded = np.zeros((m, m), dtype=complex)
    off = m // 2 - n // 2
    padded[off:off + n, off:off + n] = values
    spec = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(padded))) * spacing ** 2
    k = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(m, d=spacing))
    return spec, k


def _check_record(tpcf: TPCFRecord):
    v = np.asarray(tpcf.values)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ConfigurationError(f"TPCF must be sampled on a square uniform grid, got shape {v.shape}")
    if not (np.isfinite(tpcf.spacing) and tpcf.spacing > 0):
        raise ConfigurationError(f"TPCF grid spacing must be positive, got {tpcf.spacing}")
    return v


def _power(tpcf: TPCFRecord) -> float:
    return 1.0 if tpcf.power is None else float(tpcf.power)


def tpcf_to_wdf_slice(tpcf: TPCFRecord, beam: BeamSpec, calibration: AxisCalibration = None,
                      p_axis=None, method: str = "dtft", pad: int = 2) -> WignerSlice:
    """Fourier transform one TPCF into a Wigner slice at its shear.

    ``method="dtft"`` evaluates the transform directly on ``p_axis``
    (default ``|P| <= 3`` in steps of 0.02).  ``method="fft"`` zero-pads to
    ``pad * N`` and returns the FFT's own momentum nodes instead.
    """
    values = _check_record(tpcf)
    cal = calibration or AxisCalibration()
    k_per_p = math.sqrt(2.0) / (cal.scale * beam.waist_w)
    norm = beam.parity / (PI2 * _power(tpcf))
    if method == "dtft":
        p = momentum_axis() if p_axis is None else np.asarray(p_axis, dtype=float)
        spec = dtft2(values, tpcf.spacing, p * k_per_p, p * k_per_p)
    elif method == "fft":
        spec, k = centered_dft(values, tpcf.spacing, pad)
        p = k / k_per_p
    else:
        raise ConfigurationError(f"unknown transform method {method!r}")
    return WignerSlice(values=spec.real * norm, X_fixed=tpcf.shear.X_shear, Y_fixed=tpcf.shear.Y_shear,
                       p_axis=p, residual_imag=float(np.max(np.abs(spec.imag))) / (PI2 * _power(tpcf)))


def simulate_tpcf(beam: BeamSpec, shear: ShearSetting, n_pixels: int = 512, extent_waists: float = 8.0,
                  noise=None, field=None) -> TPCFRecord:
    """LG field -> four frames -> TPCF, for one shear."""
    if field is None:
        field = lg_field(beam, default_grid(beam, n_pixels, extent_waists))
    kwargs = {} if noise is None else {"noise": noise}
    frames = synthesize_interferograms(field, shear, waist_w=beam.waist_w, **kwargs)
    return extract_tpcf(frames)


def calibrate_axes(reference_beam: BeamSpec, probe_shears, n_pixels: int = 512,
                   extent_waists: float = 8.0, p_max: float = DEFAULT_P_MAX, n_p: int = 61,
                   max_residual: float = 0.02) -> AxisCalibration:
    """Fit the momentum-axis scale against the analytic Gaussian Wigner function.

    Noiseless Gaussian TPCFs are simulated at every probe shear; the scale
    minimising the summed squared deviation from the analytic slices is
    returned.  A relative rms residual above ``max_residual`` raises
    :class:`CalibrationError`.
    """
    if reference_beam.order_n != 0 or reference_beam.order_m != 0:
        raise ConfigurationError("axis calibration needs a Gaussian (n = m = 0) reference beam")
    shears = [s if isinstance(s, ShearSetting) else ShearSetting(*s) for s in probe_shears]
    if not shears:
        raise ConfigurationError("axis calibration needs at least one probe shear")
    field = lg_field(reference_beam, default_grid(reference_beam, n_pixels, extent_waists))
    records = [simulate_tpcf(reference_beam, s, field=field) for s in shears]
    p = np.linspace(-p_max, p_max, n_p)
    PY, PX = np.meshgrid(p, p, indexing="ij")
    targets = [wdf_analytic(0, 0, QuadraturePoint(s.X_shear, PX, s.Y_shear, PY)) for s in shears]
    peak = max(float(np.max(np.abs(t))) for t in targets)

    def cost(scale):
        cal = AxisCalibration(scale)
        err = [tpcf_to_wdf_slice(r, reference_beam, cal, p_axis=p).values - t
               for r, t in zip(records, targets)]
        return float(np.mean([np.mean(e ** 2) for e in err]))

    res = minimize_scalar(cost, bounds=(0.05, 5.0), method="bounded", options={"xatol": 1e-10})
    residual = math.sqrt(res.fun) / peak
    if residual > max_residual:
        raise CalibrationError(f"axis calibration residual {residual:.3%} exceeds {max_residual:.1%}")
    return AxisCalibration(float(res.x), residual)


def write_slice_csv(slice_: WignerSlice, path) -> Path:
    """One row per node: ``P_X, P_Y, W``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["P_X", "P_Y", "W"])
        for i, py in enumerate(slice_.p_axis):
            for j, px in enumerate(slice_.p_axis):
                out.writerow([f"{px:.6f}", f"{py:.6f}", f"{slice_.values[i, j]:.10e}"])
    return path


def read_slice_csv(path, X_fixed: float = 0.0, Y_fixed: float = 0.0) -> WignerSlice:
    """Inverse of :func:`write_slice_csv` (the shear is not stored in the CSV)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    px = np.array([float(r["P_X"]) for r in rows])
    w = np.array([float(r["W"]) for r in rows])
    axis = np.unique(px)
    n = axis.size
    if w.size != n * n:
        raise ConfigurationError(f"slice CSV {path} is not a full square grid")
    return WignerSlice(w.reshape(n, n), X_fixed, Y_fixed, axis)


def simulate_slice(beam: BeamSpec, shear: ShearSetting, n_pixels: int = 512, extent_waists: float = 8.0,
                   noise=None, calibration: AxisCalibration = None, p_axis=None, field=None) -> WignerSlice:
    """Full simulated measurement of one Wigner slice."""
    tpcf = simulate_tpcf(beam, shear, n_pixels, extent_waists, noise=noise, field=field)
    return tpcf_to_wdf_slice(tpcf, beam, calibration, p_axis=p_axis)
