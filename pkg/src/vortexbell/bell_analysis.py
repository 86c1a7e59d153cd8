"""Continuous-variable Bell-CHSH tests built from Wigner-function values.

The four analyser settings are phase-space points ``a = (X1, P_X1)``,
``a' = (X2, P_X2)`` for the x-mode and ``b = (Y1, P_Y1)``,
``b' = (Y2, P_Y2)`` for the y-mode, and

    B = Pi(a, b) + Pi(a, b') + Pi(a', b) - Pi(a', b'),   Pi = pi**2 W.

Local (separable) fields obey ``|B| <= 2``.

Settings vectors are ordered ``(X1, P_X1, X2, P_X2, Y1, P_Y1, Y2, P_Y2)``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import ConfigurationError, DataIntegrityError, DomainError, RangeError
from .lg_fields import DEFAULT_WAIST_UM, DEFAULT_WAVELENGTH_UM, BeamSpec, default_grid, lg_field
from .ssi_sim import NoiseModel, ShearSetting
from .wdf_reconstruct import AxisCalibration, WignerSlice, simulate_slice
from .wigner_analytic import PI2, QuadraturePoint, pi_value

# |B_max| and the shears (X1, X2, Y1, Y2) quoted for each vortex order.
TABLE1 = {
    0: (2.00, (0.00, 0.58, 0.00, 0.00)),
    1: (2.24, (-0.07, 0.40, -0.05, 0.26)),
    2: (2.35, (0.09, -0.40, 0.00, 0.00)),
    3: (2.40, (-0.09, 0.35, -0.01, 0.06)),
}
# Full optimum quoted for n = 1, as (X1, P_X1, X2, P_X2, Y1, P_Y1, Y2, P_Y2).
N1_OPTIMUM_QUOTED = (-0.07, 0.05, 0.40, -0.26, -0.05, -0.07, 0.26, 0.40)
TWO_PARAM_OPTIMUM_QUOTED = (2.17, 0.45, 0.45)

SUPPORTED_ORDERS = (0, 1, 2, 3)
CONVERGENCE_DIAMETER = 1e-4


@dataclass(frozen=True)
class BellSettings:
    point_a: tuple = (0.0, 0.0)
    point_b: tuple = (0.0, 0.0)
    point_a_prime: tuple = (0.0, 0.0)
    point_b_prime: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_vector()):
            raise DomainError("Bell settings must be finite")

    def as_vector(self) -> np.ndarray:
        (x1, px1), (y1, py1) = self.point_a, self.point_b
        (x2, px2), (y2, py2) = self.point_a_prime, self.point_b_prime
        return np.array([x1, px1, x2, px2, y1, py1, y2, py2], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "BellSettings":
        x1, px1, x2, px2, y1, py1, y2, py2 = (float(c) for c in v)
        return cls((x1, px1), (y1, py1), (x2, px2), (y2, py2))

    @property
    def shears(self):
        """``(X1, X2, Y1, Y2)``."""
        v = self.as_vector()
        return tuple(float(c) for c in v[[0, 2, 4, 6]])

    @property
    def momenta(self):
        """``(P_X1, P_X2, P_Y1, P_Y2)``."""
        v = self.as_vector()
        return tuple(float(c) for c in v[[1, 3, 5, 7]])

    def term_points(self):
        """Quadrature points of the four terms, in the order they enter ``B``."""
        (x1, px1), (y1, py1) = self.point_a, self.point_b
        (x2, px2), (y2, py2) = self.point_a_prime, self.point_b_prime
        return (QuadraturePoint(x1, px1, y1, py1), QuadraturePoint(x1, px1, y2, py2),
                QuadraturePoint(x2, px2, y1, py1), QuadraturePoint(x2, px2, y2, py2))

    def orbit_invariants(self) -> np.ndarray:
        """``(Q0, Q2)`` of each term; constant along the symmetry orbit of ``B``.

        Rotating the ``(X, P_X)`` and ``(Y, P_Y)`` planes by one common angle
        leaves all four pairs unchanged, and ``B`` depends on nothing else.
        """
        out = []
        for X, PX, Y, PY in self.term_points():
            out.append(((X * X + PX * PX + Y * Y + PY * PY) / 4.0, (X * PY - Y * PX) / 2.0))
        return np.array(out)


@dataclass
class BellResult:
    b_value: float
    settings: BellSettings
    b_max: float
    argmax: BellSettings
    repetitions: list = field(default_factory=list)
    mean: float = float("nan")
    std_dev: float = 0.0
    order_n: Optional[int] = None
    converged: bool = True

    def __post_init__(self):
        if abs(self.b_value) > 4 + 1e-9:
            raise DataIntegrityError(f"|B| = {abs(self.b_value):g} exceeds the four-term bound 4")
        if not self.repetitions:
            self.repetitions = [self.b_max]
        if math.isnan(self.mean):
            self.mean = float(np.mean(self.repetitions))
        if self.std_dev < 0:
            raise DataIntegrityError("standard deviation must be non-negative")


def bell_parameter(pi_aa, pi_ab, pi_ba, pi_bb, tol: float = 1e-9):
    """``B = pi_aa + pi_ab + pi_ba - pi_bb``; each term must satisfy ``|Pi| <= 1 + tol``."""
    terms = [np.asarray(t, dtype=float) for t in (pi_aa, pi_ab, pi_ba, pi_bb)]
    for name, t in zip(("pi_aa", "pi_ab", "pi_ba", "pi_bb"), terms):
        if np.any(np.abs(t) > 1 + tol) or not np.all(np.isfinite(t)):
            raise DataIntegrityError(f"{name} outside [-1, 1] (max |Pi| = {np.max(np.abs(t)):.6g})")
    b = terms[0] + terms[1] + terms[2] - terms[3]
    return b if b.ndim else float(b)


def _check_order(n):
    if n not in SUPPORTED_ORDERS:
        raise DomainError(f"vortex order must be one of {SUPPORTED_ORDERS}, got {n}")


def bell_value(n: int, settings, m: int = 0):
    """Signed analytic ``B`` at ``settings`` (a BellSettings or an (8, ...) array)."""
    v = settings.as_vector() if isinstance(settings, BellSettings) else np.asarray(settings, dtype=float)
    x1, px1, x2, px2, y1, py1, y2, py2 = v
    return bell_parameter(pi_value(n, m, (x1, px1, y1, py1)), pi_value(n, m, (x1, px1, y2, py2)),
                          pi_value(n, m, (x2, px2, y1, py1)), pi_value(n, m, (x2, px2, y2, py2)))


def bell_two_param_n1_closed(X, P_Y):
    """Expanded two-variable ``B`` for ``n = 1`` (independent of :func:`bell_value`)."""
    X = np.asarray(X, dtype=float)
    P_Y = np.asarray(P_Y, dtype=float)
    return (np.exp(-P_Y ** 2) * (P_Y ** 2 - 1) + np.exp(-X ** 2) * (X ** 2 - 1)
            - np.exp(-P_Y ** 2 - X ** 2) * ((P_Y + X) ** 2 - 1) - 1)


def two_param_settings(X: float, P_Y: float) -> BellSettings:
    """Settings with only ``X2 = X`` and ``P_Y2 = P_Y`` non-zero."""
    return BellSettings((0.0, 0.0), (0.0, 0.0), (X, 0.0), (0.0, P_Y))


# --- slices ----------------------------------------------------------------

def _slice_lookup(slices, X, Y) -> WignerSlice:
    if callable(slices) and not isinstance(slices, Mapping):
        return slices(ShearSetting(X, Y))
    for (sx, sy), s in slices.items():
        if math.isclose(sx, X, abs_tol=1e-9) and math.isclose(sy, Y, abs_tol=1e-9):
            return s
    raise ConfigurationError(f"no Wigner slice available at shear ({X:g}, {Y:g})")


def bell_two_param_surface(n: int, X_grid, P_Y_grid, source: str = "analytic", slices=None, m: int = 0):
    """``|B|`` over ``X`` (rows) and ``P_Y`` (columns) for the two-variable settings.

    With ``source="reconstructed"``, ``slices`` maps ``(X, Y)`` shears to
    :class:`WignerSlice` objects (or is a callable taking a ShearSetting);
    slices at ``(0, 0)`` and at every ``(X, 0)`` are needed.
    """
    X_grid = np.asarray(X_grid, dtype=float)
    P_Y_grid = np.asarray(P_Y_grid, dtype=float)
    if np.any(np.abs(X_grid) > 3) or np.any(np.abs(P_Y_grid) > 3):
        raise RangeError("two-variable grids must lie within |value| <= 3")
    if source == "analytic":
        XX, PP = np.meshgrid(X_grid, P_Y_grid, indexing="ij")
        z = np.zeros_like(XX)
        return np.abs(bell_value(n, np.stack([z, z, XX, z, z, z, z, PP]), m))
    if source != "reconstructed":
        raise ConfigurationError(f"unknown source {source!r}")
    if slices is None:
        raise ConfigurationError("reconstructed surface needs Wigner slices")
    origin = _slice_lookup(slices, 0.0, 0.0)
    t_aa = PI2 * origin.at(0.0, 0.0)
    t_ab = PI2 * origin.at(0.0, P_Y_grid)
    rows = []
    for X in X_grid:
        s = _slice_lookup(slices, float(X), 0.0)
        rows.append(bell_parameter(t_aa, t_ab, PI2 * s.at(0.0, 0.0), PI2 * s.at(0.0, P_Y_grid), tol=0.05))
    return np.abs(np.array(rows))


class BellArray(NamedTuple):
    """Signed ``B`` over ``(P_X1, P_X2, P_Y1, P_Y2)`` nodes of ``p_axis``."""

    values: np.ndarray
    p_axis: np.ndarray


def _check_slice_set(slices):
    if len(slices) != 4:
        raise ConfigurationError("bell_from_slices needs four slices: (X1,Y1), (X1,Y2), (X2,Y1), (X2,Y2)")
    s11, s12, s21, s22 = slices
    ok = (math.isclose(s11.X_fixed, s12.X_fixed, abs_tol=1e-9) and math.isclose(s21.X_fixed, s22.X_fixed, abs_tol=1e-9)
          and math.isclose(s11.Y_fixed, s21.Y_fixed, abs_tol=1e-9)
          and math.isclose(s12.Y_fixed, s22.Y_fixed, abs_tol=1e-9))
    if not ok:
        raise ConfigurationError("slice shears are not arranged as (X1,Y1), (X1,Y2), (X2,Y1), (X2,Y2)")
    return s11, s12, s21, s22


def bell_from_slices(slices, momenta=None, p_max: float = 1.0, stride: int = 2, tol: float = 0.05):
    """Combine four slices into ``B``.

    With ``momenta = (P_X1, P_X2, P_Y1, P_Y2)`` returns the signed ``B`` at
    that point (bilinear interpolation between slice nodes).  Without it,
    returns a :class:`BellArray` over every ``stride``-th slice node with
    ``|P| <= p_max``.
    """
    s11, s12, s21, s22 = _check_slice_set(slices)
    if momenta is not None:
        px1, px2, py1, py2 = momenta
        return bell_parameter(PI2 * s11.at(px1, py1), PI2 * s12.at(px1, py2),
                              PI2 * s21.at(px2, py1), PI2 * s22.at(px2, py2), tol=tol)
    axis = s11.p_axis
    for s in (s12, s21, s22):
        if s.p_axis.shape != axis.shape or not np.allclose(s.p_axis, axis):
            raise ConfigurationError("the four slices must share one momentum grid")
    idx = np.flatnonzero(np.abs(axis) <= p_max + 1e-12)[::stride]
    sub = np.ix_(idx, idx)
    # slice values are indexed [P_Y, P_X]; transpose to [P_X, P_Y]
    t11, t12, t21, t22 = (PI2 * s.values[sub].T for s in (s11, s12, s21, s22))
    for name, t in zip(("Pi(a,b)", "Pi(a,b')", "Pi(a',b)", "Pi(a',b')"), (t11, t12, t21, t22)):
        if np.max(np.abs(t)) > 1 + tol:
            raise DataIntegrityError(f"{name} outside [-1, 1] (max {np.max(np.abs(t)):.4g})")
    # axes: P_X1, P_X2, P_Y1, P_Y2
    b = (t11[:, None, :, None] + t12[:, None, None, :]
         + t21[None, :, :, None] - t22[None, :, None, :])
    return BellArray(b, axis[idx])


def _nelder_mead(fun, x0, max_iter, xatol=1e-7):
    res = minimize(fun, x0, method="Nelder-Mead",
                   options={"maxiter": max_iter, "xatol": xatol, "fatol": 1e-13, "adaptive": len(x0) > 2})
    simplex = res.final_simplex[0]
    diameter = float(np.max(np.linalg.norm(simplex - simplex[0], axis=1)))
    return res.x, -res.fun, diameter <= CONVERGENCE_DIAMETER


def maximize_over_momenta(slices, p_max: float = 1.0, stride: int = 2, starts: int = 10,
                          max_iter: int = 2000):
    """Largest ``|B|`` over the four momenta with the slice shears held fixed.

    Returns ``(signed_B, (P_X1, P_X2, P_Y1, P_Y2), converged)``.
    """
    arr = bell_from_slices(slices, p_max=p_max, stride=stride)
    flat = np.abs(arr.values).ravel()
    top = np.argpartition(flat, -starts)[-starts:]
    lim = min(s.p_axis[-1] for s in slices)
    best = None
    for i in top:
        x0 = arr.p_axis[list(np.unravel_index(i, arr.values.shape))]

        def obj(p):
            if np.any(np.abs(p) > lim):
                return 0.0
            return -abs(bell_from_slices(slices, p))

        x, val, conv = _nelder_mead(obj, x0, max_iter, xatol=1e-6)
        if best is None or val > best[1]:
            best = (x, val, conv)
    x, _, conv = best
    return float(bell_from_slices(slices, x)), tuple(float(c) for c in x), conv


# --- analytic maximisation -------------------------------------------------

def _coarse_eight(n, m, step, limit, top):
    """Best ``top`` settings on a grid, with ``P_X1`` pinned to zero.

    The common rotation of both phase-space planes is a symmetry of ``B``,
    so point ``a`` can always be turned onto the ``X1`` axis.
    """
    g = np.arange(-limit, limit + step / 2, step)
    plane = np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T
    a1 = np.stack([g, np.zeros_like(g)], axis=1)

    def table(a, b):
        return pi_value(n, m, (a[:, None, 0], a[:, None, 1], b[None, :, 0], b[None, :, 1]))

    t_a1 = table(a1, plane)
    t_a2 = table(plane, plane)
    candidates = []
    for i in range(g.size):
        # axes: a', b, b'
        chunk = np.abs(t_a1[i][None, :, None] + t_a1[i][None, None, :]
                       + t_a2[:, :, None] - t_a2[:, None, :]).ravel()
        for k in np.argpartition(chunk, -top)[-top:]:
            candidates.append((chunk[k], i, *np.unravel_index(k, (plane.shape[0],) * 3)))
    candidates.sort(key=lambda c: -c[0])
    return [np.array([g[i1], *plane[i2], *plane[j1], *plane[j2]])
            for _, i1, i2, j1, j2 in candidates[:top]]


def _coarse_two(n, m, step, limit, top):
    g = np.arange(-limit, limit + step / 2, step)
    surf = bell_two_param_surface(n, g, g, m=m)
    flat = surf.ravel()
    best = np.argpartition(flat, -top)[-top:]
    return [np.array([g[i], g[j]]) for i, j in (np.unravel_index(k, surf.shape) for k in best)]


def _refine_eight(n, m, x0, max_iter):
    # x0 = (X1, X2, P_X2, Y1, P_Y1, Y2, P_Y2) with P_X1 = 0
    def full(u):
        return np.array([u[0], 0.0, *u[1:]])

    x, val, conv = _nelder_mead(lambda u: -abs(bell_value(n, full(u), m)), x0, max_iter)
    return full(x), val, conv


def maximize_bell(n: int, dimensionality: str = "eight", source: str = "analytic", *,
                  m: int = 0, starts: int = 10, coarse_step: float = None, max_iter: int = 4000,
                  noise: NoiseModel = None, n_pixels: int = 512, extent_waists: float = 8.0,
                  shears=None, X_values=None, calibration: AxisCalibration = None,
                  waist: float = DEFAULT_WAIST_UM) -> BellResult:
    """Maximise ``|B|`` for vortex order ``n``.

    Analytic source: coarse grids seed Nelder-Mead refinement from their
    best ``starts`` nodes.  Two variables use one grid of step 0.05; eight
    variables pin ``P_X1 = 0`` and combine two staggered grids (steps 0.25
    and 0.2), because the surface has secondary maxima that a single coarse
    grid can funnel every seed into.

    Reconstructed source: Wigner slices are simulated through the full
    interferometer pipeline.  For ``dimensionality="eight"`` the shears are
    fixed (default: the tabulated optimum for ``n``) and only the momenta
    are optimised; for ``"two"`` the shear ``X`` runs over ``X_values``
    (default -1..1 in steps of 0.05) and ``P_Y`` is refined continuously.
    """
    _check_order(n)
    if dimensionality not in ("two", "eight"):
        raise ConfigurationError(f"dimensionality must be 'two' or 'eight', got {dimensionality!r}")
    if source == "analytic":
        if dimensionality == "two":
            best = None
            for x0 in _coarse_two(n, m, coarse_step or 0.05, 1.0, starts):
                x, val, conv = _nelder_mead(
                    lambda u: -abs(bell_value(n, two_param_settings(*u).as_vector(), m)), x0, max_iter, 1e-9)
                if best is None or val > best[1]:
                    best = (x, val, conv)
            settings = two_param_settings(*best[0])
        else:
            steps = coarse_step or (0.25, 0.2)
            seeds = [x0 for step in np.atleast_1d(steps) for x0 in _coarse_eight(n, m, float(step), 1.0, starts)]
            best = None
            for x0 in seeds:
                x, val, conv = _refine_eight(n, m, x0, max_iter)
                if best is None or val > best[1]:
                    best = (x, val, conv)
            settings = BellSettings.from_vector(best[0])
        b = float(bell_value(n, settings, m))
        return BellResult(b, settings, abs(b), settings, order_n=n, converged=best[2])
    if source != "reconstructed":
        raise ConfigurationError(f"unknown source {source!r}")

    beam = BeamSpec(waist, DEFAULT_WAVELENGTH_UM, n, m)
    field_ = lg_field(beam, default_grid(beam, n_pixels, extent_waists))
    cache = {}

    def slice_at(shear: ShearSetting):
        key = (round(shear.X_shear, 12), round(shear.Y_shear, 12))
        if key not in cache:
            cache[key] = simulate_slice(beam, shear, noise=_shear_noise(noise, len(cache)),
                                        calibration=calibration, field=field_)
        return cache[key]

    if dimensionality == "eight":
        X1, X2, Y1, Y2 = shears if shears is not None else TABLE1[n][1]
        slices = [slice_at(ShearSetting(X1, Y1)), slice_at(ShearSetting(X1, Y2)),
                  slice_at(ShearSetting(X2, Y1)), slice_at(ShearSetting(X2, Y2))]
        b, (px1, px2, py1, py2), conv = maximize_over_momenta(slices, max_iter=max_iter)
        settings = BellSettings((X1, px1), (Y1, py1), (X2, px2), (Y2, py2))
        return BellResult(b, settings, abs(b), settings, order_n=n, converged=conv)

    xs = np.round(np.arange(-1.0, 1.0 + 1e-9, 0.05), 10) if X_values is None else np.asarray(X_values)
    slice_at(ShearSetting(0.0, 0.0))
    p_nodes = cache[(0.0, 0.0)].p_axis
    p_nodes = p_nodes[np.abs(p_nodes) <= 1.0 + 1e-12]
    surf = bell_two_param_surface(n, xs, p_nodes, "reconstructed", slice_at)
    i, j = np.unravel_index(np.argmax(surf), surf.shape)
    X = float(xs[i])
    lo, hi = p_nodes[max(j - 1, 0)], p_nodes[min(j + 1, p_nodes.size - 1)]
    res = minimize_scalar(lambda p: -float(bell_two_param_surface(n, [X], [p], "reconstructed", slice_at)[0, 0]),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-7})
    P_Y = float(res.x) if -res.fun >= surf[i, j] else float(p_nodes[j])
    settings = two_param_settings(X, P_Y)
    origin, s = slice_at(ShearSetting(0.0, 0.0)), slice_at(ShearSetting(X, 0.0))
    b = float(bell_from_slices([origin, origin, s, s], (0.0, 0.0, 0.0, P_Y)))
    return BellResult(b, settings, abs(b), settings, order_n=n)


def _shear_noise(noise: Optional[NoiseModel], index: int) -> Optional[NoiseModel]:
    """Independent, reproducible noise stream for the ``index``-th shear of a run."""
    if noise is None:
        return None
    seed = int(np.random.SeedSequence([noise.seed, index]).generate_state(1)[0])
    return NoiseModel(noise.gaussian_sigma, seed, noise.pedestal)


def _one_repetition(args):
    n, noise, kwargs = args
    return maximize_bell(n, "eight", "reconstructed", noise=noise, **kwargs)


def bell_vs_order(orders=SUPPORTED_ORDERS, repetitions: int = 1, noise: NoiseModel = NoiseModel(),
                  jobs: int = 1, **kwargs):
    """Repeat the simulated eight-variable measurement for each order.

    Repetition ``r`` uses noise seed ``noise.seed + r``.  Each returned
    :class:`BellResult` holds the per-repetition ``|B_max|`` values, their
    mean and sample standard deviation, and the argmax of the first run.
    """
    if repetitions < 1:
        raise ConfigurationError(f"repetitions must be >= 1, got {repetitions}")
    for n in orders:
        _check_order(n)
    tasks = [(n, NoiseModel(noise.gaussian_sigma, noise.seed + r, noise.pedestal), kwargs)
             for n in orders for r in range(repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_one_repetition, tasks))
    else:
        runs = [_one_repetition(t) for t in tasks]
    results = []
    for k, n in enumerate(orders):
        batch = runs[k * repetitions:(k + 1) * repetitions]
        values = [r.b_max for r in batch]
        first = batch[0]
        results.append(BellResult(first.b_value, first.settings, first.b_max, first.argmax,
                                  repetitions=values, mean=float(np.mean(values)),
                                  std_dev=float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
                                  order_n=n, converged=all(r.converged for r in batch)))
    return results


def neighborhood_check(n: int, argmax: BellSettings, radius: float, n_directions: int = 16,
                       seed: int = 0, m: int = 0) -> bool:
    """True when no probed setting at distance ``radius`` beats ``argmax``.

    Directions are uniform on the 8-sphere (at least six are drawn).
    """
    center = argmax.as_vector()
    ref = abs(bell_value(n, center, m))
    if radius == 0:
        return True
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((max(n_directions, 6), 8))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    probes = center[None, :] + radius * dirs
    values = np.abs(bell_value(n, probes.T, m))
    return bool(np.all(values <= ref + 1e-12))


def gaussian_grid_bound(step: float = 0.05, limit: float = 1.0) -> float:
    """Exact ``max |B|`` for ``n = 0`` over the full 8-D grid ``[-limit, limit]``.

    ``Pi_00`` factorises as ``f(a) f(b)`` with ``f = exp(-X**2 - P**2)``, so
    for each ``(b, b')`` pair the optimal ``a`` and ``a'`` are the extreme
    values of ``f`` on the grid.
    """
    g = np.arange(-limit, limit + step / 2, step)
    f = np.unique(np.exp(-(g[:, None] ** 2 + g[None, :] ** 2)).ravel())
    fmin, fmax = f[0], f[-1]
    s = f[:, None] + f[None, :]
    d = f[:, None] - f[None, :]
    hi = fmax * s + np.where(d >= 0, fmax * d, fmin * d)
    lo = fmin * s + np.where(d >= 0, fmin * d, fmax * d)
    return float(max(hi.max(), -lo.min()))
