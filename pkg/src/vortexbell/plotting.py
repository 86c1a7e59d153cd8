"""Figure rendering for the command-line reports (PNG files only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "savefig.dpi": 150,
    "figure.figsize": (4.0, 3.2),
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _heatmap(values, extent, path, xlabel, ylabel, title, cbar_label, cmap="RdBu_r", symmetric=True):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        vmax = float(np.max(np.abs(values))) or 1.0
        kw = {"vmin": -vmax, "vmax": vmax} if symmetric else {}
        im = ax.imshow(values, origin="lower", extent=extent, cmap=cmap, aspect="equal", **kw)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        fig.colorbar(im, ax=ax, label=cbar_label)
        return _save(fig, path)


def plot_wigner_slice(slice_, path, title=None) -> Path:
    p = slice_.p_axis
    ext = (p[0], p[-1], p[0], p[-1])
    title = title or f"W at X = {slice_.X_fixed:.2f}, Y = {slice_.Y_fixed:.2f}"
    return _heatmap(slice_.values, ext, path, r"$P_X$", r"$P_Y$", title, "W")


def plot_tpcf(tpcf, path, waist_w, title=None) -> Path:
    """``|Phi|`` over the centre coordinates, axes in units of the waist."""
    n = tpcf.values.shape[0]
    half = n // 2 * tpcf.spacing / waist_w
    ext = (-half, half - tpcf.spacing / waist_w, -half, half - tpcf.spacing / waist_w)
    title = title or f"|TPCF| at X = {tpcf.shear.X_shear:.2f}, Y = {tpcf.shear.Y_shear:.2f}"
    return _heatmap(np.abs(tpcf.values), ext, path, r"$\epsilon_x / w$", r"$\epsilon_y / w$", title,
                    r"$|\Phi|$", cmap="viridis", symmetric=False)


def plot_bell_surface(X_grid, P_Y_grid, surface, path, title="|B|") -> Path:
    """``surface[i, j]`` at ``X_grid[i]``, ``P_Y_grid[j]``; the |B| = 2 contour is drawn."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ext = (P_Y_grid[0], P_Y_grid[-1], X_grid[0], X_grid[-1])
        im = ax.imshow(surface, origin="lower", extent=ext, cmap="viridis", aspect="auto")
        if np.nanmax(surface) > 2 > np.nanmin(surface):
            ax.contour(P_Y_grid, X_grid, surface, levels=[2.0], colors="w", linewidths=0.8)
        i, j = np.unravel_index(np.nanargmax(surface), surface.shape)
        ax.plot(P_Y_grid[j], X_grid[i], "r+", ms=8)
        ax.set_xlabel(r"$P_Y$")
        ax.set_ylabel(r"$X$")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, label="|B|")
        return _save(fig, path)


def plot_bell_vs_order(results, path, reference=None) -> Path:
    """``|B_max|`` with standard-deviation error bars against vortex order."""
    orders = [r.order_n for r in results]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(orders, [r.mean for r in results], yerr=[r.std_dev for r in results],
                    fmt="o-", capsize=3, label="simulated" if reference else None)
        if reference:
            ax.plot(orders, [reference[n][0] for n in orders], "s--", mfc="none", label="tabulated")
            ax.legend()
        ax.axhline(2.0, color="k", lw=0.8, ls=":")
        ax.set_xticks(orders)
        ax.set_xlabel("vortex order n")
        ax.set_ylabel(r"$|B_{max}|$")
        return _save(fig, path)


def plot_calibration(curve, slope, intercept, path) -> Path:
    t = np.array([c[0] for c in curve])
    x = np.array([c[1] for c in curve])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, x, "o", label="Snell's law")
        ax.plot(t, slope * t + intercept, "r-", label="linear fit")
        ax.set_xlabel("scale reading t (cm)")
        ax.set_ylabel("dimensionless shear")
        ax.legend()
        return _save(fig, path)
