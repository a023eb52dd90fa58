"""SVG figures for run directories (matplotlib, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed ids and no timestamp keep the SVG bytes reproducible.
plt.rcParams.update({
    "svg.hashsalt": "heatrecon",
    "svg.fonttype": "none",
    "figure.dpi": 100,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
})


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_training(state, path):
    """Loss and relative error against epoch, plus dim(theta) when it varies."""
    epoch = state.column("epoch")
    dims = state.column("dim_theta")
    varying = dims.min() != dims.max()
    fig, axes = plt.subplots(1, 3 if varying else 2, figsize=(10 if varying else 7, 3))
    axes[0].semilogy(epoch, state.column("loss"), color="tab:blue")
    axes[0].set(xlabel="epoch", ylabel="loss")
    axes[1].semilogy(epoch, state.column("relative_error"), color="tab:red")
    axes[1].set(xlabel="epoch", ylabel="relative error")
    if varying:
        axes[2].step(epoch, dims, where="post", color="k")
        axes[2].set(xlabel="epoch", ylabel="dim theta")
    _save(fig, path)


def plot_conductivity_1d(truth, recon, path, initial=None):
    J = truth.size
    x = np.arange(J) / J
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(x, truth, "o-", ms=3, color="tab:blue", label="truth")
    ax.plot(x, recon, "s-", ms=3, color="tab:red", label="reconstruction")
    if initial is not None:
        ax.plot(x, initial, ":", color="gray", label="initial guess")
    ax.set(xlabel="x", ylabel="a(x)")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_conductivity_2d(truth, recon, path):
    lo = min(truth.min(), recon.min())
    hi = max(truth.max(), recon.max())
    fig, axes = plt.subplots(1, 2, figsize=(7, 3.2))
    for ax, img, title in zip(axes, (truth, recon), ("truth", "reconstruction")):
        im = ax.imshow(img.T, origin="lower", extent=(0, 1, 0, 1), vmin=lo, vmax=hi, cmap="viridis")
        ax.set(title=title, xlabel="x", ylabel="y")
        ax.grid(False)
    fig.colorbar(im, ax=axes, shrink=0.8)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_measurements(meas, path):
    fig, ax = plt.subplots(figsize=(5, 3))
    for sid in meas.sensors:
        sel = meas.sensor_id == sid
        ax.plot(meas.t[sel], meas.temperature[sel], lw=1, label=f"sensor {sid}")
    ax.set(xlabel="t", ylabel="temperature")
    if meas.sensors.size <= 4:
        ax.legend(frameon=False)
    _save(fig, path)


def plot_snapshots(traj, grid, times, path):
    """Temperature snapshots at the requested times (nearest stored time)."""
    fig, axes = plt.subplots(1, len(times), figsize=(3.2 * len(times), 3), squeeze=False)
    axes = axes[0]
    for ax, t in zip(axes, times):
        k = int(np.argmin(np.abs(traj.times - t)))
        u = traj.states[k]
        if grid.ndim == 1:
            ax.plot(grid.coords(), u, color="tab:blue")
            ax.set(xlabel="x", ylabel="u")
        else:
            ax.imshow(u.reshape(grid.shape).T, origin="lower", extent=(0, 1, 0, 1), cmap="coolwarm")
            ax.set(xlabel="x", ylabel="y")
            ax.grid(False)
        ax.set_title(f"t = {traj.times[k]:g}")
    _save(fig, path)


def plot_frontier(frontier, path):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    configs = list(dict.fromkeys(r["config"] for r in frontier.rows))
    for c in configs:
        rows = [r for r in frontier.rows if r["config"] == c and r["epoch"] is not None]
        ax.loglog([r["loss_level"] for r in rows], [r["rel_err"] for r in rows], "o-", label=c)
    ax.invert_xaxis()
    ax.set(xlabel="loss level", ylabel="relative error")
    ax.legend(frameon=False)
    _save(fig, path)
