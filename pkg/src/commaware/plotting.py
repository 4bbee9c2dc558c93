"""Figures rendered next to the CSV artifacts when ``--plots`` is given."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _extent(grid):
    half = grid.resolution / 2
    return (grid.x_min - half, grid.x_max + half, grid.y_min - half, grid.y_max + half)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_channel(grid, path, title="Channel gain (dB)", base_station=None, points=None):
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(grid.values, origin="lower", extent=_extent(grid), cmap="viridis")
    fig.colorbar(im, ax=ax, label="dB")
    if points is not None:
        ax.plot(points[:, 0], points[:, 1], "w.", ms=2)
    if base_station is not None:
        ax.plot(*base_station, "r^", ms=8)
    ax.set(xlabel="x (m)", ylabel="y (m)", title=title)
    _save(fig, path)


def plot_cost_history(records, path):
    J = np.array([r.J for r in records])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(len(J)), J, "b.-")
    ax.set(xlabel="iteration", ylabel="J", title="Cost vs iteration")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_path(cost_grid, paths, path, source=None, destination=None, base_station=None,
              markers=None):
    """Paths over log10 s; ``paths`` maps labels to (n, 2) position arrays."""
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(np.log10(cost_grid.s.values), origin="lower", extent=_extent(cost_grid.s),
                   cmap="viridis_r")
    fig.colorbar(im, ax=ax, label="log10 s")
    for style, (label, xy) in zip(("r-", "b--", "m-", "c-", "y-"), paths.items()):
        ax.plot(xy[:, 0], xy[:, 1], style, lw=1.5, label=label)
    if markers is not None:
        ax.plot(markers[:, 0], markers[:, 1], "ko", mfc="none")
    if source is not None:
        ax.plot(*source, "ws", ms=8)
    if destination is not None:
        ax.plot(*destination, "wD", ms=8)
    if base_station is not None:
        ax.plot(*base_station, "r^", ms=8)
    ax.set(xlabel="x (m)", ylabel="y (m)")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)


def plot_controls(states, controls, path):
    t = controls.times
    fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
    axes[0].plot(t, np.linalg.norm(controls.u, axis=1))
    axes[0].set_ylabel("|u| (m/s²)")
    axes[1].plot(states.times, np.linalg.norm(states.x2, axis=1))
    axes[1].set_ylabel("|v| (m/s)")
    axes[2].plot(t, controls.R)
    axes[2].set(ylabel="R (bits/s/Hz)", xlabel="t (s)")
    _save(fig, path)
