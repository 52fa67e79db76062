"""SVG figures of simulated runs.  Presentation only; nothing here feeds back."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .simulation import Trajectories, energy_curves, tracking_error  # noqa: E402

__all__ = ["plot_block_states", "plot_tracking_error", "plot_energy"]

# fixed metadata keeps SVG output byte-identical across runs
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path) -> Path:
    path = Path(path)
    plt.rcParams["svg.hashsalt"] = "hinftrack"
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_block_states(traj: Trajectories, outdir, stem: str = "states") -> list[Path]:
    """One figure per leader block: theta_s against every follower's s-th block."""
    outdir = Path(outdir)
    k = np.arange(traj.horizon + 1)
    m0 = traj.m0
    paths = []
    for s in range(traj.n):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        sl = slice(s * m0, (s + 1) * m0)
        ax.plot(k, traj.theta[:, sl], "k-", lw=2, label=f"leader block {s + 1}")
        for j in range(traj.zeta.shape[1]):
            name = "x" if s == traj.n - 1 else f"z^{s + 1}"
            ax.plot(k, traj.zeta[:, j, sl], lw=1, label=f"{name} of agent {j + 2}")
        ax.set_xlabel("k")
        ax.legend(fontsize="small")
        paths.append(_save(fig, outdir / f"{stem}_block{s + 1}.svg"))
    return paths


def plot_tracking_error(traj: Trajectories, path) -> Path:
    E = tracking_error(traj)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(np.arange(len(E)), np.maximum(E, 1e-300))
    ax.set_xlabel("k")
    ax.set_ylabel("E(k)")
    return _save(fig, path)


def plot_energy(traj: Trajectories, gamma: float, path) -> Path:
    ee, ww = energy_curves(traj, gamma)
    k = np.arange(len(ee))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(k, ww, label=r"$\gamma^2 \sum \|w\|^2$")
    ax.plot(k, ee, label=r"$\sum \|e\|^2$")
    ax.set_xlabel("T0")
    ax.legend()
    return _save(fig, path)
