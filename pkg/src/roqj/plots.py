"""Matplotlib figure rendering for simulation and check reports.

All functions write PNG files; the Agg backend is forced so rendering works
headless.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .trajectory import Ensemble, bloch_vector, states_at


def plot_sample_trajectories(ensemble: Ensemble, path) -> None:
    """Bloch x and z components of the recorded sample trajectories."""
    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for traj in ensemble.sample_trajectories:
        xyz = np.array([bloch_vector(s) for s in traj.states])
        axes[0].plot(traj.times, xyz[:, 0], lw=0.8)
        axes[1].plot(traj.times, xyz[:, 2], lw=0.8)
    axes[0].set_ylabel("x")
    axes[1].set_ylabel("z")
    axes[1].set_xlabel("t")
    axes[0].set_title(f"sample trajectories ({ensemble.label})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_final_states(ensemble: Ensemble, path) -> None:
    """Scatter of the ensemble's final states in the Bloch x-z plane."""
    t = float(ensemble.t_grid[-1])
    xyz = np.array([bloch_vector(s) for s in states_at(ensemble, t)])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(xyz[:, 0], xyz[:, 2], s=4, alpha=0.25)
    ax.add_patch(plt.Circle((0, 0), 1.0, fill=False, color="gray", lw=0.8))
    ax.set_xlim(-1.1, 1.1)
    ax.set_ylim(-1.1, 1.1)
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(f"final states at t={t:g} ({ensemble.label})")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_mean_coherence(ensemble: Ensemble, path, reference: np.ndarray | None = None) -> None:
    """Ensemble-mean Re rho_01 with a 3-standard-error band, optionally
    against a reference solution."""
    t = ensemble.t_grid
    m = ensemble.mean_rho[:, 0, 1].real
    se = ensemble.se_re[:, 0, 1]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.fill_between(t, m - 3 * se, m + 3 * se, alpha=0.3, label="mean ± 3 SE")
    ax.plot(t, m, lw=1.0, label="ensemble mean")
    if reference is not None:
        ax.plot(t, np.asarray(reference)[:, 0, 1].real, "k--", lw=1.0, label="reference")
    ax.set_xlabel("t")
    ax.set_ylabel(r"Re $\rho_{01}$")
    ax.legend()
    ax.set_title(f"mean coherence ({ensemble.label})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_check_report(report, path) -> None:
    """Witness magnitudes of a divisibility/positivity check along its grid."""
    fig, ax = plt.subplots(figsize=(7, 4))
    grid = report.t_grid if report.t_grid is not None else []
    wt = [w["t"] for w in report.witnesses]
    wm = [w["magnitude"] for w in report.witnesses]
    if len(grid):
        ax.plot(grid, np.zeros(len(grid)), "k-", lw=0.6)
    if wt:
        ax.stem(wt, wm)
    ax.set_xlabel("t")
    ax.set_ylabel("violation magnitude")
    ax.set_title(f"{report.property_name}: {report.verdict}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_comparison(ensembles: dict[str, Ensemble], path,
                    reference: np.ndarray | None = None) -> None:
    """Mean coherence of several unravelings on one axis."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, ens in ensembles.items():
        ax.plot(ens.t_grid, ens.mean_rho[:, 0, 1].real, lw=1.0, label=name)
    if reference is not None and ensembles:
        t = next(iter(ensembles.values())).t_grid
        ax.plot(t, np.asarray(reference)[:, 0, 1].real, "k--", lw=1.0, label="reference")
    ax.set_xlabel("t")
    ax.set_ylabel(r"Re $\rho_{01}$")
    ax.legend()
    ax.set_title("unraveling comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
