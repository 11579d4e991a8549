"""Figure rendering for the experiment runner.

Every report CSV gets a PNG companion so runs are inspectable without
external tooling.  Uses the Agg backend; nothing here opens a window.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def plot_timeseries(path, times, series: dict, controlled: dict | None = None):
    """2x2 panel of the four observables; optionally overlays a second run."""
    labels = {
        "int_u_sq": r"$\int_\Omega u^2\,dx$",
        "max_u": r"max $u$",
        "oxy_mismatch": r"$\int_\Omega(\sigma-\sigma_Q)^2\,dx$",
        "volume": r"$\int_\Omega u\,dx$",
    }
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5))
    for ax, key in zip(axes.ravel(), labels):
        ax.plot(times, series[key], "b--", lw=1.4, label="uncontrolled")
        if controlled is not None:
            ax.plot(times, controlled[key], "g-", lw=1.4, label="controlled")
        ax.set_xlabel("time")
        ax.set_ylabel(labels[key])
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    _save(fig, path)


def plot_controls(path, t_steps, c_init, c_opt, s_init, s_opt):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    for ax, name, init, opt in ((axes[0], "c", c_init, c_opt),
                                (axes[1], "s", s_init, s_opt)):
        ax.step(t_steps, init, where="post", color="gray", lw=1.2,
                label=f"initial {name}")
        ax.step(t_steps, opt, where="post", color="tab:blue", lw=1.6,
                label=f"optimal {name}")
        ax.set_xlabel("time")
        ax.set_ylabel(name)
        ax.set_ylim(-0.05, 1.05)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    _save(fig, path)


def plot_history(path, iterations, costs):
    """Cost per iteration, segments colored by decrease/increase/stable."""
    fig, ax = plt.subplots(figsize=(7, 4))
    costs = np.asarray(costs)
    for i in range(1, len(costs)):
        d = costs[i] - costs[i - 1]
        color = "green" if d < -1e-12 else ("red" if d > 1e-12 else "gold")
        ax.plot(iterations[i - 1:i + 1], costs[i - 1:i + 1], color=color,
                lw=1.6)
    ax.plot(iterations, costs, "k.", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("cost J")
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_perturbation(path, perts_c, costs_c, perts_s, costs_s):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    for ax, perts, costs, name in ((axes[0], perts_c, costs_c, "c"),
                                   (axes[1], perts_s, costs_s, "s")):
        order = np.argsort(perts)
        ax.plot(np.asarray(perts)[order], np.asarray(costs)[order], "o-",
                color="teal", ms=4, lw=1.2)
        ax.axvline(0.0, color="gray", lw=0.8, ls=":")
        ax.set_xlabel("perturbation")
        ax.set_ylabel(f"J({name} + pert)")
        ax.grid(alpha=0.3)
    _save(fig, path)


def plot_convergence(path, h_or_dt, errors, slope_label, xlabel):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.loglog(h_or_dt, errors, "o-", color="tab:blue")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(r"$L^2$ error")
    ax.set_title(slope_label)
    ax.grid(alpha=0.3, which="both")
    _save(fig, path)
