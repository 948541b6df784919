"""Figure rendering for the report paths.

Every figure goes to a file next to the delimited output; nothing is ever
shown interactively.  The Agg backend is forced so rendering works on
headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .scalar_approx import TargetFunction, cheb_coefficients, cheb_eval

__all__ = ["render_gibbs_figure", "render_history_figure"]

_RC = {
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
}


def render_gibbs_figure(target: TargetFunction, orders, dampings, out_path,
                        lanczos_m: int = 1, quad_nodes=None) -> None:
    """Overlay the target with its damped partial sums on [-1, 1]."""
    xs = np.linspace(-1.0, 1.0, 2001)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        fvals = np.asarray(target.evaluator(xs), dtype=np.float64)
        fvals = np.clip(fvals, -10.0, 10.0)
        for jump in target.discontinuities:
            fvals[np.abs(xs - jump) < 2e-3] = np.nan  # break the line at jumps
        ax.plot(xs, fvals, "k--", lw=1.2, label=target.name or "target")
        lo, hi = np.inf, -np.inf
        for K in orders:
            nq = quad_nodes if quad_nodes is not None else max(2048, 16 * (K + 1))
            mu = cheb_coefficients(target, K, quad_nodes=nq)
            for damping in dampings:
                p = cheb_eval(mu, damping, xs, lanczos_m)
                ax.plot(xs, p, lw=1.0, label=f"K={K}, {damping}")
                lo, hi = min(lo, p.min()), max(hi, p.max())
        ax.set_xlabel("x")
        ax.set_ylabel("value")
        ax.set_ylim(lo - 0.3, hi + 0.3)
        ax.legend(loc="best")
        ax.set_title(f"partial sums of {target.name or 'target'}")
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)


def render_history_figure(histories: dict, out_path) -> None:
    """Training and validation curves, one line per seed."""
    with plt.rc_context(_RC):
        fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.6))
        for label, history in histories.items():
            epochs = [rec["epoch"] for rec in history]
            ax_loss.plot(epochs, [rec["train_loss"] for rec in history],
                         lw=0.8, alpha=0.6)
            ax_loss.plot(epochs, [rec["val_loss"] for rec in history],
                         lw=1.0, label=f"{label} val")
            ax_acc.plot(epochs, [rec["val_acc"] for rec in history],
                        lw=1.0, label=f"{label}")
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("loss")
        ax_loss.legend(loc="best")
        ax_acc.set_xlabel("epoch")
        ax_acc.set_ylabel("validation accuracy")
        fig.tight_layout()
        fig.savefig(out_path)
        plt.close(fig)
