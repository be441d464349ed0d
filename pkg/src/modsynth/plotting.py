"""Figures for the CLI report: GA history and joint torque profiles."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "modsynth",  # stable element ids across runs
}


def _save(fig, path):
    # drop the timestamp so identical data gives identical files
    meta = {"Date": None} if str(path).endswith((".svg", ".pdf")) else None
    fig.savefig(path, bbox_inches="tight", metadata=meta)
    plt.close(fig)


def plot_history(history, path):
    """Best and mean penalized fitness per generation (log scale)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        gen = [h.generation for h in history]
        ax.semilogy(gen, [max(h.best, 1e-12) for h in history], label="best")
        ax.semilogy(gen, [max(h.mean, 1e-12) for h in history], "--", label="population mean")
        ax.set_xlabel("generation")
        ax.set_ylabel("penalized fitness")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_torque_profile(times, torques, limits, path, names=None):
    """Joint torques along a timed path with the +-limit bands."""
    torques = np.atleast_2d(torques)
    n = torques.shape[1]
    names = names or [f"joint {k + 1}" for k in range(n)]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(n, 1, figsize=(5.0, 1.4 * n + 0.6), sharex=True, squeeze=False)
        for k, ax in enumerate(axes[:, 0]):
            ax.plot(times, torques[:, k], lw=1.2)
            for sign in (1, -1):
                ax.axhline(sign * limits[k], color="0.4", ls=":", lw=0.8)
            ax.set_ylabel(f"{names[k]}\n[N m]")
        axes[-1, 0].set_xlabel("time [s]")
        _save(fig, path)


def plot_tsl_torques(torques, limits, path):
    """Static torque per joint at each TSL as grouped bars."""
    torques = np.abs(np.atleast_2d(torques))
    m, n = torques.shape
    width = 0.8 / n
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        x = np.arange(m)
        for k in range(n):
            ax.bar(x + (k - (n - 1) / 2) * width, torques[:, k], width, label=f"joint {k + 1}")
        ax.set_xticks(x, [f"TSL {i + 1}" for i in range(m)])
        ax.set_ylabel("|static torque| [N m]")
        ax.set_title(f"limits: {', '.join(f'{l:g}' for l in limits)} N m", fontsize=8)
        ax.legend(frameon=False, fontsize=7, ncol=min(n, 3))
        _save(fig, path)
