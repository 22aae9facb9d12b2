"""
SVG charts: the accuracy-versus-demonstrations curve and refinement traces.

Figures are written with a fixed hash salt and no date so that reruns are
byte-identical.
"""

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from src.trajectory import sample_trajectory  # noqa: E402

plt.rcParams["svg.hashsalt"] = "spec-causal"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_accuracy_curve(frame: pd.DataFrame, path: Path) -> None:
    """
    One panel per user type, one line per model variant with its quartile band.

    Args:
        frame: rows with columns user_type, variant, k, mean, q1, q3
    """
    user_types = sorted(frame["user_type"].unique())
    fig, axes = plt.subplots(
        1, len(user_types), figsize=(5.0 * len(user_types), 4.0), squeeze=False
    )
    for ax, user_type in zip(axes[0], user_types):
        subset = frame[frame["user_type"] == user_type]
        for variant, rows in subset.groupby("variant", sort=True):
            rows = rows.sort_values("k")
            ax.plot(rows["k"], rows["mean"], marker="o", label=variant)
            ax.fill_between(rows["k"], rows["q1"], rows["q3"], alpha=0.2)
        ax.set_title(user_type)
        ax.set_xlabel("trajectories per scene")
        ax.set_ylabel("held-out accuracy")
        ax.set_ylim(0.0, 1.05)
        ax.grid(alpha=0.3)
        ax.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def plot_refinement_trace(
    image: np.ndarray,
    thetas: Sequence[Sequence[float]],
    scores: Sequence[float],
    path: Path,
    title: str = "",
) -> None:
    """Scene with every visited trajectory, dark blue first to light blue last."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.imshow(image, extent=(0.0, 1.0, 0.0, 1.0), origin="upper", interpolation="nearest")
    colors = plt.cm.Blues_r(np.linspace(0.0, 0.75, max(len(thetas), 2)))
    for color, theta in zip(colors, thetas):
        points = sample_trajectory(theta).points
        ax.plot(points[:, 0], points[:, 1], color=color, linewidth=1.5)
    final = thetas[-1]
    ax.plot([final[0]], [final[1]], marker="x", color="black")
    ax.set_xlim(-0.25, 1.25)
    ax.set_ylim(-0.25, 1.25)
    ax.set_aspect("equal")
    ax.set_title(f"{title} score {scores[0]:.2f} -> {scores[-1]:.2f}".strip())
    _save(fig, path)
