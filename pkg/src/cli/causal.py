from pathlib import Path

from loguru import logger

from src.causal import (
    CausalReport,
    causal_table,
    direction_structure_holds,
    render_table,
    report_frame,
    user_type_frame,
    user_type_ordering_holds,
)
from src.cli.dataset import load_scenes
from src.cli.train import load_models
from src.config import Ablation, ExperimentConfig
from src.exceptions import AcceptanceGateFailure
from src.scene import Split


def _user_type_section(report: CausalReport) -> str:
    lines = ["| do(S) | mean | 95% CI | delta vs careful |", "|---|---|---|---|"]
    for cell in report.user_type_cells:
        d = cell.distribution
        lines.append(
            f"| {cell.user_type.value} | {d.mean:.3f} | [{d.ci_low:.3f}, {d.ci_high:.3f}] "
            f"| {cell.delta_vs_baseline:+.3f} |"
        )
    return "\n".join(lines) + "\n"


def cmd_causal(
    config: ExperimentConfig, ckpt_dir: Path, data_dir: Path, out_dir: Path
) -> CausalReport:
    """
    Write causal_report.csv (object interventions), causal_user_types.csv
    (do(S) swaps) and causal_report.md.

    Raises:
        AcceptanceGateFailure: the significance pattern does not match the
            expected reaction of each user type to added objects
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    models = load_models(ckpt_dir, Ablation.FULL, config.seed)
    if not models:
        raise FileNotFoundError(f"No full-model checkpoints for seed {config.seed} in {ckpt_dir}")
    scenes = [scene for _, scene in load_scenes(data_dir, Split.TEST)]

    report = causal_table(models, scenes, config)
    report_frame(report).to_csv(out_dir / "causal_report.csv", index=False)
    user_type_frame(report).to_csv(out_dir / "causal_user_types.csv", index=False)

    holds, problems = direction_structure_holds(report)
    ordered, ordering_problems = user_type_ordering_holds(report)
    sections = [
        "# Intervention analysis\n",
        "## Adding one object\n",
        render_table(report),
        "## Swapping the user type\n",
        _user_type_section(report),
        f"Direction structure: {'holds' if holds else 'violated'}\n",
        *[f"- {p}\n" for p in problems],
        f"User-type ordering: {'holds' if ordered else 'violated'}\n",
        *[f"- {p}\n" for p in ordering_problems],
    ]
    (out_dir / "causal_report.md").write_text("\n".join(sections))

    if not holds:
        raise AcceptanceGateFailure("; ".join(problems))
    logger.info(f"Causal report written to {out_dir}")
    return report
