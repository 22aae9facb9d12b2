"""
Collate result CSVs into report.md with pass/fail against the reproduction
thresholds.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from loguru import logger

from src.scene import ObjectKind
from src.trajectory import USER_TYPES, UserType

PASS, FAIL, NOT_RUN = "pass", "FAIL", "not run"

FULL_ACCURACY_AT_NINE = 0.90
ACCURACY_GAIN_ONE_TO_NINE = 0.10
AGGRESSIVE_VALIDITY_MINIMUM = 0.99
REFINEMENT_MINIMUM = {
    UserType.AGGRESSIVE.value: 1.0,
    UserType.NORMAL.value: 0.85,
    UserType.CAREFUL.value: 0.60,
}

RESULT_FILES = [
    "training_log.csv",
    "accuracy_curve.csv",
    "checkpoint_accuracy.csv",
    "refinement.csv",
    "causal_report.csv",
    "causal_user_types.csv",
]


@dataclass
class Criterion:
    name: str
    status: str
    detail: str = ""


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def find_csv(dirs: Sequence[Path], name: str) -> Optional[Path]:
    for directory in dirs:
        matches = sorted(Path(directory).rglob(name))
        if matches:
            return matches[0]
    return None


def _read(dirs: Sequence[Path], name: str) -> Optional[pd.DataFrame]:
    path = find_csv(dirs, name)
    return None if path is None else pd.read_csv(path)


def _curve_mean(
    curve: pd.DataFrame, user_type: str, variant: str, k: int
) -> Optional[float]:
    rows = curve[
        (curve["user_type"] == user_type) & (curve["variant"] == variant) & (curve["k"] == k)
    ]
    return None if rows.empty else float(rows["mean"].iloc[0])


def accuracy_criteria(curve: Optional[pd.DataFrame]) -> List[Criterion]:
    names = [
        f"full model accuracy at k=9 >= {FULL_ACCURACY_AT_NINE}",
        f"full model gains >= {ACCURACY_GAIN_ONE_TO_NINE} from k=1 to k=9",
        "full model >= classifier ablation for k <= 3",
        "IRL baseline below full model at k=1",
    ]
    at_nine, gain_name, ablation, irl_name = names
    if curve is None:
        return [Criterion(name, NOT_RUN) for name in names]

    checks = {name: [] for name in names}
    for user_type in sorted(curve["user_type"].unique()):
        full_9 = _curve_mean(curve, user_type, "full", 9)
        full_1 = _curve_mean(curve, user_type, "full", 1)
        if full_9 is not None:
            ok = full_9 >= FULL_ACCURACY_AT_NINE
            checks[at_nine].append((ok, f"{user_type} {full_9:.3f}"))
        if full_9 is not None and full_1 is not None:
            gain = full_9 - full_1
            ok = gain >= ACCURACY_GAIN_ONE_TO_NINE
            checks[gain_name].append((ok, f"{user_type} +{gain:.3f}"))
        for k in (1, 2, 3):
            full = _curve_mean(curve, user_type, "full", k)
            cls = _curve_mean(curve, user_type, "classifier", k)
            if full is not None and cls is not None:
                detail = f"{user_type} k={k} {full:.3f} vs {cls:.3f}"
                checks[ablation].append((full >= cls, detail))
        irl = _curve_mean(curve, user_type, "irl", 1)
        if irl is not None and full_1 is not None:
            checks[irl_name].append((irl < full_1, f"{user_type} {irl:.3f} vs {full_1:.3f}"))

    criteria = []
    for name in names:
        if not checks[name]:
            criteria.append(Criterion(name, NOT_RUN))
            continue
        ok = all(passed for passed, _ in checks[name])
        detail = "; ".join(d for _, d in checks[name])
        criteria.append(Criterion(name, _verdict(ok), detail))
    return criteria


def refinement_criteria(frame: Optional[pd.DataFrame]) -> List[Criterion]:
    criteria = []
    for user_type, minimum in REFINEMENT_MINIMUM.items():
        name = f"{user_type} refinement success >= {minimum:.0%}"
        rows = None if frame is None else frame[frame["user_type"] == user_type]
        if rows is None or rows.empty:
            criteria.append(Criterion(name, NOT_RUN))
            continue
        rate = float(rows["success_rate"].iloc[0])
        criteria.append(Criterion(name, _verdict(rate >= minimum), f"{rate:.3f}"))
    return criteria


def causal_criteria(
    frame: Optional[pd.DataFrame], swaps: Optional[pd.DataFrame] = None
) -> List[Criterion]:
    """
    Criteria on causal_report.csv (object interventions) and
    causal_user_types.csv (do(S) swaps).
    """
    direction = "symbol interventions: careful all negative, normal glass only, aggressive none"
    aggressive = f"aggressive mean validity >= {AGGRESSIVE_VALIDITY_MINIMUM} everywhere"
    ordering = "validity increases careful < normal < aggressive, careful/aggressive CIs disjoint"

    results = []
    symbols = None
    if frame is not None:
        kinds = {k.value for k in ObjectKind}
        symbols = frame[frame["intervention"].isin(kinds)]
    if symbols is None or symbols.empty:
        results.append(Criterion(direction, NOT_RUN))
    else:
        problems = []
        for row in symbols.itertuples():
            glass = row.intervention == ObjectKind.GLASS.value
            expected = row.user_type == UserType.CAREFUL.value or (
                row.user_type == UserType.NORMAL.value and glass
            )
            significant = str(row.significant).lower() == "true"
            if significant != expected or (expected and row.delta_vs_baseline >= 0):
                problems.append(f"{row.user_type}+{row.intervention}")
        results.append(Criterion(direction, _verdict(not problems), ", ".join(problems)))

    rows = None if frame is None else frame[frame["user_type"] == UserType.AGGRESSIVE.value]
    if rows is None or rows.empty:
        results.append(Criterion(aggressive, NOT_RUN))
    else:
        low = rows.loc[rows["mean"].idxmin()]
        results.append(
            Criterion(
                aggressive,
                _verdict(float(low["mean"]) >= AGGRESSIVE_VALIDITY_MINIMUM),
                f"lowest {float(low['mean']):.3f} ({low['intervention']})",
            )
        )

    swaps = None if swaps is None else swaps.set_index("user_type")
    present = [] if swaps is None else [t.value for t in USER_TYPES if t.value in swaps.index]
    if len(present) < len(USER_TYPES):
        results.append(Criterion(ordering, NOT_RUN))
    else:
        means = [float(swaps.loc[t, "mean"]) for t in present]
        increasing = all(a < b for a, b in zip(means, means[1:]))
        disjoint = swaps.loc["careful", "ci_high"] < swaps.loc["aggressive", "ci_low"]
        results.append(
            Criterion(
                ordering,
                _verdict(increasing and disjoint),
                " < ".join(f"{m:.3f}" for m in means),
            )
        )
    return results


def _markdown_table(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "---|" * len(frame.columns)
    body = ["| " + " | ".join(str(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *body]) + "\n"


def cmd_report(dirs: Sequence[Path], out_dir: Path) -> List[Criterion]:
    """Write report.md; inputs that are missing show up as "not run"."""
    dirs = [Path(d) for d in dirs]
    criteria = (
        accuracy_criteria(_read(dirs, "accuracy_curve.csv"))
        + refinement_criteria(_read(dirs, "refinement.csv"))
        + causal_criteria(
            _read(dirs, "causal_report.csv"), _read(dirs, "causal_user_types.csv")
        )
    )

    lines = ["# Reproduction report", "", "| criterion | result | detail |", "|---|---|---|"]
    lines += [f"| {c.name} | {c.status} | {c.detail} |" for c in criteria]
    lines.append("")
    for name in RESULT_FILES:
        lines.append(f"## {name}")
        lines.append("")
        frame = _read(dirs, name)
        if frame is None:
            lines.append(NOT_RUN)
        elif name == "training_log.csv":
            last = frame.sort_values("epoch").groupby(["user_type", "ablation", "seed"]).tail(1)
            lines.append(_markdown_table(last.sort_values(["user_type", "ablation", "seed"])))
        else:
            lines.append(_markdown_table(frame))
        lines.append("")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.md").write_text("\n".join(lines))
    failed = sum(c.status == FAIL for c in criteria)
    logger.info(f"Report written to {out_dir / 'report.md'} ({failed} failing criteria)")
    return criteria
