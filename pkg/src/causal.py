"""
Intervention analysis over the structural model
theta -> V <- Z_I <- scene, S -> V.

Interventions either swap the user-type model (do(S := s)) or insert one
object into every scene before encoding (do(Z_I := E(scene + object))).
Every branch of a comparison evaluates the same (scene, theta) draws.
"""

from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field

from src.config import ExperimentConfig
from src.exceptions import PlacementFailure, UntrainedModelError
from src.scene import MAX_OBJECTS, ObjectKind, Scene, augment_scene, render_scene
from src.specmodel import SpecModel, predict_validity_batch
from src.trajectory import USER_TYPES, UserType

DEFAULT_THETAS_PER_SCENE = 200
DEFAULT_RESAMPLES = 1000
EFFECT_THRESHOLD = 0.05
MAX_AUGMENT_RETRIES = 10
_BOOTSTRAP_TAG = 0xB007
_AUGMENT_TAG = 0xA06


class NoIntervention(BaseModel):
    variant: Literal["none"] = "none"

    @property
    def label(self) -> str:
        return "none"


class SetUserType(BaseModel):
    variant: Literal["user_type"] = "user_type"
    target: UserType

    @property
    def label(self) -> str:
        return f"do(S={self.target.value})"


class AddSymbol(BaseModel):
    variant: Literal["symbol"] = "symbol"
    kind: ObjectKind

    @property
    def label(self) -> str:
        return self.kind.value


Intervention = Union[NoIntervention, SetUserType, AddSymbol]


class EntailedDistribution(BaseModel):
    """Binary validity outcomes, ordered scene by scene."""

    samples: List[int] = Field(repr=False, description="0/1 outcomes, thetas_per_scene per scene")
    thetas_per_scene: int = Field(ge=1)
    mean: float = Field(ge=0, le=1)
    ci_low: float = Field(ge=0, le=1, description="Bootstrap 2.5th percentile")
    ci_high: float = Field(ge=0, le=1, description="Bootstrap 97.5th percentile")

    def by_scene(self) -> np.ndarray:
        return np.asarray(self.samples, dtype=np.float64).reshape(-1, self.thetas_per_scene)


class CausalCell(BaseModel):
    user_type: UserType
    intervention: str = Field(description="none, an object kind, or do(S=<type>)")
    distribution: EntailedDistribution
    delta_vs_baseline: float
    diff_ci_low: float
    diff_ci_high: float
    significant: bool


class CausalReport(BaseModel):
    symbol_cells: List[CausalCell] = Field(
        description="Per user type: baseline then one cell per kind"
    )
    user_type_cells: List[CausalCell] = Field(
        default_factory=list, description="do(S=s) for every s, relative to the careful model"
    )

    def cell(self, user_type: UserType, intervention: str) -> CausalCell:
        for cell in self.symbol_cells + self.user_type_cells:
            if cell.user_type == UserType(user_type) and cell.intervention == intervention:
                return cell
        raise KeyError(f"No cell for ({user_type}, {intervention})")


def theta_draws(seed: int, scene_index: int, count: int) -> np.ndarray:
    """The control points shared by every branch for one scene."""
    return np.random.default_rng([seed, scene_index]).uniform(0.0, 1.0, size=(count, 2))


def _bootstrap_indices(seed: int, n_scenes: int, resamples: int) -> np.ndarray:
    rng = np.random.default_rng([seed, _BOOTSTRAP_TAG])
    return rng.integers(0, n_scenes, size=(resamples, n_scenes))


def _percentile_ci(values: np.ndarray) -> Tuple[float, float]:
    low, high = np.percentile(values, [2.5, 97.5])
    return float(low), float(high)


def distribution_from_outcomes(
    outcomes: np.ndarray, seed: int, resamples: int = DEFAULT_RESAMPLES
) -> EntailedDistribution:
    """
    Summarise a (scenes, thetas) outcome matrix with a scene-level bootstrap.

    The interval is widened to contain the mean when the percentiles miss it.
    """
    outcomes = np.asarray(outcomes, dtype=np.float64)
    scene_means = outcomes.mean(axis=1)
    mean = float(outcomes.mean())
    idx = _bootstrap_indices(seed, len(scene_means), resamples)
    low, high = _percentile_ci(scene_means[idx].mean(axis=1))
    return EntailedDistribution(
        samples=outcomes.astype(int).ravel().tolist(),
        thetas_per_scene=outcomes.shape[1],
        mean=mean,
        ci_low=min(low, mean),
        ci_high=max(high, mean),
    )


def _outcomes(
    model: SpecModel, images: Sequence[np.ndarray], thetas_per_scene: int, seed: int
) -> np.ndarray:
    if not model.is_trained:
        raise UntrainedModelError(f"The {model.user_type.value} model is untrained")
    rows = [
        predict_validity_batch(model, image, theta_draws(seed, i, thetas_per_scene)) >= 0.5
        for i, image in enumerate(images)
    ]
    return np.stack(rows)


def _render_all(scenes: Sequence[Scene], size: int) -> List[np.ndarray]:
    if not scenes:
        raise ValueError("At least one scene is required")
    return [render_scene(scene, size) for scene in scenes]


def entailed_validity(
    model: SpecModel,
    scenes: Sequence[Scene],
    thetas_per_scene: int = DEFAULT_THETAS_PER_SCENE,
    seed: int = 0,
    resamples: int = DEFAULT_RESAMPLES,
) -> EntailedDistribution:
    """Share of uniformly drawn control points the model calls valid."""
    images = _render_all(scenes, model.image_size)
    outcomes = _outcomes(model, images, thetas_per_scene, seed)
    return distribution_from_outcomes(outcomes, seed, resamples)


def intervene_user_type(
    models: Mapping[UserType, SpecModel],
    scenes: Sequence[Scene],
    source: UserType,
    target: UserType,
    thetas_per_scene: int = DEFAULT_THETAS_PER_SCENE,
    seed: int = 0,
    resamples: int = DEFAULT_RESAMPLES,
) -> Tuple[EntailedDistribution, EntailedDistribution]:
    """Validity under the source model and under do(S := target)."""
    before = entailed_validity(models[UserType(source)], scenes, thetas_per_scene, seed, resamples)
    after = entailed_validity(models[UserType(target)], scenes, thetas_per_scene, seed, resamples)
    return before, after


def augment_with_retry(scene: Scene, kind: ObjectKind, seed: int, scene_index: int) -> Scene:
    """Insert one object, re-seeding when the placement budget runs out."""
    kind = ObjectKind(kind)
    for attempt in range(MAX_AUGMENT_RETRIES):
        sub_seed = int(
            np.random.SeedSequence(
                [seed, _AUGMENT_TAG, scene_index, list(ObjectKind).index(kind), attempt]
            ).generate_state(1)[0]
        )
        try:
            return augment_scene(scene, kind, sub_seed)
        except PlacementFailure as e:
            logger.warning(f"Augmenting scene {scene_index} with {kind.value} failed: {e}")
            if len(scene.objects) >= MAX_OBJECTS:
                raise
    raise PlacementFailure(
        f"Could not add a {kind.value} to scene {scene_index} after {MAX_AUGMENT_RETRIES} seeds"
    )


def intervene_symbol(
    model: SpecModel,
    scenes: Sequence[Scene],
    kind: ObjectKind,
    seed: int = 0,
    thetas_per_scene: int = DEFAULT_THETAS_PER_SCENE,
    resamples: int = DEFAULT_RESAMPLES,
) -> Tuple[EntailedDistribution, EntailedDistribution]:
    """Validity on the scenes as observed and with one extra object of a kind."""
    baseline = entailed_validity(model, scenes, thetas_per_scene, seed, resamples)
    augmented = [augment_with_retry(s, kind, seed, i) for i, s in enumerate(scenes)]
    intervened = entailed_validity(model, augmented, thetas_per_scene, seed, resamples)
    return baseline, intervened


def compare(
    user_type: UserType,
    intervention: Intervention,
    baseline: EntailedDistribution,
    intervened: EntailedDistribution,
    seed: int,
    resamples: int = DEFAULT_RESAMPLES,
    threshold: float = EFFECT_THRESHOLD,
) -> CausalCell:
    """
    Paired scene-level bootstrap of the intervention effect.

    A cell is significant when the mean moves by more than the threshold and
    the difference interval excludes zero.
    """
    base = baseline.by_scene().mean(axis=1)
    other = intervened.by_scene().mean(axis=1)
    if base.shape != other.shape:
        raise ValueError("Branches must share their (scene, theta) draws")
    delta = intervened.mean - baseline.mean
    idx = _bootstrap_indices(seed, len(base), resamples)
    low, high = _percentile_ci((other - base)[idx].mean(axis=1))
    significant = abs(delta) > threshold and (low > 0 or high < 0)
    return CausalCell(
        user_type=user_type,
        intervention=intervention.label,
        distribution=intervened,
        delta_vs_baseline=delta,
        diff_ci_low=low,
        diff_ci_high=high,
        significant=significant,
    )


def causal_table(
    models: Mapping[UserType, SpecModel],
    test_scenes: Sequence[Scene],
    config: Optional[ExperimentConfig] = None,
) -> CausalReport:
    """Baseline and per-kind symbol interventions for every model, plus do(S)."""
    config = config or ExperimentConfig()
    seed = config.seed
    n = config.causal_thetas_per_scene
    resamples = config.bootstrap_resamples
    threshold = config.significance_threshold

    augmented: Dict[ObjectKind, List[Scene]] = {
        kind: [augment_with_retry(s, kind, seed, i) for i, s in enumerate(test_scenes)]
        for kind in ObjectKind
    }
    images: Dict[Tuple[Optional[ObjectKind], int], List[np.ndarray]] = {}

    def branch(model: SpecModel, kind: Optional[ObjectKind]) -> EntailedDistribution:
        key = (kind, model.image_size)
        if key not in images:
            scenes = test_scenes if kind is None else augmented[kind]
            images[key] = _render_all(scenes, model.image_size)
        return distribution_from_outcomes(_outcomes(model, images[key], n, seed), seed, resamples)

    present = [t for t in USER_TYPES if t in models]
    baselines = {t: branch(models[t], None) for t in present}
    symbol_cells = []
    for user_type in present:
        baseline = baselines[user_type]
        symbol_cells.append(
            compare(user_type, NoIntervention(), baseline, baseline, seed, resamples, threshold)
        )
        for kind in ObjectKind:
            cell = compare(
                user_type,
                AddSymbol(kind=kind),
                baseline,
                branch(models[user_type], kind),
                seed,
                resamples,
                threshold,
            )
            symbol_cells.append(cell)
            logger.info(
                f"{user_type.value} + {kind.value}: {baseline.mean:.3f} -> "
                f"{cell.distribution.mean:.3f}{' (significant)' if cell.significant else ''}"
            )

    reference = baselines.get(UserType.CAREFUL, baselines[present[0]])
    user_type_cells = [
        compare(t, SetUserType(target=t), reference, baselines[t], seed, resamples, threshold)
        for t in present
    ]
    return CausalReport(symbol_cells=symbol_cells, user_type_cells=user_type_cells)


def direction_structure_holds(report: CausalReport) -> Tuple[bool, List[str]]:
    """
    Check the expected flag pattern: careful users react negatively to every
    kind, normal users only to glasses, aggressive users to nothing.

    Returns:
        (holds, human-readable violations)
    """
    problems = []
    for cell in report.symbol_cells:
        if cell.intervention == NoIntervention().label:
            continue
        kind = ObjectKind(cell.intervention)
        if cell.user_type == UserType.CAREFUL:
            expected = True
        elif cell.user_type == UserType.NORMAL:
            expected = kind == ObjectKind.GLASS
        else:
            expected = False
        if cell.significant != expected:
            problems.append(
                f"{cell.user_type.value} + {kind.value}: expected "
                f"{'a significant' if expected else 'no significant'} change, "
                f"got delta {cell.delta_vs_baseline:+.3f}"
            )
        elif expected and cell.delta_vs_baseline >= 0:
            problems.append(
                f"{cell.user_type.value} + {kind.value}: significant but not a decrease"
            )
    return not problems, problems


def user_type_ordering_holds(report: CausalReport) -> Tuple[bool, List[str]]:
    """Careful < normal < aggressive validity, careful and aggressive CIs disjoint."""
    cells = {c.user_type: c.distribution for c in report.user_type_cells}
    problems = []
    chain = [t for t in USER_TYPES if t in cells]
    for lower, upper in zip(chain, chain[1:]):
        if not cells[lower].mean < cells[upper].mean:
            problems.append(
                f"{lower.value} ({cells[lower].mean:.3f}) is not below "
                f"{upper.value} ({cells[upper].mean:.3f})"
            )
    careful, aggressive = cells.get(UserType.CAREFUL), cells.get(UserType.AGGRESSIVE)
    if careful and aggressive and careful.ci_high >= aggressive.ci_low:
        problems.append("careful and aggressive confidence intervals overlap")
    return not problems, problems


REPORT_COLUMNS = [
    "user_type",
    "intervention",
    "mean",
    "ci_low",
    "ci_high",
    "delta_vs_baseline",
    "significant",
]


def _cells_frame(cells: Sequence[CausalCell]) -> pd.DataFrame:
    rows = [
        {
            "user_type": c.user_type.value,
            "intervention": c.intervention,
            "mean": round(c.distribution.mean, 6),
            "ci_low": round(c.distribution.ci_low, 6),
            "ci_high": round(c.distribution.ci_high, 6),
            "delta_vs_baseline": round(c.delta_vs_baseline, 6),
            "significant": c.significant,
        }
        for c in cells
    ]
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def report_frame(report: CausalReport) -> pd.DataFrame:
    """Rows of causal_report.csv: baseline and object interventions per user type."""
    return _cells_frame(report.symbol_cells)


def user_type_frame(report: CausalReport) -> pd.DataFrame:
    """Rows of causal_user_types.csv: do(S=s) for every s, deltas against careful."""
    return _cells_frame(report.user_type_cells)


def render_table(report: CausalReport) -> str:
    """Markdown grid: one row per user type, bold cells are significant."""
    columns = [NoIntervention().label] + [k.value for k in ObjectKind]
    lines = [
        "| user type | " + " | ".join(columns) + " |",
        "|---" * (len(columns) + 1) + "|",
    ]
    for user_type in USER_TYPES:
        cells = [c for c in report.symbol_cells if c.user_type == user_type]
        if not cells:
            continue
        by_label = {c.intervention: c for c in cells}
        rendered = []
        for label in columns:
            c = by_label[label]
            d = c.distribution
            text = f"{d.mean:.2f} [{d.ci_low:.2f}, {d.ci_high:.2f}]"
            rendered.append(f"**{text}**" if c.significant else text)
        lines.append(f"| {user_type.value} | " + " | ".join(rendered) + " |")
    return "\n".join(lines) + "\n"
