"""Construction of the ten named model variants and their training defaults."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import HEAD_SIGMOID, HEAD_SOFTMAX, DenseLayer, NetworkModel, init_layer
from .preprocess import LAYOUTS, EncodedSample, FeatureLayout
from .training import TrainingConfig

CLASSIFIER_IDS = ("a1", "b1", "c1", "d1", "e1", "f1")
REGRESSOR_IDS = ("a2", "b2", "c2", "d2")

N_CLASSES = 5
HIDDEN_WIDTH = 64
DEFAULT_L2 = 1e-4


@dataclass(frozen=True)
class VariantSpec:
    variant_id: str
    task: str  # "classifier" | "regressor"
    layout: FeatureLayout


def variant_spec(variant_id: str) -> VariantSpec:
    if variant_id not in LAYOUTS:
        raise ValueError(
            f"unknown variant {variant_id!r}; valid ids: {sorted(LAYOUTS)}"
        )
    task = "regressor" if variant_id in REGRESSOR_IDS else "classifier"
    return VariantSpec(variant_id, task, LAYOUTS[variant_id])


def branch_widths(layout: FeatureLayout) -> dict[str, int]:
    """Input width per branch for a layout, before any auxiliary inputs."""
    per_state = 4 if layout.rod_feature == "heights" else 1
    if layout.input_mode == "separated":
        return {"initial": 1 + per_state, "final": per_state}
    width = (1 + per_state) + per_state
    if layout.uses_direction:
        width += 1
    return {"main": width}


def aux_width(variant_id: str) -> int:
    """Width of the auxiliary vector concatenated at the merge point.

    Classifiers take the direction scalar (separated layouts only; AIO folds
    it into the main vector). Regressors additionally take the 5-vector
    classifier output.
    """
    spec = variant_spec(variant_id)
    width = 0
    if spec.layout.input_mode == "separated" and spec.layout.uses_direction:
        width += 1
    if spec.task == "regressor":
        width += N_CLASSES
    return width


def build_variant(variant_id: str, seed: int) -> NetworkModel:
    """Seeded construction of a variant's untrained network."""
    spec = variant_spec(variant_id)
    rng = np.random.default_rng(seed)
    widths = branch_widths(spec.layout)
    aux = aux_width(variant_id)

    def stack(n_in: int, depth: int) -> list[DenseLayer]:
        layers = []
        for _ in range(depth):
            layers.append(init_layer(n_in, HIDDEN_WIDTH, "relu", rng, l2=DEFAULT_L2))
            n_in = HIDDEN_WIDTH
        return layers

    if spec.layout.input_mode == "separated":
        branches = {name: stack(width, 2) for name, width in widths.items()}
        merge_width = HIDDEN_WIDTH * len(branches) + aux
        trunk = stack(merge_width, 2)
        head_in = HIDDEN_WIDTH
    else:
        branches = {"main": []}
        trunk = stack(widths["main"] + aux, 4)
        head_in = HIDDEN_WIDTH

    if spec.task == "classifier":
        head = init_layer(head_in, N_CLASSES, "softmax", rng, l2=DEFAULT_L2)
        head_kind = HEAD_SOFTMAX
    else:
        head = init_layer(head_in, 1, "sigmoid", rng, l2=DEFAULT_L2)
        head_kind = HEAD_SIGMOID
    trunk.append(head)

    return NetworkModel(
        branches=branches, aux_width=aux, trunk=trunk, head=head_kind, variant_id=variant_id
    )


def pair_for_regressor(regressor_id: str) -> str:
    """Classifier whose inputs most closely resemble the regressor's.

    Matches on rod_feature and input_mode; among matching classifiers the
    direction-using one is preferred since every regressor uses direction.
    """
    spec = variant_spec(regressor_id)
    if spec.task != "regressor":
        raise ValueError(f"{regressor_id!r} is not a regressor")
    candidates = [
        cid
        for cid in CLASSIFIER_IDS
        if LAYOUTS[cid].rod_feature == spec.layout.rod_feature
        and LAYOUTS[cid].input_mode == spec.layout.input_mode
    ]
    candidates.sort(key=lambda cid: LAYOUTS[cid].uses_direction, reverse=True)
    return candidates[0]


def model_inputs(
    samples: Sequence[EncodedSample],
    variant_id: str,
    class_probs: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Stack encoded samples into the input matrices a variant expects.

    Regressor variants require `class_probs`, the (n, 5) stage-1 output.
    """
    spec = variant_spec(variant_id)
    if spec.layout.input_mode == "separated":
        inputs = {
            "initial": np.stack([s.initial_branch for s in samples]),
            "final": np.stack([s.final_branch for s in samples]),
        }
    else:
        inputs = {"main": np.stack([s.initial_branch for s in samples])}

    aux_parts: list[np.ndarray] = []
    if spec.layout.input_mode == "separated" and spec.layout.uses_direction:
        aux_parts.append(np.array([[float(s.direction)] for s in samples]))
    if spec.task == "regressor":
        if class_probs is None:
            raise ValueError(f"regressor {variant_id!r} needs stage-1 class probabilities")
        aux_parts.append(np.atleast_2d(np.asarray(class_probs, dtype=np.float64)))
    if aux_parts:
        inputs["aux"] = np.concatenate(aux_parts, axis=1)
    return inputs


def classification_targets(samples: Sequence[EncodedSample]) -> np.ndarray:
    return np.stack([s.class_onehot for s in samples])


def regression_targets(samples: Sequence[EncodedSample]) -> np.ndarray:
    return np.array([[s.regression_target] for s in samples])


def default_training_config(variant_id: str, seed: int) -> TrainingConfig:
    """Per-variant training defaults.

    Classifiers monitor validation accuracy. Separated-input regressors
    monitor validation loss; AIO regressors monitor validation MSE.
    AIO classifiers train with plain SGD; every other variant uses Adam.
    """
    spec = variant_spec(variant_id)
    optimizer = "adam"
    if spec.task == "classifier":
        metric = "val_accuracy"
        min_delta = 0.005
        if spec.layout.input_mode == "all_in_one":
            optimizer = "sgd"
    else:
        metric = "val_loss" if spec.layout.input_mode == "separated" else "val_mse"
        min_delta = 0.0005
    return TrainingConfig(
        monitored_metric=metric,
        early_stop_min_delta=min_delta,
        optimizer=optimizer,
        seed=seed,
    )
