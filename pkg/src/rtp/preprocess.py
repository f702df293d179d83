"""Normalization, class binning, undersampling, and feature encoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .domain import (
    FULL_POWER_W,
    MAX_ROD_TRAVEL_IN,
    CoreConfiguration,
    PowerClassBins,
    ReactorState,
    TransientObservation,
    direction_of,
    reactivity_of_state,
)

LN_FULL_POWER = math.log(FULL_POWER_W)

# Reactivity features are divided by this to keep them O(1) next to the
# [0, 1] power and rod features (max total worth is ~15.2 $).
REACTIVITY_FEATURE_SCALE = 16.0


class PowerRangeError(ValueError):
    """Power outside the classifiable range."""


class EmptyClassError(ValueError):
    """A class with no samples cannot be undersampled."""


@dataclass(frozen=True)
class NormalizedState:
    """Feature-space image of a ReactorState."""

    power_norm: float
    rods_norm: tuple[float, float, float, float]


@dataclass(frozen=True)
class FeatureLayout:
    """How one model variant sees an observation."""

    variant_id: str
    input_mode: str  # "separated" | "all_in_one"
    rod_feature: str  # "heights" | "reactivity"
    uses_direction: bool

    @property
    def is_regressor(self) -> bool:
        return self.variant_id.endswith("2")


# Flag matrix for the six classifier and four regressor variants.
LAYOUTS: dict[str, FeatureLayout] = {
    "a1": FeatureLayout("a1", "separated", "reactivity", True),
    "b1": FeatureLayout("b1", "separated", "heights", True),
    "c1": FeatureLayout("c1", "separated", "reactivity", False),
    "d1": FeatureLayout("d1", "separated", "heights", False),
    "e1": FeatureLayout("e1", "all_in_one", "reactivity", True),
    "f1": FeatureLayout("f1", "all_in_one", "heights", True),
    "a2": FeatureLayout("a2", "separated", "heights", True),
    "b2": FeatureLayout("b2", "separated", "reactivity", True),
    "c2": FeatureLayout("c2", "all_in_one", "heights", True),
    "d2": FeatureLayout("d2", "all_in_one", "reactivity", True),
}


@dataclass
class EncodedSample:
    """Per-variant feature vectors plus classification and regression targets.

    For all-in-one layouts the whole feature vector (direction included)
    lives in initial_branch and final_branch is empty.
    """

    initial_branch: np.ndarray
    final_branch: np.ndarray
    direction: int
    class_onehot: np.ndarray
    regression_target: float
    variant_id: str

    @property
    def class_index(self) -> int:
        return int(np.argmax(self.class_onehot))


def normalize_power(power: float) -> float:
    if power <= 0:
        raise ValueError(f"power {power} W must be positive for log normalization")
    return math.log(power) / LN_FULL_POWER


def denormalize_power(power_norm: float) -> float:
    return math.exp(power_norm * LN_FULL_POWER)


def normalize_state(state: ReactorState) -> NormalizedState:
    return NormalizedState(
        power_norm=normalize_power(state.power),
        rods_norm=tuple(h / MAX_ROD_TRAVEL_IN for h in state.rod_heights),
    )


def normalize(obs: TransientObservation) -> tuple[NormalizedState, NormalizedState]:
    """Normalize both states of an observation."""
    return normalize_state(obs.initial), normalize_state(obs.final)


def classify_power(power: float, bins: PowerClassBins = PowerClassBins()) -> int:
    """Smallest bin index whose ceiling covers the power (ceiling-inclusive)."""
    if power <= 0:
        raise PowerRangeError(f"power {power} W must be positive")
    for index, ceiling in enumerate(bins.ceilings):
        if power <= ceiling:
            return index
    raise PowerRangeError(f"power {power} W exceeds top ceiling {bins.ceilings[-1]} W")


def undersample_indices(class_labels: Sequence[int], seed: int, n_classes: int = 5) -> list[int]:
    """Indices realizing a class-balanced subset of the labeled samples.

    The minority class is kept verbatim and in order; every other class is
    sampled uniformly WITH replacement (so indices can repeat), down to the
    minority count. Deterministic per seed.
    """
    by_class: list[list[int]] = [[] for _ in range(n_classes)]
    for i, label in enumerate(class_labels):
        by_class[label].append(i)
    for c, members in enumerate(by_class):
        if not members:
            raise EmptyClassError(f"class {c} has no samples")

    rng = np.random.default_rng(seed)
    size = min(len(members) for members in by_class)
    minority = min(range(n_classes), key=lambda c: len(by_class[c]))

    chosen: list[int] = []
    for c, members in enumerate(by_class):
        if c == minority:
            chosen.extend(members[:size])
        else:
            draws = rng.integers(0, len(members), size=size)
            chosen.extend(members[int(d)] for d in draws)
    return chosen


def undersample(samples: Sequence[EncodedSample], seed: int) -> list[EncodedSample]:
    """Class-balance encoded samples to the minority-class count."""
    labels = [s.class_index for s in samples]
    n_classes = len(samples[0].class_onehot) if samples else 5
    return [samples[i] for i in undersample_indices(labels, seed, n_classes)]


def _state_features(
    norm: NormalizedState,
    state: ReactorState,
    layout: FeatureLayout,
    config: CoreConfiguration,
    include_power: bool,
) -> list[float]:
    feats: list[float] = []
    if include_power:
        feats.append(norm.power_norm)
    if layout.rod_feature == "heights":
        feats.extend(norm.rods_norm)
    else:
        feats.append(reactivity_of_state(state, config) / REACTIVITY_FEATURE_SCALE)
    return feats


def encode(
    obs: TransientObservation,
    layout: FeatureLayout,
    config: CoreConfiguration,
    bins: PowerClassBins = PowerClassBins(),
) -> EncodedSample:
    """Encode one observation for a model variant.

    Initial power appears only in the initial branch; the final power is
    the target (class bin and normalized regression value), never a feature.
    """
    norm_i, norm_f = normalize(obs)
    direction = direction_of(obs)

    initial = _state_features(norm_i, obs.initial, layout, config, include_power=True)
    final = _state_features(norm_f, obs.final, layout, config, include_power=False)

    if layout.input_mode == "all_in_one":
        vector = initial + final
        if layout.uses_direction:
            vector.append(float(direction))
        initial_branch = np.asarray(vector, dtype=np.float64)
        final_branch = np.empty(0, dtype=np.float64)
    else:
        initial_branch = np.asarray(initial, dtype=np.float64)
        final_branch = np.asarray(final, dtype=np.float64)

    onehot = np.zeros(bins.n_classes, dtype=np.float64)
    onehot[classify_power(obs.final.power, bins)] = 1.0

    return EncodedSample(
        initial_branch=initial_branch,
        final_branch=final_branch,
        direction=direction,
        class_onehot=onehot,
        regression_target=norm_f.power_norm,
        variant_id=layout.variant_id,
    )


def encode_dataset(
    observations: Sequence[TransientObservation],
    layout: FeatureLayout,
    configs,
    bins: PowerClassBins = PowerClassBins(),
) -> list[EncodedSample]:
    from .domain import config_for_date

    return [encode(obs, layout, config_for_date(obs.date, configs), bins) for obs in observations]


def write_encoded(samples: Sequence[EncodedSample], path: Union[str, Path]) -> None:
    """Serialize encoded samples as JSON records, one per line."""
    with open(path, "w") as handle:
        for s in samples:
            record = {
                "initial_branch": list(s.initial_branch),
                "final_branch": list(s.final_branch),
                "direction": s.direction,
                "class_onehot": list(s.class_onehot),
                "regression_target": s.regression_target,
                "variant_id": s.variant_id,
            }
            handle.write(json.dumps(record) + "\n")


def read_encoded(path: Union[str, Path]) -> list[EncodedSample]:
    samples: list[EncodedSample] = []
    with open(path) as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            samples.append(
                EncodedSample(
                    initial_branch=np.asarray(record["initial_branch"], dtype=np.float64),
                    final_branch=np.asarray(record["final_branch"], dtype=np.float64),
                    direction=int(record["direction"]),
                    class_onehot=np.asarray(record["class_onehot"], dtype=np.float64),
                    regression_target=float(record["regression_target"]),
                    variant_id=record["variant_id"],
                )
            )
    return samples
