"""Dense feedforward network engine: forward, analytic backprop, serialization.

Supported topology: one or more input branches, each a stack of dense layers,
merged by concatenation together with an optional auxiliary input vector,
followed by a trunk of dense layers whose last layer is the output head.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

FORMAT_VERSION = 1

HEAD_SOFTMAX = "softmax-5"
HEAD_SIGMOID = "sigmoid-1"

LOSS_CCE = "categorical_cross_entropy"
LOSS_MAE = "mean_absolute_error"

CCE_CLAMP = 1e-12


class ShapeError(ValueError):
    """Input vector does not match the model's declared input sizes."""


class ModelFormatError(ValueError):
    """Model file is corrupt or has an unsupported format version."""


@dataclass
class DenseLayer:
    weights: np.ndarray  # (n_in, n_out)
    biases: np.ndarray  # (n_out,)
    activation: str  # relu | linear | softmax | sigmoid
    l1: float = 0.0
    l2: float = 0.0

    def __post_init__(self) -> None:
        if self.activation not in ("relu", "linear", "softmax", "sigmoid"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("regularization coefficients must be non-negative")
        if self.weights.shape[1] != self.biases.shape[0]:
            raise ValueError(
                f"bias width {self.biases.shape[0]} != weight columns {self.weights.shape[1]}"
            )

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]


@dataclass
class NetworkModel:
    """Two-branch-merge dense network (single-branch covers the AIO case)."""

    branches: dict[str, list[DenseLayer]]
    aux_width: int
    trunk: list[DenseLayer]
    head: str
    variant_id: str | None = None

    def __post_init__(self) -> None:
        if self.head not in (HEAD_SOFTMAX, HEAD_SIGMOID):
            raise ValueError(f"unknown head {self.head!r}")
        if not self.trunk:
            raise ValueError("trunk must contain at least the head layer")
        head_layer = self.trunk[-1]
        expected = ("softmax", 5) if self.head == HEAD_SOFTMAX else ("sigmoid", 1)
        if (head_layer.activation, head_layer.n_out) != expected:
            raise ValueError(
                f"head layer ({head_layer.activation}, {head_layer.n_out}) "
                f"does not match declared head {self.head}"
            )
        for layers in list(self.branches.values()) + [self.trunk[:-1]]:
            for layer in layers:
                if layer.activation == "softmax":
                    raise ValueError("softmax is only valid as the head activation")

    @property
    def loss_kind(self) -> str:
        return LOSS_CCE if self.head == HEAD_SOFTMAX else LOSS_MAE

    def all_layers(self) -> list[DenseLayer]:
        layers: list[DenseLayer] = []
        for branch_layers in self.branches.values():
            layers.extend(branch_layers)
        layers.extend(self.trunk)
        return layers

    def branch_input_width(self, name: str) -> int:
        layers = self.branches[name]
        if layers:
            return layers[0].n_in
        # A branch with no layers feeds the merge directly; its width is
        # whatever the trunk expects after the other branches and aux.
        other = sum(
            (ls[-1].n_out if ls else 0) for key, ls in self.branches.items() if key != name
        )
        return self.trunk[0].n_in - other - self.aux_width


def init_layer(
    n_in: int,
    n_out: int,
    activation: str,
    rng: np.random.Generator,
    l1: float = 0.0,
    l2: float = 0.0,
) -> DenseLayer:
    """Symmetric fan-based uniform initialization, zero biases."""
    limit = math.sqrt(6.0 / (n_in + n_out))
    weights = rng.uniform(-limit, limit, size=(n_in, n_out))
    return DenseLayer(weights=weights, biases=np.zeros(n_out), activation=activation, l1=l1, l2=l2)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "linear":
        return z
    if activation == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    # softmax, shifted for stability
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _activation_grad(z: np.ndarray, a: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (z > 0.0).astype(z.dtype)
    if activation == "linear":
        return np.ones_like(z)
    if activation == "sigmoid":
        return a * (1.0 - a)
    raise ValueError("softmax gradient is fused with the cross-entropy loss")


def _as_batch(x: np.ndarray, width: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ShapeError(f"input '{name}' has shape {np.asarray(x).shape}, expected width {width}")
    return arr


def _forward_cached(model: NetworkModel, inputs: dict[str, np.ndarray]):
    """Forward pass keeping the (input, z, a) caches needed by backprop."""
    branch_caches: dict[str, list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {}
    branch_outputs: list[np.ndarray] = []
    n = None
    for name, layers in model.branches.items():
        if name not in inputs:
            raise ShapeError(f"missing input for branch '{name}'")
        a = _as_batch(inputs[name], model.branch_input_width(name), name)
        if n is None:
            n = a.shape[0]
        elif a.shape[0] != n:
            raise ShapeError(f"branch '{name}' batch size {a.shape[0]} != {n}")
        cache = []
        for layer in layers:
            z = a @ layer.weights + layer.biases
            a_next = _activate(z, layer.activation)
            cache.append((a, z, a_next))
            a = a_next
        branch_caches[name] = cache
        branch_outputs.append(a)

    pieces = list(branch_outputs)
    if model.aux_width > 0:
        if "aux" not in inputs:
            raise ShapeError("missing input 'aux'")
        aux = _as_batch(inputs["aux"], model.aux_width, "aux")
        if n is not None and aux.shape[0] != n:
            raise ShapeError(f"aux batch size {aux.shape[0]} != {n}")
        pieces.append(aux)
    merged = np.concatenate(pieces, axis=1) if len(pieces) > 1 else pieces[0]

    trunk_cache = []
    a = merged
    for layer in model.trunk:
        z = a @ layer.weights + layer.biases
        a_next = _activate(z, layer.activation)
        trunk_cache.append((a, z, a_next))
        a = a_next
    return a, branch_caches, trunk_cache, [b.shape[1] for b in branch_outputs]


def forward(model: NetworkModel, inputs: dict[str, np.ndarray]) -> np.ndarray:
    """Network output for a single sample (1-D inputs) or a batch (2-D)."""
    single = all(np.asarray(v).ndim == 1 for v in inputs.values())
    out, _, _, _ = _forward_cached(model, inputs)
    return out[0] if single else out


def regularization_loss(model: NetworkModel) -> float:
    total = 0.0
    for layer in model.all_layers():
        if layer.l1:
            total += layer.l1 * float(np.abs(layer.weights).sum())
        if layer.l2:
            total += layer.l2 * float(np.square(layer.weights).sum())
    return total


def data_loss(prediction: np.ndarray, target: np.ndarray, kind: str) -> float:
    pred = np.atleast_2d(np.asarray(prediction, dtype=np.float64))
    targ = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if pred.shape != targ.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {targ.shape}")
    if kind == LOSS_CCE:
        clamped = np.clip(pred, CCE_CLAMP, 1.0)
        return float(-np.mean(np.sum(targ * np.log(clamped), axis=1)))
    if kind == LOSS_MAE:
        return float(np.mean(np.abs(pred - targ)))
    raise ValueError(f"unknown loss kind {kind!r}")


def loss(
    prediction: np.ndarray, target: np.ndarray, kind: str, model: NetworkModel | None = None
) -> float:
    """Data loss plus the model's L1/L2 regularization penalty."""
    total = data_loss(prediction, target, kind)
    if model is not None:
        total += regularization_loss(model)
    return total


def _backward_from_cache(
    model: NetworkModel,
    target: np.ndarray,
    kind: str,
    output: np.ndarray,
    branch_caches,
    trunk_cache,
    branch_widths,
) -> list[tuple[np.ndarray, np.ndarray]]:
    targ = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if targ.shape != output.shape:
        raise ShapeError(f"target shape {targ.shape} != output shape {output.shape}")
    n = output.shape[0]

    head = model.trunk[-1]
    if kind == LOSS_CCE:
        if head.activation != "softmax":
            raise ValueError("categorical cross-entropy requires a softmax head")
        dz = (output - targ) / n
    elif kind == LOSS_MAE:
        da = np.sign(output - targ) / targ.size  # subgradient 0 at ties
        _, z, a = trunk_cache[-1]
        dz = da * _activation_grad(z, a, head.activation)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")

    trunk_grads: list[tuple[np.ndarray, np.ndarray]] = []
    d_merged = None
    for i in range(len(model.trunk) - 1, -1, -1):
        layer = model.trunk[i]
        a_prev, _, _ = trunk_cache[i]
        dw = a_prev.T @ dz + layer.l1 * np.sign(layer.weights) + 2.0 * layer.l2 * layer.weights
        db = dz.sum(axis=0)
        trunk_grads.append((dw, db))
        da_prev = dz @ layer.weights.T
        if i > 0:
            below = model.trunk[i - 1]
            _, z_below, a_below = trunk_cache[i - 1]
            dz = da_prev * _activation_grad(z_below, a_below, below.activation)
        else:
            d_merged = da_prev
    trunk_grads.reverse()

    grads: list[tuple[np.ndarray, np.ndarray]] = []
    offset = 0
    for (name, layers), width in zip(model.branches.items(), branch_widths):
        da = d_merged[:, offset : offset + width]
        offset += width
        branch_grads: list[tuple[np.ndarray, np.ndarray]] = []
        for layer, (a_prev, z, a) in zip(reversed(layers), reversed(branch_caches[name])):
            dz_b = da * _activation_grad(z, a, layer.activation)
            dw = (
                a_prev.T @ dz_b
                + layer.l1 * np.sign(layer.weights)
                + 2.0 * layer.l2 * layer.weights
            )
            db = dz_b.sum(axis=0)
            branch_grads.append((dw, db))
            da = dz_b @ layer.weights.T
        grads.extend(reversed(branch_grads))
    grads.extend(trunk_grads)
    return grads


def backward(
    model: NetworkModel, inputs: dict[str, np.ndarray], target: np.ndarray, kind: str
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Analytic gradients of loss() w.r.t. every (weights, biases) pair.

    Gradient order matches model.all_layers().
    """
    grads, _ = backward_with_loss(model, inputs, target, kind)
    return grads


def backward_with_loss(
    model: NetworkModel, inputs: dict[str, np.ndarray], target: np.ndarray, kind: str
) -> tuple[list[tuple[np.ndarray, np.ndarray]], float]:
    """Gradients plus the total loss from the same forward pass."""
    output, branch_caches, trunk_cache, branch_widths = _forward_cached(model, inputs)
    grads = _backward_from_cache(
        model, target, kind, output, branch_caches, trunk_cache, branch_widths
    )
    total = data_loss(output, np.atleast_2d(target), kind) + regularization_loss(model)
    return grads, total


def clone_model(model: NetworkModel) -> NetworkModel:
    return copy.deepcopy(model)


def snapshot_params(model: NetworkModel) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(layer.weights.copy(), layer.biases.copy()) for layer in model.all_layers()]


def restore_params(model: NetworkModel, snapshot: list[tuple[np.ndarray, np.ndarray]]) -> None:
    for layer, (w, b) in zip(model.all_layers(), snapshot):
        layer.weights[...] = w
        layer.biases[...] = b


def _layer_to_dict(layer: DenseLayer, branch: str) -> dict:
    return {
        "branch": branch,
        "shape": [layer.n_in, layer.n_out],
        "activation": layer.activation,
        "l1": layer.l1,
        "l2": layer.l2,
        "weights": [float(v) for v in layer.weights.reshape(-1)],  # row-major
        "biases": [float(v) for v in layer.biases],
    }


def _layer_from_dict(doc: dict) -> DenseLayer:
    try:
        n_in, n_out = doc["shape"]
        weights = np.asarray(doc["weights"], dtype=np.float64).reshape(n_in, n_out)
        biases = np.asarray(doc["biases"], dtype=np.float64)
        return DenseLayer(
            weights=weights,
            biases=biases,
            activation=doc["activation"],
            l1=float(doc["l1"]),
            l2=float(doc["l2"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt layer record: {exc}") from exc


def model_to_dict(model: NetworkModel) -> dict:
    layers = []
    for name, branch_layers in model.branches.items():
        layers.extend(_layer_to_dict(layer, name) for layer in branch_layers)
    layers.extend(_layer_to_dict(layer, "trunk") for layer in model.trunk)
    return {
        "format_version": FORMAT_VERSION,
        "variant_id": model.variant_id,
        "head": model.head,
        "merge_topology": {
            "branches": list(model.branches.keys()),
            "aux_width": model.aux_width,
        },
        "layers": layers,
    }


def model_from_dict(doc: dict) -> NetworkModel:
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ModelFormatError("not a model document: missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {doc['format_version']!r}; expected {FORMAT_VERSION}"
        )
    try:
        branch_names = doc["merge_topology"]["branches"]
        aux_width = int(doc["merge_topology"]["aux_width"])
        branches: dict[str, list[DenseLayer]] = {name: [] for name in branch_names}
        trunk: list[DenseLayer] = []
        for layer_doc in doc["layers"]:
            layer = _layer_from_dict(layer_doc)
            if layer_doc["branch"] == "trunk":
                trunk.append(layer)
            else:
                branches[layer_doc["branch"]].append(layer)
        return NetworkModel(
            branches=branches,
            aux_width=aux_width,
            trunk=trunk,
            head=doc["head"],
            variant_id=doc.get("variant_id"),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"corrupt model document: {exc}") from exc


def save_model(model: NetworkModel, path: Union[str, Path]) -> None:
    """Write the model as JSON; floats keep full f64 precision."""
    with open(path, "w") as handle:
        json.dump(model_to_dict(model), handle, sort_keys=True)
        handle.write("\n")


def load_model(path: Union[str, Path]) -> NetworkModel:
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}") from exc
    return model_from_dict(doc)
