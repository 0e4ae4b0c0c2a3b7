"""Shared numerics: layer geometry, activations, and prediction conventions.

A layered network is described by a :class:`LayerSpec`, the node counts per
layer. Nodes can be addressed per layer, as ``(layer, index)``, or flat, as
a single 1-based index into the whole network. The mapping between the two
addressing schemes is what lets a layered network be embedded into a flat
graph (and recovered from one), so it lives here next to the activation
functions both model families share.
"""

from __future__ import annotations

import threading
from bisect import bisect_left
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray

# How a node's prediction is formed from the nodes feeding it:
#   matrix-activation:  mu = f(W a)   (the usual feedforward convention)
#   activation-matrix:  mu = W f(a)   (common in the predictive coding literature)
MATRIX_ACTIVATION = "matrix-activation"
ACTIVATION_MATRIX = "activation-matrix"
CONVENTIONS = (MATRIX_ACTIVATION, ACTIVATION_MATRIX)

TRAINING = "training"
TESTING = "testing"


class DivergenceError(RuntimeError):
    """Iterative inference produced a non-finite value."""

    def __init__(self, step: int, message: str | None = None):
        super().__init__(message or f"inference diverged at step {step}")
        self.step = step


class MaddCounter:
    """Thread-safe counter of multiply-accumulate operations.

    Instrumented kernels add the exact number of multiplies they execute,
    so the count is a measurement of work done, not an estimate.
    """

    def __init__(self) -> None:
        self._count = 0
        self._lock = threading.Lock()

    def add(self, n: int) -> None:
        with self._lock:
            self._count += int(n)

    @property
    def count(self) -> int:
        return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


@dataclass(frozen=True)
class Activation:
    """Element-wise activation with its exact analytic derivative."""

    name: str
    f: Callable[[Array], Array]
    df: Callable[[Array], Array]

    def __repr__(self) -> str:
        return f"Activation({self.name!r})"


def _identity(x):
    return np.asarray(x, dtype=float)


def _identity_df(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _tanh_df(x):
    t = np.tanh(x)
    return 1.0 - t * t


def _sigmoid(x):
    # Stable two-branch form: never exponentiates a positive argument.
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _sigmoid_df(x):
    s = _sigmoid(x)
    return s * (1.0 - s)


def _relu(x):
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def _relu_df(x):
    # The kink at 0 has no derivative; we fix f'(0) = 0.
    return np.where(np.asarray(x, dtype=float) > 0, 1.0, 0.0)


ACTIVATIONS: dict[str, Activation] = {
    "identity": Activation("identity", _identity, _identity_df),
    "tanh": Activation("tanh", np.tanh, _tanh_df),
    "sigmoid": Activation("sigmoid", _sigmoid, _sigmoid_df),
    "relu": Activation("relu", _relu, _relu_df),
}


def activation(name: str) -> Activation:
    """Look up a built-in activation by name."""
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}"
        ) from None


@dataclass(frozen=True)
class LayerSpec:
    """Layer widths ``n_0 .. n_L`` of a layered network.

    ``n_0`` is the input width, ``n_L`` the output width; at least one
    weight layer is required (``len(sizes) >= 2``).
    """

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(n < 1 for n in sizes):
            raise ValueError(f"layer widths must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def depth(self) -> int:
        """Number of weight layers L."""
        return len(self.sizes) - 1

    @property
    def n_nodes(self) -> int:
        """Total node count N across all layers."""
        return sum(self.sizes)

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]


def layer_offsets(spec: LayerSpec) -> list[int]:
    """Prefix sums ``[0, n_0, n_0+n_1, ..., N]`` (length L+2).

    ``offsets[l]`` is the number of nodes strictly below layer ``l``, so
    layer ``l`` owns flat indices ``offsets[l]+1 .. offsets[l+1]`` (1-based).
    """
    offsets = [0]
    for n in spec.sizes:
        offsets.append(offsets[-1] + n)
    return offsets


def layer_slices(spec: LayerSpec) -> list[slice]:
    """0-based slice into a flat node vector for each layer."""
    offsets = layer_offsets(spec)
    return [slice(offsets[l], offsets[l + 1]) for l in range(len(spec.sizes))]


def flat_to_layer(index: int, spec: LayerSpec) -> tuple[int, int]:
    """Map a 1-based flat node index to ``(layer, index_within_layer)``.

    The within-layer index is also 1-based, matching the flat convention.
    """
    offsets = layer_offsets(spec)
    if not 1 <= index <= offsets[-1]:
        raise ValueError(f"flat index {index} outside 1..{offsets[-1]}")
    layer = bisect_left(offsets, index) - 1
    return layer, index - offsets[layer]


def layer_to_flat(layer: int, index: int, spec: LayerSpec) -> int:
    """Map 1-based ``(layer, index_within_layer)`` to the flat node index."""
    if not 0 <= layer <= spec.depth:
        raise ValueError(f"layer {layer} outside 0..{spec.depth}")
    if not 1 <= index <= spec.sizes[layer]:
        raise ValueError(
            f"index {index} outside 1..{spec.sizes[layer]} for layer {layer}"
        )
    return layer_offsets(spec)[layer] + index


def flatten_activations(per_layer: Sequence[Array]) -> Array:
    """Concatenate per-layer activation vectors into one flat node vector."""
    return np.concatenate([np.asarray(a, dtype=float) for a in per_layer])


def split_activations(spec: LayerSpec, flat: Array) -> list[Array]:
    """Split a flat node vector into per-layer activation vectors."""
    flat = np.asarray(flat, dtype=float)
    if flat.shape != (spec.n_nodes,):
        raise ValueError(f"expected {spec.n_nodes} node values, got {flat.shape}")
    return [flat[s].copy() for s in layer_slices(spec)]


def layer_prediction(weights: Array, below: Array, act: Activation, convention: str) -> Array:
    """Prediction for one layer given the activations of the layer feeding it."""
    if convention == MATRIX_ACTIVATION:
        return act.f(weights @ below)
    if convention == ACTIVATION_MATRIX:
        return weights @ act.f(below)
    raise ValueError(f"unknown convention {convention!r}; choose from {CONVENTIONS}")


def frozen_array(values, shape: tuple[int, ...] | None = None) -> Array:
    """Copy ``values`` to a read-only float64 array, optionally checking shape."""
    arr = np.array(values, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def validate_layer_weights(spec: LayerSpec, weights: Sequence[Array]) -> tuple[Array, ...]:
    """Check one weight matrix per layer pair and freeze them read-only.

    Weight matrix ``l`` maps layer ``l`` to layer ``l+1`` and must be
    ``(n_{l+1}, n_l)``.
    """
    if len(weights) != spec.depth:
        raise ValueError(f"expected {spec.depth} weight matrices, got {len(weights)}")
    frozen = []
    for l, w in enumerate(weights):
        frozen.append(frozen_array(w, shape=(spec.sizes[l + 1], spec.sizes[l])))
    return tuple(frozen)


def check_vector(x, n: int, name: str) -> Array:
    """Coerce to a float64 vector of length ``n`` or raise."""
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr
