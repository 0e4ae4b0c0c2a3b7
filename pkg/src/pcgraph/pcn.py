"""Hierarchical predictive coding network: energy, inference, learning.

The model assigns every layer an activation vector ``a^l`` and scores a
configuration by the squared prediction errors between consecutive layers:

    mu^l  = f(w^{l-1} a^{l-1})            (matrix-activation convention)
          = w^{l-1} f(a^{l-1})            (activation-matrix convention)
    e^l   = a^l - mu^l
    E     = 1/2 * sum_{l=1..L} |e^l|^2

Inference relaxes the unclamped activations by gradient descent on E.
The closed-form activation gradients are

    dE/da^l = e^l - w^l.T (e^{l+1} * f'(w^l a^l))     (matrix-activation)
    dE/da^l = e^l - f'(a^l) * (w^l.T e^{l+1})         (activation-matrix)

with dE/da^L = e^L when the output layer is free (testing). Learning takes
one gradient step on the weights at the settled state:

    dE/dw^l = -(e^{l+1} * f'(w^l a^l)) a^l.T          (matrix-activation)
    dE/dw^l = -e^{l+1} f(a^l).T                       (activation-matrix)

During testing the energy minimum is reached exactly by the feedforward
recursion (every stationary point has all errors zero, layer by layer from
the top), which the exact solver exploits instead of iterating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    MATRIX_ACTIVATION,
    TESTING,
    TRAINING,
    Activation,
    Array,
    DivergenceError,
    LayerSpec,
    check_vector,
    layer_prediction,
    validate_layer_weights,
)
from .fnn import FnnModel

INIT_MODES = ("feedforward", "zero", "gaussian")
SOLVERS = ("gradient-descent", "exact")
EVALUATION_MODES = ("auto", "dense", "sparse")


@dataclass(frozen=True)
class PcnModel:
    """Layered predictive coding model; same parameterization as an FNN."""

    layers: LayerSpec
    weights: tuple[Array, ...]
    activation: Activation
    convention: str = MATRIX_ACTIVATION

    def __post_init__(self):
        object.__setattr__(
            self, "weights", validate_layer_weights(self.layers, self.weights)
        )


@dataclass
class PcnState:
    """Per-layer activations plus the clamp mode they were settled under.

    ``clamp == "training"`` fixes both the input and output layers;
    ``clamp == "testing"`` fixes the input layer only. Predictions and
    errors are derived quantities, recomputable from the activations.
    """

    activations: list[Array]
    clamp: str

    def __post_init__(self):
        if self.clamp not in (TRAINING, TESTING):
            raise ValueError(f"clamp must be {TRAINING!r} or {TESTING!r}")


@dataclass(frozen=True)
class InferenceConfig:
    """Knobs for iterative inference.

    ``stop_tolerance`` is on the max-norm of the activation gradient;
    ``max_steps`` is the hard cap. The exact solver ignores both and is
    valid only in testing mode. ``evaluation`` selects dense or sparse
    weight evaluation for graph models ("auto" picks sparse below 25%
    density); layered models always evaluate densely per layer.
    """

    max_steps: int = 100
    step_size: float = 0.1
    stop_tolerance: float = 1e-8
    solver: str = "gradient-descent"
    init: str = "feedforward"
    evaluation: str = "auto"

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.stop_tolerance < 0:
            raise ValueError("stop_tolerance must be nonnegative")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if self.evaluation not in EVALUATION_MODES:
            raise ValueError(f"evaluation must be one of {EVALUATION_MODES}")


def to_fnn(model: PcnModel) -> FnnModel:
    """The feedforward network with the same weights and convention."""
    return FnnModel(model.layers, model.weights, model.activation, model.convention)


def _check_state(model: PcnModel, state: PcnState) -> None:
    sizes = model.layers.sizes
    if len(state.activations) != len(sizes):
        raise ValueError(
            f"state has {len(state.activations)} layers, model has {len(sizes)}"
        )
    for l, (a, n) in enumerate(zip(state.activations, sizes)):
        if np.shape(a) != (n,):
            raise ValueError(f"layer {l} has shape {np.shape(a)}, expected ({n},)")


def predictions(model: PcnModel, state: PcnState) -> list[Array]:
    """Layer predictions ``mu^1 .. mu^L`` from the state's activations."""
    _check_state(model, state)
    a = state.activations
    return [
        layer_prediction(w, a[l], model.activation, model.convention)
        for l, w in enumerate(model.weights)
    ]


def errors(model: PcnModel, state: PcnState) -> list[Array]:
    """Prediction errors ``e^1 .. e^L`` (activation minus prediction)."""
    mu = predictions(model, state)
    return [state.activations[l + 1] - mu[l] for l in range(model.layers.depth)]


def energy(model: PcnModel, state: PcnState) -> float:
    """Total energy: half the summed squared prediction errors."""
    return 0.5 * sum(float(e @ e) for e in errors(model, state))


def _free_layers(depth: int, clamp: str) -> range:
    # Training clamps both ends; testing leaves the output layer free.
    return range(1, depth) if clamp == TRAINING else range(1, depth + 1)


def _gradient_pieces(model: PcnModel, activations: list[Array]):
    """Pre-activations (matrix-activation only) and errors for the gradients."""
    act, conv = model.activation, model.convention
    if conv == MATRIX_ACTIVATION:
        pre = [w @ activations[l] for l, w in enumerate(model.weights)]
        mu = [act.f(z) for z in pre]
    else:
        pre = None
        mu = [w @ act.f(activations[l]) for l, w in enumerate(model.weights)]
    err = [activations[l + 1] - mu[l] for l in range(model.layers.depth)]
    return pre, err


def activation_gradients(model: PcnModel, state: PcnState) -> list[Array]:
    """Energy gradients for the free layers, in layer order.

    Training mode returns gradients for layers ``1 .. L-1``; testing mode
    additionally returns layer ``L``, whose gradient is just its error.
    """
    _check_state(model, state)
    a = state.activations
    act, conv = model.activation, model.convention
    pre, err = _gradient_pieces(model, a)
    depth = model.layers.depth

    grads = []
    for l in _free_layers(depth, state.clamp):
        g = err[l - 1].copy()
        if l < depth:
            w = model.weights[l]
            if conv == MATRIX_ACTIVATION:
                g -= w.T @ (err[l] * act.df(pre[l]))
            else:
                g -= act.df(a[l]) * (w.T @ err[l])
        grads.append(g)
    return grads


def weight_gradients(model: PcnModel, state: PcnState) -> list[Array]:
    """Energy gradients for all L weight matrices."""
    _check_state(model, state)
    a = state.activations
    act, conv = model.activation, model.convention
    pre, err = _gradient_pieces(model, a)

    grads = []
    for l in range(model.layers.depth):
        if conv == MATRIX_ACTIVATION:
            grads.append(-np.outer(err[l] * act.df(pre[l]), a[l]))
        else:
            grads.append(-np.outer(err[l], act.f(a[l])))
    return grads


def feedforward_init(model: PcnModel, x, y=None) -> PcnState:
    """Initialize hidden layers to their predictions via a forward pass.

    Every hidden error starts at exactly zero; in training mode (``y``
    given) the whole initial energy sits in the output error, in testing
    mode the initial energy is zero.
    """
    a = [check_vector(x, model.layers.n_in, "x")]
    for w in model.weights:
        a.append(layer_prediction(w, a[-1], model.activation, model.convention))
    if y is None:
        return PcnState(a, TESTING)
    a[-1] = check_vector(y, model.layers.n_out, "y")
    return PcnState(a, TRAINING)


def zero_init(model: PcnModel, x, y=None) -> PcnState:
    """Initialize all unclamped layers to zero."""
    sizes = model.layers.sizes
    a = [check_vector(x, sizes[0], "x")]
    a += [np.zeros(n) for n in sizes[1:]]
    if y is None:
        return PcnState(a, TESTING)
    a[-1] = check_vector(y, sizes[-1], "y")
    return PcnState(a, TRAINING)


def gaussian_init(model: PcnModel, x, y=None, rng=None, scale: float = 1.0) -> PcnState:
    """Initialize unclamped layers i.i.d. Gaussian with the given scale."""
    if rng is None:
        raise ValueError("gaussian init needs an explicit rng for reproducibility")
    state = zero_init(model, x, y)
    free = _free_layers(model.layers.depth, state.clamp)
    for l in free:
        state.activations[l] = scale * rng.standard_normal(model.layers.sizes[l])
    return state


def _init_state(model: PcnModel, x, y, config: InferenceConfig, rng) -> PcnState:
    if config.init == "feedforward":
        return feedforward_init(model, x, y)
    if config.init == "zero":
        return zero_init(model, x, y)
    return gaussian_init(model, x, y, rng=rng)


def _exact_testing_state(model: PcnModel, x) -> PcnState:
    # Backward substitution on the stationarity system: the top equation
    # forces e^L = 0, which propagates down until every error is zero, so
    # the minimizer is constructed directly by the forward recursion.
    act, conv = model.activation, model.convention
    a = [check_vector(x, model.layers.n_in, "x")]
    for w in model.weights:
        if conv == MATRIX_ACTIVATION:
            a.append(act.f(w @ a[-1]))
        else:
            a.append(w @ act.f(a[-1]))
    return PcnState(a, TESTING)


def infer(model: PcnModel, x, y=None, config: InferenceConfig | None = None,
          rng=None) -> PcnState:
    """Settle the unclamped activations to (a local) minimum of the energy.

    ``y`` present means training mode (input and output clamped), absent
    means testing mode (input clamped only). With the ``"exact"`` solver
    (testing only) the zero-error minimum is constructed in one pass.

    Raises:
        DivergenceError: a non-finite activation appeared during descent.
    """
    config = config or InferenceConfig()
    if config.solver == "exact":
        if y is not None:
            raise ValueError("the exact solver applies to testing mode only")
        return _exact_testing_state(model, x)

    state = _init_state(model, x, y, config, rng)
    a = [arr.copy() for arr in state.activations]
    free = _free_layers(model.layers.depth, state.clamp)

    # divergence shows up as overflow before the finiteness check trips;
    # the DivergenceError is the signal, not the numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(config.max_steps):
            work = PcnState(a, state.clamp)
            grads = activation_gradients(model, work)
            if max((float(np.max(np.abs(g))) for g in grads), default=0.0) <= config.stop_tolerance:
                break
            for l, g in zip(free, grads):
                a[l] = a[l] - config.step_size * g
                if not np.all(np.isfinite(a[l])):
                    raise DivergenceError(step)
    return PcnState(a, state.clamp)


def learn_step(model: PcnModel, state: PcnState, learning_rate: float) -> PcnModel:
    """One gradient step on the weights at the settled training state."""
    if state.clamp != TRAINING:
        raise ValueError("learning requires a training-mode state")
    grads = weight_gradients(model, state)
    new_weights = [w - learning_rate * g for w, g in zip(model.weights, grads)]
    return PcnModel(model.layers, tuple(new_weights), model.activation, model.convention)
