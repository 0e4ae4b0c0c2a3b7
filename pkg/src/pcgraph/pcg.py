"""Predictive coding graph: a flat node set with a masked N x N weight matrix.

The graph generalizes the layered model: every node may predict every
other, with a binary mask declaring which connections structurally exist.
Energy, inference, and learning mirror the layered rules on the flat
vector of activations:

    mu = f(W a)   or   W f(a)        (convention)
    e  = a - mu
    E  = 1/2 * |e|^2
    dE/da = e - W.T (e * f'(W a))    (matrix-activation; clamped entries zeroed)
    dE/da = e - f'(a) * (W.T e)      (activation-matrix)
    dE/dW = -(e * f'(W a)) a.T       (matrix-activation; masked entries zeroed)
    dE/dW = -e f(a).T                (activation-matrix)

Masked weights are a hard invariant, re-applied on every write, never a
caller obligation. Placing the layered model's weight matrices on the
subdiagonal blocks of W (``hierarchical_embed``) reproduces the layered
model exactly: same energy up to a constant, same dynamics.

Evaluation is dense (plain matmul) or sparse (compressed row storage over
the unmasked entries). Sparse kernels count the multiply-adds they
execute, which makes the cost model checkable.
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
    MaddCounter,
    check_vector,
    layer_slices,
)
from .pcn import InferenceConfig, PcnModel

SPARSE_DENSITY_THRESHOLD = 0.25


class FeedforwardInitError(ValueError):
    """The mask is not feedforward, so forward-pass initialization is undefined."""


@dataclass(frozen=True)
class PcgModel:
    """Graph model: weights, mask, activation, convention, clamp widths.

    ``mask[i, j]`` is True where the connection from node ``j`` to node
    ``i`` exists. Weights are zero wherever the mask is zero, always.
    The first ``n_in`` nodes take the input clamp and the last ``n_out``
    nodes take the output clamp.
    """

    weights: Array
    mask: Array
    activation: Activation
    convention: str = MATRIX_ACTIVATION
    n_in: int = 1
    n_out: int = 1

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise ValueError(f"mask must be square, got {mask.shape}")
        n = mask.shape[0]
        w = np.array(self.weights, dtype=float)
        if w.shape != (n, n):
            raise ValueError(f"weights shape {w.shape} does not match mask {mask.shape}")
        if self.n_in < 0 or self.n_out < 0 or self.n_in + self.n_out > n:
            raise ValueError(
                f"clamp widths ({self.n_in}, {self.n_out}) exceed {n} nodes"
            )
        w = np.where(mask, w, 0.0)
        w.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mask", mask)

    @property
    def n_nodes(self) -> int:
        return self.mask.shape[0]

    @property
    def n_edges(self) -> int:
        """Number of structurally present connections."""
        return int(self.mask.sum())

    @property
    def density(self) -> float:
        return self.n_edges / self.n_nodes**2


@dataclass
class PcgState:
    """Flat activation vector plus the clamp mode it was settled under."""

    activations: Array
    clamp: str

    def __post_init__(self):
        self.activations = np.asarray(self.activations, dtype=float)
        if self.activations.ndim != 1:
            raise ValueError("activations must be a flat vector")
        if self.clamp not in (TRAINING, TESTING):
            raise ValueError(f"clamp must be {TRAINING!r} or {TESTING!r}")


def clamp_mask(model: PcgModel, clamp: str) -> Array:
    """Boolean vector marking the nodes held fixed under the given clamp."""
    fixed = np.zeros(model.n_nodes, dtype=bool)
    fixed[: model.n_in] = True
    if clamp == TRAINING and model.n_out:
        fixed[model.n_nodes - model.n_out:] = True
    return fixed


# ---------------------------------------------------------------------------
# Weight evaluation: dense matmul or compressed-row sparse kernels
# ---------------------------------------------------------------------------

class _DenseEval:
    def __init__(self, model: PcgModel):
        self._w = model.weights
        self._ops = model.n_nodes ** 2

    def matvec(self, x: Array, counter: MaddCounter | None) -> Array:
        if counter is not None:
            counter.add(self._ops)
        return self._w @ x

    def rmatvec(self, u: Array, counter: MaddCounter | None) -> Array:
        if counter is not None:
            counter.add(self._ops)
        return self._w.T @ u


class _SparseEval:
    """Row-major compressed storage over the unmasked entries.

    Each matvec multiplies every stored entry exactly once, so the madd
    count per product is the edge count d.
    """

    def __init__(self, model: PcgModel):
        rows, cols = np.nonzero(model.mask)
        self.rows = rows
        self.cols = cols
        self.data = model.weights[rows, cols]
        self._n = model.n_nodes

    @property
    def nnz(self) -> int:
        return self.data.size

    def matvec(self, x: Array, counter: MaddCounter | None) -> Array:
        if counter is not None:
            counter.add(self.nnz)
        return np.bincount(self.rows, weights=self.data * x[self.cols], minlength=self._n)

    def rmatvec(self, u: Array, counter: MaddCounter | None) -> Array:
        if counter is not None:
            counter.add(self.nnz)
        return np.bincount(self.cols, weights=self.data * u[self.rows], minlength=self._n)


def _evaluator(model: PcgModel, evaluation: str):
    if evaluation == "dense":
        return _DenseEval(model)
    if evaluation == "sparse":
        return _SparseEval(model)
    if evaluation == "auto":
        if model.density < SPARSE_DENSITY_THRESHOLD:
            return _SparseEval(model)
        return _DenseEval(model)
    raise ValueError(f"evaluation must be 'auto', 'dense', or 'sparse', got {evaluation!r}")


def _check_state(model: PcgModel, state: PcgState) -> None:
    if state.activations.shape != (model.n_nodes,):
        raise ValueError(
            f"state has {state.activations.shape[0]} nodes, model has {model.n_nodes}"
        )


def _errors(model: PcgModel, a: Array, ev, counter):
    act = model.activation
    if model.convention == MATRIX_ACTIVATION:
        pre = ev.matvec(a, counter)
        return a - act.f(pre), pre
    return a - ev.matvec(act.f(a), counter), None


def predictions(model: PcgModel, state: PcgState, evaluation: str = "auto") -> Array:
    """Every node's prediction from its unmasked incoming connections."""
    _check_state(model, state)
    eps, _ = _errors(model, state.activations, _evaluator(model, evaluation), None)
    return state.activations - eps


def energy(model: PcgModel, state: PcgState, evaluation: str = "auto",
           counter: MaddCounter | None = None) -> float:
    """Total energy: half the summed squared prediction errors over all nodes."""
    _check_state(model, state)
    eps, _ = _errors(model, state.activations, _evaluator(model, evaluation), counter)
    return 0.5 * float(eps @ eps)


def _activation_gradient(model: PcgModel, a: Array, fixed: Array, ev, counter) -> Array:
    act = model.activation
    eps, pre = _errors(model, a, ev, counter)
    if model.convention == MATRIX_ACTIVATION:
        g = eps - ev.rmatvec(eps * act.df(pre), counter)
    else:
        g = eps - act.df(a) * ev.rmatvec(eps, counter)
    g[fixed] = 0.0
    return g


def activation_gradient(model: PcgModel, state: PcgState, evaluation: str = "auto",
                        counter: MaddCounter | None = None) -> Array:
    """Energy gradient over all nodes, zeroed at the clamped entries."""
    _check_state(model, state)
    fixed = clamp_mask(model, state.clamp)
    return _activation_gradient(
        model, state.activations, fixed, _evaluator(model, evaluation), counter
    )


def weight_gradient(model: PcgModel, state: PcgState, evaluation: str = "auto",
                    counter: MaddCounter | None = None) -> Array:
    """Energy gradient over the weight matrix; masked entries are exactly zero."""
    _check_state(model, state)
    a = state.activations
    act = model.activation
    ev = _evaluator(model, evaluation)
    eps, pre = _errors(model, a, ev, counter)
    if model.convention == MATRIX_ACTIVATION:
        u, v = eps * act.df(pre), a
    else:
        u, v = eps, act.f(a)

    if isinstance(ev, _SparseEval):
        grad = np.zeros((model.n_nodes, model.n_nodes))
        if counter is not None:
            counter.add(ev.nnz)
        grad[ev.rows, ev.cols] = -u[ev.rows] * v[ev.cols]
        return grad
    if counter is not None:
        counter.add(model.n_nodes ** 2)
    return np.where(model.mask, -np.outer(u, v), 0.0)


def zero_init(model: PcgModel, x, y=None) -> PcgState:
    """All unclamped nodes start at zero."""
    a = np.zeros(model.n_nodes)
    a[: model.n_in] = check_vector(x, model.n_in, "x")
    if y is None:
        return PcgState(a, TESTING)
    a[model.n_nodes - model.n_out:] = check_vector(y, model.n_out, "y")
    return PcgState(a, TRAINING)


def gaussian_init(model: PcgModel, x, y=None, rng=None, scale: float = 1.0) -> PcgState:
    """Unclamped nodes start i.i.d. Gaussian with the given scale."""
    if rng is None:
        raise ValueError("gaussian init needs an explicit rng for reproducibility")
    state = zero_init(model, x, y)
    free = ~clamp_mask(model, state.clamp)
    state.activations[free] = scale * rng.standard_normal(int(free.sum()))
    return state


def is_feedforward_mask(mask: Array, layers: LayerSpec) -> bool:
    """True when every connection goes from a strictly earlier layer.

    Such masks (forward and forward-skip blocks only) admit a forward-pass
    node ordering, which initialization and exact evaluation rely on.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (layers.n_nodes, layers.n_nodes):
        raise ValueError(f"mask shape {mask.shape} does not match the partition")
    slices = layer_slices(layers)
    for l, row in enumerate(slices):
        for k in range(l, len(slices)):
            if mask[row, slices[k]].any():
                return False
    return True


def feedforward_init(model: PcgModel, x, layers: LayerSpec, y=None) -> PcgState:
    """Initialize nodes in layer order so every hidden error starts at zero.

    Requires the mask to be strictly lower-block-triangular with respect
    to the given layer partition (forward and forward-skip connections
    only); each node's initial value then uses all of its unmasked
    incoming weights.

    Raises:
        FeedforwardInitError: the mask has within-layer, backward, or
            self connections, so no forward-pass ordering exists.
    """
    if layers.n_nodes != model.n_nodes:
        raise ValueError(
            f"partition covers {layers.n_nodes} nodes, model has {model.n_nodes}"
        )
    if layers.n_in != model.n_in or layers.n_out != model.n_out:
        raise ValueError("partition clamp widths do not match the model")
    if not is_feedforward_mask(model.mask, layers):
        raise FeedforwardInitError(
            "mask has within-layer, backward, or self connections; "
            "forward-pass initialization needs a strictly forward mask"
        )
    slices = layer_slices(layers)

    act = model.activation
    a = np.zeros(model.n_nodes)
    a[slices[0]] = check_vector(x, model.n_in, "x")
    for row in slices[1:]:
        if model.convention == MATRIX_ACTIVATION:
            a[row] = act.f(model.weights[row] @ a)
        else:
            a[row] = model.weights[row] @ act.f(a)
    if y is None:
        return PcgState(a, TESTING)
    a[slices[-1]] = check_vector(y, model.n_out, "y")
    return PcgState(a, TRAINING)


def infer(model: PcgModel, x, y=None, config: InferenceConfig | None = None,
          layers: LayerSpec | None = None, rng=None,
          counter: MaddCounter | None = None) -> PcgState:
    """Settle the unclamped nodes by synchronous gradient descent.

    One inference step updates every unclamped node from the pre-step
    snapshot. Feedforward initialization needs the layer partition that
    makes the mask forward (``layers``); on non-forward masks it raises
    FeedforwardInitError and the caller chooses a fallback.

    Raises:
        DivergenceError: a non-finite activation appeared during descent.
    """
    config = config or InferenceConfig()
    if config.solver == "exact":
        raise ValueError(
            "graphs have no exact solver; extract the layered model for that"
        )
    if config.init == "feedforward":
        if layers is None:
            raise ValueError("feedforward init needs the layer partition")
        state = feedforward_init(model, x, layers, y)
    elif config.init == "zero":
        state = zero_init(model, x, y)
    else:
        state = gaussian_init(model, x, y, rng=rng)

    a = state.activations.copy()
    fixed = clamp_mask(model, state.clamp)
    free = ~fixed
    ev = _evaluator(model, config.evaluation)

    # divergence shows up as overflow before the finiteness check trips;
    # the DivergenceError is the signal, not the numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(config.max_steps):
            g = _activation_gradient(model, a, fixed, ev, counter)
            if float(np.max(np.abs(g))) <= config.stop_tolerance:
                break
            a[free] = a[free] - config.step_size * g[free]
            if not np.all(np.isfinite(a[free])):
                raise DivergenceError(step)
    return PcgState(a, state.clamp)


def update_weights(model: PcgModel, gradient: Array, learning_rate: float) -> PcgModel:
    """Apply one weight-gradient step; the mask is re-applied on write."""
    gradient = np.asarray(gradient, dtype=float)
    if gradient.shape != model.weights.shape:
        raise ValueError(f"gradient shape {gradient.shape} does not match weights")
    new_w = np.where(model.mask, model.weights - learning_rate * gradient, 0.0)
    return PcgModel(new_w, model.mask, model.activation, model.convention,
                    model.n_in, model.n_out)


def learn_step(model: PcgModel, state: PcgState, learning_rate: float) -> PcgModel:
    """One gradient step on the weights at the settled training state."""
    if state.clamp != TRAINING:
        raise ValueError("learning requires a training-mode state")
    return update_weights(model, weight_gradient(model, state), learning_rate)


# ---------------------------------------------------------------------------
# Hierarchical embedding: the layered model as a graph
# ---------------------------------------------------------------------------

def hierarchical_mask(layers: LayerSpec) -> Array:
    """Mask with ones exactly on the subdiagonal blocks (layer l-1 -> l)."""
    n = layers.n_nodes
    mask = np.zeros((n, n), dtype=bool)
    slices = layer_slices(layers)
    for l in range(1, len(slices)):
        mask[slices[l], slices[l - 1]] = True
    return mask


def hierarchical_embed(model: PcnModel) -> PcgModel:
    """Place the layered weight matrices on the subdiagonal blocks of W.

    The resulting graph has the layered model's energy (up to a constant
    contributed by the clamped input nodes) and identical inference and
    learning dynamics at the mapped indices.
    """
    layers = model.layers
    n = layers.n_nodes
    w = np.zeros((n, n))
    slices = layer_slices(layers)
    for l in range(1, len(slices)):
        w[slices[l], slices[l - 1]] = model.weights[l - 1]
    return PcgModel(w, hierarchical_mask(layers), model.activation,
                    model.convention, layers.n_in, layers.n_out)


def extract_pcn(model: PcgModel, layers: LayerSpec) -> PcnModel:
    """Recover the layered model from a hierarchically masked graph.

    Raises:
        ValueError: the graph's mask is not exactly the hierarchical
            pattern for the given partition.
    """
    if layers.n_nodes != model.n_nodes:
        raise ValueError(
            f"partition covers {layers.n_nodes} nodes, model has {model.n_nodes}"
        )
    if not np.array_equal(model.mask, hierarchical_mask(layers)):
        raise ValueError("mask is not the hierarchical pattern for this partition")
    slices = layer_slices(layers)
    weights = tuple(
        model.weights[slices[l], slices[l - 1]].copy() for l in range(1, len(slices))
    )
    return PcnModel(layers, weights, model.activation, model.convention)
