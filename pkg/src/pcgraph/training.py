"""Seeded weight initialization, the inference-learning loop, and evaluation.

Training alternates two minimizations per sample: settle the activations
with input and target clamped (inference), then take one gradient step on
the weights at the settled state (learning). A batch is a set of
independent samples whose weight gradients are averaged before the step.

Samples within a batch may be fanned out to worker threads; gradients are
always reduced in sample order, so results are identical for any worker
count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import pcg, pcn
from .core import (
    MATRIX_ACTIVATION,
    Activation,
    Array,
    DivergenceError,
    LayerSpec,
    MaddCounter,
    activation as activation_by_name,
)
from .pcn import InferenceConfig
from .topology import build_mask


@dataclass(frozen=True)
class MetricsRow:
    """One training epoch: settled energy, accuracies, time, counted work."""

    epoch: int
    energy: float
    train_acc: float
    test_acc: float
    seconds: float
    madds: int


def _resolve_activation(act) -> Activation:
    return act if isinstance(act, Activation) else activation_by_name(act)


def init_weights(layers: LayerSpec, kinds, activation="tanh",
                 convention: str = MATRIX_ACTIVATION, weight_scale: float = 1.0,
                 rng=None) -> pcg.PcgModel:
    """Masked Gaussian weights with per-row std ``weight_scale / sqrt(fan_in)``.

    Fan-in is the number of unmasked incoming connections of each node,
    which keeps initial predictions in the responsive range of the
    activation regardless of the mask's density.
    """
    if rng is None:
        raise ValueError("weight initialization needs an explicit rng")
    if weight_scale <= 0:
        raise ValueError("weight_scale must be positive")
    mask = build_mask(layers, kinds)
    n = layers.n_nodes
    w = rng.standard_normal((n, n))
    fan_in = mask.sum(axis=1)
    w *= weight_scale / np.sqrt(np.maximum(fan_in, 1))[:, None]
    return pcg.PcgModel(w, mask, _resolve_activation(activation), convention,
                        layers.n_in, layers.n_out)


def _resolve_init(model: pcg.PcgModel, layers: LayerSpec,
                  config: InferenceConfig) -> InferenceConfig:
    # Forward-pass init is undefined on non-forward masks; fall back to zero.
    if config.init == "feedforward" and not pcg.is_feedforward_mask(model.mask, layers):
        return InferenceConfig(config.max_steps, config.step_size,
                               config.stop_tolerance, config.solver, "zero",
                               config.evaluation)
    return config


def _sample_gradient(model, x, y, config, layers, rng, counter):
    state = pcg.infer(model, x, y, config, layers=layers, rng=rng, counter=counter)
    grad = pcg.weight_gradient(model, state, config.evaluation, counter)
    settled = pcg.energy(model, state, config.evaluation, counter)
    return grad, settled


def batch_gradient(model: pcg.PcgModel, xs, ys, config: InferenceConfig,
                   layers: LayerSpec, rng=None, counter: MaddCounter | None = None,
                   workers: int = 1):
    """Mean weight gradient over a batch, reduced in sample order.

    Returns ``(mean_gradient, per_sample_energies)``. Per-sample work is
    independent, so it can run on ``workers`` threads; the reduction
    order is fixed by the batch order either way.
    """
    n = len(xs)
    if n == 0:
        raise ValueError("empty batch")
    if config.init == "gaussian" and rng is None:
        raise ValueError("gaussian init needs an explicit rng for reproducibility")
    # Gaussian init draws happen here, in batch order, so worker scheduling
    # cannot reorder rng consumption.
    rngs = rng.spawn(n) if config.init == "gaussian" else [None] * n

    def job(i):
        return _sample_gradient(model, xs[i], ys[i], config, layers, rngs[i], counter)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(n)))
    else:
        results = [job(i) for i in range(n)]

    total = results[0][0].copy()
    for grad, _ in results[1:]:
        total += grad
    return total / n, [e for _, e in results]


def train_model(model: pcg.PcgModel, layers: LayerSpec, x_rows: Array, y_rows: Array,
                config: InferenceConfig, epochs: int, batch_size: int,
                learning_rate: float, rng, workers: int = 1,
                counter: MaddCounter | None = None, on_epoch=None):
    """Run inference learning for ``epochs`` passes over the data.

    Each epoch reshuffles the sample order (seeded), settles each batch,
    and applies the averaged weight step. ``on_epoch(epoch, model,
    mean_energy, seconds, madds)`` fires after each epoch when given.

    Returns ``(trained_model, mean_energy_per_epoch)``.

    Raises:
        DivergenceError: inference produced a non-finite value; the
            message carries the epoch, batch, and step.
    """
    n = len(x_rows)
    if n == 0:
        raise ValueError("training needs at least one sample")
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    config = _resolve_init(model, layers, config)
    counter = counter if counter is not None else MaddCounter()
    energies = []

    for epoch in range(epochs):
        started = time.perf_counter()
        count_before = counter.count
        order = rng.permutation(n)
        epoch_energies = []
        for bi, first in enumerate(range(0, n, batch_size)):
            idx = order[first:first + batch_size]
            # non-finite values are a handled condition here (DivergenceError),
            # so numpy's overflow warnings on that path are just noise
            with np.errstate(over="ignore", invalid="ignore"):
                try:
                    grad, batch_energies = batch_gradient(
                        model, x_rows[idx], y_rows[idx], config, layers,
                        rng=rng, counter=counter, workers=workers,
                    )
                except DivergenceError as err:
                    raise DivergenceError(
                        err.step,
                        f"diverged at epoch {epoch}, batch {bi}, "
                        f"inference step {err.step}",
                    ) from None
                epoch_energies.extend(batch_energies)
                model = pcg.update_weights(model, grad, learning_rate)
            if not np.all(np.isfinite(model.weights)):
                raise DivergenceError(
                    0, f"weights diverged at epoch {epoch}, batch {bi}"
                )
        mean_energy = float(np.mean(epoch_energies))
        energies.append(mean_energy)
        if on_epoch is not None:
            on_epoch(epoch, model, mean_energy,
                     time.perf_counter() - started, counter.count - count_before)
    return model, energies


def model_outputs(model: pcg.PcgModel, layers: LayerSpec, x_rows: Array,
                  config: InferenceConfig | None = None, solver: str = "auto",
                  rng=None) -> Array:
    """Testing-phase outputs for each input row, shape ``(n, n_out)``.

    ``solver="auto"`` evaluates hierarchically masked models by the exact
    forward substitution and everything else by gradient-descent
    inference; ``"exact"`` and ``"gradient-descent"`` force one route.
    """
    config = config or InferenceConfig()
    hierarchical = np.array_equal(model.mask, pcg.hierarchical_mask(layers))
    if solver == "auto":
        solver = "exact" if hierarchical else "gradient-descent"
    if solver == "exact":
        if not hierarchical:
            raise ValueError("the exact solver needs a hierarchical mask")
        layered = pcg.extract_pcn(model, layers)
        exact = InferenceConfig(solver="exact")
        return np.stack(
            [pcn.infer(layered, x, config=exact).activations[-1] for x in x_rows]
        )
    if solver != "gradient-descent":
        raise ValueError(f"unknown solver {solver!r}")
    config = _resolve_init(model, layers, config)
    if config.init == "gaussian" and rng is None:
        raise ValueError("gaussian init needs an explicit rng for reproducibility")
    out = slice(model.n_nodes - model.n_out, model.n_nodes)
    rows = []
    for x in x_rows:
        sample_rng = rng.spawn(1)[0] if config.init == "gaussian" else None
        state = pcg.infer(model, x, config=config, layers=layers, rng=sample_rng)
        rows.append(state.activations[out].copy())
    return np.stack(rows)


def accuracy_and_error(outputs: Array, y_rows: Array) -> tuple[float, float]:
    """Classification accuracy and mean squared output error.

    Single-output targets are read as class 1 when the value reaches 0.5;
    wider targets are read by argmax. The error is the mean over samples
    of half the squared output residual, matching the energy convention.
    """
    outputs = np.asarray(outputs, dtype=float)
    y_rows = np.asarray(y_rows, dtype=float)
    if outputs.shape != y_rows.shape:
        raise ValueError(f"outputs {outputs.shape} do not match targets {y_rows.shape}")
    if outputs.shape[1] == 1:
        hits = (outputs[:, 0] >= 0.5) == (y_rows[:, 0] >= 0.5)
    else:
        hits = np.argmax(outputs, axis=1) == np.argmax(y_rows, axis=1)
    error = 0.5 * float(np.mean(np.sum((y_rows - outputs) ** 2, axis=1)))
    return float(np.mean(hits)), error


def evaluate_model(model: pcg.PcgModel, layers: LayerSpec, x_rows, y_rows,
                   config: InferenceConfig | None = None,
                   solver: str = "auto") -> tuple[float, float]:
    """Accuracy and mean output error of a model on a labeled dataset."""
    outputs = model_outputs(model, layers, np.asarray(x_rows, dtype=float),
                            config, solver)
    return accuracy_and_error(outputs, y_rows)
