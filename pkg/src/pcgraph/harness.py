"""Config-driven runs: dataset to trained checkpoint plus metrics file.

Everything here is deterministic given the config's seed: the train/test
split, the weight draw, and the training loop all consume one seeded
generator in a fixed order. The metrics file gains one row per epoch; its
``seconds`` column is measured wall-clock time (the only field that can
differ between otherwise identical runs), and ``madds`` counts the
multiply-accumulate work of the epoch's training-phase kernels.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .config import ConfigError, RunConfig
from .core import MaddCounter
from .datasets import load_dataset, split_records
from .pcn import InferenceConfig
from .training import MetricsRow, evaluate_model, init_weights, train_model

METRICS_HEADER = "epoch,energy,train_acc,test_acc,seconds,madds"


def write_metrics(path, rows: list[MetricsRow]) -> None:
    """Write the per-epoch metrics CSV with round-trip float formatting."""
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    lines = [METRICS_HEADER]
    for row in rows:
        lines.append(
            f"{row.epoch},{repr(row.energy)},{repr(row.train_acc)},"
            f"{repr(row.test_acc)},{row.seconds:.6f},{row.madds}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _evaluation_config(inference: InferenceConfig) -> InferenceConfig:
    # Accuracy evaluation must be deterministic; gaussian init is not.
    if inference.init != "gaussian":
        return inference
    return InferenceConfig(inference.max_steps, inference.step_size,
                           inference.stop_tolerance, "gradient-descent",
                           "zero", inference.evaluation)


def train_from_config(cfg: RunConfig) -> tuple[Checkpoint, list[MetricsRow]]:
    """Run the configured training and write checkpoint and metrics files.

    Per epoch: settle each batch in training mode, apply the averaged
    weight step, then score train and test accuracy with the updated
    weights (hierarchical masks by exact evaluation, anything else by
    settling in testing mode).

    Raises:
        ConfigError: invalid config or a dataset that does not match it.
        DivergenceError: inference produced non-finite values; the
            message names the epoch, batch, and step.
    """
    cfg.validate_for_training()
    layers = cfg.layers()
    try:
        x_rows, y_rows = load_dataset(cfg.dataset)
    except OSError as err:
        raise ConfigError(f"cannot read dataset {cfg.dataset!r}: {err}") from None
    if len(x_rows) == 0:
        raise ConfigError(f"dataset {cfg.dataset!r} has no data rows")
    if x_rows.shape[1] != layers.n_in or y_rows.shape[1] != layers.n_out:
        raise ConfigError(
            f"dataset widths ({x_rows.shape[1]}, {y_rows.shape[1]}) do not match "
            f"model widths ({layers.n_in}, {layers.n_out})"
        )

    rng = np.random.default_rng(cfg.seed)
    x_train, y_train, x_test, y_test = split_records(x_rows, y_rows, cfg.split, rng)
    model = init_weights(layers, cfg.connections, cfg.activation,
                         cfg.convention, cfg.weight_scale, rng)
    inference = cfg.inference_config()
    eval_config = _evaluation_config(inference)
    counter = MaddCounter()
    rows: list[MetricsRow] = []

    def on_epoch(epoch, current, mean_energy, seconds, madds):
        train_acc, _ = evaluate_model(current, layers, x_train, y_train, eval_config)
        test_acc, _ = evaluate_model(current, layers, x_test, y_test, eval_config)
        rows.append(MetricsRow(epoch, mean_energy, train_acc, test_acc,
                               seconds, madds))

    model, _ = train_model(model, layers, x_train, y_train, inference,
                           cfg.epochs, cfg.batch_size, cfg.learning_rate,
                           rng, cfg.workers, counter, on_epoch)

    ckpt = Checkpoint(layers, cfg.connections, model, cfg.epochs, cfg.seed)
    save_checkpoint(ckpt, cfg.checkpoint)
    write_metrics(cfg.metrics, rows)
    return ckpt, rows


def evaluate_checkpoint(ckpt: Checkpoint, x_rows, y_rows,
                        inference: InferenceConfig | None = None,
                        solver: str = "auto") -> tuple[float, float]:
    """Accuracy and mean output error of a saved model on a dataset.

    Hierarchical (forward-only) models are evaluated by the exact solver;
    anything else settles by gradient descent in testing mode.
    """
    x_rows = np.asarray(x_rows, dtype=float)
    y_rows = np.asarray(y_rows, dtype=float)
    if x_rows.shape[1] != ckpt.layers.n_in or y_rows.shape[1] != ckpt.layers.n_out:
        raise ConfigError(
            f"dataset widths ({x_rows.shape[1]}, {y_rows.shape[1]}) do not match "
            f"checkpoint widths ({ckpt.layers.n_in}, {ckpt.layers.n_out})"
        )
    inference = _evaluation_config(inference or InferenceConfig())
    return evaluate_model(ckpt.model, ckpt.layers, x_rows, y_rows,
                          inference, solver)
