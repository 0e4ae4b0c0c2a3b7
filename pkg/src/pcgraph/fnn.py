"""Plain feedforward network: one forward pass, no learning rule.

Serves two purposes: a usable model in its own right, and the reference
output that testing-phase predictive coding inference is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    MATRIX_ACTIVATION,
    Activation,
    Array,
    LayerSpec,
    check_vector,
    layer_prediction,
    validate_layer_weights,
)


@dataclass(frozen=True)
class FnnModel:
    """Feedforward network: layer widths, weights, activation, convention.

    No bias terms; weight matrix ``l`` has shape ``(n_{l+1}, n_l)``.
    """

    layers: LayerSpec
    weights: tuple[Array, ...]
    activation: Activation
    convention: str = MATRIX_ACTIVATION

    def __post_init__(self):
        object.__setattr__(
            self, "weights", validate_layer_weights(self.layers, self.weights)
        )


def forward(model: FnnModel, x) -> list[Array]:
    """Run the forward pass and return all L+1 layer activations.

    ``out[0]`` is the input, ``out[-1]`` the network output. Under the
    matrix-activation convention each layer is ``f(W a)``; under
    activation-matrix it is ``W f(a)``.
    """
    a = [check_vector(x, model.layers.n_in, "x")]
    for w in model.weights:
        a.append(layer_prediction(w, a[-1], model.activation, model.convention))
    return a
