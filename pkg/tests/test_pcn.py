import numpy as np
import pytest

from conftest import make_pcn
from pcgraph import fnn
from pcgraph.core import DivergenceError, LayerSpec, activation
from pcgraph.pcn import (
    InferenceConfig,
    PcnModel,
    PcnState,
    activation_gradients,
    energy,
    errors,
    feedforward_init,
    gaussian_init,
    infer,
    learn_step,
    to_fnn,
    weight_gradients,
    zero_init,
)
from pcgraph.verify import fd_pcn_activation_gradients, fd_pcn_weight_gradients


def naive_energy(model, state):
    """Per-neuron double-loop oracle for the vectorized energy."""
    total = 0.0
    acts = state.activations
    for l, w in enumerate(model.weights):
        for i in range(w.shape[0]):
            pre = 0.0
            for j in range(w.shape[1]):
                if model.convention == "matrix-activation":
                    pre += w[i, j] * acts[l][j]
                else:
                    pre += w[i, j] * float(model.activation.f(np.array(acts[l][j])))
            mu = float(model.activation.f(np.array(pre))) \
                if model.convention == "matrix-activation" else pre
            total += (acts[l + 1][i] - mu) ** 2
    return 0.5 * total


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------

def test_energy_zero_weights_identity_training():
    spec = LayerSpec((2, 3, 2))
    model = PcnModel(spec, (np.zeros((3, 2)), np.zeros((2, 3))), activation("identity"))
    y = np.array([1.5, -2.0])
    state = PcnState([np.array([0.3, 0.7]), np.zeros(3), y.copy()], "training")
    assert energy(model, state) == pytest.approx(0.5 * np.sum(y**2), abs=1e-15)


@pytest.mark.parametrize("convention", ["matrix-activation", "activation-matrix"])
def test_energy_zero_after_feedforward_testing(rng, convention):
    model = make_pcn(rng, (3, 4, 2), "tanh", convention)
    state = feedforward_init(model, rng.standard_normal(3))
    assert energy(model, state) == 0.0
    assert all(np.all(e == 0.0) for e in errors(model, state))


@pytest.mark.parametrize("convention", ["matrix-activation", "activation-matrix"])
def test_energy_matches_per_neuron_oracle(rng, convention):
    model = make_pcn(rng, (2, 2, 2), "tanh", convention, scale=0.7)
    state = PcnState([rng.standard_normal(2) for _ in range(3)], "training")
    assert energy(model, state) == pytest.approx(naive_energy(model, state), abs=1e-15)


def test_energy_dimension_mismatch():
    model = PcnModel(LayerSpec((2, 2)), (np.eye(2),), activation("identity"))
    with pytest.raises(ValueError):
        energy(model, PcnState([np.zeros(2), np.zeros(3)], "testing"))


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def test_activation_gradients_zero_at_energy_minimum(rng):
    model = make_pcn(rng, (3, 5, 4, 2))
    state = feedforward_init(model, rng.standard_normal(3))
    for g in activation_gradients(model, state):
        assert np.all(g == 0.0)


def test_activation_gradient_hand_computed_chain():
    # identity activation, unit weights, activations (x=1, a1=2, y=0):
    # errors are e1 = 2-1 = 1 and e2 = 0-2 = -2, so the middle-layer
    # gradient is e1 - e2 * f' * w = 1 + 2 = 3
    model = PcnModel(LayerSpec((1, 1, 1)),
                     (np.array([[1.0]]), np.array([[1.0]])),
                     activation("identity"))
    state = PcnState([np.array([1.0]), np.array([2.0]), np.array([0.0])], "training")
    (grad,) = activation_gradients(model, state)
    assert grad[0] == 3.0
    (fd,) = fd_pcn_activation_gradients(model, state)
    assert grad[0] == pytest.approx(fd[0], rel=1e-8)


@pytest.mark.parametrize("convention", ["matrix-activation", "activation-matrix"])
@pytest.mark.parametrize("clamp", ["training", "testing"])
def test_activation_gradients_match_finite_differences(rng, convention, clamp):
    for act in ("tanh", "sigmoid"):
        model = make_pcn(rng, (3, 4, 3, 2), act, convention)
        state = PcnState([rng.standard_normal(n) for n in (3, 4, 3, 2)], clamp)
        grads = activation_gradients(model, state)
        fds = fd_pcn_activation_gradients(model, state)
        assert len(grads) == (2 if clamp == "training" else 3)
        for g, fd in zip(grads, fds):
            assert np.max(np.abs(g - fd)) < 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_testing_gradient_at_top_is_the_error(rng):
    model = make_pcn(rng, (2, 3, 2))
    state = PcnState([rng.standard_normal(n) for n in (2, 3, 2)], "testing")
    top = activation_gradients(model, state)[-1]
    assert np.allclose(top, errors(model, state)[-1], atol=1e-15)


def test_weight_gradients_zero_at_energy_minimum(rng):
    model = make_pcn(rng, (3, 4, 2))
    state = feedforward_init(model, rng.standard_normal(3))
    for g in weight_gradients(model, state):
        assert np.all(g == 0.0)


@pytest.mark.parametrize("convention", ["matrix-activation", "activation-matrix"])
def test_weight_gradients_match_finite_differences(rng, convention):
    for act in ("tanh", "sigmoid"):
        model = make_pcn(rng, (3, 4, 3, 2), act, convention)
        state = PcnState([rng.standard_normal(n) for n in (3, 4, 3, 2)], "training")
        for g, fd in zip(weight_gradients(model, state),
                         fd_pcn_weight_gradients(model, state)):
            assert np.max(np.abs(g - fd)) < 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_weight_gradient_activation_matrix_closed_form():
    # error above is 1, f = identity, activation below is 2 -> gradient -2
    model = PcnModel(LayerSpec((1, 1)), (np.array([[0.0]]),), activation("identity"),
                     "activation-matrix")
    state = PcnState([np.array([2.0]), np.array([1.0])], "training")
    (grad,) = weight_gradients(model, state)
    assert grad[0, 0] == -2.0


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("convention", ["matrix-activation", "activation-matrix"])
def test_exact_solver_equals_forward_pass_bitwise(rng, convention):
    for act in ("tanh", "sigmoid", "relu", "identity"):
        model = make_pcn(rng, (4, 7, 5, 3), act, convention)
        x = rng.standard_normal(4)
        solved = infer(model, x, config=InferenceConfig(solver="exact"))
        reference = fnn.forward(to_fnn(model), x)
        assert all(a.tobytes() == b.tobytes()
                   for a, b in zip(solved.activations, reference))


def test_exact_solver_rejects_training_mode(rng):
    model = make_pcn(rng, (2, 3, 2))
    with pytest.raises(ValueError):
        infer(model, np.zeros(2), np.zeros(2), InferenceConfig(solver="exact"))


def test_testing_descent_from_feedforward_init_stops_immediately(rng):
    model = make_pcn(rng, (3, 5, 2))
    x = rng.standard_normal(3)
    init = feedforward_init(model, x)
    settled = infer(model, x, config=InferenceConfig(init="feedforward"))
    assert all(a.tobytes() == b.tobytes()
               for a, b in zip(settled.activations, init.activations))


def test_training_descent_reduces_energy_seed42():
    rng = np.random.default_rng(42)
    model = make_pcn(rng, (2, 3, 2), "tanh")
    x, y = rng.standard_normal(2), rng.standard_normal(2)
    start = feedforward_init(model, x, y)
    settled = infer(model, x, y, InferenceConfig(max_steps=500, step_size=0.1))
    assert settled.clamp == "training"
    assert energy(model, settled) < energy(model, start)


def test_descent_energy_monotone_at_small_step(rng):
    model = make_pcn(rng, (3, 4, 3), "tanh")
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    state = feedforward_init(model, x, y)
    acts = [a.copy() for a in state.activations]
    last = energy(model, state)
    for _ in range(200):
        grads = activation_gradients(model, PcnState(acts, "training"))
        for l, g in zip(range(1, 3), grads):
            acts[l] = acts[l] - 1e-3 * g
        current = energy(model, PcnState(acts, "training"))
        assert current <= last * (1 + 1e-12) + 1e-15
        last = current


def test_clamped_layers_bit_identical_after_infer(rng):
    model = make_pcn(rng, (3, 4, 2))
    x, y = rng.standard_normal(3), rng.standard_normal(2)
    settled = infer(model, x, y, InferenceConfig(max_steps=50, step_size=0.1))
    assert settled.activations[0].tobytes() == x.astype(float).tobytes()
    assert settled.activations[-1].tobytes() == y.astype(float).tobytes()


def test_divergence_raises_with_step_index():
    model = PcnModel(LayerSpec((1, 1, 1)),
                     (np.array([[4.0]]), np.array([[4.0]])),
                     activation("identity"))
    with pytest.raises(DivergenceError) as excinfo:
        infer(model, np.array([1.0]), np.array([0.0]),
              InferenceConfig(max_steps=10000, step_size=1.0, init="zero"))
    assert excinfo.value.step >= 0


def test_gaussian_init_needs_rng(rng):
    model = make_pcn(rng, (2, 3, 2))
    with pytest.raises(ValueError):
        gaussian_init(model, np.zeros(2))
    state = gaussian_init(model, np.zeros(2), rng=rng)
    assert any(np.any(a != 0) for a in state.activations[1:])


def test_inference_config_validation():
    with pytest.raises(ValueError):
        InferenceConfig(max_steps=0)
    with pytest.raises(ValueError):
        InferenceConfig(step_size=-1.0)
    with pytest.raises(ValueError):
        InferenceConfig(stop_tolerance=-1e-9)
    with pytest.raises(ValueError):
        InferenceConfig(solver="newton")
    with pytest.raises(ValueError):
        InferenceConfig(init="warm")


# ---------------------------------------------------------------------------
# learning
# ---------------------------------------------------------------------------

def test_learn_step_identity_when_errors_zero(rng):
    model = make_pcn(rng, (3, 4, 2))
    x = rng.standard_normal(3)
    state = feedforward_init(model, x)
    state = PcnState([a.copy() for a in state.activations], "training")
    stepped = learn_step(model, state, 0.5)
    assert all(np.array_equal(a, b)
               for a, b in zip(stepped.weights, model.weights))


def test_learn_step_zero_rate_is_identity(rng):
    model = make_pcn(rng, (2, 3, 2))
    state = PcnState([rng.standard_normal(n) for n in (2, 3, 2)], "training")
    stepped = learn_step(model, state, 0.0)
    assert all(np.array_equal(a, b)
               for a, b in zip(stepped.weights, model.weights))


def test_learn_step_reduces_energy_at_fixed_state(rng):
    model = make_pcn(rng, (2, 4, 2), "tanh")
    x, y = rng.standard_normal(2), rng.standard_normal(2)
    state = infer(model, x, y, InferenceConfig(max_steps=100, step_size=0.1))
    before = energy(model, state)
    after = energy(learn_step(model, state, 1e-4), state)
    assert after < before


def test_learn_step_rejects_testing_state(rng):
    model = make_pcn(rng, (2, 3, 2))
    state = zero_init(model, np.zeros(2))
    with pytest.raises(ValueError):
        learn_step(model, state, 0.1)


# ---------------------------------------------------------------------------
# feedforward initialization
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("convention", ["matrix-activation", "activation-matrix"])
def test_feedforward_init_training_energy_is_output_residual(rng, convention):
    model = make_pcn(rng, (3, 5, 4, 2), "tanh", convention)
    x, y = rng.standard_normal(3), rng.standard_normal(2)
    state = feedforward_init(model, x, y)
    # output prediction from the independent forward-pass route
    mu_top = fnn.forward(to_fnn(model), x)[-1]
    assert energy(model, state) == pytest.approx(
        0.5 * float(np.sum((y - mu_top) ** 2)), abs=1e-12
    )
    for e in errors(model, state)[:-1]:
        assert np.all(e == 0.0)


def test_feedforward_init_testing_energy_zero(rng):
    model = make_pcn(rng, (3, 4, 2))
    assert energy(model, feedforward_init(model, rng.standard_normal(3))) == 0.0


def test_feedforward_init_with_exact_target_gives_zero_energy(rng):
    model = make_pcn(rng, (3, 4, 2))
    x = rng.standard_normal(3)
    y = fnn.forward(to_fnn(model), x)[-1]
    assert energy(model, feedforward_init(model, x, y)) == 0.0
