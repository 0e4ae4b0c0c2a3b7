import numpy as np
import pytest

from pcgraph.core import (
    ACTIVATIONS,
    LayerSpec,
    activation,
    flat_to_layer,
    flatten_activations,
    layer_offsets,
    layer_slices,
    layer_to_flat,
    split_activations,
)


def test_layer_offsets_examples():
    assert layer_offsets(LayerSpec((2, 3, 3, 2))) == [0, 2, 5, 8, 10]
    assert layer_offsets(LayerSpec((1, 1))) == [0, 1, 2]
    assert layer_offsets(LayerSpec((4, 8, 3))) == [0, 4, 12, 15]


def test_layer_spec_validation():
    with pytest.raises(ValueError):
        LayerSpec((1,))
    with pytest.raises(ValueError):
        LayerSpec((2, 0, 2))
    spec = LayerSpec((2, 3, 3, 2))
    assert spec.depth == 3
    assert spec.n_nodes == 10
    assert spec.n_in == 2 and spec.n_out == 2


def test_flat_to_layer_examples():
    spec = LayerSpec((2, 3, 3, 2))
    # derived by enumerating the per-layer index sets from the offsets:
    # layer 0 = {1,2}, layer 1 = {3,4,5}, layer 2 = {6,7,8}, layer 3 = {9,10}
    assert flat_to_layer(3, spec) == (1, 1)
    assert flat_to_layer(10, spec) == (3, 2)
    assert flat_to_layer(1, spec) == (0, 1)
    assert flat_to_layer(1, LayerSpec((5, 2))) == (0, 1)


def test_flat_to_layer_range_errors():
    spec = LayerSpec((2, 3, 3, 2))
    for bad in (0, -1, 11):
        with pytest.raises(ValueError):
            flat_to_layer(bad, spec)


def test_layer_to_flat_examples():
    spec = LayerSpec((2, 3, 3, 2))
    assert layer_to_flat(1, 1, spec) == 3
    assert layer_to_flat(3, 2, spec) == 10
    assert layer_to_flat(0, 1, spec) == 1


def test_layer_to_flat_range_errors():
    spec = LayerSpec((2, 3, 3, 2))
    with pytest.raises(ValueError):
        layer_to_flat(4, 1, spec)
    with pytest.raises(ValueError):
        layer_to_flat(1, 4, spec)
    with pytest.raises(ValueError):
        layer_to_flat(1, 0, spec)


def test_index_round_trip_and_partition(rng):
    # round trip over every node of random specs, and the per-layer index
    # sets must partition {1..N}
    for _ in range(25):
        sizes = tuple(int(n) for n in rng.integers(1, 7, size=rng.integers(2, 6)))
        spec = LayerSpec(sizes)
        seen = []
        for alpha in range(1, spec.n_nodes + 1):
            layer, i = flat_to_layer(alpha, spec)
            assert 0 <= layer <= spec.depth
            assert 1 <= i <= sizes[layer]
            assert layer_to_flat(layer, i, spec) == alpha
            seen.append((layer, i))
        assert len(set(seen)) == spec.n_nodes
        assert sorted(layer_to_flat(l, i, spec) for l, i in seen) == list(
            range(1, spec.n_nodes + 1)
        )


def test_layer_slices_cover():
    spec = LayerSpec((2, 3, 3, 2))
    slices = layer_slices(spec)
    flat = np.arange(10)
    assert [list(flat[s]) for s in slices] == [[0, 1], [2, 3, 4], [5, 6, 7], [8, 9]]


def test_flatten_split_round_trip(rng):
    spec = LayerSpec((3, 5, 2))
    parts = [rng.standard_normal(n) for n in spec.sizes]
    flat = flatten_activations(parts)
    back = split_activations(spec, flat)
    for a, b in zip(parts, back):
        assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        split_activations(spec, np.zeros(11))


def test_activation_derivatives_match_finite_differences(rng):
    h = 1e-5
    for name, act in ACTIVATIONS.items():
        x = rng.uniform(-4, 4, size=100)
        if name == "relu":
            # the kink has no derivative; stay away from it
            x = x[np.abs(x) > h]
        fd = (act.f(x + h) - act.f(x - h)) / (2 * h)
        err = np.abs(act.df(x) - fd) / np.maximum(np.abs(fd), 1.0)
        assert err.max() < 1e-7, name


def test_relu_derivative_at_zero_is_zero():
    act = activation("relu")
    assert act.df(np.array([0.0]))[0] == 0.0


def test_sigmoid_stable_at_extremes():
    # gradual underflow to 0 is fine; overflow or nan is not
    act = activation("sigmoid")
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        out = act.f(np.array([-800.0, 800.0]))
        dout = act.df(np.array([-800.0, 800.0]))
    assert np.allclose(out, [0.0, 1.0])
    assert np.all(np.isfinite(dout))


def test_unknown_activation_rejected():
    with pytest.raises(ValueError, match="unknown activation"):
        activation("softplus")
