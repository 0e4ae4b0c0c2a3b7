import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from pcgraph.datasets import two_moons, xor_dataset
from pcgraph.estimator import PredictiveCodingClassifier


def moons_xy(seed=7, n=120):
    x_rows, y_rows = two_moons(n, 0.1, np.random.default_rng(seed))
    return x_rows, np.argmax(y_rows, axis=1)


def quick_clf(**overrides):
    params = dict(hidden_layers=(8,), epochs=40, batch_size=8,
                  learning_rate=0.1, inference_steps=15, inference_rate=0.2,
                  weight_scale=2.0, random_state=0)
    params.update(overrides)
    return PredictiveCodingClassifier(**params)


def test_fit_predict_on_moons():
    x_rows, labels = moons_xy()
    clf = quick_clf().fit(x_rows, labels)
    assert clf.score(x_rows, labels) >= 0.85
    assert clf.model_.n_edges > 0
    assert len(clf.energy_curve_) == 40
    preds = clf.predict(x_rows)
    assert set(preds) <= set(labels)


def test_string_labels_round_trip():
    x_rows, labels = moons_xy(n=60)
    names = np.array(["lower", "upper"])[labels]
    clf = quick_clf(epochs=10).fit(x_rows, names)
    assert set(clf.predict(x_rows)) <= {"lower", "upper"}
    assert list(clf.classes_) == ["lower", "upper"]


def test_estimator_is_seeded():
    x_rows, labels = moons_xy(n=60)
    a = quick_clf(epochs=5).fit(x_rows, labels)
    b = quick_clf(epochs=5).fit(x_rows, labels)
    assert a.model_.weights.tobytes() == b.model_.weights.tobytes()


def test_get_params_set_params_clone():
    clf = quick_clf(connections=("forward", "lateral"))
    params = clf.get_params()
    assert params["connections"] == ("forward", "lateral")
    assert params["weight_scale"] == 2.0
    cloned = clone(clf)
    assert cloned.get_params() == params
    clf.set_params(epochs=3)
    assert clf.epochs == 3


def test_predict_before_fit_raises():
    with pytest.raises(NotFittedError):
        quick_clf().predict(np.zeros((2, 2)))


def test_feature_width_checked():
    x_rows, labels = moons_xy(n=40)
    clf = quick_clf(epochs=2).fit(x_rows, labels)
    with pytest.raises(ValueError, match="features"):
        clf.predict(np.zeros((3, 5)))


def test_single_class_rejected():
    with pytest.raises(ValueError, match="two classes"):
        quick_clf().fit(np.zeros((4, 2)), np.zeros(4))


def test_works_in_pipeline():
    x_rows, labels = moons_xy(n=80)
    pipe = make_pipeline(StandardScaler(), quick_clf(epochs=15))
    pipe.fit(x_rows, labels)
    assert pipe.score(x_rows, labels) >= 0.8


def test_works_with_cross_val_score():
    from sklearn.model_selection import cross_val_score

    x_rows, labels = moons_xy(n=60)
    scores = cross_val_score(quick_clf(epochs=8), x_rows, labels, cv=2)
    assert scores.shape == (2,)
    assert np.all(scores >= 0.5)


def test_recurrent_topology_trains():
    xs, ys = xor_dataset()
    labels = ys.ravel().astype(int)
    clf = quick_clf(hidden_layers=(4,),
                    connections=("forward", "lateral"),
                    epochs=10, batch_size=4, inference_steps=10)
    clf.fit(xs, labels)
    # lateral blocks exist and stay masked outside their pattern
    assert clf.model_.mask[2, 3]
    assert np.all(clf.model_.weights[~clf.model_.mask] == 0.0)
    assert clf.predict(xs).shape == (4,)


def test_network_outputs_shape_and_error_metric():
    x_rows, labels = moons_xy(n=40)
    clf = quick_clf(epochs=5).fit(x_rows, labels)
    out = clf.network_outputs(x_rows)
    assert out.shape == (40, 2)
    err = clf.mean_output_error(x_rows, labels)
    assert err >= 0.0
