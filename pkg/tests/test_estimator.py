import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mandpath import gcn
from mandpath.datagen import backwards_astar_generate, shuffle_split
from mandpath.domain import Instance
from mandpath.estimator import NextMandatoryClassifier
from mandpath.graph_core import all_pairs_shortest_paths, random_connected_graph
from mandpath.validation import check_feature_batch, check_instance, check_labels


@pytest.fixture(scope="module")
def setup():
    g = random_connected_graph(7, 3.0, seed=2)
    d = backwards_astar_generate(g, 1e9, max_mandatory=3)
    return g, d


def test_params_round_trip(setup):
    g, _ = setup
    est = NextMandatoryClassifier(graph=g, hidden_width=8, epochs=2)
    params = est.get_params()
    assert params["hidden_width"] == 8 and params["n_conv_layers"] == 3 and params["learning_rate"] == 1e-4
    twin = clone(est)
    assert twin.get_params()["epochs"] == 2 and not hasattr(twin, "model_")
    est.set_params(dropout=0.2)
    assert est.dropout == 0.2


def test_fit_on_dataset_and_score(setup):
    g, d = setup
    train, test = shuffle_split(d, 0.8, seed=0)
    est = NextMandatoryClassifier(graph=g, hidden_width=16, epochs=30, batch_size=32, learning_rate=1e-3)
    est.fit(train)
    assert len(est.loss_curve_) == 30 and est.loss_curve_[-1] < est.loss_curve_[0]
    pred = est.predict(test)
    masks = check_feature_batch(test, 7)[:, :, 2]
    assert masks[np.arange(len(pred)), pred].all()  # restricted argmax
    assert est.score(test) == pytest.approx(np.mean(pred == test.labels))
    assert est.score(test) > 0.5


def test_fit_on_instances_matches_dataset_fit(setup):
    g, d = setup
    sub = d.subset(np.arange(40))
    pairs = list(sub)
    a = NextMandatoryClassifier(graph=g, hidden_width=8, epochs=2, batch_size=8).fit(sub)
    b = NextMandatoryClassifier(graph=g, hidden_width=8, epochs=2, batch_size=8).fit(
        [p.state for p in pairs], [p.label for p in pairs])
    assert a.loss_curve_ == b.loss_curve_
    x = [p.state for p in pairs[:5]]
    assert np.array_equal(a.predict_proba(x), b.predict_proba(x))


def test_unfitted_and_invalid_inputs(setup):
    g, _ = setup
    est = NextMandatoryClassifier(graph=g)
    with pytest.raises(NotFittedError):
        est.predict_proba([Instance(0, 6, frozenset({1}))])
    with pytest.raises(ValueError):
        NextMandatoryClassifier().fit([Instance(0, 1, frozenset({2}))], [2])
    with pytest.raises(ValueError):
        est.fit([Instance(0, 6, frozenset({1, 2}))], [3])  # label outside M


def test_from_model_probe_and_order(setup):
    g, _ = setup
    t = all_pairs_shortest_paths(g)
    est = NextMandatoryClassifier.from_model(gcn.init_model(g, hidden=8, seed=0))
    s = Instance(0, 6, frozenset({1, 3, 4}))
    order = est.visiting_order(s)
    assert sorted(order) == [1, 3, 4]
    path, cost, order2 = est.probe(s, t)
    assert order2 == order and path[0] == 0 and path[-1] == 6
    assert est.predict([s])[0] == order[0]


def test_validation_helpers():
    with pytest.raises(TypeError):
        check_instance((0, 1, ()), 3)
    with pytest.raises(ValueError):
        check_instance(Instance(0, 5), 3)
    bad = np.zeros((1, 3, 3))
    with pytest.raises(ValueError, match="one start"):
        check_feature_batch(bad, 3)
    bad[0, 0, 0] = bad[0, 2, 1] = 0.5
    with pytest.raises(ValueError, match="0/1"):
        check_feature_batch(bad, 3)
    with pytest.raises(ValueError, match="shape"):
        check_feature_batch(np.zeros((2, 4, 3)), 3)
    x = check_feature_batch([Instance(0, 2, frozenset({1}))], 3)
    assert check_labels([1.0], x).tolist() == [1]
    with pytest.raises(ValueError):
        check_labels([1, 1], x)
    with pytest.raises(ValueError):
        check_labels([1.5], x)
