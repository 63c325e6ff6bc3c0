"""scikit-learn front end for the next-mandatory-node GCN."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import gcn
from .datagen import Dataset
from .validation import check_feature_batch, check_labels


def _columns_from_features(X):
    n = X.shape[1]
    weights = np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
    masks = (X[:, :, 2].astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
    return X[:, :, 0].argmax(axis=1), X[:, :, 1].argmax(axis=1), masks


class NextMandatoryClassifier(ClassifierMixin, BaseEstimator):
    """Predicts which mandatory node an optimal path visits first.

    Inputs may be a list of :class:`~mandpath.domain.Instance`, a
    :class:`~mandpath.datagen.Dataset` (labels taken from it when ``y`` is
    omitted) or an encoded ``(B, n, 3)`` array. ``predict`` restricts the argmax
    to each instance's mandatory nodes.
    """

    def __init__(self, graph=None, hidden_width=100, n_conv_layers=3, dropout=0.1, bn_decay=0.9,
                 learning_rate=1e-4, batch_size=64, epochs=10, samples_per_epoch=None,
                 random_state=0, graph_id="graph"):
        self.graph = graph
        self.hidden_width = hidden_width
        self.n_conv_layers = n_conv_layers
        self.dropout = dropout
        self.bn_decay = bn_decay
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.samples_per_epoch = samples_per_epoch
        self.random_state = random_state
        self.graph_id = graph_id

    @classmethod
    def from_model(cls, model, **params):
        est = cls(hidden_width=model.hidden, n_conv_layers=model.n_layers, dropout=model.dropout,
                  bn_decay=model.bn_decay, graph_id=model.graph_id, **params)
        est.model_ = model
        est.classes_ = np.arange(model.n_nodes)
        est.loss_curve_ = []
        return est

    def _n_nodes(self):
        if hasattr(self, "model_"):
            return self.model_.n_nodes
        if self.graph is None:
            raise ValueError("graph must be set before fitting")
        return self.graph.node_count

    def fit(self, X, y=None):
        if self.graph is None:
            raise ValueError("graph must be set before fitting")
        n = self.graph.node_count
        if isinstance(X, Dataset) and y is None:
            data = X
            if data.node_count != n:
                raise ValueError(f"dataset is for {data.node_count} nodes, graph has {n}")
        else:
            feats = check_feature_batch(X, n)
            labels = check_labels(y, feats)
            starts, dests, masks = _columns_from_features(feats)
            data = Dataset(self.graph_id, n, starts, dests, masks, labels)
        self.model_ = gcn.init_model(self.graph, hidden=self.hidden_width, n_layers=self.n_conv_layers,
                                     dropout=self.dropout, bn_decay=self.bn_decay,
                                     seed=self.random_state, graph_id=self.graph_id)
        self.loss_curve_ = gcn.train(self.model_, data, epochs=self.epochs, batch_size=self.batch_size,
                                     seed=self.random_state, lr=self.learning_rate,
                                     max_samples_per_epoch=self.samples_per_epoch)
        self.classes_ = np.arange(n)
        return self

    def predict_proba(self, X, chunk=4096):
        check_is_fitted(self, "model_")
        feats = check_feature_batch(X, self._n_nodes())
        return np.concatenate([gcn.predict_proba(self.model_, feats[i:i + chunk])
                               for i in range(0, len(feats), chunk)] or [np.zeros((0, self._n_nodes()))])

    def predict(self, X):
        feats = check_feature_batch(X, self._n_nodes())
        return gcn.restricted_argmax(self.predict_proba(feats), feats[:, :, 2] > 0)

    def score(self, X, y=None, sample_weight=None):
        if isinstance(X, Dataset) and y is None:
            y = X.labels
        return super().score(X, y, sample_weight=sample_weight)

    def visiting_order(self, s):
        check_is_fitted(self, "model_")
        return gcn.recursive_order(self.model_, s)

    def probe(self, s, table):
        check_is_fitted(self, "model_")
        return gcn.probe_upper_bound(self.model_, s, table)
