"""Input checks shared by the estimator and the CLI."""
from __future__ import annotations

import numpy as np

from .datagen import Dataset
from .domain import Instance
from .gcn import encode_batch, encode_instance


def check_instance(s, n):
    if not isinstance(s, Instance):
        raise TypeError(f"expected an Instance, got {type(s).__name__}")
    return s.validate(n)


def check_feature_batch(X, n):
    """Coerce instances, a Dataset or an encoded array into a (B, n, 3) float array."""
    if isinstance(X, Dataset):
        if X.node_count != n:
            raise ValueError(f"dataset is for {X.node_count} nodes, expected {n}")
        return encode_batch(X.starts, X.dests, X.masks, n)
    if isinstance(X, Instance):
        X = [X]
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], Instance):
        return np.stack([encode_instance(check_instance(s, n), n) for s in X])
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (n, 3):
        raise ValueError(f"expected features of shape (B, {n}, 3), got {arr.shape}")
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError("instance features must be 0/1 indicators")
    if not (arr[:, :, 0].sum(axis=1) == 1).all() or not (arr[:, :, 1].sum(axis=1) == 1).all():
        raise ValueError("each instance needs exactly one start and one end node")
    return arr


def check_labels(y, X):
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(X):
        raise ValueError(f"expected {len(X)} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ValueError("labels must be node indices")
        y = y.astype(np.int64)
    n = X.shape[1]
    if y.min(initial=0) < 0 or y.max(initial=0) >= n:
        raise ValueError(f"labels must lie in 0..{n - 1}")
    if not X[np.arange(len(y)), y, 2].all():
        raise ValueError("every label must be one of its instance's mandatory nodes")
    return y
