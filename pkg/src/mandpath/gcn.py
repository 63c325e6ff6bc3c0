"""A small graph convolutional network that predicts the next mandatory node.

Each conv block computes ``relu(batchnorm(A_hat @ h @ theta))`` followed by
dropout during training. The last hidden state is flattened row by row and
mapped to one logit per graph node.
"""
from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .bnb import order_to_path

log = logging.getLogger(__name__)

MAGIC = b"GCNP"
FORMAT_VERSION = 1


def encode_instance(s, n):
    """(n, 3) matrix of start / end / mandatory indicator columns."""
    x = np.zeros((n, 3))
    x[s.start, 0] = 1.0
    x[s.dest, 1] = 1.0
    for m in s.mandatory:
        x[m, 2] = 1.0
    return x


def encode_batch(starts, dests, masks, n):
    """Vectorised :func:`encode_instance` for columnar (start, dest, bitmask) data."""
    b = len(starts)
    x = np.zeros((b, n, 3))
    rows = np.arange(b)
    x[rows, np.asarray(starts, dtype=np.int64), 0] = 1.0
    x[rows, np.asarray(dests, dtype=np.int64), 1] = 1.0
    bits = np.asarray(masks, dtype=np.uint64)[:, None] >> np.arange(n, dtype=np.uint64)
    x[:, :, 2] = (bits & np.uint64(1)).astype(float)
    return x


def normalized_adjacency(g):
    """D^-1/2 (A + I) D^-1/2 with binary A."""
    a = g.adjacency_matrix() + np.eye(g.node_count)
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d[:, None] * d[None, :]


@dataclass
class GcnModel:
    n_nodes: int
    a_hat: np.ndarray
    params: dict
    buffers: dict  # batch-norm running moments
    hidden: int = 100
    n_layers: int = 3
    dropout: float = 0.1
    bn_decay: float = 0.9
    bn_eps: float = 1e-5
    graph_id: str = "graph"
    opt_state: dict = field(default_factory=dict, repr=False)


def init_model(g_or_adj, hidden=100, n_layers=3, dropout=0.1, bn_decay=0.9, seed=0, graph_id="graph"):
    """Fresh model; weights uniform in +-1/sqrt(fan_in)."""
    a_hat = g_or_adj if isinstance(g_or_adj, np.ndarray) else normalized_adjacency(g_or_adj)
    n = a_hat.shape[0]
    rng = np.random.default_rng(seed)
    params, buffers = {}, {}
    fan_in = 3
    for l in range(n_layers):
        lim = 1.0 / np.sqrt(fan_in)
        params[f"theta{l}"] = rng.uniform(-lim, lim, (fan_in, hidden))
        params[f"gamma{l}"] = np.ones(hidden)
        params[f"beta{l}"] = np.zeros(hidden)
        buffers[f"mean{l}"] = np.zeros(hidden)
        buffers[f"var{l}"] = np.ones(hidden)
        fan_in = hidden
    lim = 1.0 / np.sqrt(n * hidden)
    params["fc_w"] = rng.uniform(-lim, lim, (n * hidden, n))
    params["fc_b"] = rng.uniform(-lim, lim, n)
    return GcnModel(n, a_hat, params, buffers, hidden, n_layers, dropout, bn_decay, graph_id=graph_id)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(m, x, a_hat=None, train=False, rng=None, masks=None):
    """Return ``(probs, cache)`` for a batch ``x`` of shape (B, n, 3) or (n, 3).

    In train mode batch statistics normalise each feature column over the
    batch-and-node axis and dropout is applied after every conv block; pass
    ``masks`` to reuse fixed dropout masks, else they are drawn from ``rng``.
    """
    a_hat = m.a_hat if a_hat is None else a_hat
    x = np.asarray(x, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    b, n, f = x.shape
    if n != m.n_nodes or f != 3 or a_hat.shape != (n, n):
        raise ValueError(f"expected input (B, {m.n_nodes}, 3), got {x.shape}")
    p = m.params
    cache = {"layers": [], "train": train, "batch": b}
    # node-major (n, B, k) so propagation and projection are single 2-D products
    h = np.ascontiguousarray(x.transpose(1, 0, 2)).reshape(n, -1)
    drawn = []
    for l in range(m.n_layers):
        theta = p[f"theta{l}"]
        agg = (a_hat @ h).reshape(n * b, theta.shape[0])
        z = agg @ theta
        if train:
            mu = z.mean(axis=0)
            var = z.var(axis=0)
        else:
            mu, var = m.buffers[f"mean{l}"], m.buffers[f"var{l}"]
        inv_std = 1.0 / np.sqrt(var + m.bn_eps)
        xhat = (z - mu) * inv_std
        y = xhat * p[f"gamma{l}"] + p[f"beta{l}"]
        a = np.maximum(y, 0.0)
        mask = None
        if train and m.dropout > 0:
            if masks is not None:
                mask = masks[l]
            else:
                keep = rng.random(a.shape) >= m.dropout
                mask = keep / (1.0 - m.dropout)
            a = a * mask
        drawn.append(mask)
        cache["layers"].append({"agg": agg, "xhat": xhat, "inv_std": inv_std, "y": y,
                                "mask": mask, "mu": mu, "var": var})
        h = a.reshape(n, -1)
    k = m.hidden
    h_last = h.reshape(n, b, k).transpose(1, 0, 2)
    flat = h_last.reshape(b, n * k)
    logits = flat @ p["fc_w"] + p["fc_b"]
    probs = _softmax(logits)
    cache.update(h_last=h_last, flat=flat, probs=probs, masks=drawn)
    return (probs[0] if single else probs), cache


def hidden_states(m, x, a_hat=None):
    """Eval-mode output of the last conv block, shape (B, n, hidden)."""
    _, cache = forward(m, x, a_hat=a_hat, train=False)
    return cache["h_last"]


def nll_loss(probs, label):
    """Negative log-likelihood; averaged when given a batch."""
    probs = np.asarray(probs)
    if probs.ndim == 1:
        return float(-np.log(probs[label]))
    label = np.asarray(label)
    return float(-np.mean(np.log(probs[np.arange(len(label)), label])))


def backward(m, cache, label):
    """Exact gradients of the mean NLL w.r.t. every parameter."""
    p = m.params
    probs = cache["probs"]
    b = probs.shape[0]
    n, k = m.n_nodes, m.hidden
    label = np.atleast_1d(np.asarray(label))
    dlogits = probs.copy()
    dlogits[np.arange(b), label] -= 1.0
    dlogits /= b
    grads = {
        "fc_w": cache["flat"].T @ dlogits,
        "fc_b": dlogits.sum(axis=0),
    }
    dflat = (dlogits @ p["fc_w"].T).reshape(b, n, k)
    dh = np.ascontiguousarray(dflat.transpose(1, 0, 2)).reshape(n * b, k)
    a_hat = m.a_hat
    for l in reversed(range(m.n_layers)):
        c = cache["layers"][l]
        if c["mask"] is not None:
            dh = dh * c["mask"]
        dy = dh * (c["y"] > 0)
        xhat = c["xhat"]
        grads[f"gamma{l}"] = (dy * xhat).sum(axis=0)
        grads[f"beta{l}"] = dy.sum(axis=0)
        dxhat = dy * p[f"gamma{l}"]
        if cache["train"]:
            cnt = dxhat.shape[0]
            dz = (c["inv_std"] / cnt) * (cnt * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        else:
            dz = dxhat * c["inv_std"]
        agg = c["agg"]
        grads[f"theta{l}"] = agg.T @ dz
        if l:
            dagg = (dz @ p[f"theta{l}"].T).reshape(n, -1)
            dh = (a_hat.T @ dagg).reshape(n * b, -1)
    return grads


def adam_step(m, grads, opt_state=None, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam update of ``m.params``; returns ``(m, opt_state)``."""
    st = m.opt_state if opt_state is None else opt_state
    if not st:
        st.update(t=0, m={k: np.zeros_like(v) for k, v in m.params.items()},
                  v={k: np.zeros_like(v) for k, v in m.params.items()})
    st["t"] += 1
    t = st["t"]
    c1, c2 = 1 - beta1**t, 1 - beta2**t
    for k, gk in grads.items():
        mk = st["m"][k]
        vk = st["v"][k]
        mk *= beta1
        mk += (1 - beta1) * gk
        vk *= beta2
        vk += (1 - beta2) * gk * gk
        m.params[k] -= lr * (mk / c1) / (np.sqrt(vk / c2) + eps)
    return m, st


def update_running_moments(m, cache):
    d = m.bn_decay
    for l, c in enumerate(cache["layers"]):
        m.buffers[f"mean{l}"] = d * m.buffers[f"mean{l}"] + (1 - d) * c["mu"]
        m.buffers[f"var{l}"] = d * m.buffers[f"var{l}"] + (1 - d) * c["var"]


def train(m, d, epochs=10, batch_size=64, seed=0, lr=1e-4, max_samples_per_epoch=None, callback=None):
    """Minibatch NLL training with Adam; returns the per-epoch mean loss.

    ``d`` is a :class:`~mandpath.datagen.Dataset`. When
    ``max_samples_per_epoch`` is set each epoch draws that many rows from a
    fresh permutation instead of sweeping the whole set.
    """
    if d.node_count != m.n_nodes:
        raise ValueError(f"dataset has {d.node_count} nodes, model is bound to {m.n_nodes}")
    if len(d) == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        perm = rng.permutation(len(d))
        if max_samples_per_epoch is not None:
            perm = perm[:max_samples_per_epoch]
        total = 0.0
        for lo in range(0, len(perm), batch_size):
            idx = perm[lo:lo + batch_size]
            x = encode_batch(d.starts[idx], d.dests[idx], d.masks[idx], m.n_nodes)
            y = d.labels[idx]
            probs, cache = forward(m, x, train=True, rng=rng)
            total += nll_loss(probs, y) * len(idx)
            grads = backward(m, cache, y)
            adam_step(m, grads, lr=lr)
            update_running_moments(m, cache)
        curve.append(total / len(perm))
        if not np.isfinite(curve[-1]):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")
        if callback is not None:
            callback(epoch, curve[-1])
    return curve


def predict_proba(m, x):
    probs, _ = forward(m, x, train=False)
    return probs


def restricted_argmax(probs, mandatory_mask):
    """Argmax over mandatory columns only; lowest index wins ties."""
    if not np.all(mandatory_mask.any(axis=-1)):
        raise ValueError("prediction needs a nonempty mandatory set")
    return np.where(mandatory_mask, probs, -1.0).argmax(axis=-1)


def predict_next_mandatory(m, s):
    if not s.mandatory:
        raise ValueError("prediction needs a nonempty mandatory set")
    x = encode_instance(s, m.n_nodes)
    probs = predict_proba(m, x)
    q = int(restricted_argmax(probs, x[:, 2] > 0))
    if log.isEnabledFor(logging.DEBUG):
        log.debug("next mandatory %d (unrestricted argmax %d)", q, int(probs.argmax()))
    return q


def recursive_order(m, s):
    """Visiting order of M from repeated next-node predictions on shrinking sub-instances."""
    from .domain import Instance

    order = []
    cur = s
    while cur.mandatory:
        q = predict_next_mandatory(m, cur)
        order.append(q)
        cur = Instance(q, cur.dest, cur.mandatory - {q})
    return tuple(order)


def probe_upper_bound(m, s, t):
    """Feasible ``(path, cost, order)`` built from the predicted visiting order."""
    order = recursive_order(m, s)
    path, cost = order_to_path(s, order, t)
    return path, cost, order


# -- persistence ------------------------------------------------------------

def _tensors(m):
    out = [("a_hat", m.a_hat)]
    out += sorted(m.params.items())
    out += sorted(m.buffers.items())
    return out


def save_model(m, path):
    body = bytearray(MAGIC)
    body += struct.pack("<I", FORMAT_VERSION)
    gid = m.graph_id.encode("utf-8")
    body += struct.pack("<H", len(gid)) + gid
    body += struct.pack("<IIIddd", m.n_nodes, m.hidden, m.n_layers, m.dropout, m.bn_decay, m.bn_eps)
    tensors = _tensors(m)
    body += struct.pack("<I", len(tensors))
    for name, arr in tensors:
        nm = name.encode("ascii")
        body += struct.pack("<H", len(nm)) + nm
        body += struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    for _, arr in tensors:
        body += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    body += struct.pack("<I", zlib.crc32(body))
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def load_model(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise ValueError(f"{path}: checksum mismatch")
    off = 4
    (version,) = struct.unpack_from("<I", body, off)
    off += 4
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    (glen,) = struct.unpack_from("<H", body, off)
    off += 2
    graph_id = body[off:off + glen].decode("utf-8")
    off += glen
    n, hidden, n_layers, dropout, bn_decay, bn_eps = struct.unpack_from("<IIIddd", body, off)
    off += struct.calcsize("<IIIddd")
    (count,) = struct.unpack_from("<I", body, off)
    off += 4
    shapes = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", body, off)
        off += 2
        name = body[off:off + nlen].decode("ascii")
        off += nlen
        (ndim,) = struct.unpack_from("<I", body, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", body, off)
        off += 4 * ndim
        shapes.append((name, shape))
    arrays = {}
    for name, shape in shapes:
        size = int(np.prod(shape))
        arrays[name] = np.frombuffer(body, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
    a_hat = arrays.pop("a_hat")
    buffers = {k: arrays.pop(k) for k in list(arrays) if k.startswith(("mean", "var"))}
    return GcnModel(n, a_hat, arrays, buffers, hidden, n_layers, dropout, bn_decay, bn_eps, graph_id)


def export_text(m):
    """Human-readable dump, one matrix per section."""
    lines = [f"# graph {m.graph_id} nodes {m.n_nodes} hidden {m.hidden} layers {m.n_layers}"]
    for name, arr in _tensors(m):
        mat = np.atleast_2d(arr)
        lines.append(f"## {name} {' '.join(map(str, arr.shape))}")
        lines += [" ".join(f"{v:.17g}" for v in row) for row in mat]
    return "\n".join(lines) + "\n"
