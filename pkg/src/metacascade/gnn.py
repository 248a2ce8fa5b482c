"""One-conv-layer + one-dense-layer graph neural networks in plain numpy.

Three convolution kinds are supported:

* ``gcn``  - ``relu(Â X W + b)`` with ``Â = D̃^-1/2 (A + I) D̃^-1/2``
* ``sage`` - ``relu(X W_self + mean_N(X) W_neigh + b)``
* ``gat``  - single-head attention with LeakyReLU(0.2) scores, self loops included

followed by dropout (training only), an optional mean/max readout over the
nodes of each graph, and a dense layer producing two class logits
(0 = non_fake, 1 = fake).  Gradients are derived by hand; see
:func:`gradient_check`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

KINDS = ("gcn", "sage", "gat")
N_CLASSES = 2
LEAKY_SLOPE = 0.2
DENSE_LIMIT = 10_000


class TrainingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# adjacency handling


def normalize_adjacency(adjacency, mode: str = "gcn"):
    """Normalized propagation matrix; keeps the dense/sparse type of the input.

    ``gcn``: symmetric normalization with self loops.  ``sage``: row-normalized
    adjacency without self loops (isolated nodes get an all-zero row).
    """
    dense = not sp.issparse(adjacency)
    a = sp.csr_matrix(np.asarray(adjacency, dtype=np.float64)) if dense else adjacency.tocsr().astype(np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("adjacency must be square")
    a = a - sp.diags(a.diagonal())
    a.eliminate_zeros()
    if mode == "gcn":
        a = (a + sp.identity(n, format="csr")).tocoo()
        d = np.asarray(a.sum(axis=1)).ravel()
        # one sqrt per entry keeps the result exactly symmetric (and 1/2 exact on a 2-path)
        out = sp.coo_matrix((a.data / np.sqrt(d[a.row] * d[a.col]), (a.row, a.col)), shape=(n, n))
    elif mode == "sage":
        d = np.asarray(a.sum(axis=1)).ravel()
        inv = np.divide(1.0, d, out=np.zeros_like(d), where=d > 0)
        out = sp.diags(inv) @ a
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    out = out.tocsr()
    return out.toarray() if dense else out


def _edge_index(adjacency) -> tuple[np.ndarray, np.ndarray]:
    """(target, source) pairs of the adjacency plus self loops, sorted by target then source."""
    a = sp.coo_matrix(adjacency)
    mask = a.row != a.col
    n = a.shape[0]
    tgt = np.concatenate([a.row[mask], np.arange(n)])
    src = np.concatenate([a.col[mask], np.arange(n)])
    order = np.lexsort((src, tgt))
    return tgt[order].astype(np.int64), src[order].astype(np.int64)


# ---------------------------------------------------------------------------
# model


@dataclass
class GnnModel:
    kind: str
    params: dict[str, np.ndarray]
    dropout: float = 0.8
    seed: int = 0
    readout: str = "mean"
    x_mean: np.ndarray | None = None
    x_std: np.ndarray | None = None

    @property
    def input_dim(self) -> int:
        return self.params["W_self" if self.kind == "sage" else "W"].shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.params["b1"].shape[0]

    def copy(self) -> GnnModel:
        return GnnModel(self.kind, {k: v.copy() for k, v in self.params.items()}, self.dropout,
                        self.seed, self.readout, self.x_mean, self.x_std)


def _glorot(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def init_model(kind: str, input_dim: int, hidden_dim: int = 64, dropout: float = 0.8,
               seed: int = 0, readout: str = "mean") -> GnnModel:
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if readout not in ("mean", "max"):
        raise ValueError(f"unknown readout {readout!r}")
    rng = np.random.default_rng(seed)
    p: dict[str, np.ndarray] = {}
    if kind == "sage":
        p["W_self"] = _glorot(rng, input_dim, hidden_dim)
        p["W_neigh"] = _glorot(rng, input_dim, hidden_dim)
    else:
        p["W"] = _glorot(rng, input_dim, hidden_dim)
    if kind == "gat":
        p["a_src"] = _glorot(rng, hidden_dim, 1, (hidden_dim,))
        p["a_dst"] = _glorot(rng, hidden_dim, 1, (hidden_dim,))
    p["b1"] = np.zeros(hidden_dim)
    p["W2"] = _glorot(rng, hidden_dim, N_CLASSES)
    p["b2"] = np.zeros(N_CLASSES)
    return GnnModel(kind, p, dropout, seed, readout)


@dataclass
class GraphData:
    """Features and adjacency of one graph, or a disjoint union of many.

    ``graph_index`` assigns every node to a graph for graph-level readout;
    it is None for node classification.
    """

    x: np.ndarray
    adjacency: object  # dense ndarray or scipy sparse, symmetric, no self loops needed
    graph_index: np.ndarray | None = None
    n_graphs: int = 0

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def n_items(self) -> int:
        return self.n_nodes if self.graph_index is None else self.n_graphs


def batch_graphs(features: Sequence[np.ndarray], edges: Sequence[np.ndarray]) -> GraphData:
    """Disjoint union of small graphs (block-diagonal sparse adjacency)."""
    sizes = np.array([f.shape[0] for f in features])
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    rows, cols = [], []
    for off, e in zip(offsets, edges):
        e = np.asarray(e, dtype=np.int64).reshape(-1, 2)
        rows.append(e[:, 0] + off)
        cols.append(e[:, 1] + off)
    r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    n = int(sizes.sum())
    a = sp.coo_matrix((np.ones(r.size), (r, c)), shape=(n, n))
    a = ((a + a.T) > 0).astype(np.float64).tocsr()
    gi = np.repeat(np.arange(len(features)), sizes)
    return GraphData(np.vstack(features), a, gi, len(features))


class _Prepared:
    """Model-kind specific operators precomputed once per dataset."""

    def __init__(self, kind: str, data: GraphData, readout: str = "mean"):
        adj = data.adjacency
        if not sp.issparse(adj) and adj.shape[0] > DENSE_LIMIT:
            adj = sp.csr_matrix(adj)
        self.kind = kind
        self.n = data.n_nodes
        if kind == "gcn":
            self.prop = normalize_adjacency(adj, "gcn")
        elif kind == "sage":
            self.prop = normalize_adjacency(adj, "sage")
        else:
            self.tgt, self.src = _edge_index(adj)
            self.seg_starts = np.searchsorted(self.tgt, np.arange(self.n))
        self.graph_index = data.graph_index
        self.readout = readout
        if data.graph_index is not None:
            counts = np.bincount(data.graph_index, minlength=data.n_graphs).astype(np.float64)
            if np.any(counts == 0):
                raise ValueError("every graph needs at least one node")
            self.pool = sp.csr_matrix(
                (1.0 / counts[data.graph_index], (data.graph_index, np.arange(self.n))),
                shape=(data.n_graphs, self.n),
            )
            order = np.argsort(data.graph_index, kind="stable")
            self.graph_order = order
            self.graph_starts = np.searchsorted(data.graph_index[order], np.arange(data.n_graphs))
        self._x_key = None

    def set_x(self, x: np.ndarray) -> None:
        if self._x_key is x:
            return
        self._x_key = x
        self.x = x
        if self.kind in ("gcn", "sage"):
            self.px = np.asarray(self.prop @ x)


def _segment_softmax(scores, seg_ids, seg_starts, n_seg):
    mx = np.maximum.reduceat(scores, seg_starts) if scores.size else scores
    e = np.exp(scores - mx[seg_ids])
    z = np.bincount(seg_ids, weights=e, minlength=n_seg)
    return e / z[seg_ids]


def _forward(model: GnnModel, prep: _Prepared, mask: np.ndarray | None):
    p = model.params
    x = prep.x
    cache = {}
    if model.kind == "gcn":
        h = prep.px @ p["W"] + p["b1"]
    elif model.kind == "sage":
        h = x @ p["W_self"] + prep.px @ p["W_neigh"] + p["b1"]
    else:
        z = x @ p["W"]
        s_src = z @ p["a_src"]
        s_dst = z @ p["a_dst"]
        pre = s_dst[prep.tgt] + s_src[prep.src]
        e = np.where(pre > 0, pre, LEAKY_SLOPE * pre)
        alpha = _segment_softmax(e, prep.tgt, prep.seg_starts, prep.n)
        att = sp.csr_matrix((alpha, (prep.tgt, prep.src)), shape=(prep.n, prep.n))
        h = att @ z + p["b1"]
        cache.update(z=z, pre=pre, alpha=alpha, att=att)
    r = np.maximum(h, 0.0)
    if mask is not None:
        d = r * mask
    else:
        d = r
    if prep.graph_index is not None:
        if model.readout == "mean":
            g = np.asarray(prep.pool @ d)
        else:
            ordered = d[prep.graph_order]
            g = np.maximum.reduceat(ordered, prep.graph_starts, axis=0)
    else:
        g = d
    logits = g @ p["W2"] + p["b2"]
    cache.update(h=h, r=r, d=d, g=g)
    return logits, cache


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grad(model: GnnModel, prep: _Prepared, items: np.ndarray, y: np.ndarray,
                   mask: np.ndarray | None, class_weights: np.ndarray | None = None,
                   need_grad: bool = True):
    p = model.params
    logits, c = _forward(model, prep, mask)
    probs = _softmax(logits[items])
    w = np.ones(items.size) if class_weights is None else class_weights[y]
    norm = w.sum()
    logp = np.log(np.clip(probs[np.arange(items.size), y], 1e-300, None))
    loss = float(-(w * logp).sum() / norm)
    if not need_grad:
        return loss, None
    dz = probs.copy()
    dz[np.arange(items.size), y] -= 1.0
    dz *= (w / norm)[:, None]
    dlogits = np.zeros_like(logits)
    dlogits[items] = dz
    grads = {"W2": c["g"].T @ dlogits, "b2": dlogits.sum(axis=0)}
    dg = dlogits @ p["W2"].T
    if prep.graph_index is not None:
        if model.readout == "mean":
            dd = np.asarray(prep.pool.T @ dg)
        else:
            d = c["d"]
            dd = np.zeros_like(d)
            gi = prep.graph_index
            # route each graph's gradient to the first node attaining the max
            hit = d == c["g"][gi]
            first = np.zeros_like(hit)
            for col in range(d.shape[1]):
                idx = np.flatnonzero(hit[:, col])
                _, pos = np.unique(gi[idx], return_index=True)
                first[idx[pos], col] = True
            dd[first] = dg[gi][first]
    else:
        dd = dg
    dr = dd * mask if mask is not None else dd
    dh = dr * (c["h"] > 0)
    grads["b1"] = dh.sum(axis=0)
    x = prep.x
    if model.kind == "gcn":
        grads["W"] = prep.px.T @ dh
    elif model.kind == "sage":
        grads["W_self"] = x.T @ dh
        grads["W_neigh"] = prep.px.T @ dh
    else:
        z, alpha, pre, att = c["z"], c["alpha"], c["pre"], c["att"]
        dz_ = np.asarray(att.T @ dh)
        dalpha = np.einsum("ij,ij->i", dh[prep.tgt], z[prep.src])
        wsum = np.bincount(prep.tgt, weights=alpha * dalpha, minlength=prep.n)
        de = alpha * (dalpha - wsum[prep.tgt])
        dpre = np.where(pre > 0, de, LEAKY_SLOPE * de)
        ds_dst = np.bincount(prep.tgt, weights=dpre, minlength=prep.n)
        ds_src = np.bincount(prep.src, weights=dpre, minlength=prep.n)
        grads["a_dst"] = z.T @ ds_dst
        grads["a_src"] = z.T @ ds_src
        dz_ += np.outer(ds_dst, p["a_dst"]) + np.outer(ds_src, p["a_src"])
        grads["W"] = x.T @ dz_
    return loss, grads


def forward(model: GnnModel, features: np.ndarray, adjacency, training: bool = False,
            rng: np.random.Generator | None = None, graph_index: np.ndarray | None = None,
            n_graphs: int = 0) -> np.ndarray:
    """Class logits per node (or per graph when ``graph_index`` is given)."""
    x = _standardize(model, np.asarray(features, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ValueError(f"feature width {x.shape[1]} != model input {model.input_dim}")
    if x.shape[0] != adjacency.shape[0]:
        raise ValueError("feature rows do not match adjacency")
    data = GraphData(x, adjacency, graph_index, n_graphs or (int(graph_index.max()) + 1 if graph_index is not None else 0))
    prep = _Prepared(model.kind, data, model.readout)
    prep.set_x(x)
    mask = _dropout_mask(rng or np.random.default_rng(model.seed), (x.shape[0], model.hidden_dim),
                         model.dropout) if training else None
    return _forward(model, prep, mask)[0]


def pre_dense_activations(model: GnnModel, features: np.ndarray, adjacency) -> np.ndarray:
    """Convolution output before ReLU, for inspection."""
    x = _standardize(model, np.asarray(features, dtype=np.float64))
    prep = _Prepared(model.kind, GraphData(x, adjacency))
    prep.set_x(x)
    return _forward(model, prep, None)[1]["h"]


def graph_readout(node_activations: np.ndarray, mode: str = "mean") -> np.ndarray:
    h = np.asarray(node_activations, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] == 0:
        raise ValueError("readout needs at least one node row")
    if mode == "mean":
        return h.mean(axis=0)
    if mode == "max":
        return h.max(axis=0)
    raise ValueError(f"unknown readout {mode!r}")


def softmax(logits: np.ndarray) -> np.ndarray:
    return _softmax(np.asarray(logits, dtype=np.float64))


def _dropout_mask(rng, shape, rate):
    if rate <= 0.0:
        return None
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def _standardize(model: GnnModel, x: np.ndarray) -> np.ndarray:
    if model.x_mean is None:
        return x
    return (x - model.x_mean) / model.x_std


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalReport:
    accuracy: float
    f1: float
    confusion: dict[str, int]  # tp, fp, fn, tn with fake as the positive class
    splits: dict[str, dict] = field(default_factory=dict)
    model: str = ""
    mode: str = ""
    epochs_run: int = 0
    best_epoch: int = -1
    train_losses: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def table_row(self) -> str:
        return f"{self.mode:<10} {self.model:<5} acc={self.accuracy * 100:6.2f}%  F1={self.f1:.3f}"


def evaluate(logits: np.ndarray, labels: np.ndarray) -> EvalReport:
    """Accuracy and binary F1 (fake = 1 is the positive class)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("cannot evaluate on an empty label set")
    pred = np.asarray(logits).argmax(axis=1)
    return _metrics(pred, labels)


def _metrics(pred, labels) -> EvalReport:
    tp = int(np.sum((pred == 1) & (labels == 1)))
    fp = int(np.sum((pred == 1) & (labels == 0)))
    fn = int(np.sum((pred == 0) & (labels == 1)))
    tn = int(np.sum((pred == 0) & (labels == 0)))
    acc = (tp + tn) / labels.size
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else 0.0
    return EvalReport(acc, f1, {"tp": tp, "fp": fp, "fn": fn, "tn": tn})


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    dropout: float = 0.8
    learning_rate: float = 1e-4
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    hidden_dim: int = 64
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    class_weighted: bool = False
    readout: str = "mean"
    standardize: bool = True

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ValueError(f"split must be non-negative and sum to 1, got {self.split}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if not 0.0 < self.learning_rate < 1.0:
            raise ValueError("learning_rate must lie in (0, 1)")
        if self.epochs < 1 or self.hidden_dim < 1:
            raise ValueError("epochs and hidden_dim must be positive")


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def stratified_split(item_ids: np.ndarray, labels: np.ndarray, fractions=(0.6, 0.2, 0.2),
                     seed: int = 0) -> Split:
    """Per-class shuffled split of labeled items into train/val/test."""
    item_ids = np.asarray(item_ids)
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for cls in np.unique(labels):
        idx = item_ids[labels == cls]
        idx = idx[rng.permutation(idx.size)]
        n_train = int(round(fractions[0] * idx.size))
        n_val = int(round(fractions[1] * idx.size))
        n_train = min(n_train, idx.size)
        n_val = min(n_val, idx.size - n_train)
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train:n_train + n_val])
        parts[2].append(idx[n_train + n_val:])
    return Split(*(np.sort(np.concatenate(p)).astype(np.int64) for p in parts))


class _Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        for k, g in grads.items():
            if c.weight_decay:
                g = g + c.weight_decay * params[k]
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            mhat = self.m[k] / (1 - c.beta1 ** self.t)
            vhat = self.v[k] / (1 - c.beta2 ** self.t)
            params[k] -= c.learning_rate * mhat / (np.sqrt(vhat) + c.eps)


def _item_rows(data: GraphData, items: np.ndarray) -> np.ndarray:
    if data.graph_index is None:
        return items
    return np.flatnonzero(np.isin(data.graph_index, items))


def train(model_kind: str, data: GraphData, labels: np.ndarray, config: TrainConfig = TrainConfig(),
          split: Split | None = None, mode: str | None = None) -> tuple[GnnModel, EvalReport]:
    """Full-batch training with Adam; the best-validation checkpoint is evaluated on test.

    ``labels`` has one entry per item (node, or graph when ``data.graph_index``
    is set): 1 fake, 0 non_fake, -1 unlabeled.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != data.n_items:
        raise ValueError(f"{labels.shape[0]} labels for {data.n_items} items")
    labeled = np.flatnonzero(labels >= 0)
    if labeled.size == 0:
        raise TrainingError("no labeled items")
    if split is None:
        split = stratified_split(labeled, labels[labeled], config.split, config.seed)
    if np.unique(labels[split.train]).size < 2:
        raise TrainingError("training split contains a single class")

    x = np.asarray(data.x, dtype=np.float64)
    model = init_model(model_kind, x.shape[1], config.hidden_dim, config.dropout,
                       config.seed, config.readout)
    if config.standardize:
        rows = _item_rows(data, split.train)
        mu = x[rows].mean(axis=0)
        sd = x[rows].std(axis=0)
        sd[sd == 0] = 1.0
        model.x_mean, model.x_std = mu, sd
    xs = _standardize(model, x)
    prep = _Prepared(model_kind, data, config.readout)
    prep.set_x(xs)

    class_weights = None
    if config.class_weighted:
        counts = np.bincount(labels[split.train], minlength=N_CLASSES).astype(np.float64)
        class_weights = counts.sum() / (N_CLASSES * np.maximum(counts, 1.0))

    rng = np.random.default_rng(config.seed + 1)
    opt = _Adam(model.params, config)
    y_train = labels[split.train]
    best, best_val, best_epoch = model.copy(), -1.0, -1
    train_losses = []
    for epoch in range(config.epochs):
        mask = _dropout_mask(rng, (data.n_nodes, config.hidden_dim), config.dropout)
        _, grads = _loss_and_grad(model, prep, split.train, y_train, mask, class_weights)
        opt.step(model.params, grads)
        logits, _ = _forward(model, prep, None)
        train_losses.append(_loss_and_grad(model, prep, split.train, y_train, None,
                                           class_weights, need_grad=False)[0])
        val_items = split.val if split.val.size else split.train
        val_acc = float(np.mean(logits[val_items].argmax(axis=1) == labels[val_items]))
        if val_acc >= best_val:
            best, best_val, best_epoch = model.copy(), val_acc, epoch

    logits, _ = _forward(best, prep, None)
    pred = logits.argmax(axis=1)
    splits = {}
    for name in ("train", "val", "test"):
        items = getattr(split, name)
        if items.size:
            r = _metrics(pred[items], labels[items])
            splits[name] = {"accuracy": r.accuracy, "f1": r.f1, "confusion": r.confusion, "n": int(items.size)}
    test_items = split.test if split.test.size else split.val
    report = _metrics(pred[test_items], labels[test_items])
    report.splits = splits
    report.model = model_kind
    report.mode = mode or ("cascade" if data.graph_index is not None else "metagraph")
    report.epochs_run = config.epochs
    report.best_epoch = best_epoch
    report.train_losses = [float(v) for v in train_losses]
    return best, report


def predict(model: GnnModel, data: GraphData) -> np.ndarray:
    xs = _standardize(model, np.asarray(data.x, dtype=np.float64))
    prep = _Prepared(model.kind, data, model.readout)
    prep.set_x(xs)
    return _forward(model, prep, None)[0]


# ---------------------------------------------------------------------------
# numerical checks


def loss_and_grads(model: GnnModel, data: GraphData, labels: np.ndarray,
                   mask: np.ndarray | None = None):
    """Mean cross-entropy over labeled items and its analytic parameter gradients."""
    labels = np.asarray(labels, dtype=np.int64)
    items = np.flatnonzero(labels >= 0)
    xs = _standardize(model, np.asarray(data.x, dtype=np.float64))
    prep = _Prepared(model.kind, data, model.readout)
    prep.set_x(xs)
    return _loss_and_grad(model, prep, items, labels[items], mask)


def gradient_check(model: GnnModel, data: GraphData, labels: np.ndarray, epsilon: float = 1e-6,
                   n_samples: int = 100, seed: int = 0, use_dropout: bool = True,
                   floor: float = 1e-7) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``n_samples`` parameter entries are drawn uniformly over all parameter
    arrays.  A fixed dropout mask is used so the stochastic path is covered.
    Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    items = np.flatnonzero(labels >= 0)
    rng = np.random.default_rng(seed)
    xs = _standardize(model, np.asarray(data.x, dtype=np.float64))
    prep = _Prepared(model.kind, data, model.readout)
    prep.set_x(xs)
    mask = _dropout_mask(rng, (data.n_nodes, model.hidden_dim), model.dropout) if use_dropout else None
    _, grads = _loss_and_grad(model, prep, items, labels[items], mask)
    names = sorted(model.params)
    sizes = np.array([model.params[k].size for k in names])
    picks = rng.choice(sizes.sum(), size=n_samples, replace=n_samples > sizes.sum())
    bounds = np.cumsum(sizes)
    worst = 0.0
    for flat in picks:
        which = int(np.searchsorted(bounds, flat, side="right"))
        name = names[which]
        local = int(flat - (bounds[which - 1] if which else 0))
        arr = model.params[name].reshape(-1)
        orig = arr[local]
        arr[local] = orig + epsilon
        lp = _loss_and_grad(model, prep, items, labels[items], mask, need_grad=False)[0]
        arr[local] = orig - epsilon
        lm = _loss_and_grad(model, prep, items, labels[items], mask, need_grad=False)[0]
        arr[local] = orig
        numeric = (lp - lm) / (2 * epsilon)
        analytic = grads[name].reshape(-1)[local]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpoints


def save_model(model: GnnModel, path) -> None:
    """npz checkpoint: one array per parameter plus a JSON ``meta`` entry."""
    meta = {"kind": model.kind, "dropout": model.dropout, "seed": model.seed, "readout": model.readout}
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    if model.x_mean is not None:
        arrays["x_mean"] = model.x_mean
        arrays["x_std"] = model.x_std
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_model(path) -> GnnModel:
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        params = {k.split("/", 1)[1]: z[k] for k in z.files if k.startswith("param/")}
        x_mean = z["x_mean"] if "x_mean" in z.files else None
        x_std = z["x_std"] if "x_std" in z.files else None
    return GnnModel(meta["kind"], params, meta["dropout"], meta["seed"], meta["readout"], x_mean, x_std)
