"""DeepWalk: uniform truncated random walks + skip-gram with negative sampling.

All randomness is drawn up front from a seeded :class:`numpy.random.Generator`
and handed to the kernels, so the numba and pure-Python paths see the same
samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .cascade import CascadeGraph


@dataclass(frozen=True)
class EmbedParams:
    dim: int = 128
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_lr_fraction: float = 1e-4
    batch_walks: int = 256
    seed: int = 0


@dataclass
class WalkCorpus:
    walks: np.ndarray  # (n_walks, walk_length) int64, padded with -1
    lengths: np.ndarray  # (n_walks,)
    graph_node_count: int

    def __len__(self) -> int:
        return self.walks.shape[0]

    def sequences(self) -> list[list[int]]:
        return [row[:n].tolist() for row, n in zip(self.walks, self.lengths)]


@dataclass
class EmbeddingMatrix:
    rows: np.ndarray  # (N, d)
    losses: list[float] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def shape(self):
        return self.rows.shape


# ---------------------------------------------------------------------------
# kernels


@njit
def _walk_kernel(indptr, indices, starts, uniforms, walk_length):
    n_walks = starts.shape[0]
    out = np.full((n_walks, walk_length), -1, dtype=np.int64)
    lengths = np.empty(n_walks, dtype=np.int64)
    for w in range(n_walks):
        cur = starts[w]
        out[w, 0] = cur
        length = 1
        for step in range(1, walk_length):
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if deg == 0:
                break
            k = int(uniforms[w, step - 1] * deg)
            if k >= deg:
                k = deg - 1
            cur = indices[lo + k]
            out[w, step] = cur
            length += 1
        lengths[w] = length
    return out, lengths


@njit
def _log_sigmoid(x):
    if x >= 0.0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@njit
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit
def _sgns_batch(walks, lengths, w_in, w_out, reduced, negs, window,
                lr0, min_lr, tokens_done, total_tokens):
    """One pass of SGD over a batch of walks; returns (loss_sum, n_pairs, tokens_done).

    ``reduced[w, p]`` is the sampled effective window for position p and
    ``negs[w, p, slot, k]`` the k-th noise node for context slot ``slot``.
    """
    dim = w_in.shape[1]
    n_neg = negs.shape[3]
    grad_in = np.zeros(dim)
    loss = 0.0
    n_pairs = 0
    for w in range(walks.shape[0]):
        length = lengths[w]
        for pos in range(length):
            lr = lr0 * (1.0 - tokens_done / total_tokens)
            if lr < min_lr:
                lr = min_lr
            tokens_done += 1
            center = walks[w, pos]
            b = reduced[w, pos]
            slot = 0
            for off in range(-window, window + 1):
                if off == 0:
                    continue
                cpos = pos + off
                if abs(off) <= b and cpos >= 0 and cpos < length:
                    ctx = walks[w, cpos]
                    for j in range(dim):
                        grad_in[j] = 0.0
                    for k in range(n_neg + 1):
                        if k == 0:
                            target = center
                            label = 1.0
                        else:
                            target = negs[w, pos, slot, k - 1]
                            if target == center:
                                continue
                            label = 0.0
                        f = 0.0
                        for j in range(dim):
                            f += w_in[ctx, j] * w_out[target, j]
                        if label > 0.0:
                            loss -= _log_sigmoid(f)
                        else:
                            loss -= _log_sigmoid(-f)
                        g = (label - _sigmoid(f)) * lr
                        for j in range(dim):
                            grad_in[j] += g * w_out[target, j]
                            w_out[target, j] += g * w_in[ctx, j]
                    for j in range(dim):
                        w_in[ctx, j] += grad_in[j]
                    n_pairs += 1
                slot += 1
    return loss, n_pairs, tokens_done


def sgns_pair_loss(v_in: np.ndarray, v_pos: np.ndarray, v_negs: np.ndarray) -> float:
    """Negative-sampling loss of one (input, positive, negatives) triple."""
    total = -_log_sigmoid(float(v_in @ v_pos))
    for v in v_negs:
        total -= _log_sigmoid(-float(v_in @ v))
    return total


def sgns_pair_grad(v_in: np.ndarray, v_pos: np.ndarray, v_negs: np.ndarray):
    """Analytic gradient of :func:`sgns_pair_loss` w.r.t. (v_in, v_pos, v_negs).

    Mirrors the update in the training kernel, which steps along
    ``(label - sigmoid(f))`` i.e. the negative of these gradients.
    """
    g_pos = _sigmoid(float(v_in @ v_pos)) - 1.0
    g_negs = np.array([_sigmoid(float(v_in @ v)) for v in v_negs])
    d_in = g_pos * v_pos + g_negs @ v_negs
    d_pos = g_pos * v_in
    d_negs = g_negs[:, None] * v_in[None, :]
    return d_in, d_pos, d_negs


# ---------------------------------------------------------------------------
# public API


def _as_csr(graph) -> tuple[int, np.ndarray, np.ndarray]:
    if isinstance(graph, CascadeGraph):
        indptr, indices = graph.csr()
        return graph.n_nodes, indptr, indices
    n, indptr, indices = graph
    return int(n), np.asarray(indptr, dtype=np.int64), np.asarray(indices, dtype=np.int64)


def csr_from_edges(n: int, edges) -> tuple[int, np.ndarray, np.ndarray]:
    """Undirected CSR triple ``(n, indptr, indices)`` from an edge list."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    e = e[e[:, 0] != e[:, 1]]
    e = np.unique(np.sort(e, axis=1), axis=0)
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return n, indptr, dst[order]


def random_walks(graph, walks_per_node: int = 10, walk_length: int = 80,
                 seed: int | np.random.Generator = 0) -> WalkCorpus:
    """``walks_per_node`` rounds of uniform walks; each round visits nodes in a fresh random order.

    ``graph`` is a :class:`CascadeGraph` or an ``(n, indptr, indices)`` triple.
    """
    n, indptr, indices = _as_csr(graph)
    if n == 0:
        raise ValueError("cannot walk on an empty graph")
    if walk_length < 1 or walks_per_node < 1:
        raise ValueError("walk_length and walks_per_node must be positive")
    rng = np.random.default_rng(seed)
    starts = np.concatenate([rng.permutation(n) for _ in range(walks_per_node)]).astype(np.int64)
    uniforms = rng.random((starts.shape[0], walk_length - 1))
    walks, lengths = _walk_kernel(indptr, indices, starts, uniforms, walk_length)
    return WalkCorpus(walks, lengths, n)


def noise_distribution(corpus: WalkCorpus, power: float = 0.75) -> np.ndarray:
    counts = np.bincount(corpus.walks[corpus.walks >= 0], minlength=corpus.graph_node_count)
    p = counts.astype(np.float64) ** power
    return p / p.sum()


def train_skipgram(corpus: WalkCorpus, dim: int = 128, window: int = 5, negatives: int = 5,
                   epochs: int = 5, learning_rate: float = 0.025, seed: int = 0,
                   min_lr_fraction: float = 1e-4, batch_walks: int = 256) -> EmbeddingMatrix:
    """Skip-gram with negative sampling over a walk corpus.

    Learning rate decays linearly from ``learning_rate`` to
    ``learning_rate * min_lr_fraction`` over all epochs.  The mean
    per-pair loss of every epoch is kept in ``losses``.
    """
    if dim <= 0 or window <= 0:
        raise ValueError("dim and window must be positive")
    if negatives < 0 or epochs < 0:
        raise ValueError("negatives and epochs must be non-negative")
    if len(corpus) == 0:
        raise ValueError("empty walk corpus")
    n = corpus.graph_node_count
    rng = np.random.default_rng(seed)
    w_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(n, dim))
    w_out = np.zeros((n, dim))
    cdf = np.cumsum(noise_distribution(corpus))
    walks, lengths = corpus.walks, corpus.lengths
    n_walks, walk_len = walks.shape
    total_tokens = max(1, int(lengths.sum()) * epochs)
    min_lr = learning_rate * min_lr_fraction
    tokens_done = 0
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n_walks)
        loss_sum, pairs = 0.0, 0
        for start in range(0, n_walks, batch_walks):
            idx = order[start:start + batch_walks]
            reduced = rng.integers(1, window + 1, size=(idx.shape[0], walk_len))
            u = rng.random((idx.shape[0], walk_len, 2 * window, negatives))
            negs = np.minimum(np.searchsorted(cdf, u, side="right"), n - 1)
            l, p, tokens_done = _sgns_batch(walks[idx], lengths[idx], w_in, w_out, reduced, negs,
                                            window, learning_rate, min_lr, tokens_done, total_tokens)
            loss_sum += l
            pairs += p
        losses.append(loss_sum / pairs if pairs else 0.0)
    return EmbeddingMatrix(w_in, losses)


def embed_cascade(graph, params: EmbedParams = EmbedParams()) -> EmbeddingMatrix:
    """DeepWalk embedding with rows in the graph's canonical node order."""
    rng = np.random.default_rng(params.seed)
    walk_seed, train_seed = rng.integers(0, 2**63 - 1, size=2)
    corpus = random_walks(graph, params.walks_per_node, params.walk_length, int(walk_seed))
    return train_skipgram(corpus, dim=params.dim, window=params.window, negatives=params.negatives,
                          epochs=params.epochs, learning_rate=params.learning_rate,
                          seed=int(train_seed), min_lr_fraction=params.min_lr_fraction,
                          batch_walks=params.batch_walks)


# ---------------------------------------------------------------------------
# persistence
#
# File = sequence of blocks.  Each block is one ASCII header line
#   b"EMB1 <cascade_id> <N> <d>\n"
# (cascade ids contain no whitespace) immediately followed by N*d IEEE-754
# float64 values, little-endian, row-major.

_MAGIC = b"EMB1"


def write_embeddings(fh, items) -> None:
    """Write ``(cascade_id, matrix)`` pairs in the block format above."""
    for cid, mat in items:
        rows = np.ascontiguousarray(getattr(mat, "rows", mat), dtype="<f8")
        if any(c.isspace() for c in cid):
            raise ValueError(f"cascade id contains whitespace: {cid!r}")
        n, d = rows.shape
        fh.write(b"%s %s %d %d\n" % (_MAGIC, cid.encode("utf-8"), n, d))
        fh.write(rows.tobytes(order="C"))


def read_embeddings(fh) -> dict[str, np.ndarray]:
    out = {}
    while True:
        header = fh.readline()
        if not header:
            break
        magic, cid, n, d = header.decode("utf-8").split()
        if magic.encode() != _MAGIC:
            raise ValueError(f"bad embedding block header {header!r}")
        n, d = int(n), int(d)
        buf = fh.read(8 * n * d)
        if len(buf) != 8 * n * d:
            raise ValueError(f"truncated embedding block for {cid}")
        out[cid] = np.frombuffer(buf, dtype="<f8").reshape(n, d).copy()
    return out

