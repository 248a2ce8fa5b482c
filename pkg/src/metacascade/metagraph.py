"""Cascade-level meta-graph: construction, backbone filtering, features, labels."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .cascade import Cascade, CascadeGraph
from .ingest import AnnotationStore, LabelStore, UserProfile

LABEL_CODES = {"fake": 1, "non_fake": 0, "unlabeled": -1}
LABEL_NAMES = {v: k for k, v in LABEL_CODES.items()}

MISSING_TOPIC = -1
NEUTRAL_SENTIMENT = (1.0, 0.5)
USER_NUMERIC = ("account_age_days", "followers_count", "friends_count", "statuses_count",
                "favourites_count")


@dataclass
class MetaGraph:
    cascade_ids: list[str]
    edges: np.ndarray  # (m, 2) int64, i < j, sorted
    weights: np.ndarray  # (m,) int64 shared-retweeter counts
    labels: np.ndarray = None  # (n,) int8: 1 fake, 0 non_fake, -1 unlabeled
    features: np.ndarray | None = None  # (n, F)
    edge_features: np.ndarray | None = None  # (m, 2): graph_sim, content_sim

    def __post_init__(self):
        if self.labels is None:
            self.labels = np.full(len(self.cascade_ids), -1, dtype=np.int8)

    @property
    def n_nodes(self) -> int:
        return len(self.cascade_ids)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def adjacency(self, weighted: bool = False) -> sp.csr_matrix:
        n = self.n_nodes
        data = self.weights.astype(np.float64) if weighted else np.ones(self.n_edges)
        a = sp.coo_matrix((data, (self.edges[:, 0], self.edges[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    def edge_subset(self, keep: np.ndarray) -> MetaGraph:
        return replace(
            self,
            edges=self.edges[keep],
            weights=self.weights[keep],
            edge_features=None if self.edge_features is None else self.edge_features[keep],
        )

    def label_names(self) -> list[str]:
        return [LABEL_NAMES[int(v)] for v in self.labels]


def build_metagraph(cascades: Sequence[Cascade], min_shared: int = 1) -> MetaGraph:
    """Connect cascades sharing at least ``min_shared`` retweeters (roots excluded)."""
    if min_shared < 1:
        raise ValueError("min_shared must be >= 1")
    users: dict[str, int] = {}
    rows, cols = [], []
    for ci, c in enumerate(cascades):
        for u in sorted(c.unique_retweeters):
            rows.append(ci)
            cols.append(users.setdefault(u, len(users)))
    n = len(cascades)
    inc = sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)),
                        shape=(n, len(users)))
    shared = sp.triu(inc @ inc.T, k=1).tocoo()
    keep = shared.data >= min_shared
    edges = np.stack([shared.row[keep], shared.col[keep]], axis=1).astype(np.int64)
    weights = shared.data[keep].astype(np.int64)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return MetaGraph([c.cascade_id for c in cascades], edges[order].reshape(-1, 2), weights[order])


# ---------------------------------------------------------------------------
# disparity filter


def edge_significance(n_nodes: int, edges: np.ndarray, weights: np.ndarray):
    """Per-endpoint significance ``(1 - w/s)^(k-1)`` of every edge; 1 at degree-1 endpoints."""
    w = weights.astype(np.float64)
    u, v = edges[:, 0], edges[:, 1]
    strength = np.bincount(u, weights=w, minlength=n_nodes) + np.bincount(v, weights=w, minlength=n_nodes)
    degree = np.bincount(u, minlength=n_nodes) + np.bincount(v, minlength=n_nodes)

    def side(i):
        k = degree[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (1.0 - w / strength[i]) ** (k - 1)
        return np.where(k > 1, a, 1.0)

    return side(u), side(v)


def disparity_filter(graph: MetaGraph, alpha: float) -> MetaGraph:
    """Keep edges significant at level ``alpha`` from at least one endpoint.

    Nodes left without edges stay in the graph.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if graph.n_edges == 0:
        return graph.edge_subset(np.zeros(0, dtype=bool))
    a_u, a_v = edge_significance(graph.n_nodes, graph.edges, graph.weights)
    return graph.edge_subset((a_u < alpha) | (a_v < alpha))


# ---------------------------------------------------------------------------
# node features


@dataclass(frozen=True)
class NormStats:
    """log1p user numerics statistics (training split only) and language vocabulary."""

    mean: np.ndarray
    std: np.ndarray
    languages: tuple[str, ...]

    @property
    def n_lang_slots(self) -> int:
        return len(self.languages) + 1  # + "other"


def raw_user_numerics(cascade: Cascade, profiles: Mapping[str, UserProfile]) -> np.ndarray:
    """(N, 5) raw user numerics in canonical node order; account age relative to the root tweet."""
    t0 = cascade.root_tweet.created_at
    out = np.zeros((len(cascade.users()), len(USER_NUMERIC)))
    for i, u in enumerate(cascade.users()):
        p = profiles.get(u)
        if p is None:
            continue
        age = 0.0 if p.account_created_at is None else max(0.0, (t0 - p.account_created_at) / 86400.0)
        out[i] = (age, p.followers_count, p.friends_count, p.statuses_count, p.favourites_count)
    return out


def compute_norm_stats(cascades: Iterable[Cascade], profiles: Mapping[str, UserProfile],
                       n_languages: int = 5) -> NormStats:
    blocks, langs = [], Counter()
    for c in cascades:
        blocks.append(np.log1p(raw_user_numerics(c, profiles)))
        for u in c.users():
            p = profiles.get(u)
            if p is not None and p.lang:
                langs[p.lang] += 1
    if not blocks:
        raise ValueError("no cascades to compute normalization statistics from")
    x = np.concatenate(blocks)
    std = x.std(axis=0)
    std[std == 0] = 1.0
    top = tuple(lang for lang, _ in sorted(langs.items(), key=lambda kv: (-kv[1], kv[0]))[:n_languages])
    return NormStats(x.mean(axis=0), std, top)


def _user_block(cascade: Cascade, profiles, norm: NormStats) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    numeric = (np.log1p(raw_user_numerics(cascade, profiles)) - norm.mean) / norm.std
    users = cascade.users()
    verified = np.array([float(profiles[u].verified) if u in profiles else 0.0 for u in users])
    lang_idx = {lang: i for i, lang in enumerate(norm.languages)}
    other = len(norm.languages)
    langs = np.array([lang_idx.get(profiles[u].lang, other) if u in profiles else other for u in users])
    return numeric, verified, langs


def _semantic_tail(cascade: Cascade, annotations: AnnotationStore | None) -> np.ndarray:
    rec = annotations.get(cascade.root_tweet.tweet_id) if annotations is not None else None
    emb_dim = annotations.embedding_dim if annotations is not None and annotations.embedding_dim else 0
    if rec is None:
        tail = [MISSING_TOPIC] * 3 + list(NEUTRAL_SENTIMENT)
        emb = np.zeros(emb_dim)
    else:
        tail = [rec.topic_ew, rec.topic_pmi, rec.topic_idf, rec.sentiment_label, rec.sentiment_score]
        emb = np.asarray(rec.text_embedding, dtype=np.float64) if rec.text_embedding else np.zeros(emb_dim)
    return np.concatenate([np.asarray(tail, dtype=np.float64), emb])


def _check_finite(vec: np.ndarray, cascade: Cascade) -> np.ndarray:
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"non-finite feature values for cascade {cascade.cascade_id}")
    return vec


def assemble_node_features(cascade: Cascade, embedding: np.ndarray, profiles: Mapping[str, UserProfile],
                           annotations: AnnotationStore | None, norm_stats: NormStats) -> np.ndarray:
    """Fixed-length cascade vector.

    Layout: embedding mean (d) | embedding max (d) | user numerics mean (5) |
    user numerics max (5) | verified fraction (1) | dominant-language one-hot
    (K+1) | topic ids (3) | sentiment label, score (2) | text embedding (t).
    """
    emb = np.asarray(getattr(embedding, "rows", embedding), dtype=np.float64)
    if emb.shape[0] != len(cascade.users()):
        raise ValueError(f"embedding rows ({emb.shape[0]}) do not match cascade "
                         f"{cascade.cascade_id} users ({len(cascade.users())})")
    _check_finite(emb, cascade)
    numeric, verified, langs = _user_block(cascade, profiles, norm_stats)
    counts = np.bincount(langs, minlength=norm_stats.n_lang_slots)
    lang_onehot = np.zeros(norm_stats.n_lang_slots)
    lang_onehot[int(np.argmax(counts))] = 1.0
    vec = np.concatenate([
        emb.mean(axis=0), emb.max(axis=0),
        numeric.mean(axis=0), numeric.max(axis=0),
        [verified.mean()], lang_onehot,
        _semantic_tail(cascade, annotations),
    ])
    return _check_finite(vec, cascade)


def user_feature_matrix(cascade: Cascade, embedding: np.ndarray, profiles: Mapping[str, UserProfile],
                        annotations: AnnotationStore | None, norm_stats: NormStats) -> np.ndarray:
    """Per-user rows for isolated-cascade classification; every user inherits the root's semantics.

    Row layout: embedding (d) | user numerics (5) | verified (1) |
    language one-hot (K+1) | topic ids (3) | sentiment (2) | text embedding (t).
    """
    emb = np.asarray(getattr(embedding, "rows", embedding), dtype=np.float64)
    numeric, verified, langs = _user_block(cascade, profiles, norm_stats)
    if emb.shape[0] != numeric.shape[0]:
        raise ValueError(f"embedding rows do not match cascade {cascade.cascade_id}")
    onehot = np.eye(norm_stats.n_lang_slots)[langs]
    tail = np.tile(_semantic_tail(cascade, annotations), (emb.shape[0], 1))
    return _check_finite(np.hstack([emb, numeric, verified[:, None], onehot, tail]), cascade)


# ---------------------------------------------------------------------------
# edge features

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokens(text: str) -> set[str]:
    return set(_TOKEN.findall(text.lower()))


def content_similarity(text_a: str, text_b: str) -> float:
    a, b = tokens(text_a), tokens(text_b)
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def _sorted_degrees(g: CascadeGraph) -> np.ndarray:
    return np.sort(g.degrees())[::-1].astype(np.float64)


def _padded_cosine(a: np.ndarray, b: np.ndarray) -> float:
    n = max(a.size, b.size)
    a, b = np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size))
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        return 0.0
    return float(min(1.0, max(0.0, a @ b / denom)))


def degree_sequence_similarity(g_a: CascadeGraph, g_b: CascadeGraph) -> float:
    """Cosine of the descending degree sequences, zero-padded to equal length."""
    return _padded_cosine(_sorted_degrees(g_a), _sorted_degrees(g_b))


@dataclass(frozen=True)
class EdgeFeatures:
    shared_users: int
    graph_sim: float
    content_sim: float


def assemble_edge_features(cascade_i: Cascade, cascade_j: Cascade, weight: int,
                           graph_i: CascadeGraph, graph_j: CascadeGraph) -> EdgeFeatures:
    return EdgeFeatures(
        int(weight),
        degree_sequence_similarity(graph_i, graph_j),
        content_similarity(cascade_i.root_tweet.text, cascade_j.root_tweet.text),
    )


def attach_edge_features(mg: MetaGraph, cascades: Sequence[Cascade],
                         graphs: Sequence[CascadeGraph]) -> MetaGraph:
    feats = np.zeros((mg.n_edges, 2))
    tok = [tokens(c.root_tweet.text) for c in cascades]
    degs = [_sorted_degrees(g) for g in graphs]
    for e, (i, j) in enumerate(mg.edges.tolist()):
        feats[e, 0] = _padded_cosine(degs[i], degs[j])
        union = tok[i] | tok[j]
        feats[e, 1] = len(tok[i] & tok[j]) / len(union) if union else 0.0
    return replace(mg, edge_features=feats)


# ---------------------------------------------------------------------------
# labels


@dataclass
class Labeling:
    labels: dict[str, str] = field(default_factory=dict)  # cascade id -> fake / non_fake / unlabeled
    discarded: list[str] = field(default_factory=list)
    provenance: dict[str, tuple[str, ...]] = field(default_factory=dict)  # cascade id -> supporting urls

    def code(self, cascade_id: str) -> int:
        return LABEL_CODES[self.labels.get(cascade_id, "unlabeled")]


def transfer_labels(cascades: Iterable[Cascade], label_store: LabelStore) -> Labeling:
    """Give each cascade the unique definitive label of its root urls.

    Cascades carrying both fake and non_fake urls are discarded.
    """
    out = Labeling()
    for c in cascades:
        found: dict[str, list[str]] = {}
        for url in c.urls:
            lab = label_store.get(url)
            if lab in ("fake", "non_fake"):
                found.setdefault(lab, []).append(url)
        if len(found) > 1:
            out.discarded.append(c.cascade_id)
        elif found:
            (lab, urls), = found.items()
            out.labels[c.cascade_id] = lab
            out.provenance[c.cascade_id] = tuple(urls)
        else:
            out.labels[c.cascade_id] = "unlabeled"
    return out


# ---------------------------------------------------------------------------
# exports


def _xml_escape(s: str) -> str:
    return (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def _fmt(x: float) -> str:
    return repr(float(x))


def to_graphml(mg: MetaGraph) -> str:
    feat_len = 0 if mg.features is None else mg.features.shape[1]
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns" '
        'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" '
        'xsi:schemaLocation="http://graphml.graphdrawing.org/xmlns '
        'http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd">',
        '  <key id="label" for="node" attr.name="label" attr.type="string"/>',
        '  <key id="feature_length" for="node" attr.name="feature_length" attr.type="int"/>',
        '  <key id="weight" for="edge" attr.name="weight" attr.type="int"/>',
        '  <key id="graph_sim" for="edge" attr.name="graph_sim" attr.type="double"/>',
        '  <key id="content_sim" for="edge" attr.name="content_sim" attr.type="double"/>',
        '  <graph id="metagraph" edgedefault="undirected">',
    ]
    names = mg.label_names()
    for cid, lab in zip(mg.cascade_ids, names):
        lines.append(f'    <node id="{_xml_escape(cid)}"><data key="label">{lab}</data>'
                     f'<data key="feature_length">{feat_len}</data></node>')
    for e, (i, j) in enumerate(mg.edges.tolist()):
        data = f'<data key="weight">{int(mg.weights[e])}</data>'
        if mg.edge_features is not None:
            data += (f'<data key="graph_sim">{_fmt(mg.edge_features[e, 0])}</data>'
                     f'<data key="content_sim">{_fmt(mg.edge_features[e, 1])}</data>')
        lines.append(f'    <edge source="{_xml_escape(mg.cascade_ids[i])}" '
                     f'target="{_xml_escape(mg.cascade_ids[j])}">{data}</edge>')
    lines += ["  </graph>", "</graphml>", ""]
    return "\n".join(lines)


_DOT_COLORS = {"fake": "red", "non_fake": "green", "unlabeled": "gray"}


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(mg: MetaGraph) -> str:
    lines = ["graph metagraph {", "  node [style=filled];"]
    for cid, lab in zip(mg.cascade_ids, mg.label_names()):
        lines.append(f'  {_dot_id(cid)} [label={_dot_id(cid)}, class="{lab}", '
                     f'fillcolor={_DOT_COLORS[lab]}];')
    for e, (i, j) in enumerate(mg.edges.tolist()):
        lines.append(f"  {_dot_id(mg.cascade_ids[i])} -- {_dot_id(mg.cascade_ids[j])} "
                     f"[weight={int(mg.weights[e])}];")
    lines += ["}", ""]
    return "\n".join(lines)


def to_edgelist(mg: MetaGraph) -> str:
    lines = ["# source\ttarget\tweight\tgraph_sim\tcontent_sim"]
    for e, (i, j) in enumerate(mg.edges.tolist()):
        if mg.edge_features is not None:
            extra = f"\t{_fmt(mg.edge_features[e, 0])}\t{_fmt(mg.edge_features[e, 1])}"
        else:
            extra = "\t\t"
        lines.append(f"{mg.cascade_ids[i]}\t{mg.cascade_ids[j]}\t{int(mg.weights[e])}{extra}")
    return "\n".join(lines) + "\n"


def save_metagraph(mg: MetaGraph, path) -> None:
    """Compact binary snapshot (npz)."""
    arrays = dict(
        cascade_ids=np.array(mg.cascade_ids, dtype=str),
        edges=mg.edges, weights=mg.weights, labels=mg.labels,
    )
    if mg.features is not None:
        arrays["features"] = mg.features
    if mg.edge_features is not None:
        arrays["edge_features"] = mg.edge_features
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_metagraph(path) -> MetaGraph:
    with np.load(path) as z:
        return MetaGraph(
            cascade_ids=z["cascade_ids"].tolist(),
            edges=z["edges"].reshape(-1, 2).astype(np.int64),
            weights=z["weights"].astype(np.int64),
            labels=z["labels"].astype(np.int8),
            features=z["features"] if "features" in z else None,
            edge_features=z["edge_features"] if "edge_features" in z else None,
        )

