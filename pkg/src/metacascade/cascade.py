"""Retweet cascades and their reconstructed diffusion subgraphs."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .ingest import EventStore, TweetEvent
from .socialnet import SocialGraph


@dataclass(frozen=True)
class Cascade:
    root_tweet: TweetEvent
    retweets: tuple[tuple[str, int], ...]  # (user_id, timestamp), sorted by (timestamp, user_id)
    urls: tuple[str, ...]

    @property
    def cascade_id(self) -> str:
        return self.root_tweet.tweet_id

    @property
    def root_user(self) -> str:
        return self.root_tweet.user_id

    @cached_property
    def first_retweet(self) -> dict[str, int]:
        first: dict[str, int] = {}
        for user, ts in self.retweets:
            if user not in first:
                first[user] = ts
        return first

    @cached_property
    def unique_retweeters(self) -> frozenset[str]:
        return frozenset(u for u, _ in self.retweets)

    @cached_property
    def _canonical_users(self) -> tuple[str, ...]:
        first = self.first_retweet
        return (self.root_user,) + tuple(sorted(first, key=lambda u: (first[u], u)))

    def users(self) -> list[str]:
        """Canonical order: root, then retweeters by (first retweet time, user id)."""
        return list(self._canonical_users)


class CascadeList(list):
    """List of cascades carrying the grouping counters in ``stats``."""

    def __init__(self, items=(), stats: dict | None = None):
        super().__init__(items)
        self.stats = stats or {}


def group_cascades(events: EventStore | Iterable[TweetEvent], min_retweeters: int = 100,
                   require_url: bool = True, url_map: Mapping[str, str] | None = None) -> CascadeList:
    """Group retweets under their root tweets.

    Quotes are ignored.  Retweets whose root is missing (or is not an
    original tweet) are orphans; retweets predating the root and self
    retweets by the root user are dropped.  All are counted in ``stats``.
    """
    if min_retweeters < 0:
        raise ValueError("min_retweeters must be >= 0")
    by_id = {ev.tweet_id: ev for ev in events}
    stats = {"orphans": 0, "early_retweets": 0, "self_retweets": 0,
             "too_small": 0, "no_url": 0, "cascades": 0}
    groups: dict[str, list[tuple[str, int]]] = {}
    for ev in by_id.values():
        if ev.kind != "retweet":
            continue
        root = by_id.get(ev.ref_tweet_id)
        # platform retweets always reference the original, but tolerate chains
        hops = 0
        while root is not None and root.kind == "retweet" and hops < 16:
            root = by_id.get(root.ref_tweet_id)
            hops += 1
        if root is None or root.kind != "original":
            stats["orphans"] += 1
            continue
        if ev.user_id == root.user_id:
            stats["self_retweets"] += 1
            continue
        if ev.created_at < root.created_at:
            stats["early_retweets"] += 1
            continue
        groups.setdefault(root.tweet_id, []).append((ev.user_id, ev.created_at))

    out = CascadeList(stats=stats)
    for root_id in sorted(groups):
        root = by_id[root_id]
        retweets = tuple(sorted(groups[root_id], key=lambda p: (p[1], p[0])))
        if len({u for u, _ in retweets}) < min_retweeters:
            stats["too_small"] += 1
            continue
        urls = tuple(dict.fromkeys(url_map.get(u, u) if url_map else u for u in root.urls))
        if require_url and not urls:
            stats["no_url"] += 1
            continue
        out.append(Cascade(root, retweets, urls))
    stats["cascades"] = len(out)
    return out


@dataclass(frozen=True, eq=False)
class CascadeGraph:
    cascade_id: str
    root_tweet_id: str
    nodes: tuple[str, ...]  # canonical order, root first
    edges: np.ndarray  # (m, 2) int array of node indices, i < j, lexicographically sorted
    _index: dict = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def index(self, user: str) -> int:
        return self._index[user]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) of the symmetric adjacency, neighbours in ascending order."""
        n = self.n_nodes
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, dst[order].astype(np.int64)

    def edge_set(self) -> set[frozenset[str]]:
        return {frozenset((self.nodes[i], self.nodes[j])) for i, j in self.edges.tolist()}


def make_cascade_graph(cascade_id: str, root_tweet_id: str, nodes: list[str],
                       pairs: Iterable[tuple[int, int]]) -> CascadeGraph:
    uniq = {(min(i, j), max(i, j)) for i, j in pairs if i != j}
    edges = np.array(sorted(uniq), dtype=np.int64).reshape(-1, 2)
    return CascadeGraph(cascade_id, root_tweet_id, tuple(nodes), edges,
                        {u: i for i, u in enumerate(nodes)})


def reconstruct_cascade_graph(cascade: Cascade, social: SocialGraph,
                              direction: str = "either") -> CascadeGraph:
    """Star graph on the root plus prior social ties among retweeters.

    A social edge ``u -> v`` (u follows v) between two retweeters is added
    when its timestamp is strictly earlier than u's first retweet of this
    root.  Edges in both orientations are examined (``direction="either"``).
    With ``direction="strict"`` the edge is further required to point from
    the later retweeter to an earlier one, i.e. only ties along which the
    content could have flowed are kept.
    """
    if direction not in ("either", "strict"):
        raise ValueError(f"unknown direction {direction!r}")
    nodes = cascade.users()
    index = {u: i for i, u in enumerate(nodes)}
    first = cascade.first_retweet
    pairs = [(0, i) for i in range(1, len(nodes))]
    for u, t_u in first.items():
        for v, ts in social.successors(u).items():
            t_v = first.get(v)
            if t_v is None or ts >= t_u:
                continue
            if direction == "strict" and not t_v < t_u:
                continue
            pairs.append((index[u], index[v]))
    return make_cascade_graph(cascade.cascade_id, cascade.root_tweet.tweet_id, nodes, pairs)


def is_connected(graph: CascadeGraph) -> bool:
    if graph.n_nodes == 0:
        return False
    indptr, indices = graph.csr()
    seen = np.zeros(graph.n_nodes, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in indices[indptr[u]:indptr[u + 1]]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())


def write_cascade_edgelist(graph: CascadeGraph, fh) -> None:
    fh.write(f"# cascade {graph.cascade_id} root_tweet {graph.root_tweet_id} nodes {graph.n_nodes}\n")
    for i, j in graph.edges.tolist():
        fh.write(f"{graph.nodes[i]}\t{graph.nodes[j]}\n")
