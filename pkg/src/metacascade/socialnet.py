"""Interaction graph approximating the follower graph.

An edge ``(i, j)`` means user ``i`` interacted with content of user ``j``
(reply, retweet, quote or mention) and is read as "i follows j".  Repeated
interactions collapse to the earliest timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .ingest import EventStore, TweetEvent


@dataclass
class SocialGraph:
    nodes: set[str] = field(default_factory=set)
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    _succ: dict[str, dict[str, int]] | None = field(default=None, repr=False, compare=False)
    _pred: dict[str, dict[str, int]] | None = field(default=None, repr=False, compare=False)

    def add_interaction(self, src: str, dst: str, ts: int) -> None:
        if src == dst:
            return
        if self._succ is not None:
            raise RuntimeError("graph is frozen")
        self.nodes.add(src)
        self.nodes.add(dst)
        prev = self.edges.get((src, dst))
        if prev is None or ts < prev:
            self.edges[(src, dst)] = ts

    def freeze(self) -> SocialGraph:
        """Build forward and reverse adjacency; the graph becomes read-only."""
        if self._succ is None:
            succ: dict[str, dict[str, int]] = {}
            pred: dict[str, dict[str, int]] = {}
            for (s, d), ts in self.edges.items():
                succ.setdefault(s, {})[d] = ts
                pred.setdefault(d, {})[s] = ts
            self._succ, self._pred = succ, pred
        return self

    @property
    def frozen(self) -> bool:
        return self._succ is not None

    def successors(self, user: str) -> dict[str, int]:
        self.freeze()
        return self._succ.get(user, {})

    def predecessors(self, user: str) -> dict[str, int]:
        self.freeze()
        return self._pred.get(user, {})

    def number_of_edges(self) -> int:
        return len(self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SocialGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges


def interactions(event: TweetEvent) -> Iterable[tuple[str, str, int]]:
    if event.kind != "original" and event.ref_user_id:
        yield event.user_id, event.ref_user_id, event.created_at
    for m in event.mentions:
        yield event.user_id, m, event.created_at


def build_interaction_graph(events: EventStore | Iterable[TweetEvent]) -> SocialGraph:
    g = SocialGraph()
    for ev in events:
        for src, dst, ts in interactions(ev):
            g.add_interaction(src, dst, ts)
    return g.freeze()


def induced_subgraph(graph: SocialGraph, users: Iterable[str]) -> SocialGraph:
    users = set(users)
    sub = SocialGraph(nodes=set(users))
    if len(users) * 4 < len(graph.edges):
        for u in users:
            for v, ts in graph.successors(u).items():
                if v in users:
                    sub.edges[(u, v)] = ts
        sub.edges = dict(sorted(sub.edges.items()))
    else:
        sub.edges = {e: ts for e, ts in graph.edges.items() if e[0] in users and e[1] in users}
    return sub.freeze()


@dataclass(frozen=True)
class OverlapReport:
    empirical_edges: int
    truth_edges: int
    shared_edges: int
    fraction: float | None  # None when the empirical graph has no edges


def compare_to_ground_truth(empirical: SocialGraph, truth: SocialGraph) -> OverlapReport:
    """Share of empirical (directed) edges that also appear in the ground truth."""
    emp = set(empirical.edges)
    shared = len(emp & set(truth.edges))
    frac = shared / len(emp) if emp else None
    return OverlapReport(len(emp), len(truth.edges), shared, frac)


# ---------------------------------------------------------------------------
# persistence

EDGELIST_HEADER = "# metacascade social edge list v1: src<TAB>dst<TAB>earliest_epoch_seconds"


def write_edgelist(graph: SocialGraph, fh) -> None:
    fh.write(EDGELIST_HEADER + "\n")
    for (s, d), ts in sorted(graph.edges.items()):
        fh.write(f"{s}\t{d}\t{ts}\n")
    isolated = sorted(graph.nodes - {u for e in graph.edges for u in e})
    for u in isolated:
        fh.write(f"# node\t{u}\n")


def read_edgelist(fh) -> SocialGraph:
    g = SocialGraph()
    for line in fh:
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("# node\t"):
            g.nodes.add(line.split("\t", 1)[1])
            continue
        if line.startswith("#"):
            continue
        s, d, ts = line.split("\t")
        g.add_interaction(s, d, int(ts))
    return g.freeze()


def save_snapshot(graph: SocialGraph, path) -> None:
    """Binary adjacency snapshot (npz): sorted user ids plus int64 edge arrays."""
    users = np.array(sorted(graph.nodes), dtype=object).astype(str)
    index = {u: i for i, u in enumerate(users)}
    items = sorted(graph.edges.items())
    src = np.array([index[s] for (s, _), _ in items], dtype=np.int64)
    dst = np.array([index[d] for (_, d), _ in items], dtype=np.int64)
    ts = np.array([t for _, t in items], dtype=np.int64)
    with open(path, "wb") as fh:
        np.savez(fh, users=users, src=src, dst=dst, ts=ts)


def load_snapshot(path) -> SocialGraph:
    with np.load(path) as z:
        users = z["users"].tolist()
        g = SocialGraph(nodes=set(users))
        for s, d, t in zip(z["src"].tolist(), z["dst"].tolist(), z["ts"].tolist()):
            g.edges[(users[s], users[d])] = t
    return g.freeze()
