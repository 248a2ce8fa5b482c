import io
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metacascade.cascade import (
    Cascade,
    group_cascades,
    is_connected,
    reconstruct_cascade_graph,
    write_cascade_edgelist,
)
from metacascade.socialnet import SocialGraph

from conftest import ev


def _root_and_retweets(n, url=("http://x/",), t0=100):
    evs = [ev("r", "root", t0, urls=url)]
    evs += [ev(f"rt{k}", f"u{k}", t0 + 10 + k, "retweet", "r", "root") for k in range(n)]
    return evs


def test_small_cascade_dropped_by_threshold():
    assert group_cascades(_root_and_retweets(3), min_retweeters=100) == []


def test_cascade_kept_with_low_threshold():
    (c,) = group_cascades(_root_and_retweets(3), min_retweeters=2)
    assert len(c.unique_retweeters) == 3 and c.root_user == "root"


def test_root_without_url_excluded():
    out = group_cascades(_root_and_retweets(3, url=()), min_retweeters=1, require_url=True)
    assert out == [] and out.stats["no_url"] == 1
    assert len(group_cascades(_root_and_retweets(3, url=()), min_retweeters=1, require_url=False)) == 1


def test_orphans_early_and_quotes():
    evs = _root_and_retweets(2)
    evs.append(ev("o1", "z", 500, "retweet", "missing", "nobody"))
    evs.append(ev("e1", "y", 50, "retweet", "r", "root"))
    evs.append(ev("q1", "w", 300, "quote", "r", "root"))
    (c,) = group_cascades(evs, min_retweeters=1)
    assert c.unique_retweeters == {"u0", "u1"}
    assert group_cascades(evs, min_retweeters=1).stats["orphans"] == 1
    assert group_cascades(evs, min_retweeters=1).stats["early_retweets"] == 1


def test_repeat_retweets_retained_but_counted_once():
    evs = _root_and_retweets(2)
    evs.append(ev("rt9", "u0", 400, "retweet", "r", "root"))
    (c,) = group_cascades(evs, min_retweeters=2)
    assert len(c.retweets) == 3 and len(c.unique_retweeters) == 2
    assert c.first_retweet["u0"] == 110


def test_url_map_expands_root_urls():
    (c,) = group_cascades(_root_and_retweets(1, url=("http://s/",)), 1, url_map={"http://s/": "http://long/"})
    assert c.urls == ("http://long/",)


def _cascade(times, root_ts=0):
    root = ev("r", "root", root_ts, urls=["http://x/"])
    rts = tuple(sorted(((u, t) for u, t in times.items()), key=lambda p: (p[1], p[0])))
    return Cascade(root, rts, ("http://x/",))


def _social(edges):
    g = SocialGraph()
    for (s, d), t in edges.items():
        g.add_interaction(s, d, t)
    return g.freeze()


def test_pure_star_without_interactions():
    g = reconstruct_cascade_graph(_cascade({"a": 5, "b": 6}), SocialGraph().freeze())
    assert g.edge_set() == {frozenset(("root", "a")), frozenset(("root", "b"))}


def test_prior_tie_added():
    g = reconstruct_cascade_graph(_cascade({"a": 10, "b": 5}), _social({("a", "b"): 3}))
    assert frozenset(("a", "b")) in g.edge_set()


def test_tie_after_retweet_ignored():
    g = reconstruct_cascade_graph(_cascade({"a": 10, "b": 5}), _social({("a", "b"): 20}))
    assert frozenset(("a", "b")) not in g.edge_set()


def test_strict_direction_requires_earlier_target():
    # a follows b, but b retweets after a: no flow from b to a
    c = _cascade({"a": 10, "b": 15})
    s = _social({("a", "b"): 3})
    assert frozenset(("a", "b")) in reconstruct_cascade_graph(c, s, "either").edge_set()
    assert frozenset(("a", "b")) not in reconstruct_cascade_graph(c, s, "strict").edge_set()


def test_canonical_order_and_header():
    g = reconstruct_cascade_graph(_cascade({"b": 5, "a": 5, "c": 1}), SocialGraph().freeze())
    assert list(g.nodes) == ["root", "c", "a", "b"]
    buf = io.StringIO()
    write_cascade_edgelist(g, buf)
    assert buf.getvalue().splitlines()[0] == "# cascade r root_tweet r nodes 4"


def brute_force_edges(cascade, social, direction="either"):
    """Enumerate every unordered node pair and apply the timestamp rule directly."""
    first = cascade.first_retweet
    out = {frozenset((cascade.root_user, r)) for r in first}
    for u, v in itertools.combinations(sorted(first), 2):
        for a, b in ((u, v), (v, u)):
            ts = social.edges.get((a, b))
            if ts is None or not ts < first[a]:
                continue
            if direction == "strict" and not first[b] < first[a]:
                continue
            out.add(frozenset((u, v)))
    return out


def random_instance(rng, n_users=None):
    n = n_users or int(rng.integers(1, 15))
    users = [f"u{i}" for i in range(n)]
    times = {u: int(rng.integers(1, 50)) for u in users}
    social = SocialGraph()
    for _ in range(int(rng.integers(0, 3 * n + 1))):
        a, b = rng.choice(n + 1, 2)
        pool = users + ["outsider"]
        social.add_interaction(pool[a], pool[b], int(rng.integers(0, 60)))
    return _cascade(times), social.freeze()


@pytest.mark.parametrize("direction", ["either", "strict"])
def test_reconstruction_matches_brute_force(direction):
    rng = np.random.default_rng(7)
    for _ in range(200):
        c, s = random_instance(rng)
        g = reconstruct_cascade_graph(c, s, direction)
        assert g.edge_set() == brute_force_edges(c, s, direction)
        assert is_connected(g)
        n = len(c.unique_retweeters)
        assert n <= g.n_edges <= n + n * (n - 1) // 2


@given(st.randoms())
def test_reconstruction_order_independent(rnd):
    rng = np.random.default_rng(rnd.randrange(2**32))
    c, s = random_instance(rng)
    shuffled = list(c.retweets)
    rnd.shuffle(shuffled)
    c2 = Cascade(c.root_tweet, tuple(shuffled), c.urls)
    g1, g2 = reconstruct_cascade_graph(c, s), reconstruct_cascade_graph(c2, s)
    assert g1.edge_set() == g2.edge_set()


def test_graph_has_no_self_loops_or_duplicates():
    rng = np.random.default_rng(1)
    for _ in range(50):
        c, s = random_instance(rng)
        g = reconstruct_cascade_graph(c, s)
        assert np.all(g.edges[:, 0] < g.edges[:, 1])
        assert len({tuple(e) for e in g.edges.tolist()}) == g.n_edges
