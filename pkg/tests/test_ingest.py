import io
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from metacascade.ingest import (
    IngestError,
    LabelRecord,
    StubResolver,
    ValidationError,
    expand_urls,
    get_schema,
    load_annotations,
    merge_label_sources,
    parse_events,
    parse_label_lines,
    parse_time,
    read_events,
    unshorten_url,
)

from conftest import record


def test_single_retweet_line():
    store = parse_events([record("t2", "b", 100, kind="retweet", ref_tweet_id="t1", ref_user_id="a")])
    assert len(store) == 1
    assert store.events["t2"].kind == "retweet"
    assert store.events["t2"].ref_user_id == "a"


def test_duplicate_tweet_ids_counted():
    line = record("t1", "a", 100)
    store = parse_events([line, line])
    assert len(store) == 1
    assert store.stats.duplicates == 1


def test_profile_snapshots_keep_maxima():
    lines = [
        record("t1", "a", 100, followers_count=10, friends_count=7, account_created_at=50),
        record("t2", "a", 200, followers_count=25, friends_count=3, account_created_at=40),
    ]
    p = parse_events(lines).profiles["a"]
    assert p.followers_count == 25
    assert p.friends_count == 7
    assert p.account_created_at == 40


def test_malformed_lines_skipped_then_fatal_over_tolerance():
    good = [record(f"t{i}", "a", i) for i in range(200)]
    store = parse_events(good + ["{not json"])
    assert store.stats.malformed == 1 and len(store) == 200
    with pytest.raises(ValidationError):
        parse_events(good[:10] + ["{not json"])


def test_reference_required_for_non_original_kinds():
    lines = [record(f"t{i}", "a", i) for i in range(300)]
    lines.append(record("bad", "a", 5, kind="reply"))
    store = parse_events(lines)
    assert "bad" not in store.events and store.stats.malformed == 1


def test_unreadable_stream_is_io_error(tmp_path):
    with pytest.raises(IngestError):
        read_events(tmp_path / "missing.jsonl")

    class Broken:
        def __iter__(self):
            raise OSError("disk gone")

    with pytest.raises(IngestError):
        parse_events(Broken())


def test_time_window_drops_events():
    schema = get_schema("flat", time_window=(100, 200))
    store = parse_events([record("t1", "a", 50), record("t2", "a", 150)], schema)
    assert list(store.events) == ["t2"] and store.stats.out_of_window == 1


def test_parse_time_formats():
    assert parse_time(0) == 0
    assert parse_time("1970-01-01T00:01:00Z") == 60
    assert parse_time("Thu Jan 01 00:00:10 +0000 1970") == 10


def test_twitter_v1_schema_infers_retweet_and_embeds_root():
    raw = {
        "id_str": "2", "created_at": "Wed Sep 21 10:00:00 +0000 2016", "text": "RT @a: hi",
        "user": {"id_str": "b", "followers_count": 3, "created_at": "Mon Jan 02 00:00:00 +0000 2012"},
        "entities": {"urls": [{"expanded_url": "https://x.org/1"}], "user_mentions": [{"id_str": "a"}]},
        "retweeted_status": {
            "id_str": "1", "created_at": "Wed Sep 21 09:00:00 +0000 2016", "text": "hi",
            "user": {"id_str": "a", "followers_count": 9},
            "entities": {"urls": [{"expanded_url": "https://x.org/1"}], "user_mentions": []},
        },
    }
    store = parse_events([json.dumps(raw)], "twitter_v1")
    assert store.events["2"].kind == "retweet"
    assert store.events["2"].ref_tweet_id == "1" and store.events["2"].ref_user_id == "a"
    assert store.events["1"].kind == "original"
    assert store.events["2"].urls == ("https://x.org/1",)
    assert store.profiles["a"].followers_count == 9


def test_parse_is_idempotent(small_synth):
    _, paths = small_synth
    text = paths["events"].read_text().splitlines()
    a, b = parse_events(text), parse_events(text)
    assert a.events == b.events and a.profiles == b.profiles


# -- URL expansion -----------------------------------------------------------


def test_unshorten_no_redirect():
    r = unshorten_url("https://a.org/x", StubResolver({}))
    assert r.url == "https://a.org/x" and r.resolved


def test_unshorten_chain():
    res = StubResolver({"http://A/": "http://B/", "http://B/": "http://C/"})
    r = unshorten_url("http://A/", res, max_hops=5)
    assert r.url == "http://C/" and r.resolved and r.hops == 2


def test_unshorten_loop_returns_a_unresolved():
    res = StubResolver({"http://A/": "http://B/", "http://B/": "http://A/"})
    r = unshorten_url("http://A/", res, max_hops=5)
    assert r.url == "http://A/" and not r.resolved


def test_unshorten_hop_limit():
    chain = {f"http://h{i}/": f"http://h{i + 1}/" for i in range(10)}
    r = unshorten_url("http://h0/", StubResolver(chain), max_hops=3)
    assert r.url == "http://h3/" and not r.resolved


def test_unshorten_resolver_failure_returns_input():
    res = StubResolver({"http://A/": "http://B/"}, failing={"http://A/"})
    r = unshorten_url("http://A/", res)
    assert r.url == "http://A/" and not r.resolved


def test_unshorten_rejects_relative_url():
    with pytest.raises(ValueError):
        unshorten_url("not a url", StubResolver({}))


def test_unshorten_cache_used_and_agrees():
    res = StubResolver({"http://A/": "http://B/", "http://B/": "http://C/"})
    cache = {}
    first = unshorten_url("http://A/", res, cache=cache)
    calls = res.calls
    second = unshorten_url("http://A/", res, cache=cache)
    assert first == second == unshorten_url("http://A/", StubResolver(res.redirects))
    assert res.calls == calls


@given(st.dictionaries(st.sampled_from([f"http://n{i}/" for i in range(6)]),
                       st.sampled_from([f"http://n{i}/" for i in range(6)])),
       st.integers(0, 6))
def test_unshorten_cache_insensitive(redirects, max_hops):
    urls = [f"http://n{i}/" for i in range(6)]
    cache = {}
    cached = expand_urls(urls + urls, StubResolver(redirects), max_hops, cache)
    plain = {u: unshorten_url(u, StubResolver(redirects), max_hops).url for u in urls}
    assert cached == plain


# -- labels ------------------------------------------------------------------


def test_merge_agreeing_sources():
    s = merge_label_sources([LabelRecord("u1", "fake", "A"), LabelRecord("u1", "fake", "B")])
    assert s.get("u1") == "fake" and s.sources["u1"] == ("A", "B")


def test_merge_conflict_gives_unknown():
    s = merge_label_sources([LabelRecord("u1", "fake", "A"), LabelRecord("u1", "non_fake", "B")])
    assert s.get("u1") == "unknown" and "u1" in s.conflicted


def test_merge_counts():
    s = merge_label_sources([LabelRecord("u1", "fake", "A"), LabelRecord("u2", "non_fake", "A"),
                             LabelRecord("u3", "unknown", "A")])
    assert s.counts() == {"fake": 1, "non_fake": 1, "unknown": 1}


def test_merge_empty():
    assert merge_label_sources([]).labels == {}


def test_unknown_vote_does_not_override():
    s = merge_label_sources([LabelRecord("u1", "unknown", "A"), LabelRecord("u1", "fake", "B")])
    assert s.get("u1") == "fake"


@given(st.lists(st.tuples(st.sampled_from(["u1", "u2", "u3"]),
                          st.sampled_from(["fake", "non_fake", "unknown"]),
                          st.sampled_from(["A", "B", "C"])), max_size=30),
       st.randoms())
def test_merge_order_independent(rows, rnd):
    records = [LabelRecord(*r) for r in rows]
    shuffled = records[:]
    rnd.shuffle(shuffled)
    assert merge_label_sources(records) == merge_label_sources(shuffled)


def test_label_csv_with_header_and_aliases():
    text = "url,label,source\nhttp://a/,FAKE,s1\nhttp://b/,real,s2\n"
    recs = parse_label_lines(io.StringIO(text))
    assert [(r.url, r.label) for r in recs] == [("http://a/", "fake"), ("http://b/", "non_fake")]


# -- annotations -------------------------------------------------------------


def ann(tid, *topics, label="positive", score=0.98, **kw):
    rec = {"tweet_id": tid, "topic_ew": topics[0], "topic_pmi": topics[1], "topic_idf": topics[2],
           "sentiment_label": label, "sentiment_score": score}
    rec.update(kw)
    return json.dumps(rec)


def test_annotation_roundtrip():
    s = load_annotations([ann("t1", 3, 7, 1)])
    r = s.get("t1")
    assert (r.topic_ew, r.topic_pmi, r.topic_idf, r.sentiment_label, r.sentiment_score) == (3, 7, 1, 2, 0.98)


def test_annotation_score_out_of_range_rejected():
    s = load_annotations([ann("t1", 3, 7, 1, score=1.7)])
    assert s.get("t1") is None and s.rejected == 1


def test_annotation_last_wins():
    s = load_annotations([ann("t1", 3, 7, 1), ann("t1", 4, 4, 4, label="negative")])
    assert s.get("t1").topic_ew == 4 and s.get("t1").sentiment_label == 1 and s.overwritten == 1


def test_annotation_embedding_length_constant():
    s = load_annotations([ann("t1", 1, 1, 1, text_embedding=[0.1, 0.2]),
                          ann("t2", 1, 1, 1, text_embedding=[0.1])])
    assert s.embedding_dim == 2 and s.rejected == 1 and len(s) == 1


def test_annotation_negative_topic_rejected():
    assert load_annotations([ann("t1", -2, 1, 1)]).rejected == 1


def test_synthetic_roundtrip_zero_malformed(small_synth):
    _, paths = small_synth
    store = read_events(paths["events"])
    assert store.stats.malformed == 0 and store.stats.duplicates == 0
    assert load_annotations(paths["annotations"].read_text().splitlines()).rejected == 0
    with open(paths["labels"]) as fh:
        assert parse_label_lines(fh)


def test_shuffled_event_order_gives_same_store(small_synth):
    _, paths = small_synth
    lines = paths["events"].read_text().splitlines()
    shuffled = lines[:]
    random.Random(0).shuffle(shuffled)
    assert parse_events(lines).events == parse_events(shuffled).events
