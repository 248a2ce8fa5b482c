import numpy as np
import pytest

from metacascade.synth import SynthConfig, generate_synthetic


def retweeter_counts(data):
    roots = set(data.cascade_label)
    seen: dict[str, set] = {r: set() for r in roots}
    for e in data.events:
        if e["kind"] == "retweet" and e.get("ref_tweet_id") in seen:
            seen[e["ref_tweet_id"]].add(e["user_id"])
    return np.array([len(v) for v in seen.values()])


def test_generation_is_deterministic():
    cfg = SynthConfig(n_cascades=30, n_users=300, seed=4)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    assert a.events == b.events and a.labels == b.labels and a.annotations == b.annotations
    assert generate_synthetic(SynthConfig(n_cascades=30, n_users=300, seed=5)).events != a.events


def test_mean_cascade_size_close_to_target():
    data = generate_synthetic(SynthConfig(n_cascades=600, n_users=4000, mean_cascade_size=20.0, seed=1))
    counts = retweeter_counts(data)
    assert counts.size == 600 and counts.min() >= 3
    assert abs(counts.mean() - 20.0) / 20.0 < 0.05


def test_full_alignment_makes_community_predict_label():
    data = generate_synthetic(SynthConfig(n_cascades=200, n_users=1500, label_alignment=1.0, seed=2))
    for tid, c in data.cascade_community.items():
        assert data.cascade_label[tid] == ("fake" if c == 0 else "non_fake")


def test_half_alignment_is_uninformative():
    data = generate_synthetic(SynthConfig(n_cascades=2000, n_users=6000, label_alignment=0.5, seed=3))
    agree = np.mean([data.cascade_label[t] == ("fake" if c == 0 else "non_fake")
                     for t, c in data.cascade_community.items()])
    assert abs(agree - 0.5) < 0.05


def test_retweeters_mostly_from_root_community():
    data = generate_synthetic(SynthConfig(n_cascades=100, n_users=1000, intra_rate=0.8, seed=6))
    same = total = 0
    for e in data.events:
        if e["kind"] == "retweet" and e["ref_tweet_id"] in data.cascade_community:
            total += 1
            same += data.user_community[e["user_id"]] == data.cascade_community[e["ref_tweet_id"]]
    assert 0.75 < same / total < 0.85


@pytest.mark.parametrize("kw", [
    dict(communities=3), dict(label_alignment=0.3), dict(topic_alignment=1.2), dict(intra_rate=-0.1),
    dict(n_cascades=0), dict(mean_cascade_size=2.0, min_cascade_size=3), dict(n_users=20, mean_cascade_size=15.0),
])
def test_invalid_config_rejected(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)
