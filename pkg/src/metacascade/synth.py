"""Planted two-community benchmark written in the ingest file formats.

Users belong to one of two communities.  Cascades are rooted in a
community and draw most retweeters from it; a cascade's url is labeled
``fake`` for community 0 (``non_fake`` for community 1) with probability
``label_alignment`` and with the opposite label otherwise.  User profiles
carry a weak community-dependent shift, so a single cascade is only a
noisy witness of its community while retweeter overlap ties cascades of
the same community together.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

T0 = 1_474_416_000  # 2016-09-21 00:00:00 UTC
DAY = 86_400
LANGS = ("en", "es", "de", "fr")
_WORDS = tuple(f"w{i}" for i in range(400))


@dataclass(frozen=True)
class SynthConfig:
    n_cascades: int = 500
    n_users: int = 3000
    communities: int = 2
    label_alignment: float = 0.9
    mean_cascade_size: float = 20.0
    min_cascade_size: int = 3
    intra_rate: float = 0.8
    popularity_exponent: float = 0.8
    social_degree: float = 4.0
    social_intra_rate: float = 0.9
    profile_signal: float = 0.25
    topic_alignment: float = 0.5
    topics_per_class: int = 5
    unlabeled_fraction: float = 0.05
    conflict_fraction: float = 0.02
    short_url_fraction: float = 0.2
    quote_rate: float = 0.05
    days: int = 47
    seed: int = 0

    def __post_init__(self):
        if self.communities != 2:
            raise ValueError("only two communities are supported")
        for name in ("label_alignment", "topic_alignment"):
            if not 0.5 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0.5, 1]")
        for name in ("intra_rate", "social_intra_rate", "unlabeled_fraction", "conflict_fraction",
                     "short_url_fraction", "quote_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_cascades < 1 or self.n_users < 4 or self.min_cascade_size < 1:
            raise ValueError("sizes must be positive")
        if self.mean_cascade_size < self.min_cascade_size:
            raise ValueError("mean_cascade_size must be >= min_cascade_size")
        if self.mean_cascade_size > self.n_users / 2 - 1:
            raise ValueError("mean_cascade_size too large for the user pool")


@dataclass
class SynthData:
    events: list[dict]
    labels: list[tuple[str, str, str]]
    annotations: list[dict]
    redirects: dict[str, str]
    cascade_community: dict[str, int]
    cascade_label: dict[str, str]
    user_community: dict[str, int]


def generate_synthetic(cfg: SynthConfig) -> SynthData:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_users
    uid = [f"u{i:06d}" for i in range(n)]
    community = np.arange(n) % 2
    rng.shuffle(community)
    members = [np.flatnonzero(community == c) for c in (0, 1)]
    popularity = [rng.permutation(np.arange(1, m.size + 1) ** -cfg.popularity_exponent) for m in members]
    popularity = [p / p.sum() for p in popularity]

    # profiles: a small shift of log-scale counts per community
    sign = np.where(community == 0, -1.0, 1.0)
    s = cfg.profile_signal
    followers = np.exp(rng.normal(6.0 + s * sign, 1.5)).astype(np.int64)
    friends = np.exp(rng.normal(5.5 + s * sign, 1.2)).astype(np.int64)
    statuses = np.exp(rng.normal(8.0 - s * sign, 1.3)).astype(np.int64)
    favourites = np.exp(rng.normal(7.0 + s * sign, 1.6)).astype(np.int64)
    created = T0 - (np.exp(rng.normal(6.5 - s * sign, 0.8)) * DAY).astype(np.int64)
    verified = rng.random(n) < 0.04
    lang_p = {0: [0.5, 0.3, 0.1, 0.1], 1: [0.5, 0.1, 0.3, 0.1]}
    lang = [LANGS[rng.choice(4, p=lang_p[int(c)])] for c in community]

    def user_fields(i: int) -> dict:
        return {
            "user_id": uid[i],
            "account_created_at": int(created[i]),
            "followers_count": int(followers[i]),
            "friends_count": int(friends[i]),
            "statuses_count": int(statuses[i]),
            "favourites_count": int(favourites[i]),
            "verified": bool(verified[i]),
            "lang": lang[i],
        }

    events: list[dict] = []
    counter = [0]

    def next_id() -> str:
        counter[0] += 1
        return f"t{counter[0]:08d}"

    def emit(i, ts, kind="original", text="", ref=None, urls=(), mentions=()):
        tid = next_id()
        rec = {"tweet_id": tid, "created_at": int(ts), "text": text, "kind": kind,
               "urls": list(urls), "mentions": [uid[m] for m in mentions]}
        if ref is not None:
            rec["ref_tweet_id"], rec["ref_user_id"] = ref[0], uid[ref[1]]
        rec.update(user_fields(i))
        events.append(rec)
        return tid

    def draw_user(c: int) -> int:
        return int(members[c][rng.choice(members[c].size, p=popularity[c])])

    # prior social interactions during the first days of the window
    horizon = cfg.days * DAY
    early = horizon // 4
    status_of = {}
    for i in range(n):
        status_of[i] = emit(i, T0 + rng.integers(0, early // 4), text=" ".join(rng.choice(_WORDS, 6)))
    for i in range(n):
        for _ in range(rng.poisson(cfg.social_degree)):
            c = int(community[i]) if rng.random() < cfg.social_intra_rate else 1 - int(community[i])
            j = draw_user(c)
            if j == i:
                continue
            ts = T0 + early // 4 + rng.integers(0, horizon - early // 4)
            if rng.random() < 0.5:
                emit(i, ts, text=f"@{uid[j]} " + " ".join(rng.choice(_WORDS, 5)), mentions=[j])
            else:
                emit(i, ts, kind="reply", text=" ".join(rng.choice(_WORDS, 5)), ref=(status_of[j], j))

    labels: list[tuple[str, str, str]] = []
    annotations: list[dict] = []
    redirects: dict[str, str] = {}
    cascade_community: dict[str, int] = {}
    cascade_label: dict[str, str] = {}
    extra = max(0.0, cfg.mean_cascade_size - cfg.min_cascade_size)
    for k in range(cfg.n_cascades):
        c = int(rng.integers(0, 2))
        root = draw_user(c)
        t_root = T0 + early + rng.integers(0, horizon - early - DAY)
        aligned = rng.random() < cfg.label_alignment
        label = ("fake" if c == 0 else "non_fake") if aligned else ("non_fake" if c == 0 else "fake")
        url = f"https://news{k % 97}.example.org/story/{k}"
        urls = [url]
        if rng.random() < cfg.short_url_fraction:
            short = f"https://sho.rt/{k:x}"
            redirects[short] = url
            urls = [short]
        topic_group = (0 if label == "fake" else 1) if rng.random() < cfg.topic_alignment else (
            1 if label == "fake" else 0)
        topics = [topic_group * cfg.topics_per_class + int(rng.integers(0, cfg.topics_per_class))
                  for _ in range(3)]
        text = " ".join(rng.choice(_WORDS, 10)) + f" topic{topics[0]}"
        conflict = rng.random() < cfg.conflict_fraction
        if conflict:
            other = f"https://other{k % 13}.example.net/{k}"
            urls.append(other)
            labels.append((other, "non_fake" if label == "fake" else "fake", "synthA"))
        root_tid = emit(root, t_root, text=text, urls=urls)
        cascade_community[root_tid] = c
        cascade_label[root_tid] = label

        unlabeled = rng.random() < cfg.unlabeled_fraction
        labels.append((url, "unknown" if unlabeled else label, "synthA"))
        if rng.random() < 0.5:
            labels.append((url, "unknown" if unlabeled else label, "synthB"))

        annotations.append({
            "tweet_id": root_tid, "topic_ew": topics[0], "topic_pmi": topics[1], "topic_idf": topics[2],
            "sentiment_label": "positive" if rng.random() < 0.5 else "negative",
            "sentiment_score": round(float(rng.uniform(0.5, 1.0)), 4),
        })

        size = cfg.min_cascade_size + int(rng.poisson(extra))
        chosen: set[int] = set()
        attempts = 0
        while len(chosen) < size and attempts < 50 * size:
            attempts += 1
            rc = c if rng.random() < cfg.intra_rate else 1 - c
            u = draw_user(rc)
            if u != root:
                chosen.add(u)
        delays = np.sort(rng.exponential(6 * 3600, size=len(chosen))).astype(np.int64) + 1
        order = rng.permutation(sorted(chosen))
        for u, d in zip(order.tolist(), delays):
            emit(u, t_root + d, kind="retweet", text=f"RT @{uid[root]}: {text}", ref=(root_tid, root),
                 urls=urls, mentions=[root])
        if rng.random() < cfg.quote_rate:
            q = draw_user(c)
            if q != root:
                emit(q, t_root + int(delays[-1]) + 60, kind="quote", text="look " + text,
                     ref=(root_tid, root), urls=urls)

    events.sort(key=lambda e: (e["created_at"], e["tweet_id"]))
    return SynthData(events, labels, annotations, redirects, cascade_community, cascade_label,
                     {uid[i]: int(community[i]) for i in range(n)})


def write_synthetic(data: SynthData, outdir: str | os.PathLike, cfg: SynthConfig | None = None) -> dict[str, Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / "events.jsonl",
        "labels": out / "labels.csv",
        "annotations": out / "annotations.jsonl",
        "redirects": out / "redirects.json",
        "truth": out / "truth.json",
    }
    with open(paths["events"], "w", encoding="utf-8") as fh:
        for e in data.events:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    with open(paths["labels"], "w", encoding="utf-8", newline="") as fh:
        fh.write("url,label,source\n")
        for url, lab, src in data.labels:
            fh.write(f"{url},{lab},{src}\n")
    with open(paths["annotations"], "w", encoding="utf-8") as fh:
        for a in data.annotations:
            fh.write(json.dumps(a, sort_keys=True) + "\n")
    with open(paths["redirects"], "w", encoding="utf-8") as fh:
        json.dump(data.redirects, fh, sort_keys=True, indent=0)
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump({"config": asdict(cfg) if cfg else None, "cascade_community": data.cascade_community,
                   "cascade_label": data.cascade_label}, fh, sort_keys=True)
    return paths
