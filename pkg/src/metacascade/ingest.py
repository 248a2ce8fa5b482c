"""Parsing of event streams, URL labels and precomputed text annotations."""

from __future__ import annotations

import csv
import json
import logging
import math
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping, NamedTuple, Protocol

logger = logging.getLogger(__name__)

KINDS = ("original", "retweet", "reply", "quote")
LABELS = ("fake", "non_fake", "unknown")

_LABEL_ALIASES = {
    "fake": "fake",
    "false": "fake",
    "non_fake": "non_fake",
    "non-fake": "non_fake",
    "nonfake": "non_fake",
    "real": "non_fake",
    "true": "non_fake",
    "unknown": "unknown",
    "": "unknown",
}


class IngestError(Exception):
    """Fatal ingest failure (unreadable input)."""


class ValidationError(IngestError):
    """Too many malformed records in an input stream."""


class MalformedRecord(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class TweetEvent:
    tweet_id: str
    user_id: str
    created_at: int  # UTC epoch seconds
    text: str
    kind: str
    ref_tweet_id: str | None = None
    ref_user_id: str | None = None
    urls: tuple[str, ...] = ()
    mentions: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class UserProfile:
    user_id: str
    account_created_at: int | None = None
    followers_count: int = 0
    friends_count: int = 0
    statuses_count: int = 0
    favourites_count: int = 0
    verified: bool = False
    lang: str = ""

    def merge(self, other: UserProfile) -> UserProfile:
        """Per-field maxima, earliest creation date, first non-empty lang."""
        created = [t for t in (self.account_created_at, other.account_created_at) if t is not None]
        return UserProfile(
            user_id=self.user_id,
            account_created_at=min(created) if created else None,
            followers_count=max(self.followers_count, other.followers_count),
            friends_count=max(self.friends_count, other.friends_count),
            statuses_count=max(self.statuses_count, other.statuses_count),
            favourites_count=max(self.favourites_count, other.favourites_count),
            verified=self.verified or other.verified,
            lang=self.lang or other.lang,
        )


@dataclass
class IngestStats:
    lines: int = 0
    events: int = 0
    malformed: int = 0
    duplicates: int = 0
    out_of_window: int = 0


@dataclass
class EventStore:
    events: dict[str, TweetEvent] = field(default_factory=dict)
    profiles: dict[str, UserProfile] = field(default_factory=dict)
    stats: IngestStats = field(default_factory=IngestStats)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events.values())


# ---------------------------------------------------------------------------
# schema mapping


@dataclass(frozen=True)
class SchemaConfig:
    """Maps external record fields onto :class:`TweetEvent`/:class:`UserProfile`.

    ``fields`` maps internal names to external paths.  A path is a dotted
    key sequence; a segment ending in ``[]`` maps the rest of the path over
    a list, and ``a|b`` tries alternatives left to right.  When ``kind`` is
    not mapped, the kind is inferred from ``infer_kind`` rules, each a
    ``(kind, ref_tweet_path, ref_user_path)`` triple tried in order.
    """

    fields: Mapping[str, str]
    infer_kind: tuple[tuple[str, str, str], ...] = ()
    embedded: tuple[str, ...] = ()
    time_window: tuple[int, int] | None = None
    max_malformed_fraction: float = 0.01


_FLAT_FIELDS = {
    name: name
    for name in (
        "tweet_id", "user_id", "created_at", "text", "kind", "ref_tweet_id",
        "ref_user_id", "urls", "mentions", "account_created_at", "followers_count",
        "friends_count", "statuses_count", "favourites_count", "verified", "lang",
    )
}

_TWITTER_V1_FIELDS = {
    "tweet_id": "id_str|id",
    "user_id": "user.id_str|user.id",
    "created_at": "created_at",
    "text": "full_text|extended_tweet.full_text|text",
    "urls": "entities.urls[].expanded_url",
    "mentions": "entities.user_mentions[].id_str",
    "account_created_at": "user.created_at",
    "followers_count": "user.followers_count",
    "friends_count": "user.friends_count",
    "statuses_count": "user.statuses_count",
    "favourites_count": "user.favourites_count",
    "verified": "user.verified",
    "lang": "user.lang|lang",
}

SCHEMAS: dict[str, SchemaConfig] = {
    "flat": SchemaConfig(fields=_FLAT_FIELDS),
    # raw v1.1 statuses, as returned by the streaming API and FakeHealth rehydration
    "twitter_v1": SchemaConfig(
        fields=_TWITTER_V1_FIELDS,
        infer_kind=(
            ("retweet", "retweeted_status.id_str", "retweeted_status.user.id_str"),
            ("quote", "quoted_status_id_str", "quoted_status.user.id_str"),
            ("reply", "in_reply_to_status_id_str", "in_reply_to_user_id_str"),
        ),
        embedded=("retweeted_status", "quoted_status"),
    ),
}


def get_schema(name_or_schema: str | SchemaConfig, **overrides) -> SchemaConfig:
    schema = SCHEMAS[name_or_schema] if isinstance(name_or_schema, str) else name_or_schema
    return replace(schema, **overrides) if overrides else schema


_MISSING = object()


def _lookup(record: Any, path: str) -> Any:
    for alt in path.split("|"):
        value = _lookup_one(record, alt.split("."))
        if value is not _MISSING and value is not None:
            return value
    return _MISSING


def _lookup_one(record: Any, parts: list[str]) -> Any:
    cur = record
    for i, part in enumerate(parts):
        if part.endswith("[]"):
            seq = cur.get(part[:-2]) if isinstance(cur, dict) else None
            if not isinstance(seq, list):
                return _MISSING
            rest = parts[i + 1:]
            out = []
            for item in seq:
                v = _lookup_one(item, rest) if rest else item
                if v is not _MISSING and v is not None:
                    out.append(v)
            return out
        if not isinstance(cur, dict) or part not in cur:
            return _MISSING
        cur = cur[part]
    return cur


def parse_time(value: Any) -> int:
    """Parse epoch seconds, ISO-8601 or Twitter's ``created_at`` format to UTC seconds."""
    if isinstance(value, bool):
        raise MalformedRecord(f"bad timestamp {value!r}")
    if isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise MalformedRecord(f"bad timestamp {value!r}")
        return int(value)
    if isinstance(value, str):
        s = value.strip()
        if s.lstrip("-").isdigit():
            return int(s)
        try:
            dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
        except ValueError:
            try:
                dt = datetime.strptime(s, "%a %b %d %H:%M:%S %z %Y")
            except ValueError:
                raise MalformedRecord(f"bad timestamp {value!r}") from None
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise MalformedRecord(f"bad timestamp {value!r}")


def _as_str(value: Any) -> str | None:
    if value is _MISSING or value is None:
        return None
    if isinstance(value, (dict, list)):
        raise MalformedRecord(f"expected scalar id, got {type(value).__name__}")
    return str(value)


def _as_count(value: Any) -> int:
    if value is _MISSING or value is None:
        return 0
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise MalformedRecord(f"bad count {value!r}") from None
    if n < 0:
        raise MalformedRecord(f"negative count {n}")
    return n


def _as_str_list(value: Any) -> tuple[str, ...]:
    if value is _MISSING or value is None:
        return ()
    if isinstance(value, str):
        return (value,) if value else ()
    if not isinstance(value, list):
        raise MalformedRecord("expected a list")
    return tuple(str(v) for v in value)


def _as_bool(value: Any) -> bool:
    if value is _MISSING or value is None:
        return False
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes")
    return bool(value)


def record_to_event(record: dict, schema: SchemaConfig) -> tuple[TweetEvent, UserProfile]:
    f = schema.fields

    def get(name):
        return _lookup(record, f[name]) if name in f else _MISSING

    tweet_id = _as_str(get("tweet_id"))
    user_id = _as_str(get("user_id"))
    if not tweet_id or not user_id:
        raise MalformedRecord("missing tweet_id or user_id")
    created = get("created_at")
    if created is _MISSING:
        raise MalformedRecord("missing created_at")
    created_at = parse_time(created)

    kind = _as_str(get("kind"))
    ref_tweet = _as_str(get("ref_tweet_id"))
    ref_user = _as_str(get("ref_user_id"))
    if kind is None:
        kind = "original"
        for rule_kind, tweet_path, user_path in schema.infer_kind:
            rt = _as_str(_lookup(record, tweet_path))
            if rt:
                kind, ref_tweet, ref_user = rule_kind, rt, _as_str(_lookup(record, user_path))
                break
    if kind not in KINDS:
        raise MalformedRecord(f"unknown kind {kind!r}")
    if kind != "original" and (not ref_tweet or not ref_user):
        raise MalformedRecord(f"{kind} without ref_tweet_id/ref_user_id")
    if kind == "original":
        ref_tweet = ref_user = None

    text = get("text")
    event = TweetEvent(
        tweet_id=tweet_id,
        user_id=user_id,
        created_at=created_at,
        text="" if text is _MISSING or text is None else str(text),
        kind=kind,
        ref_tweet_id=ref_tweet,
        ref_user_id=ref_user,
        urls=_as_str_list(get("urls")),
        mentions=_as_str_list(get("mentions")),
    )
    acct = get("account_created_at")
    profile = UserProfile(
        user_id=user_id,
        account_created_at=None if acct is _MISSING or acct is None else parse_time(acct),
        followers_count=_as_count(get("followers_count")),
        friends_count=_as_count(get("friends_count")),
        statuses_count=_as_count(get("statuses_count")),
        favourites_count=_as_count(get("favourites_count")),
        verified=_as_bool(get("verified")),
        lang=_as_str(get("lang")) or "",
    )
    return event, profile


def parse_events(lines: Iterable[str], schema_config: str | SchemaConfig = "flat") -> EventStore:
    """Parse line-delimited JSON event records into an :class:`EventStore`.

    Malformed lines are skipped and counted; if their fraction exceeds
    ``schema.max_malformed_fraction`` a :class:`ValidationError` is raised.
    The first occurrence of a tweet id wins; later ones count as duplicates.
    """
    schema = get_schema(schema_config)
    store = EventStore()
    stats = store.stats

    def add(record: dict, top_level: bool) -> None:
        event, profile = record_to_event(record, schema)
        if schema.time_window is not None:
            lo, hi = schema.time_window
            if not lo <= event.created_at <= hi:
                if top_level:
                    stats.out_of_window += 1
                return
        if event.tweet_id in store.events:
            if top_level:
                stats.duplicates += 1
        else:
            store.events[event.tweet_id] = event
        prev = store.profiles.get(profile.user_id)
        store.profiles[profile.user_id] = profile if prev is None else prev.merge(profile)

    try:
        for line in lines:
            if not line.strip():
                continue
            stats.lines += 1
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise MalformedRecord("record is not an object")
                for path in schema.embedded:
                    nested = _lookup(record, path)
                    if isinstance(nested, dict):
                        try:
                            add(nested, top_level=False)
                        except MalformedRecord:
                            pass
                add(record, top_level=True)
            except (json.JSONDecodeError, MalformedRecord) as exc:
                stats.malformed += 1
                logger.debug("malformed line %d: %s", stats.lines, exc)
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read event stream: {exc}") from exc

    stats.events = len(store.events)
    if stats.lines and stats.malformed / stats.lines > schema.max_malformed_fraction:
        raise ValidationError(
            f"{stats.malformed}/{stats.lines} malformed lines exceeds "
            f"tolerance {schema.max_malformed_fraction:.2%}"
        )
    return store


def read_events(path, schema_config: str | SchemaConfig = "flat") -> EventStore:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_events(fh, schema_config)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# URL expansion


class ResolverError(Exception):
    pass


class Resolver(Protocol):
    def resolve(self, url: str) -> str | None:
        """Return the redirect target of ``url`` or None if it does not redirect."""


class StubResolver:
    def __init__(self, redirects: Mapping[str, str], failing: Iterable[str] = ()):
        self.redirects = dict(redirects)
        self.failing = set(failing)
        self.calls = 0

    def resolve(self, url: str) -> str | None:
        self.calls += 1
        if url in self.failing:
            raise ResolverError(url)
        return self.redirects.get(url)


class _NoRedirect(urllib.request.HTTPRedirectHandler):
    def redirect_request(self, req, fp, code, msg, headers, newurl):
        return None


class HttpResolver:
    """One-hop resolver issuing HEAD requests without following redirects."""

    def __init__(self, timeout: float = 10.0, user_agent: str = "metacascade/0.1"):
        self.timeout = timeout
        self.user_agent = user_agent
        self._opener = urllib.request.build_opener(_NoRedirect)

    def resolve(self, url: str) -> str | None:
        req = urllib.request.Request(url, method="HEAD", headers={"User-Agent": self.user_agent})
        try:
            with self._opener.open(req, timeout=self.timeout):
                return None
        except urllib.error.HTTPError as exc:
            if 300 <= exc.code < 400 and exc.headers.get("Location"):
                return urllib.parse.urljoin(url, exc.headers["Location"])
            raise ResolverError(f"{url}: HTTP {exc.code}") from exc
        except (urllib.error.URLError, OSError) as exc:
            raise ResolverError(f"{url}: {exc}") from exc


class Expansion(NamedTuple):
    url: str
    resolved: bool
    hops: int


def _check_url(url: str) -> None:
    parts = urllib.parse.urlsplit(url)
    if not parts.scheme or not parts.netloc:
        raise ValueError(f"not an absolute URL: {url!r}")


def unshorten_url(url: str, resolver: Resolver, max_hops: int = 10,
                  cache: dict[str, Expansion] | None = None) -> Expansion:
    """Follow the redirect chain of ``url``.

    Loops, hop-limit overruns and resolver failures are not fatal: the last
    URL reached is returned with ``resolved=False``.
    """
    _check_url(url)
    if cache is not None and url in cache:
        return cache[url]
    seen = {url}
    current = url
    result = None
    for hop in range(max_hops + 1):
        try:
            nxt = resolver.resolve(current)
        except ResolverError as exc:
            logger.info("resolver failed on %s: %s", current, exc)
            result = Expansion(url, False, 0)
            break
        if nxt is None or nxt == current:
            result = Expansion(current, True, hop)
            break
        if hop == max_hops:
            result = Expansion(current, False, hop)
            break
        if nxt in seen:
            result = Expansion(nxt, False, hop + 1)
            break
        seen.add(nxt)
        current = nxt
    if cache is not None:
        cache[url] = result
    return result


def expand_urls(urls: Iterable[str], resolver: Resolver, max_hops: int = 10,
                cache: dict[str, Expansion] | None = None) -> dict[str, str]:
    """Map each syntactically valid url to its expansion; invalid ones map to themselves."""
    cache = {} if cache is None else cache
    out = {}
    for u in urls:
        try:
            out[u] = unshorten_url(u, resolver, max_hops, cache).url
        except ValueError:
            out[u] = u
    return out


# ---------------------------------------------------------------------------
# labels


@dataclass(frozen=True, slots=True)
class LabelRecord:
    url: str
    label: str
    source: str


@dataclass
class LabelStore:
    labels: dict[str, str] = field(default_factory=dict)
    sources: dict[str, tuple[str, ...]] = field(default_factory=dict)
    conflicted: set[str] = field(default_factory=set)

    def get(self, url: str) -> str:
        return self.labels.get(url, "unknown")

    def counts(self) -> dict[str, int]:
        out = {k: 0 for k in LABELS}
        for lab in self.labels.values():
            out[lab] += 1
        return out


def normalize_label(raw: str) -> str:
    key = raw.strip().lower()
    if key not in _LABEL_ALIASES:
        raise MalformedRecord(f"unknown label {raw!r}")
    return _LABEL_ALIASES[key]


def merge_label_sources(records: Iterable[LabelRecord]) -> LabelStore:
    """Combine per-source labels, keeping only consistent fake/non_fake verdicts.

    A url labeled both fake and non_fake by different sources becomes
    ``unknown`` and is recorded in ``conflicted``.  ``unknown`` votes never
    override a definitive one.
    """
    votes: dict[str, set[str]] = {}
    sources: dict[str, set[str]] = {}
    for rec in records:
        votes.setdefault(rec.url, set()).add(rec.label)
        sources.setdefault(rec.url, set()).add(rec.source)
    store = LabelStore()
    for url in sorted(votes):
        definitive = votes[url] - {"unknown"}
        if len(definitive) > 1:
            store.labels[url] = "unknown"
            store.conflicted.add(url)
        elif definitive:
            store.labels[url] = definitive.pop()
        else:
            store.labels[url] = "unknown"
        store.sources[url] = tuple(sorted(sources[url]))
    return store


def parse_label_lines(lines: Iterable[str], expand: Mapping[str, str] | None = None) -> list[LabelRecord]:
    """Read ``url,label,source`` rows; a header row is skipped if present."""
    out = []
    for row in csv.reader(lines):
        if not row or not "".join(row).strip():
            continue
        if row[0].strip().lower() == "url":
            continue
        if len(row) < 2:
            raise MalformedRecord(f"label row too short: {row!r}")
        url = row[0].strip()
        if expand is not None:
            url = expand.get(url, url)
        source = row[2].strip() if len(row) > 2 else ""
        out.append(LabelRecord(url, normalize_label(row[1]), source))
    return out


# ---------------------------------------------------------------------------
# annotations


SENTIMENT_CODES = {"positive": 2, "negative": 1, 2: 2, 1: 1, "2": 2, "1": 1}


@dataclass(frozen=True, slots=True)
class AnnotationRecord:
    tweet_id: str
    topic_ew: int
    topic_pmi: int
    topic_idf: int
    sentiment_label: int  # 2 positive, 1 negative
    sentiment_score: float
    text_embedding: tuple[float, ...] | None = None


@dataclass
class AnnotationStore:
    records: dict[str, AnnotationRecord] = field(default_factory=dict)
    rejected: int = 0
    overwritten: int = 0
    embedding_dim: int | None = None

    def get(self, tweet_id: str) -> AnnotationRecord | None:
        return self.records.get(tweet_id)

    def __len__(self) -> int:
        return len(self.records)


def _parse_annotation(obj: Any) -> AnnotationRecord:
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not an object")
    try:
        topics = [int(obj[k]) for k in ("topic_ew", "topic_pmi", "topic_idf")]
        label = SENTIMENT_CODES[obj["sentiment_label"] if not isinstance(obj["sentiment_label"], str)
                                else obj["sentiment_label"].lower()]
        score = float(obj["sentiment_score"])
        tweet_id = str(obj["tweet_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"bad annotation: {exc}") from None
    if any(t < 0 for t in topics):
        raise MalformedRecord("negative topic id")
    if not 0.0 <= score <= 1.0:
        raise MalformedRecord(f"sentiment_score {score} outside [0, 1]")
    emb = obj.get("text_embedding")
    if emb is not None:
        emb = tuple(float(v) for v in emb)
        if not all(math.isfinite(v) for v in emb):
            raise MalformedRecord("non-finite text embedding")
    return AnnotationRecord(tweet_id, *topics, label, score, emb)


def load_annotations(lines: Iterable[str]) -> AnnotationStore:
    """Load line-delimited annotation records; the last record for a tweet wins."""
    store = AnnotationStore()
    for line in lines:
        if not line.strip():
            continue
        try:
            rec = _parse_annotation(json.loads(line))
            if rec.text_embedding is not None:
                if store.embedding_dim is None:
                    store.embedding_dim = len(rec.text_embedding)
                elif len(rec.text_embedding) != store.embedding_dim:
                    raise MalformedRecord("text embedding length mismatch")
        except (json.JSONDecodeError, MalformedRecord) as exc:
            store.rejected += 1
            logger.debug("rejected annotation: %s", exc)
            continue
        if rec.tweet_id in store.records:
            store.overwritten += 1
        store.records[rec.tweet_id] = rec
    return store
