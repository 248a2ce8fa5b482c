import json

import pytest
from hypothesis import HealthCheck, settings

from metacascade.ingest import TweetEvent
from metacascade.pipeline import make_config
from metacascade.synth import SynthConfig, generate_synthetic, write_synthetic

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def ev(tweet_id, user_id, ts, kind="original", ref=None, ref_user=None, urls=(), mentions=(), text=""):
    return TweetEvent(tweet_id, user_id, ts, text, kind, ref, ref_user, tuple(urls), tuple(mentions))


def record(tweet_id, user_id, ts, **kw):
    rec = {"tweet_id": tweet_id, "user_id": user_id, "created_at": ts, "text": kw.pop("text", ""),
           "kind": kw.pop("kind", "original")}
    rec.update(kw)
    return json.dumps(rec)


def desk_config(paths, seed=0, **overrides):
    ov = dict(events=str(paths["events"]), labels=str(paths["labels"]),
              annotations=str(paths["annotations"]), redirects=str(paths["redirects"]),
              resolver="stub", seed=str(seed))
    ov.update({k: str(v) for k, v in overrides.items()})
    return make_config("desk", overrides=ov)


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    cfg = SynthConfig(n_cascades=120, n_users=900, seed=11)
    data = generate_synthetic(cfg)
    paths = write_synthetic(data, tmp_path_factory.mktemp("synth"), cfg)
    return data, paths


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
