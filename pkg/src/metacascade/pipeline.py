"""Stage orchestration with a content-hashed workspace."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import logging
import pickle
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import gnn
from .cascade import Cascade, CascadeGraph, group_cascades, reconstruct_cascade_graph
from .embed import EmbedParams, embed_cascade, read_embeddings, write_embeddings
from .ingest import (
    AnnotationStore,
    EventStore,
    HttpResolver,
    LabelStore,
    StubResolver,
    expand_urls,
    get_schema,
    load_annotations,
    merge_label_sources,
    parse_events,
    parse_label_lines,
)
from .metagraph import (
    MetaGraph,
    NormStats,
    assemble_node_features,
    attach_edge_features,
    build_metagraph,
    compute_norm_stats,
    disparity_filter,
    load_metagraph,
    save_metagraph,
    to_dot,
    to_edgelist,
    to_graphml,
    transfer_labels,
    user_feature_matrix,
)
from .socialnet import SocialGraph, build_interaction_graph, induced_subgraph, write_edgelist

logger = logging.getLogger(__name__)

STAGES = ("ingest", "socialnet", "cascades", "embed", "metagraph", "filter",
          "train-cascade", "train-metagraph", "evaluate", "export")


class PipelineError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    events: str = ""
    labels: str = ""
    annotations: str = ""
    redirects: str = ""
    resolver: str = "none"  # none | stub | http
    schema: str = "flat"
    workspace: str = "workspace"
    max_malformed_fraction: float = 0.01
    max_hops: int = 10
    # cascades
    min_retweeters: int = 100
    require_url: bool = True
    direction: str = "either"
    # embedding
    embed_dim: int = 128
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 5
    negatives: int = 5
    embed_epochs: int = 5
    embed_lr: float = 0.025
    # meta-graph
    min_shared: int = 1
    alpha: float = 0.0  # 0 disables the disparity filter
    alphas: tuple[float, ...] = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    include_unlabeled: bool = True
    n_languages: int = 5
    use_edge_weights: bool = True
    # training
    models: tuple[str, ...] = ("gcn", "sage", "gat")
    epochs: int = 50
    dropout: float = 0.8
    learning_rate: float = 1e-4
    hidden_dim: int = 64
    weight_decay: float = 0.0
    class_weighted: bool = False
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def validate(self) -> PipelineConfig:
        if self.resolver not in ("none", "stub", "http"):
            raise PipelineError(f"unknown resolver {self.resolver!r}")
        if self.min_retweeters < 0 or self.min_shared < 1:
            raise PipelineError("min_retweeters must be >= 0 and min_shared >= 1")
        if not 0.0 <= self.alpha < 1.0:
            raise PipelineError("alpha must lie in [0, 1)")
        if any(not 0.0 < a < 1.0 for a in self.alphas):
            raise PipelineError("alphas must lie in (0, 1)")
        if self.direction not in ("either", "strict"):
            raise PipelineError("direction must be 'either' or 'strict'")
        if self.embed_dim <= 0 or self.window <= 0 or self.walk_length < 1 or self.walks_per_node < 1:
            raise PipelineError("embedding parameters must be positive")
        for m in self.models:
            if m not in gnn.KINDS:
                raise PipelineError(f"unknown model {m!r}")
        self.train_config()
        return self

    def embed_params(self) -> EmbedParams:
        return EmbedParams(dim=self.embed_dim, walks_per_node=self.walks_per_node,
                           walk_length=self.walk_length, window=self.window, negatives=self.negatives,
                           epochs=self.embed_epochs, learning_rate=self.embed_lr, seed=self.seed)

    def train_config(self) -> gnn.TrainConfig:
        try:
            return gnn.TrainConfig(epochs=self.epochs, dropout=self.dropout,
                                   learning_rate=self.learning_rate, split=tuple(self.split),
                                   hidden_dim=self.hidden_dim, seed=self.seed,
                                   weight_decay=self.weight_decay, class_weighted=self.class_weighted)
        except ValueError as exc:
            raise PipelineError(str(exc)) from exc

    def replace(self, **kw) -> PipelineConfig:
        return dataclasses.replace(self, **kw)


PRESETS: dict[str, dict[str, Any]] = {
    # the published 2016 election-data setup
    "paper2016": dict(min_retweeters=100, require_url=True, walks_per_node=10, walk_length=80,
                      embed_dim=128, epochs=50, dropout=0.8, learning_rate=1e-4, split=(0.6, 0.2, 0.2),
                      min_shared=1,
                      alphas=(0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1,
                              0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)),
    "paper2016-shared10": dict(min_retweeters=100, require_url=True, walks_per_node=10, walk_length=80,
                               embed_dim=128, epochs=50, dropout=0.8, learning_rate=1e-4,
                               split=(0.6, 0.2, 0.2), min_shared=11),
    # desk-scale synthetic benchmark: small embeddings, full-batch training long enough to converge
    "desk": dict(min_retweeters=3, require_url=True, walks_per_node=10, walk_length=20, embed_dim=16,
                 embed_epochs=1, window=5, epochs=150, dropout=0.5, learning_rate=0.01, hidden_dim=32,
                 min_shared=1, alpha=0.0),
}


def _coerce(value: str, ftype: Any, default: Any):
    text = value.strip()
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise PipelineError(f"bad boolean {value!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if default and isinstance(default[0], float):
            return tuple(float(t) for t in items)
        return tuple(items)
    return text


def make_config(preset: str | None = None, path: str | Path | None = None,
                overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Defaults < preset < config file (``[metacascade]`` section) < overrides."""
    cfg = PipelineConfig()
    if preset:
        if preset not in PRESETS:
            raise PipelineError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = cfg.replace(**PRESETS[preset])
    values: dict[str, str] = {}
    if path:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise PipelineError(f"cannot read config {path}")
        section = parser["metacascade"] if parser.has_section("metacascade") else parser[parser.default_section]
        if "preset" in section and not preset:
            return make_config(section["preset"], path, overrides)
        values.update({k: v for k, v in section.items() if k != "preset"})
    values.update(overrides or {})
    fields = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    kw = {}
    for key, raw in values.items():
        key = key.replace("-", "_")
        if key not in fields:
            raise PipelineError(f"unknown config key {key!r}")
        try:
            kw[key] = _coerce(str(raw), fields[key].type, getattr(cfg, key))
        except ValueError as exc:
            raise PipelineError(f"bad value for {key}: {raw!r}") from exc
    return cfg.replace(**kw).validate()


def config_to_ini(cfg: PipelineConfig) -> str:
    lines = ["[metacascade]"]
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# in-memory stages


@dataclass
class Inputs:
    store: EventStore
    labels: LabelStore
    annotations: AnnotationStore | None
    url_map: dict[str, str]


def _resolver(cfg: PipelineConfig):
    if cfg.resolver == "http":
        return HttpResolver()
    if cfg.resolver == "stub":
        redirects = json.loads(Path(cfg.redirects).read_text()) if cfg.redirects else {}
        return StubResolver(redirects)
    return None


def _require_file(path: str, what: str) -> Path:
    if not path:
        raise PipelineError(f"no {what} path configured")
    p = Path(path)
    if not p.is_file():
        raise PipelineError(f"{what} file not found: {p}")
    return p


def ingest_inputs(cfg: PipelineConfig) -> Inputs:
    schema = get_schema(cfg.schema, max_malformed_fraction=cfg.max_malformed_fraction)
    with open(_require_file(cfg.events, "events"), encoding="utf-8") as fh:
        store = parse_events(fh, schema)
    resolver = _resolver(cfg)
    all_urls = sorted({u for ev in store for u in ev.urls})
    url_map = expand_urls(all_urls, resolver, cfg.max_hops) if resolver else {}
    with open(_require_file(cfg.labels, "labels"), encoding="utf-8", newline="") as fh:
        raw_labels = parse_label_lines(fh)
    if resolver:
        label_map = expand_urls(sorted({r.url for r in raw_labels}), resolver, cfg.max_hops)
        raw_labels = [dataclasses.replace(r, url=label_map[r.url]) for r in raw_labels]
    labels = merge_label_sources(raw_labels)
    annotations = None
    if cfg.annotations:
        with open(_require_file(cfg.annotations, "annotations"), encoding="utf-8") as fh:
            annotations = load_annotations(fh)
    logger.info("ingested %d events (%d malformed, %d duplicates), %d labeled urls",
                len(store), store.stats.malformed, store.stats.duplicates, len(labels.labels))
    return Inputs(store, labels, annotations, url_map)


def build_social(inputs: Inputs) -> SocialGraph:
    return build_interaction_graph(inputs.store)


@dataclass
class CascadeSet:
    cascades: list[Cascade]
    graphs: list[CascadeGraph]
    label_codes: np.ndarray  # per cascade: 1 fake, 0 non_fake, -1 unlabeled
    discarded: list[str]
    stats: dict


def build_cascades(cfg: PipelineConfig, inputs: Inputs, social: SocialGraph) -> CascadeSet:
    grouped = group_cascades(inputs.store, cfg.min_retweeters, cfg.require_url, inputs.url_map)
    labeling = transfer_labels(grouped, inputs.labels)
    discarded = set(labeling.discarded)
    kept = [c for c in grouped if c.cascade_id not in discarded]
    if not cfg.include_unlabeled:
        kept = [c for c in kept if labeling.labels[c.cascade_id] != "unlabeled"]
    participants = {u for c in kept for u in c.users()}
    sub = induced_subgraph(social, participants)
    graphs = [reconstruct_cascade_graph(c, sub, cfg.direction) for c in kept]
    codes = np.array([labeling.code(c.cascade_id) for c in kept], dtype=np.int64)
    stats = dict(grouped.stats, discarded=len(discarded), kept=len(kept),
                 labeled=int((codes >= 0).sum()), social_nodes=len(sub.nodes),
                 social_edges=sub.number_of_edges())
    return CascadeSet(kept, graphs, codes, sorted(discarded), stats)


def embed_all(cfg: PipelineConfig, graphs: Sequence[CascadeGraph]) -> list[np.ndarray]:
    base = cfg.embed_params()
    out = []
    for i, g in enumerate(graphs):
        seed = int(np.random.SeedSequence([cfg.seed, i]).generate_state(1)[0])
        out.append(embed_cascade(g, dataclasses.replace(base, seed=seed)).rows)
    return out


@dataclass
class Dataset:
    metagraph: MetaGraph  # unfiltered, with labels and node features
    split: gnn.Split  # indices into metagraph nodes
    norm_stats: NormStats


def build_dataset(cfg: PipelineConfig, inputs: Inputs, cs: CascadeSet,
                  embeddings: Sequence[np.ndarray]) -> Dataset:
    labeled = np.flatnonzero(cs.label_codes >= 0)
    if labeled.size == 0:
        raise PipelineError("no labeled cascades")
    split = gnn.stratified_split(labeled, cs.label_codes[labeled], cfg.split, cfg.seed)
    norm = compute_norm_stats([cs.cascades[i] for i in split.train], inputs.store.profiles,
                              cfg.n_languages)
    feats = np.vstack([
        assemble_node_features(c, e, inputs.store.profiles, inputs.annotations, norm)
        for c, e in zip(cs.cascades, embeddings)
    ])
    mg = build_metagraph(cs.cascades, cfg.min_shared)
    mg.labels = cs.label_codes.astype(np.int8)
    mg.features = feats
    mg = attach_edge_features(mg, cs.cascades, cs.graphs)
    return Dataset(mg, split, norm)


def filter_metagraph(cfg: PipelineConfig, mg: MetaGraph, alpha: float | None = None) -> MetaGraph:
    alpha = cfg.alpha if alpha is None else alpha
    return disparity_filter(mg, alpha) if alpha > 0 else mg


def train_on_metagraph(cfg: PipelineConfig, mg: MetaGraph, split: gnn.Split, kind: str):
    data = gnn.GraphData(mg.features, mg.adjacency(weighted=cfg.use_edge_weights))
    return gnn.train(kind, data, mg.labels.astype(np.int64), cfg.train_config(), split, mode="metagraph")


def cascade_graph_data(cfg: PipelineConfig, inputs: Inputs, cs: CascadeSet,
                       embeddings: Sequence[np.ndarray], norm: NormStats, items: np.ndarray) -> gnn.GraphData:
    feats = [user_feature_matrix(cs.cascades[i], embeddings[i], inputs.store.profiles,
                                 inputs.annotations, norm) for i in items]
    return gnn.batch_graphs(feats, [cs.graphs[i].edges for i in items])


def train_on_cascades(cfg: PipelineConfig, inputs: Inputs, cs: CascadeSet, embeddings,
                      ds: Dataset, kind: str):
    """Graph classification of the labeled cascades in isolation, using the meta-graph split."""
    labeled = np.flatnonzero(cs.label_codes >= 0)
    data = cascade_graph_data(cfg, inputs, cs, embeddings, ds.norm_stats, labeled)
    pos = {int(c): k for k, c in enumerate(labeled)}
    split = gnn.Split(*(np.array([pos[int(i)] for i in getattr(ds.split, s)], dtype=np.int64)
                        for s in ("train", "val", "test")))
    return gnn.train(kind, data, cs.label_codes[labeled], cfg.train_config(), split, mode="cascade")


@dataclass
class ExperimentResult:
    reports: list[gnn.EvalReport]
    dataset: Dataset
    cascades: CascadeSet
    filtered: MetaGraph
    timings: dict[str, float] = field(default_factory=dict)

    def accuracy(self, mode: str, model: str) -> float:
        for r in self.reports:
            if r.mode == mode and r.model == model:
                return r.accuracy
        raise KeyError((mode, model))


def run_experiment(cfg: PipelineConfig, modes: Sequence[str] = ("cascade", "metagraph")) -> ExperimentResult:
    """All stages in memory; the stage runner persists the same intermediate results."""
    cfg.validate()
    t = {}
    tic = time.perf_counter()
    inputs = ingest_inputs(cfg)
    social = build_social(inputs)
    cs = build_cascades(cfg, inputs, social)
    t["build"] = time.perf_counter() - tic
    tic = time.perf_counter()
    emb = embed_all(cfg, cs.graphs)
    t["embed"] = time.perf_counter() - tic
    tic = time.perf_counter()
    ds = build_dataset(cfg, inputs, cs, emb)
    filtered = filter_metagraph(cfg, ds.metagraph)
    reports = []
    for kind in cfg.models:
        if "cascade" in modes:
            reports.append(train_on_cascades(cfg, inputs, cs, emb, ds, kind)[1])
        if "metagraph" in modes:
            reports.append(train_on_metagraph(cfg, filtered, ds.split, kind)[1])
    t["train"] = time.perf_counter() - tic
    return ExperimentResult(reports, ds, cs, filtered, t)


def sweep_alpha(cfg: PipelineConfig, ds: Dataset, alphas: Sequence[float], model: str = "gcn") -> list[dict]:
    """Filter, train and evaluate once per alpha."""
    if not alphas:
        raise PipelineError("empty alpha list")
    rows = []
    for a in alphas:
        mg = disparity_filter(ds.metagraph, a)
        touched = np.unique(mg.edges) if mg.n_edges else np.zeros(0)
        _, report = train_on_metagraph(cfg, mg, ds.split, model)
        rows.append({"alpha": float(a), "nodes": int(touched.size), "edges": mg.n_edges,
                     "accuracy": report.accuracy, "f1": report.f1})
    return rows


def format_sweep(rows: Sequence[dict]) -> str:
    out = [f"{'alpha':>7} {'nodes':>7} {'edges':>9} {'accuracy(%)':>12}"]
    for r in rows:
        out.append(f"{r['alpha']:>7g} {r['nodes']:>7d} {r['edges']:>9d} {r['accuracy'] * 100:>12.2f}")
    return "\n".join(out)


def format_reports(reports: Sequence[gnn.EvalReport]) -> str:
    out = [f"{'mode':<10} {'model':<5} {'accuracy(%)':>12} {'F1':>6}"]
    for r in reports:
        out.append(f"{r.mode:<10} {r.model:<5} {r.accuracy * 100:>12.2f} {r.f1:>6.3f}")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# workspace stage runner

_STAGE_KEYS = {
    "ingest": ("events", "labels", "annotations", "redirects", "resolver", "schema",
               "max_malformed_fraction", "max_hops"),
    "socialnet": (),
    "cascades": ("min_retweeters", "require_url", "direction", "include_unlabeled"),
    "embed": ("embed_dim", "walks_per_node", "walk_length", "window", "negatives", "embed_epochs",
              "embed_lr", "seed"),
    "metagraph": ("min_shared", "split", "seed", "n_languages"),
    "filter": ("alpha",),
    "train-cascade": ("models", "epochs", "dropout", "learning_rate", "hidden_dim", "weight_decay",
                      "class_weighted", "seed"),
    "train-metagraph": ("models", "epochs", "dropout", "learning_rate", "hidden_dim", "weight_decay",
                        "class_weighted", "seed", "use_edge_weights"),
    "evaluate": (),
    "export": (),
}

_STAGE_INPUTS = {
    "ingest": (),
    "socialnet": ("inputs.pkl",),
    "cascades": ("inputs.pkl", "social.pkl"),
    "embed": ("cascades.pkl",),
    "metagraph": ("inputs.pkl", "cascades.pkl", "embeddings.bin"),
    "filter": ("dataset.pkl",),
    "train-cascade": ("inputs.pkl", "cascades.pkl", "embeddings.bin", "dataset.pkl"),
    "train-metagraph": ("dataset.pkl", "metagraph_filtered.npz"),
    "evaluate": ("reports_cascade.jsonl", "reports_metagraph.jsonl"),
    "export": ("metagraph_filtered.npz",),
}

_PRODUCER = {
    "inputs.pkl": "ingest", "social.pkl": "socialnet", "cascades.pkl": "cascades",
    "embeddings.bin": "embed", "dataset.pkl": "metagraph", "metagraph_filtered.npz": "filter",
    "reports_cascade.jsonl": "train-cascade", "reports_metagraph.jsonl": "train-metagraph",
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_hash(cfg: PipelineConfig, stage: str) -> str:
    sub = {k: getattr(cfg, k) for k in _STAGE_KEYS[stage]}
    return hashlib.sha256(json.dumps(sub, sort_keys=True, default=list).encode()).hexdigest()


def _dump(obj, path: Path) -> None:
    with open(path, "wb") as fh:
        pickle.dump(obj, fh, protocol=4)


def load_artifact(path: Path):
    with open(path, "rb") as fh:
        return pickle.load(fh)


class Workspace:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg.validate()
        self.root = Path(cfg.workspace)
        self.manifests = self.root / "manifests"

    def path(self, name: str) -> Path:
        return self.root / name

    def manifest(self, stage: str) -> dict | None:
        p = self.manifests / f"{stage}.json"
        return json.loads(p.read_text()) if p.exists() else None

    def _external_inputs(self, stage: str) -> dict[str, str]:
        if stage != "ingest":
            return {}
        out = {}
        for key in ("events", "labels", "annotations", "redirects"):
            value = getattr(self.cfg, key)
            if value:
                out[key] = _sha256(_require_file(value, key))
        return out

    def run(self, stage: str, force: bool = False) -> dict:
        """Run one stage unless its config and inputs are unchanged since the last run."""
        if stage not in STAGES:
            raise PipelineError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
        for name in _STAGE_INPUTS[stage]:
            if not self.path(name).exists():
                raise PipelineError(f"stage {stage!r} needs {name}: run {_PRODUCER[name]} first")
        inputs = {name: _sha256(self.path(name)) for name in _STAGE_INPUTS[stage]}
        inputs.update(self._external_inputs(stage))
        cfg_hash = _config_hash(self.cfg, stage)
        prev = self.manifest(stage)
        if not force and prev and prev["config_hash"] == cfg_hash and prev["inputs"] == inputs and all(
            self.path(n).exists() and _sha256(self.path(n)) == h for n, h in prev["outputs"].items()
        ):
            prev["cache_hit"] = True
            self._write_manifest(stage, prev)
            logger.info("stage %s: inputs unchanged, skipped", stage)
            return prev
        self.root.mkdir(parents=True, exist_ok=True)
        tic = time.perf_counter()
        outputs = getattr(self, "_stage_" + stage.replace("-", "_"))()
        manifest = {
            "stage": stage,
            "config_hash": cfg_hash,
            "inputs": inputs,
            "outputs": {n: _sha256(self.path(n)) for n in outputs},
            "seconds": round(time.perf_counter() - tic, 3),
            "cache_hit": False,
        }
        self._write_manifest(stage, manifest)
        return manifest

    def run_all(self, force: bool = False) -> list[dict]:
        return [self.run(s, force) for s in STAGES]

    def _write_manifest(self, stage: str, manifest: dict) -> None:
        self.manifests.mkdir(parents=True, exist_ok=True)
        (self.manifests / f"{stage}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    # -- stages -------------------------------------------------------------

    def _stage_ingest(self):
        _dump(ingest_inputs(self.cfg), self.path("inputs.pkl"))
        return ["inputs.pkl"]

    def _stage_socialnet(self):
        social = build_social(load_artifact(self.path("inputs.pkl")))
        _dump(social, self.path("social.pkl"))
        with open(self.path("social_edges.tsv"), "w", encoding="utf-8") as fh:
            write_edgelist(social, fh)
        return ["social.pkl", "social_edges.tsv"]

    def _stage_cascades(self):
        inputs = load_artifact(self.path("inputs.pkl"))
        cs = build_cascades(self.cfg, inputs, load_artifact(self.path("social.pkl")))
        _dump(cs, self.path("cascades.pkl"))
        return ["cascades.pkl"]

    def _stage_embed(self):
        cs = load_artifact(self.path("cascades.pkl"))
        emb = embed_all(self.cfg, cs.graphs)
        with open(self.path("embeddings.bin"), "wb") as fh:
            write_embeddings(fh, zip([c.cascade_id for c in cs.cascades], emb))
        return ["embeddings.bin"]

    def _embeddings(self, cs: CascadeSet) -> list[np.ndarray]:
        with open(self.path("embeddings.bin"), "rb") as fh:
            emb = read_embeddings(fh)
        return [emb[c.cascade_id] for c in cs.cascades]

    def _stage_metagraph(self):
        cs = load_artifact(self.path("cascades.pkl"))
        ds = build_dataset(self.cfg, load_artifact(self.path("inputs.pkl")), cs, self._embeddings(cs))
        _dump(ds, self.path("dataset.pkl"))
        save_metagraph(ds.metagraph, self.path("metagraph.npz"))
        return ["dataset.pkl", "metagraph.npz"]

    def _stage_filter(self):
        ds = load_artifact(self.path("dataset.pkl"))
        save_metagraph(filter_metagraph(self.cfg, ds.metagraph), self.path("metagraph_filtered.npz"))
        return ["metagraph_filtered.npz"]

    def _write_reports(self, name: str, reports) -> None:
        with open(self.path(name), "w", encoding="utf-8") as fh:
            for r in reports:
                fh.write(r.to_json() + "\n")

    def _stage_train_cascade(self):
        inputs = load_artifact(self.path("inputs.pkl"))
        cs = load_artifact(self.path("cascades.pkl"))
        ds = load_artifact(self.path("dataset.pkl"))
        emb = self._embeddings(cs)
        reports, outs = [], ["reports_cascade.jsonl"]
        for kind in self.cfg.models:
            model, rep = train_on_cascades(self.cfg, inputs, cs, emb, ds, kind)
            gnn.save_model(model, self.path(f"model_cascade_{kind}.npz"))
            outs.append(f"model_cascade_{kind}.npz")
            reports.append(rep)
        self._write_reports("reports_cascade.jsonl", reports)
        return outs

    def _stage_train_metagraph(self):
        ds = load_artifact(self.path("dataset.pkl"))
        mg = load_metagraph(self.path("metagraph_filtered.npz"))
        reports, outs = [], ["reports_metagraph.jsonl"]
        for kind in self.cfg.models:
            model, rep = train_on_metagraph(self.cfg, mg, ds.split, kind)
            gnn.save_model(model, self.path(f"model_metagraph_{kind}.npz"))
            outs.append(f"model_metagraph_{kind}.npz")
            reports.append(rep)
        self._write_reports("reports_metagraph.jsonl", reports)
        return outs

    def _stage_evaluate(self):
        reports = [json.loads(line) for name in ("reports_cascade.jsonl", "reports_metagraph.jsonl")
                   for line in self.path(name).read_text().splitlines() if line.strip()]
        with open(self.path("reports.jsonl"), "w", encoding="utf-8") as fh:
            for r in reports:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
        self.path("report.txt").write_text(
            format_reports([gnn.EvalReport(**r) for r in reports]) + "\n")
        return ["reports.jsonl", "report.txt"]

    def _stage_export(self):
        mg = load_metagraph(self.path("metagraph_filtered.npz"))
        self.path("metagraph.graphml").write_text(to_graphml(mg), encoding="utf-8")
        self.path("metagraph.dot").write_text(to_dot(mg), encoding="utf-8")
        self.path("metagraph.edgelist").write_text(to_edgelist(mg), encoding="utf-8")
        return ["metagraph.graphml", "metagraph.dot", "metagraph.edgelist"]


def run_stage(name: str, config: PipelineConfig, force: bool = False) -> dict:
    return Workspace(config).run(name, force)


def export_graph(mg: MetaGraph, fmt: str, path: str | Path | None = None) -> str:
    writers = {"graphml": to_graphml, "dot": to_dot, "edgelist": to_edgelist}
    if fmt not in writers:
        raise PipelineError(f"unknown export format {fmt!r}; choose from {sorted(writers)}")
    text = writers[fmt](mg)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text

