"""Staged training orchestration: prepare -> M1 -> VAE -> M2 -> evaluate.

All artifacts of one configuration live in ``<out>/run-<hash>/``; the hash
leaves out ``variant`` and ``r_size`` so variants share the prepared data,
M1 and VAE.  Variant-specific files go to ``variants/<variant>-r<r_size>/``.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import STAGES, RunConfig
from .data import (
    FeatureSchema,
    SplitPolicy,
    Vocabulary,
    group_category_interactions,
    ingest_raw,
    read_records,
    split_examples,
    to_record,
    write_canonical,
    write_records,
)
from .errors import MissingArtifactError
from .metrics import MetricReport, evaluate_run, metrics_at_k
from .mle import CandidateList, M1Model, generate_candidates, predict_logp, train_m1, usable
from .nn import AttentionConfig, load_module, save_module
from .predictor import M2Model, rank_candidates, score_records, train_m2
from .vae import EmbeddingTable, VAEModel, embed_all, record_inputs, train_vae

log = logging.getLogger(__name__)

HASH_EXCLUDE = ("variant", "r_size", "stages", "ablation_variants", "r_size_sweep")
_STAGE_SEED = {name: i for i, name in enumerate(STAGES)}


def stage_rng(cfg, stage, *extra):
    return np.random.default_rng([cfg.seed, _STAGE_SEED.get(stage, 99), *extra])


@dataclass
class RunPaths:
    root: Path

    @classmethod
    def for_config(cls, cfg: RunConfig, out):
        return cls(Path(out) / f"run-{cfg.hash(HASH_EXCLUDE)}")

    def __getattr__(self, name):
        files = {
            "interactions": "interactions.tsv",
            "train": "examples_train.jsonl",
            "test": "examples_test.jsonl",
            "vocab": "vocab.json",
            "prepare_stats": "prepare_stats.json",
            "m1": "m1.json",
            "vae": "vae.json",
            "embeddings": "embeddings.json",
            "manifest": "run.json",
        }
        if name in files:
            return self.root / files[name]
        raise AttributeError(name)

    def variant_dir(self, variant, r_size):
        return self.root / "variants" / f"{variant}-r{r_size}"


def _require(path, stage):
    if not Path(path).exists():
        raise MissingArtifactError(f"missing {Path(path).name}: run {stage} first")


def _update_manifest(paths: RunPaths, cfg: RunConfig, stage):
    manifest = {}
    if paths.manifest.exists():
        manifest = json.loads(paths.manifest.read_text())
    manifest["config_hash"] = cfg.hash(HASH_EXCLUDE)
    manifest["seed"] = cfg.seed
    done = set(manifest.get("stages", []))
    done.add(stage)
    manifest["stages"] = [s for s in STAGES if s in done]
    paths.manifest.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    (paths.root / "config.toml").write_text(cfg.dumps())


# --- stages ---------------------------------------------------------------

def load_features(cfg: RunConfig):
    if not cfg.features_path:
        return {}, FeatureSchema()
    rows = {}
    with open(cfg.features_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                rows[str(d["user"])] = d["features"]
    schema = FeatureSchema.fit(list(rows.values()), cfg.feature_numeric, cfg.feature_categorical)
    return {u: schema.encode(r) for u, r in rows.items()}, schema


def prepare(cfg: RunConfig, paths: RunPaths):
    paths.root.mkdir(parents=True, exist_ok=True)
    options = {"time_format": cfg.time_format, "year": cfg.year}
    if cfg.event_types:
        options["event_types"] = set(cfg.event_types)
    rows, stats = ingest_raw(cfg.source_kind, cfg.paths, **options)
    write_canonical(paths.interactions, rows)
    groups = group_category_interactions(rows, cfg.window_days, cfg.window_semantics)
    features, schema = load_features(cfg)
    policy = SplitPolicy(cutoff=cfg.cutoff, leave_last=cfg.leave_last, max_past=cfg.max_past,
                         max_future=cfg.max_future, test_fraction=cfg.test_fraction,
                         user_holdout=cfg.user_holdout, test_max_past=cfg.test_max_past,
                         seed=cfg.seed)
    split = split_examples(groups, policy, features)
    vocab = Vocabulary.from_examples(split.train, cfg.hash_dim, schema)
    counters = Counter()
    write_records(paths.train, [to_record(e, vocab, counters) for e in split.train])
    test_counters = Counter()
    write_records(paths.test, [to_record(e, vocab, test_counters) for e in split.test])
    vocab.save(paths.vocab)
    summary = {
        "ingest": dict(sorted(stats.items())),
        "groups": len(groups),
        "split": dict(sorted(split.stats.items())),
        "categories": vocab.size,
        "train_encode": dict(sorted(counters.items())),
        "test_encode": dict(sorted(test_counters.items())),
    }
    paths.prepare_stats.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


def _attention_config(cfg: RunConfig):
    return AttentionConfig(cfg.d1, cfg.num_heads, cfg.num_layers, cfg.ff_dim, cfg.k)


def build_m1(cfg, num_categories, rng, vae_dim=None):
    return M1Model(num_categories, _attention_config(cfg), rng, pooling=cfg.pooling,
                   vae_dim=vae_dim)


def _load_data(paths):
    for p, stage in ((paths.train, "prepare"), (paths.vocab, "prepare")):
        _require(p, stage)
    return read_records(paths.train), read_records(paths.test), Vocabulary.load(paths.vocab)


def train_mle_stage(cfg: RunConfig, paths: RunPaths):
    train, _, vocab = _load_data(paths)
    rng = stage_rng(cfg, "train_mle")
    model = build_m1(cfg, vocab.size, rng)
    history = train_m1(model, train, cfg.k, cfg.stage_epochs("train_mle"), cfg.lr,
                       cfg.batch_size, rng)
    save_module(paths.m1, model, meta={"loss_history": history})
    return history


def load_m1(cfg, paths, vocab):
    _require(paths.m1, "train_mle")
    model = build_m1(cfg, vocab.size, np.random.default_rng(0))
    load_module(paths.m1, model)
    return model


def train_vae_stage(cfg: RunConfig, paths: RunPaths):
    train, test, vocab = _load_data(paths)
    rng = stage_rng(cfg, "train_vae")
    X, _ = record_inputs(train, vocab.hash_dim, vocab.size)
    model = VAEModel(X.shape[1], cfg.vae_latent, cfg.vae_hidden, rng)
    history = train_vae(model, X, cfg.stage_epochs("train_vae"), cfg.lr, cfg.batch_size, rng,
                        beta=cfg.beta)
    save_module(paths.vae, model, meta={"loss_history": history, "input_dim": int(X.shape[1])})
    table = embed_all(train + test, model, vocab.hash_dim, vocab.size)
    table.save(paths.embeddings)
    return history


def load_embeddings(paths):
    _require(paths.embeddings, "train_vae")
    return EmbeddingTable.load(paths.embeddings)


def candidates_for(model, records, cfg, r_size, rng, embeddings=None):
    logp = predict_logp(model, records, cfg.k, embeddings)
    if r_size > logp.shape[1]:
        log.warning("r_size %d exceeds %d categories; clipping", r_size, logp.shape[1])
        r_size = logp.shape[1]
    return [generate_candidates(row, r_size, r.user, sample=cfg.candidate_sampling == "sample",
                                rng=rng) for row, r in zip(logp, records)]


def write_candidates(path, cands):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in cands:
            fh.write(c.to_json() + "\n")


def read_candidates(path):
    with open(path, encoding="utf-8") as fh:
        return [CandidateList.from_json(line) for line in fh if line.strip()]


def write_predictions(path, ranked_outputs, vocab):
    """TSV rows: user, rank, category_id, y_m2, y_m1."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ro in ranked_outputs:
            pos = {c: i for i, c in enumerate(ro.candidates)}
            for rank, c in enumerate(ro.topN, 1):
                i = pos[c]
                fh.write(f"{ro.user_id}\t{rank}\t{vocab.category(c)}\t"
                         f"{ro.y_m2[i]:.6f}\t{ro.y_m1[i]:.6f}\n")


@dataclass
class VariantResult:
    ranked: list
    history: list


def run_variant(cfg: RunConfig, variant, r_size, train, test, vocab, m1, embeddings,
                out_dir=None):
    """Train the variant-specific head and rank every test user.

    ``m1`` is the trained plain M1; ``embeddings`` the VAE table (required for
    ``ccrec`` and ``mle_vae``).
    """
    rng = stage_rng(cfg, "train_ccrec")
    k = cfg.k
    test = usable(test, k, need_targets=False)
    history = []
    if variant in ("mle", "mle_vae"):
        model = m1
        emb = None
        if variant == "mle_vae":
            model = build_m1(cfg, vocab.size, rng, vae_dim=embeddings.dim)
            history = train_m1(model, train, k, cfg.stage_epochs("train_ccrec"), cfg.lr,
                               cfg.batch_size, rng, embeddings=embeddings)
            emb = embeddings
        cands = candidates_for(model, test, cfg, vocab.size, rng, emb)
        ranked = [rank_candidates(c, c.y_m1, cfg.n) for c in cands]
        if out_dir is not None and variant == "mle_vae":
            save_module(out_dir / "m1_vae.json", model, meta={"loss_history": history})
    else:
        emb = embeddings if variant == "ccrec" else EmbeddingTable.zeros(cfg.vae_latent)
        train_ok = usable(train, k)
        cand_train = candidates_for(m1, train_ok, cfg, r_size, rng)
        cand_test = candidates_for(m1, test, cfg, r_size, rng)
        m2 = M2Model(vocab.size, emb.dim, cfg.d2, rng)
        history = train_m2(m2, train_ok, cand_train, k, emb, emb.dim,
                           cfg.stage_epochs("train_ccrec"), cfg.lr, cfg.batch_size, rng,
                           mode=cfg.loss_mode)
        scores = score_records(m2, test, cand_test, k, emb, emb.dim)
        ranked = [rank_candidates(c, s, cfg.n) for c, s in zip(cand_test, scores)]
        if out_dir is not None:
            write_candidates(out_dir / "candidates_train.jsonl", cand_train)
            write_candidates(out_dir / "candidates_test.jsonl", cand_test)
            save_module(out_dir / "m2.json", m2, meta={"loss_history": history})
    return VariantResult(ranked, history)


def train_ccrec_stage(cfg: RunConfig, paths: RunPaths):
    train, test, vocab = _load_data(paths)
    m1 = load_m1(cfg, paths, vocab)
    embeddings = None
    if cfg.variant in ("ccrec", "mle_vae"):
        embeddings = load_embeddings(paths)
    out = paths.variant_dir(cfg.variant, cfg.r_size)
    out.mkdir(parents=True, exist_ok=True)
    result = run_variant(cfg, cfg.variant, cfg.r_size, train, test, vocab, m1, embeddings, out)
    write_predictions(out / "predictions.tsv", result.ranked, vocab)
    return result


def evaluate_stage(cfg: RunConfig, paths: RunPaths):
    _require(paths.test, "prepare")
    _require(paths.m1, "train_mle")
    out = paths.variant_dir(cfg.variant, cfg.r_size)
    _require(out / "predictions.tsv", "train_ccrec")
    vocab = Vocabulary.load(paths.vocab)
    return evaluate_run(out / "predictions.tsv", paths.test, cfg.ks, out / "report.json", vocab)


def score_ranked(ranked, test_records, ks):
    truth = {r.user: set(r.gamma) for r in test_records}
    return metrics_at_k({ro.user_id: ro.topN for ro in ranked}, truth, ks)


def run_ablation(cfg: RunConfig, paths: RunPaths, variants=None, r_sizes=None):
    """Train/evaluate each variant (and r_size) on the same split and seed."""
    train, test, vocab = _load_data(paths)
    variants = list(variants or cfg.ablation_variants)
    r_sizes = list(r_sizes or cfg.r_size_sweep or [cfg.r_size])
    m1 = load_m1(cfg, paths, vocab)
    embeddings = None
    if any(v in ("ccrec", "mle_vae") for v in variants):
        embeddings = load_embeddings(paths)
    results = {}
    for variant in variants:
        sizes = r_sizes if variant in ("ccrec", "mle_cascading") else [vocab.size]
        # every size at or above |C| yields the same candidate lists, so train once
        by_effective = {}
        for r in sizes:
            eff = min(r, vocab.size)
            if eff not in by_effective:
                res = run_variant(cfg, variant, eff, train, test, vocab, m1, embeddings)
                by_effective[eff] = score_ranked(res.ranked, test, cfg.ks)
            results.setdefault(variant, {})[r] = by_effective[eff]
    write_ablation(paths.root, results, cfg.ks)
    return results


def write_ablation(root, results, ks):
    payload = {v: {str(r): rep.to_json() for r, rep in by_r.items()} for v, by_r in results.items()}
    (root / "ablation.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    lines = []
    cols = [f"HR@{k}" for k in ks] + [f"P@{k}" for k in ks if k > 1] + \
           [f"R@{k}" for k in ks] + [f"F1@{k}" for k in ks]
    lines.append("variant         r_size  " + "  ".join(c.rjust(7) for c in cols))
    for v, by_r in results.items():
        for r, rep in by_r.items():
            vals = [rep.hr[k] for k in ks] + [rep.precision[k] for k in ks if k > 1] + \
                   [rep.recall[k] for k in ks] + [rep.f1[k] for k in ks]
            lines.append(f"{v:<15} {r:>6}  " + "  ".join(f"{x:7.4f}" for x in vals))
    (root / "ablation.txt").write_text("\n".join(lines) + "\n")


def run_stage(cfg: RunConfig, stage, out):
    cfg.validate()
    paths = RunPaths.for_config(cfg, out)
    if stage != "prepare":
        _require(paths.root, "prepare")
    fn = {
        "prepare": prepare,
        "train_mle": train_mle_stage,
        "train_vae": train_vae_stage,
        "train_ccrec": train_ccrec_stage,
        "evaluate": evaluate_stage,
        "ablate": run_ablation,
    }[stage]
    result = fn(cfg, paths)
    _update_manifest(paths, cfg, stage)
    return paths, result


def run_all(cfg: RunConfig, out, stages=None):
    results = {}
    for stage in stages or cfg.stages:
        paths, results[stage] = run_stage(cfg, stage, out)
    return paths, results


__all__ = ["RunPaths", "run_stage", "run_all", "run_ablation", "run_variant", "MetricReport"]
