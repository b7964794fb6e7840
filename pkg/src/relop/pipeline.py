"""Stage orchestration: artifacts on disk, run manifests, and verification."""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import os
import time
from pathlib import Path

import numpy as np

from . import aggregate as agg
from . import hashtags as ht
from . import lnp
from . import manifold as mf
from . import oowe
from . import plots
from . import synth
from .config import (
    PipelineConfig,
    UsageError,
    config_hash,
    parse_int_list,
    parse_str_list,
    stage_seed,
)
from .ingest import (
    Gazetteer,
    build_vocab,
    content_tokens,
    filter_bots,
    filter_relevant,
    infer_state,
    parse_posts,
    tokenize,
    Vocabulary,
)


class DataError(Exception):
    """Missing or malformed input data."""


class VerificationFailure(Exception):
    """One or more oracle cross-checks failed."""


def data_path(name: str) -> Path:
    return Path(importlib.resources.files("relop") / "data" / name)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _work(config: PipelineConfig, name: str) -> Path:
    return Path(config.workdir) / name


def _input_or(config_value: str, fallback: Path) -> Path:
    return Path(config_value) if config_value else fallback


# ---------------------------------------------------------------------------
# shared artifact IO


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _read_entity_csv(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) >= 2 and parts[0]:
                out[parts[0]] = parts[1]
    return out


def _read_clean_corpus(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _write_vocab(path: Path, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for token, idx in vocab.index.items():
            fh.write(f"{token}\t{idx}\t{vocab.counts[idx]}\n")


def _read_vocab(path: Path) -> Vocabulary:
    counts: dict[str, int] = {}
    order: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token, idx, count = line.rstrip("\n").split("\t")
            order[token] = int(idx)
            if int(idx) >= 2:
                counts[token] = int(count)
    vocab = Vocabulary(counts)
    if vocab.index != order:
        raise DataError(f"vocabulary file {path} is not in canonical order")
    return vocab


def _load_official_clients(config: PipelineConfig) -> set[str]:
    path = _input_or(config.official_clients_file, data_path("official_clients.txt"))
    return {
        line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()
    }


def _load_gazetteer(config: PipelineConfig) -> Gazetteer:
    return Gazetteer.from_csv(_input_or(config.gazetteer, data_path("gazetteer.csv")))


def _class_mapping(*label_maps: dict[str, str]) -> list[str]:
    names: set[str] = set()
    for mapping in label_maps:
        names.update(mapping.values())
    return sorted(names)


# ---------------------------------------------------------------------------
# stages


def stage_synth(config: PipelineConfig) -> dict:
    seed_names = ("#maga", "#imwithher", "#nevertrump", "#neverhillary")
    classes = config.synth_classes
    hashtag_seeds = tuple(
        seed_names[c] if c < len(seed_names) else f"#seed{c}" for c in range(classes)
    )
    corpus = synth.gen_opinion_corpus(
        synth.SynthCorpusConfig(
            classes=classes,
            lexicon_size=config.synth_lexicon_size,
            neutral_size=config.synth_neutral_size,
            tweets_per_class=config.synth_tweets_per_class,
            tokens_per_tweet=config.synth_tokens_per_tweet,
            seed_hashtags=hashtag_seeds,
            users_per_class=config.synth_users_per_class,
            bot_fraction=config.synth_bot_fraction,
            seed=stage_seed(config, "synth"),
        )
    )
    _work(config, "corpus.jsonl").write_text(synth.corpus_to_jsonl(corpus), encoding="utf-8")
    _write_csv(
        _work(config, "tweet_truth.csv"),
        "entity,class",
        ((p.id, f"c{c}") for p, c in zip(corpus.posts, corpus.tweet_classes)),
    )
    _write_csv(
        _work(config, "user_truth.csv"),
        "entity,class",
        ((u, f"c{c}") for u, c in sorted(corpus.user_classes.items())),
    )
    _write_csv(
        _work(config, "state_truth.csv"),
        "entity,class",
        ((s, f"c{c}") for s, c in sorted(corpus.state_classes.items())),
    )
    rng = np.random.default_rng(stage_seed(config, "synth-labels"))
    occupied = set(corpus.user_states.values())
    picks = []
    for c in range(classes):
        members = sorted(
            s for s, sc in corpus.state_classes.items() if sc == c and s in occupied
        )
        take = min(config.synth_initial_labels_per_class, len(members))
        chosen = rng.choice(len(members), size=take, replace=False)
        picks.extend((members[i], f"c{c}") for i in sorted(chosen))
    _write_csv(_work(config, "initial_labels.csv"), "entity,class", sorted(picks))
    return {"posts": len(corpus.posts), "states": len(corpus.state_classes)}


def stage_ingest(config: PipelineConfig) -> dict:
    corpus_path = _input_or(config.corpus, _work(config, "corpus.jsonl"))
    with open(corpus_path, encoding="utf-8") as fh:
        posts, skipped = parse_posts(fh)
    relevant = filter_relevant(
        posts, parse_str_list(config.keywords_a), parse_str_list(config.keywords_b)
    )
    official, fraction = filter_bots(relevant, _load_official_clients(config))
    gazetteer = _load_gazetteer(config)
    n_state = 0
    with open(_work(config, "clean.jsonl"), "w", encoding="utf-8") as fh:
        for post in official:
            state = infer_state(post, gazetteer)
            if state is not None:
                n_state += 1
            tokens = [t.surface for t in content_tokens(tokenize(post.text))]
            fh.write(
                json.dumps(
                    {
                        "id": post.id,
                        "user_id": post.user_id,
                        "state": state,
                        "tokens": tokens,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return {
        "parsed": len(posts),
        "skipped": skipped,
        "relevant": len(relevant),
        "official": len(official),
        "official_fraction": round(fraction, 6),
        "with_state": n_state,
    }


def stage_hashtag_net(config: PipelineConfig) -> dict:
    records = _read_clean_corpus(_work(config, "clean.jsonl"))
    graph = ht.build_cooccurrence(r["tokens"] for r in records)
    filtered = ht.significance_filter(graph, config.p_o)
    seeds = ht.read_seeds(_input_or(config.seeds_file, data_path("seeds.csv")))
    rng = np.random.default_rng(stage_seed(config, "hashtag-net"))
    labels = ht.propagate_hashtag_labels(
        filtered, seeds, rng, config.lpa_max_sweeps, weighted=config.lpa_weighted
    )
    pruned = ht.prune_labels(labels, filtered.counts, config.prune_ratio)
    ht.write_label_map(_work(config, "hashtag_labels.csv"), pruned, filtered.counts)
    return {
        "tweets": graph.n_tweets,
        "vertices": len(graph.counts),
        "edges": len(graph.edges),
        "significant_edges": len(filtered.edges),
        "labeled": len(labels),
        "labeled_after_prune": len(pruned),
    }


def stage_label_tweets(config: PipelineConfig) -> dict:
    records = _read_clean_corpus(_work(config, "clean.jsonl"))
    labels, _ = ht.read_label_map(_work(config, "hashtag_labels.csv"))
    training = ht.label_tweets([r["tokens"] for r in records], labels)
    ht.write_training_set(_work(config, "training_set.tsv"), training)
    return {"examples": len(training.examples), **training.category_counts}


def stage_train(config: PipelineConfig) -> dict:
    training = ht.read_training_set(_work(config, "training_set.tsv"))
    vocab = build_vocab((tokens for tokens, _ in training.examples), config.min_count)
    model_config = oowe.OoweConfig(
        window=config.window,
        embed_dim=config.embed_dim,
        hidden_dim=config.hidden_dim,
        learning_rate=config.learning_rate,
        alpha=config.alpha,
        categories=len(training.categories),
        epochs=config.epochs,
        seed=stage_seed(config, "train"),
    )
    model, losses = oowe.train(training, vocab, model_config)
    oowe.save_model(_work(config, "model.bin"), model)
    _write_vocab(_work(config, "vocab.tsv"), vocab)
    _write_csv(
        _work(config, "train_log.csv"),
        "epoch,mean_loss",
        ((i + 1, repr(value)) for i, value in enumerate(losses)),
    )
    return {
        "examples": len(training.examples),
        "vocab_size": len(vocab),
        "final_loss": round(losses[-1], 6),
    }


def stage_embed(config: PipelineConfig) -> dict:
    model = oowe.load_model(_work(config, "model.bin"))
    vocab = _read_vocab(_work(config, "vocab.tsv"))
    _work(config, "embeddings.tsv").write_text(
        oowe.export_embeddings(model, vocab), encoding="utf-8"
    )
    return {"tokens": len(vocab), "dim": model.embed_dim}


def stage_aggregate(config: PipelineConfig) -> dict:
    records = _read_clean_corpus(_work(config, "clean.jsonl"))
    model = oowe.load_model(_work(config, "model.bin"))
    vocab = _read_vocab(_work(config, "vocab.tsv"))
    labels, _ = ht.read_label_map(_work(config, "hashtag_labels.csv"))
    result = agg.aggregate_corpus(
        model,
        vocab,
        [(r["id"], r["user_id"], r["state"], r["tokens"]) for r in records],
        exclude=set(labels),
    )
    agg.write_points(
        _work(config, "points.tsv"),
        result.tweet_points + result.user_points + result.state_points,
    )
    populations = {}
    pop_path = _input_or(config.population_file, data_path("population_2016.csv"))
    for entity, value in _read_entity_csv(pop_path).items():
        populations[entity] = int(value)
    rows = agg.state_summaries(result.state_user_vectors, populations)
    _write_csv(
        _work(config, "state_summary.csv"),
        "state,user_count,stddev,representativeness",
        (
            (
                r["state"],
                r["user_count"],
                repr(r["stddev"]),
                "" if r["representativeness"] is None else repr(r["representativeness"]),
            )
            for r in rows
        ),
    )
    return {
        "tweet_points": len(result.tweet_points),
        "user_points": len(result.user_points),
        "state_points": len(result.state_points),
        "skipped_tweets": result.skipped,
    }


def _load_problem_points(config: PipelineConfig):
    points = agg.read_points(_work(config, "points.tsv"), level="state")
    if not points:
        raise DataError("points.tsv holds no state-level points")
    ids = [p.entity_id for p in points]
    coords = np.vstack([p.vector for p in points])
    return ids, coords


def stage_predict(config: PipelineConfig) -> dict:
    ids, coords = _load_problem_points(config)
    labels_path = _input_or(config.labels_file, _work(config, "initial_labels.csv"))
    raw_labels = _read_entity_csv(labels_path)
    classes = _class_mapping(raw_labels)
    index_of = {name: i for i, name in enumerate(classes)}
    row_of = {entity: i for i, entity in enumerate(ids)}
    unknown = sorted(set(raw_labels) - set(ids))
    if unknown:
        raise DataError(f"labeled entities missing from points: {unknown}")
    initial = {row_of[e]: index_of[c] for e, c in raw_labels.items()}
    k = min(config.lnp_k, len(ids) - 1)
    problem = lnp.LnpProblem(
        points=coords,
        initial_labels=initial,
        n_classes=len(classes),
        k=k,
        metric=config.lnp_metric,
        seed=stage_seed(config, "predict"),
        nonnegative_weights=config.nonnegative_weights,
        propagate_tol=config.propagate_tol,
        propagate_max_iters=config.propagate_max_iters,
        smacof_iters=config.smacof_iters,
        smacof_tol=config.smacof_tol,
    )
    predicted, soft = lnp.predict(problem)
    header = "entity,class," + ",".join(f"score_{i + 1}" for i in range(len(classes)))
    _write_csv(
        _work(config, "predictions.csv"),
        header,
        (
            (ids[i], classes[int(predicted[i])], *[repr(float(v)) for v in soft[i]])
            for i in range(len(ids))
        ),
    )
    return {"entities": len(ids), "k": k, "metric": config.lnp_metric}


def _load_truth(config: PipelineConfig, ids: list[str]):
    truth_path = _input_or(config.truth_file, _work(config, "state_truth.csv"))
    raw = _read_entity_csv(truth_path)
    missing = sorted(set(ids) - set(raw))
    if missing:
        raise DataError(f"truth file lacks entities: {missing}")
    classes = _class_mapping(raw)
    index_of = {name: i for i, name in enumerate(classes)}
    return np.array([index_of[raw[e]] for e in ids], dtype=np.int64), classes


def stage_sweep(config: PipelineConfig) -> dict:
    ids, coords = _load_problem_points(config)
    truth, _ = _load_truth(config, ids)
    ks = [k for k in range(config.k_min, config.k_max + 1) if k < len(ids)]
    if not ks:
        raise DataError("no usable k in the configured range")
    rows = lnp.sensitivity_sweep(
        coords,
        truth,
        parse_int_list(config.label_counts),
        ks,
        runs=config.runs,
        seed=stage_seed(config, "sweep"),
        nonnegative=config.nonnegative_weights,
        propagate_tol=config.propagate_tol,
        propagate_max_iters=config.propagate_max_iters,
    )
    _write_csv(
        _work(config, "sweep.csv"),
        "metric,label_count,k,run,errors",
        ((r.metric, r.label_count, r.k, r.run, r.errors) for r in rows),
    )
    return {"rows": len(rows), "k_values": len(ks)}


def stage_metrics(config: PipelineConfig) -> dict:
    ids, coords = _load_problem_points(config)
    n = len(ids)
    dim = 2  # quality judged in the visualization plane
    if n < 4:
        raise DataError("need at least 4 state points for the quality sweep")
    ks = [k for k in range(config.k_min, config.k_max + 1) if k < n]
    if not ks:
        raise DataError("no usable k in the configured range")
    d_orig = mf.pairwise_euclidean(coords)
    d_geo = mf.geodesic_distances(coords)
    seed = stage_seed(config, "metrics")
    children = np.random.SeedSequence(seed).spawn(config.runs)
    rows = []
    per_k_pne: dict[int, list[float]] = {k: [] for k in ks}
    for run, child in enumerate(children):
        rng = np.random.default_rng(child)
        unfolded, _ = mf.smacof_mds(
            d_geo, coords.shape[1], rng, iters=config.smacof_iters, tol=config.smacof_tol
        )
        for k in ks:
            # per-k quality: the embedding the weight matrix itself induces
            wm = lnp.reconstruction_weights(
                unfolded, k, nonnegative=config.nonnegative_weights
            )
            d_emb = mf.pairwise_euclidean(lnp.lle_embedding(wm, dim))
            np_value = mf.neighborhood_preservation(d_orig, d_emb, k)
            st_value = mf.stress_measure(d_orig, d_emb)
            pne_value = mf.pne(d_orig, d_emb, k)
            per_k_pne[k].append(pne_value)
            rows.append((k, run, repr(np_value), repr(st_value), repr(pne_value)))
    _write_csv(_work(config, "quality_runs.csv"), "k,run,np,st,pne", rows)
    summary = []
    for k in ks:
        arr = np.array(per_k_pne[k])
        summary.append(
            (
                k,
                repr(float(np.median(arr))),
                repr(float(np.percentile(arr, 2.5))),
                repr(float(np.percentile(arr, 97.5))),
            )
        )
    _write_csv(
        _work(config, "quality_summary.csv"), "k,pne_median,pne_lo,pne_hi", summary
    )
    medians = [float(np.median(per_k_pne[k])) for k in ks]
    k_star = ks[int(np.argmin(medians))]
    _work(config, "selected_k.txt").write_text(f"{k_star}\n", encoding="utf-8")
    return {"k_star": k_star, "runs": config.runs}


def stage_plot(config: PipelineConfig) -> dict:
    ids, coords = _load_problem_points(config)
    try:
        truth, _ = _load_truth(config, ids)
        truth_path = _input_or(config.truth_file, _work(config, "state_truth.csv"))
        class_names = _read_entity_csv(truth_path)
    except (DataError, FileNotFoundError):
        class_names = {e: "state" for e in ids}
    flat = mf.classical_mds(mf.pairwise_euclidean(coords), 2)
    sizes: dict[str, float] = {}
    summary_path = _work(config, "state_summary.csv")
    if summary_path.exists():
        with open(summary_path, encoding="utf-8") as fh:
            fh.readline()
            for line in fh:
                parts = line.strip().split(",")
                if len(parts) >= 4 and parts[0]:
                    value = parts[2] if config.plot_size_channel == "stddev" else parts[3]
                    if value:
                        sizes[parts[0]] = float(value)
    annotations = [
        {"id": e, "class": class_names.get(e, "state"), "size": sizes.get(e)}
        for e in ids
    ]
    _work(config, "scatter_states.svg").write_text(
        plots.plot_scatter(flat.tolist(), annotations, title="relative opinion space"),
        encoding="utf-8",
    )
    outputs = 1
    sweep_path = _work(config, "sweep.csv")
    if sweep_path.exists():
        rows = []
        with open(sweep_path, encoding="utf-8") as fh:
            fh.readline()
            for line in fh:
                metric, label_count, k, run, errors = line.strip().split(",")
                rows.append(
                    lnp.SweepRow(metric, int(label_count), int(k), int(run), int(errors))
                )
        med = lnp.sweep_medians(rows)
        series: dict[str, list] = {}
        for (metric, label_count, k), (mid, lo, hi) in sorted(med.items()):
            if label_count == config.plot_label_count:
                series.setdefault(metric, []).append((k, mid, lo, hi))
        if series:
            _work(config, "error_curves.svg").write_text(
                plots.plot_error_curves(
                    series, title=f"prediction errors, {config.plot_label_count} initial labels"
                ),
                encoding="utf-8",
            )
            outputs += 1
    quality_path = _work(config, "quality_summary.csv")
    if quality_path.exists():
        curve = []
        with open(quality_path, encoding="utf-8") as fh:
            fh.readline()
            for line in fh:
                k, mid, lo, hi = line.strip().split(",")
                curve.append((int(k), float(mid), float(lo), float(hi)))
        if curve:
            _work(config, "pne_curve.svg").write_text(
                plots.plot_error_curves(
                    {"pne": curve}, title="preservation neighborhood error", y_label="PNE"
                ),
                encoding="utf-8",
            )
            outputs += 1
    return {"figures": outputs}


# ---------------------------------------------------------------------------
# verification


def _check_hypergeometric(max_total: int = 45) -> tuple[bool, str]:
    worst = 0.0
    for total in range(1, max_total + 1):
        for n_i in range(total + 1):
            for n_j in range(total + 1):
                for k in range(min(n_i, n_j) + 1):
                    got = ht.edge_pvalue(n_i, n_j, k, total)
                    want = synth.hypergeom_pmf(total, n_i, n_j, k)
                    if want == 0.0:
                        if got > 1e-12:
                            return False, f"expected 0, got {got} at {(total, n_i, n_j, k)}"
                        continue
                    worst = max(worst, abs(got - want) / want)
    return worst < 1e-9, f"max_rel_err={worst:.3e} over N<={max_total}"


def _gradient_error(model, rng, n_ngrams: int = 20) -> float:
    worst = 0.0
    c = model.n_categories
    checked = 0
    while checked < n_ngrams:
        t = rng.integers(0, model.vocab_size, model.window)
        t_r = oowe.corrupt(t, model.vocab_size, rng)
        category = int(rng.integers(1, c + 1))
        scores_t = oowe.forward(model, t)
        scores_r = oowe.forward(model, t_r)
        margins = [1.0 + scores_r[0] - scores_t[0]] + [
            1.0 + scores_t[j] - scores_t[category] for j in range(1, c + 1) if j != category
        ]
        pre_t = model.w1 @ model.embeddings[t].ravel() + model.b1
        pre_r = model.w1 @ model.embeddings[t_r].ravel() + model.b1
        kink_gap = min(
            float(np.abs(np.abs(pre_t) - 1.0).min()),
            float(np.abs(np.abs(pre_r) - 1.0).min()),
        )
        if min(abs(m) for m in margins) < 1e-3 or kink_gap < 1e-3:
            continue
        checked += 1
        analytic = oowe.gradients(model, t, t_r, category, 0.5)
        numeric = synth.finite_diff_grads(model, t, t_r, category, 0.5)
        for name in ("w1", "b1", "w2", "b2"):
            a = getattr(analytic, name)
            b = getattr(numeric, name)
            worst = max(worst, np.abs(a - b).max() / max(np.abs(a).max(), np.abs(b).max(), 1e-6))
        dense_a = np.zeros_like(model.embeddings)
        for idx, row in analytic.embed_rows.items():
            dense_a[idx] += row
        dense_b = np.zeros_like(model.embeddings)
        for idx, row in numeric.embed_rows.items():
            dense_b[idx] += row
        worst = max(
            worst,
            np.abs(dense_a - dense_b).max()
            / max(np.abs(dense_a).max(), np.abs(dense_b).max(), 1e-6),
        )
    return worst


def _check_gradients(config: PipelineConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(stage_seed(config, "verify-grad"))
    worst = 0.0
    for _ in range(10):
        model_config = oowe.OoweConfig(window=3, embed_dim=5, hidden_dim=4, categories=3)
        model = oowe.init_model(12, model_config, rng)
        model.w1 += rng.standard_normal(model.w1.shape) * 0.5
        model.w2 += rng.standard_normal(model.w2.shape) * 0.5
        model.embeddings += rng.standard_normal(model.embeddings.shape) * 0.5
        worst = max(worst, _gradient_error(model, rng, n_ngrams=20))
    model_path = _work(config, "model.bin")
    if model_path.exists():
        try:
            saved = oowe.load_model(model_path)
            worst = max(worst, _gradient_error(saved, rng, n_ngrams=5))
        except Exception as exc:
            return False, f"stored model failed the check: {exc}"
    return worst < 1e-4, f"max_rel_err={worst:.3e}"


def _check_weights(config: PipelineConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(stage_seed(config, "verify-weights"))
    worst = 0.0
    worst_sum = 0.0
    done2 = done3 = 0
    while done2 < 40 or done3 < 15:
        k = 2 if done2 < 40 else 3
        pts = rng.standard_normal((6, k)) * 2.0
        wm = lnp.reconstruction_weights(pts, k)
        worst_sum = max(worst_sum, float(np.abs(wm.row_sums() - 1.0).max()))
        oracle = synth.brute_force_lnp_weights(
            pts[0], pts[wm.indices[0]], resolution=0.25
        )
        if np.any(oracle < -1.9) or np.any(oracle[:2] > 2.9):
            continue  # optimum touches the oracle's search domain
        worst = max(worst, float(np.abs(wm.weights[0] - oracle).max()))
        if k == 2:
            done2 += 1
        else:
            done3 += 1
    ok = worst < 1e-6 and worst_sum < 1e-12
    return ok, f"max_abs_err={worst:.3e} max_rowsum_err={worst_sum:.3e}"


def _check_harmonic(config: PipelineConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(stage_seed(config, "verify-harmonic"))
    worst = 0.0
    for _ in range(20):
        n, k = 30, 4
        idx = np.array(
            [rng.choice([j for j in range(n) if j != i], size=k, replace=False) for i in range(n)]
        )
        w = rng.uniform(0.05, 1.0, (n, k))
        w /= w.sum(axis=1, keepdims=True)
        wm = lnp.WeightMatrix(idx, w)
        initial = {0: 0, 1: 1, 2: int(rng.integers(2))}
        iterated = lnp.propagate(wm, initial, 2, tol=1e-13, max_iters=200000)
        direct = synth.harmonic_solve(idx, w, initial, 2)
        worst = max(worst, float(np.abs(iterated - direct).max()))
    return worst < 1e-8, f"max_abs_err={worst:.3e}"


def _check_mds(config: PipelineConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(stage_seed(config, "verify-mds"))
    worst_classical = 0.0
    worst_smacof = 0.0
    monotone = True
    for trial in range(10):
        n = int(rng.integers(10, 60))
        d = int(rng.integers(2, 7))
        pts = rng.standard_normal((n, d)) * 3.0
        dist = mf.pairwise_euclidean(pts)
        recovered = mf.classical_mds(dist, d)
        worst_classical = max(worst_classical, synth.procrustes_residual(recovered, pts))
        if trial < 5:
            coords, history = mf.smacof_mds(dist, d, rng)
            monotone = monotone and bool(np.all(np.diff(history) <= 0.0))
            worst_smacof = max(worst_smacof, synth.procrustes_residual(coords, recovered))
    ok = worst_classical < 1e-8 and worst_smacof < 1e-6 and monotone
    return ok, (
        f"classical_residual={worst_classical:.3e} smacof_residual={worst_smacof:.3e} "
        f"monotone={monotone}"
    )


def stage_verify(config: PipelineConfig) -> dict:
    checks = [
        ("hypergeometric_grid", lambda: _check_hypergeometric()),
        ("oowe_gradients", lambda: _check_gradients(config)),
        ("lnp_weights_brute_force", lambda: _check_weights(config)),
        ("harmonic_fixed_point", lambda: _check_harmonic(config)),
        ("mds_procrustes", lambda: _check_mds(config)),
    ]
    lines = []
    failures = 0
    for name, check in checks:
        try:
            ok, detail = check()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        line = f"{status} {name}: {detail}"
        print(line)
        lines.append(line)
    _work(config, "verify_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if failures:
        raise VerificationFailure(f"{failures} of {len(checks)} checks failed")
    return {"checks": len(checks), "failures": failures}


# ---------------------------------------------------------------------------
# stage registry and runner

STAGES: dict[str, tuple] = {
    # name -> (fn, input paths fn, output names)
    "synth": (
        stage_synth,
        lambda c: [],
        ["corpus.jsonl", "tweet_truth.csv", "user_truth.csv", "state_truth.csv", "initial_labels.csv"],
    ),
    "ingest": (
        stage_ingest,
        lambda c: [_input_or(c.corpus, _work(c, "corpus.jsonl"))],
        ["clean.jsonl"],
    ),
    "hashtag-net": (
        stage_hashtag_net,
        lambda c: [_work(c, "clean.jsonl"), _input_or(c.seeds_file, data_path("seeds.csv"))],
        ["hashtag_labels.csv"],
    ),
    "label-tweets": (
        stage_label_tweets,
        lambda c: [_work(c, "clean.jsonl"), _work(c, "hashtag_labels.csv")],
        ["training_set.tsv"],
    ),
    "train": (
        stage_train,
        lambda c: [_work(c, "training_set.tsv")],
        ["model.bin", "vocab.tsv", "train_log.csv"],
    ),
    "embed": (
        stage_embed,
        lambda c: [_work(c, "model.bin"), _work(c, "vocab.tsv")],
        ["embeddings.tsv"],
    ),
    "aggregate": (
        stage_aggregate,
        lambda c: [
            _work(c, "clean.jsonl"),
            _work(c, "model.bin"),
            _work(c, "vocab.tsv"),
            _work(c, "hashtag_labels.csv"),
        ],
        ["points.tsv", "state_summary.csv"],
    ),
    "predict": (
        stage_predict,
        lambda c: [
            _work(c, "points.tsv"),
            _input_or(c.labels_file, _work(c, "initial_labels.csv")),
        ],
        ["predictions.csv"],
    ),
    "sweep": (
        stage_sweep,
        lambda c: [
            _work(c, "points.tsv"),
            _input_or(c.truth_file, _work(c, "state_truth.csv")),
        ],
        ["sweep.csv"],
    ),
    "metrics": (
        stage_metrics,
        lambda c: [_work(c, "points.tsv")],
        ["quality_runs.csv", "quality_summary.csv", "selected_k.txt"],
    ),
    "plot": (
        stage_plot,
        lambda c: [_work(c, "points.tsv")],
        ["scatter_states.svg"],
    ),
    "verify": (stage_verify, lambda c: [], ["verify_report.txt"]),
}

CHAIN = [
    "synth",
    "ingest",
    "hashtag-net",
    "label-tweets",
    "train",
    "embed",
    "aggregate",
    "predict",
    "sweep",
    "metrics",
    "plot",
]


def run_stage(name: str, config: PipelineConfig) -> dict:
    """Run one stage: check inputs, execute, clean up on failure, and append
    a manifest record (stage, config hash, seed, duration, counts, hashes)."""
    if name == "all":
        counts = {}
        for stage in CHAIN:
            counts[stage] = run_stage(stage, config)
        return counts
    if name not in STAGES:
        raise UsageError(f"unknown stage {name!r}; expected one of {sorted(STAGES)} or 'all'")
    fn, inputs_fn, output_names = STAGES[name]
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    lock_path = workdir / ".lock"
    try:
        lock_fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError(
            f"another invocation holds {lock_path}; remove it if that run is dead"
        ) from None
    try:
        inputs = [Path(p) for p in inputs_fn(config)]
        for path in inputs:
            if not path.exists():
                raise DataError(f"missing input: {path}")
        outputs = [_work(config, n) for n in output_names]
        started = time.time()
        try:
            counts = fn(config)
        except Exception:
            for path in outputs:
                if path.exists():
                    path.unlink()
            raise
        duration = time.time() - started
        manifest = {
            "stage": name,
            "config_hash": config_hash(config),
            "seed": stage_seed(config, name),
            "duration_s": round(duration, 3),
            "counts": counts,
            "inputs": {str(p): _sha256(p) for p in inputs},
            "outputs": {str(p): _sha256(p) for p in outputs if p.exists()},
        }
        with open(workdir / "runs.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, sort_keys=True) + "\n")
        return counts
    finally:
        os.close(lock_fd)
        lock_path.unlink(missing_ok=True)
