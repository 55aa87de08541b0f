"""Staged experiment runner with content-addressed caching.

Each stage writes its artifacts under ``<output>/<stage>/`` together with a
``manifest.json`` holding the stage key: a hash over the stage's own settings,
its input files and the keys of the stages it consumes. A stage whose stored
key matches is loaded from disk instead of recomputed, so changing only the
fusion strategy never retrains embeddings.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from cbe import __version__
from cbe.config import PipelineConfig, file_hash, stable_hash
from cbe.corpus import (
    LabeledCorpus,
    class_distribution,
    distribution_vectors,
    emoji_statistics,
    load_corpus,
    overlap_analysis,
    preprocess_corpus,
    write_corpus,
    write_distribution_report,
)
from cbe.embed.io import export_embeddings, import_embeddings
from cbe.embed.sgns import EmbeddingTable, train_skipgram
from cbe.embed.sif import SifConfig, SifEmbedder
from cbe.embed.tokens import tokenize
from cbe.errors import CbeError, UnknownSeed
from cbe.evaluation import (
    BiasReport,
    ResultRow,
    bias_check,
    grid_search,
    spearman,
    stratified_kfold,
    stratified_split_indices,
    write_bias_reports,
    write_results,
)
from cbe.fusion import KgSentenceEmbedder, Standardizer, fuse_matrix, write_feature_dump
from cbe.kgstore import apply_additions, entity_iri, load_additions, load_ntriples
from cbe.learn import Dataset, predict, save_model, train_model, write_predictions
from cbe.linker import (
    EntityMention,
    apply_curation,
    entity_vocabulary,
    link_posts,
    load_curation_rules,
    load_gazetteer,
    read_mentions,
    write_mentions,
)
from cbe.walks import generate_walks, read_walk_sequences, walks_to_sequences, write_walks

log = logging.getLogger(__name__)

STAGES = ("ingest", "analyze", "link", "walk", "embed-text", "embed-kg", "fuse", "train", "evaluate", "bias-check")
INPUT_KINDS = ("text", "kge", "cbe")


class StageError(CbeError):
    def __init__(self, stage: str, exc: BaseException):
        self.stage = stage
        self.cause = exc
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")


class FeatureFactory:
    """Builds text, KG and fused feature matrices for a given training subset.

    SIF statistics, the removed component and the standardization are fit on
    the training rows only, then applied to every row.
    """

    def __init__(
        self,
        corpus: LabeledCorpus,
        mentions: dict[str, list[EntityMention]],
        kge: EmbeddingTable,
        text_table: EmbeddingTable | None,
        sif_cfg: SifConfig,
        strategy: str = "concat",
        sentence_vectors: np.ndarray | None = None,
    ):
        self.ids = corpus.ids
        self.tokens = [tokenize(p.clean_text) for p in corpus.posts]
        self.qids = [[m.qid for m in mentions.get(pid, [])] for pid in self.ids]
        self.kge = kge
        self.text_table = text_table
        self.sentence_vectors = sentence_vectors
        self.sif_cfg = sif_cfg
        self.strategy = strategy
        self._blocks: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def blocks(self, train_rows: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(text block, KG block, kg_missing mask) for all rows."""
        key = tuple(train_rows)
        if key not in self._blocks:
            if self.sentence_vectors is not None:
                text_x = self.sentence_vectors
            else:
                train_sents = [self.tokens[i] for i in train_rows]
                text_emb = SifEmbedder(self.text_table, self.sif_cfg).fit(train_sents)
                text_x, _ = text_emb.transform(self.tokens)
            kg_emb = KgSentenceEmbedder(self.kge, self.sif_cfg).fit([self.qids[i] for i in train_rows])
            kg_x, missing = kg_emb.transform(self.qids)
            self._blocks[key] = (text_x, kg_x, missing)
        return self._blocks[key]

    def matrix(self, kind: str, train_rows: Sequence[int]) -> np.ndarray:
        text_x, kg_x, _ = self.blocks(train_rows)
        if kind == "text":
            return text_x
        if kind == "kge":
            return kg_x
        if kind == "cbe":
            return fuse_matrix(text_x, kg_x, self.strategy)
        raise ValueError(f"unknown input kind {kind!r}")

    def datasets(self, kind: str, labels: np.ndarray, train_rows: Sequence[int], test_rows: Sequence[int]) -> tuple[Dataset, Dataset]:
        x = self.matrix(kind, train_rows)
        scaler = Standardizer().fit(x[train_rows])
        xs = scaler.transform(x)
        tr = Dataset(xs[train_rows], labels[train_rows], [self.ids[i] for i in train_rows])
        te = Dataset(xs[test_rows], labels[test_rows], [self.ids[i] for i in test_rows])
        return tr, te


class Pipeline:
    def __init__(self, cfg: PipelineConfig, force: bool = False):
        self.cfg = cfg
        self.out = cfg.path("paths.output") or Path("out")
        self.force = force
        self._keys: dict[str, str] = {}
        self._cache: dict[str, object] = {}

    # bookkeeping

    def _manifest(self, stage: str) -> Path:
        return self.out / stage / "manifest.json"

    def stage_config(self, stage: str) -> dict:
        c = self.cfg
        table = {
            "ingest": c.subset(),
            "analyze": c.subset("analyze"),
            "link": c.subset("linker"),
            "walk": c.subset("walks", "linker.min_count"),
            "embed-text": c.subset("sgns_text"),
            "embed-kg": c.subset("sgns_kg"),
            "fuse": c.subset("sif", "fusion", "eval.train_ratio", "eval.seed", "eval.split_task"),
            "train": c.subset("sif", "fusion", "models", "grid", "eval.tasks", "eval.inputs", "eval.train_ratio", "eval.seed"),
            "evaluate": c.subset("sif", "fusion", "models", "grid", "eval"),
            "bias-check": c.subset("bias"),
        }
        return table[stage]

    def _seeds(self) -> dict[str, int]:
        return {k: self.cfg[k] for k in ("walks.seed", "sgns_text.seed", "sgns_kg.seed", "eval.seed")}

    def _run_stage(
        self,
        stage: str,
        inputs: dict[str, Path | None],
        upstream: Sequence[str],
        compute: Callable[[Path], object],
        load: Callable[[Path], object],
    ) -> object:
        if stage in self._cache:
            return self._cache[stage]
        try:
            for name, p in inputs.items():
                if p is not None and not p.exists():
                    raise FileNotFoundError(f"{name} file not found: {p}")
            ups = {u: self._keys[u] for u in upstream}
            input_hashes = {name: file_hash(p) for name, p in sorted(inputs.items())}
            stage_cfg = self.stage_config(stage)
            key = stable_hash({"stage": stage, "config": stage_cfg, "inputs": input_hashes, "upstream": ups, "version": __version__})
            directory = self.out / stage
            manifest = self._manifest(stage)
            if not self.force and manifest.exists():
                old = json.loads(manifest.read_text(encoding="utf-8"))
                if old.get("key") == key and all((directory / f).exists() for f in old.get("outputs", [])):
                    log.info("%s: cached (%s)", stage, key[:12])
                    value = load(directory)
                    self._keys[stage] = key
                    self._cache[stage] = value
                    return value
            directory.mkdir(parents=True, exist_ok=True)
            log.info("%s: running", stage)
            value = compute(directory)
        except CbeError as exc:
            if isinstance(exc, StageError):
                raise
            raise StageError(stage, exc) from exc
        except (OSError, ValueError, KeyError) as exc:
            raise StageError(stage, exc) from exc
        outputs = sorted(str(p.relative_to(directory)) for p in directory.rglob("*") if p.is_file() and p.name != "manifest.json")
        record = {
            "stage": stage,
            "key": key,
            "config_hash": stable_hash(stage_cfg),
            "config": stage_cfg,
            "seeds": self._seeds(),
            "inputs": {k: v for k, v in input_hashes.items()},
            "upstream": ups,
            "outputs": outputs,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "version": __version__,
        }
        manifest.write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        self._keys[stage] = key
        self._cache[stage] = value
        return value

    def verify_manifest(self, stage: str) -> bool:
        """True when the stored config hash matches the current configuration."""
        record = json.loads(self._manifest(stage).read_text(encoding="utf-8"))
        return record["config_hash"] == stable_hash(self.stage_config(stage))

    # stages

    def ingest(self) -> LabeledCorpus:
        path = self.cfg.path("paths.corpus")
        if path is None:
            raise StageError("ingest", ValueError("paths.corpus is not set"))

        def compute(d: Path):
            corpus = preprocess_corpus(load_corpus(path))
            write_corpus(corpus, d / "posts_clean.tsv", clean=True)
            with open(d / "emojis.tsv", "w", encoding="utf-8") as fh:
                fh.write("id\temojis\n")
                for p in corpus.posts:
                    fh.write(f"{p.id}\t{' '.join(p.emojis)}\n")
            return corpus

        return self._run_stage("ingest", {"corpus": path}, [], compute, lambda d: preprocess_corpus(load_corpus(path)))

    def analyze(self) -> Path:
        corpus = self.ingest()
        top_n = int(self.cfg["analyze.top_n"])

        def compute(d: Path):
            rows: list[tuple[str, str, object]] = []
            n, frac = emoji_statistics(corpus)
            rows += [("all", "posts", len(corpus)), ("all", "posts_with_emoji", n), ("all", "emoji_fraction", frac)]
            dists = []
            for task in corpus.tasks:
                d0, d1 = class_distribution(corpus, task, "emoji", top_n)
                dists += [d0, d1]
                rows += [(task, "emoji_total_label0", d0.total), (task, "emoji_total_label1", d1.total)]
                try:
                    rows.append((task, "emoji_overlap_jaccard", overlap_analysis(d0, d1)))
                except CbeError:
                    rows.append((task, "emoji_overlap_jaccard", None))
                _, xs, ys = distribution_vectors(d0, d1)
                try:
                    rho, p = spearman(xs, ys)
                except CbeError as exc:
                    rho, p = None, None
                    rows.append((task, "emoji_spearman_note", type(exc).__name__))
                rows += [(task, "emoji_spearman_rho", rho), (task, "emoji_spearman_p", p), (task, "emoji_items", len(xs))]
            with open(d / "analysis.tsv", "w", encoding="utf-8") as fh:
                fh.write("scope\tmetric\tvalue\n")
                for scope, metric, value in rows:
                    fh.write(f"{scope}\t{metric}\t{'NA' if value is None else value}\n")
            write_distribution_report(dists, d / "emoji_distributions.tsv")
            return d / "analysis.tsv"

        return self._run_stage("analyze", {}, ["ingest"], compute, lambda d: d / "analysis.tsv")

    def link(self) -> dict[str, list[EntityMention]]:
        corpus = self.ingest()
        c = self.cfg
        gaz_path = c.path("paths.gazetteer")
        cur_path = c.path("paths.curation")
        mode = c["linker.mode"]
        if mode not in ("gazetteer", "remote", "union"):
            raise StageError("link", ValueError(f"linker.mode must be gazetteer, remote or union, got {mode!r}"))

        def compute(d: Path):
            gaz = load_gazetteer(gaz_path) if gaz_path and mode != "remote" else None
            texts = {p.id: p.clean_text for p in corpus.posts}
            raw = link_posts(
                texts,
                gaz,
                remote=mode in ("remote", "union"),
                endpoint=c["linker.endpoint"] or None,
                timeout=float(c["linker.timeout"]),
                max_workers=1 if c["run.deterministic"] else int(c["linker.max_workers"]),
            )
            rules = load_curation_rules(cur_path)
            type_of = {qid: t for qid, t in (gaz.entries.values() if gaz else []) if t}
            curated = {pid: apply_curation(ms, rules, type_of=type_of) for pid, ms in raw.items()}
            write_mentions(curated, d / "mentions.tsv")
            return curated

        inputs = {"gazetteer": gaz_path, "curation": cur_path}
        return self._run_stage("link", inputs, ["ingest"], compute, lambda d: read_mentions(d / "mentions.tsv", corpus.ids))

    def walk(self) -> list[list[str]]:
        mentions = self.link()
        c = self.cfg
        kg_path = c.path("paths.kg")
        add_path = c.path("paths.additions")
        if kg_path is None:
            raise StageError("walk", ValueError("paths.kg is not set"))

        def compute(d: Path):
            graph = load_ntriples(kg_path)
            if add_path is not None:
                graph = apply_additions(graph, load_additions(add_path))
            qids = entity_vocabulary(mentions.values(), int(c["linker.min_count"]))
            if not qids:
                raise ValueError("no linked entities to seed walks from")
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", UnknownSeed)
                walks = generate_walks(graph, [entity_iri(q) for q in qids], c.walk_config())
            missing = [w.message.iri for w in caught if isinstance(w.message, UnknownSeed)]
            if missing:
                log.warning("walk: %d linked entities are absent from the graph", len(missing))
            with open(d / "unknown_seeds.txt", "w", encoding="utf-8") as fh:
                fh.writelines(iri + "\n" for iri in missing)
            write_walks(walks, d / "walks.txt")
            return walks_to_sequences(walks)

        inputs = {"kg": kg_path, "additions": add_path}
        return self._run_stage("walk", inputs, ["link"], compute, lambda d: read_walk_sequences(d / "walks.txt"))

    def embed_kg(self) -> EmbeddingTable:
        seqs = self.walk()

        def compute(d: Path):
            table = train_skipgram(seqs, self.cfg.sgns_config("kg"))
            export_embeddings(table, d / "kge.txt")
            # reload so fresh and cached runs see identical numbers
            return import_embeddings(d / "kge.txt")

        return self._run_stage("embed-kg", {}, ["walk"], compute, lambda d: import_embeddings(d / "kge.txt"))

    def embed_text(self) -> EmbeddingTable | np.ndarray:
        """Word vectors trained on post text, or imported per-post sentence vectors."""
        corpus = self.ingest()
        ext = self.cfg.path("paths.sentence_vectors")

        def load_sentence_vectors(p: Path) -> np.ndarray:
            table = import_embeddings(p)
            missing = [pid for pid in corpus.ids if pid not in table]
            if missing:
                raise ValueError(f"sentence vector file lacks {len(missing)} post ids (first: {missing[0]})")
            return np.vstack([table[pid] for pid in corpus.ids])

        def compute(d: Path):
            if ext is not None:
                (d / "source.txt").write_text(f"external sentence vectors: {ext}\n", encoding="utf-8")
                return load_sentence_vectors(ext)
            seqs = [tokenize(p.clean_text) for p in corpus.posts]
            table = train_skipgram([s for s in seqs if s], self.cfg.sgns_config("text"))
            export_embeddings(table, d / "text_vectors.txt")
            return import_embeddings(d / "text_vectors.txt")

        def load(d: Path):
            if ext is not None:
                return load_sentence_vectors(ext)
            return import_embeddings(d / "text_vectors.txt")

        return self._run_stage("embed-text", {"sentence_vectors": ext}, ["ingest"], compute, load)

    def features(self) -> FeatureFactory:
        if "features" not in self._cache:
            text = self.embed_text()
            self._cache["features"] = FeatureFactory(
                self.ingest(),
                self.link(),
                self.embed_kg(),
                text if isinstance(text, EmbeddingTable) else None,
                self.cfg.sif_config(),
                self.cfg["fusion.strategy"],
                sentence_vectors=None if isinstance(text, EmbeddingTable) else text,
            )
        return self._cache["features"]

    def _split_rows(self, task: str) -> tuple[list[int], list[int]]:
        corpus = self.ingest()
        return stratified_split_indices(corpus.task_labels(task), float(self.cfg["eval.train_ratio"]), int(self.cfg["eval.seed"]))

    def fuse(self) -> Path:
        factory = self.features()
        corpus = self.ingest()

        def compute(d: Path):
            train_rows, _ = self._split_rows(self.cfg["eval.split_task"])
            for kind in INPUT_KINDS:
                write_feature_dump(d / f"features_{kind}.tsv", corpus.ids, corpus.labels, corpus.tasks, factory.matrix(kind, train_rows))
            _, _, missing = factory.blocks(train_rows)
            with open(d / "kg_missing.tsv", "w", encoding="utf-8") as fh:
                fh.write("id\tkg_missing\n")
                for pid, m in zip(corpus.ids, missing):
                    fh.write(f"{pid}\t{int(m)}\n")
            return d

        return self._run_stage("fuse", {}, ["ingest", "link", "embed-kg", "embed-text"], compute, lambda d: d)

    def _first_config(self, family: str) -> dict:
        return {k: v[0] for k, v in self.cfg.grids.get(family, {}).items()}

    def train(self) -> dict[tuple[str, str, str], dict[str, int]]:
        """Fit each (model, input, task) on the 70% split; predict the rest.

        Uses the first value of every grid list. Returns test-set predictions
        keyed by (model, input, task).
        """
        factory = self.features()
        corpus = self.ingest()
        families = self.cfg.list("models.families")
        inputs = self.cfg.list("eval.inputs")
        tasks = self.cfg.list("eval.tasks")
        seed = int(self.cfg["eval.seed"])

        def compute(d: Path):
            (d / "models").mkdir(exist_ok=True)
            preds: dict[tuple[str, str, str], dict[str, int]] = {}
            for family in families:
                for kind in inputs:
                    rows = []
                    for task in tasks:
                        labels = np.asarray(corpus.task_labels(task))
                        tr_rows, te_rows = self._split_rows(task)
                        tr, te = factory.datasets(kind, labels, tr_rows, te_rows)
                        model = train_model(family, tr, seed=seed, **self._first_config(family))
                        save_model(model, d / "models" / f"{family}_{kind}_{task}.model")
                        lab, score = predict(model, te.features)
                        preds[(family, kind, task)] = dict(zip(te.ids, lab.tolist()))
                        rows += [(pid, task, s, y) for pid, s, y in zip(te.ids, score, lab)]
                    write_predictions(d / f"predictions_{family}_{kind}.tsv", rows)
            return preds

        def load(d: Path):
            preds: dict[tuple[str, str, str], dict[str, int]] = {}
            for family in families:
                for kind in inputs:
                    with open(d / f"predictions_{family}_{kind}.tsv", encoding="utf-8") as fh:
                        next(fh)
                        for line in fh:
                            pid, task, _, label = line.rstrip("\n").split("\t")
                            preds.setdefault((family, kind, task), {})[pid] = int(label)
            return preds

        return self._run_stage("train", {}, ["ingest", "link", "embed-kg", "embed-text"], compute, load)

    def evaluate(self) -> Path:
        """10-fold grid search per (model, input, task); writes ``results.tsv``.

        The winning configuration is refit on every fold once more to record
        an out-of-fold prediction for each post (``oof_predictions.tsv``).
        """
        factory = self.features()
        corpus = self.ingest()
        c = self.cfg
        seed = int(c["eval.seed"])

        def compute(d: Path):
            rows: list[ResultRow] = []
            detail = []
            oof = []
            for task in c.list("eval.tasks"):
                labels = np.asarray(corpus.task_labels(task))
                folds = stratified_kfold(labels, int(c["eval.k"]), seed, corpus.ids)
                shell = Dataset(np.zeros((len(labels), 1)), labels, corpus.ids)
                for family in c.list("models.families"):
                    for kind in c.list("eval.inputs"):
                        fold_data = lambda j, tr, te, kind=kind, labels=labels: factory.datasets(kind, labels, tr, te)  # noqa: E731
                        best, scores = grid_search(family, c.grids[family], shell, folds, c["eval.metric"], seed, fold_data)
                        top = next(s for s in scores if s.config == best)
                        rows.append(ResultRow(family, kind, task, top.mean_f1, top.mean_accuracy, best))
                        detail += [(family, kind, task, s) for s in scores]
                        for j, (tr, te) in enumerate(folds.folds(corpus.ids)):
                            train_ds, test_ds = fold_data(j, tr, te)
                            lab, score = predict(train_model(family, train_ds, seed=seed, **best), test_ds.features)
                            oof += [(family, kind, task, pid, s, y) for pid, s, y in zip(test_ds.ids, score, lab)]
            write_results(rows, d / "results.tsv")
            with open(d / "grid_scores.tsv", "w", encoding="utf-8") as fh:
                fh.write("model\tinput\ttask\tconfig\tmean\tmean_f1\tmean_accuracy\tundefined_f1_folds\n")
                for family, kind, task, s in detail:
                    cfg_s = ",".join(f"{k}={s.config[k]}" for k in sorted(s.config))
                    fh.write(f"{family}\t{kind}\t{task}\t{cfg_s}\t{s.mean:.6f}\t{s.mean_f1:.6f}\t{s.mean_accuracy:.6f}\t{s.undefined_f1_folds}\n")
            with open(d / "oof_predictions.tsv", "w", encoding="utf-8") as fh:
                fh.write("model\tinput\ttask\tid\tscore\tlabel\n")
                for family, kind, task, pid, s, y in oof:
                    fh.write(f"{family}\t{kind}\t{task}\t{pid}\t{float(s)!r}\t{int(y)}\n")
            return d / "results.tsv"

        return self._run_stage("evaluate", {}, ["ingest", "link", "embed-kg", "embed-text"], compute, lambda d: d / "results.tsv")

    def out_of_fold_predictions(self) -> dict[tuple[str, str, str], dict[str, int]]:
        preds: dict[tuple[str, str, str], dict[str, int]] = {}
        with open(self.evaluate().parent / "oof_predictions.tsv", encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                family, kind, task, pid, _, label = line.rstrip("\n").split("\t")
                preds.setdefault((family, kind, task), {})[pid] = int(label)
        return preds

    def bias_check(self) -> list[BiasReport]:
        """Gold vs predicted term-distribution correlation on every post.

        Predictions are the out-of-fold ones from :meth:`evaluate`, so each
        post is labelled by a model that never saw it.
        """
        preds = self.out_of_fold_predictions()
        corpus = self.ingest()
        top_n = int(self.cfg["bias.top_n"])
        count = self.cfg["bias.count"]

        def compute(d: Path):
            reports = [
                bias_check(corpus, task, p, top_n, count=count, model=family, input_kind=kind)
                for (family, kind, task), p in preds.items()
            ]
            write_bias_reports(reports, d / "bias.tsv")
            return reports

        def load(d: Path):
            out = []
            with open(d / "bias.tsv", encoding="utf-8") as fh:
                next(fh)
                for line in fh:
                    m, k, t, ri, pi, ro, po, n, note = line.rstrip("\n").split("\t")
                    num = lambda v: None if v == "NA" else float(v)  # noqa: E731
                    out.append(BiasReport(t, k, m, num(ri), num(pi), num(ro), num(po), int(n), note))
            return out

        return self._run_stage("bias-check", {}, ["evaluate"], compute, load)

    def matrix(self) -> Path:
        """Run every stage; returns the results table path."""
        self.analyze()
        self.fuse()
        self.train()
        results = self.evaluate()
        self.bias_check()
        return results

    def run(self, stage: str):
        method = {
            "ingest": self.ingest,
            "analyze": self.analyze,
            "link": self.link,
            "walk": self.walk,
            "embed-text": self.embed_text,
            "embed-kg": self.embed_kg,
            "fuse": self.fuse,
            "train": self.train,
            "evaluate": self.evaluate,
            "bias-check": self.bias_check,
            "matrix": self.matrix,
        }[stage]
        return method()
