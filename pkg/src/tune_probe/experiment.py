"""Pipeline wiring: corpus -> word frames -> pooled features -> probes -> reports.

Stages communicate through files (manifest, split, checkpoint directory,
report JSON) so each is independently re-runnable; these functions are
what the command-line front end calls. Everything is a pure function of
its inputs plus the explicit seeds.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import features as feats
from . import hpo
from .evaluation import EvalReport, accuracy, mean_report, single_seed_report
from .latent_store import CorpusManifest, UtteranceRecord, load_corpus, read_latents
from .probes import load_probe, predict, save_probe
from .tasks import (
    EXCLUDED,
    ClassificationProblem,
    SplitAssignment,
    load_split,
    problem,
    zero_r,
)

DEFAULT_PARAMS = {
    "delta_f": 0.0,
    "delta_b": 0.0,
    "d_pca": 32,
    "batch_size": 64,
    "learning_rate": 0.05,
    "epochs": 60,
    "d_hidden": 32,
}


@dataclass
class ProblemData:
    problem: ClassificationProblem
    records: dict[str, UtteranceRecord]  # included records only
    labels: dict[str, int]
    split_ids: dict[str, list[str]]  # split -> sorted ids

    def all_ids(self, splits=("train", "dev", "test")) -> list[str]:
        out: list[str] = []
        for s in splits:
            out.extend(self.split_ids[s])
        return out


def load_problem_data(
    manifest: CorpusManifest, problem_name: str, split: SplitAssignment
) -> ProblemData:
    prob = problem(problem_name)
    records: dict[str, UtteranceRecord] = {}
    labels: dict[str, int] = {}
    for rec in manifest.records:
        cls = prob.label_of(rec.tune)
        if cls is EXCLUDED:
            continue
        records[rec.id] = rec
        labels[rec.id] = cls
    split_ids: dict[str, list[str]] = {"train": [], "dev": [], "test": []}
    for uid in sorted(records):
        try:
            split_ids[split.split_of(uid)].append(uid)
        except KeyError:
            raise ValueError(
                f"id {uid!r} is included in problem {problem_name!r} but missing "
                "from the split; regenerate the split for this problem"
            ) from None
    return ProblemData(problem=prob, records=records, labels=labels, split_ids=split_ids)


def load_word_frames(
    data: ProblemData, stream: str, ids: list[str], jobs: int = 1
) -> dict[str, np.ndarray]:
    """Word-region frame matrices (float32) keyed by utterance id."""

    def one(uid: str) -> tuple[str, np.ndarray]:
        rec = data.records[uid]
        if stream not in rec.streams:
            raise KeyError(f"record {uid!r} has no stream {stream!r} in the manifest")
        seq = read_latents(rec.streams[stream])
        idx = feats.frames_for_interval(seq, rec.word_interval)
        return uid, seq.frames[idx.start : idx.stop].copy()

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return dict(pool.map(one, ids))
    return dict(one(uid) for uid in ids)


@dataclass
class FeatureBundle:
    pca: feats.PcaModel
    d_pca: int
    n_classes: int
    classes: tuple[str, ...]
    ids: dict[str, list[str]]
    matrices: dict[str, np.ndarray]  # split -> (n, d_pca)
    labels: dict[str, np.ndarray]  # split -> (n,)

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        return self.matrices[name], self.labels[name]


class PooledFeatureCache:
    """Pools word frames per decay setting and fits/caches PCA per setting.

    Hyperparameter search re-aggregates for every (delta_f, delta_b) it
    tries; the underlying frame matrices are read from disk once.
    """

    def __init__(
        self,
        frame_table: dict[str, np.ndarray],
        data: ProblemData,
        splits: tuple[str, ...] = ("train", "dev", "test"),
        center: bool = True,
    ):
        self.frame_table = frame_table
        self.data = data
        self.splits = splits
        self.center = center
        self._pooled: dict[tuple, dict[str, np.ndarray]] = {}
        self._pca: dict[tuple, feats.PcaModel] = {}
        some_id = next(iter(frame_table))
        self._dim = frame_table[some_id].shape[1]

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def n_classes(self) -> int:
        return self.data.problem.n_classes

    def pooled(self, delta_f: float, delta_b: float) -> dict[str, np.ndarray]:
        key = (float(delta_f), float(delta_b))
        if key not in self._pooled:
            cfg = feats.DecayConfig(*key)
            out = {}
            for split_name in self.splits:
                ids = self.data.split_ids[split_name]
                out[split_name] = np.stack(
                    [feats.pool_frames(self.frame_table[uid], cfg) for uid in ids]
                ) if ids else np.zeros((0, self._dim))
            self._pooled[key] = out
        return self._pooled[key]

    def features(self, delta_f: float, delta_b: float, d_pca: int) -> FeatureBundle:
        if "train" not in self.splits:
            raise ValueError("cache was built without the train split; cannot fit PCA")
        pooled = self.pooled(delta_f, delta_b)
        key = (float(delta_f), float(delta_b))
        if key not in self._pca:
            self._pca[key] = feats.fit_pca(pooled["train"], center=self.center)
        pca = self._pca[key]
        matrices = {}
        labels = {}
        for split_name in self.splits:
            matrices[split_name] = feats.project(pca, pooled[split_name], d_pca)
            labels[split_name] = np.array(
                [self.data.labels[uid] for uid in self.data.split_ids[split_name]],
                dtype=np.intp,
            )
        return FeatureBundle(
            pca=pca,
            d_pca=d_pca,
            n_classes=self.n_classes,
            classes=self.data.problem.classes,
            ids={s: list(self.data.split_ids[s]) for s in self.splits},
            matrices=matrices,
            labels=labels,
        )


def _require_split(split_path) -> SplitAssignment:
    if not os.path.exists(split_path):
        raise FileNotFoundError(f"missing split: {split_path}")
    return load_split(split_path)


def stage_train(
    manifest_path,
    problem_name: str,
    stream: str,
    split_path,
    params: dict,
    kind: str,
    seed: int,
    out_dir,
    n_probes: int = 3,
    jobs: int = 1,
    center: bool = True,
) -> dict:
    """Fit PCA on the train split, train n_probes probes, write checkpoints.

    Layout under out_dir: pca/, probe_0/..probe_{n-1}/, train_meta.json.
    """
    split = _require_split(split_path)
    manifest = load_corpus(manifest_path, check_files=False)
    data = load_problem_data(manifest, problem_name, split)
    frame_table = load_word_frames(data, stream, data.split_ids["train"], jobs=jobs)
    cache = PooledFeatureCache(frame_table, data, splits=("train",), center=center)
    used_params, bundle, runs = hpo.transfer_and_train(
        params, cache, kind, seed, n_probes=n_probes
    )
    os.makedirs(out_dir, exist_ok=True)
    feats.save_pca(bundle.pca, os.path.join(out_dir, "pca"))
    for i, (probe, losses) in enumerate(runs):
        save_probe(
            probe,
            os.path.join(out_dir, f"probe_{i}"),
            meta={
                "problem": problem_name,
                "stream": stream,
                "seed": seed + i,
                "params": used_params,
                "final_train_loss": losses[-1] if losses else None,
            },
        )
    meta = {
        "problem": problem_name,
        "stream": stream,
        "kind": kind,
        "base_seed": seed,
        "n_probes": n_probes,
        "params": used_params,
        "classes": list(bundle.classes),
        "center": center,
    }
    with open(os.path.join(out_dir, "train_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return meta


def stage_evaluate(
    manifest_path,
    problem_name: str,
    stream: str,
    split_path,
    run_dir,
    report_path=None,
    jobs: int = 1,
) -> EvalReport:
    """Score saved probes on dev and test; average the per-seed reports."""
    split = _require_split(split_path)
    meta_path = os.path.join(run_dir, "train_meta.json")
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"missing checkpoint metadata: {meta_path}")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    params = meta["params"]
    manifest = load_corpus(manifest_path, check_files=False)
    data = load_problem_data(manifest, problem_name, split)
    eval_ids = data.split_ids["dev"] + data.split_ids["test"]
    frame_table = load_word_frames(data, stream, eval_ids, jobs=jobs)
    cfg = feats.DecayConfig(params["delta_f"], params["delta_b"])
    pca = feats.load_pca(os.path.join(run_dir, "pca"))

    pooled = {}
    labels = {}
    for split_name in ("dev", "test"):
        ids = data.split_ids[split_name]
        pooled[split_name] = feats.project(
            pca,
            np.stack([feats.pool_frames(frame_table[uid], cfg) for uid in ids]),
            params["d_pca"],
        )
        labels[split_name] = np.array([data.labels[uid] for uid in ids], dtype=np.intp)

    zr = zero_r(labels["test"].tolist())
    reports = []
    for i in range(meta["n_probes"]):
        probe, probe_meta = load_probe(os.path.join(run_dir, f"probe_{i}"))
        dev_acc = accuracy(predict(probe, pooled["dev"]), labels["dev"])
        test_pred = predict(probe, pooled["test"])
        reports.append(
            single_seed_report(
                problem=problem_name,
                stream=stream,
                kind=meta["kind"],
                classes=tuple(meta["classes"]),
                seed=probe_meta["seed"],
                predictions=test_pred,
                labels=labels["test"],
                zero_r_value=zr,
                dev_accuracy=dev_acc,
            )
        )
    report = mean_report(reports)
    if report_path is not None:
        from .evaluation import save_report

        os.makedirs(os.path.dirname(os.path.abspath(report_path)), exist_ok=True)
        save_report(report, report_path)
    return report


def stage_hpo(
    manifest_path,
    problem_name: str,
    stream: str,
    split_path,
    kind: str,
    budget: int,
    seed: int,
    out_dir,
    jobs: int = 1,
    space: hpo.SearchSpace | None = None,
) -> hpo.TrialRecord:
    """Random search on the given stream, selecting by dev accuracy."""
    split = _require_split(split_path)
    manifest = load_corpus(manifest_path, check_files=False)
    data = load_problem_data(manifest, problem_name, split)
    ids = data.split_ids["train"] + data.split_ids["dev"]
    frame_table = load_word_frames(data, stream, ids, jobs=jobs)
    cache = PooledFeatureCache(frame_table, data, splits=("train", "dev"))
    if space is None:
        space = hpo.SearchSpace(d_pca_range=(2, cache.dim))

    from .probes import TrainConfig, train

    def objective(params: dict, trial_seed: int):
        p = hpo.clamp_d_pca(params, cache.dim)
        bundle = cache.features(p["delta_f"], p["delta_b"], p["d_pca"])
        cfg = TrainConfig(
            learning_rate=p["learning_rate"],
            batch_size=p["batch_size"],
            epochs=p["epochs"],
            seed=trial_seed,
        )
        y_train, l_train = bundle.split("train")
        probe, losses = train(kind, y_train, l_train, bundle.n_classes, cfg,
                              d_hidden=p.get("d_hidden"))
        y_dev, l_dev = bundle.split("dev")
        return accuracy(predict(probe, y_dev), l_dev), losses[-1] if losses else None

    best, log = run_search_with_dir(space, budget, objective, seed, kind, out_dir,
                                    problem_name, stream)
    return best


def run_search_with_dir(space, budget, objective, seed, kind, out_dir,
                        problem_name, stream) -> tuple[hpo.TrialRecord, list]:
    best, log = hpo.run_search(space, budget, objective, seed=seed, kind=kind)
    os.makedirs(out_dir, exist_ok=True)
    hpo.save_trials(log, os.path.join(out_dir, "trials.jsonl"))
    with open(os.path.join(out_dir, "best.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "problem": problem_name,
                "stream": stream,
                "kind": kind,
                "seed": seed,
                "best": best.to_json_dict(),
            },
            fh, sort_keys=True, indent=2,
        )
        fh.write("\n")
    return best, log


def stage_report(reports_dir, out_dir) -> str:
    """Aggregate every report JSON under reports_dir into results.csv."""
    from .evaluation import emit_results, load_report

    paths = sorted(
        os.path.join(reports_dir, name)
        for name in os.listdir(reports_dir)
        if name.endswith(".json")
    )
    if not paths:
        raise FileNotFoundError(f"no report JSON files under {reports_dir}")
    reports = [load_report(p) for p in paths]
    return emit_results(reports, out_dir)
