"""tune-probe command line: file-mediated pipeline stages.

    synth            generate the synthetic tune corpus
    validate-corpus  check a manifest and its latent files
    inspect-textgrid parse a TextGrid and locate the final word
    quantize         fit an RVQ codec and emit codebook streams
    split            stratified train/dev/test split for a problem
    hpo              random hyperparameter search on one stream
    train            train probes with a fixed configuration
    evaluate         score saved probes on dev/test
    report           aggregate report JSONs into results.csv

Every stage is deterministic given its inputs and --seed. Failures exit
nonzero with a single JSON error line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import experiment, quantizer, synth_corpus, tasks, textgrid
from .latent_store import CorpusValidationError, load_corpus


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("TUNE_PROBE_JOBS", "1")))
    except ValueError:
        return 1


def _add_jobs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jobs", type=int, default=_default_jobs(),
                   help="worker threads for file reading (default: TUNE_PROBE_JOBS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tune-probe", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic tune corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--speakers", type=int, default=30)
    p.add_argument("--per-tune", type=int, default=20,
                   help="utterances per speaker per tune")
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nuisance-dims", type=int, default=24)
    p.add_argument("--noise-sd", type=float, default=0.01)

    p = sub.add_parser("validate-corpus", help="validate a corpus manifest")
    p.add_argument("manifest")

    p = sub.add_parser("inspect-textgrid", help="parse a TextGrid, find the final word")
    p.add_argument("file")
    p.add_argument("--tier", default=textgrid.DEFAULT_WORD_TIER)

    p = sub.add_parser("quantize", help="fit RVQ and emit codebook streams")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="output dir (default: manifest dir)")
    p.add_argument("--levels", type=int, default=7)
    p.add_argument("--codebook-size", type=int, default=512)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--fit-samples", type=int, default=16384)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cumulative", action="store_true",
                   help="emit partial-sum reconstructions instead of per-level codewords")

    p = sub.add_parser("split", help="stratified 70/15/15 split for a problem")
    p.add_argument("manifest")
    p.add_argument("--problem", required=True, choices=tasks.PROBLEM_NAMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", type=float, nargs=3, default=(0.70, 0.15, 0.15))
    p.add_argument("--out", required=True, help="split file to write")

    p = sub.add_parser("hpo", help="random hyperparameter search")
    p.add_argument("--manifest", required=True)
    p.add_argument("--problem", required=True, choices=tasks.PROBLEM_NAMES)
    p.add_argument("--kind", required=True, choices=("linear", "nonlinear"))
    p.add_argument("--stream", default="unquantized")
    p.add_argument("--split", required=True)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="directory for trials.jsonl/best.json")
    _add_jobs(p)

    p = sub.add_parser("train", help="train probes with a fixed configuration")
    p.add_argument("--manifest", required=True)
    p.add_argument("--problem", required=True, choices=tasks.PROBLEM_NAMES)
    p.add_argument("--kind", required=True, choices=("linear", "nonlinear"))
    p.add_argument("--stream", default="unquantized")
    p.add_argument("--split", required=True)
    p.add_argument("--params", default=None,
                   help="JSON file with hyperparameters, or an hpo best.json; "
                        "defaults to the built-in configuration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probes", type=int, default=3, help="independent trainings")
    p.add_argument("--out", required=True, help="checkpoint directory")
    _add_jobs(p)

    p = sub.add_parser("evaluate", help="score saved probes on dev/test")
    p.add_argument("--manifest", required=True)
    p.add_argument("--problem", required=True, choices=tasks.PROBLEM_NAMES)
    p.add_argument("--stream", default="unquantized")
    p.add_argument("--split", required=True)
    p.add_argument("--run", required=True, help="checkpoint directory from train")
    p.add_argument("--out", required=True, help="report JSON to write")
    _add_jobs(p)

    p = sub.add_parser("report", help="aggregate report JSONs into results.csv")
    p.add_argument("--reports", required=True, help="directory of report JSONs")
    p.add_argument("--out", required=True, help="output directory")

    return parser


def _load_params(path: str | None) -> dict:
    if path is None:
        return dict(experiment.DEFAULT_PARAMS)
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if "best" in obj and isinstance(obj["best"], dict):  # an hpo best.json
        obj = obj["best"]["params"]
    elif "params" in obj and isinstance(obj["params"], dict):
        obj = obj["params"]
    params = dict(experiment.DEFAULT_PARAMS)
    params.update(obj)
    return params


def _cmd_synth(args) -> int:
    manifest = synth_corpus.generate_corpus(
        args.out,
        n_speakers=args.speakers,
        utts_per_speaker_per_tune=args.per_tune,
        d=args.dim,
        seed=args.seed,
        nuisance_dims=args.nuisance_dims,
        noise_sd=args.noise_sd,
    )
    print(manifest)
    return 0


def _cmd_validate(args) -> int:
    manifest = load_corpus(args.manifest, check_files=True)
    print(
        json.dumps(
            {
                "records": len(manifest.records),
                "streams": manifest.stream_names(),
                "ok": True,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_inspect_textgrid(args) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        doc = textgrid.parse_textgrid(fh.read())
    word = textgrid.final_word_interval(doc, args.tier)
    print(
        json.dumps(
            {
                "file": args.file,
                "xmin": doc.xmin,
                "xmax": doc.xmax,
                "tiers": [
                    {"name": t.name, "intervals": len(t.intervals)} for t in doc.tiers
                ],
                "final_word": {"word": word.word, "tmin": word.tmin, "tmax": word.tmax},
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_quantize(args) -> int:
    out_dir = args.out or os.path.dirname(os.path.abspath(args.manifest))
    manifest = quantizer.quantize_corpus(
        args.manifest,
        out_dir,
        levels=args.levels,
        k=args.codebook_size,
        iters=args.iters,
        seed=args.seed,
        fit_samples=args.fit_samples,
        cumulative=args.cumulative,
    )
    print(manifest)
    return 0


def _cmd_split(args) -> int:
    manifest = load_corpus(args.manifest, check_files=False)
    prob = tasks.problem(args.problem)
    pairs = [
        (rec.id, prob.label_of(rec.tune))
        for rec in manifest.records
        if prob.label_of(rec.tune) is not tasks.EXCLUDED
    ]
    assignment = tasks.stratified_split(pairs, ratios=tuple(args.ratios), seed=args.seed)
    parent = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(parent, exist_ok=True)
    tasks.save_split(assignment, args.out, extra_metadata={"problem": args.problem})
    print(args.out)
    return 0


def _cmd_hpo(args) -> int:
    best = experiment.stage_hpo(
        args.manifest, args.problem, args.stream, args.split,
        kind=args.kind, budget=args.budget, seed=args.seed,
        out_dir=args.out, jobs=args.jobs,
    )
    print(json.dumps({"best": best.to_json_dict()}, sort_keys=True))
    return 0


def _cmd_train(args) -> int:
    meta = experiment.stage_train(
        args.manifest, args.problem, args.stream, args.split,
        params=_load_params(args.params), kind=args.kind, seed=args.seed,
        out_dir=args.out, n_probes=args.probes, jobs=args.jobs,
    )
    print(json.dumps({"out": args.out, "params": meta["params"]}, sort_keys=True))
    return 0


def _cmd_evaluate(args) -> int:
    report = experiment.stage_evaluate(
        args.manifest, args.problem, args.stream, args.split,
        run_dir=args.run, report_path=args.out, jobs=args.jobs,
    )
    print(
        json.dumps(
            {
                "out": args.out,
                "mean_test_acc": report.mean_test_accuracy,
                "zero_r": report.zero_r,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_report(args) -> int:
    path = experiment.stage_report(args.reports, args.out)
    print(path)
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "validate-corpus": _cmd_validate,
    "inspect-textgrid": _cmd_inspect_textgrid,
    "quantize": _cmd_quantize,
    "split": _cmd_split,
    "hpo": _cmd_hpo,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except CorpusValidationError as exc:
        print(json.dumps({"error": str(exc), "errors": exc.errors}), file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError, RuntimeError, FloatingPointError) as exc:
        print(json.dumps({"error": f"{exc}"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
