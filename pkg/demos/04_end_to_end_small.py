"""Whole pipeline on a small synthetic corpus, via the library API.

Generates a 4-speaker corpus, quantizes it, splits one problem, trains
three linear probes on the unquantized stream and on codebook 1, and
prints the evaluation reports. The command-line tool chains the same
stages from files; see the README for that version.

Run:  python demos/04_end_to_end_small.py   (takes ~20 seconds)
"""

import tempfile
from pathlib import Path

from tune_probe.experiment import DEFAULT_PARAMS, stage_evaluate, stage_train
from tune_probe.latent_store import load_corpus
from tune_probe.quantizer import quantize_corpus
from tune_probe.synth_corpus import generate_corpus
from tune_probe.tasks import EXCLUDED, problem, save_split, stratified_split

work = Path(tempfile.mkdtemp(prefix="tune_probe_demo_"))
print(f"working under {work}")

manifest = generate_corpus(
    work / "corpus", n_speakers=4, utts_per_speaker_per_tune=6, d=64, seed=0,
    nuisance_dims=6,
)
print("corpus:", manifest)

manifest_q = quantize_corpus(
    manifest, work / "corpus", levels=2, k=64, iters=10, seed=0, fit_samples=4000
)
print("quantized manifest:", manifest_q)

records = load_corpus(manifest_q, check_files=False).records
prob = problem("xll-vs-xhh")
pairs = [(r.id, prob.label_of(r.tune)) for r in records
         if prob.label_of(r.tune) is not EXCLUDED]
split_path = work / "split.jsonl"
save_split(stratified_split(pairs, seed=0), split_path)

params = dict(DEFAULT_PARAMS, d_pca=12, epochs=40)
for stream in ("unquantized", "codebook1"):
    run_dir = work / f"run_{stream}"
    stage_train(manifest_q, "xll-vs-xhh", stream, split_path,
                params=params, kind="linear", seed=0, out_dir=run_dir)
    report = stage_evaluate(manifest_q, "xll-vs-xhh", stream, split_path, run_dir)
    print(
        f"{stream:12s} mean test accuracy {report.mean_test_accuracy:.3f} "
        f"(ZeroR {report.zero_r:.3f}, per-seed {[round(a, 3) for a in report.test_accuracies]})"
    )
