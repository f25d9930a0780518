"""Acceptance gate: formula/oracle suite plus the end-to-end synthetic
experiment. Each criterion prints one PASS/FAIL line (bypassing pytest's
capture) and asserts.

The end-to-end part generates the default 4800-utterance corpus at seed
0, quantizes it (K=512, L=7), trains three linear probes per problem and
stream over the full 5-problem x 9-stream grid, and emits results.csv.
The whole pipeline is executed twice through the command line entry
point to check bitwise determinism.
"""

import csv
import filecmp
import os
import time

import numpy as np
import pytest

from conftest import record_acceptance
from tune_probe import cli
from tune_probe.evaluation import load_report
from tune_probe.features import DecayConfig, decay_weights, fit_pca, project, reconstruct
from tune_probe.latent_store import TUNES
from tune_probe.probes import gradients, init_probe, softmax
from tune_probe.quantizer import rvq_encode_batch, rvq_fit, vq_encode_batch
from tune_probe.tasks import problem, stratified_split, zero_r

PROBLEMS = ("8class", "5class", "hhh-vs-lll", "hxx-vs-lxx", "xll-vs-xhh")
STREAMS = ("unquantized",) + tuple(f"codebook{j}" for j in range(8))


def check(name: str, condition: bool, detail: str = ""):
    status = "PASS" if condition else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"{status}  {name}{suffix}"
    record_acceptance(line)
    print(line)
    assert condition, f"{name}{suffix}"


class TestFormulaOracles:
    def test_decay_weights_closed_forms(self):
        cases = [
            (DecayConfig(0.0, 0.0), [1 / 3, 1 / 3, 1 / 3]),
            (DecayConfig(np.log(2), 0.0), [4 / 7, 2 / 7, 1 / 7]),
            (DecayConfig(0.0, np.log(2)), [1 / 7, 2 / 7, 4 / 7]),
        ]
        worst = max(
            np.abs(decay_weights(2, cfg) - np.array(want)).max() for cfg, want in cases
        )
        check("decay-weights closed forms (1e-12)", worst < 1e-12, f"max err {worst:.2e}")

    def test_decay_weights_properties_1000_random(self):
        rng = np.random.default_rng(0)
        worst_norm = 0.0
        symmetric = True
        for _ in range(1000):
            n = int(rng.integers(0, 60))
            a, b = rng.uniform(0.0, 5.0, size=2)
            w = decay_weights(n, DecayConfig(a, b))
            worst_norm = max(worst_norm, abs(w.sum() - 1.0))
            if not np.allclose(w, decay_weights(n, DecayConfig(b, a))[::-1], atol=1e-14):
                symmetric = False
        check(
            "decay-weights normalization + reversal symmetry (1000 draws)",
            worst_norm < 1e-12 and symmetric,
            f"max |sum-1| {worst_norm:.2e}",
        )

    def test_pca_basis_and_reconstruction(self):
        rng = np.random.default_rng(1)
        Y = rng.standard_normal((200, 24)) * rng.uniform(0.1, 3.0, size=24)
        model = fit_pca(Y)
        ortho = np.abs(model.basis.T @ model.basis - np.eye(24)).max()
        descending = bool((np.diff(model.eigenvalues) <= 1e-9).all())
        y = rng.standard_normal(24)
        recon_err = np.abs(reconstruct(model, project(model, y, 24)) - y).max()
        fixture = fit_pca(np.array([[0.0, 0.0], [2.0, 1.0], [4.0, 2.0]]))
        fixture_ok = (
            np.allclose(fixture.eigenvalues, [10.0, 0.0], atol=1e-10)
            and np.allclose(fixture.basis[:, 0], np.array([2.0, 1.0]) / np.sqrt(5), atol=1e-10)
        )
        check(
            "PCA orthonormal basis (1e-8), descending spectrum, reconstruction (1e-8), "
            "analytic fixture",
            ortho < 1e-8 and descending and recon_err < 1e-8 and fixture_ok,
            f"ortho {ortho:.2e}, recon {recon_err:.2e}",
        )

    def test_gradient_check_both_probe_kinds(self):
        rng = np.random.default_rng(2)
        worst = 0.0
        for instance in range(20):
            kind = ("linear", "nonlinear")[instance % 2]
            probe = init_probe(kind, 5, 3, seed=instance, d_hidden=6)
            Y = rng.standard_normal((6, 5))
            labels = rng.integers(0, 3, size=6)
            _, grads = gradients(probe, Y, labels)
            for name, P in probe.params().items():
                fd = np.zeros_like(P)
                it = np.nditer(P, flags=["multi_index"])
                for _ in it:
                    ix = it.multi_index
                    keep = P[ix]
                    P[ix] = keep + 1e-5
                    lp, _ = gradients(probe, Y, labels)
                    P[ix] = keep - 1e-5
                    lm, _ = gradients(probe, Y, labels)
                    P[ix] = keep
                    fd[ix] = (lp - lm) / 2e-5
                scale = max(np.abs(grads[name]).max(), np.abs(fd).max(), 1e-12)
                worst = max(worst, np.abs(grads[name] - fd).max() / scale)
        check(
            "analytic gradients vs central differences, 20 instances, both kinds (1e-4)",
            worst < 1e-4,
            f"max rel err {worst:.2e}",
        )

    def test_softmax_shift_invariance_and_stability(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(200):
            z = rng.standard_normal(8) * rng.uniform(0.1, 30)
            worst = max(worst, np.abs(softmax(z) - softmax(z + rng.uniform(-50, 50))).max())
        big = softmax(np.array([1000.0, 0.0]))
        stable = np.isfinite(big).all() and abs(big[0] - 1.0) < 1e-12
        check(
            "softmax shift invariance (1e-12) and stability at logit 1000",
            worst < 1e-12 and stable,
            f"max shift err {worst:.2e}",
        )

    def test_vq_equals_brute_force_on_1000_queries(self):
        rng = np.random.default_rng(4)
        codec = rvq_fit(rng.standard_normal((2000, 16)), levels=1, k=128, seed=0)
        queries = rng.standard_normal((1000, 16))
        got = vq_encode_batch(codec.vq, queries)
        brute = np.argmin(
            ((queries[:, None, :] - codec.vq.codewords[None, :, :]) ** 2).sum(-1), axis=1
        )
        check(
            "vq_encode equals exhaustive nearest neighbor on 1000 queries",
            bool(np.array_equal(got, brute)),
        )

    def test_rvq_residuals_non_increasing_10000_samples(self):
        rng = np.random.default_rng(5)
        codec = rvq_fit(rng.standard_normal((3000, 16)), levels=4, k=32, seed=0)
        samples = rng.standard_normal((10_000, 16))
        _, vectors = rvq_encode_batch(codec, samples)
        residual = samples.copy()
        ok = True
        prev = np.linalg.norm(residual, axis=1)
        for level in range(1, 5):
            residual -= vectors[:, level]
            cur = np.linalg.norm(residual, axis=1)
            ok = ok and bool((cur <= prev + 1e-9).all())
            prev = cur
        check("RVQ per-sample residual norms non-increasing (10000 samples)", ok)

    def test_stratified_split_proportions_and_determinism(self):
        rng = np.random.default_rng(6)
        pairs = [(f"u{i:04d}", int(rng.integers(0, 8))) for i in range(1057)]
        pairs += [(f"pad{c}{j}", c) for c in range(8) for j in range(3)]
        split_a = stratified_split(pairs, seed=11)
        split_b = stratified_split(pairs, seed=11)
        by_class: dict[int, list[str]] = {}
        for uid, label in pairs:
            by_class.setdefault(label, []).append(uid)
        within_one = True
        for label, members in by_class.items():
            n = len(members)
            for ids, ratio in ((split_a.train, 0.7), (split_a.dev, 0.15), (split_a.test, 0.15)):
                got = len([u for u in members if u in ids])
                within_one = within_one and abs(got - ratio * n) < 1.0
        deterministic = (split_a.train, split_a.dev, split_a.test) == (
            split_b.train, split_b.dev, split_b.test,
        )
        check(
            "stratified split within +-1 sample per class per split; deterministic per seed",
            within_one and deterministic,
        )

    def test_zero_r_baselines(self):
        balanced = [t for t in TUNES for _ in range(600)]
        eight = zero_r(balanced)
        five = zero_r([problem("5class").label_of(t) for t in balanced])
        check(
            "ZeroR: balanced 8class 0.125, 5class mapping 0.25",
            eight == pytest.approx(0.125) and five == pytest.approx(0.25),
            f"got {eight}, {five}",
        )


def run_pipeline(base: str) -> float:
    """Full pipeline at seed 0 through the CLI; returns wall seconds."""
    t0 = time.time()

    def run(*args):
        rc = cli.main(list(args))
        assert rc == 0, f"stage failed: {args}"

    corpus = os.path.join(base, "corpus")
    run("synth", "--out", corpus, "--seed", "0")
    manifest = os.path.join(corpus, "corpus.jsonl")
    run("quantize", manifest, "--seed", "0")
    qmanifest = os.path.join(corpus, "corpus.quantized.jsonl")
    for p in PROBLEMS:
        run("split", qmanifest, "--problem", p, "--seed", "0",
            "--out", os.path.join(base, "splits", f"{p}.jsonl"))
    for p in PROBLEMS:
        for s in STREAMS:
            run_dir = os.path.join(base, "runs", f"{p}__{s}")
            run("train", "--manifest", qmanifest, "--problem", p, "--kind", "linear",
                "--stream", s, "--split", os.path.join(base, "splits", f"{p}.jsonl"),
                "--seed", "0", "--out", run_dir)
            run("evaluate", "--manifest", qmanifest, "--problem", p, "--stream", s,
                "--split", os.path.join(base, "splits", f"{p}.jsonl"),
                "--run", run_dir,
                "--out", os.path.join(base, "reports", f"{p}__{s}__linear.json"))
    run("report", "--reports", os.path.join(base, "reports"),
        "--out", os.path.join(base, "results"))
    return time.time() - t0


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    base1 = str(tmp_path_factory.mktemp("e2e_run1"))
    base2 = str(tmp_path_factory.mktemp("e2e_run2"))
    seconds = run_pipeline(base1)
    run_pipeline(base2)
    acc = {}
    with open(os.path.join(base1, "results", "results.csv")) as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        acc[(row["problem"], row["stream"])] = float(row["mean_test_acc"])
    return {"base1": base1, "base2": base2, "rows": rows, "acc": acc,
            "seconds": seconds}


class TestEndToEnd:
    def test_runtime_budget(self, e2e):
        check(
            "end-to-end run completes in under 10 minutes single-threaded",
            e2e["seconds"] < 600,
            f"{e2e['seconds']:.0f}s",
        )

    def test_unquantized_probe_accuracies(self, e2e):
        acc = e2e["acc"]
        hhh = acc[("hhh-vs-lll", "unquantized")]
        xll = acc[("xll-vs-xhh", "unquantized")]
        eight = acc[("8class", "unquantized")]
        check("linear probe hhh-vs-lll test accuracy >= 0.95", hhh >= 0.95, f"{hhh:.4f}")
        check("linear probe xll-vs-xhh test accuracy >= 0.85", xll >= 0.85, f"{xll:.4f}")
        check("linear probe 8class >= 2x ZeroR (0.25)", eight >= 0.25, f"{eight:.4f}")

    def test_ordering_properties(self, e2e):
        acc = e2e["acc"]
        five, eight = acc[("5class", "unquantized")], acc[("8class", "unquantized")]
        xll, hxx = acc[("xll-vs-xhh", "unquantized")], acc[("hxx-vs-lxx", "unquantized")]
        check(
            "mean 5class accuracy >= mean 8class accuracy",
            five >= eight, f"{five:.4f} vs {eight:.4f}",
        )
        check(
            "edge-tone problem (xll-vs-xhh) >= pitch-accent problem (hxx-vs-lxx)",
            xll >= hxx, f"{xll:.4f} vs {hxx:.4f}",
        )

    def test_quantized_stream_probing(self, e2e):
        acc = e2e["acc"]
        unq = acc[("hhh-vs-lll", "unquantized")]
        cb1 = acc[("hhh-vs-lll", "codebook1")]
        check(
            "codebook-1 probe reaches 0.8x the unquantized hhh-vs-lll accuracy",
            cb1 >= 0.8 * unq, f"{cb1:.4f} vs threshold {0.8 * unq:.4f}",
        )
        zr = 0.5
        above = {j: acc[("hhh-vs-lll", f"codebook{j}")] for j in range(3)}
        check(
            "probing beats ZeroR on codebooks 0-2",
            all(a > zr for a in above.values()),
            ", ".join(f"cb{j}={a:.4f}" for j, a in above.items()),
        )

    def test_confusion_matrix_consistency(self, e2e):
        worst_row = 0.0
        worst_diag = 0.0
        for p in PROBLEMS:
            report = load_report(
                os.path.join(e2e["base1"], "reports", f"{p}__unquantized__linear.json")
            )
            sums = report.confusion_pct.sum(axis=1)
            worst_row = max(worst_row, np.abs(sums - 100.0).max())
            counts = report.confusion_counts
            acc_from_counts = np.trace(counts) / counts.sum()
            worst_diag = max(
                worst_diag, abs(acc_from_counts - report.mean_test_accuracy)
            )
        check(
            "confusion rows sum to 100 +- 0.01",
            worst_row <= 0.01, f"max dev {worst_row:.2e}",
        )
        check(
            "confusion-weighted diagonal reproduces accuracy within 1e-9",
            worst_diag < 1e-9, f"max dev {worst_diag:.2e}",
        )

    def test_results_grid_cardinality(self, e2e):
        three_seeds = all(row["seed_count"] == "3" for row in e2e["rows"])
        check(
            "results table covers the 5 problem x 9 stream linear grid "
            "(45 rows, 3 probes each)",
            len(e2e["rows"]) == 45 and three_seeds,
            f"{len(e2e['rows'])} rows",
        )

    def test_bitwise_determinism(self, e2e):
        identical = filecmp.cmp(
            os.path.join(e2e["base1"], "results", "results.csv"),
            os.path.join(e2e["base2"], "results", "results.csv"),
            shallow=False,
        )
        check("two identically seeded runs emit identical results.csv", identical)
