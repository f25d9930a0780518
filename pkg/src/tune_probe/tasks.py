"""Tune-label classification problems, the ZeroR baseline, and splits.

A tune code is three letters: pitch accent, phrase accent, boundary
tone, each h or l. The five problems:

    8class      every tune is its own class
    5class      the five clusters that are robust in human production
                and perception: {lll}, {llh,lhl}, {lhh}, {hll,hlh},
                {hhh,hhl}
    hhh-vs-lll  the two extremes only; everything else excluded
    hxx-vs-lxx  split all eight by the initial tone (pitch accent)
    xll-vs-xhh  falling ({lll,hll}) vs rising ({lhh,hhh}) edge tones;
                tunes ending lh or hl are excluded
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .latent_store import TUNES


class _Excluded:
    __slots__ = ()

    def __repr__(self):
        return "EXCLUDED"


EXCLUDED = _Excluded()

PROBLEM_NAMES = ("8class", "5class", "hhh-vs-lll", "hxx-vs-lxx", "xll-vs-xhh")

SPLIT_NAMES = ("train", "dev", "test")


@dataclass(frozen=True)
class ClassificationProblem:
    name: str
    classes: tuple[str, ...]
    tune_to_class: dict[str, int | _Excluded]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def included_tunes(self) -> tuple[str, ...]:
        return tuple(t for t in TUNES if self.tune_to_class[t] is not EXCLUDED)

    def label_of(self, tune: str) -> int | _Excluded:
        return self.tune_to_class[tune]


def problem(name: str) -> ClassificationProblem:
    if name == "8class":
        return ClassificationProblem(
            name, TUNES, {t: i for i, t in enumerate(TUNES)}
        )
    if name == "5class":
        clusters = (("lll",), ("llh", "lhl"), ("lhh",), ("hll", "hlh"), ("hhh", "hhl"))
        mapping: dict[str, int | _Excluded] = {}
        for i, cluster in enumerate(clusters):
            for t in cluster:
                mapping[t] = i
        return ClassificationProblem(
            name, tuple("+".join(c) for c in clusters), mapping
        )
    if name == "hhh-vs-lll":
        mapping = {t: EXCLUDED for t in TUNES}
        mapping["hhh"] = 0
        mapping["lll"] = 1
        return ClassificationProblem(name, ("hhh", "lll"), mapping)
    if name == "hxx-vs-lxx":
        return ClassificationProblem(
            name, ("hxx", "lxx"), {t: 0 if t[0] == "h" else 1 for t in TUNES}
        )
    if name == "xll-vs-xhh":
        mapping = {}
        for t in TUNES:
            if t[1:] == "ll":
                mapping[t] = 0
            elif t[1:] == "hh":
                mapping[t] = 1
            else:
                mapping[t] = EXCLUDED
        return ClassificationProblem(name, ("xll", "xhh"), mapping)
    raise ValueError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}")


def zero_r(labels) -> float:
    """Majority-class rate: the accuracy of always answering the mode."""
    labels = list(labels)
    if not labels:
        raise ValueError("zero_r of an empty label list")
    counts = Counter(labels)
    return max(counts.values()) / len(labels)


@dataclass
class SplitAssignment:
    train: frozenset[str]
    dev: frozenset[str]
    test: frozenset[str]
    seed: int

    def split_of(self, uid: str) -> str:
        if uid in self.train:
            return "train"
        if uid in self.dev:
            return "dev"
        if uid in self.test:
            return "test"
        raise KeyError(uid)

    def ids(self, split: str) -> frozenset[str]:
        return {"train": self.train, "dev": self.dev, "test": self.test}[split]


def _largest_remainder(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    exact = [n * r for r in ratios]
    base = [int(np.floor(e)) for e in exact]
    leftover = n - sum(base)
    fractions = [e - b for e, b in zip(exact, base)]
    # Ties resolved in the order dev, train, test.
    priority = {1: 0, 0: 1, 2: 2}
    order = sorted(range(3), key=lambda i: (-fractions[i], priority[i]))
    for i in order[:leftover]:
        base[i] += 1
    return tuple(base)  # type: ignore[return-value]


def stratified_split(
    ids_with_labels,
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
) -> SplitAssignment:
    """Per-class shuffle then largest-remainder allocation to train/dev/test.

    Each class needs at least 3 members. Ids are sorted before shuffling,
    so the result depends only on (ids, labels, ratios, seed), not on
    input order.
    """
    if len(ratios) != 3 or not np.isclose(sum(ratios), 1.0):
        raise ValueError(f"ratios must be three values summing to 1, got {ratios}")
    by_class: dict = {}
    for uid, label in ids_with_labels:
        by_class.setdefault(label, []).append(uid)
    if not by_class:
        raise ValueError("no ids to split")
    rng = np.random.default_rng(seed)
    parts: dict[str, list[str]] = {"train": [], "dev": [], "test": []}
    for label in sorted(by_class, key=repr):
        ids = sorted(by_class[label])
        if len(ids) < 3:
            raise ValueError(
                f"class {label!r} has only {len(ids)} member(s); need at least 3"
            )
        ids = [ids[i] for i in rng.permutation(len(ids))]
        n_train, n_dev, n_test = _largest_remainder(len(ids), ratios)
        parts["train"] += ids[:n_train]
        parts["dev"] += ids[n_train : n_train + n_dev]
        parts["test"] += ids[n_train + n_dev :]
    return SplitAssignment(
        train=frozenset(parts["train"]),
        dev=frozenset(parts["dev"]),
        test=frozenset(parts["test"]),
        seed=seed,
    )


def save_split(
    assignment: SplitAssignment, path: str | os.PathLike, extra_metadata: dict | None = None
) -> None:
    """Line-delimited (id, split) records, sorted by id for stable bytes."""
    rows = [(uid, "train") for uid in assignment.train]
    rows += [(uid, "dev") for uid in assignment.dev]
    rows += [(uid, "test") for uid in assignment.test]
    rows.sort()
    metadata = {"seed": assignment.seed}
    metadata.update(extra_metadata or {})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"metadata": metadata}, sort_keys=True) + "\n")
        for uid, split in rows:
            fh.write(json.dumps({"id": uid, "split": split}, sort_keys=True) + "\n")


def load_split(path: str | os.PathLike) -> SplitAssignment:
    parts: dict[str, set[str]] = {"train": set(), "dev": set(), "test": set()}
    seed = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "metadata" in obj and "id" not in obj:
                seed = int(obj["metadata"].get("seed", 0))
                continue
            split = obj["split"]
            if split not in parts:
                raise ValueError(f"{path} line {lineno}: unknown split {split!r}")
            parts[split].add(obj["id"])
    return SplitAssignment(
        train=frozenset(parts["train"]),
        dev=frozenset(parts["dev"]),
        test=frozenset(parts["test"]),
        seed=seed,
    )
