import csv
import os
import wave

import numpy as np
import pytest

TUNES = ("lll", "llh", "lhl", "lhh", "hll", "hlh", "hhl", "hhh")


def write_wav(path, duration_s, sample_rate, f0=150.0, amplitude=0.4):
    """Mono 16-bit sine with a little vibrato so spectra are not flat."""
    t = np.arange(int(duration_s * sample_rate)) / sample_rate
    vibrato = 1.0 + 0.02 * np.sin(2 * np.pi * 3.0 * t)
    signal = amplitude * np.sin(2 * np.pi * f0 * vibrato * t)
    pcm = (signal * 32767).astype(np.int16)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())


def write_textgrid(path, xmax, words):
    lines = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0",
        f"xmax = {xmax}",
        "tiers? <exists>",
        "size = 1",
        "item []:",
        "    item [1]:",
        '        class = "IntervalTier"',
        '        name = "words"',
        "        xmin = 0",
        f"        xmax = {xmax}",
        f"        intervals: size = {len(words)}",
    ]
    for j, (tmin, tmax, label) in enumerate(words, 1):
        lines += [
            f"        intervals [{j}]:",
            f"            xmin = {tmin}",
            f"            xmax = {tmax}",
            f'            text = "{label}"',
        ]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="session")
def audio_fixture(tmp_path_factory):
    """12 labeled utterances with varied durations and sample rates."""
    root = tmp_path_factory.mktemp("audio_fixture")
    audio_dir = root / "audio"
    grid_dir = root / "grids"
    audio_dir.mkdir()
    grid_dir.mkdir()
    rows = []
    rng = np.random.default_rng(0)
    rates = (24000, 16000, 44100)
    for i in range(12):
        uid = f"utt{i:02d}"
        tune = TUNES[i % len(TUNES)]
        duration = float(rng.uniform(0.8, 2.0))
        rate = rates[i % len(rates)]
        write_wav(audio_dir / f"{uid}.wav", duration, rate, f0=120 + 15 * i)
        word_start = duration * 0.55
        write_textgrid(
            grid_dir / f"{uid}.TextGrid",
            duration,
            [
                (0.0, word_start, "lead"),
                (word_start, duration * 0.95, "Harmony"),
                (duration * 0.95, duration, ""),
            ],
        )
        rows.append(
            {"id": uid, "tune": tune, "speaker": f"spk{i % 3}",
             "sentence": "He modeled a melody"}
        )
    labels = root / "labels.csv"
    with open(labels, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "tune", "speaker", "sentence"])
        writer.writeheader()
        writer.writerows(rows)
    return {"audio": str(audio_dir), "grids": str(grid_dir), "labels": str(labels),
            "root": str(root)}
