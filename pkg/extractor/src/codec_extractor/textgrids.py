"""Final-word lookup via the ``tune-probe inspect-textgrid`` command.

The alignment logic lives in the probing toolkit; this adapter shells
out to its CLI and reads the JSON result, so the two packages only share
the command-line contract.
"""

from __future__ import annotations

import json
import shutil
import subprocess


class TextGridLookupError(RuntimeError):
    pass


def final_word_interval(textgrid_path: str, tier: str = "words") -> tuple[float, float]:
    exe = shutil.which("tune-probe")
    if exe is None:
        raise TextGridLookupError("tune-probe is not on PATH; install the probing toolkit")
    proc = subprocess.run(
        [exe, "inspect-textgrid", textgrid_path, "--tier", tier],
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise TextGridLookupError(
            f"inspect-textgrid failed for {textgrid_path}: {proc.stderr.strip()}"
        )
    info = json.loads(proc.stdout)
    word = info["final_word"]
    return float(word["tmin"]), float(word["tmax"])
