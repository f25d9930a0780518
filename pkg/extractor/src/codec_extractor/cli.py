"""codec-extract: run a codec over labeled audio, emit a probe-ready corpus."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .extract import ExtractionJob, run_extraction


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="codec-extract", description=__doc__)
    parser.add_argument("--audio-dir", required=True)
    parser.add_argument("--textgrid-dir", required=True)
    parser.add_argument("--labels", required=True, help="CSV: id,tune,speaker,sentence")
    parser.add_argument("--out", required=True)
    parser.add_argument("--codec", default="spectral", choices=("spectral", "mimi"))
    parser.add_argument("--checkpoint", default=None, help="mimi checkpoint override")
    parser.add_argument("--tier", default="words")
    parser.add_argument("--origin", default="imitated",
                        choices=("resynthesized", "imitated", "synthetic"))
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        result = run_extraction(
            ExtractionJob(
                audio_dir=args.audio_dir,
                textgrid_dir=args.textgrid_dir,
                labels_path=args.labels,
                out_dir=args.out,
                codec=args.codec,
                checkpoint=args.checkpoint,
                tier=args.tier,
                origin=args.origin,
            )
        )
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    print(
        json.dumps(
            {
                "manifest": result.manifest_path,
                "extracted": len(result.extracted),
                "failed": result.failed,
            },
            sort_keys=True,
        )
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
