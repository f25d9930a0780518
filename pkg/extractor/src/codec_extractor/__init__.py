"""Adapter from labeled audio + TextGrid alignments to the tune-probe
corpus layout: one manifest plus per-utterance latent streams (512-d
unquantized at 12.5 Hz, eight 256-d codeword streams).

This package talks to the probing toolkit only through its public
surfaces: the LTNT binary matrix layout, the JSON-lines manifest, and
the ``tune-probe`` command line.
"""

__version__ = "0.1.0"
