"""TextGrid parsing and nuclear-word lookup.

Parses an in-memory alignment, finds the final non-silence word, and
maps its time span onto 12.5 Hz frame indices with the frame-center
rule used throughout the pipeline.

Run:  python demos/05_textgrid_alignment.py
"""

import numpy as np

from tune_probe.features import frames_for_interval
from tune_probe.latent_store import LatentSequence
from tune_probe.textgrid import final_word_interval, parse_textgrid

GRID = '''File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 2.4
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 2.4
        intervals: size = 5
        intervals [1]:
            xmin = 0
            xmax = 0.35
            text = "she"
        intervals [2]:
            xmin = 0.35
            xmax = 0.9
            text = "remained"
        intervals [3]:
            xmin = 0.9
            xmax = 1.1
            text = "with"
        intervals [4]:
            xmin = 1.1
            xmax = 2.05
            text = "Madelyn"
        intervals [5]:
            xmin = 2.05
            xmax = 2.4
            text = ""
'''

doc = parse_textgrid(GRID)
print("tiers:", doc.tier_names())
word = final_word_interval(doc, "words")
print(f"nuclear word: {word.word!r} spanning [{word.tmin}, {word.tmax}] s")

# a fake latent sequence covering the utterance at 12.5 Hz
n_frames = int(np.ceil(doc.xmax * 12.5))
seq = LatentSequence(np.zeros((n_frames, 4), dtype=np.float32), frame_rate=12.5)
frames = frames_for_interval(seq, word)
print(f"frame centers land in the word for indices {list(frames)}")
print(f"that is {len(frames)} frames of {n_frames} total")
