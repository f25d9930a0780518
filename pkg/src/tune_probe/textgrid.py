"""Praat TextGrid parsing, serialization, and final-word lookup.

Reads the long ("ooTextFile") format that forced aligners emit, and also
accepts the short variant where values appear as bare lines without
``key =`` prefixes. Strings follow Praat quoting: a literal double quote
inside a label is doubled (``""``), and a label may span lines. Point
tiers are parsed and dropped; analysis downstream only ever consumes
interval tiers.

All times are kept as the parsed double-precision values; nothing is
rounded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

DEFAULT_SILENCE_LABELS = frozenset({"", "sp", "sil", "<eps>"})

DEFAULT_WORD_TIER = "words"

# Tolerance for containment/overlap checks; aligner output tiles exactly,
# this only absorbs decimal-to-binary conversion dust.
_TIME_EPS = 1e-9

_STRUCTURAL_RE = re.compile(r"^\s*(item|intervals|points)\s*\[\s*\d*\s*\]\s*:?\s*$")


class TextGridParseError(ValueError):
    """Malformed TextGrid input. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class WordInterval:
    """A word and the time span it occupies."""

    word: str
    tmin: float
    tmax: float


@dataclass
class IntervalTier:
    """Named tier of (tmin, tmax, label) intervals, sorted by tmin."""

    name: str
    intervals: list[tuple[float, float, str]] = field(default_factory=list)


@dataclass
class TextGridDoc:
    xmin: float
    xmax: float
    tiers: list[IntervalTier] = field(default_factory=list)

    def tier(self, name: str) -> IntervalTier:
        for t in self.tiers:
            if t.name == name:
                return t
        available = ", ".join(repr(t.name) for t in self.tiers) or "none"
        raise ValueError(f"no tier named {name!r} (available: {available})")

    def tier_names(self) -> list[str]:
        return [t.name for t in self.tiers]


class _Scanner:
    """Cursor over the lines of a TextGrid, long or short form."""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0  # index of the next unread line

    def _next_line(self, context: str) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            self.pos += 1
            if not line.strip():
                continue
            if _STRUCTURAL_RE.match(line):
                continue
            return line
        raise TextGridParseError(
            f"unexpected end of file while reading {context}", len(self.lines)
        )

    def at_end(self) -> bool:
        for line in self.lines[self.pos :]:
            if line.strip() and not _STRUCTURAL_RE.match(line):
                return False
        return True

    def next_number(self, context: str) -> float:
        line = self._next_line(context)
        lineno = self.pos
        value = line.split("=", 1)[1] if "=" in line else line
        value = value.strip()
        try:
            return float(value)
        except ValueError:
            raise TextGridParseError(
                f"expected a number for {context}, got {value!r}", lineno
            ) from None

    def next_count(self, context: str) -> int:
        value = self.next_number(context)
        if value != int(value) or value < 0:
            raise TextGridParseError(
                f"expected a nonnegative integer for {context}, got {value}", self.pos
            )
        return int(value)

    def next_string(self, context: str) -> str:
        line = self._next_line(context)
        lineno = self.pos
        start = line.find('"')
        if start < 0:
            raise TextGridParseError(
                f"expected a quoted string for {context}", lineno
            )
        parts: list[str] = []
        rest = line[start + 1 :]
        while True:
            i = 0
            while i < len(rest):
                if rest[i] == '"':
                    if i + 1 < len(rest) and rest[i + 1] == '"':
                        parts.append('"')
                        i += 2
                        continue
                    return "".join(parts)
                parts.append(rest[i])
                i += 1
            # String continues on the next raw line (verbatim, blanks kept).
            if self.pos >= len(self.lines):
                raise TextGridParseError(
                    f"unterminated string for {context}", lineno
                )
            parts.append("\n")
            rest = self.lines[self.pos]
            self.pos += 1

    def next_flag(self, context: str) -> str:
        return self._next_line(context).strip()


def parse_textgrid(text: str) -> TextGridDoc:
    """Parse TextGrid text into a document model.

    Raises TextGridParseError (with a 1-based line number where one can be
    pinned down) on malformed headers, non-numeric times, unterminated
    strings, or declared-size mismatches.
    """
    sc = _Scanner(text)
    file_type = sc.next_string("file type header")
    if file_type != "ooTextFile":
        raise TextGridParseError(
            f'malformed header: file type {file_type!r}, expected "ooTextFile"', sc.pos
        )
    object_class = sc.next_string("object class header")
    if object_class != "TextGrid":
        raise TextGridParseError(
            f'malformed header: object class {object_class!r}, expected "TextGrid"',
            sc.pos,
        )
    xmin = sc.next_number("document xmin")
    xmax = sc.next_number("document xmax")
    flag = sc.next_flag("tiers flag")
    if "exists" not in flag:
        doc = TextGridDoc(xmin, xmax, [])
        _validate_doc(doc)
        return doc
    declared_tiers = sc.next_count("tier count")
    tiers: list[IntervalTier] = []
    for t in range(1, declared_tiers + 1):
        tier_class = sc.next_string(f"class of tier {t}")
        if tier_class == "IntervalTier":
            tiers.append(_parse_interval_tier(sc, t))
        elif tier_class in ("TextTier", "PointTier"):
            _skip_point_tier(sc, t)
        else:
            raise TextGridParseError(
                f"unknown tier class {tier_class!r} for tier {t}", sc.pos
            )
    if not sc.at_end():
        raise TextGridParseError(
            f"content after the declared {declared_tiers} tier(s); "
            "tier count mismatch",
            sc.pos + 1,
        )
    doc = TextGridDoc(xmin, xmax, tiers)
    _validate_doc(doc)
    return doc


def _parse_interval_tier(sc: _Scanner, index: int) -> IntervalTier:
    name = sc.next_string(f"name of tier {index}")
    sc.next_number(f"xmin of tier {name!r}")
    sc.next_number(f"xmax of tier {name!r}")
    size = sc.next_count(f"interval count of tier {name!r}")
    intervals = []
    for j in range(1, size + 1):
        where = f"interval {j} of tier {name!r}"
        tmin = sc.next_number(f"xmin of {where}")
        tmax = sc.next_number(f"xmax of {where}")
        label = sc.next_string(f"text of {where}")
        intervals.append((tmin, tmax, label))
    return IntervalTier(name, intervals)


def _skip_point_tier(sc: _Scanner, index: int) -> None:
    name = sc.next_string(f"name of point tier {index}")
    sc.next_number(f"xmin of point tier {name!r}")
    sc.next_number(f"xmax of point tier {name!r}")
    size = sc.next_count(f"point count of tier {name!r}")
    for j in range(1, size + 1):
        sc.next_number(f"time of point {j} of tier {name!r}")
        sc.next_string(f"mark of point {j} of tier {name!r}")


def _validate_doc(doc: TextGridDoc) -> None:
    if not doc.xmin <= doc.xmax:
        raise TextGridParseError(
            f"document xmin {doc.xmin} exceeds xmax {doc.xmax}"
        )
    for tier in doc.tiers:
        prev_tmax = None
        for tmin, tmax, label in tier.intervals:
            if label != "" and not tmin < tmax:
                raise TextGridParseError(
                    f"tier {tier.name!r}: labelled interval [{tmin}, {tmax}] "
                    "has nonpositive duration"
                )
            if tmin > tmax:
                raise TextGridParseError(
                    f"tier {tier.name!r}: interval [{tmin}, {tmax}] is reversed"
                )
            if tmin < doc.xmin - _TIME_EPS or tmax > doc.xmax + _TIME_EPS:
                raise TextGridParseError(
                    f"tier {tier.name!r}: interval [{tmin}, {tmax}] lies outside "
                    f"the document range [{doc.xmin}, {doc.xmax}]"
                )
            if prev_tmax is not None and tmin < prev_tmax - _TIME_EPS:
                raise TextGridParseError(
                    f"tier {tier.name!r}: intervals overlap or are out of order "
                    f"near t={tmin}"
                )
            prev_tmax = tmax


def _quote(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def serialize_textgrid(doc: TextGridDoc) -> str:
    """Render the document in long form. Times use shortest exact repr,
    so serialize -> parse is value-preserving and a second pass is a
    fixpoint."""
    out = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        f"xmin = {doc.xmin!r}",
        f"xmax = {doc.xmax!r}",
        "tiers? <exists>",
        f"size = {len(doc.tiers)}",
        "item []:",
    ]
    for t, tier in enumerate(doc.tiers, 1):
        tier_xmin = tier.intervals[0][0] if tier.intervals else doc.xmin
        tier_xmax = tier.intervals[-1][1] if tier.intervals else doc.xmax
        out += [
            f"    item [{t}]:",
            '        class = "IntervalTier"',
            f"        name = {_quote(tier.name)}",
            f"        xmin = {tier_xmin!r}",
            f"        xmax = {tier_xmax!r}",
            f"        intervals: size = {len(tier.intervals)}",
        ]
        for j, (tmin, tmax, label) in enumerate(tier.intervals, 1):
            out += [
                f"        intervals [{j}]:",
                f"            xmin = {tmin!r}",
                f"            xmax = {tmax!r}",
                f"            text = {_quote(label)}",
            ]
    return "\n".join(out) + "\n"


def final_word_interval(
    doc: TextGridDoc,
    tier_name: str = DEFAULT_WORD_TIER,
    silence_labels: frozenset[str] | set[str] = DEFAULT_SILENCE_LABELS,
) -> WordInterval:
    """Locate the last real word on a tier, skipping trailing silences.

    A label counts as silence when, after stripping surrounding
    whitespace, it is in ``silence_labels``.
    """
    tier = doc.tier(tier_name)
    for tmin, tmax, label in reversed(tier.intervals):
        word = label.strip()
        if word not in silence_labels:
            return WordInterval(word, tmin, tmax)
    raise ValueError(
        f"no word interval on tier {tier_name!r}: all labels are silence"
    )
