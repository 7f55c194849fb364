"""Fusing timestamped speech transcripts with on-screen (OCR) text.

The two streams are walked with two pointers in start-time order.  Audio
segments are always kept; an image segment is dropped when it is nearly the
same text as something already emitted within the lookback window.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from rumorlens.exceptions import InvalidTimedText, ParseError, UnsortedInput

DEFAULT_DEDUP_THRESHOLD = 0.8
DEFAULT_LOOKBACK_SECONDS = 30.0


class Origin(enum.Enum):
    AUDIO = "audio"
    IMAGE = "image"

    @classmethod
    def parse(cls, value) -> "Origin":
        if isinstance(value, Origin):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidTimedText(f"origin must be 'audio' or 'image', got {value!r}") from None


@dataclass(frozen=True)
class TimedText:
    text: str
    start: float
    end: float
    origin: Origin = Origin.AUDIO

    def __post_init__(self):
        object.__setattr__(self, "origin", Origin.parse(self.origin))
        start, end = float(self.start), float(self.end)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise InvalidTimedText("timestamps must be finite")
        if start < 0 or end < start:
            raise InvalidTimedText(f"bad time span [{start}, {end}]")
        if not self.text and self.origin is Origin.AUDIO:
            raise InvalidTimedText("audio segments must carry text")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    def to_dict(self) -> dict:
        return {"text": self.text, "start": self.start, "end": self.end, "origin": self.origin.value}


def levenshtein(a: str, b: str) -> int:
    """Edit distance over code points, two-row dynamic programme."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(
                prev[j] + 1,              # delete ca
                cur[j - 1] + 1,           # insert cb
                prev[j - 1] + (ca != cb), # substitute
            ))
        prev = cur
    return prev[-1]


def similarity(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def _check_sorted(stream: Sequence[TimedText], name: str):
    for i in range(1, len(stream)):
        if stream[i].start < stream[i - 1].start:
            raise UnsortedInput(
                f"{name} stream is not sorted by start time at position {i} "
                f"({stream[i].start} < {stream[i - 1].start})"
            )


def merge_streams(
    audio: Sequence[TimedText],
    image: Sequence[TimedText],
    dedup_threshold: float = DEFAULT_DEDUP_THRESHOLD,
    lookback: float = DEFAULT_LOOKBACK_SECONDS,
) -> list[TimedText]:
    """Two-pointer merge of the audio and image streams by start time.

    On equal start times the audio pointer advances first.  An image-origin
    candidate is dropped if its :func:`similarity` to any already-emitted
    segment starting at most ``lookback`` seconds earlier reaches
    ``dedup_threshold``.
    """
    if not 0.0 <= dedup_threshold <= 1.0:
        raise ValueError(f"dedup_threshold must lie in [0, 1], got {dedup_threshold}")
    audio, image = list(audio), list(image)
    _check_sorted(audio, "audio")
    _check_sorted(image, "image")

    merged: list[TimedText] = []
    i = j = 0
    while i < len(audio) or j < len(image):
        if j >= len(image) or (i < len(audio) and audio[i].start <= image[j].start):
            cand = audio[i]
            i += 1
        else:
            cand = image[j]
            j += 1
        if cand.origin is Origin.IMAGE and _is_repeat(cand, merged, dedup_threshold, lookback):
            continue
        merged.append(cand)
    return merged


def _is_repeat(cand: TimedText, merged: list[TimedText], threshold: float, lookback: float) -> bool:
    for prev in reversed(merged):
        if cand.start - prev.start > lookback:
            break
        if similarity(cand.text, prev.text) >= threshold:
            return True
    return False


def concat_text(merged: Iterable[TimedText]) -> str:
    return " ".join(seg.text for seg in merged)


def read_timed_text(path, default_origin=None) -> list[TimedText]:
    """Read a JSON Lines stream of ``{"text","start","end","origin"}`` objects."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                origin = obj.get("origin", default_origin)
                if origin is None:
                    raise KeyError("origin")
                out.append(TimedText(str(obj["text"]), obj["start"], obj["end"], origin))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad timed-text record: {exc}", line=lineno, path=path) from None
    return out
