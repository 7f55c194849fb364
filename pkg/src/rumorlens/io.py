"""Record streams, index persistence and pipeline configuration.

Index file layout (UTF-8 text, ``\\n`` line endings)::

    RUMORLENS-HNSW <format version>
    {header JSON: dim, params, rng state, entry point, count, sha256 of body}
    {node JSON}            one line per node, in insertion order
    ...

Node vectors are base64 little-endian float64 so they round-trip bit for bit;
all JSON is written with sorted keys and no whitespace, which makes
save -> load -> save byte-identical.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from rumorlens.contrastive import LossConfig
from rumorlens.core import EmbeddingRecord, Label, validate_record
from rumorlens.exceptions import (
    CorruptIndex,
    DuplicateId,
    ParseError,
    RumorLensError,
    VersionMismatch,
)
from rumorlens.hnsw import HnswIndex, HnswParams

FORMAT_VERSION = 1
MAGIC = "RUMORLENS-HNSW"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _with_line(exc: RumorLensError, lineno: int, path) -> RumorLensError:
    if isinstance(exc, ParseError):
        return ParseError(str(exc), line=lineno, path=path)
    new = type(exc)(f"{path}:{lineno}: {exc}")
    new.line = lineno
    new.path = path
    return new


def record_from_dict(obj: dict) -> EmbeddingRecord:
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object")
    missing = [k for k in ("id", "label", "vector") if k not in obj]
    if missing:
        raise ParseError(f"record is missing {', '.join(missing)}")
    vec = obj["vector"]
    if not isinstance(vec, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec):
        raise ParseError("vector must be a list of numbers")
    event = obj.get("event")
    source = obj.get("source")
    return EmbeddingRecord(
        str(obj["id"]), Label.coerce(obj["label"]), vec,
        None if event is None else str(event),
        None if source is None else str(source),
    )


def load_records(path, expected_dim: Optional[int] = None) -> list[EmbeddingRecord]:
    """Parse and validate a JSON Lines record file.

    ``expected_dim`` defaults to the length of the first vector.  Every error
    carries the 1-based line number in ``.line``.
    """
    records, seen = [], set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc.msg}") from None
                rec = record_from_dict(obj)
                if expected_dim is None:
                    expected_dim = rec.dim
                validate_record(rec, expected_dim)
                if rec.id in seen:
                    raise DuplicateId(f"duplicate id {rec.id!r}")
            except RumorLensError as exc:
                raise _with_line(exc, lineno, path) from None
            seen.add(rec.id)
            records.append(rec)
    return records


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_vector(path) -> np.ndarray:
    """A query vector stored as a JSON array or as ``{"vector": [...]}``."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path=path) from None
    if isinstance(obj, dict):
        obj = obj.get("vector")
    if not isinstance(obj, list) or not obj:
        raise ParseError("expected a non-empty JSON array of numbers", path=path)
    try:
        return np.asarray(obj, dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError("vector must contain only numbers", path=path) from None


# -- index persistence ---------------------------------------------------


def _encode_vector(v) -> str:
    return base64.b64encode(np.asarray(v, dtype="<f8").tobytes()).decode("ascii")


def _decode_vector(s: str, dim: int) -> np.ndarray:
    raw = base64.b64decode(s.encode("ascii"), validate=True)
    if len(raw) != 8 * dim:
        raise CorruptIndex("stored vector has the wrong length")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def dump_index(index: HnswIndex) -> bytes:
    ids = index._ids
    lines = []
    for n in range(len(index)):
        lines.append(_dumps({
            "id": ids[n],
            "label": int(index._labels[n]),
            "event": index._events[n],
            "source": index._sources[n],
            "level": index._levels[n],
            "vector": _encode_vector(index._vectors[n]),
            "links": [[ids[j] for j in layer] for layer in index._links[n]],
        }))
    body = "".join(line + "\n" for line in lines).encode("utf-8")
    header = {
        "format_version": FORMAT_VERSION,
        "dim": index.dim,
        "params": index.params.to_dict(),
        "rng_state": index.rng_state(),
        "entry_point": None if index.entry_point is None else ids[index.entry_point],
        "count": len(index),
        "sha256": hashlib.sha256(body).hexdigest(),
    }
    head = f"{MAGIC} {FORMAT_VERSION}\n{_dumps(header)}\n".encode("utf-8")
    return head + body


def save_index(index: HnswIndex, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_index(index))


def parse_index(data: bytes) -> HnswIndex:
    first, sep, rest = data.partition(b"\n")
    parts = first.decode("utf-8", errors="replace").split(" ")
    if not sep or len(parts) != 2 or parts[0] != MAGIC:
        raise CorruptIndex("not a rumorlens index file")
    try:
        version = int(parts[1])
    except ValueError:
        raise CorruptIndex("unreadable format version") from None
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"index format {version} is not supported (expected {FORMAT_VERSION})")
    head_line, sep, body = rest.partition(b"\n")
    try:
        header = json.loads(head_line)
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise CorruptIndex("index header is damaged") from None
    if not sep or hashlib.sha256(body).hexdigest() != header.get("sha256"):
        raise CorruptIndex("index checksum mismatch (file truncated or modified)")

    try:
        dim = int(header["dim"])
        params = HnswParams(**header["params"])
        nodes = [json.loads(line) for line in body.decode("utf-8").splitlines()]
        if len(nodes) != header["count"]:
            raise CorruptIndex("node count does not match header")
        node_of = {nd["id"]: i for i, nd in enumerate(nodes)}
        records, levels, links = [], [], []
        for nd in nodes:
            records.append(EmbeddingRecord(
                nd["id"], Label.coerce(nd["label"]), _decode_vector(nd["vector"], dim),
                nd["event"], nd["source"],
            ))
            levels.append(int(nd["level"]))
            links.append([[node_of[j] for j in layer] for layer in nd["links"]])
        ep = header["entry_point"]
        entry = None if ep is None else node_of[ep]
    except CorruptIndex:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptIndex(f"index body is inconsistent: {exc}") from None
    return HnswIndex._from_parts(dim, params, records, levels, links, entry, header.get("rng_state"))


def load_index(path) -> HnswIndex:
    with open(path, "rb") as fh:
        return parse_index(fh.read())


# -- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class DedupConfig:
    frame_window: int = 10
    textbox_window: int = 100
    hamming_threshold: int = 8
    text_similarity_threshold: float = 0.8


@dataclass(frozen=True)
class BudgetConfig:
    total: int = 512
    m: int = 25


@dataclass(frozen=True)
class PipelineConfig:
    dim: Optional[int] = None
    k: int = 10
    hnsw: HnswParams = field(default_factory=HnswParams)
    loss: LossConfig = field(default_factory=LossConfig)
    dedup: DedupConfig = field(default_factory=DedupConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ParseError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub = {"hnsw": HnswParams, "loss": LossConfig, "dedup": DedupConfig, "budget": BudgetConfig}
        kwargs = {}
        for key, value in obj.items():
            if key in sub:
                try:
                    kwargs[key] = sub[key](**value)
                except TypeError as exc:
                    raise ParseError(f"bad '{key}' config: {exc}") from None
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    def override(self, **changes) -> "PipelineConfig":
        """Apply non-None overrides; dotted names reach into sections (``hnsw.M``)."""
        top, nested = {}, {}
        for key, value in changes.items():
            if value is None:
                continue
            if "." in key:
                section, name = key.split(".", 1)
                nested.setdefault(section, {})[name] = value
            else:
                top[key] = value
        for section, vals in nested.items():
            current = getattr(self, section)
            if section == "hnsw" and "M" in vals:
                # derived fields follow M unless pinned explicitly
                vals.setdefault("M0", None)
                vals.setdefault("level_multiplier", None)
            top[section] = replace(current, **vals)
        return replace(self, **top)


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid config JSON: {exc.msg}", path=path) from None
    return PipelineConfig.from_dict(obj)
