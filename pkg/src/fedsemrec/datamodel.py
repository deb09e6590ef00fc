"""Item catalogs, interaction logs, dataset preparation, leave-one-out splits,
and the shared binary embedding file format."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ShapeError
from .numerics import REAL, Rng

STAGE_RAW = "raw"
STAGE_PERTURBED = "perturbed"
STAGE_ENCRYPTED = "encrypted"
STAGE_SYNCHRONIZED = "synchronized"
STAGES = (STAGE_RAW, STAGE_PERTURBED, STAGE_ENCRYPTED, STAGE_SYNCHRONIZED)

_SFUB_MAGIC = b"SFUB"
_SFUB_VERSION = 1


@dataclass(frozen=True)
class Item:
    item_id: str
    title: str
    description: str
    index: int


@dataclass(frozen=True)
class Catalog:
    """Items of one domain, with dense indices assigned in file order."""

    domain: str
    items: tuple[Item, ...]
    index_of: dict[str, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def from_items(cls, domain: str, items: list[Item]) -> "Catalog":
        return cls(domain, tuple(items), {it.item_id: it.index for it in items})


@dataclass(frozen=True)
class InteractionLog:
    """One user's chronologically ordered item indices within a domain."""

    user_id: str
    sequence: tuple[int, ...]
    domain: str


@dataclass(frozen=True)
class Split:
    user_id: str
    train: tuple[int, ...]
    valid: int
    test: int


@dataclass(frozen=True)
class SplitSet:
    domain: str
    splits: tuple[Split, ...]

    def __len__(self) -> int:
        return len(self.splits)


@dataclass
class EmbeddingMatrix:
    """One row per item index; stage advances raw -> perturbed -> encrypted
    -> synchronized and never backwards."""

    values: np.ndarray
    domain: str = ""
    stage: str = STAGE_RAW

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=REAL)
        if self.values.ndim != 2:
            raise ShapeError(f"embedding matrix must be 2-D, got {self.values.shape}")
        if self.stage not in STAGES:
            raise FormatError(f"unknown embedding stage {self.stage!r}")
        if self.values.size and not np.isfinite(self.values).all():
            raise DataError("embedding matrix contains non-finite values")

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def advanced(self, values: np.ndarray, stage: str) -> "EmbeddingMatrix":
        if STAGES.index(stage) != STAGES.index(self.stage) + 1:
            raise DataError(f"illegal stage transition {self.stage} -> {stage}")
        return EmbeddingMatrix(values, domain=self.domain, stage=stage)


# ---------------------------------------------------------------------------
# JSONL loading
# ---------------------------------------------------------------------------


def _read_jsonl(path) -> list[tuple[int, dict]]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected an object per line")
            records.append((lineno, obj))
    return records


def load_items(path, domain: str = "") -> Catalog:
    """Load an item catalog; indices follow file order."""
    items: list[Item] = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        try:
            item_id = obj["item_id"]
            title = obj.get("title", "")
            description = obj.get("description", "")
        except KeyError as exc:
            raise DataError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
        if not isinstance(item_id, str) or not item_id:
            raise DataError(f"{path}:{lineno}: item_id must be a non-empty string")
        if item_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate item_id {item_id!r}")
        seen.add(item_id)
        items.append(Item(item_id, str(title), str(description), len(items)))
    return Catalog.from_items(domain, items)


def load_interactions(path, catalog: Catalog) -> list[InteractionLog]:
    """Load user logs, resolving item ids against the catalog."""
    logs: list[InteractionLog] = []
    for lineno, obj in _read_jsonl(path):
        try:
            user_id = obj["user_id"]
            raw_items = obj["items"]
        except KeyError as exc:
            raise DataError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
        if not isinstance(raw_items, list):
            raise DataError(f"{path}:{lineno}: items must be a list")
        sequence = []
        for item_id in raw_items:
            idx = catalog.index_of.get(item_id)
            if idx is None:
                raise DataError(f"{path}:{lineno}: unknown item_id {item_id!r}")
            sequence.append(idx)
        logs.append(InteractionLog(str(user_id), tuple(sequence), catalog.domain))
    return logs


# ---------------------------------------------------------------------------
# dataset preparation
# ---------------------------------------------------------------------------


def prepare_dataset(logs, min_len: int, keep_last: int | None = None) -> list[InteractionLog]:
    """Drop sequences shorter than ``min_len``; keep the most recent
    ``keep_last`` interactions of the rest (order preserved)."""
    if min_len < 1:
        raise DataError(f"min_len must be >= 1, got {min_len}")
    if keep_last is not None and keep_last < 1:
        raise DataError(f"keep_last must be >= 1, got {keep_last}")
    out = []
    for log in logs:
        if len(log.sequence) < min_len:
            continue
        seq = log.sequence if keep_last is None else log.sequence[-keep_last:]
        out.append(InteractionLog(log.user_id, seq, log.domain))
    return out


def stratified_sample(logs, strata_bounds, per_stratum: int, rng: Rng) -> list[InteractionLog]:
    """Draw up to ``per_stratum`` users uniformly from each interaction-count
    stratum [b0,b1), [b1,b2), ..., [b_last, inf)."""
    bounds = list(strata_bounds)
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise DataError(f"strata bounds must be strictly increasing: {bounds}")
    if per_stratum < 0:
        raise DataError("per_stratum must be >= 0")
    edges = [(lo, hi) for lo, hi in zip(bounds, bounds[1:])] + [(bounds[-1], None)]
    chosen: list[InteractionLog] = []
    for lo, hi in edges:
        members = [
            log for log in logs if len(log.sequence) >= lo and (hi is None or len(log.sequence) < hi)
        ]
        if not members or per_stratum == 0:
            continue
        if len(members) <= per_stratum:
            chosen.extend(members)
        else:
            picks = rng.choice(len(members), size=per_stratum, replace=False)
            chosen.extend(members[i] for i in sorted(picks))
    return chosen


def leave_one_out(logs) -> SplitSet:
    """Last interaction -> test, second-to-last -> validation, rest -> train."""
    splits = []
    domain = logs[0].domain if logs else ""
    for log in logs:
        if len(log.sequence) < 3:
            raise DataError(
                f"user {log.user_id!r}: sequence of length {len(log.sequence)} cannot be split"
            )
        splits.append(Split(log.user_id, log.sequence[:-2], log.sequence[-2], log.sequence[-1]))
    return SplitSet(domain, tuple(splits))


# ---------------------------------------------------------------------------
# binary embedding file format
# ---------------------------------------------------------------------------


def write_embeddings(path, emb: EmbeddingMatrix) -> None:
    """Serialize as: magic 'SFUB', version u32, rows u32, dim u32, stage u8,
    then little-endian float32 row-major data."""
    payload = embeddings_to_bytes(emb)
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)


def embeddings_to_bytes(emb: EmbeddingMatrix) -> bytes:
    header = _SFUB_MAGIC + struct.pack(
        "<IIIB", _SFUB_VERSION, emb.count, emb.dim, STAGES.index(emb.stage)
    )
    body = np.ascontiguousarray(emb.values, dtype="<f4").tobytes()
    return header + body


def read_embeddings(path, domain: str = "") -> EmbeddingMatrix:
    return embeddings_from_bytes(Path(path).read_bytes(), domain=domain)


def embeddings_from_bytes(blob: bytes, domain: str = "") -> EmbeddingMatrix:
    header_len = 4 + struct.calcsize("<IIIB")
    if len(blob) < header_len:
        raise FormatError(f"embedding blob truncated: {len(blob)} bytes")
    if blob[:4] != _SFUB_MAGIC:
        raise FormatError(f"bad embedding magic {blob[:4]!r}")
    version, rows, dim, stage_tag = struct.unpack("<IIIB", blob[4:header_len])
    if version != _SFUB_VERSION:
        raise FormatError(f"unsupported embedding format version {version}")
    if stage_tag >= len(STAGES):
        raise FormatError(f"unknown stage tag {stage_tag}")
    expected = header_len + rows * dim * 4
    if len(blob) != expected:
        raise FormatError(f"embedding blob has {len(blob)} bytes, expected {expected}")
    values = np.frombuffer(blob, dtype="<f4", offset=header_len).reshape(rows, dim).copy()
    return EmbeddingMatrix(values, domain=domain, stage=STAGES[stage_tag])


# ---------------------------------------------------------------------------
# synthetic embeddings
# ---------------------------------------------------------------------------


def synth_embeddings(
    catalog,
    dim: int,
    norm_target: float,
    rng: Rng,
    clusters: int = 0,
    spread: float = 0.15,
    centers: np.ndarray | None = None,
) -> EmbeddingMatrix:
    """Gaussian rows rescaled to ``norm_target``, optionally planted around
    ``clusters`` shared centers (item i belongs to center i*clusters//n,
    contiguous blocks). Passing ``centers`` reuses cluster centers across
    domains."""
    if dim < 2:
        raise DataError(f"embedding dim must be >= 2, got {dim}")
    n = len(catalog)
    domain = getattr(catalog, "domain", "")
    if n == 0:
        return EmbeddingMatrix(np.zeros((0, dim), dtype=REAL), domain=domain)
    if centers is not None:
        clusters = centers.shape[0]
    if clusters > 0:
        if centers is None:
            centers = rng.normal((clusters, dim))
            centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        owner = (np.arange(n) * clusters) // n
        rows = centers[owner] + rng.normal((n, dim), std=spread)
    else:
        rows = rng.normal((n, dim))
    norms = np.linalg.norm(rows.astype(np.float64), axis=1, keepdims=True)
    rows = (rows * (norm_target / norms)).astype(REAL)
    return EmbeddingMatrix(rows, domain=domain, stage=STAGE_RAW)


def planted_cluster_of(n: int, clusters: int) -> np.ndarray:
    """Cluster ids the synthesizer planted for an n-item catalog."""
    return (np.arange(n) * clusters) // n
