"""Run configuration (strict JSON schema), the binary weight-file format, and
PGM feature-map dumps."""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detection import DataConfig, TrainConfig
from .fusion import FreDFTConfig

MAGIC = b"FREDFT01"


class ConfigError(ValueError):
    pass


class WeightFileError(ValueError):
    pass


@dataclass
class BenchConfig:
    sizes: tuple[int, ...] = (16, 32, 64, 128)
    channels: int = 32
    repeats: int = 5

    def __post_init__(self):
        if self.repeats < 5:
            raise ConfigError("bench repeats must be >= 5 (medians are taken)")


@dataclass
class RunConfig:
    model: FreDFTConfig = field(default_factory=FreDFTConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)


_SECTIONS = {
    "model": FreDFTConfig,
    "train": TrainConfig,
    "data": DataConfig,
    "bench": BenchConfig,
}

# JSON carries lists; these dataclass fields are tuples.
_TUPLE_FIELDS = {("data", "mix"), ("bench", "sizes")}


def _build_section(name: str, cls, payload: dict):
    if not isinstance(payload, dict):
        raise ConfigError(f"section {name!r} must be an object")
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - fields
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    kwargs = {}
    for key, value in payload.items():
        if (name, key) in _TUPLE_FIELDS:
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in section {name!r}: {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sections = {
        name: _build_section(name, cls, doc.get(name, {}))
        for name, cls in _SECTIONS.items()
    }
    return RunConfig(**sections)


def config_to_dict(cfg: RunConfig) -> dict:
    doc = {}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(cfg, name))
        for key, value in section.items():
            if isinstance(value, tuple):
                section[key] = list(value)
        doc[name] = section
    return doc


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Weight file: magic, then per entry (u32 name length, name utf-8, u32 rank,
# u64 dims..., float64 payload), all little-endian, and a trailing u64 byte-sum
# checksum over everything after the magic. A plain element count cannot
# detect payload corruption, so the checksum sums bytes mod 2^64: any
# single-byte corruption changes it.
# ---------------------------------------------------------------------------


def save_weights(path, entries: list[tuple[str, np.ndarray]]) -> None:
    body = bytearray()
    for name, arr in entries:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw_name = name.encode("utf-8")
        body += struct.pack("<I", len(raw_name))
        body += raw_name
        body += struct.pack("<I", arr.ndim)
        body += struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
        body += arr.tobytes()
    checksum = sum(body) & 0xFFFFFFFFFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes(body))
        fh.write(struct.pack("<Q", checksum))


def load_weights(path) -> list[tuple[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise WeightFileError(f"{path}: not a FREDFT01 weight file")
    body = blob[len(MAGIC) : -8]
    (stored,) = struct.unpack("<Q", blob[-8:])
    checksum = sum(body) & 0xFFFFFFFFFFFFFFFF
    if checksum != stored:
        raise WeightFileError(
            f"{path}: checksum mismatch (stored {stored}, computed {checksum})"
        )
    entries = []
    pos = 0
    while pos < len(body):
        (name_len,) = struct.unpack_from("<I", body, pos)
        pos += 4
        name = body[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<I", body, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}Q", body, pos) if rank else ()
        pos += 8 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=pos).reshape(dims)
        pos += 8 * count
        entries.append((name, arr.astype(np.float64)))
    return entries


def model_state(model) -> list[tuple[str, np.ndarray]]:
    return [(name, p.data) for name, p in model.named_parameters()]


def load_model_state(model, entries: list[tuple[str, np.ndarray]]) -> None:
    table = dict(entries)
    names = [name for name, _ in model.named_parameters()]
    missing = [n for n in names if n not in table]
    extra = [n for n in table if n not in set(names)]
    if missing or extra:
        raise WeightFileError(
            f"parameter mismatch: missing {missing[:3]}, unexpected {extra[:3]}"
        )
    for name, p in model.named_parameters():
        arr = table[name]
        if arr.shape != p.data.shape:
            raise WeightFileError(
                f"{name}: shape {arr.shape} does not match parameter {p.data.shape}"
            )
        p.data = arr.copy()


# ---------------------------------------------------------------------------
# PGM (binary P5) feature dumps
# ---------------------------------------------------------------------------


def to_pgm_bytes(feature_map: np.ndarray) -> bytes:
    """Min-max normalize a 2D map to [0, 255]; constant maps land on mid-gray."""
    if feature_map.ndim != 2:
        raise ValueError("PGM dump expects a 2D map")
    lo = float(feature_map.min())
    hi = float(feature_map.max())
    if hi - lo < 1e-12:
        pix = np.full(feature_map.shape, 128, dtype=np.uint8)
    else:
        pix = np.round((feature_map - lo) / (hi - lo) * 255.0).astype(np.uint8)
    h, w = feature_map.shape
    return f"P5\n{w} {h}\n255\n".encode() + pix.tobytes()


def write_pgm(path, feature_map: np.ndarray) -> None:
    Path(path).write_bytes(to_pgm_bytes(feature_map))
