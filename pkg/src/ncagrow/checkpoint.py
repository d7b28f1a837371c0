"""Versioned .nca.json checkpoints: a human-inspectable JSON container with
bit-exact weights (base64 little-endian f32) and a CRC-32 integrity check.
The same file is consumed by the browser viewer."""
from __future__ import annotations

import base64
import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams
from .state import STATE_CHANNELS, GridConfig

FORMAT_VERSION = 1
FILE_EXTENSION = ".nca.json"


class CheckpointError(ValueError):
    pass


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    grid: GridConfig
    params: ModelParams
    metadata: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.params.perception_size != 3 * self.grid.channels:
            raise CheckpointShapeError(
                f"params expect {self.params.channels} channels, grid has {self.grid.channels}"
            )

    @property
    def hidden_size(self) -> int:
        return self.params.hidden_size


def _weight_bytes(params: ModelParams) -> list[bytes]:
    return [np.ascontiguousarray(a, dtype="<f4").tobytes()
            for a in (params.w1, params.b1, params.w2, params.b2)]


def checksum_of(params: ModelParams) -> int:
    return zlib.crc32(b"".join(_weight_bytes(params))) & 0xFFFFFFFF


def to_json_obj(ckpt: Checkpoint) -> dict:
    w1b, b1b, w2b, b2b = _weight_bytes(ckpt.params)
    return {
        "version": ckpt.version,
        "grid": {
            "height": ckpt.grid.height,
            "width": ckpt.grid.width,
            "channels": ckpt.grid.channels,
            "env_enabled": ckpt.grid.env_enabled,
            "genome_len": ckpt.grid.genome_len,
            "alive_threshold": ckpt.grid.alive_threshold,
        },
        "hidden_size": ckpt.hidden_size,
        "weights": {
            "w1": base64.b64encode(w1b).decode("ascii"),
            "b1": base64.b64encode(b1b).decode("ascii"),
            "w2": base64.b64encode(w2b).decode("ascii"),
            "b2": base64.b64encode(b2b).decode("ascii"),
        },
        "checksum": checksum_of(ckpt.params),
        "metadata": ckpt.metadata,
    }


def save(ckpt: Checkpoint, path) -> None:
    text = json.dumps(to_json_obj(ckpt), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _decode_array(b64: str, shape: tuple[int, ...], name: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception as exc:
        raise CheckpointFormatError(f"weight {name} is not valid base64: {exc}") from exc
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise CheckpointShapeError(
            f"weight {name}: got {len(raw)} bytes, expected {expected} for shape {shape}"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)


def load(path) -> Checkpoint:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"cannot read checkpoint {path}: {exc}") from exc

    for key in ("version", "grid", "hidden_size", "weights", "checksum"):
        if key not in obj:
            raise CheckpointFormatError(f"checkpoint missing field {key!r}")
    if obj["version"] != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint version {obj['version']} (expected {FORMAT_VERSION})"
        )

    g = obj["grid"]
    try:
        grid = GridConfig(height=g["height"], width=g["width"],
                          env_enabled=g["env_enabled"], genome_len=g["genome_len"],
                          alive_threshold=g["alive_threshold"])
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"bad grid config: {exc}") from exc
    if grid.channels != g["channels"]:
        raise CheckpointShapeError(
            f"grid channels field {g['channels']} inconsistent with env_enabled={g['env_enabled']}"
        )

    hidden = int(obj["hidden_size"])
    perception = 3 * grid.channels
    w = obj["weights"]
    for key in ("w1", "b1", "w2", "b2"):
        if key not in w:
            raise CheckpointFormatError(f"checkpoint missing weight {key!r}")
    params = ModelParams(
        w1=_decode_array(w["w1"], (perception, hidden), "w1"),
        b1=_decode_array(w["b1"], (hidden,), "b1"),
        w2=_decode_array(w["w2"], (hidden, STATE_CHANNELS), "w2"),
        b2=_decode_array(w["b2"], (STATE_CHANNELS,), "b2"),
    )
    actual = checksum_of(params)
    if actual != obj["checksum"]:
        raise CheckpointChecksumError(
            f"weight checksum mismatch: file says {obj['checksum']}, computed {actual}"
        )
    return Checkpoint(grid=grid, params=params, metadata=obj.get("metadata", {}),
                      version=obj["version"])
