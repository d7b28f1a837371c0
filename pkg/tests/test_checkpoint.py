"""Checkpoint format: round trips, corruption handling, schema errors."""
import base64
import json
import zlib

import numpy as np
import pytest

from ncagrow.checkpoint import (
    Checkpoint,
    CheckpointChecksumError,
    CheckpointFormatError,
    CheckpointShapeError,
    CheckpointVersionError,
    checksum_of,
    load,
    save,
)
from ncagrow.model import init_params
from ncagrow.state import GridConfig


def make_checkpoint(env=True, genome=2, hidden=8, seed=0):
    grid = GridConfig(10, 12, env_enabled=env, genome_len=genome)
    rng = np.random.default_rng(seed)
    params = init_params(grid.channels, hidden, rng)
    params.w2[:] = rng.normal(size=params.w2.shape).astype(np.float32)
    return Checkpoint(grid=grid, params=params,
                      metadata={"regime": "growing", "iterations": 5, "seed": seed})


def test_roundtrip_preserves_everything(tmp_path):
    ck = make_checkpoint()
    path = tmp_path / "model.nca.json"
    save(ck, path)
    back = load(path)
    assert back.grid == ck.grid
    assert back.version == ck.version
    assert back.metadata["regime"] == "growing"
    for a, b in zip((ck.params.w1, ck.params.b1, ck.params.w2, ck.params.b2),
                    (back.params.w1, back.params.b1, back.params.w2, back.params.b2)):
        assert np.array_equal(a, b)
        assert b.dtype == np.float32


def test_save_load_save_is_byte_identical(tmp_path):
    ck = make_checkpoint()
    p1, p2 = tmp_path / "a.nca.json", tmp_path / "b.nca.json"
    save(ck, p1)
    save(load(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checksum_is_crc32_of_concatenated_weights():
    ck = make_checkpoint()
    p = ck.params
    raw = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes()
                   for a in (p.w1, p.b1, p.w2, p.b2))
    assert checksum_of(p) == zlib.crc32(raw) & 0xFFFFFFFF


def test_seventeen_channel_checkpoint_loads_env_enabled(tmp_path):
    ck = make_checkpoint(env=True)
    path = tmp_path / "env.nca.json"
    save(ck, path)
    doc = json.loads(path.read_text())
    assert doc["grid"]["channels"] == 17
    back = load(path)
    assert back.grid.env_enabled
    assert back.params.perception_size == 51


def test_corrupt_base64_character_reports_checksum_error(tmp_path):
    ck = make_checkpoint()
    path = tmp_path / "model.nca.json"
    save(ck, path)
    doc = json.loads(path.read_text())
    blob = doc["weights"]["w1"]
    # swap one character for a different alphabet character mid-payload
    i = len(blob) // 2
    repl = "A" if blob[i] != "A" else "B"
    doc["weights"]["w1"] = blob[:i] + repl + blob[i + 1:]
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointChecksumError):
        load(path)


def test_version_mismatch(tmp_path):
    ck = make_checkpoint()
    path = tmp_path / "model.nca.json"
    save(ck, path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointVersionError):
        load(path)


def test_missing_field_is_a_format_error(tmp_path):
    ck = make_checkpoint()
    path = tmp_path / "model.nca.json"
    save(ck, path)
    doc = json.loads(path.read_text())
    del doc["weights"]["b2"]
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointFormatError):
        load(path)
    path.write_text("this is not json{")
    with pytest.raises(CheckpointFormatError):
        load(path)


def test_wrong_payload_length_is_a_shape_error(tmp_path):
    ck = make_checkpoint()
    path = tmp_path / "model.nca.json"
    save(ck, path)
    doc = json.loads(path.read_text())
    raw = base64.b64decode(doc["weights"]["b1"])
    doc["weights"]["b1"] = base64.b64encode(raw[:-4]).decode("ascii")  # one float short
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointShapeError):
        load(path)


def test_inconsistent_grid_channels_is_a_shape_error(tmp_path):
    ck = make_checkpoint(env=True)
    path = tmp_path / "model.nca.json"
    save(ck, path)
    doc = json.loads(path.read_text())
    doc["grid"]["channels"] = 16  # disagrees with env_enabled and the weights
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointShapeError):
        load(path)


def test_constructor_rejects_mismatched_weights():
    grid = GridConfig(8, 8, env_enabled=False, genome_len=0)  # 16 channels
    params = init_params(17 * 1, 4, np.random.default_rng(0))  # wants 17
    with pytest.raises(ValueError):
        Checkpoint(grid=grid, params=params, metadata={})


def test_error_classes_are_distinct_value_errors():
    from ncagrow.checkpoint import CheckpointError

    classes = (CheckpointFormatError, CheckpointVersionError,
               CheckpointChecksumError, CheckpointShapeError)
    for cls in classes:
        assert issubclass(cls, CheckpointError)
        assert issubclass(cls, ValueError)
    assert len({id(c) for c in classes}) == 4
