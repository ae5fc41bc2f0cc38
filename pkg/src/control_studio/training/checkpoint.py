"""Checkpoint container: text header + named float32 parameter blobs.

Layout:
    pafckpt <version> <family> <config-fingerprint>\n
    <metadata JSON>\n
    blob <kind>/<name> <dims-csv> <byte-count>\n
    <raw little-endian float32 data>\n
    ... repeated per blob, sorted by name ...
    end\n

Blob kind is "p" for trainable parameters and "s" for persistent state
(batch-norm running statistics). Loading requires an exact config
fingerprint match; files are written atomically.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..models import ModelConfig, ProsodyModel, build_model
from ..models.config import mi_encoder_param_count, masked_encoder_param_count, parity_rnn_width

MAGIC = "pafckpt"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class TrainedBundle:
    """A model plus everything needed to use it: config, normalisation
    stats, and training metadata."""
    model: ProsodyModel
    config: ModelConfig
    stats: dict[int, dict]
    metadata: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()


def save_checkpoint(bundle: TrainedBundle, path: str | Path) -> None:
    path = Path(path)
    header = f"{MAGIC} {VERSION} {bundle.config.family} {bundle.fingerprint}\n"
    meta = {
        "config": bundle.config.to_dict(),
        "speaker_stats": {str(k): v for k, v in sorted(bundle.stats.items())},
        "train": bundle.metadata,
    }
    blobs: dict[str, np.ndarray] = {}
    for name, p in bundle.model.named_params().items():
        blobs[f"p/{name}"] = p.data
    for name, arr in bundle.model.state_blobs().items():
        blobs[f"s/{name}"] = arr

    chunks = [header.encode(), (json.dumps(meta, sort_keys=True) + "\n").encode()]
    for name in sorted(blobs):
        arr = blobs[name]
        raw = arr.astype("<f4").tobytes()
        dims = ",".join(str(d) for d in arr.shape)
        chunks.append(f"blob {name} {dims} {len(raw)}\n".encode())
        chunks.append(raw)
        chunks.append(b"\n")
    chunks.append(b"end\n")

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_line(buf: bytes, pos: int) -> tuple[str, int]:
    end = buf.find(b"\n", pos)
    if end < 0:
        raise CheckpointError("unexpected end of file while reading a header line")
    return buf[pos:end].decode(), end + 1


def read_checkpoint_blobs(path: str | Path) -> tuple[str, str, dict, dict[str, np.ndarray]]:
    """Parse a checkpoint file; returns (family, fingerprint, metadata, blobs)."""
    buf = Path(path).read_bytes()
    line, pos = _read_line(buf, 0)
    parts = line.split()
    if len(parts) != 4 or parts[0] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if int(parts[1]) != VERSION:
        raise CheckpointError(f"{path}: format version {parts[1]} != {VERSION}")
    family, fingerprint = parts[2], parts[3]
    meta_line, pos = _read_line(buf, pos)
    metadata = json.loads(meta_line)

    blobs: dict[str, np.ndarray] = {}
    while True:
        line, pos = _read_line(buf, pos)
        if line == "end":
            break
        fields = line.split()
        if len(fields) != 4 or fields[0] != "blob":
            raise CheckpointError(f"{path}: malformed blob header {line!r}")
        name, dims_csv, nbytes = fields[1], fields[2], int(fields[3])
        shape = tuple(int(d) for d in dims_csv.split(",") if d)
        expected = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        if nbytes != expected:
            raise CheckpointError(
                f"{path}: blob {name} declares {nbytes} bytes but shape {shape} needs {expected}")
        if pos + nbytes + 1 > len(buf):
            raise CheckpointError(f"{path}: truncated while reading blob {name}")
        raw = buf[pos:pos + nbytes]
        pos += nbytes
        if buf[pos:pos + 1] != b"\n":
            raise CheckpointError(f"{path}: blob {name} is not terminated")
        pos += 1
        blobs[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    return family, fingerprint, metadata, blobs


def load_checkpoint(path: str | Path, expect_family: str | None = None) -> TrainedBundle:
    family, fingerprint, metadata, blobs = read_checkpoint_blobs(path)
    if expect_family is not None and family != expect_family:
        raise CheckpointError(
            f"{path}: checkpoint family {family!r} cannot be loaded as {expect_family!r}")
    config = ModelConfig.from_dict(metadata["config"])
    if config.family != family:
        raise CheckpointError(
            f"{path}: header family {family!r} disagrees with config {config.family!r}")
    actual = config.fingerprint()
    if actual != fingerprint:
        raise CheckpointError(
            f"{path}: config fingerprint {actual} does not match header {fingerprint}")

    model = build_model(config, seed=metadata["train"].get("seed", 0))
    params = model.named_params()
    for name, p in params.items():
        key = f"p/{name}"
        if key not in blobs:
            raise CheckpointError(f"{path}: missing parameter blob {name}")
        if blobs[key].shape != p.data.shape:
            raise CheckpointError(
                f"{path}: blob {name} has shape {blobs[key].shape}, expected {p.data.shape}")
        p.value.data = blobs[key]
    state = {name[2:]: arr for name, arr in blobs.items() if name.startswith("s/")}
    if state:
        model.load_state(state)
    stats = {int(k): v for k, v in metadata["speaker_stats"].items()}
    return TrainedBundle(model, config, stats, metadata["train"])


def inspect_checkpoint(path: str | Path) -> dict:
    """Summarise a checkpoint: family, fingerprint, per-blob parameter
    counts, and the encoder parity ratio of the sparse-control families."""
    family, fingerprint, metadata, blobs = read_checkpoint_blobs(path)
    config = ModelConfig.from_dict(metadata["config"])
    per_blob = {name: int(arr.size) for name, arr in sorted(blobs.items())}
    total_params = sum(arr.size for name, arr in blobs.items() if name.startswith("p/"))
    mi_count = mi_encoder_param_count(config)
    masked_count = masked_encoder_param_count(
        config, config.masked_rnn_width or parity_rnn_width(config))
    return {
        "family": family,
        "fingerprint": fingerprint,
        "scale": config.scale,
        "parameter_total": int(total_params),
        "blobs": per_blob,
        "mi_encoder_dims": {
            "instance_dim": config.instance_dim,
            "value_dim": config.value_dim,
            "gate_dim": config.gate_dim,
            "stream_dim": config.stream_dim,
            "pos_dim": config.pos_dim,
        },
        "encoder_parity_ratio": masked_count / mi_count,
        "train": metadata["train"],
    }
