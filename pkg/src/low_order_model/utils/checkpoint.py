"""
Network checkpoints.

Layout, all integers little-endian::

    b"LOM1" | version u32 | header length u32 | header JSON | array payload | SHA-256 of everything before it

The JSON header carries the run configuration, its fingerprint and, per
processing unit, the learn count, spike-stream position and the name, dtype
and shape of each state array. Arrays follow in header order as raw
little-endian bytes.
"""

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger
from pydantic import ValidationError

from ..core.network import Network
from ..core.soma import SpikeRng
from ..models.config import RunConfig

MAGIC = b"LOM1"
VERSION = 1
_PREFIX = struct.Struct("<4sII")
_DIGEST_SIZE = 32


class CheckpointError(Exception):
    """Exception raised for unreadable or inconsistent checkpoints."""

    pass


class CheckpointVersionError(CheckpointError):
    """Exception raised when a checkpoint has a foreign magic or an unsupported version."""

    pass


def _little_endian(array: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<"))


def encode_network(network: Network) -> bytes:
    """Serialize the learned state of every unit into one checkpoint blob."""
    units: list[dict[str, Any]] = []
    payload: list[bytes] = []
    for unit in network.units:
        arrays = []
        for name, array in unit.memory.state_arrays().items():
            data = _little_endian(np.asarray(array))
            arrays.append({"name": name, "dtype": data.dtype.str, "shape": list(data.shape)})
            payload.append(data.tobytes())
        units.append(
            {
                "pu_id": unit.pu_id,
                "memory": unit.memory.kind,
                "learn_count": unit.memory.learn_count,
                "rng_position": unit.rng.position,
                "arrays": arrays,
            }
        )
    header = {
        "config": network.cfg.model_dump(mode="json", by_alias=True),
        "fingerprint": network.cfg.fingerprint(),
        "examples_seen": network.examples_seen,
        "units": units,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = _PREFIX.pack(MAGIC, VERSION, len(header_bytes)) + header_bytes + b"".join(payload)
    return body + hashlib.sha256(body).digest()


def save_network(network: Network, path: Path) -> Path:
    """Write a checkpoint atomically (temporary file, then rename)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = encode_network(network)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(blob)
        os.replace(tmp_name, path)
    except OSError as e:
        Path(tmp_name).unlink(missing_ok=True)
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}") from e
    logger.info(f"Checkpoint written to {path} ({len(blob)} bytes)")
    return path


def _read_header(blob: bytes, source: str) -> tuple[dict[str, Any], int]:
    if len(blob) < _PREFIX.size + _DIGEST_SIZE:
        raise CheckpointError(f"{source} is too short to be a checkpoint")
    magic, version, header_length = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointVersionError(f"{source} has magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointVersionError(f"{source} is checkpoint version {version}, this build reads {VERSION}")
    body, digest = blob[:-_DIGEST_SIZE], blob[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{source} failed its integrity check")
    start = _PREFIX.size
    try:
        header = json.loads(blob[start : start + header_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source} has an unreadable header: {e}") from e
    return header, start + header_length


def decode_network(blob: bytes, source: str = "checkpoint") -> Network:
    """Rebuild a network, spike-stream positions included, from a checkpoint blob."""
    header, offset = _read_header(blob, source)
    try:
        cfg = RunConfig.model_validate(header["config"])
    except (KeyError, ValidationError) as e:
        raise CheckpointError(f"{source} carries an invalid configuration: {e}") from e
    if cfg.fingerprint() != header.get("fingerprint"):
        raise CheckpointError(f"{source} configuration does not match its fingerprint")

    network = Network(cfg)
    units = {unit.pu_id: unit for unit in network.units}
    end = len(blob) - _DIGEST_SIZE
    restored: set[str] = set()
    for entry in header["units"]:
        unit = units.get(entry["pu_id"])
        if unit is None or unit.memory.kind != entry["memory"]:
            raise CheckpointError(f"{source} holds unit {entry['pu_id']} that the configuration does not describe")
        if unit.pu_id in restored:
            raise CheckpointError(f"{source} holds unit {unit.pu_id} twice")
        restored.add(unit.pu_id)
        arrays = {}
        for spec in entry["arrays"]:
            dtype = np.dtype(spec["dtype"])
            count = int(np.prod(spec["shape"], dtype=np.int64))
            size = count * dtype.itemsize
            if offset + size > end:
                raise CheckpointError(f"{source} is truncated inside unit {entry['pu_id']}")
            data = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
            arrays[spec["name"]] = data.reshape(spec["shape"]).astype(dtype.newbyteorder("="))
            offset += size
        unit.memory.load_state_arrays(arrays)
        unit.memory.learn_count = int(entry["learn_count"])
        unit.rng = SpikeRng(cfg.seed, unit.pu_id, position=int(entry["rng_position"]))
    missing = [pu_id for pu_id in units if pu_id not in restored]
    if missing:
        raise CheckpointError(f"{source} lacks {len(missing)} of {len(units)} units, first {missing[0]}")
    if offset != end:
        raise CheckpointError(f"{source} has {end - offset} unexpected trailing bytes")
    network.examples_seen = int(header.get("examples_seen", 0))
    return network


def load_network(path: Path) -> Network:
    """Read a checkpoint written by ``save_network``."""
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    network = decode_network(blob, str(path))
    logger.info(f"Loaded checkpoint {path}: {network.examples_seen} training images seen")
    return network
