"""
Files written by cascade-fourier runs.

All writes are atomic: data goes to a temporary file in the target directory
which then replaces the destination. CSV floats carry 17 significant digits,
JSON encodes non-finite floats as strings ("inf"), and every run directory
gets a manifest with checksums of what was read and written.
"""

import hashlib
import json
import math
import os
import struct
import tempfile
import time
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import polars as pl
from eliot import start_action

from cascade_fourier import __version__
from cascade_fourier.cascade import CascadeRealization
from cascade_fourier.errors import CorruptMassFile
from cascade_fourier.weights import WeightModel

MAGIC = b"MCAS"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIIIQ")
FLOAT_FORMAT = "{:.17g}"


def calculate_file_hash(file_path: Path) -> str:
    """Calculate SHA256 hash of a file."""
    sha256_hash = hashlib.sha256()
    with open(file_path, "rb") as f:
        for byte_block in iter(lambda: f.read(1 << 16), b""):
            sha256_hash.update(byte_block)
    return sha256_hash.hexdigest()


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become "inf", "-inf" or "nan"."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return value


def dumps(value: Any) -> str:
    return json.dumps(to_jsonable(value), indent=2, sort_keys=True) + "\n"


def write_json(path: Path, value: Any) -> Path:
    return atomic_write_text(path, dumps(value))


def format_floats(df: pl.DataFrame) -> pl.DataFrame:
    """Float columns rendered as 17-significant-digit strings."""
    return df.with_columns(
        [
            pl.Series(name, [FLOAT_FORMAT.format(v) for v in df[name].to_list()], dtype=pl.Utf8)
            for name, dtype in zip(df.columns, df.dtypes)
            if dtype.is_float()
        ]
    )


def write_csv(path: Path, df: pl.DataFrame) -> Path:
    """Header row, '.' decimals, lossless floats; atomic."""
    path = Path(path)
    with start_action(action_type="write_csv", path=str(path), rows=df.height):
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        os.close(fd)
        try:
            format_floats(df).write_csv(tmp)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return path


def sidecar_path(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def write_masses(path: Path, r: CascadeRealization) -> Path:
    """
    Binary mass file: magic MCAS, u32 version, u32 b, u32 d, u32 n, u64 seed,
    then little-endian f64 masses in address order. A JSON sidecar next to it
    holds {model, depth, seed, cells, sha256}.
    """
    path = Path(path)
    with start_action(action_type="write_masses", path=str(path), cells=r.cell_count) as action:
        header = HEADER.pack(MAGIC, FORMAT_VERSION, r.b, r.d, r.depth, r.seed & 0xFFFFFFFFFFFFFFFF)
        atomic_write_bytes(path, header + np.ascontiguousarray(r.masses, dtype="<f8").tobytes())
        digest = calculate_file_hash(path)
        write_json(
            sidecar_path(path),
            {"model": r.model.to_dict(), "depth": r.depth, "seed": r.seed, "cells": r.cell_count, "sha256": digest},
        )
        action.log(message_type="masses_written", sha256=digest)
        return path


def read_masses(path: Path) -> CascadeRealization:
    """
    Load a mass file written by `write_masses`.

    Raises:
        CorruptMassFile: missing or unreadable sidecar; wrong magic, version,
            size or checksum; header disagreeing with the sidecar
    """
    path = Path(path)
    sidecar = sidecar_path(path)
    try:
        meta = json.loads(sidecar.read_text())
    except FileNotFoundError as e:
        raise CorruptMassFile(f"{path}: sidecar {sidecar.name} is missing") from e
    except json.JSONDecodeError as e:
        raise CorruptMassFile(f"{path}: sidecar {sidecar.name} is not valid JSON") from e
    digest = calculate_file_hash(path)
    if digest != meta.get("sha256"):
        raise CorruptMassFile(f"{path}: checksum {digest} does not match sidecar")
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise CorruptMassFile(f"{path}: shorter than the header")
    magic, version, b, d, n, seed = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptMassFile(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptMassFile(f"{path}: unsupported version {version}")
    model = WeightModel.from_dict(meta["model"])
    if (model.b, model.d) != (b, d):
        raise CorruptMassFile(f"{path}: header (b={b}, d={d}) disagrees with sidecar model")
    if seed != int(meta["seed"]) & 0xFFFFFFFFFFFFFFFF or n != int(meta["depth"]):
        raise CorruptMassFile(f"{path}: header (seed={seed}, depth={n}) disagrees with sidecar")
    masses = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).astype(np.float64)
    if masses.size != (b**d) ** n:
        raise CorruptMassFile(f"{path}: {masses.size} masses for depth {n}")
    return CascadeRealization(model=model, depth=n, seed=int(meta["seed"]), masses=masses)


class RunManifest:
    """Collects inputs and outputs of one run and writes manifest.json."""

    def __init__(self, command: str, config: Dict[str, Any]) -> None:
        self.command = command
        self.config = config
        self.inputs: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        self.started = datetime.now(timezone.utc).isoformat()
        self._clock = time.perf_counter()

    def add_input(self, name: str, path: Path) -> None:
        self.inputs[name] = calculate_file_hash(path)

    def add_output(self, name: str, path: Path) -> None:
        self.outputs[name] = calculate_file_hash(path)

    def to_dict(self, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        data = {
            "command": self.command,
            "config": self.config,
            "version": __version__,
            "inputs": dict(self.inputs),
            "outputs": dict(self.outputs),
            "started": self.started,
            "wall_seconds": time.perf_counter() - self._clock,
        }
        if extra:
            data.update(extra)
        return data

    def write(self, output_dir: Path, extra: Optional[Dict[str, Any]] = None) -> Path:
        return write_json(Path(output_dir) / "manifest.json", self.to_dict(extra))
