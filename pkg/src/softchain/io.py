"""File formats: binary index tensors, parameter files and CSV reports."""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .grounding import GroundAtomTable

MAGIC = b"NSIX"
_HEADER = struct.Struct("<4sIIII")


class FormatError(ValueError):
    pass


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".atoms")


def write_index(path, index: np.ndarray, table: GroundAtomTable | None = None) -> None:
    """Write ``index`` (C x G x S x L) as ``NSIX`` + u32 dims + row-major u32 entries."""
    index = np.asarray(index)
    if index.ndim != 4:
        raise FormatError(f"index tensor must be 4-d, got shape {index.shape}")
    if index.size and (index.min() < 0 or index.max() > np.iinfo(np.uint32).max):
        raise FormatError("index entries do not fit in u32")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *index.shape))
        fh.write(np.ascontiguousarray(index, dtype="<u4").tobytes())
    if table is not None:
        sidecar_path(path).write_text(table.listing(), encoding="utf-8")


def read_index(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("file too short for an index header")
    magic, C, G, S, L = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != 4 * C * G * S * L:
        raise FormatError(f"expected {C * G * S * L} entries, found {len(body) // 4}")
    return np.frombuffer(body, dtype="<u4").reshape(C, G, S, L).astype(np.int64)


def format_params(params: Mapping[str, Sequence[float]]) -> str:
    lines = []
    for name in sorted(params):
        vals = " ".join(f"{float(v):.17g}" for v in params[name])
        lines.append(f"{name} {vals}")
    return "".join(line + "\n" for line in lines)


def parse_params(text: str) -> dict[str, np.ndarray]:
    params = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].split("#", 1)[0].strip()
        if not line:
            continue
        name, *vals = line.split()
        try:
            params[name] = np.array([float(v) for v in vals])
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric parameter for {name}") from None
        if not len(vals):
            raise FormatError(f"line {lineno}: {name} has no parameters")
    return params


def write_params(path, params) -> None:
    Path(path).write_text(format_params(params), encoding="utf-8")


def read_params(path) -> dict[str, np.ndarray]:
    return parse_params(Path(path).read_text(encoding="utf-8"))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with ``\\n`` line endings and floats printed by ``repr`` (round-trip exact)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_cell(v) for v in row])


def format_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def prediction_rows(probabilities: np.ndarray, labels: np.ndarray, ids: Sequence | None = None):
    ids = range(len(labels)) if ids is None else ids
    for i, p, y in zip(ids, probabilities, labels):
        yield [i, *map(float, p), int(y)]
