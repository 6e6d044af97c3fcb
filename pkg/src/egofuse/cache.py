"""Feature tables and their little-endian binary cache format.

Layout: magic ``EGF1``; then for each channel a UTF-8 name (u32 length +
bytes), dim (u32), count (u32), ``count`` segment-id strings (u32 length +
bytes each) and a count x dim block of float64 values. Channels repeat until
end of file; an empty table is just the magic.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"EGF1"


class CacheError(ValueError):
    pass


class FeatureTable:
    """Named feature channels, each mapping segment ids to fixed-dim vectors.

    Variable-count per-segment rows (window features, interest-point
    descriptors, audio frames) are stored as one channel per segment named
    ``base:segment_id`` via :meth:`set_rows` / :meth:`get_rows`, with
    synthetic row ids ``000000, 000001, ...``.
    """

    def __init__(self) -> None:
        self._channels: dict[str, tuple[list[str], np.ndarray]] = {}

    def set_channel(self, name: str, ids: list[str], matrix: np.ndarray) -> None:
        matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise CacheError(f"channel {name!r}: matrix must be 2-D")
        if len(ids) != matrix.shape[0]:
            raise CacheError(f"channel {name!r}: {len(ids)} ids for {matrix.shape[0]} rows")
        if len(set(ids)) != len(ids):
            raise CacheError(f"channel {name!r}: duplicate segment id")
        self._channels[name] = (list(ids), matrix)

    def get_channel(self, name: str) -> tuple[list[str], np.ndarray]:
        if name not in self._channels:
            raise KeyError(name)
        ids, matrix = self._channels[name]
        return list(ids), matrix

    def has_channel(self, name: str) -> bool:
        return name in self._channels

    def channel_names(self) -> list[str]:
        return sorted(self._channels)

    def dim(self, name: str) -> int:
        return int(self._channels[name][1].shape[1])

    def vector(self, name: str, segment_id: str) -> np.ndarray:
        ids, matrix = self._channels[name]
        try:
            row = ids.index(segment_id)
        except ValueError:
            raise KeyError(f"{name}: no segment {segment_id!r}") from None
        return matrix[row]

    def matrix_for(self, name: str, segment_ids: list[str]) -> np.ndarray:
        """Rows of a channel in the requested segment order."""
        ids, matrix = self._channels[name]
        index = {sid: i for i, sid in enumerate(ids)}
        try:
            rows = [index[sid] for sid in segment_ids]
        except KeyError as exc:
            raise KeyError(f"{name}: no segment {exc.args[0]!r}") from None
        return matrix[np.array(rows, dtype=np.int64)]

    def set_rows(self, base: str, segment_id: str, matrix: np.ndarray) -> None:
        matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        ids = ["%06d" % i for i in range(matrix.shape[0])]
        self.set_channel(f"{base}:{segment_id}", ids, matrix)

    def get_rows(self, base: str, segment_id: str) -> np.ndarray:
        return self._channels[f"{base}:{segment_id}"][1]

    def has_rows(self, base: str, segment_id: str) -> bool:
        return f"{base}:{segment_id}" in self._channels

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureTable):
            return NotImplemented
        if set(self._channels) != set(other._channels):
            return False
        for name, (ids, matrix) in self._channels.items():
            oids, omatrix = other._channels[name]
            if ids != oids or matrix.shape != omatrix.shape:
                return False
            if not np.array_equal(matrix, omatrix):
                return False
        return True


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CacheError("corrupt cache: truncated file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def done(self) -> bool:
        return self.pos == len(self.data)


def write_feature_table(table: FeatureTable, path: str | Path) -> None:
    parts = [MAGIC]
    for name in table.channel_names():
        ids, matrix = table.get_channel(name)
        parts.append(_pack_str(name))
        parts.append(struct.pack("<II", matrix.shape[1], matrix.shape[0]))
        for sid in ids:
            parts.append(_pack_str(sid))
        parts.append(matrix.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_feature_table(path: str | Path) -> FeatureTable:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise CacheError("corrupt cache: truncated file")
    if data[:4] != MAGIC:
        if data[:3] == MAGIC[:3]:
            raise CacheError(f"version mismatch: expected magic {MAGIC!r}, got {data[:4]!r}")
        raise CacheError(f"corrupt cache: bad magic {data[:4]!r}")
    reader = _Reader(data)
    reader.take(4)
    table = FeatureTable()
    while not reader.done():
        name = reader.string()
        dim = reader.u32()
        count = reader.u32()
        ids = [reader.string() for _ in range(count)]
        block = reader.take(8 * dim * count)
        matrix = np.frombuffer(block, dtype="<f8").reshape(count, dim).copy()
        if table.has_channel(name):
            raise CacheError(f"corrupt cache: duplicate channel {name!r}")
        table.set_channel(name, ids, matrix)
    return table


def merge_feature_tables(dst: FeatureTable, src: FeatureTable) -> None:
    """Copy every channel of src into dst, overwriting same-name channels."""
    for name in src.channel_names():
        ids, matrix = src.get_channel(name)
        dst.set_channel(name, ids, matrix)
