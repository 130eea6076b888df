"""Binary embedding store and the in-memory EmbeddingSet.

File layout (little-endian, no padding):

    magic   8 bytes  b"OIDEMB01"
    version u32      1
    dim     u32
    count   u64
    ids     count x (u16 byte length + UTF-8 bytes)
    payload count x dim float32

Rows are unit-normalized on ingestion, so cosine similarity is a plain
inner product. Rows already within 1e-6 of unit norm are left untouched,
which makes normalization a fixed point and write/read round-trips
bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmbeddingIOError

MAGIC = b"OIDEMB01"
VERSION = 1
MAX_ID_BYTES = 0xFFFF
NORM_SKIP_TOL = 1e-6


def _normalize_rows(matrix: np.ndarray, ids) -> np.ndarray:
    out = np.ascontiguousarray(matrix, dtype=np.float32).copy()
    if out.shape[0] == 0:
        return out
    norms = np.linalg.norm(out.astype(np.float64), axis=1)
    bad = np.flatnonzero(norms < 1e-20)
    if bad.size:
        raise EmbeddingIOError(
            f"zero-norm row for id {ids[int(bad[0])]!r} (unrecoverable)"
        )
    fix = np.flatnonzero(np.abs(norms - 1.0) > NORM_SKIP_TOL)
    for i in fix:
        out[i] = (out[i].astype(np.float64) / norms[i]).astype(np.float32)
    return out


@dataclass
class EmbeddingSet:
    """Unit-norm float32 rows keyed by image id. Read-only after creation."""

    ids: list
    matrix: np.ndarray

    def __post_init__(self):
        self.ids = list(self.ids)
        if self.matrix.ndim != 2:
            raise EmbeddingIOError("matrix must be 2-D")
        if len(self.ids) != self.matrix.shape[0]:
            raise EmbeddingIOError(
                f"{len(self.ids)} ids vs {self.matrix.shape[0]} matrix rows"
            )
        self._index = {}
        for pos, image_id in enumerate(self.ids):
            if image_id in self._index:
                raise EmbeddingIOError(f"duplicate id {image_id!r}")
            self._index[image_id] = pos

    @classmethod
    def from_rows(cls, ids, matrix) -> "EmbeddingSet":
        """Build a set from raw rows, normalizing them."""
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2:
            raise EmbeddingIOError("matrix must be 2-D")
        return cls(list(ids), _normalize_rows(matrix, list(ids)))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, image_id) -> bool:
        return image_id in self._index

    def row(self, image_id) -> np.ndarray:
        try:
            return self.matrix[self._index[image_id]]
        except KeyError:
            raise EmbeddingIOError(f"no embedding for id {image_id!r}") from None

    def rows(self, ids) -> np.ndarray:
        """Rows for the given ids, in the given order."""
        missing = [i for i in ids if i not in self._index]
        if missing:
            raise EmbeddingIOError(
                f"no embedding for ids {missing[:5]!r}"
                + (f" (+{len(missing) - 5} more)" if len(missing) > 5 else "")
            )
        idx = [self._index[i] for i in ids]
        return self.matrix[idx]

    def select(self, ids) -> "EmbeddingSet":
        """Subset with rows reordered to match ``ids``."""
        return EmbeddingSet(list(ids), self.rows(ids))


def write_embeddings(ids, matrix, path) -> None:
    """Serialize rows to the binary format. Rows are stored as given
    (float32 cast); normalization happens on read."""
    ids = list(ids)
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise EmbeddingIOError("matrix must be 2-D")
    if matrix.shape[0] != len(ids):
        raise EmbeddingIOError(
            f"{len(ids)} ids vs {matrix.shape[0]} matrix rows"
        )
    dim = matrix.shape[1]
    if dim < 1:
        raise EmbeddingIOError("dim must be >= 1")
    encoded = []
    for image_id in ids:
        blob = str(image_id).encode("utf-8")
        if len(blob) > MAX_ID_BYTES:
            raise EmbeddingIOError(f"id longer than {MAX_ID_BYTES} bytes")
        encoded.append(blob)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", VERSION, dim, len(ids)))
        for blob in encoded:
            fh.write(struct.pack("<H", len(blob)))
            fh.write(blob)
        fh.write(matrix.astype("<f4", copy=False).tobytes())


def read_embeddings(path) -> EmbeddingSet:
    """Read and validate an embedding file; rows come back unit-normalized."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise EmbeddingIOError(f"{path}: bad magic")
    offset = len(MAGIC)
    fixed = struct.calcsize("<IIQ")
    if len(data) < offset + fixed:
        raise EmbeddingIOError(f"{path}: truncated header")
    version, dim, count = struct.unpack_from("<IIQ", data, offset)
    offset += fixed
    if version != VERSION:
        raise EmbeddingIOError(f"{path}: unsupported version {version}")
    ids = []
    for _ in range(count):
        if len(data) < offset + 2:
            raise EmbeddingIOError(f"{path}: truncated id table")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if len(data) < offset + id_len:
            raise EmbeddingIOError(f"{path}: truncated id table")
        ids.append(data[offset : offset + id_len].decode("utf-8"))
        offset += id_len
    expected = count * dim * 4
    payload = data[offset:]
    if len(payload) != expected:
        raise EmbeddingIOError(
            f"{path}: truncated payload (expected {expected} bytes, "
            f"got {len(payload)})"
        )
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    return EmbeddingSet(ids, _normalize_rows(matrix, ids))


def cosine(a, b) -> float:
    """Inner product of two unit-norm rows."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise EmbeddingIOError(f"dim mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)))
