"""A storage cluster simulated as one directory of chunk files.

Layout under the cluster root::

    manifest.bin        header + original file length + CRC32
    code.bin            canonical code bytes (lambda table), cross-checked on open
    node_<j>.chunk      header + symbols of node j, 2 bytes LE each, stripe-major
    node_<j>.failed     a failed node's chunk, moved aside and never read

Each input byte is one source symbol, so the field must have q >= 257.
Repair reads survivors with seeks to the planned symbol cells only and
counts every cell it touches.
"""

from __future__ import annotations

import logging
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .codes import CodeSpec, Construction, build_code, deserialize, serialize
from .errors import (
    AlreadyFailedError,
    BadNodeError,
    ChecksumMismatchError,
    CorruptChunkError,
    FieldTooSmallForBytesError,
    MissingSurvivorError,
    NodeAliveError,
    NotEnoughNodesError,
    TooManyFailuresError,
)
from .repair import RepairMetrics, decode_array, encode_array, execute_repair, plan_repair

log = logging.getLogger(__name__)

MAGIC = b"MDSR"
VERSION = 1
SYMBOL_BYTES = 2
HEADER = struct.Struct("<4sBBBIBQBI")  # magic, version, n, k, q, construction, seed, node, stripes
MANIFEST_TAIL = struct.Struct("<QI")  # file length, crc32
MANIFEST_NAME = "manifest.bin"
CODE_NAME = "code.bin"


@dataclass(frozen=True)
class Manifest:
    n: int
    k: int
    q: int
    construction: Construction
    seed: int
    stripe_count: int
    file_length: int
    checksum: int

    @property
    def L(self) -> int:
        return (self.n - self.k) ** self.k

    def header(self, node: int) -> bytes:
        return HEADER.pack(
            MAGIC, VERSION, self.n, self.k, self.q, int(self.construction), self.seed, node, self.stripe_count
        )

    def to_bytes(self) -> bytes:
        return self.header(0) + MANIFEST_TAIL.pack(self.file_length, self.checksum)

    @classmethod
    def from_bytes(cls, data: bytes) -> Manifest:
        if len(data) != HEADER.size + MANIFEST_TAIL.size:
            raise CorruptChunkError(f"manifest is {len(data)} bytes, expected {HEADER.size + MANIFEST_TAIL.size}")
        magic, version, n, k, q, cid, seed, node, stripes = HEADER.unpack_from(data)
        if magic != MAGIC or version != VERSION or node != 0:
            raise CorruptChunkError("bad manifest header")
        length, crc = MANIFEST_TAIL.unpack_from(data, HEADER.size)
        return cls(n, k, q, Construction(cid), seed, stripes, length, crc)


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class ClusterState:
    root: Path
    manifest: Manifest
    code: CodeSpec

    @property
    def n(self) -> int:
        return self.manifest.n

    @property
    def k(self) -> int:
        return self.manifest.k

    def chunk_path(self, node: int) -> Path:
        return self.root / f"node_{node}.chunk"

    def failed_path(self, node: int) -> Path:
        return self.root / f"node_{node}.failed"

    @property
    def failed(self) -> frozenset[int]:
        return frozenset(j for j in range(1, self.n + 1) if not self.chunk_path(j).exists())

    @property
    def alive(self) -> list[int]:
        return [j for j in range(1, self.n + 1) if self.chunk_path(j).exists()]

    def _check_node(self, node: int):
        if not 1 <= node <= self.n:
            raise BadNodeError(f"node {node} outside 1..{self.n}")


class MeteredChunk:
    """Seek-based reader over one chunk file that counts symbol cells read."""

    def __init__(self, cluster: ClusterState, node: int):
        self.node = node
        self.L = cluster.manifest.L
        self.stripes = cluster.manifest.stripe_count
        self.cells_read = 0
        self.read_calls = 0
        path = cluster.chunk_path(node)
        expected = HEADER.size + self.stripes * self.L * SYMBOL_BYTES
        if path.stat().st_size != expected:
            raise CorruptChunkError(f"{path.name}: size {path.stat().st_size}, expected {expected}")
        self._f: BinaryIO = open(path, "rb")
        if self._f.read(HEADER.size) != cluster.manifest.header(node):
            self._f.close()
            raise CorruptChunkError(f"{path.name}: header does not match the manifest")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self._f.close()

    def read_cells(self, stripe: int, positions: Sequence[int]) -> np.ndarray:
        """Symbols at 1-based ``positions`` of one stripe; contiguous runs share one read."""
        out = np.empty(len(positions), dtype=np.int64)
        t = 0
        for start, length in _runs(positions):
            self._f.seek(HEADER.size + (stripe * self.L + start - 1) * SYMBOL_BYTES)
            raw = self._f.read(length * SYMBOL_BYTES)
            if len(raw) != length * SYMBOL_BYTES:
                raise CorruptChunkError(f"node {self.node}: short read in stripe {stripe}")
            out[t : t + length] = np.frombuffer(raw, dtype="<u2")
            t += length
            self.read_calls += 1
        self.cells_read += len(positions)
        return out

    def read_all(self) -> np.ndarray:
        """Whole payload as an (L, stripes) array."""
        self._f.seek(HEADER.size)
        raw = self._f.read(self.stripes * self.L * SYMBOL_BYTES)
        self.read_calls += 1
        self.cells_read += self.stripes * self.L
        return np.frombuffer(raw, dtype="<u2").astype(np.int64).reshape(self.stripes, self.L).T


def _runs(positions: Sequence[int]) -> Iterable[tuple[int, int]]:
    it = iter(positions)
    try:
        start = prev = next(it)
    except StopIteration:
        return
    for p in it:
        if p != prev + 1:
            yield start, prev - start + 1
            start = p
        prev = p
    yield start, prev - start + 1


def _payload(node_data: np.ndarray) -> bytes:
    # node_data: (L, stripes) -> stripe-major little-endian u16
    return np.ascontiguousarray(node_data.T).astype("<u2").tobytes()


# --- operations -------------------------------------------------------------


def ingest(
    path: str | os.PathLike,
    n: int,
    k: int,
    q: int,
    construction: str | Construction,
    seed: int,
    root: str | os.PathLike,
) -> ClusterState:
    if q < 257:
        raise FieldTooSmallForBytesError(f"q={q} cannot hold byte values; need q >= 257")
    if not 0 < k < n <= 255:
        raise ValueError(f"(n, k) = ({n}, {k}) does not fit the chunk header")
    code = build_code(construction, n, k, q, seed)
    data = Path(path).read_bytes()
    L = code.L
    per_stripe = k * L
    stripes = -(-len(data) // per_stripe)
    padded = np.zeros(stripes * per_stripe, dtype=np.int64)
    padded[: len(data)] = np.frombuffer(data, dtype=np.uint8)
    sources = padded.reshape(stripes, k, L).transpose(1, 2, 0)  # (k, L, stripes)
    nodes = encode_array(code, sources)

    manifest = Manifest(n, k, q, code.construction, seed & (2**64 - 1), stripes, len(data), zlib.crc32(data))
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    cluster = ClusterState(root, manifest, code)
    for j in range(1, n + 1):
        _atomic_write(cluster.chunk_path(j), manifest.header(j) + _payload(nodes[j - 1]))
        cluster.failed_path(j).unlink(missing_ok=True)
    _atomic_write(root / CODE_NAME, serialize(code))
    _atomic_write(root / MANIFEST_NAME, manifest.to_bytes())
    log.info("ingested %d bytes into %d stripes on %d nodes", len(data), stripes, n)
    return cluster


def open_cluster(root: str | os.PathLike) -> ClusterState:
    root = Path(root)
    try:
        manifest = Manifest.from_bytes((root / MANIFEST_NAME).read_bytes())
    except FileNotFoundError:
        raise CorruptChunkError(f"no manifest in {root}") from None
    code = build_code(manifest.construction, manifest.n, manifest.k, manifest.q, manifest.seed)
    stored = root / CODE_NAME
    if stored.exists() and deserialize(stored.read_bytes()) != code:
        raise CorruptChunkError("stored code table does not match the code rebuilt from the manifest")
    return ClusterState(root, manifest, code)


def fail(cluster: ClusterState, node: int) -> ClusterState:
    cluster._check_node(node)
    failed = cluster.failed
    if node in failed:
        raise AlreadyFailedError(f"node {node} has already failed")
    if len(failed) + 1 > cluster.n - cluster.k:
        raise TooManyFailuresError(f"at most {cluster.n - cluster.k} concurrent failures are recoverable")
    os.replace(cluster.chunk_path(node), cluster.failed_path(node))
    return cluster


def repair_node(cluster: ClusterState, node: int) -> RepairMetrics:
    """Rebuild one failed node, reading only the planned cells from survivors."""
    cluster._check_node(node)
    if cluster.chunk_path(node).exists():
        raise NodeAliveError(f"node {node} is alive")
    code, m = cluster.code, cluster.manifest
    alive = cluster.alive
    plan = plan_repair(code, node, available=alive)
    missing = [j for j in plan.fetch if j not in alive]
    if missing:
        raise MissingSurvivorError(f"repair of node {node} needs failed node(s) {missing}")

    fetched, cells, calls = {}, {}, {}
    for j, positions in plan.fetch.items():
        with MeteredChunk(cluster, j) as reader:
            cols = [reader.read_cells(s, positions) for s in range(m.stripe_count)]
            cells[j], calls[j] = reader.cells_read, reader.read_calls
        fetched[j] = np.stack(cols, axis=1) if cols else np.zeros((len(positions), 0), dtype=np.int64)

    restored, metrics = execute_repair(code, plan, fetched)
    metrics.accessed = cells  # what the readers actually touched
    _atomic_write(cluster.chunk_path(node), m.header(node) + _payload(restored.data))
    cluster.failed_path(node).unlink(missing_ok=True)
    log.info("repaired node %d: %d symbols downloaded, %d cells read in %d calls",
             node, metrics.total_downloaded, metrics.total_accessed, sum(calls.values()))
    return metrics


def _read_nodes(cluster: ClusterState, nodes: Iterable[int]) -> dict[int, np.ndarray]:
    out = {}
    for j in nodes:
        with MeteredChunk(cluster, j) as reader:
            out[j] = reader.read_all()
    return out


def _choose_nodes(cluster: ClusterState, using: Sequence[int] | None) -> list[int]:
    alive = cluster.alive
    if using is None:
        if len(alive) < cluster.k:
            raise NotEnoughNodesError(f"{len(alive)} live nodes, need {cluster.k}")
        return alive[: cluster.k]
    chosen = sorted(set(using))
    for j in chosen:
        cluster._check_node(j)
    if len(chosen) != cluster.k or len(chosen) != len(using):
        raise NotEnoughNodesError(f"need exactly {cluster.k} distinct nodes, got {list(using)}")
    dead = [j for j in chosen if j not in alive]
    if dead:
        raise NotEnoughNodesError(f"requested node(s) {dead} are not alive")
    return chosen


def read_file(cluster: ClusterState, using: Sequence[int] | None = None) -> bytes:
    m = cluster.manifest
    nodes = _choose_nodes(cluster, using)
    sources = decode_array(cluster.code, _read_nodes(cluster, nodes))  # (k, L, stripes)
    if sources.size and sources.max() > 255:
        raise CorruptChunkError("decoded symbols exceed byte range")
    data = sources.transpose(2, 0, 1).astype(np.uint8).tobytes()[: m.file_length]
    if zlib.crc32(data) != m.checksum:
        raise ChecksumMismatchError("reconstructed file does not match the stored CRC32")
    return data


def reconstruct(
    cluster: ClusterState, out_path: str | os.PathLike, using: Sequence[int] | None = None
) -> Path:
    data = read_file(cluster, using)
    out = Path(out_path)
    _atomic_write(out, data)
    return out


def check_consistency(cluster: ClusterState, using: Sequence[int] | None = None) -> bool:
    """Re-encode from k chunks and compare against every live chunk."""
    nodes = _choose_nodes(cluster, using)
    stored = _read_nodes(cluster, cluster.alive)
    sources = decode_array(cluster.code, {j: stored[j] for j in nodes})
    full = encode_array(cluster.code, sources)
    return all(np.array_equal(full[j - 1], stored[j]) for j in stored)
