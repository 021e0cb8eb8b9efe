import struct
import zlib

import numpy as np
import pytest

from mdsrepair import cluster as C
from mdsrepair.errors import (
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


@pytest.fixture
def payload(rng):
    return rng.integers(0, 256, size=1000, dtype=np.uint8).tobytes()


@pytest.fixture
def src(tmp_path, payload):
    p = tmp_path / "in.bin"
    p.write_bytes(payload)
    return p


def make(src, tmp_path, n=5, k=3, construction="explicit2", seed=0, q=257):
    return C.ingest(src, n, k, q, construction, seed, tmp_path / "cluster")


def test_ingest_layout(src, tmp_path):
    cl = make(src, tmp_path)
    m = cl.manifest
    assert m.stripe_count == 42 and m.L == 8
    chunk = cl.chunk_path(1).read_bytes()
    assert len(chunk) == 25 + 42 * 8 * 2
    expected = b"MDSR" + bytes([1, 5, 3]) + struct.pack("<I", 257) + bytes([1]) + struct.pack("<Q", 0)
    expected += bytes([1]) + struct.pack("<I", 42)
    assert chunk[:25] == expected
    man = (cl.root / "manifest.bin").read_bytes()
    assert man[:25] == expected[:20] + bytes([0]) + struct.pack("<I", 42)
    assert struct.unpack("<QI", man[25:]) == (1000, zlib.crc32(src.read_bytes()))


def test_payload_is_stripe_major(src, tmp_path, payload):
    cl = make(src, tmp_path)
    body = np.frombuffer(cl.chunk_path(2).read_bytes()[25:], dtype="<u2")
    # node 2 holds source 2: stripe s covers bytes [24 s + 8, 24 s + 16)
    for s in (0, 1, 41):
        want = list(payload[24 * s + 8 : 24 * s + 16]) if s < 41 else list(payload[24 * s + 8 :].ljust(8, b"\0"))
        assert body[8 * s : 8 * s + 8].tolist() == want


def test_reconstruct_paths(src, tmp_path, payload):
    cl = make(src, tmp_path)
    assert C.read_file(cl) == payload
    assert C.read_file(cl, [3, 4, 5]) == payload
    out = C.reconstruct(cl, tmp_path / "out.bin", [1, 2, 3])
    assert out.read_bytes() == payload
    C.fail(cl, 1)
    assert C.read_file(cl) == payload
    C.fail(cl, 4)
    assert C.read_file(cl) == payload
    with pytest.raises(NotEnoughNodesError):
        C.read_file(cl, [1, 2, 3])
    with pytest.raises(NotEnoughNodesError):
        C.read_file(cl, [2, 3])


def test_fail_errors(src, tmp_path):
    cl = make(src, tmp_path)
    with pytest.raises(BadNodeError):
        C.fail(cl, 9)
    C.fail(cl, 1)
    with pytest.raises(AlreadyFailedError):
        C.fail(cl, 1)
    C.fail(cl, 2)
    with pytest.raises(TooManyFailuresError):
        C.fail(cl, 3)
    assert cl.failed == {1, 2}
    assert cl.failed_path(1).exists()


@pytest.mark.parametrize("construction,n,k", [("explicit2", 5, 3), ("explicit3", 7, 4), ("tensor", 5, 3), ("random", 6, 3)])
def test_fail_repair_round_trip(src, tmp_path, payload, construction, n, k):
    cl = make(src, tmp_path, n, k, construction, seed=7)
    golden = {j: cl.chunk_path(j).read_bytes() for j in range(1, n + 1)}
    L, s = cl.manifest.L, n - k
    stripes = cl.manifest.stripe_count
    for j in range(1, n + 1):
        C.fail(cl, j)
        m = C.repair_node(cl, j)
        assert cl.chunk_path(j).read_bytes() == golden[j]
        assert not cl.failed_path(j).exists()
        if j <= k:
            assert m.total_downloaded == stripes * (n - 1) * L // s
            assert m.optimal
            if construction != "tensor":
                assert set(m.accessed.values()) == {stripes * L // s}
        else:
            assert m.total_downloaded == stripes * k * L and not m.optimal
        assert C.read_file(cl) == payload
    assert C.check_consistency(cl)
    assert C.check_consistency(cl, list(range(n - k + 1, n + 1)))


def test_repair_counts(src, tmp_path):
    cl = make(src, tmp_path)
    C.fail(cl, 1)
    m = C.repair_node(cl, 1)
    assert m.total_downloaded == 42 * 4 * 4 == 672
    assert m.trivial_symbols == 42 * 8 * 3 == 1008
    assert m.total_downloaded * 3 == m.trivial_symbols * 2
    C.fail(cl, 5)
    m = C.repair_node(cl, 5)
    assert m.total_downloaded == 42 * 8 * 3 and not m.optimal


def test_repair_errors(src, tmp_path):
    cl = make(src, tmp_path)
    with pytest.raises(NodeAliveError):
        C.repair_node(cl, 1)
    C.fail(cl, 1)
    C.fail(cl, 2)
    with pytest.raises(MissingSurvivorError):
        C.repair_node(cl, 1)
    # parity repair reads whichever k nodes are alive
    cl2 = make(src, tmp_path / "b")
    C.fail(cl2, 1)
    C.fail(cl2, 5)
    C.repair_node(cl2, 5)
    C.repair_node(cl2, 1)
    assert C.check_consistency(cl2)


def test_metered_reads_touch_only_planned_cells(src, tmp_path):
    cl = make(src, tmp_path)
    with C.MeteredChunk(cl, 2) as r:
        vals = r.read_cells(0, (1, 2, 3, 4))
        assert r.cells_read == 4 and r.read_calls == 1
        r.read_cells(0, (1, 3))
        assert r.cells_read == 6 and r.read_calls == 3
    assert vals.tolist() == list(src.read_bytes()[8:12])


def test_field_too_small(src, tmp_path):
    with pytest.raises(FieldTooSmallForBytesError):
        make(src, tmp_path, q=251)


def test_corruption_detected(src, tmp_path):
    cl = make(src, tmp_path)
    p = cl.chunk_path(2)
    data = bytearray(p.read_bytes())
    data[30] ^= 0x01
    p.write_bytes(bytes(data))
    with pytest.raises(ChecksumMismatchError):
        C.read_file(cl)
    data[20] = 9  # node index in header
    p.write_bytes(bytes(data))
    with pytest.raises(CorruptChunkError):
        C.read_file(cl)


def test_open_cluster(src, tmp_path, payload):
    cl = make(src, tmp_path, construction="random", seed=12)
    again = C.open_cluster(cl.root)
    assert again.code == cl.code and again.manifest == cl.manifest
    assert C.read_file(again) == payload
    with pytest.raises(CorruptChunkError):
        C.open_cluster(tmp_path / "nowhere")


def test_empty_file(tmp_path):
    p = tmp_path / "empty"
    p.write_bytes(b"")
    cl = C.ingest(p, 4, 2, 257, "explicit2", 0, tmp_path / "c")
    assert cl.manifest.stripe_count == 0
    assert C.read_file(cl) == b""
    C.fail(cl, 1)
    C.repair_node(cl, 1)
