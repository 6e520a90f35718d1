import os
import random
import struct

import pytest
from hypothesis import given, settings, strategies as st

from mapsin.kvstore import (CorruptFileError, FilterSpec, InvertedRangeError, KVStore,
                            UnknownTableError, decode_record_key, encode_record_key)

T = "T_spo"


def crc64_we_bitwise(data: bytes) -> int:
    # CRC-64/WE: poly 0x42F0E1EBA9EA3693, init and xorout all ones, unreflected
    poly, crc = 0x42F0E1EBA9EA3693, 0xFFFFFFFFFFFFFFFF
    for byte in data:
        crc ^= byte << 56
        for _ in range(8):
            crc = ((crc << 1) ^ poly) if crc & (1 << 63) else (crc << 1)
            crc &= 0xFFFFFFFFFFFFFFFF
    return crc ^ 0xFFFFFFFFFFFFFFFF


@pytest.fixture
def kv():
    store = KVStore()
    store.create_table(T)
    store.put(T, b"Article1", "p", b"title", b"PigSPARQL")
    store.put(T, b"Article1", "p", b"year", b"2011")
    store.put(T, b"Article1", "p", b"author", b"Alex")
    store.put(T, b"Article1", "p", b"author", b"Martin")
    store.put(T, b"Article2", "p", b"title", b"RDFPath")
    store.put(T, b"Article2", "p", b"year", b"2011")
    store.put(T, b"Article2", "p", b"author", b"Martin")
    store.put(T, b"Article2", "p", b"author", b"Alex")
    store.put(T, b"Article2", "p", b"cite", b"Article1")
    return store


def values(result):
    return {c.value for c in result.cells}


def test_put_then_get(kv):
    r = kv.get(T, b"Article1", FilterSpec.column_equals(b"title"))
    assert values(r) == {b"PigSPARQL"}


def test_unknown_table(kv):
    with pytest.raises(UnknownTableError):
        kv.put("T_xyz", b"r", "p", b"c", b"v")
    with pytest.raises(UnknownTableError):
        kv.get("T_xyz", b"r")


def test_versions_retained_with_increasing_timestamps(kv):
    r = kv.get(T, b"Article1", FilterSpec.column_equals(b"author"))
    assert values(r) == {b"Alex", b"Martin"}
    # newest first
    assert [c.value for c in r.cells] == [b"Martin", b"Alex"]
    assert r.cells[0].timestamp > r.cells[1].timestamp


def test_get_absent_row(kv):
    assert not kv.get(T, b"ArticleX")
    assert kv.get(T, b"ArticleX").cells == ()


def test_get_column_and_value(kv):
    r = kv.get(T, b"Article2", FilterSpec.column_and_value(b"cite", b"Article1"))
    assert [(c.column, c.value) for c in r.cells] == [(b"cite", b"Article1")]


def test_cells_sorted(kv):
    cells = kv.get(T, b"Article2").cells
    keys = [(c.family, c.column, -c.timestamp) for c in cells]
    assert keys == sorted(keys)


def test_get_counts_one_request(kv):
    before = kv.meter.snapshot()
    kv.get(T, b"Article2")
    d = kv.meter.snapshot() - before
    assert (d.get_requests, d.cells_fetched) == (1, 5)


def test_multi_get_is_one_request(kv):
    before = kv.meter.snapshot()
    r = kv.multi_get(T, b"Article1", [FilterSpec.column_equals(b"title"),
                                       FilterSpec.column_equals(b"author")])
    d = kv.meter.snapshot() - before
    assert d.get_requests == 1
    assert values(r) == {b"PigSPARQL", b"Alex", b"Martin"}


def test_scan_with_column_filter(kv):
    rows = list(kv.scan(T, b"", None, FilterSpec.column_equals(b"title")))
    assert [r.row for r in rows] == [b"Article1", b"Article2"]


def test_scan_empty_and_inverted(kv):
    assert list(kv.scan(T, b"B", b"B")) == []
    with pytest.raises(InvertedRangeError):
        kv.scan(T, b"Z", b"A")


def test_scan_prefix_range_is_contiguous():
    kv = KVStore()
    kv.create_table("T_ops")
    for name in [b"Alex", b"Martin", b"Zoe"]:
        kv.put("T_ops", b"foaf:Person\x00" + name, "p", b"type", name)
    kv.put("T_ops", b"foaf:Person", "p", b"knows", b"x")
    kv.put("T_ops", b"foaf:PersonX", "p", b"knows", b"y")
    rows = list(kv.scan("T_ops", b"foaf:Person\x00", b"foaf:Person\x01", FilterSpec.column_equals(b"type")))
    assert [r.row.split(b"\x00")[1] for r in rows] == [b"Alex", b"Martin", b"Zoe"]


def test_filter_spec_validation():
    with pytest.raises(ValueError):
        FilterSpec("column")
    with pytest.raises(ValueError):
        FilterSpec("none", column=b"x")
    with pytest.raises(ValueError):
        FilterSpec("bogus")


# -- regions -------------------------------------------------------------------

def random_store(seed, n=400, max_size=2048):
    rng = random.Random(seed)
    kv = KVStore(max_region_size=max_size)
    kv.create_table(T)
    for _ in range(n):
        row = f"r{rng.randrange(150):04d}".encode()
        kv.put(T, row, "p", f"c{rng.randrange(5)}".encode(), f"v{rng.randrange(30)}".encode())
    return kv


def check_region_invariants(kv, table=T):
    regions = kv.regions(table)
    assert regions[0].start_row == b""
    assert regions[-1].end_row is None
    for a, b in zip(regions, regions[1:]):
        assert a.end_row == b.start_row and a.start_row < a.end_row
    for r in regions:
        assert r.size <= kv.max_region_size or r.rows == 1


def test_single_region_partition_equals_scan(kv):
    parts = kv.partitioned_scan(T)
    assert len(parts) == 1
    assert [r for _, s in parts for r in s] == list(kv.scan(T))


@pytest.mark.parametrize("seed", range(3))
def test_partitions_concatenate_to_full_scan(seed):
    kv = random_store(seed)
    check_region_invariants(kv)
    regions = kv.regions(T)
    assert len(regions) >= 3
    parts = kv.partitioned_scan(T)
    assert len(parts) == len(regions)
    assert [r for _, s in parts for r in s] == list(kv.scan(T))
    flt = FilterSpec.column_equals(b"c1")
    assert [r for _, s in kv.partitioned_scan(T, flt) for r in s] == list(kv.scan(T, filter=flt))


def test_partitions_stay_inside_their_region():
    kv = random_store(7)
    for rid, stream in kv.partitioned_scan(T):
        region = kv.regions(T)[rid]
        for r in stream:
            assert region.contains(r.row)


def test_split_check_small_region_unchanged(kv):
    assert len(kv.split_check(T)) == 1


def test_two_fat_rows_split_into_two_regions():
    kv = KVStore(max_region_size=100)
    kv.create_table(T)
    kv.put(T, b"a", "p", b"c", b"x" * 80)
    kv.put(T, b"b", "p", b"c", b"y" * 80)
    regions = kv.split_check(T)
    assert [(r.start_row, r.end_row, r.rows) for r in regions] == [(b"", b"b", 1), (b"b", None, 1)]


def test_single_fat_row_is_unsplittable():
    kv = KVStore(max_region_size=100)
    kv.create_table(T)
    for i in range(20):
        kv.put(T, b"fat", "p", b"c", b"v%d" % i)
    regions = kv.split_check(T)
    assert len(regions) == 1 and regions[0].size > 100 and regions[0].rows == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.binary(min_size=1, max_size=6), st.binary(max_size=40)), max_size=120),
       st.integers(min_value=40, max_value=400))
def test_region_invariant_after_any_puts(ops, max_size):
    kv = KVStore(max_region_size=max_size)
    kv.create_table(T)
    for row, value in ops:
        kv.put(T, row, "p", b"c", value)
    check_region_invariants(kv)
    kv.split_check(T)
    check_region_invariants(kv)
    assert [r for _, s in kv.partitioned_scan(T) for r in s] == list(kv.scan(T))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([b"a", b"b", b"c"]), st.sampled_from([b"x", b"y"]),
                          st.sampled_from([b"1", b"2", b"3"])), max_size=40),
       st.sampled_from(["none", "column", "value", "column_value"]))
def test_server_filter_equals_client_filter(ops, kind):
    kv = KVStore()
    kv.create_table(T)
    for row, col, val in ops:
        kv.put(T, row, "p", col, val)
    flt = FilterSpec(kind, column=b"x" if "column" in kind else None,
                     value=b"2" if "value" in kind else None)
    for row in (b"a", b"b", b"c"):
        server = kv.get(T, row, flt).cells
        client = tuple(c for c in kv.get(T, row).cells if flt.accepts(c.column, c.value))
        assert server == client


def test_timestamps_strictly_increase():
    kv = KVStore()
    kv.create_table(T)
    for i in range(10):
        kv.put(T, b"r", "p", b"c", b"%d" % i)
    ts = [c.timestamp for c in kv.get(T, b"r").cells]
    assert ts == sorted(ts, reverse=True) and len(set(ts)) == 10


# -- persistence ------------------------------------------------------------------

def test_record_key_round_trip_with_nul_in_row():
    key = encode_record_key(b"cls\x00subj", "p", b"col", 42)
    assert decode_record_key(key) == (b"cls\x00subj", "p", b"col", 42)
    # newer timestamps sort first
    assert encode_record_key(b"r", "p", b"c", 9) < encode_record_key(b"r", "p", b"c", 3)


def test_persist_open_round_trip(tmp_path):
    kv = random_store(3)
    kv.create_table("T_ops")
    kv.put("T_ops", b"C\x00s", "p", b"type", b"s")
    kv.persist(tmp_path)
    back = KVStore.open(tmp_path)
    assert set(back.tables) == set(kv.tables)
    for name in kv.tables:
        assert list(back.scan(name)) == list(kv.scan(name))
        assert [(r.start_row, r.end_row, r.size, r.rows) for r in back.regions(name)] == \
               [(r.start_row, r.end_row, r.size, r.rows) for r in kv.regions(name)]
    assert back._clock == kv._clock
    back.put(T, b"new", "p", b"c", b"v")
    assert back.get(T, b"new").cells[0].timestamp == kv._clock + 1


def test_file_layout_and_checksum(tmp_path, kv):
    kv.persist(tmp_path)
    data = (tmp_path / "T_spo.sst").read_bytes()
    body, (crc,) = data[:-8], struct.unpack(">Q", data[-8:])
    assert crc == crc64_we_bitwise(body)
    keys, pos = [], 0
    while pos < len(body):
        (klen,) = struct.unpack_from(">I", body, pos)
        keys.append(body[pos + 4:pos + 4 + klen])
        pos += 4 + klen
        (vlen,) = struct.unpack_from(">I", body, pos)
        pos += 4 + vlen
    assert keys == sorted(keys) and len(keys) == 9
    manifest = (tmp_path / "MANIFEST").read_text().splitlines()
    assert "table\tT_spo" in manifest


def test_crc_check_value():
    assert crc64_we_bitwise(b"123456789") == 0x62EC59E3F1A4F00A


def test_open_empty_directory(tmp_path):
    kv = KVStore.open(tmp_path)
    assert kv.tables == {}


def test_open_truncated_file(tmp_path, kv):
    kv.persist(tmp_path)
    path = tmp_path / "T_spo.sst"
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptFileError):
        KVStore.open(tmp_path)


def test_open_flipped_byte(tmp_path, kv):
    kv.persist(tmp_path)
    path = tmp_path / "T_spo.sst"
    data = bytearray(path.read_bytes())
    data[10] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptFileError):
        KVStore.open(tmp_path)
