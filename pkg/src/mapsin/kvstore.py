"""Embedded Bigtable-style sorted map.

Tables map ``row -> (family, column) -> [versions]``. Rows are kept in
lexicographic byte order and sharded into regions of contiguous row ranges
that split at the byte-size median once they outgrow ``max_region_size``.

Every read goes through a :class:`Meter` so callers (the join executor in
particular) can account for GET requests, scanned rows and returned cells
without keeping their own bookkeeping.
"""

from __future__ import annotations

import bisect
import os
import struct
import threading
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import crcmod.predefined

DEFAULT_MAX_REGION_SIZE = 64 * 1024
DEFAULT_FAMILY = "p"

MANIFEST_NAME = "MANIFEST"
TABLE_SUFFIX = ".sst"

# timestamp cost per cell in region accounting
_TS_BYTES = 8
_U64_MAX = (1 << 64) - 1

_crc64 = crcmod.predefined.mkCrcFun("crc-64-we")


class StoreError(Exception):
    pass


class UnknownTableError(StoreError, KeyError):
    def __str__(self):
        return f"unknown table: {self.args[0]!r}"


class InvertedRangeError(StoreError, ValueError):
    pass


class CorruptFileError(StoreError):
    pass


@dataclass(frozen=True)
class CellKey:
    table: str
    row: bytes
    family: str
    column: bytes
    timestamp: int


class Cell(NamedTuple):
    family: str
    column: bytes
    timestamp: int
    value: bytes

    @property
    def nbytes(self) -> int:
        return len(self.column) + len(self.value)


@dataclass(frozen=True)
class RowResult:
    row: bytes
    cells: tuple[Cell, ...] = ()

    def __bool__(self):
        return bool(self.cells)

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True)
class FilterSpec:
    """Server-side cell filter (predicate push-down)."""

    kind: str = "none"
    column: bytes | None = None
    value: bytes | None = None

    KINDS = ("none", "column", "value", "column_value")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        wants_col = self.kind in ("column", "column_value")
        wants_val = self.kind in ("value", "column_value")
        if wants_col != (self.column is not None):
            raise ValueError(f"filter {self.kind!r}: column presence mismatch")
        if wants_val != (self.value is not None):
            raise ValueError(f"filter {self.kind!r}: value presence mismatch")

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def column_equals(cls, column: bytes):
        return cls("column", column=column)

    @classmethod
    def value_equals(cls, value: bytes):
        return cls("value", value=value)

    @classmethod
    def column_and_value(cls, column: bytes, value: bytes):
        return cls("column_value", column=column, value=value)

    def accepts(self, column: bytes, value: bytes) -> bool:
        if self.column is not None and column != self.column:
            return False
        if self.value is not None and value != self.value:
            return False
        return True

    def __str__(self):
        if self.kind == "none":
            return "none"
        parts = []
        if self.column is not None:
            parts.append(f"column={self.column!r}")
        if self.value is not None:
            parts.append(f"value={self.value!r}")
        return f"{self.kind}({', '.join(parts)})"


NO_FILTER = FilterSpec()


@dataclass
class Region:
    table: str
    start_row: bytes
    end_row: bytes | None  # None = unbounded
    size: int = 0
    rows: int = 0

    def contains(self, row: bytes) -> bool:
        return row >= self.start_row and (self.end_row is None or row < self.end_row)


@dataclass
class MeterSnapshot:
    get_requests: int = 0
    rows_scanned: int = 0
    cells_fetched: int = 0
    bytes_fetched: int = 0

    def __sub__(self, other: "MeterSnapshot") -> "MeterSnapshot":
        return MeterSnapshot(
            self.get_requests - other.get_requests,
            self.rows_scanned - other.rows_scanned,
            self.cells_fetched - other.cells_fetched,
            self.bytes_fetched - other.bytes_fetched,
        )


class Meter:
    """Thread-safe read counters."""

    def __init__(self):
        self._lock = threading.Lock()
        self._s = MeterSnapshot()

    def record_get(self, cells: Iterable[Cell]):
        n = b = 0
        for c in cells:
            n += 1
            b += c.nbytes
        with self._lock:
            self._s.get_requests += 1
            self._s.cells_fetched += n
            self._s.bytes_fetched += b

    def record_scan_row(self, cells: Iterable[Cell]):
        n = b = 0
        for c in cells:
            n += 1
            b += c.nbytes
        with self._lock:
            self._s.rows_scanned += 1
            self._s.cells_fetched += n
            self._s.bytes_fetched += b

    def snapshot(self) -> MeterSnapshot:
        with self._lock:
            return MeterSnapshot(**vars(self._s))

    def reset(self):
        with self._lock:
            self._s = MeterSnapshot()


def _cell_size(row: bytes, family: str, column: bytes, value: bytes) -> int:
    return len(row) + len(family) + len(column) + len(value) + _TS_BYTES


class Table:
    def __init__(self, name: str, max_region_size: int):
        self.name = name
        self.max_region_size = max_region_size
        self._keys: list[bytes] = []
        # row -> {(family, column): [(ts, value), ...] ascending ts}
        self._rows: dict[bytes, dict[tuple[str, bytes], list[tuple[int, bytes]]]] = {}
        self._row_size: dict[bytes, int] = {}
        self.regions: list[Region] = [Region(name, b"", None)]

    # -- region bookkeeping -------------------------------------------------

    def _region_index(self, row: bytes) -> int:
        starts = [r.start_row for r in self.regions]
        return bisect.bisect_right(starts, row) - 1

    def _rows_in(self, region: Region) -> list[bytes]:
        lo = bisect.bisect_left(self._keys, region.start_row)
        hi = len(self._keys) if region.end_row is None else bisect.bisect_left(self._keys, region.end_row)
        return self._keys[lo:hi]

    def _split_region(self, idx: int) -> bool:
        region = self.regions[idx]
        if region.size <= self.max_region_size or region.rows < 2:
            return False
        rows = self._rows_in(region)
        half = region.size / 2
        acc = 0
        cut = 1
        for i, r in enumerate(rows):
            acc += self._row_size[r]
            if acc >= half:
                cut = i + 1
                break
        # never leave an empty side
        cut = min(max(cut, 1), len(rows) - 1)
        split_key = rows[cut]
        left_rows, right_rows = rows[:cut], rows[cut:]
        left = Region(self.name, region.start_row, split_key,
                      sum(self._row_size[r] for r in left_rows), len(left_rows))
        right = Region(self.name, split_key, region.end_row,
                       sum(self._row_size[r] for r in right_rows), len(right_rows))
        self.regions[idx:idx + 1] = [left, right]
        return True

    def split_check(self) -> list[Region]:
        i = 0
        while i < len(self.regions):
            if not self._split_region(i):
                i += 1
        return list(self.regions)

    def set_boundaries(self, starts: list[bytes]):
        if not starts or starts[0] != b"":
            raise CorruptFileError(f"{self.name}: region boundaries must start at the empty key")
        self.regions = [
            Region(self.name, s, starts[i + 1] if i + 1 < len(starts) else None)
            for i, s in enumerate(starts)
        ]
        for region in self.regions:
            rows = self._rows_in(region)
            region.rows = len(rows)
            region.size = sum(self._row_size[r] for r in rows)

    # -- data ---------------------------------------------------------------

    def put(self, row: bytes, family: str, column: bytes, value: bytes, ts: int):
        cols = self._rows.get(row)
        new_row = cols is None
        if new_row:
            cols = self._rows[row] = {}
            self._row_size[row] = 0
            bisect.insort(self._keys, row)
        cols.setdefault((family, column), []).append((ts, value))
        size = _cell_size(row, family, column, value)
        self._row_size[row] += size
        idx = self._region_index(row)
        region = self.regions[idx]
        region.size += size
        if new_row:
            region.rows += 1
        if region.size > self.max_region_size and region.rows >= 2:
            while self._split_region(idx):
                # the row we just wrote may now live in either half
                idx = self._region_index(row)

    def has_cell(self, row: bytes, family: str, column: bytes, value: bytes) -> bool:
        cols = self._rows.get(row)
        if not cols:
            return False
        return any(v == value for _, v in cols.get((family, column), ()))

    def read_row(self, row: bytes, flt: FilterSpec) -> tuple[Cell, ...]:
        cols = self._rows.get(row)
        if not cols:
            return ()
        want_col, want_val = flt.column, flt.value
        out = []
        for (family, column) in sorted(cols):
            if want_col is not None and column != want_col:
                continue
            for ts, value in reversed(cols[(family, column)]):
                if want_val is None or value == want_val:
                    out.append(Cell(family, column, ts, value))
        return tuple(out)

    def row_keys(self, start: bytes, end: bytes | None) -> list[bytes]:
        lo = bisect.bisect_left(self._keys, start)
        hi = len(self._keys) if end is None else bisect.bisect_left(self._keys, end)
        return self._keys[lo:hi]

    def iter_cells(self) -> Iterator[tuple[bytes, str, bytes, int, bytes]]:
        for row in self._keys:
            cols = self._rows[row]
            for (family, column) in sorted(cols):
                for ts, value in cols[(family, column)]:
                    yield row, family, column, ts, value

    @property
    def cell_count(self) -> int:
        return sum(len(v) for cols in self._rows.values() for v in cols.values())

    def __len__(self):
        return len(self._keys)


class KVStore:
    """A set of sorted tables with region sharding and read metering.

    Writes are expected during a load phase only; once loading is done the
    store is safe for concurrent readers.
    """

    def __init__(self, max_region_size: int = DEFAULT_MAX_REGION_SIZE):
        if max_region_size <= 0:
            raise ValueError("max_region_size must be positive")
        self.max_region_size = max_region_size
        self.tables: dict[str, Table] = {}
        self.meter = Meter()
        self._clock = 0

    def create_table(self, name: str) -> Table:
        if name not in self.tables:
            self.tables[name] = Table(name, self.max_region_size)
        return self.tables[name]

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise UnknownTableError(name) from None

    def _tick(self) -> int:
        self._clock += 1
        return self._clock

    def put(self, table: str, row: bytes, family: str, column: bytes, value: bytes):
        t = self.table(table)
        if not row:
            raise ValueError("row key must be non-empty")
        if b"\x00" in column or "\x00" in family:
            raise ValueError("family and column must not contain 0x00")
        t.put(bytes(row), family, bytes(column), bytes(value), self._tick())

    def has_cell(self, table: str, row: bytes, family: str, column: bytes, value: bytes) -> bool:
        """Unmetered existence probe used by loaders for duplicate detection."""
        return self.table(table).has_cell(row, family, column, value)

    def get(self, table: str, row: bytes, filter: FilterSpec = NO_FILTER) -> RowResult:
        cells = self.table(table).read_row(row, filter)
        self.meter.record_get(cells)
        return RowResult(row, cells)

    def multi_get(self, table: str, row: bytes, filters: list[FilterSpec]) -> RowResult:
        """One GET returning the cells that pass any of ``filters``."""
        t = self.table(table)
        if not filters or any(f.kind == "none" for f in filters):
            cells = t.read_row(row, NO_FILTER)
        else:
            cells = tuple(c for c in t.read_row(row, NO_FILTER)
                          if any(f.accepts(c.column, c.value) for f in filters))
        self.meter.record_get(cells)
        return RowResult(row, cells)

    def scan(self, table: str, start_row: bytes = b"", end_row: bytes | None = None,
             filter: FilterSpec = NO_FILTER) -> Iterator[RowResult]:
        t = self.table(table)
        if end_row is not None and start_row > end_row:
            raise InvertedRangeError(f"scan start {start_row!r} > end {end_row!r}")
        return self._scan_rows(t, t.row_keys(start_row, end_row), filter)

    def _scan_rows(self, t: Table, keys: list[bytes], flt: FilterSpec) -> Iterator[RowResult]:
        for row in keys:
            cells = t.read_row(row, flt)
            self.meter.record_scan_row(cells)
            if cells:
                yield RowResult(row, cells)

    def partitioned_scan(self, table: str, filter: FilterSpec = NO_FILTER,
                         start_row: bytes = b"", end_row: bytes | None = None
                         ) -> list[tuple[int, Iterator[RowResult]]]:
        """One scan stream per region overlapping ``[start_row, end_row)``.

        Without a range this yields exactly one partition per region.
        """
        t = self.table(table)
        if end_row is not None and start_row > end_row:
            raise InvertedRangeError(f"scan start {start_row!r} > end {end_row!r}")
        parts = []
        for rid, region in enumerate(t.regions):
            if region.end_row is not None and region.end_row <= start_row:
                continue
            if end_row is not None and region.start_row >= end_row:
                continue
            lo = max(region.start_row, start_row)
            if region.end_row is None or end_row is None:
                hi = end_row if region.end_row is None else region.end_row
            else:
                hi = min(region.end_row, end_row)
            parts.append((rid, self._scan_rows(t, t.row_keys(lo, hi), filter)))
        return parts

    def split_check(self, table: str) -> list[Region]:
        return self.table(table).split_check()

    def regions(self, table: str) -> list[Region]:
        return list(self.table(table).regions)

    # -- persistence --------------------------------------------------------

    def persist(self, directory: str | os.PathLike):
        os.makedirs(directory, exist_ok=True)
        manifest = [f"max_region_size\t{self.max_region_size}", f"clock\t{self._clock}"]
        for name, t in sorted(self.tables.items()):
            manifest.append(f"table\t{name}")
            for region in t.regions:
                manifest.append(f"region\t{name}\t{region.start_row.hex()}")
            _write_table_file(os.path.join(directory, name + TABLE_SUFFIX), t)
        tmp = os.path.join(directory, MANIFEST_NAME + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("\n".join(manifest) + "\n")
        os.replace(tmp, os.path.join(directory, MANIFEST_NAME))

    @classmethod
    def open(cls, directory: str | os.PathLike) -> "KVStore":
        path = os.path.join(directory, MANIFEST_NAME)
        if not os.path.isdir(directory):
            raise FileNotFoundError(directory)
        if not os.path.exists(path):
            return cls()
        max_size = DEFAULT_MAX_REGION_SIZE
        clock = 0
        boundaries: dict[str, list[bytes]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                try:
                    if parts[0] == "max_region_size":
                        max_size = int(parts[1])
                    elif parts[0] == "clock":
                        clock = int(parts[1])
                    elif parts[0] == "table":
                        boundaries[parts[1]] = []
                    elif parts[0] == "region":
                        boundaries[parts[1]].append(bytes.fromhex(parts[2]))
                    else:
                        raise ValueError(parts[0])
                except (IndexError, ValueError, KeyError) as exc:
                    raise CorruptFileError(f"{path}:{lineno}: bad manifest record") from exc
        store = cls(max_size)
        for name, starts in boundaries.items():
            t = store.create_table(name)
            _read_table_file(os.path.join(directory, name + TABLE_SUFFIX), t)
            t.set_boundaries(starts)
        store._clock = clock
        return store


def encode_record_key(row: bytes, family: str, column: bytes, ts: int) -> bytes:
    return b"\x00".join((row, family.encode(), column)) + b"\x00" + struct.pack(">Q", _U64_MAX - ts)


def decode_record_key(key: bytes) -> tuple[bytes, str, bytes, int]:
    if len(key) < 9 or key[-9] != 0:
        raise CorruptFileError("malformed record key")
    ts = _U64_MAX - struct.unpack(">Q", key[-8:])[0]
    head = key[:-9]
    # family and column never contain 0x00; the row may (compound keys)
    rest, sep, column = head.rpartition(b"\x00")
    row, sep2, family = rest.rpartition(b"\x00")
    if not sep or not sep2 or not row:
        raise CorruptFileError("malformed record key")
    return row, family.decode(), column, ts


def _write_table_file(path: str, t: Table):
    records = sorted((encode_record_key(row, fam, col, ts), val)
                     for row, fam, col, ts, val in t.iter_cells())
    body = bytearray()
    for key, val in records:
        body += struct.pack(">I", len(key)) + key + struct.pack(">I", len(val)) + val
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack(">Q", _crc64(bytes(body))))
    os.replace(tmp, path)


def _read_table_file(path: str, t: Table):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise CorruptFileError(f"{path}: truncated")
    body, (crc,) = data[:-8], struct.unpack(">Q", data[-8:])
    if _crc64(body) != crc:
        raise CorruptFileError(f"{path}: checksum mismatch")
    cells = []
    pos = 0
    try:
        while pos < len(body):
            (klen,) = struct.unpack_from(">I", body, pos)
            key = body[pos + 4:pos + 4 + klen]
            pos += 4 + klen
            (vlen,) = struct.unpack_from(">I", body, pos)
            val = body[pos + 4:pos + 4 + vlen]
            pos += 4 + vlen
            if len(key) != klen or len(val) != vlen:
                raise CorruptFileError(f"{path}: truncated record")
            cells.append((*decode_record_key(key), val))
    except struct.error as exc:
        raise CorruptFileError(f"{path}: truncated record") from exc
    # replay in version order so per-column version lists stay ascending
    cells.sort(key=lambda c: c[3])
    # splitting is driven by the persisted boundaries, not by replay
    saved = t.max_region_size
    t.max_region_size = 1 << 62
    for row, family, column, ts, value in cells:
        t.put(row, family, column, value, ts)
    t.max_region_size = saved
