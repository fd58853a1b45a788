"""Readers and writers for the on-disk formats.

All binary layouts are little-endian and densely packed:

* text events  — UTF-8 lines ``t_us,x,y,p``; ``#`` starts a comment line.
* EVH1 events  — 16-byte header (magic ``EVH1``, u16 width, u16 height,
  u32 record_count, u32 reserved=0) followed by 13-byte records
  (u64 t_us, u16 x, u16 y, i8 p with p in {+1, -1}).
* HTF1 tensors — magic ``HTF1``, u32 height, u32 width, u32 channels,
  u32 dtype (0 = u8, 1 = f32), then planar row-major channel data.
* HTS1 state   — magic ``HTS1``, u32 height, u32 width, i64
  last_window_index (-1 = unset), then the two polarity state maps as
  f32 row-major planes.
* FHW1 weights — magic ``FHW1``, u32 version, then named tensors:
  u16 name length, UTF-8 name, u8 rank, u32 dims..., f32 data.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .errors import ParseError
from .events import EventArray, SensorGeometry

Source = Union[str, Path, bytes, BinaryIO]

EVH1_MAGIC = b"EVH1"
EVH1_HEADER = struct.Struct("<4sHHII")
EVH1_RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
assert EVH1_RECORD_DTYPE.itemsize == 13

HTF1_MAGIC = b"HTF1"
HTF1_HEADER = struct.Struct("<4sIIII")
HTF1_DTYPES = {0: np.dtype("u1"), 1: np.dtype("<f4")}

HTS1_MAGIC = b"HTS1"
HTS1_HEADER = struct.Struct("<4sIIq")

FHW1_MAGIC = b"FHW1"


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    return source.read()


def _open_sink(target) -> tuple[BinaryIO, bool]:
    if isinstance(target, (str, Path)):
        return open(target, "wb"), True
    return target, False


def _enforce_sorted(events: EventArray, allow_unsorted: bool) -> EventArray:
    if events.is_sorted():
        return events
    if not allow_unsorted:
        drop = np.argmax(events.t[1:] < events.t[:-1])
        raise ParseError(
            f"decreasing timestamp at event {int(drop) + 1} "
            f"({int(events.t[drop + 1])} after {int(events.t[drop])}); "
            "pass allow_unsorted to sort"
        )
    return events.stable_sorted()


# ---------------------------------------------------------------------------
# text event files


def parse_text_stream(
    source: Source,
    geometry: SensorGeometry,
    *,
    polarity_zero_neg: bool = False,
    allow_unsorted: bool = False,
) -> EventArray:
    """Parse ``t_us,x,y,p`` lines into an EventArray in file order.

    Polarity is +1/-1 by default; with ``polarity_zero_neg`` the file is
    expected to use the 1/0 convention and 0 maps to -1. Timestamps must be
    non-decreasing unless ``allow_unsorted`` requests a stable sort.
    """
    raw = _read_bytes(source)
    tl, xl, yl, pl = [], [], [], []
    accepted = "{1, 0}" if polarity_zero_neg else "{1, -1}"
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        parts = body.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 comma-separated fields, got {len(parts)}",
                             line=lineno)
        try:
            t, x, y, p = (int(f.strip()) for f in parts)
        except ValueError:
            raise ParseError(f"non-integer field in {body!r}", line=lineno) from None
        if t < 0:
            raise ParseError(f"negative timestamp {t}", line=lineno)
        if not (0 <= x < geometry.width and 0 <= y < geometry.height):
            raise ParseError(
                f"coordinate ({x},{y}) outside {geometry.width}x{geometry.height}",
                line=lineno)
        if polarity_zero_neg:
            if p not in (0, 1):
                raise ParseError(f"polarity {p} not in {accepted}", line=lineno)
            p = 1 if p == 1 else -1
        elif p not in (-1, 1):
            raise ParseError(f"polarity {p} not in {accepted}", line=lineno)
        tl.append(t), xl.append(x), yl.append(y), pl.append(p)
    if not tl:
        return EventArray.empty()
    return _enforce_sorted(EventArray.from_arrays(tl, xl, yl, pl), allow_unsorted)


def write_text_stream(target, events: EventArray) -> None:
    sink, own = _open_sink(target)
    try:
        lines = [f"{int(t)},{int(x)},{int(y)},{int(p)}\n"
                 for t, x, y, p in zip(events.t, events.x, events.y, events.p)]
        sink.write("".join(lines).encode("utf-8"))
    finally:
        if own:
            sink.close()


# ---------------------------------------------------------------------------
# EVH1 binary event files


def parse_evh1(
    source: Source,
    geometry: SensorGeometry | None = None,
    *,
    allow_unsorted: bool = False,
) -> tuple[EventArray, SensorGeometry]:
    """Decode an EVH1 file; returns the events and the header geometry.

    When ``geometry`` is given it must match the header. Record count and
    byte length are cross-checked, so truncation is always detected.
    """
    raw = _read_bytes(source)
    if len(raw) < EVH1_HEADER.size:
        raise ParseError("file shorter than EVH1 header", offset=len(raw))
    magic, width, height, count, reserved = EVH1_HEADER.unpack_from(raw, 0)
    if magic != EVH1_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {EVH1_MAGIC!r}", offset=0)
    if reserved != 0:
        raise ParseError(f"reserved field must be zero, got {reserved}", offset=12)
    body = len(raw) - EVH1_HEADER.size
    if body % EVH1_RECORD_DTYPE.itemsize != 0:
        good = body - body % EVH1_RECORD_DTYPE.itemsize
        raise ParseError(
            f"truncated record: {body % EVH1_RECORD_DTYPE.itemsize} trailing bytes",
            offset=EVH1_HEADER.size + good)
    n = body // EVH1_RECORD_DTYPE.itemsize
    if n != count:
        raise ParseError(f"header claims {count} records, file holds {n}",
                         offset=EVH1_HEADER.size)
    file_geom = SensorGeometry(width=width, height=height)
    if geometry is not None and geometry != file_geom:
        raise ParseError(
            f"header geometry {width}x{height} does not match expected "
            f"{geometry.width}x{geometry.height}", offset=4)

    records = np.frombuffer(raw, EVH1_RECORD_DTYPE, count=n, offset=EVH1_HEADER.size)
    p = records["p"]
    bad = (p != 1) & (p != -1)
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(
            f"invalid polarity byte {int(p[i])} in record {i}",
            offset=EVH1_HEADER.size + i * EVH1_RECORD_DTYPE.itemsize + 12)
    events = EventArray.from_arrays(records["t"], records["x"], records["y"], p)
    events.check_bounds(file_geom)
    return _enforce_sorted(events, allow_unsorted), file_geom


def write_evh1(target, events: EventArray, geometry: SensorGeometry) -> None:
    records = np.empty(len(events), EVH1_RECORD_DTYPE)
    records["t"], records["x"], records["y"], records["p"] = (
        events.t, events.x, events.y, events.p)
    sink, own = _open_sink(target)
    try:
        sink.write(EVH1_HEADER.pack(EVH1_MAGIC, geometry.width, geometry.height,
                                    len(events), 0))
        sink.write(records.tobytes())
    finally:
        if own:
            sink.close()


# ---------------------------------------------------------------------------
# HTF1 tensor files (planar channel data)


def write_htf1(target, data: np.ndarray) -> None:
    """Write a (channels, height, width) array; dtype must be u8 or f32."""
    if data.ndim != 3:
        raise ValueError(f"expected (channels, height, width), got shape {data.shape}")
    if data.dtype == np.uint8:
        code = 0
    elif data.dtype == np.float32:
        code = 1
    else:
        raise ValueError(f"unsupported dtype {data.dtype}; use u8 or f32")
    c, h, w = data.shape
    sink, own = _open_sink(target)
    try:
        sink.write(HTF1_HEADER.pack(HTF1_MAGIC, h, w, c, code))
        out = data.astype(data.dtype.newbyteorder("<"), copy=False)
        sink.write(np.ascontiguousarray(out).tobytes())
    finally:
        if own:
            sink.close()


def read_htf1(source: Source) -> np.ndarray:
    raw = _read_bytes(source)
    if len(raw) < HTF1_HEADER.size:
        raise ParseError("file shorter than HTF1 header", offset=len(raw))
    magic, h, w, c, code = HTF1_HEADER.unpack_from(raw, 0)
    if magic != HTF1_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {HTF1_MAGIC!r}", offset=0)
    if code not in HTF1_DTYPES:
        raise ParseError(f"unknown dtype code {code}", offset=16)
    dtype = HTF1_DTYPES[code]
    expected = c * h * w * dtype.itemsize
    body = len(raw) - HTF1_HEADER.size
    if body != expected:
        raise ParseError(f"payload is {body} bytes, header implies {expected}",
                         offset=HTF1_HEADER.size + min(body, expected))
    data = np.frombuffer(raw, dtype, count=c * h * w, offset=HTF1_HEADER.size)
    return data.reshape(c, h, w).copy()


# ---------------------------------------------------------------------------
# HTS1 encoder-state checkpoints


def write_hts1(target, m_plus: np.ndarray, m_minus: np.ndarray,
               last_window_index: int | None) -> None:
    if m_plus.shape != m_minus.shape or m_plus.ndim != 2:
        raise ValueError("state maps must be two matching 2-D maps")
    h, w = m_plus.shape
    idx = -1 if last_window_index is None else int(last_window_index)
    sink, own = _open_sink(target)
    try:
        sink.write(HTS1_HEADER.pack(HTS1_MAGIC, h, w, idx))
        sink.write(np.ascontiguousarray(m_plus, "<f4").tobytes())
        sink.write(np.ascontiguousarray(m_minus, "<f4").tobytes())
    finally:
        if own:
            sink.close()


def read_hts1(source: Source) -> tuple[np.ndarray, np.ndarray, int | None]:
    raw = _read_bytes(source)
    if len(raw) < HTS1_HEADER.size:
        raise ParseError("file shorter than HTS1 header", offset=len(raw))
    magic, h, w, idx = HTS1_HEADER.unpack_from(raw, 0)
    if magic != HTS1_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {HTS1_MAGIC!r}", offset=0)
    plane = h * w * 4
    if len(raw) != HTS1_HEADER.size + 2 * plane:
        raise ParseError("state payload size mismatch", offset=len(raw))
    m_plus = np.frombuffer(raw, "<f4", count=h * w, offset=HTS1_HEADER.size)
    m_minus = np.frombuffer(raw, "<f4", count=h * w, offset=HTS1_HEADER.size + plane)
    return (m_plus.reshape(h, w).copy(), m_minus.reshape(h, w).copy(),
            None if idx < 0 else idx)


# ---------------------------------------------------------------------------
# FHW1 named-tensor files


def write_fhw1(target, tensors: dict[str, np.ndarray], version: int = 1) -> None:
    """Write named f32 tensors in dict order. Scalars are rank-0 entries."""
    sink, own = _open_sink(target)
    try:
        sink.write(FHW1_MAGIC)
        sink.write(struct.pack("<I", version))
        for name, tensor in tensors.items():
            arr = np.asarray(tensor, dtype="<f4")
            encoded = name.encode("utf-8")
            sink.write(struct.pack("<H", len(encoded)))
            sink.write(encoded)
            sink.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                sink.write(struct.pack("<I", dim))
            sink.write(arr.tobytes())
    finally:
        if own:
            sink.close()


def read_fhw1(source: Source) -> dict[str, np.ndarray]:
    raw = _read_bytes(source)
    if len(raw) < 8:
        raise ParseError("file shorter than FHW1 header", offset=len(raw))
    if raw[:4] != FHW1_MAGIC:
        raise ParseError(f"bad magic {raw[:4]!r}, expected {FHW1_MAGIC!r}", offset=0)
    pos = 8
    tensors: dict[str, np.ndarray] = {}
    while pos < len(raw):
        try:
            (name_len,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            if len(raw) < pos + name_len:
                raise struct.error("name truncated")
            name = raw[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", raw, pos)
            pos += 4 * rank
        except struct.error:
            raise ParseError("truncated tensor table entry", offset=pos) from None
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        nbytes = count * 4
        if len(raw) < pos + nbytes:
            raise ParseError(f"tensor {name!r} data truncated", offset=pos)
        data = np.frombuffer(raw, "<f4", count=count, offset=pos).copy()
        pos += nbytes
        tensors[name] = data.reshape(dims) if rank else data.reshape(())
    return tensors
