"""Container format for quantized feature logs, DEFLATE sealing, storage metrics.

Sealed layout (``.nfq``), all integers little-endian::

    magic     4 bytes   b"NFQ1"
    version   u8        1
    bits      u8
    n_feat    u32
    n_rows    u64
    n_feat x  { name_len u16, name UTF-8, lo f64, hi f64 }
    clen      u64       length of the compressed payload
    payload   clen bytes, raw DEFLATE (RFC 1951) of the packed codes

The packed payload holds the codes row-major in feature order, each code
written least-significant bit first, bits filling each byte from its least
significant end; the last byte is zero-padded.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError
from .quantizer import CodeTable, RangeModel, levels
from .tabular import FeatureTable, format_real

__all__ = [
    "MAGIC",
    "VERSION",
    "Container",
    "StorageReport",
    "pack",
    "unpack",
    "seal",
    "unseal",
    "read_container",
    "write_container",
    "pack_bits",
    "unpack_bits",
    "deflate",
    "inflate",
    "canonical_csv",
    "baseline_sizes",
    "reduction_factor",
    "storage_rate",
]

MAGIC = b"NFQ1"
VERSION = 1
DEFAULT_LEVEL = 6

_FIXED = struct.Struct("<4sBBIQ")
_NAME_LEN = struct.Struct("<H")
_RANGE = struct.Struct("<dd")
_CLEN = struct.Struct("<Q")


def deflate(data: bytes, level: int = DEFAULT_LEVEL) -> bytes:
    if not 1 <= level <= 9:
        raise DataError(f"compression level must be in 1..9, got {level}")
    c = zlib.compressobj(level, zlib.DEFLATED, -15)
    return c.compress(data) + c.flush()


def inflate(data: bytes) -> bytes:
    d = zlib.decompressobj(-15)
    try:
        out = d.decompress(data) + d.flush()
    except zlib.error as exc:
        raise FormatError(f"corrupt DEFLATE stream: {exc}") from None
    if not d.eof:
        raise FormatError("corrupt DEFLATE stream: ended before the final block")
    return out


def payload_size(n_values: int, bits: int) -> int:
    return (n_values * bits + 7) // 8


def pack_bits(values: np.ndarray, bits: int) -> bytes:
    """LSB-first bit packing of unsigned integers."""
    levels(bits)
    flat = np.ascontiguousarray(values, dtype=np.uint64).reshape(-1)
    if bits in (8, 16, 32):
        return flat.astype(f"<u{bits // 8}").tobytes()
    shifts = np.arange(bits, dtype=np.uint64)
    bitmat = ((flat[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bitmat.reshape(-1), bitorder="little").tobytes()


def unpack_bits(payload: bytes, n_values: int, bits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`."""
    levels(bits)
    expected = payload_size(n_values, bits)
    if len(payload) != expected:
        raise FormatError(f"payload length mismatch: expected {expected} bytes, got {len(payload)}")
    buf = np.frombuffer(payload, dtype=np.uint8)
    if bits in (8, 16, 32):
        return buf.view(f"<u{bits // 8}").astype(np.uint64)
    bitvec = np.unpackbits(buf, bitorder="little", count=n_values * bits).reshape(n_values, bits)
    weights = np.left_shift(np.uint64(1), np.arange(bits, dtype=np.uint64))
    return (bitvec.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


@dataclass(frozen=True, eq=False)
class Container:
    """Header fields plus the uncompressed packed payload."""

    bits: int
    n_rows: int
    ranges: RangeModel
    payload: bytes
    version: int = VERSION

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.ranges.feature_names

    def header_bytes(self, compressed_len: int) -> bytes:
        parts = [_FIXED.pack(MAGIC, self.version, self.bits, len(self.feature_names), self.n_rows)]
        for name, lo, hi in zip(self.feature_names, self.ranges.lo, self.ranges.hi):
            raw = name.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise DataError(f"feature name longer than 65535 bytes: {name[:40]!r}...")
            parts.append(_NAME_LEN.pack(len(raw)) + raw + _RANGE.pack(lo, hi))
        parts.append(_CLEN.pack(compressed_len))
        return b"".join(parts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Container):
            return NotImplemented
        return (
            self.bits == other.bits
            and self.n_rows == other.n_rows
            and self.version == other.version
            and self.ranges == other.ranges
            and self.payload == other.payload
        )


def pack(codes: CodeTable, ranges: RangeModel) -> Container:
    ranges.check_schema(codes.feature_names)
    return Container(codes.bits, codes.row_count, ranges, pack_bits(codes.codes, codes.bits))


def unpack(container: Container) -> tuple[CodeTable, RangeModel]:
    n_feat = len(container.feature_names)
    flat = unpack_bits(container.payload, container.n_rows * n_feat, container.bits)
    codes = CodeTable(container.feature_names, flat.reshape(container.n_rows, n_feat), container.bits)
    return codes, container.ranges


def seal(container: Container, level: int = DEFAULT_LEVEL) -> bytes:
    """Serialize: uncompressed header, DEFLATE-compressed payload."""
    body = deflate(container.payload, level)
    return container.header_bytes(len(body)) + body


def _take(buf: memoryview, pos: int, n: int, what: str) -> bytes:
    if pos + n > len(buf):
        raise FormatError(f"truncated header while reading {what}: need {pos + n} bytes, file has {len(buf)}")
    return bytes(buf[pos : pos + n])


def unseal(data: bytes) -> Container:
    """Parse sealed bytes back into a :class:`Container`."""
    buf = memoryview(data)
    magic, version, bits, n_feat, n_rows = _FIXED.unpack(_take(buf, 0, _FIXED.size, "fixed header"))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}, this reader handles {VERSION}")
    try:
        levels(bits)
    except DataError:
        raise FormatError(f"invalid bit width {bits} in header") from None
    pos = _FIXED.size
    names, lo, hi = [], [], []
    for j in range(n_feat):
        (nlen,) = _NAME_LEN.unpack(_take(buf, pos, _NAME_LEN.size, f"name length of feature {j}"))
        pos += _NAME_LEN.size
        try:
            names.append(_take(buf, pos, nlen, f"name of feature {j}").decode("utf-8"))
        except UnicodeDecodeError:
            raise FormatError(f"feature {j} name is not valid UTF-8") from None
        pos += nlen
        a, b = _RANGE.unpack(_take(buf, pos, _RANGE.size, f"range of feature {j}"))
        lo.append(a)
        hi.append(b)
        pos += _RANGE.size
    (clen,) = _CLEN.unpack(_take(buf, pos, _CLEN.size, "payload length"))
    pos += _CLEN.size
    actual = len(buf) - pos
    if actual != clen:
        raise FormatError(f"payload length mismatch: header declares {clen} compressed bytes, found {actual}")
    payload = inflate(bytes(buf[pos:]))
    expected = payload_size(n_rows * n_feat, bits)
    if len(payload) != expected:
        raise FormatError(f"payload length mismatch: expected {expected} packed bytes, got {len(payload)}")
    try:
        ranges = RangeModel(tuple(names), np.array(lo), np.array(hi))
    except DataError as exc:
        raise FormatError(f"invalid ranges in header: {exc}") from None
    return Container(bits, n_rows, ranges, payload, version)


def write_container(path: str | Path, container: Container, level: int = DEFAULT_LEVEL) -> int:
    data = seal(container, level)
    Path(path).write_bytes(data)
    return len(data)


def read_container(path: str | Path) -> Container:
    return unseal(Path(path).read_bytes())


def canonical_csv(table: FeatureTable) -> bytes:
    """Features-only CSV: header of names, shortest round-trip reals, ``\\n`` line ends."""
    lines = [",".join(table.feature_names)]
    lines.extend(",".join(map(format_real, row)) for row in table.values)
    return "\n".join(lines).encode("utf-8")


def baseline_sizes(table: FeatureTable, level: int = DEFAULT_LEVEL) -> tuple[int, int]:
    """DEFLATE sizes of the lossless baselines: canonical CSV and raw float32.

    Labels, timestamps and group keys are never counted.
    """
    csv_bytes = len(deflate(canonical_csv(table), level))
    f32_bytes = len(deflate(table.values.astype("<f4").tobytes(), level))
    return csv_bytes, f32_bytes


def reduction_factor(baseline_bytes: float, lossy_bytes: float) -> float:
    if not (baseline_bytes > 0 and lossy_bytes > 0):
        raise DataError(f"reduction factor needs positive sizes, got {baseline_bytes} and {lossy_bytes}")
    return baseline_bytes / lossy_bytes


def storage_rate(n_bytes: float, duration_seconds: float) -> float:
    """Bits per second needed to keep ``n_bytes`` per ``duration_seconds``."""
    if not duration_seconds > 0:
        raise DataError(f"duration must be positive, got {duration_seconds}")
    return 8.0 * n_bytes / duration_seconds


@dataclass(frozen=True)
class StorageReport:
    lossy_bytes: int
    baseline_csv_bytes: int
    baseline_f32_bytes: int
    raw_csv_bytes: int
    reduction_vs_csv: float
    reduction_vs_f32: float
    reduction_vs_raw_csv: float
    bits_per_second: float | None = None
