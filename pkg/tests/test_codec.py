import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featpress.codec import (
    Container,
    baseline_sizes,
    canonical_csv,
    deflate,
    inflate,
    pack,
    pack_bits,
    read_container,
    reduction_factor,
    seal,
    storage_rate,
    unpack,
    unpack_bits,
    unseal,
    write_container,
)
from featpress.errors import DataError, FormatError
from featpress.quantizer import CodeTable, RangeModel, encode, fit_ranges

from conftest import make_table

BITS = [1, 2, 3, 4, 7, 8, 12, 16, 31, 32]

GOLDEN_SEALED = bytes.fromhex(
    "4e46513101030200000003000000000000000100610000000000000000000000000000f03f"
    "010062000000000000f0bf000000000000f03f0500000000000000fb21c50800"
)


def golden_container():
    r = RangeModel(("a", "b"), [0.0, -1.0], [1.0, 1.0])
    return pack(CodeTable(("a", "b"), [[0, 7], [3, 5], [1, 2]], 3), r)


def test_byte_aligned_pack():
    r = RangeModel(("x",), [0.0], [1.0])
    assert pack(CodeTable(("x",), [[0xAB]], 8), r).payload == b"\xab"


def test_golden_0x39():
    r = RangeModel(("a", "b", "c"), [0.0] * 3, [1.0] * 3)
    c = pack(CodeTable(("a", "b", "c"), [[1, 2, 3]], 2), r)
    assert c.payload == bytes([0b00111001]) == b"\x39"
    codes, _ = unpack(c)
    assert codes.codes.tolist() == [[1, 2, 3]]


def test_golden_three_row_container():
    c = golden_container()
    # 3-bit codes 0,7,3,5,1,2 LSB-first: 000 111 110 101 100 010 -> f8 1a 01
    assert c.payload == bytes.fromhex("f81a01")
    sealed = seal(c)
    header = (
        b"NFQ1"
        + struct.pack("<BBIQ", 1, 3, 2, 3)
        + struct.pack("<H", 1) + b"a" + struct.pack("<dd", 0.0, 1.0)
        + struct.pack("<H", 1) + b"b" + struct.pack("<dd", -1.0, 1.0)
    )
    assert sealed.startswith(header)
    (clen,) = struct.unpack("<Q", sealed[len(header) : len(header) + 8])
    assert clen == len(sealed) - len(header) - 8
    assert inflate(sealed[len(header) + 8 :]) == bytes.fromhex("f81a01")
    assert sealed == GOLDEN_SEALED
    assert unseal(GOLDEN_SEALED) == c


def test_empty_table():
    r = RangeModel(("x", "y"), [0.0, 0.0], [1.0, 1.0])
    c = pack(CodeTable(("x", "y"), np.zeros((0, 2), dtype=np.uint64), 4), r)
    assert c.payload == b""
    back, _ = unpack(unseal(seal(c)))
    assert back.codes.shape == (0, 2)


@st.composite
def code_tables(draw):
    bits = draw(st.sampled_from(BITS))
    n = draw(st.integers(0, 12))
    f = draw(st.integers(1, 5))
    top = 2**bits - 1
    vals = draw(st.lists(st.integers(0, top), min_size=n * f, max_size=n * f))
    names = tuple(f"feat{j}" for j in range(f))
    lo = draw(st.lists(st.floats(-1e9, 1e9), min_size=f, max_size=f))
    width = draw(st.lists(st.floats(0, 1e9), min_size=f, max_size=f))
    r = RangeModel(names, lo, np.array(lo) + np.array(width))
    return CodeTable(names, np.array(vals, dtype=np.uint64).reshape(n, f), bits), r


@settings(max_examples=200, deadline=None)
@given(code_tables(), st.integers(1, 9))
def test_roundtrip_bit_exact(ct, level):
    codes, ranges = ct
    c = pack(codes, ranges)
    assert len(c.payload) == (codes.codes.size * codes.bits + 7) // 8
    back_codes, back_ranges = unpack(unseal(seal(c, level)))
    assert back_codes == codes
    assert back_ranges.to_bytes() == ranges.to_bytes()


@pytest.mark.parametrize("bits", BITS)
def test_pack_bits_matches_bit_string_oracle(bits):
    rng = np.random.default_rng(bits)
    vals = rng.integers(0, 2**bits, size=37, dtype=np.uint64)
    stream = "".join(format(int(v), f"0{bits}b")[::-1] for v in vals)
    stream += "0" * (-len(stream) % 8)
    expected = bytes(int(stream[i : i + 8][::-1], 2) for i in range(0, len(stream), 8))
    assert pack_bits(vals, bits) == expected
    assert np.array_equal(unpack_bits(expected, vals.size, bits), vals)


def test_truncated_payload_message():
    sealed = seal(golden_container())
    with pytest.raises(FormatError, match=r"header declares 5 compressed bytes, found 3"):
        unseal(sealed[:-2])
    with pytest.raises(FormatError, match="truncated header"):
        unseal(sealed[:10])
    with pytest.raises(FormatError, match=r"expected 3 bytes, got 2"):
        unpack(Container(3, 3, golden_container().ranges, b"\x00\x00"))


def test_bad_magic_and_version():
    sealed = bytearray(seal(golden_container()))
    with pytest.raises(FormatError, match="magic"):
        unseal(b"XXXX" + bytes(sealed[4:]))
    sealed[4] = 2
    with pytest.raises(FormatError, match="version 2"):
        unseal(bytes(sealed))


def test_corrupt_stream():
    sealed = seal(golden_container())
    header_len = len(sealed) - 5
    with pytest.raises(FormatError):
        unseal(sealed[:header_len] + b"\xff\xff\xff\xff\xff")


def test_pack_dimension_mismatch():
    r = RangeModel(("a",), [0.0], [1.0])
    with pytest.raises(DataError):
        pack(CodeTable(("b",), [[1]], 2), r)


def test_file_roundtrip(tmp_path):
    p = tmp_path / "g.nfq"
    n = write_container(p, golden_container())
    assert n == len(GOLDEN_SEALED)
    assert read_container(p) == golden_container()


def test_identical_bytes_compress_well():
    data = b"\x07" * 10_000
    assert len(deflate(data)) < 0.05 * len(data)
    r = RangeModel(("x",), [0.0], [255.0])
    c = pack(CodeTable(("x",), np.full((10_000, 1), 7, dtype=np.uint64), 8), r)
    assert len(seal(c)) < 0.05 * 10_000 + 100


def test_sealed_size_monotone_on_reference(reference_table):
    t = reference_table.take(np.arange(1000))
    t = t.with_features(t.feature_names[:20], t.values[:, :20])
    assert t.values.shape == (1000, 20)
    r = fit_ranges(t)
    sizes = {b: len(seal(pack(encode(t, r, b), r))) for b in (2, 8, 16)}
    assert sizes[2] < sizes[8] < sizes[16]
    assert sizes == {2: 3370, 8: 18531, 16: 37985}  # frozen goldens


def test_baseline_sizes_features_only(tmp_path):
    a = make_table([[1.5, 2.0], [3.25, -4.0]], ["x", "y"])
    b = make_table([[1.5, 2.0], [3.25, -4.0]], ["u", "v"], timestamps=[1.0, 2.0], groups=["g", "h"])
    assert baseline_sizes(a) == baseline_sizes(b)
    assert canonical_csv(a) == b"x0,x1\n1.5,2.0\n3.25,-4.0"


def test_baseline_empty_table():
    t = make_table(np.zeros((0, 2)), [], classes=["c"])
    csv_b, f32_b = baseline_sizes(t)
    assert csv_b == len(deflate(b"x0,x1"))
    assert f32_b == len(deflate(b""))


def test_reference_baselines(reference_split):
    _, test = reference_split
    csv_b, f32_b = baseline_sizes(test)
    assert csv_b > f32_b
    assert (csv_b, f32_b) == (165295, 67799)


def test_reduction_factor():
    assert reduction_factor(100, 100) == 1.0
    assert reduction_factor(210, 70) == pytest.approx(3.0)
    assert 2.98 <= reduction_factor(14.9, 5.0) <= reduction_factor(14.9, 3.0) <= 4.97
    with pytest.raises(DataError):
        reduction_factor(0, 10)


def test_storage_rate():
    assert storage_rate(210_000, 86_400) == pytest.approx(19.44, abs=0.01)
    assert storage_rate(0, 10) == 0.0
    assert storage_rate(1000, 20) == storage_rate(1000, 10) / 2
    with pytest.raises(DataError):
        storage_rate(1, 0)
