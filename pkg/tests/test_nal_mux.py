import random

import pytest
from hypothesis import given, settings, strategies as st

from gfvsei.errors import MalformedStreamError, RangeError, TruncationError
from gfvsei.nal_mux import (
    AccessUnitStream,
    CodecFamily,
    NalUnit,
    SeiMessage,
    build_sei_nal,
    escape_emulation,
    insert_sei,
    join_annexb,
    make_header,
    parse_sei_nal,
    split_annexb,
    split_nal_units,
    strip_sei,
    unescape_emulation,
)

from conftest import adversarial_bytes, random_base_stream


def has_forbidden_triple(data: bytes) -> bool:
    return any(data[i] == 0 and data[i + 1] == 0 and data[i + 2] <= 2
               for i in range(len(data) - 2))


@pytest.mark.parametrize("raw,escaped", [
    (b"\x00\x00\x01", b"\x00\x00\x03\x01"),
    (b"\x00\x00\x03", b"\x00\x00\x03\x03"),
    (b"\x01\x02\x04", b"\x01\x02\x04"),
    (b"\x00\x00\x00\x00", b"\x00\x00\x03\x00\x00\x03"),
])
def test_escape_examples(raw, escaped):
    assert escape_emulation(raw) == escaped
    assert unescape_emulation(escaped) == raw


def test_unescape_rejects_forbidden():
    with pytest.raises(MalformedStreamError):
        unescape_emulation(b"\x00\x00\x02\x05")
    with pytest.raises(MalformedStreamError):
        unescape_emulation(b"\x11\x00\x00\x00")


@given(st.binary(max_size=200))
def test_escape_roundtrip(data):
    esc = escape_emulation(data)
    assert unescape_emulation(esc) == data
    assert not has_forbidden_triple(esc)
    assert not esc.endswith(b"\x00\x00")


@given(st.integers(0, 2 ** 32).map(random.Random).map(lambda r: adversarial_bytes(r, r.randint(0, 300))))
def test_escape_roundtrip_zero_runs(data):
    esc = escape_emulation(data)
    assert unescape_emulation(esc) == data
    assert not has_forbidden_triple(esc)


@pytest.mark.parametrize("family,header", [
    (CodecFamily.AVC, b"\x06"),
    (CodecFamily.HEVC, b"\x4e\x01"),
    (CodecFamily.VVC, b"\x00\xb9"),
])
def test_prefix_sei_headers(family, header):
    nal = build_sei_nal(SeiMessage(4, bytes(10)), family)
    assert nal.header_bytes == header
    assert nal.is_sei


def test_sei_small_type_and_size():
    nal = build_sei_nal(SeiMessage(4, bytes(range(1, 11))), "avc")
    assert nal.rbsp[:2] == b"\x04\x0a"
    assert nal.rbsp[-1] == 0x80


@pytest.mark.parametrize("size,size_bytes", [(300, b"\xff\x2d"), (255, b"\xff\x00"), (254, b"\xfe")])
def test_sei_size_extension(size, size_bytes):
    nal = build_sei_nal(SeiMessage(4, bytes([7]) * size), "vvc")
    assert nal.rbsp[1:1 + len(size_bytes)] == size_bytes
    msgs = parse_sei_nal(nal)
    assert len(msgs[0].payload) == size


def test_sei_type_extension():
    nal = build_sei_nal(SeiMessage(600, b"\x01"), "hevc")
    assert nal.rbsp[:3] == b"\xff\xff\x5a"
    assert parse_sei_nal(nal) == [SeiMessage(600, b"\x01")]


def test_sei_oversize():
    with pytest.raises(RangeError):
        build_sei_nal(SeiMessage(4, bytes(1 << 16)), "vvc")


def test_two_messages_in_one_nal():
    a, b = SeiMessage(214, b"\x01\x02\x03"), SeiMessage(5, bytes(16) + b"hi")
    nal = build_sei_nal([a, b], "vvc")
    # byte layout: [type, size, payload] x 2 + stop byte
    expected = bytes([214, 3, 1, 2, 3, 5, 18]) + bytes(16) + b"hi" + b"\x80"
    assert nal.rbsp == expected
    assert parse_sei_nal(nal) == [a, b]


def test_parse_truncated_declared_size():
    nal = NalUnit(CodecFamily.VVC, make_header(CodecFamily.VVC, 23), b"\x04\x0a\x01\x02\x80")
    with pytest.raises(TruncationError):
        parse_sei_nal(nal)


def test_parse_requires_stop_bit():
    nal = NalUnit(CodecFamily.VVC, make_header(CodecFamily.VVC, 23), b"\x04\x01\x01")
    with pytest.raises(MalformedStreamError):
        parse_sei_nal(nal)


@given(st.integers(0, 1000), st.binary(max_size=700), st.sampled_from(list(CodecFamily)))
def test_sei_roundtrip(ptype, payload, family):
    msg = SeiMessage(ptype, payload)
    nal = build_sei_nal(msg, family)
    assert parse_sei_nal(nal) == [msg]
    # and through the escaped byte form
    again = split_nal_units(b"\x00\x00\x01" + nal.to_bytes(), family)[0]
    assert parse_sei_nal(again) == [msg]


def test_split_single_nal():
    aus = split_annexb(b"\x00\x00\x01\x00\x41\xaa\xbb", "vvc")
    assert len(aus) == 1 and len(aus.access_units[0]) == 1
    nal = aus.access_units[0][0]
    assert nal.header_bytes == b"\x00\x41" and nal.rbsp == b"\xaa\xbb"


def test_split_three_and_four_byte_start_codes_agree():
    body = [b"\x65\x88\x01", b"\x41\x9a\x00\x00\x03\x01"]
    s3 = b"".join(b"\x00\x00\x01" + b for b in body)
    s4 = b"".join(b"\x00\x00\x00\x01" + b for b in body)
    a, b = split_annexb(s3, "avc"), split_annexb(s4, "avc")
    assert [n.rbsp for n in a.nal_units()] == [n.rbsp for n in b.nal_units()]
    assert a.access_units[1][0].rbsp == b"\x9a\x00\x00\x01"
    assert join_annexb(a) == s3 and join_annexb(b) == s4


def test_split_requires_leading_start_code():
    with pytest.raises(MalformedStreamError):
        split_annexb(b"\x65\x00\x00\x01\x65", "avc")


def test_default_access_unit_grouping():
    sei = build_sei_nal(SeiMessage(214, b"\x01"), "avc")
    pic = NalUnit(CodecFamily.AVC, b"\x65", b"\x88")
    aus = AccessUnitStream(CodecFamily.AVC, [[sei, pic], [pic], [sei, sei, pic]])
    again = split_annexb(join_annexb(aus), "avc")
    assert [len(a) for a in again.access_units] == [2, 1, 3]


def test_canonical_start_codes():
    sei = build_sei_nal(SeiMessage(214, b"\x01"), "avc")
    pic = NalUnit(CodecFamily.AVC, b"\x65", b"\x88")
    out = join_annexb(AccessUnitStream(CodecFamily.AVC, [[sei, pic]]))
    assert out == b"\x00\x00\x00\x01\x06\xd6\x01\x01\x80" + b"\x00\x00\x01\x65\x88"


@settings(max_examples=200)
@given(st.integers(0, 2 ** 32))
def test_join_split_roundtrip(seed):
    s = join_annexb(random_base_stream(random.Random(seed)))
    for family in CodecFamily:
        try:
            aus = split_annexb(s, family)
        except MalformedStreamError:
            continue
        assert join_annexb(aus) == s


def test_join_split_preserves_irregular_start_codes():
    s = b"\x00\x00\x00\x00\x01\x65\x11\x00\x00\x01\x41\x22\x00\x00\x00\x01\x41\x33"
    assert join_annexb(split_annexb(s, "avc")) == s


def test_insert_sei():
    pic = NalUnit(CodecFamily.HEVC, make_header(CodecFamily.HEVC, 1), b"\x01")
    one = AccessUnitStream(CodecFamily.HEVC, [[pic]])
    s1 = build_sei_nal(SeiMessage(214, b"\x01"), "hevc")
    s2 = build_sei_nal(SeiMessage(214, b"\x02"), "hevc")
    out = insert_sei(insert_sei(one, 0, s1), 0, s2)
    assert out.access_units[0] == [s1, s2, pic]
    assert one.access_units[0] == [pic]
    with pytest.raises(IndexError):
        insert_sei(one, 1, s1)


def test_strip_sei_examples():
    pic = NalUnit(CodecFamily.VVC, make_header(CodecFamily.VVC, 1), b"\x01")
    plain = AccessUnitStream(CodecFamily.VVC, [[pic]])
    assert join_annexb(strip_sei(plain)) == join_annexb(plain)
    sei = build_sei_nal(SeiMessage(214, b"\x09"), "vvc")
    assert strip_sei(AccessUnitStream(CodecFamily.VVC, [[sei, pic]])).access_units == [[pic]]


def test_strip_only_gfv_payload_type():
    pic = NalUnit(CodecFamily.VVC, make_header(CodecFamily.VVC, 1), b"\x01")
    gfv = build_sei_nal(SeiMessage(214, b"\x09"), "vvc")
    other = build_sei_nal(SeiMessage(5, bytes(17)), "vvc")
    s = AccessUnitStream(CodecFamily.VVC, [[other, gfv, pic]])
    assert strip_sei(s, payload_type=214).access_units == [[other, pic]]


@settings(max_examples=100)
@given(st.integers(0, 2 ** 32))
def test_strip_insert_inverse_bytes(seed):
    r = random.Random(seed)
    base = random_base_stream(r)
    base_bytes = join_annexb(base)
    parsed = split_annexb(base_bytes, base.family)
    muxed = parsed
    for _ in range(r.randint(1, 5)):
        idx = r.randrange(len(parsed))
        payload = adversarial_bytes(r, r.randint(0, 40))
        muxed = insert_sei(muxed, idx, build_sei_nal(SeiMessage(214, payload), base.family))
    reparsed = split_annexb(join_annexb(muxed), base.family)
    assert join_annexb(strip_sei(reparsed)) == base_bytes
    assert join_annexb(strip_sei(muxed)) == base_bytes
