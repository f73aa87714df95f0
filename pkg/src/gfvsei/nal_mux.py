"""NAL-unit framing and Annex-B multiplexing for AVC, HEVC and VVC.

NAL units are held with their RBSP already unescaped. SEI messages are
packed with the usual 0xFF-extension coding of payload type and size, and
access units are grouped with a simple predicate: every non-SEI NAL closes
the access unit that the SEI NALs before it opened.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import MalformedStreamError, RangeError, TruncationError

DEFAULT_GFV_PAYLOAD_TYPE = 214  # placeholder; the VSEI draft number is not public
MAX_SEI_PAYLOAD = 1 << 16


class CodecFamily(enum.Enum):
    AVC = "avc"
    HEVC = "hevc"
    VVC = "vvc"

    @classmethod
    def parse(cls, name: "str | CodecFamily") -> "CodecFamily":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown codec family {name!r}") from None

    @property
    def header_len(self) -> int:
        return 1 if self is CodecFamily.AVC else 2


# Prefix and suffix SEI nal_unit_type values. Overridable per call.
PREFIX_SEI_TYPE = {CodecFamily.AVC: 6, CodecFamily.HEVC: 39, CodecFamily.VVC: 23}
SUFFIX_SEI_TYPE = {CodecFamily.AVC: None, CodecFamily.HEVC: 40, CodecFamily.VVC: 24}


def nal_unit_type(header: bytes, family: CodecFamily) -> int:
    if family is CodecFamily.AVC:
        return header[0] & 0x1F
    if family is CodecFamily.HEVC:
        return (header[0] >> 1) & 0x3F
    return (header[1] >> 3) & 0x1F


def make_header(family: CodecFamily, nal_type: int, nal_ref_idc: int = 0) -> bytes:
    """Header for layer 0 / temporal id 0. ``nal_ref_idc`` applies to AVC only."""
    if family is CodecFamily.AVC:
        if not 0 <= nal_type < 32:
            raise RangeError(f"AVC nal_unit_type {nal_type} out of range")
        return bytes([(nal_ref_idc & 3) << 5 | nal_type])
    if family is CodecFamily.HEVC:
        if not 0 <= nal_type < 64:
            raise RangeError(f"HEVC nal_unit_type {nal_type} out of range")
        return bytes([nal_type << 1, 0x01])
    if not 0 <= nal_type < 32:
        raise RangeError(f"VVC nal_unit_type {nal_type} out of range")
    return bytes([0x00, nal_type << 3 | 0x01])


@dataclass(frozen=True)
class NalUnit:
    """One NAL unit. ``prefix`` keeps the start code bytes seen by the parser
    so that unmodified units are re-emitted byte-exactly; ``None`` means the
    canonical start code is used."""

    codec_family: CodecFamily
    header_bytes: bytes
    rbsp: bytes
    prefix: bytes | None = field(default=None, compare=False)
    sei_types: frozenset | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.header_bytes) != self.codec_family.header_len:
            raise MalformedStreamError(
                f"{self.codec_family.name} header must be "
                f"{self.codec_family.header_len} byte(s), got {len(self.header_bytes)}"
            )

    @property
    def nal_type(self) -> int:
        return nal_unit_type(self.header_bytes, self.codec_family)

    @property
    def is_sei(self) -> bool:
        types = self.sei_types
        if types is None:
            types = {PREFIX_SEI_TYPE[self.codec_family], SUFFIX_SEI_TYPE[self.codec_family]}
        return self.nal_type in types

    def to_bytes(self) -> bytes:
        """Header plus escaped payload, without start code."""
        return self.header_bytes + escape_emulation(self.rbsp)


@dataclass(frozen=True)
class SeiMessage:
    payload_type: int
    payload: bytes


@dataclass
class AccessUnitStream:
    family: CodecFamily
    access_units: list[list[NalUnit]] = field(default_factory=list)

    def __len__(self):
        return len(self.access_units)

    def nal_units(self) -> Iterable[NalUnit]:
        for au in self.access_units:
            yield from au

    def copy(self) -> "AccessUnitStream":
        return AccessUnitStream(self.family, [list(au) for au in self.access_units])


# -- emulation prevention ---------------------------------------------------

def escape_emulation(rbsp: bytes) -> bytes:
    out = bytearray()
    zeros = 0
    for b in rbsp:
        if zeros >= 2 and b <= 3:
            out.append(3)
            zeros = 0
        out.append(b)
        zeros = zeros + 1 if b == 0 else 0
    # a NAL must not end in 0x00 0x00 or the next start code would absorb it
    if zeros >= 2:
        out.append(3)
    return bytes(out)


def unescape_emulation(escaped: bytes) -> bytes:
    out = bytearray()
    zeros = 0
    for i, b in enumerate(escaped):
        if zeros >= 2:
            if b <= 2:
                raise MalformedStreamError(
                    f"forbidden 00 00 {b:02x} sequence at byte {i - 2}"
                )
            if b == 3:
                zeros = 0
                continue
        out.append(b)
        zeros = zeros + 1 if b == 0 else 0
    return bytes(out)


# -- SEI framing ------------------------------------------------------------

def _put_ff_coded(out: bytearray, value: int) -> None:
    while value >= 255:
        out.append(0xFF)
        value -= 255
    out.append(value)


def _get_ff_coded(data: bytes, pos: int, what: str) -> tuple[int, int]:
    value = 0
    while True:
        if pos >= len(data):
            raise TruncationError(f"SEI {what} runs past end of NAL")
        b = data[pos]
        pos += 1
        value += b
        if b != 0xFF:
            return value, pos


def sei_rbsp(messages: Sequence[SeiMessage]) -> bytes:
    out = bytearray()
    for msg in messages:
        if msg.payload_type < 0:
            raise RangeError("negative payload type")
        if len(msg.payload) >= MAX_SEI_PAYLOAD:
            raise RangeError(f"SEI payload of {len(msg.payload)} bytes is too large")
        _put_ff_coded(out, msg.payload_type)
        _put_ff_coded(out, len(msg.payload))
        out += msg.payload
    out.append(0x80)
    return bytes(out)


def build_sei_nal(
    msg: SeiMessage | Sequence[SeiMessage],
    family: CodecFamily | str,
    nal_type: int | None = None,
) -> NalUnit:
    """Wrap one or more SEI messages in a prefix-SEI NAL unit."""
    family = CodecFamily.parse(family)
    messages = [msg] if isinstance(msg, SeiMessage) else list(msg)
    if not messages:
        raise ValueError("an SEI NAL needs at least one message")
    if nal_type is None:
        nal_type = PREFIX_SEI_TYPE[family]
        sei_types = None
    else:
        sei_types = frozenset({nal_type})
    return NalUnit(family, make_header(family, nal_type), sei_rbsp(messages),
                   sei_types=sei_types)


def parse_sei_nal(nal: NalUnit) -> list[SeiMessage]:
    if not nal.is_sei:
        raise ValueError(f"NAL type {nal.nal_type} is not an SEI NAL")
    data = nal.rbsp
    end = len(data) - 1
    while end >= 0 and data[end] == 0:
        end -= 1
    if end < 0 or data[end] != 0x80:
        raise MalformedStreamError("SEI RBSP lacks a byte-aligned stop bit")
    messages = []
    pos = 0
    while pos < end:
        ptype, pos = _get_ff_coded(data, pos, "payload type")
        size, pos = _get_ff_coded(data, pos, "payload size")
        if pos + size > end:
            raise TruncationError(
                f"SEI payload declares {size} bytes, {end - pos} remain"
            )
        messages.append(SeiMessage(ptype, data[pos:pos + size]))
        pos += size
    return messages


# -- Annex-B ----------------------------------------------------------------

def _find_start_codes(stream: bytes) -> list[tuple[int, int]]:
    """(prefix_start, payload_start) for every start code, zero_byte included."""
    found = []
    i = stream.find(b"\x00\x00\x01")
    while i >= 0:
        j = i
        while j > 0 and stream[j - 1] == 0 and (not found or j - 1 >= found[-1][1]):
            j -= 1
        found.append((j, i + 3))
        i = stream.find(b"\x00\x00\x01", i + 3)
    return found


def default_boundary(prev_au: list[NalUnit], nal: NalUnit) -> bool:
    """True when ``nal`` opens a new access unit."""
    return any(not n.is_sei for n in prev_au)


def split_nal_units(
    stream: bytes, family: CodecFamily | str, sei_types: Iterable[int] | None = None
) -> list[NalUnit]:
    family = CodecFamily.parse(family)
    if sei_types is not None:
        sei_types = frozenset(sei_types)
    starts = _find_start_codes(stream)
    if not starts or starts[0][0] != 0:
        raise MalformedStreamError("stream does not begin with a start code")
    nals = []
    for k, (prefix_start, payload_start) in enumerate(starts):
        end = starts[k + 1][0] if k + 1 < len(starts) else len(stream)
        raw = stream[payload_start:end]
        hlen = family.header_len
        if len(raw) < hlen:
            raise MalformedStreamError(f"NAL at byte {payload_start} shorter than its header")
        nals.append(NalUnit(family, raw[:hlen], unescape_emulation(raw[hlen:]),
                            prefix=stream[prefix_start:payload_start],
                            sei_types=sei_types))
    return nals


def split_annexb(
    stream: bytes,
    family: CodecFamily | str,
    boundary: Callable[[list[NalUnit], NalUnit], bool] = default_boundary,
    sei_types: Iterable[int] | None = None,
) -> AccessUnitStream:
    family = CodecFamily.parse(family)
    aus: list[list[NalUnit]] = []
    for nal in split_nal_units(stream, family, sei_types):
        if not aus or boundary(aus[-1], nal):
            aus.append([nal])
        else:
            aus[-1].append(nal)
    return AccessUnitStream(family, aus)


def join_annexb(aus: AccessUnitStream) -> bytes:
    out = bytearray()
    for au in aus.access_units:
        for k, nal in enumerate(au):
            if nal.prefix is not None:
                out += nal.prefix
            else:
                out += b"\x00\x00\x00\x01" if k == 0 else b"\x00\x00\x01"
            out += nal.to_bytes()
    return bytes(out)


def insert_sei(aus: AccessUnitStream, picture_index: int, sei: NalUnit) -> AccessUnitStream:
    """Place ``sei`` after the existing SEI NALs at the head of one AU."""
    if not 0 <= picture_index < len(aus.access_units):
        raise IndexError(f"picture index {picture_index} outside {len(aus.access_units)} AUs")
    out = aus.copy()
    au = out.access_units[picture_index]
    pos = 0
    while pos < len(au) and au[pos].is_sei:
        pos += 1
    au.insert(pos, sei)
    return out


def sei_payload_types(nal: NalUnit) -> set[int]:
    try:
        return {m.payload_type for m in parse_sei_nal(nal)}
    except (MalformedStreamError, TruncationError):
        return set()


def strip_sei(aus: AccessUnitStream, payload_type: int | None = None) -> AccessUnitStream:
    """Drop SEI NAL units, or only those carrying nothing but ``payload_type``.

    AUs left empty disappear.
    """
    kept = []
    for au in aus.access_units:
        rest = []
        for nal in au:
            if nal.is_sei and (payload_type is None
                               or sei_payload_types(nal) == {payload_type}):
                continue
            rest.append(nal)
        if rest:
            kept.append(rest)
    return AccessUnitStream(aus.family, kept)
