"""MSB-first bit writer/reader with ue(v) codes and RBSP trailing bits."""

from __future__ import annotations

from .errors import MalformedCodeError, RangeError, TruncationError

MAX_FIELD_BITS = 32
MAX_UE_VALUE = (1 << 32) - 2


def ue_length(value: int) -> int:
    """Length in bits of the order-0 Exp-Golomb code for ``value``."""
    if value < 0 or value > MAX_UE_VALUE:
        raise RangeError(f"ue(v) value {value} out of range")
    return 2 * ((value + 1).bit_length() - 1) + 1


class BitWriter:
    """Accumulates bits most-significant first."""

    def __init__(self):
        self._chunks: list[str] = []
        self.bit_offset = 0

    def put_bits(self, value: int, n: int) -> "BitWriter":
        if not 1 <= n <= MAX_FIELD_BITS:
            raise RangeError(f"field width {n} outside 1..{MAX_FIELD_BITS}")
        if value < 0 or value >> n:
            raise RangeError(f"value {value} does not fit in {n} bits")
        self._chunks.append(format(value, f"0{n}b"))
        self.bit_offset += n
        return self

    def put_flag(self, flag: bool) -> "BitWriter":
        return self.put_bits(1 if flag else 0, 1)

    def put_exp_golomb(self, value: int) -> "BitWriter":
        if value < 0 or value > MAX_UE_VALUE:
            raise RangeError(f"ue(v) value {value} out of range")
        code = value + 1
        zeros = code.bit_length() - 1
        self._chunks.append("0" * zeros + format(code, "b"))
        self.bit_offset += 2 * zeros + 1
        return self

    def put_bytes(self, data: bytes) -> "BitWriter":
        for b in data:
            self.put_bits(b, 8)
        return self

    def put_rbsp_trailing(self) -> "BitWriter":
        self._chunks.append("1")
        self.bit_offset += 1
        pad = -self.bit_offset % 8
        if pad:
            self._chunks.append("0" * pad)
            self.bit_offset += pad
        return self

    @property
    def byte_aligned(self) -> bool:
        return self.bit_offset % 8 == 0

    def bits(self) -> str:
        """The written bits as a '0'/'1' string (mainly for tests)."""
        return "".join(self._chunks)

    def to_bytes(self) -> bytes:
        """Written bits packed into bytes; a partial last byte is zero-padded."""
        s = self.bits()
        s += "0" * (-len(s) % 8)
        if not s:
            return b""
        return int(s, 2).to_bytes(len(s) // 8, "big")


class BitReader:
    """Reads fields back from a byte sequence, MSB first."""

    def __init__(self, data: bytes, bit_offset: int = 0):
        self.data = bytes(data)
        self._bits = "".join(format(b, "08b") for b in self.data)
        if not 0 <= bit_offset <= len(self._bits):
            raise RangeError(f"bit offset {bit_offset} outside data")
        self.bit_offset = bit_offset

    @classmethod
    def from_bits(cls, bits: str) -> "BitReader":
        """Reader over a '0'/'1' string; trailing partial byte is zero-padded."""
        padded = bits + "0" * (-len(bits) % 8)
        data = int(padded, 2).to_bytes(len(padded) // 8, "big") if padded else b""
        return cls(data)

    @property
    def bits_left(self) -> int:
        return len(self._bits) - self.bit_offset

    def get_bits(self, n: int) -> int:
        if not 1 <= n <= MAX_FIELD_BITS:
            raise RangeError(f"field width {n} outside 1..{MAX_FIELD_BITS}")
        if n > self.bits_left:
            raise TruncationError(
                f"need {n} bits at offset {self.bit_offset}, {self.bits_left} left"
            )
        start = self.bit_offset
        self.bit_offset += n
        return int(self._bits[start:self.bit_offset], 2)

    def get_flag(self) -> bool:
        return self.get_bits(1) == 1

    def get_exp_golomb(self) -> int:
        start = self.bit_offset
        one = self._bits.find("1", start, start + 32)
        if one < 0:
            if len(self._bits) - start < 32:
                raise MalformedCodeError(f"truncated ue(v) at offset {start}")
            raise MalformedCodeError(f"more than 31 leading zeros at offset {start}")
        zeros = one - start
        end = one + zeros + 1
        if end > len(self._bits):
            raise MalformedCodeError(f"truncated ue(v) at offset {start}")
        self.bit_offset = end
        return int(self._bits[one:end], 2) - 1

    def get_bytes(self, count: int) -> bytes:
        return bytes(self.get_bits(8) for _ in range(count))

    def get_rbsp_trailing(self) -> None:
        """Consume the stop bit and zero padding, validating both."""
        if self.bits_left < 1 or self.get_bits(1) != 1:
            raise MalformedCodeError("missing rbsp stop bit")
        while self.bit_offset % 8:
            if self.get_bits(1) != 0:
                raise MalformedCodeError("nonzero rbsp alignment bit")
