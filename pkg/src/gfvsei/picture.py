"""8-bit picture buffers, BT.601 full-range conversion, YUV and PPM files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeError

RGB444 = "rgb444"
YUV420 = "yuv420"


def chroma_size(width: int, height: int) -> tuple[int, int]:
    return (width + 1) // 2, (height + 1) // 2


@dataclass
class PictureBuffer:
    width: int
    height: int
    planes: tuple[np.ndarray, np.ndarray, np.ndarray]
    format: str = RGB444

    def __post_init__(self):
        self.planes = tuple(np.asarray(pl, dtype=np.uint8) for pl in self.planes)
        if len(self.planes) != 3:
            raise ShapeError("a picture has exactly three planes")
        if self.format == RGB444:
            sizes = [(self.height, self.width)] * 3
        elif self.format == YUV420:
            cw, ch = chroma_size(self.width, self.height)
            sizes = [(self.height, self.width), (ch, cw), (ch, cw)]
        else:
            raise ValueError(f"unknown picture format {self.format!r}")
        for pl, size in zip(self.planes, sizes):
            if pl.shape != size:
                raise ShapeError(f"{self.format} plane shape {pl.shape}, expected {size}")

    @classmethod
    def from_rgb(cls, rgb: np.ndarray) -> "PictureBuffer":
        rgb = np.asarray(rgb)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ShapeError(f"expected H x W x 3 array, got {rgb.shape}")
        return cls(rgb.shape[1], rgb.shape[0], tuple(rgb[..., c] for c in range(3)), RGB444)

    def rgb(self) -> np.ndarray:
        if self.format != RGB444:
            raise ValueError("picture is not RGB 4:4:4")
        return np.stack(self.planes, axis=-1)

    def to_bytes(self) -> bytes:
        return b"".join(pl.tobytes() for pl in self.planes)

    def same_pixels(self, other: "PictureBuffer") -> bool:
        return (self.format == other.format and self.width == other.width
                and self.height == other.height
                and all(np.array_equal(a, b) for a, b in zip(self.planes, other.planes)))


def _clip_round(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def yuv420_to_rgb444(pic: PictureBuffer) -> PictureBuffer:
    """BT.601 full range; chroma upsampled by sample replication."""
    if pic.format != YUV420:
        raise ValueError("expected a 4:2:0 picture")
    y, cb, cr = (pl.astype(np.float64) for pl in pic.planes)
    h, w = pic.height, pic.width
    cb = np.repeat(np.repeat(cb, 2, axis=0), 2, axis=1)[:h, :w] - 128.0
    cr = np.repeat(np.repeat(cr, 2, axis=0), 2, axis=1)[:h, :w] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return PictureBuffer(w, h, (_clip_round(r), _clip_round(g), _clip_round(b)), RGB444)


def rgb444_to_yuv420(pic: PictureBuffer) -> PictureBuffer:
    """Inverse BT.601 full-range matrix; chroma is the mean of each 2x2 block."""
    if pic.format != RGB444:
        raise ValueError("expected an RGB 4:4:4 picture")
    r, g, b = (pl.astype(np.float64) for pl in pic.planes)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return PictureBuffer(pic.width, pic.height,
                         (_clip_round(y), _block_mean(cb), _block_mean(cr)), YUV420)


def _block_mean(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    padded = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="edge")
    blocks = padded.reshape(padded.shape[0] // 2, 2, padded.shape[1] // 2, 2)
    return _clip_round(blocks.mean(axis=(1, 3)))


def read_yuv420(path, width: int, height: int) -> list[PictureBuffer]:
    data = Path(path).read_bytes()
    cw, ch = chroma_size(width, height)
    luma, chroma = width * height, cw * ch
    frame = luma + 2 * chroma
    if len(data) % frame:
        raise ShapeError(f"{path}: {len(data)} bytes is not a whole number of "
                         f"{width}x{height} 4:2:0 frames")
    pics = []
    for off in range(0, len(data), frame):
        buf = np.frombuffer(data, np.uint8, frame, off)
        pics.append(PictureBuffer(width, height, (
            buf[:luma].reshape(height, width),
            buf[luma:luma + chroma].reshape(ch, cw),
            buf[luma + chroma:].reshape(ch, cw),
        ), YUV420))
    return pics


def write_yuv420(path, pictures) -> None:
    with open(path, "wb") as f:
        for pic in pictures:
            if pic.format != YUV420:
                raise ValueError("write_yuv420 expects 4:2:0 pictures")
            f.write(pic.to_bytes())


def write_ppm(path, pic: PictureBuffer) -> None:
    header = f"P6\n{pic.width} {pic.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pic.rgb().tobytes())


def read_ppm(path) -> PictureBuffer:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos)
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise ValueError(f"{path}: only 8-bit binary PPM (P6) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data, np.uint8, w * h * 3, pos + 1)
    return PictureBuffer.from_rgb(pixels.reshape(h, w, 3))
