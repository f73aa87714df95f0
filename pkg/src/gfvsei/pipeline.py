"""Encoder and decoder workflows around the GFV SEI message.

The encoder attaches one GFV SEI NAL unit to every picture: pictures that
coincide with a coded base picture get it inside that access unit, all
others travel in SEI-only access units. The decoder walks the stream in
decoding order (which is also display order), refreshes its texture at
every access unit carrying a picture, and synthesises one output frame per
GFV message. Splitting a stream folds SEI-only access units into the next
picture access unit; the last GFV message there belongs to the picture and
the earlier ones to the pictures before it.

Base pictures are either opaque coded access units, passed through
untouched, or "raw picture" NAL units that wrap uncompressed 4:2:0 samples
under an unspecified nal_unit_type so the workflow runs without an external
codec.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ManifestError, MissingBasePictureError, ShapeError
from .gfv_payload import (
    DecodedPayload,
    GfvFrameParams,
    PredictorState,
    QuantConfig,
    RepresentationKind,
    decode_payload_fields,
    encode_payload,
)
from .nal_mux import (
    DEFAULT_GFV_PAYLOAD_TYPE,
    AccessUnitStream,
    CodecFamily,
    NalUnit,
    SeiMessage,
    build_sei_nal,
    insert_sei,
    join_annexb,
    make_header,
    parse_sei_nal,
    split_annexb,
)
from .neural_io import Generator, ToyGenerator, Translator
from .picture import (
    YUV420,
    PictureBuffer,
    chroma_size,
    read_yuv420,
    rgb444_to_yuv420,
    yuv420_to_rgb444,
)
from .rate_stats import BitLog

log = logging.getLogger(__name__)

RAW_PICTURE_TYPE = {CodecFamily.AVC: 24, CodecFamily.HEVC: 48, CodecFamily.VVC: 28}
RAW_PICTURE_MAGIC = b"GFVR"


# -- raw picture stub -------------------------------------------------------

def raw_picture_nal(pic: PictureBuffer, family) -> NalUnit:
    family = CodecFamily.parse(family)
    if pic.format != YUV420:
        pic = rgb444_to_yuv420(pic)
    rbsp = RAW_PICTURE_MAGIC + struct.pack(">HH", pic.width, pic.height) + pic.to_bytes() + b"\x80"
    return NalUnit(family, make_header(family, RAW_PICTURE_TYPE[family], nal_ref_idc=3), rbsp)


def is_raw_picture(nal: NalUnit) -> bool:
    return (nal.nal_type == RAW_PICTURE_TYPE[nal.codec_family]
            and nal.rbsp[:4] == RAW_PICTURE_MAGIC)


def parse_raw_picture(nal: NalUnit) -> PictureBuffer:
    data = nal.rbsp
    if not is_raw_picture(nal) or len(data) < 9:
        raise ValueError("not a raw picture NAL unit")
    width, height = struct.unpack_from(">HH", data, 4)
    cw, ch = chroma_size(width, height)
    luma, chroma = width * height, cw * ch
    body = data[8:]
    if len(body) != luma + 2 * chroma + 1 or body[-1] != 0x80:
        raise ShapeError(f"raw picture NAL size disagrees with {width}x{height} 4:2:0")
    buf = np.frombuffer(body, np.uint8)
    return PictureBuffer(width, height, (
        buf[:luma].reshape(height, width),
        buf[luma:luma + chroma].reshape(ch, cw),
        buf[luma + chroma:luma + 2 * chroma].reshape(ch, cw),
    ), YUV420)


def raw_base_stream(pictures, family) -> bytes:
    """Annex-B stream with one raw-picture access unit per picture."""
    family = CodecFamily.parse(family)
    aus = AccessUnitStream(family, [[raw_picture_nal(p, family)] for p in pictures])
    return join_annexb(aus)


# -- manifest ---------------------------------------------------------------

def _range(value, default=(-1.0, 1.0)) -> QuantConfig:
    lo, hi = default if value is None else value
    return QuantConfig(float(lo), float(hi))


@dataclass
class PictureRecord:
    kind: RepresentationKind
    coords: list | None = None
    matrices: list | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "PictureRecord":
        return cls(RepresentationKind.parse(d["kind"]), d.get("coords"), d.get("matrices"))

    def to_dict(self) -> dict:
        return {"kind": self.kind.name, "coords": self.coords, "matrices": self.matrices}


@dataclass
class SequenceManifest:
    base_stream_path: str | None = None
    base_picture_index: int = 0
    pictures: list[PictureRecord] = field(default_factory=list)
    precision_bits: int = 8
    prediction: bool = True
    fps: float = 25.0
    translator_uri: str | None = None
    generator_uri: str | None = None
    base_yuv_path: str | None = None
    width: int | None = None
    height: int | None = None
    refresh_period: int | None = None
    coord_range: tuple[float, float] | None = None
    matrix_range: tuple[float, float] | None = None
    codec_family: str = "vvc"
    payload_type: int = DEFAULT_GFV_PAYLOAD_TYPE

    @classmethod
    def from_json(cls, path) -> "SequenceManifest":
        path = Path(path)
        d = json.loads(path.read_text())
        root = path.parent
        pictures_path = d.pop("pictures_path", None)
        if pictures_path is not None:
            d["pictures"] = json.loads((root / pictures_path).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ManifestError(f"{path}: unknown manifest fields {sorted(unknown)}")
        d["pictures"] = [PictureRecord.from_dict(p) for p in d.get("pictures", [])]
        for key in ("base_stream_path", "base_yuv_path"):
            if d.get(key) is not None:
                d[key] = str(root / d[key])
        return cls(**d)

    def to_json(self) -> str:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["pictures"] = [p.to_dict() for p in self.pictures]
        return json.dumps(d, indent=1) + "\n"

    @property
    def family(self) -> CodecFamily:
        return CodecFamily.parse(self.codec_family)

    @property
    def coord_cfg(self) -> QuantConfig:
        return _range(self.coord_range)

    @property
    def matrix_cfg(self) -> QuantConfig:
        return _range(self.matrix_range)

    def load_base_stream(self) -> bytes:
        if self.base_stream_path is not None:
            return Path(self.base_stream_path).read_bytes()
        if self.base_yuv_path is not None:
            if not self.width or not self.height:
                raise ManifestError("base_yuv_path needs width and height")
            return raw_base_stream(read_yuv420(self.base_yuv_path, self.width, self.height),
                                   self.family)
        raise ManifestError("manifest names neither base_stream_path nor base_yuv_path")

    def frame_params(self, index: int, prediction: bool, with_uris: bool) -> GfvFrameParams:
        rec = self.pictures[index]
        return GfvFrameParams(
            kind=rec.kind,
            coords=rec.coords,
            matrices=rec.matrices,
            precision_bits=self.precision_bits,
            prediction=prediction,
            translator_uri=self.translator_uri if with_uris else None,
            generator_uri=self.generator_uri if with_uris else None,
        )


def base_positions(n_pictures: int, n_aus: int, base_index: int = 0,
                   refresh_period: int | None = None) -> list[int]:
    """Picture indices that receive the base stream's access units, in order."""
    if base_index < 0:
        raise ManifestError("base_picture_index must be nonnegative")
    if n_pictures == 0:
        return []
    if base_index >= n_pictures:
        raise ManifestError(f"base picture {base_index} beyond {n_pictures} pictures")
    if refresh_period is not None:
        if refresh_period < 1:
            raise ManifestError("refresh_period must be positive")
        positions = list(range(base_index, n_pictures, refresh_period))
        if len(positions) > n_aus:
            raise ManifestError(
                f"refresh every {refresh_period} pictures needs {len(positions)} "
                f"base pictures, stream has {n_aus}"
            )
        return positions
    return list(range(base_index, min(n_pictures, base_index + n_aus)))


def _can_predict(params: GfvFrameParams, state: PredictorState) -> bool:
    if not state.valid:
        return False
    for arr, prev in ((params.coords, state.prev_coords_q),
                      (params.matrices, state.prev_matrices_q)):
        if arr is not None and (prev is None or prev.shape != arr.shape):
            return False
    return True


def _au_bits(au: list[NalUnit], family: CodecFamily) -> int:
    return 8 * len(join_annexb(AccessUnitStream(family, [list(au)])))


def encode_sequence(manifest: SequenceManifest,
                    base_stream: bytes | None = None) -> tuple[bytes, BitLog]:
    family = manifest.family
    if base_stream is None:
        base_stream = manifest.load_base_stream()
    base = split_annexb(base_stream, family) if base_stream else AccessUnitStream(family)
    n_pic = len(manifest.pictures)
    if n_pic and not len(base):
        raise ManifestError("parameters given but the base stream is empty")
    positions = base_positions(n_pic, len(base), manifest.base_picture_index,
                               manifest.refresh_period)
    if len(base) > len(positions) and positions and positions[-1] != n_pic - 1:
        # a GFV-only access unit would merge into the next leftover one
        raise ManifestError(
            f"base stream has {len(base)} access units but only {len(positions)} are "
            "scheduled and the last picture is not a base picture")
    au_for = dict(zip(positions, base.access_units))
    coord_cfg, matrix_cfg = manifest.coord_cfg, manifest.matrix_cfg

    out = AccessUnitStream(family)
    bitlog = BitLog()
    state = PredictorState()
    for i in range(n_pic):
        is_base = i in au_for
        if is_base:
            state = PredictorState()
        params = manifest.frame_params(i, False, with_uris=is_base or i == 0)
        if manifest.prediction and _can_predict(params, state):
            params.prediction = True
        payload, state = encode_payload(params, state, coord_cfg, matrix_cfg)
        sei = build_sei_nal(SeiMessage(manifest.payload_type, payload), family)
        if is_base:
            au = list(au_for[i])
            base_bits = _au_bits(au, family)
            out.access_units.append(au)
            out = insert_sei(out, len(out) - 1, sei)
        else:
            base_bits = 0
            out.access_units.append([sei])
        bitlog.add(i, base_bits, 8 * len(payload), is_base)
    for k, au in enumerate(base.access_units[len(positions):]):
        out.access_units.append(list(au))
        bitlog.add(n_pic + k, _au_bits(au, family), 0, True)
    if clamped := coord_cfg.clamped + matrix_cfg.clamped:
        log.warning("%d parameter value(s) clamped to the configured range", clamped)
    return join_annexb(out), bitlog


# -- decoding ---------------------------------------------------------------

@dataclass
class DecodeOptions:
    payload_type: int = DEFAULT_GFV_PAYLOAD_TYPE
    codec_family: str = "vvc"
    coord_range: tuple[float, float] | None = None
    matrix_range: tuple[float, float] | None = None
    base_image: PictureBuffer | None = None

    @property
    def family(self) -> CodecFamily:
        return CodecFamily.parse(self.codec_family)


@dataclass
class Networks:
    translator: Translator | None = None
    generator: Generator = field(default_factory=ToyGenerator)


@dataclass
class AccessUnitEvents:
    """GFV messages of one access unit.

    SEI-only access units merge into the next picture access unit when a
    stream is split, so the first ``carried`` messages belong to earlier
    pictures and were decoded before the predictor reset at this picture.
    """
    index: int
    pictures: list[NalUnit]
    base_bits: int
    messages: list[DecodedPayload]
    payload_bits: list[int]
    carried: int = 0


def iter_gfv(stream: bytes, options: DecodeOptions | None = None) -> Iterator[AccessUnitEvents]:
    """Parse every GFV payload in decoding order, threading predictor state."""
    options = options or DecodeOptions()
    family = options.family
    coord_cfg, matrix_cfg = _range(options.coord_range), _range(options.matrix_range)
    aus = split_annexb(stream, family)
    state = PredictorState()
    for k, au in enumerate(aus.access_units):
        pictures = [n for n in au if not n.is_sei]
        payloads = []
        for nal in au:
            if not nal.is_sei:
                continue
            for msg in parse_sei_nal(nal):
                if msg.payload_type != options.payload_type:
                    log.warning("AU %d: skipping SEI payload type %d", k, msg.payload_type)
                    continue
                payloads.append(msg.payload)
        carried = len(payloads) - 1 if pictures and payloads else 0
        messages, bits = [], []
        for j, data in enumerate(payloads):
            if pictures and j == carried:
                state = PredictorState()
            decoded, state = decode_payload_fields(data, state, coord_cfg, matrix_cfg)
            messages.append(decoded)
            bits.append(8 * len(data))
        if pictures and not payloads:
            state = PredictorState()
        base_bits = 8 * sum(len(n.prefix or b"\x00\x00\x01") + len(n.to_bytes()) for n in pictures)
        yield AccessUnitEvents(k, pictures, base_bits, messages, bits, carried)


def decode_texture(pictures: list[NalUnit], options: DecodeOptions) -> PictureBuffer:
    if options.base_image is not None:
        return options.base_image
    for nal in pictures:
        if is_raw_picture(nal):
            return yuv420_to_rgb444(parse_raw_picture(nal))
    raise MissingBasePictureError(
        "access unit holds no decodable base picture; supply a decoded base image"
    )


def decode_sequence(stream: bytes, networks: Networks | None = None,
                    options: DecodeOptions | None = None) -> tuple[list[PictureBuffer], BitLog]:
    networks = networks or Networks()
    options = options or DecodeOptions()
    frames: list[PictureBuffer] = []
    bitlog = BitLog()
    texture = None
    base_params = None
    for ev in iter_gfv(stream, options):
        for j, (decoded, sei_bits) in enumerate(zip(ev.messages, ev.payload_bits)):
            own = bool(ev.pictures) and j == ev.carried
            if own:
                texture = decode_texture(ev.pictures, options)
                base_params = None
            elif texture is None:
                if options.base_image is None:
                    raise MissingBasePictureError(
                        f"GFV message in AU {ev.index} precedes any base picture")
                texture = options.base_image
            params = decoded.params
            if networks.translator is not None:
                params = networks.translator(params)
            if base_params is None:
                base_params = params
            frames.append(networks.generator(texture, base_params, params))
            bitlog.add(len(frames) - 1, ev.base_bits if own else 0, sei_bits, own)
        if ev.pictures and not ev.messages:
            texture = decode_texture(ev.pictures, options)
            base_params = None
            bitlog.add(len(frames), ev.base_bits, 0, True)
            frames.append(texture)
    return frames, bitlog
