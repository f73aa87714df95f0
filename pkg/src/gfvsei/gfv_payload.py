"""GFV SEI payload: quantization, raw/differential coding and serialization.

Wire layout (all fields MSB first)::

    kind                  u(4)
    coordinate_present    u(1)
    matrix_present        u(1)
    prediction            u(1)
    precision_minus1      u(5)
    uri_present           u(1)
      translator_uri      ue(len) + len x u(8)   UTF-8, empty = absent
      generator_uri       ue(len) + len x u(8)
    if coordinate_present:
      num_coords          ue(v)
      dims                u(2)                    2 or 3
      N*D values          u(p) raw | ue(zigzag(q - q_prev)) predicted
    if matrix_present:
      M, R, C             ue(v) each
      M*R*C values        as above
    rbsp_trailing_bits

Values are quantized onto 2**p levels spanning a value range that travels
out of band (it is not part of the payload).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .bitio import BitReader, BitWriter, ue_length
from .errors import (
    ForbiddenDimsError,
    MalformedCodeError,
    PayloadDecodeError,
    PayloadTruncatedError,
    PredictorDecodeError,
    PredictorError,
    RangeError,
    ShapeError,
    TruncationError,
)

log = logging.getLogger(__name__)

HEADER_BITS = 13


class RepresentationKind(enum.IntEnum):
    LANDMARKS_2D = 0
    KEYPOINTS_2D = 1
    KEYPOINTS_2D_AFFINE = 2
    KEYPOINTS_3D_POSE = 3
    COMPACT_FEATURE = 4
    FACIAL_SEMANTICS = 5
    PROGRESSIVE_TOKENS = 6

    @property
    def uses_coordinates(self) -> bool:
        return _KIND_FLAGS[self][0]

    @property
    def uses_matrices(self) -> bool:
        return _KIND_FLAGS[self][1]

    @classmethod
    def parse(cls, name: "str | int | RepresentationKind") -> "RepresentationKind":
        if isinstance(name, str):
            try:
                return cls[name.upper()]
            except KeyError:
                raise ValueError(f"unknown representation kind {name!r}") from None
        return cls(name)


# (coordinates, matrices), following the taxonomy of typical GFVC methods:
# landmarks/keypoints carry coordinates, affine and head-pose variants add
# matrices, feature/semantic/token representations are matrices only.
_KIND_FLAGS = {
    RepresentationKind.LANDMARKS_2D: (True, False),
    RepresentationKind.KEYPOINTS_2D: (True, False),
    RepresentationKind.KEYPOINTS_2D_AFFINE: (True, True),
    RepresentationKind.KEYPOINTS_3D_POSE: (True, True),
    RepresentationKind.COMPACT_FEATURE: (False, True),
    RepresentationKind.FACIAL_SEMANTICS: (False, True),
    RepresentationKind.PROGRESSIVE_TOKENS: (False, True),
}


@dataclass
class QuantConfig:
    lo: float = -1.0
    hi: float = 1.0
    clamped: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"value range [{self.lo}, {self.hi}] is empty")

    def step(self, p: int) -> float:
        return (self.hi - self.lo) / ((1 << p) - 1)


def _check_precision(p: int) -> None:
    if not 1 <= p <= 32:
        raise RangeError(f"precision {p} outside 1..32")


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_array(v, p: int, cfg: QuantConfig) -> np.ndarray:
    _check_precision(p)
    top = (1 << p) - 1
    x = round_half_away((np.asarray(v, dtype=np.float64) - cfg.lo) / (cfg.hi - cfg.lo) * top)
    out_of_range = int(np.count_nonzero((x < 0) | (x > top)))
    if out_of_range:
        cfg.clamped += out_of_range
        log.debug("clamped %d value(s) to [%g, %g]", out_of_range, cfg.lo, cfg.hi)
    return np.clip(x, 0, top).astype(np.int64)


def quantize(v: float, p: int, cfg: QuantConfig) -> int:
    return int(quantize_array(v, p, cfg))


def dequantize_array(q, p: int, cfg: QuantConfig) -> np.ndarray:
    _check_precision(p)
    return cfg.lo + np.asarray(q, dtype=np.float64) * ((cfg.hi - cfg.lo) / ((1 << p) - 1))


def dequantize(q: int, p: int, cfg: QuantConfig) -> float:
    if not 0 <= q < (1 << p):
        raise RangeError(f"level {q} outside {p}-bit range")
    return float(dequantize_array(q, p, cfg))


def zigzag(d: int) -> int:
    return 2 * d if d >= 0 else -2 * d - 1


def unzigzag(u: int) -> int:
    return u >> 1 if u % 2 == 0 else -((u + 1) >> 1)


@dataclass
class GfvFrameParams:
    """Compact facial parameters of one picture.

    ``coords`` is N x D (D in {2, 3}); ``matrices`` is M x R x C. Either may
    be ``None``; a message with neither is a legal no-update message.
    """

    kind: RepresentationKind
    coords: np.ndarray | None = None
    matrices: np.ndarray | None = None
    precision_bits: int = 8
    prediction: bool = False
    translator_uri: str | None = None
    generator_uri: str | None = None

    def __post_init__(self):
        self.kind = RepresentationKind.parse(self.kind)
        _check_precision(self.precision_bits)
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=np.float64)
            if self.coords.ndim != 2 or self.coords.shape[0] < 1 or self.coords.shape[1] not in (2, 3):
                raise ShapeError(f"coords must be N x 2 or N x 3, got {self.coords.shape}")
            if not self.kind.uses_coordinates:
                raise ShapeError(f"{self.kind.name} carries no coordinates")
        if self.matrices is not None:
            self.matrices = np.asarray(self.matrices, dtype=np.float64)
            if self.matrices.ndim == 2:
                self.matrices = self.matrices[None]
            if self.matrices.ndim != 3 or min(self.matrices.shape) < 1:
                raise ShapeError(f"matrices must be M x R x C, got {self.matrices.shape}")
            if not self.kind.uses_matrices:
                raise ShapeError(f"{self.kind.name} carries no matrices")
        for uri in (self.translator_uri, self.generator_uri):
            if uri is not None and not uri:
                raise ValueError("URIs must be nonempty when present")

    @property
    def has_uris(self) -> bool:
        return self.translator_uri is not None or self.generator_uri is not None

    def flat_values(self) -> np.ndarray:
        """Coordinates then matrices, row-major."""
        parts = [a.ravel() for a in (self.coords, self.matrices) if a is not None]
        return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True, eq=False)
class PredictorState:
    prev_coords_q: np.ndarray | None = None
    prev_matrices_q: np.ndarray | None = None
    valid: bool = False

    def same_as(self, other: "PredictorState") -> bool:
        def eq(a, b):
            if a is None or b is None:
                return a is b
            return a.shape == b.shape and bool(np.array_equal(a, b))
        return (self.valid == other.valid
                and eq(self.prev_coords_q, other.prev_coords_q)
                and eq(self.prev_matrices_q, other.prev_matrices_q))


def _quantized(params: GfvFrameParams, coord_cfg: QuantConfig, matrix_cfg: QuantConfig):
    p = params.precision_bits
    cq = None if params.coords is None else quantize_array(params.coords, p, coord_cfg)
    mq = None if params.matrices is None else quantize_array(params.matrices, p, matrix_cfg)
    return cq, mq


def _check_prediction(params: GfvFrameParams, state: PredictorState, cq, mq) -> None:
    if not params.prediction:
        return
    if not state.valid:
        raise PredictorError("prediction requested but predictor state is not valid")
    for cur, prev, what in ((cq, state.prev_coords_q, "coordinate"),
                            (mq, state.prev_matrices_q, "matrix")):
        if cur is None:
            continue
        if prev is None or prev.shape != cur.shape:
            raise ShapeError(
                f"{what} shape {cur.shape} does not match predictor "
                f"{None if prev is None else prev.shape}"
            )


def _next_state(state: PredictorState, cq, mq) -> PredictorState:
    if cq is None and mq is None:
        return state
    return PredictorState(
        prev_coords_q=state.prev_coords_q if cq is None else cq,
        prev_matrices_q=state.prev_matrices_q if mq is None else mq,
        valid=True,
    )


def _put_uri(w: BitWriter, uri: str | None) -> None:
    data = (uri or "").encode("utf-8")
    w.put_exp_golomb(len(data))
    w.put_bytes(data)


def _put_values(w: BitWriter, q: np.ndarray, prev: np.ndarray | None, p: int) -> None:
    if prev is None:
        for v in q.ravel().tolist():
            w.put_bits(v, p)
    else:
        for d in (q - prev).ravel().tolist():
            w.put_exp_golomb(zigzag(d))


def encode_payload(
    params: GfvFrameParams,
    state: PredictorState = PredictorState(),
    coord_cfg: QuantConfig | None = None,
    matrix_cfg: QuantConfig | None = None,
) -> tuple[bytes, PredictorState]:
    coord_cfg = coord_cfg or QuantConfig()
    matrix_cfg = matrix_cfg or QuantConfig()
    cq, mq = _quantized(params, coord_cfg, matrix_cfg)
    _check_prediction(params, state, cq, mq)
    p = params.precision_bits

    w = BitWriter()
    w.put_bits(int(params.kind), 4)
    w.put_flag(cq is not None)
    w.put_flag(mq is not None)
    w.put_flag(params.prediction)
    w.put_bits(p - 1, 5)
    w.put_flag(params.has_uris)
    if params.has_uris:
        _put_uri(w, params.translator_uri)
        _put_uri(w, params.generator_uri)
    if cq is not None:
        w.put_exp_golomb(cq.shape[0])
        w.put_bits(cq.shape[1], 2)
        _put_values(w, cq, state.prev_coords_q if params.prediction else None, p)
    if mq is not None:
        for n in mq.shape:
            w.put_exp_golomb(n)
        _put_values(w, mq, state.prev_matrices_q if params.prediction else None, p)
    w.put_rbsp_trailing()
    return w.to_bytes(), _next_state(state, cq, mq)


def _value_bits(q: np.ndarray, prev: np.ndarray | None, p: int) -> int:
    if prev is None:
        return q.size * p
    return sum(ue_length(zigzag(d)) for d in (q - prev).ravel().tolist())


def payload_bit_length(
    params: GfvFrameParams,
    state: PredictorState = PredictorState(),
    coord_cfg: QuantConfig | None = None,
    matrix_cfg: QuantConfig | None = None,
) -> int:
    """Bits ``encode_payload`` writes before the RBSP trailing bits."""
    cq, mq = _quantized(params, coord_cfg or QuantConfig(), matrix_cfg or QuantConfig())
    _check_prediction(params, state, cq, mq)
    p = params.precision_bits
    bits = HEADER_BITS
    if params.has_uris:
        for uri in (params.translator_uri, params.generator_uri):
            n = len((uri or "").encode("utf-8"))
            bits += ue_length(n) + 8 * n
    if cq is not None:
        bits += ue_length(cq.shape[0]) + 2
        bits += _value_bits(cq, state.prev_coords_q if params.prediction else None, p)
    if mq is not None:
        bits += sum(ue_length(n) for n in mq.shape)
        bits += _value_bits(mq, state.prev_matrices_q if params.prediction else None, p)
    return bits


@dataclass
class DecodedPayload:
    """Field-level view of a payload, as needed by inspection tools."""

    params: GfvFrameParams
    coords_q: np.ndarray | None
    matrices_q: np.ndarray | None
    bit_length: int


def _get_uri(r: BitReader) -> str | None:
    n = r.get_exp_golomb()
    if n * 8 > r.bits_left:
        raise PayloadTruncatedError("URI runs past end of payload")
    data = r.get_bytes(n)
    try:
        return data.decode("utf-8") or None
    except UnicodeDecodeError as exc:
        raise PayloadDecodeError(f"URI is not valid UTF-8: {exc}") from None


def _get_values(r: BitReader, shape, prev: np.ndarray | None, p: int) -> np.ndarray:
    count = int(np.prod(shape))
    if prev is None:
        if count * p > r.bits_left:
            raise PayloadTruncatedError(f"{count} values of {p} bits exceed payload")
        vals = [r.get_bits(p) for _ in range(count)]
        return np.array(vals, dtype=np.int64).reshape(shape)
    if prev.shape != tuple(shape):
        raise PredictorDecodeError(
            f"predicted shape {tuple(shape)} does not match state {prev.shape}"
        )
    if count > r.bits_left:
        raise PayloadTruncatedError(f"{count} residuals exceed payload")
    res = np.array([unzigzag(r.get_exp_golomb()) for _ in range(count)], dtype=np.int64)
    q = prev + res.reshape(shape)
    if q.min() < 0 or q.max() >= (1 << p):
        raise PayloadDecodeError("predicted value leaves the quantizer range")
    return q


def decode_payload_fields(
    data: bytes,
    state: PredictorState = PredictorState(),
    coord_cfg: QuantConfig | None = None,
    matrix_cfg: QuantConfig | None = None,
) -> tuple[DecodedPayload, PredictorState]:
    coord_cfg = coord_cfg or QuantConfig()
    matrix_cfg = matrix_cfg or QuantConfig()
    r = BitReader(data)
    try:
        tag = r.get_bits(4)
        try:
            kind = RepresentationKind(tag)
        except ValueError:
            raise PayloadDecodeError(f"unknown representation kind {tag}") from None
        coords_present = r.get_flag()
        matrix_present = r.get_flag()
        prediction = r.get_flag()
        p = r.get_bits(5) + 1
        translator_uri = generator_uri = None
        if r.get_flag():
            translator_uri = _get_uri(r)
            generator_uri = _get_uri(r)
        if prediction and not state.valid:
            raise PredictorDecodeError("prediction-mode payload without a valid predictor")
        cq = mq = None
        if coords_present:
            n = r.get_exp_golomb()
            dims = r.get_bits(2)
            if dims not in (2, 3):
                raise ForbiddenDimsError(f"coordinate dims {dims} not in {{2, 3}}")
            if n < 1:
                raise PayloadDecodeError("coordinate_present with zero coordinates")
            prev = None
            if prediction:
                prev = state.prev_coords_q
                if prev is None:
                    raise PredictorDecodeError("no previous coordinates to predict from")
            cq = _get_values(r, (n, dims), prev, p)
        if matrix_present:
            shape = tuple(r.get_exp_golomb() for _ in range(3))
            if min(shape) < 1:
                raise PayloadDecodeError(f"empty matrix shape {shape}")
            prev = None
            if prediction:
                prev = state.prev_matrices_q
                if prev is None:
                    raise PredictorDecodeError("no previous matrices to predict from")
            mq = _get_values(r, shape, prev, p)
        bit_length = r.bit_offset
        r.get_rbsp_trailing()
    except (TruncationError, MalformedCodeError) as exc:
        if isinstance(exc, PayloadDecodeError):
            raise
        raise PayloadTruncatedError(str(exc)) from exc
    if coords_present and not kind.uses_coordinates or matrix_present and not kind.uses_matrices:
        raise PayloadDecodeError(f"{kind.name} payload carries a parameter set it does not use")

    params = GfvFrameParams(
        kind=kind,
        coords=None if cq is None else dequantize_array(cq, p, coord_cfg),
        matrices=None if mq is None else dequantize_array(mq, p, matrix_cfg),
        precision_bits=p,
        prediction=prediction,
        translator_uri=translator_uri,
        generator_uri=generator_uri,
    )
    return DecodedPayload(params, cq, mq, bit_length), _next_state(state, cq, mq)


def decode_payload(
    data: bytes,
    state: PredictorState = PredictorState(),
    coord_cfg: QuantConfig | None = None,
    matrix_cfg: QuantConfig | None = None,
) -> tuple[GfvFrameParams, PredictorState]:
    decoded, state = decode_payload_fields(data, state, coord_cfg, matrix_cfg)
    return decoded.params, state


def with_prediction(params: GfvFrameParams, prediction: bool) -> GfvFrameParams:
    return replace(params, prediction=prediction)
