"""Generative face video parameters carried as SEI in hybrid-codec streams."""

from .gfv_payload import (
    GfvFrameParams,
    PredictorState,
    QuantConfig,
    RepresentationKind,
    decode_payload,
    encode_payload,
    payload_bit_length,
)
from .nal_mux import CodecFamily, NalUnit, SeiMessage, build_sei_nal, parse_sei_nal
from .pipeline import DecodeOptions, Networks, SequenceManifest, decode_sequence, encode_sequence

__version__ = "0.1.0"
