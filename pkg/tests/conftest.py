import random

import numpy as np
import pytest

from gfvsei.gfv_payload import GfvFrameParams, RepresentationKind
from gfvsei.nal_mux import (
    PREFIX_SEI_TYPE,
    SUFFIX_SEI_TYPE,
    AccessUnitStream,
    CodecFamily,
    NalUnit,
    make_header,
)

NON_SEI_TYPES = {
    CodecFamily.AVC: [1, 5, 7, 8, 9],
    CodecFamily.HEVC: [0, 1, 19, 32, 33, 34],
    CodecFamily.VVC: [0, 1, 8, 14, 15, 16],
}


def adversarial_bytes(rng: random.Random, n: int) -> bytes:
    """Random bytes biased heavily towards zero runs and small values."""
    out = bytearray()
    while len(out) < n:
        r = rng.random()
        if r < 0.3:
            out += bytes(rng.randint(1, 5))
        elif r < 0.6:
            out.append(rng.randint(0, 3))
        else:
            out.append(rng.randint(0, 255))
    return bytes(out[:n])


def random_base_stream(rng: random.Random, family: CodecFamily | None = None) -> AccessUnitStream:
    family = family or rng.choice(list(CodecFamily))
    aus = []
    for _ in range(rng.randint(1, 6)):
        payload = adversarial_bytes(rng, rng.randint(0, 60)) + bytes([rng.randint(1, 255)])
        header = make_header(family, rng.choice(NON_SEI_TYPES[family]), 3)
        aus.append([NalUnit(family, header, payload)])
    return AccessUnitStream(family, aus)


def sei_types(family):
    return {t for t in (PREFIX_SEI_TYPE[family], SUFFIX_SEI_TYPE[family]) if t is not None}


def random_params(rng: np.random.Generator, kind=None, p=None, prediction=False,
                  like: GfvFrameParams | None = None) -> GfvFrameParams:
    """Random parameters; with ``like``, reuse its kind and shapes."""
    if like is not None:
        kind = like.kind
        cshape = None if like.coords is None else like.coords.shape
        mshape = None if like.matrices is None else like.matrices.shape
    else:
        kind = RepresentationKind(int(rng.integers(0, 7))) if kind is None else kind
        cshape = (int(rng.integers(1, 21)), int(rng.choice([2, 3]))) if kind.uses_coordinates else None
        mshape = tuple(int(x) for x in rng.integers(1, 5, size=3)) if kind.uses_matrices else None
    p = int(rng.integers(1, 17)) if p is None else p
    uris = rng.random() < 0.2
    return GfvFrameParams(
        kind=kind,
        coords=None if cshape is None else rng.uniform(-1, 1, size=cshape),
        matrices=None if mshape is None else rng.uniform(-1, 1, size=mshape),
        precision_bits=p,
        prediction=prediction,
        translator_uri="urn:gfv:translator:cfte2dac" if uris else None,
        generator_uri="https://example.org/gen/ü" if uris else None,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
