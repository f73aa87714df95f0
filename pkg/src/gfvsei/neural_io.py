"""Decoder-side network interfaces.

A reference fully-connected translator (trans-encoder and trans-decoder of
four layers each, width 256 by default), its weight-file format, and a
deterministic stand-in for the generative network: Gaussian-weighted
keypoint motion followed by a bilinear backward warp.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    ChainError,
    EmptyKeypointError,
    ShapeError,
    TruncatedWeightsError,
    WeightsError,
)
from .gfv_payload import GfvFrameParams, RepresentationKind
from .picture import RGB444, PictureBuffer

WEIGHTS_MAGIC = b"GFVT"
WEIGHTS_VERSION = 1
HIDDEN_WIDTH = 256
STACK_DEPTH = 4


class NetworkRole(enum.Enum):
    TRANSLATOR = "translator"
    GENERATOR = "generator"


@dataclass(frozen=True)
class NetworkDescriptor:
    uri: str
    role: NetworkRole

    def __post_init__(self):
        if not self.uri:
            raise ValueError("network URI must be nonempty")


@dataclass(frozen=True)
class MlpWeights:
    """Fully-connected layers as (W, b) with W of shape (inputs, outputs).

    ``stacks`` splits the layers into consecutive groups; no activation
    follows the last layer of a group. Eight layers default to two stacks
    of four, so the latent embedding between them is left linear.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    stacks: tuple[int, ...] | None = None

    def __post_init__(self):
        layers = tuple((np.asarray(w, dtype=np.float32), np.asarray(b, dtype=np.float32))
                       for w, b in self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ChainError("network has no layers")
        for k, (w, b) in enumerate(layers):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ChainError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k and layers[k - 1][0].shape[1] != w.shape[0]:
                raise ChainError(
                    f"layer {k - 1} outputs {layers[k - 1][0].shape[1]} "
                    f"but layer {k} expects {w.shape[0]}"
                )
        if self.stacks is None:
            n = len(layers)
            stacks = (STACK_DEPTH, STACK_DEPTH) if n == 2 * STACK_DEPTH else (n,)
            object.__setattr__(self, "stacks", stacks)
        elif sum(self.stacks) != len(layers) or min(self.stacks) < 1:
            raise ChainError(f"stacks {self.stacks} do not partition {len(layers)} layers")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[1]

    def linear_after(self) -> set[int]:
        """Indices of layers whose output gets no ReLU."""
        ends = np.cumsum(self.stacks) - 1
        return set(int(e) for e in ends)

    def check_hidden_width(self, width: int = HIDDEN_WIDTH) -> None:
        for k, (w, _) in enumerate(self.layers[:-1]):
            if w.shape[1] != width:
                raise ChainError(f"layer {k} width {w.shape[1]}, declared {width}")


def mlp_forward(x, w: MlpWeights) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (w.input_dim,):
        raise ShapeError(f"input of shape {x.shape}, network expects ({w.input_dim},)")
    linear = w.linear_after()
    for k, (weight, bias) in enumerate(w.layers):
        x = x @ weight.astype(np.float64) + bias.astype(np.float64)
        if k not in linear:
            x = np.maximum(x, 0.0)
    return x


def random_weights(dims: Sequence[int], rng: np.random.Generator, stacks=None) -> MlpWeights:
    """He-scaled random layers chaining ``dims[0] -> ... -> dims[-1]``."""
    layers = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        scale = np.sqrt(2.0 / n_in)
        layers.append((rng.standard_normal((n_in, n_out)) * scale,
                       rng.standard_normal(n_out) * 0.1))
    return MlpWeights(tuple(layers), stacks)


def translator_dims(input_dim: int, output_dim: int, width: int = HIDDEN_WIDTH) -> list[int]:
    return [input_dim] + [width] * (2 * STACK_DEPTH - 1) + [output_dim]


# -- weight files -----------------------------------------------------------

def save_weights(path, w: MlpWeights) -> None:
    out = bytearray(WEIGHTS_MAGIC)
    out.append(WEIGHTS_VERSION)
    out += struct.pack("<I", len(w.layers))
    for weight, _ in w.layers:
        out += struct.pack("<II", *weight.shape)
    for weight, bias in w.layers:
        out += weight.astype("<f4").tobytes(order="C")
        out += bias.astype("<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def load_weights(path, n_layers: int | None = 2 * STACK_DEPTH,
                 hidden_width: int | None = None) -> MlpWeights:
    data = Path(path).read_bytes()
    if data[:4] != WEIGHTS_MAGIC:
        raise BadMagicError(f"{path}: not a GFVT weights file")
    if len(data) < 9:
        raise TruncatedWeightsError(f"{path}: header truncated")
    if data[4] != WEIGHTS_VERSION:
        raise WeightsError(f"{path}: unsupported version {data[4]}")
    (count,) = struct.unpack_from("<I", data, 5)
    pos = 9
    if len(data) < pos + 8 * count:
        raise TruncatedWeightsError(f"{path}: layer table truncated")
    shapes = [struct.unpack_from("<II", data, pos + 8 * k) for k in range(count)]
    pos += 8 * count
    if n_layers is not None and count != n_layers:
        raise ChainError(f"{path}: {count} layers, topology declares {n_layers}")
    for k in range(1, count):
        if shapes[k - 1][1] != shapes[k][0]:
            raise ChainError(f"{path}: layer {k - 1} -> {k} dimensions {shapes[k - 1]} {shapes[k]}")
    need = pos + 4 * sum(r * c + c for r, c in shapes)
    if len(data) < need:
        raise TruncatedWeightsError(f"{path}: {len(data)} bytes, need {need}")
    layers = []
    for rows, cols in shapes:
        weight = np.frombuffer(data, "<f4", rows * cols, pos).reshape(rows, cols)
        pos += 4 * rows * cols
        bias = np.frombuffer(data, "<f4", cols, pos)
        pos += 4 * cols
        layers.append((weight.astype(np.float32), bias.astype(np.float32)))
    w = MlpWeights(tuple(layers))
    if hidden_width is not None:
        w.check_hidden_width(hidden_width)
    return w


# -- translation ------------------------------------------------------------

def default_target_shapes(kind: RepresentationKind, size: int):
    """(coord_shape, matrix_shape) for a target of ``size`` values, when the
    kind alone determines it."""
    if kind.uses_coordinates and kind.uses_matrices:
        raise ShapeError(f"{kind.name} targets need explicit coordinate and matrix shapes")
    if kind.uses_coordinates:
        if size % 2:
            raise ShapeError(f"{size} values cannot form 2-D coordinates")
        return (size // 2, 2), None
    side = int(round(np.sqrt(size)))
    if side * side == size:
        return None, (1, side, side)
    return None, (1, 1, size)


def translate(params: GfvFrameParams, w: MlpWeights, target_kind,
              coord_shape=None, matrix_shape=None) -> GfvFrameParams:
    target_kind = RepresentationKind.parse(target_kind)
    if coord_shape is None and matrix_shape is None:
        coord_shape, matrix_shape = default_target_shapes(target_kind, w.output_dim)
    out_size = (int(np.prod(coord_shape)) if coord_shape else 0) + \
               (int(np.prod(matrix_shape)) if matrix_shape else 0)
    if out_size != w.output_dim:
        raise ShapeError(f"target shapes hold {out_size} values, network emits {w.output_dim}")
    y = mlp_forward(params.flat_values(), w)
    return unflatten(y, params, target_kind, coord_shape, matrix_shape)


def unflatten(values, like: GfvFrameParams, kind, coord_shape=None, matrix_shape=None):
    values = np.asarray(values, dtype=np.float64)
    n_coord = int(np.prod(coord_shape)) if coord_shape else 0
    coords = values[:n_coord].reshape(coord_shape) if coord_shape else None
    matrices = values[n_coord:].reshape(matrix_shape) if matrix_shape else None
    return replace(like, kind=RepresentationKind.parse(kind), coords=coords,
                   matrices=matrices, prediction=False)


class Translator:
    """Weights bound to a fixed target format."""

    def __init__(self, weights: MlpWeights, target_kind, coord_shape=None, matrix_shape=None):
        self.weights = weights
        self.target_kind = RepresentationKind.parse(target_kind)
        self.coord_shape = coord_shape
        self.matrix_shape = matrix_shape

    def __call__(self, params: GfvFrameParams) -> GfvFrameParams:
        return translate(params, self.weights, self.target_kind,
                         self.coord_shape, self.matrix_shape)


# -- toy generator ----------------------------------------------------------

def to_pixels(kps, width: int, height: int) -> np.ndarray:
    """Normalized [-1, 1] (x, y) to pixel coordinates."""
    kps = np.asarray(kps, dtype=np.float64)[:, :2]
    return np.stack([(kps[:, 0] + 1) / 2 * (width - 1),
                     (kps[:, 1] + 1) / 2 * (height - 1)], axis=1)


def dense_motion_at(points, base_px, cur_px, sigma: float) -> np.ndarray:
    """Flow at arbitrary pixel ``points`` (K x 2) from pixel-space keypoints."""
    points = np.asarray(points, dtype=np.float64)
    d2 = ((points[:, None, :] - base_px[None, :, :]) ** 2).sum(-1)
    logits = -d2 / (2.0 * sigma * sigma)
    logits -= logits.max(axis=1, keepdims=True)
    wts = np.exp(logits)
    wts /= wts.sum(axis=1, keepdims=True)
    return wts @ (cur_px - base_px)


def toy_dense_motion(base_kps, cur_kps, width: int, height: int,
                     sigma: float | None = None) -> np.ndarray:
    """H x W x 2 flow (dx, dy in pixels) pulling base keypoints to current ones."""
    base_kps = np.asarray(base_kps, dtype=np.float64)
    cur_kps = np.asarray(cur_kps, dtype=np.float64)
    if base_kps.ndim != 2 or base_kps.shape[0] == 0:
        raise EmptyKeypointError("dense motion needs at least one keypoint")
    if cur_kps.shape != base_kps.shape:
        raise ShapeError(f"keypoint sets differ: {base_kps.shape} vs {cur_kps.shape}")
    if sigma is None:
        sigma = default_sigma(width, height)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    base_px = to_pixels(base_kps, width, height)
    cur_px = to_pixels(cur_kps, width, height)
    ys, xs = np.mgrid[0:height, 0:width]
    grid = np.stack([xs.ravel(), ys.ravel()], axis=1)
    return dense_motion_at(grid, base_px, cur_px, sigma).reshape(height, width, 2)


def default_sigma(width: int, height: int) -> float:
    return 0.1 * min(width, height)


def warp_bilinear(img: PictureBuffer, flow) -> PictureBuffer:
    """Backward warp: out(p) = img(p - flow(p)), border-clamped."""
    if img.format != RGB444:
        raise ValueError("warp operates on RGB 4:4:4 pictures")
    flow = np.asarray(flow, dtype=np.float64)
    h, w = img.height, img.width
    if flow.shape != (h, w, 2):
        raise ShapeError(f"flow shape {flow.shape}, picture is {h}x{w}")
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = np.clip(xs - flow[..., 0], 0, w - 1)
    sy = np.clip(ys - flow[..., 1], 0, h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    out = []
    for plane in img.planes:
        p = plane.astype(np.float64)
        top = p[y0, x0] * (1 - fx) + p[y0, x1] * fx
        bot = p[y1, x0] * (1 - fx) + p[y1, x1] * fx
        v = top * (1 - fy) + bot * fy
        out.append(np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8))
    return PictureBuffer(w, h, tuple(out), RGB444)


class Generator(Protocol):
    def __call__(self, texture: PictureBuffer, base: GfvFrameParams,
                 current: GfvFrameParams) -> PictureBuffer: ...


class ToyGenerator:
    """Keypoint-driven warp of the texture picture.

    Uses the x/y columns of the coordinate set. Parameters without
    coordinates produce an unmodified copy of the texture.
    """

    def __init__(self, sigma: float | None = None):
        self.sigma = sigma

    def __call__(self, texture: PictureBuffer, base: GfvFrameParams,
                 current: GfvFrameParams) -> PictureBuffer:
        if base.coords is None or current.coords is None:
            return PictureBuffer(texture.width, texture.height,
                                 tuple(pl.copy() for pl in texture.planes), RGB444)
        flow = toy_dense_motion(base.coords, current.coords, texture.width,
                                texture.height, self.sigma)
        return warp_bilinear(texture, flow)
