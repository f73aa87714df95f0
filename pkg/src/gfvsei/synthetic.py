"""Synthetic base pictures and keypoint trajectories for demos and tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .gfv_payload import RepresentationKind
from .picture import PictureBuffer, rgb444_to_yuv420, write_yuv420
from .pipeline import PictureRecord, SequenceManifest


def face_picture(width: int = 64, height: int = 64) -> PictureBuffer:
    """A smooth gradient with an elliptical blob and two dark eyes."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    u, v = xs / max(width - 1, 1), ys / max(height - 1, 1)
    r = 60 + 120 * u
    g = 80 + 100 * v
    b = 140 - 60 * u * v
    face = ((u - 0.5) / 0.32) ** 2 + ((v - 0.5) / 0.42) ** 2 < 1
    r[face], g[face], b[face] = 220, 180, 150
    for ex in (0.38, 0.62):
        eye = ((u - ex) / 0.06) ** 2 + ((v - 0.42) / 0.04) ** 2 < 1
        r[eye], g[eye], b[eye] = 30, 30, 40
    rgb = np.stack([r, g, b], axis=-1)
    return PictureBuffer.from_rgb(np.clip(np.round(rgb), 0, 255).astype(np.uint8))


def keypoint_track(frames: int, n: int = 10, seed: int = 0,
                   amplitude: float = 0.05, static: bool = False) -> np.ndarray:
    """frames x n x 2 normalized keypoints moving on small ellipses."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(-0.6, 0.6, size=(n, 2))
    if static:
        return np.repeat(base[None], frames, axis=0)
    phase = rng.uniform(0, 2 * np.pi, size=n)
    t = np.arange(frames)[:, None] / 8.0
    dx = amplitude * np.cos(t + phase)
    dy = amplitude * np.sin(1.3 * t + phase)
    return base[None] + np.stack([dx, dy], axis=-1) - np.stack(
        [amplitude * np.cos(phase), amplitude * np.sin(phase)], axis=-1)[None]


def demo_manifest(frames: int = 32, width: int = 64, height: int = 64, n: int = 10,
                  seed: int = 0, static: bool = False) -> SequenceManifest:
    track = keypoint_track(frames, n, seed, static=static)
    return SequenceManifest(
        base_yuv_path="base.yuv",
        width=width,
        height=height,
        pictures=[PictureRecord(RepresentationKind.KEYPOINTS_2D, kps.tolist()) for kps in track],
        precision_bits=8,
        prediction=True,
    )


def write_demo(directory, frames: int = 32, width: int = 64, height: int = 64,
               n: int = 10, seed: int = 0) -> Path:
    """Write base.yuv and manifest.json (with parameters in a sidecar file)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_yuv420(directory / "base.yuv", [rgb444_to_yuv420(face_picture(width, height))])
    m = demo_manifest(frames, width, height, n, seed)
    d = json.loads(m.to_json())
    (directory / "params.json").write_text(json.dumps(d.pop("pictures")) + "\n")
    d["pictures_path"] = "params.json"
    path = directory / "manifest.json"
    path.write_text(json.dumps(d, indent=1) + "\n")
    return path
