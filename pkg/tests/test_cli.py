import json

import numpy as np
import pytest

from gfvsei.cli import run
from gfvsei.nal_mux import join_annexb, split_annexb
from gfvsei.neural_io import random_weights, save_weights, translator_dims
from gfvsei.picture import PictureBuffer, read_ppm, read_yuv420, write_ppm
from gfvsei.pipeline import raw_base_stream
from gfvsei.rate_stats import BitLog
from gfvsei.synthetic import write_demo


@pytest.fixture
def demo(tmp_path):
    return write_demo(tmp_path / "demo", frames=6, width=16, height=16)


def encode(demo, tmp_path, *extra):
    out = tmp_path / "s.bin"
    assert run(["encode", "--manifest", str(demo), "--out", str(out),
                "--log", str(tmp_path / "bits.csv"), *extra]) == 0
    return out


def test_encode_and_decode(demo, tmp_path):
    out = encode(demo, tmp_path)
    assert out.stat().st_size > 0
    assert len(BitLog.read_csv(tmp_path / "bits.csv")) == 6
    frames = tmp_path / "frames"
    assert run(["decode", "--in", str(out), "--out-dir", str(frames),
                "--log", str(tmp_path / "dec.csv")]) == 0
    ppms = sorted(frames.glob("*.ppm"))
    assert [p.name for p in ppms][:2] == ["frame_00000.ppm", "frame_00001.ppm"] and len(ppms) == 6
    assert read_ppm(ppms[0]).width == 16
    assert (tmp_path / "dec.csv").read_text() == (tmp_path / "bits.csv").read_text()


def test_encode_deterministic(demo, tmp_path):
    a = encode(demo, tmp_path).read_bytes()
    log_a = (tmp_path / "bits.csv").read_bytes()
    b = encode(demo, tmp_path).read_bytes()
    assert a == b and log_a == (tmp_path / "bits.csv").read_bytes()


def test_encode_overrides(demo, tmp_path):
    encode(demo, tmp_path, "--no-prediction", "--precision", "12")
    raw = BitLog.read_csv(tmp_path / "bits.csv").sei_bits
    encode(demo, tmp_path)
    assert BitLog.read_csv(tmp_path / "bits.csv").sei_bits < raw


def test_inspect(demo, tmp_path, capsys):
    out = encode(demo, tmp_path)
    assert run(["inspect", "--in", str(out)]) == 0
    text = capsys.readouterr().out
    assert "GFV SEI #0  (access unit 0, base picture)" in text
    assert "kind=KEYPOINTS_2D coordinate_present=1 matrix_present=0 prediction=0 precision=8" in text
    assert "prediction=1" in text
    assert "coords N=10 D=2 q=[" in text
    assert text.endswith("6 GFV SEI message(s)\n")
    assert run(["inspect", "--in", str(out), "--out", str(tmp_path / "dump.txt")]) == 0
    assert (tmp_path / "dump.txt").read_text() == text


def test_strip_restores_base(demo, tmp_path):
    out = encode(demo, tmp_path)
    stripped = tmp_path / "base.bin"
    assert run(["strip", "--in", str(out), "--out", str(stripped)]) == 0
    pics = read_yuv420(demo.parent / "base.yuv", 16, 16)
    assert stripped.read_bytes() == raw_base_stream(pics, "vvc")
    assert run(["strip", "--in", str(out), "--out", str(stripped), "--gfv-only"]) == 0
    assert stripped.read_bytes() == raw_base_stream(pics, "vvc")
    assert run(["strip", "--in", str(out), "--out", str(stripped), "--gfv-only",
                "--payload-type", "5"]) == 0
    assert stripped.read_bytes() == out.read_bytes()


def test_stats(demo, tmp_path, capsys):
    encode(demo, tmp_path)
    assert run(["stats", "--log", str(tmp_path / "bits.csv"), "--summary", str(tmp_path / "s.json"),
                "--series", str(tmp_path / "series.csv"), "--window", "3"]) == 0
    text = capsys.readouterr().out
    assert "base ratio" in text and "windowed" in text
    summary = json.loads((tmp_path / "s.json").read_text())
    log = BitLog.read_csv(tmp_path / "bits.csv")
    assert summary["total_bits"] == log.base_bits + log.sei_bits
    rows = (tmp_path / "series.csv").read_text().splitlines()
    assert rows[0] == "picture,bits" and rows[1] == f"0,{log.records[0].sei_bits}"


def test_animation_and_translator(demo, tmp_path):
    out = encode(demo, tmp_path)
    tex = tmp_path / "tex.ppm"
    write_ppm(tex, PictureBuffer.from_rgb(np.full((16, 16, 3), 77, np.uint8)))
    assert run(["decode", "--in", str(out), "--out-dir", str(tmp_path / "anim"),
                "--base-image", str(tex)]) == 0
    assert (read_ppm(tmp_path / "anim" / "frame_00003.ppm").rgb() == 77).all()
    w = tmp_path / "t.gfvt"
    save_weights(w, random_weights(translator_dims(20, 20, width=16), np.random.default_rng(0)))
    assert run(["decode", "--in", str(out), "--out-dir", str(tmp_path / "tr"),
                "--translator", str(w), "--target-kind", "KEYPOINTS_2D"]) == 0
    assert len(list((tmp_path / "tr").glob("*.ppm"))) == 6
    assert run(["decode", "--in", str(out), "--out-dir", str(tmp_path / "tr"),
                "--translator", str(w)]) == 1


def test_usage_errors(tmp_path, capsys):
    assert run([]) == 1
    assert run(["encode", "--bogus"]) == 1
    assert run(["inspect", "--in", str(tmp_path / "missing.bin")]) == 1
    assert run(["inspect", "--help"]) == 0
    assert "usage" in capsys.readouterr().err


def test_data_errors(tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"\x41\x00\x00\x01\x41")
    assert run(["inspect", "--in", str(bad)]) == 2
    bad.write_bytes(b"not,a,log\n")
    assert run(["stats", "--log", str(bad)]) == 2
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"pictures": [], "nonsense": 1}))
    assert run(["encode", "--manifest", str(m), "--out", str(tmp_path / "o.bin")]) == 2
    assert "gfvsei: error" in capsys.readouterr().err


def test_codec_family_flag(tmp_path):
    d = write_demo(tmp_path / "d", frames=3, width=8, height=8)
    out = tmp_path / "h.bin"
    assert run(["encode", "--manifest", str(d), "--out", str(out), "--codec-family", "hevc"]) == 0
    aus = split_annexb(out.read_bytes(), "hevc")
    assert aus.access_units[0][0].header_bytes == b"\x4e\x01"
    assert join_annexb(aus) == out.read_bytes()
    assert run(["inspect", "--in", str(out), "--codec-family", "hevc",
                "--out", str(tmp_path / "x.txt")]) == 0
    assert "3 GFV SEI" in (tmp_path / "x.txt").read_text()
