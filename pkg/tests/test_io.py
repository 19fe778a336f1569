"""File round-trips and format validation for PGM, Y4M and raw float64."""

import json

import numpy as np
import pytest

from precomp import SignalBuffer, read_signal, write_signal
from precomp.io import SignalFormatError

from util import make_texture


def test_pgm_round_trip_is_exact_for_8bit_content(tmp_path):
    buf = SignalBuffer.from_array(make_texture(3, (17, 23)))
    path = tmp_path / "img.pgm"
    write_signal(buf, path)
    back = read_signal(path)
    assert back.geometry == buf.geometry
    assert np.array_equal(back.data, buf.data)


def test_pgm_header_layout(tmp_path):
    buf = SignalBuffer.from_array(np.zeros((3, 5)))
    path = tmp_path / "img.pgm"
    write_signal(buf, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n5 3\n255\n")
    assert len(raw) == len(b"P5\n5 3\n255\n") + 15


def test_pgm_write_clips_and_rounds(tmp_path):
    buf = SignalBuffer.from_array(np.array([[-0.5, 0.2, 1.7, 128.4 / 255]]))
    path = tmp_path / "img.pgm"
    write_signal(buf, path)
    raster = path.read_bytes()[len(b"P5\n4 1\n255\n"):]
    assert list(raster) == [0, 51, 255, 128]


def test_pgm_reader_skips_comments(tmp_path):
    path = tmp_path / "img.pgm"
    path.write_bytes(b"P5 # magic\n# a comment line\n2 # width\n1\n255\n\x00\xff")
    buf = read_signal(path)
    assert buf.geometry.frame_shape == (1, 2)
    assert list(buf.samples) == [0.0, 1.0]


def test_pgm_rejects_wrong_maxval_and_truncation(tmp_path):
    path = tmp_path / "img.pgm"
    path.write_bytes(b"P5\n2 1\n65535\n\x00\x00\x00\x00")
    with pytest.raises(SignalFormatError):
        read_signal(path)
    path.write_bytes(b"P5\n4 4\n255\n\x00\x00")
    with pytest.raises(SignalFormatError):
        read_signal(path)
    path.write_bytes(b"P2\n2 1\n255\n0 0")
    with pytest.raises(SignalFormatError):
        read_signal(path)


def test_pgm_rejects_multi_frame_signals(tmp_path):
    buf = SignalBuffer.from_array(np.zeros((2, 4, 4)))
    with pytest.raises(SignalFormatError):
        write_signal(buf, tmp_path / "img.pgm")


def test_y4m_round_trip_even_dims_uses_420(tmp_path):
    frames = np.stack([make_texture(s, (12, 16)) for s in (1, 2, 3)])
    buf = SignalBuffer.from_array(frames)
    path = tmp_path / "seq.y4m"
    write_signal(buf, path)
    head = path.read_bytes().split(b"\n", 1)[0]
    assert b"C420jpeg" in head and b"W16" in head and b"H12" in head
    back = read_signal(path)
    assert back.geometry == buf.geometry
    assert np.array_equal(back.data, buf.data)


def test_y4m_round_trip_odd_dims_uses_mono(tmp_path):
    buf = SignalBuffer.from_array(make_texture(4, (11, 13)))
    path = tmp_path / "seq.y4m"
    write_signal(buf, path, fps=(30, 1))
    head = path.read_bytes().split(b"\n", 1)[0]
    assert b"Cmono" in head and b"F30:1" in head
    back = read_signal(path)
    assert np.array_equal(back.data, buf.data)


def test_y4m_reader_accepts_foreign_420_variants(tmp_path):
    luma = bytes(range(16))
    chroma = bytes([128]) * 8
    body = b"YUV4MPEG2 W4 H4 F25:1 C420mpeg2\nFRAME\n" + luma + chroma
    path = tmp_path / "seq.y4m"
    path.write_bytes(body)
    buf = read_signal(path)
    assert buf.geometry.frame_shape == (4, 4)
    assert np.array_equal(buf.samples, np.arange(16) / 255.0)


def test_y4m_default_colorspace_is_420(tmp_path):
    luma = bytes(16)
    chroma = bytes(8)
    path = tmp_path / "seq.y4m"
    path.write_bytes(b"YUV4MPEG2 W4 H4 F25:1\nFRAME\n" + luma + chroma)
    assert read_signal(path).geometry.frames == 1


def test_y4m_malformed_streams(tmp_path):
    path = tmp_path / "seq.y4m"
    path.write_bytes(b"JUNK W4 H4\nFRAME\n" + bytes(16))
    with pytest.raises(SignalFormatError):
        read_signal(path)
    path.write_bytes(b"YUV4MPEG2 W4 H4 C444\nFRAME\n" + bytes(48))
    with pytest.raises(SignalFormatError):
        read_signal(path)
    path.write_bytes(b"YUV4MPEG2 W4 H4 Cmono\nFRAME\n" + bytes(7))
    with pytest.raises(SignalFormatError):
        read_signal(path)
    path.write_bytes(b"YUV4MPEG2 W4 H4 Cmono\n")
    with pytest.raises(SignalFormatError):
        read_signal(path)


def test_raw_f64_round_trip_keeps_exact_floats(tmp_path):
    rng = np.random.default_rng(9)
    buf = SignalBuffer.from_array(rng.normal(0.0, 3.0, (2, 5, 7)))
    path = tmp_path / "sig.f64"
    write_signal(buf, path)
    meta = json.loads((tmp_path / "sig.f64.json").read_text())
    assert meta == {"width": 7, "height": 5, "frames": 2}
    back = read_signal(path)
    assert back.geometry == buf.geometry
    assert np.array_equal(back.data, buf.data)


def test_raw_f64_requires_sidecar_and_matching_count(tmp_path):
    path = tmp_path / "sig.f64"
    path.write_bytes(bytes(8 * 4))
    with pytest.raises(SignalFormatError):
        read_signal(path)
    (tmp_path / "sig.f64.json").write_text('{"width": 5, "height": 5}')
    with pytest.raises(SignalFormatError):
        read_signal(path)


def test_format_inference_and_override(tmp_path):
    buf = SignalBuffer.from_array(np.zeros((4, 4)))
    odd = tmp_path / "img.data"
    with pytest.raises(SignalFormatError):
        write_signal(buf, odd)
    write_signal(buf, odd, fmt="pgm")
    assert read_signal(odd, fmt="pgm").geometry == buf.geometry
    with pytest.raises(SignalFormatError):
        read_signal(odd, fmt="jpeg2000")
