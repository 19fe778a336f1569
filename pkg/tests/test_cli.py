"""Command-line interface: subcommand round trips and exit codes."""

import csv
import json

import numpy as np
import pytest

from precomp import CodecParams, SignalBuffer, compress_decompress, metrics
from precomp.cli import main
from precomp.io import read_signal, write_signal

from util import buffer_from, make_texture


@pytest.fixture
def image_path(tmp_path):
    path = tmp_path / "input.pgm"
    write_signal(buffer_from(make_texture(3, (32, 32))), path)
    return path


def test_encode_decode_round_trip(image_path, tmp_path, capsys):
    stream_path = tmp_path / "picture.bin"
    out_path = tmp_path / "decoded.pgm"
    assert main(["encode", "--input", str(image_path),
                 "--output", str(stream_path), "--theta", "13"]) == 0
    assert "bpp" in capsys.readouterr().out
    assert main(["decode", "--input", str(stream_path),
                 "--output", str(out_path)]) == 0

    x = read_signal(image_path)
    expected, stream = compress_decompress(x, CodecParams(theta=13))
    assert stream_path.read_bytes() == stream.payload
    decoded = read_signal(out_path)
    # the PGM output re-quantizes the decoded reals to 8 bits
    assert np.allclose(
        decoded.data, np.clip(np.rint(expected.data * 255), 0, 255) / 255,
        atol=1e-12,
    )


def test_run_writes_reports_and_prints_summary(image_path, tmp_path, capsys):
    out_dir = tmp_path / "report"
    code = main([
        "run",
        "--input", str(image_path),
        "--degradation", '{"type": "gaussian", "sigma": 0.6, "side": 7}',
        "--theta-list", "10,22,34",
        "--methods", "regular,proposed",
        "--max-iters", "4",
        "--margin", "4",
        "--out-dir", str(out_dir),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "regular theta=10" in out
    assert "BD-PSNR regular_vs_proposed" in out
    for name in ("cells.csv", "curves.csv", "curves.json", "bd_psnr.json",
                 "summary.json", "rd_curves.png", "admm_trace.png"):
        assert (out_dir / name).exists(), name


def test_run_reads_degradation_from_file(image_path, tmp_path):
    op_path = tmp_path / "op.json"
    op_path.write_text('{"type": "identity"}')
    out_dir = tmp_path / "report"
    code = main([
        "run", "--input", str(image_path), "--degradation", str(op_path),
        "--theta-list", "20", "--methods", "regular", "--margin", "4",
        "--out-dir", str(out_dir),
    ])
    assert code == 0
    with open(out_dir / "cells.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and rows[0]["status"] == "ok"


def test_run_exits_2_when_every_cell_fails(image_path, tmp_path, capsys):
    code = main([
        "run", "--input", str(image_path),
        "--degradation", '{"type": "identity"}',
        "--theta-list", "20", "--methods", "regular",
        "--margin", "35",  # larger than the 32x32 frame allows
        "--out-dir", str(tmp_path / "report"),
    ])
    assert code == 2
    assert "FAILED" in capsys.readouterr().out


def test_curves_subcommand_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(11)
    rates = np.sort(rng.uniform(0.2, 4.0, 6))
    curve_a = metrics.RdCurve("a", tuple(
        metrics.RdPoint(bpp=r, psnr_db=30 + 6 * np.log2(r)) for r in rates))
    curve_b = metrics.RdCurve("b", tuple(
        metrics.RdPoint(bpp=r, psnr_db=29 + 6 * np.log2(r)) for r in rates))
    for name, curve in (("a.csv", curve_a), ("b.csv", curve_b)):
        with open(tmp_path / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("method", "bpp", "psnr_db", "ssim"))
            for p in curve.points:
                writer.writerow(("m", f"{p.bpp:.12g}", f"{p.psnr_db:.12g}", ""))
    code = main(["curves", "--curve-a", str(tmp_path / "a.csv"),
                 "--curve-b", str(tmp_path / "b.csv"), "--subset", "both"])
    assert code == 0
    result = json.loads(capsys.readouterr().out)
    assert result["all"] == pytest.approx(
        metrics.bd_psnr(curve_a, curve_b, "all"), abs=1e-9)
    assert result["high_rate"] == pytest.approx(
        metrics.bd_psnr(curve_a, curve_b, "high_rate"), abs=1e-9)
    assert result["all"] == pytest.approx(1.0, abs=1e-6)


def test_curves_exits_1_when_not_computable(tmp_path, capsys):
    # three points cannot support the cubic rate-quality fit
    for name in ("a.csv", "b.csv"):
        with open(tmp_path / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("method", "bpp", "psnr_db", "ssim"))
            for r, q in ((0.5, 30), (1.0, 33), (2.0, 36)):
                writer.writerow(("m", r, q, ""))
    code = main(["curves", "--curve-a", str(tmp_path / "a.csv"),
                 "--curve-b", str(tmp_path / "b.csv"), "--subset", "all"])
    assert code == 1
    result = json.loads(capsys.readouterr().out)
    assert result["all"] is None
    assert "all_error" in result


def test_simulate_writes_three_videos(tmp_path):
    texture = buffer_from(make_texture(5, (64, 64)))
    from precomp.experiment import make_synthetic_pan

    video = make_synthetic_pan(texture, (3, 0), frames=4, size=(32, 32))
    in_path = tmp_path / "pan.y4m"
    write_signal(video, in_path)
    out_dir = tmp_path / "sim"
    code = main(["simulate", "--input", str(in_path), "--motion", "3,0",
                 "--window", "20", "--out-dir", str(out_dir)])
    assert code == 0
    for name in ("displayed", "perceived", "difference"):
        out = read_signal(out_dir / f"{name}.y4m")
        assert out.geometry == video.geometry
    shown = read_signal(out_dir / "displayed.y4m")
    assert np.array_equal(shown.data, video.data)


def test_simulate_requires_an_operator(tmp_path, image_path, capsys):
    with pytest.raises(SystemExit):
        main(["simulate", "--input", str(image_path),
              "--out-dir", str(tmp_path / "sim")])


def test_console_entry_point_is_wired():
    import importlib.metadata as md

    entries = md.entry_points(group="console_scripts")
    ours = [e for e in entries if e.name == "precomp"]
    assert ours and ours[0].value == "precomp.cli:main"
