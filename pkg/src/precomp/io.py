"""Signal file I/O: PGM (P5), Y4M (mono / 4:2:0, luma only), raw float64.

8-bit formats map integer k to k/255 on read and round(clip(v, 0, 1) * 255)
on write, so in-range 8-bit content round-trips losslessly. The raw float64
format keeps exact sample values and carries geometry in a JSON sidecar.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .signal import SignalBuffer, SignalGeometry


class SignalFormatError(ValueError):
    """Malformed or unsupported signal file."""


_EXT_FORMATS = {".pgm": "pgm", ".y4m": "y4m", ".f64": "raw-f64", ".raw": "raw-f64"}

# Y4M colorspaces we accept: luma plane kept, chroma (if any) discarded.
_Y4M_MONO = {"mono"}
_Y4M_420 = {"420", "420jpeg", "420mpeg2", "420paldv"}


def _resolve_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("pgm", "y4m", "raw-f64"):
            raise SignalFormatError(f"unknown format {fmt!r}")
        return fmt
    ext = path.suffix.lower()
    if ext not in _EXT_FORMATS:
        raise SignalFormatError(f"cannot infer format from extension {ext!r}")
    return _EXT_FORMATS[ext]


def read_signal(path, fmt: str | None = None) -> SignalBuffer:
    """Read a signal file; format inferred from the extension unless given."""
    path = Path(path)
    fmt = _resolve_format(path, fmt)
    if fmt == "pgm":
        return _read_pgm(path)
    if fmt == "y4m":
        return _read_y4m(path)
    return _read_raw_f64(path)


def write_signal(signal: SignalBuffer, path, fmt: str | None = None, fps=(25, 1)):
    """Write a signal file; format inferred from the extension unless given."""
    path = Path(path)
    fmt = _resolve_format(path, fmt)
    if fmt == "pgm":
        _write_pgm(signal, path)
    elif fmt == "y4m":
        _write_y4m(signal, path, fps)
    else:
        _write_raw_f64(signal, path)


def _to_bytes(plane: np.ndarray) -> bytes:
    return np.rint(np.clip(plane, 0.0, 1.0) * 255.0).astype(np.uint8).tobytes()


# ---------------------------------------------------------------- PGM


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated tokens after skipping # comments."""
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise SignalFormatError("truncated PGM header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i + 1  # single whitespace after maxval precedes the raster


def _read_pgm(path: Path) -> SignalBuffer:
    data = path.read_bytes()
    tokens, offset = _read_pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise SignalFormatError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise SignalFormatError(f"bad PGM header field: {e}") from e
    if maxval != 255:
        raise SignalFormatError(f"only maxval 255 PGM supported, got {maxval}")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise SignalFormatError(
            f"PGM raster has {len(raster)} bytes, expected {width * height}"
        )
    plane = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / 255.0
    return SignalBuffer.from_array(plane.reshape(height, width))


def _write_pgm(signal: SignalBuffer, path: Path):
    if signal.geometry.frames != 1:
        raise SignalFormatError("PGM holds a single frame; use y4m for sequences")
    h, w = signal.geometry.frame_shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    path.write_bytes(header + _to_bytes(signal.frame(0)))


# ---------------------------------------------------------------- Y4M


def _parse_y4m_header(line: bytes) -> tuple[int, int, str]:
    fields = line.decode("ascii", "replace").split(" ")
    if fields[0] != "YUV4MPEG2":
        raise SignalFormatError("not a YUV4MPEG2 stream")
    width = height = None
    colorspace = "420"  # Y4M default when no C tag is present
    for tag in fields[1:]:
        if not tag:
            continue
        key, value = tag[0], tag[1:]
        if key == "W":
            width = int(value)
        elif key == "H":
            height = int(value)
        elif key == "C":
            colorspace = value
    if width is None or height is None:
        raise SignalFormatError("Y4M header missing W or H")
    return width, height, colorspace


def _read_y4m(path: Path) -> SignalBuffer:
    data = path.read_bytes()
    eol = data.find(b"\n")
    if eol < 0:
        raise SignalFormatError("truncated Y4M header")
    width, height, colorspace = _parse_y4m_header(data[:eol])
    if colorspace in _Y4M_MONO:
        chroma_bytes = 0
    elif colorspace in _Y4M_420:
        chroma_bytes = 2 * ((width // 2) * (height // 2))
    else:
        raise SignalFormatError(f"unsupported Y4M colorspace C{colorspace}")
    luma_bytes = width * height
    frames = []
    pos = eol + 1
    while pos < len(data):
        eol = data.find(b"\n", pos)
        if eol < 0 or not data[pos:eol].startswith(b"FRAME"):
            raise SignalFormatError("malformed Y4M frame marker")
        pos = eol + 1
        raster = data[pos : pos + luma_bytes]
        if len(raster) != luma_bytes:
            raise SignalFormatError("truncated Y4M frame")
        frames.append(
            np.frombuffer(raster, dtype=np.uint8).astype(np.float64).reshape(height, width)
            / 255.0
        )
        pos += luma_bytes + chroma_bytes
    if not frames:
        raise SignalFormatError("Y4M stream contains no frames")
    return SignalBuffer.from_array(np.stack(frames))


def _write_y4m(signal: SignalBuffer, path: Path, fps):
    h, w = signal.geometry.frame_shape
    use_420 = w % 2 == 0 and h % 2 == 0
    colorspace = "420jpeg" if use_420 else "mono"
    header = f"YUV4MPEG2 W{w} H{h} F{fps[0]}:{fps[1]} Ip A1:1 C{colorspace}\n"
    chroma = bytes([128]) * ((w // 2) * (h // 2)) * 2 if use_420 else b""
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for k in range(signal.geometry.frames):
            fh.write(b"FRAME\n")
            fh.write(_to_bytes(signal.frame(k)))
            fh.write(chroma)


# ---------------------------------------------------------------- raw float64


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _read_raw_f64(path: Path) -> SignalBuffer:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise SignalFormatError(f"raw-f64 requires a geometry sidecar at {sidecar}")
    meta = json.loads(sidecar.read_text())
    try:
        geometry = SignalGeometry(
            width=int(meta["width"]),
            height=int(meta["height"]),
            frames=int(meta.get("frames", 1)),
        )
    except (KeyError, ValueError) as e:
        raise SignalFormatError(f"bad geometry sidecar: {e}") from e
    samples = np.frombuffer(path.read_bytes(), dtype="<f8")
    if samples.size != geometry.total_samples:
        raise SignalFormatError(
            f"raw file holds {samples.size} samples, geometry needs "
            f"{geometry.total_samples}"
        )
    return SignalBuffer(geometry, samples)


def _write_raw_f64(signal: SignalBuffer, path: Path):
    path.write_bytes(signal.data.astype("<f8").tobytes())
    meta = {
        "width": signal.geometry.width,
        "height": signal.geometry.height,
        "frames": signal.geometry.frames,
    }
    _sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")
