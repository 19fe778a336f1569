"""Subprocess adapter for external codecs.

The command template receives {input}, {bitstream}, {output}, and {qp}
placeholders and runs through the shell, so an encode+decode pipeline fits
in one template, e.g.

    cmd="enc -q {qp} -o {bitstream} {input} && dec -o {output} {bitstream}"

The adapter writes the signal clamped to [0, 1] as 8-bit PGM (one frame)
or Y4M (video), then reads {output} back in the same format. Clamping and
8-bit rounding loss happen here, on the codec boundary, by design: the
iterative loop's intermediates are unclipped reals that only the builtin
backend can honor. Temp files are removed on success and kept on failure,
with the directory named in the raised error.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from pathlib import Path

from .codec import CodecParams, CompressedBitstream
from .io import read_signal, write_signal
from .signal import SignalBuffer


class ExternalCodecError(RuntimeError):
    """External codec invocation failed; carries captured diagnostics."""

    def __init__(self, message: str, command: str = "", stderr: str = "",
                 kept_dir: str = ""):
        details = [message]
        if command:
            details.append(f"command: {command}")
        if stderr:
            details.append(f"stderr: {stderr.strip()}")
        if kept_dir:
            details.append(f"work files kept in {kept_dir}")
        super().__init__("\n".join(details))
        self.command = command
        self.stderr = stderr
        self.kept_dir = kept_dir


def external_roundtrip(signal: SignalBuffer, params: CodecParams,
                       timeout: float = 600.0):
    """Compress and decompress through the configured command template."""
    if params.backend != "external" or not params.command:
        raise ValueError("params must select the external backend with a command")
    suffix = ".pgm" if signal.geometry.frames == 1 else ".y4m"
    workdir = Path(tempfile.mkdtemp(prefix="precomp-",
                                    dir=os.environ.get("PRECOMP_TMP")))
    input_path = workdir / f"input{suffix}"
    output_path = workdir / f"output{suffix}"
    stream_path = workdir / "stream.bin"
    command = params.command.format(
        input=input_path, bitstream=stream_path, output=output_path,
        qp=params.theta,
    )

    def fail(message: str, stderr: str = "") -> ExternalCodecError:
        return ExternalCodecError(message, command=command, stderr=stderr,
                                  kept_dir=str(workdir))

    write_signal(signal, input_path)
    try:
        proc = subprocess.run(
            command, shell=True, capture_output=True, text=True, timeout=timeout
        )
    except subprocess.TimeoutExpired as e:
        raise fail(f"codec timed out after {timeout:.0f} s") from e
    if proc.returncode != 0:
        raise fail(f"codec exited with status {proc.returncode}", proc.stderr)
    if not stream_path.exists() or stream_path.stat().st_size == 0:
        raise fail("codec produced no bitstream", proc.stderr)
    if not output_path.exists():
        raise fail("codec produced no decoded output", proc.stderr)
    try:
        decompressed = read_signal(output_path)
    except ValueError as e:
        raise fail(f"decoded output unreadable: {e}", proc.stderr) from e
    if decompressed.geometry != signal.geometry:
        raise fail(
            f"decoded geometry {decompressed.geometry} does not match "
            f"input {signal.geometry}",
            proc.stderr,
        )
    payload = stream_path.read_bytes()
    shutil.rmtree(workdir)
    stream = CompressedBitstream(
        payload=payload, bit_count=8 * len(payload), params=params
    )
    return decompressed, stream
