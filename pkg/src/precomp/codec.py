"""Deterministic block-transform codec behind the compress-decompress step.

The builtin backend is a real codec producing self-contained bitstreams:
per-frame 8x8 orthonormal DCT-II, uniform scalar quantization with step
delta(theta) = (1/255) * 2^((theta - 4) / 6), zigzag scan, per-frame DC
prediction, and run-length + order-0 exp-Golomb entropy coding. Frames are
coded independently (intra) with an optional previous-frame-difference mode
chosen per frame by coded size. The codec operates on unclipped reals: the
iterative pre-compensation feeds it sharpened intermediates outside [0, 1],
and clipping inside the loop would bias the consensus updates.

The analytic rate-distortion view pairs each quality level with a Lagrange
multiplier lambda (and the split-adjusted multiplier 2*lambda/beta inside
the consensus loop); the builtin backend realizes theta operationally
through the quantizer step alone, so lambda never drives any decision here.

Container layout (little-endian, bit-exact):
  magic "PCC1" | version u8 | width u32 | height u32 | frames u32
  | theta u8 | block_size u8 | ceil(T/8) frame-mode flag bytes
  | continuous entropy payload, zero-padded to a byte boundary.
Frame k's mode flag is bit (k % 8), LSB first, of flag byte k // 8.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as spfft

from .signal import SignalBuffer, SignalGeometry

MAGIC = b"PCC1"
VERSION = 1
_HEADER = struct.Struct("<4sBIIIBB")


class CorruptStreamError(ValueError):
    """Bitstream fails structural validation."""


@dataclass(frozen=True)
class CodecParams:
    """Quality and backend selection for compress_decompress.

    theta follows the integer 0..51 quantization-parameter convention:
    lower theta means a finer quantizer step and a higher rate. The
    'external' backend shells out to a command template (see external
    module); 'builtin' uses the codec in this module.
    """

    theta: int
    block_size: int = 8
    backend: str = "builtin"
    command: str | None = None

    def __post_init__(self):
        if not 0 <= int(self.theta) <= 51:
            raise ValueError(f"theta must be in [0, 51], got {self.theta}")
        object.__setattr__(self, "theta", int(self.theta))
        if self.block_size < 1:
            raise ValueError(f"block_size must be positive, got {self.block_size}")
        if self.backend not in ("builtin", "external"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "external" and not self.command:
            raise ValueError("external backend requires a command template")


@dataclass(frozen=True)
class CompressedBitstream:
    """A decodable byte payload plus exact rate accounting.

    bit_count is always 8 * len(payload). For the builtin backend,
    header_bits + padding_bits + sum(block_bits) == bit_count exactly;
    block_bits lists the entropy-coded size of each block in coding order.
    External streams carry only the total count.
    """

    payload: bytes
    bit_count: int
    params: CodecParams
    header_bits: int = 0
    padding_bits: int = 0
    block_bits: tuple = ()

    def __post_init__(self):
        if self.bit_count != 8 * len(self.payload):
            raise ValueError("bit_count must equal 8 * payload length")


def quantizer_step(theta: int) -> float:
    """Uniform quantization step for quality theta; step(4) = 1/255."""
    return (1.0 / 255.0) * 2.0 ** ((theta - 4) / 6.0)


@lru_cache(maxsize=None)
def zigzag_order(n: int) -> np.ndarray:
    """Flat indices of an n x n block in diagonal zigzag scan order."""
    coords = []
    for d in range(2 * n - 1):
        lo, hi = max(0, d - n + 1), min(d, n - 1)
        rows = range(hi, lo - 1, -1) if d % 2 == 0 else range(lo, hi + 1)
        coords.extend((i, d - i) for i in rows)
    order = np.array([i * n + j for i, j in coords])
    order.flags.writeable = False
    return order


class BitWriter:
    """MSB-first bit accumulator with exp-Golomb helpers."""

    __slots__ = ("_out", "_acc", "_nbits", "bit_length")

    def __init__(self):
        self._out = bytearray()
        self._acc = 0
        self._nbits = 0
        self.bit_length = 0

    def write(self, value: int, nbits: int):
        self._acc = (self._acc << nbits) | (value & ((1 << nbits) - 1))
        self._nbits += nbits
        self.bit_length += nbits
        while self._nbits >= 8:
            self._nbits -= 8
            self._out.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def write_ue(self, value: int):
        # order-0 exp-Golomb: bitlen(v+1)-1 zeros, then v+1 in bitlen bits
        m = (value + 1).bit_length()
        self.write(value + 1, 2 * m - 1)

    def write_se(self, value: int):
        self.write_ue(2 * value - 1 if value > 0 else -2 * value)

    def extend(self, other: "BitWriter"):
        for byte in other._out:
            self.write(byte, 8)
        if other._nbits:
            self.write(other._acc, other._nbits)

    def getvalue(self) -> bytes:
        if self._nbits:
            return bytes(self._out) + bytes(
                [(self._acc << (8 - self._nbits)) & 0xFF]
            )
        return bytes(self._out)


class BitReader:
    """MSB-first reader over a byte buffer."""

    __slots__ = ("data", "pos", "nbits")

    def __init__(self, data: bytes, bit_offset: int = 0):
        self.data = data
        self.pos = bit_offset
        self.nbits = 8 * len(data)

    def read(self, nbits: int) -> int:
        end = self.pos + nbits
        if end > self.nbits:
            raise CorruptStreamError("bitstream truncated")
        chunk = int.from_bytes(self.data[self.pos >> 3 : (end + 7) >> 3], "big")
        self.pos = end
        return (chunk >> ((-end) % 8)) & ((1 << nbits) - 1)

    def read_bit(self) -> int:
        return self.read(1)

    def read_ue(self) -> int:
        # peek a 32-bit window to count the leading-zero prefix
        start = self.pos
        window = self.data[start >> 3 : (start >> 3) + 5]
        peek = int.from_bytes(window.ljust(5, b"\0"), "big")
        peek = (peek >> (40 - 32 - (start & 7))) & 0xFFFFFFFF
        zeros = 32 - peek.bit_length()
        if zeros >= 32:
            raise CorruptStreamError("malformed exp-Golomb code")
        return self.read(2 * zeros + 1) - 1

    def read_se(self) -> int:
        u = self.read_ue()
        return (u + 1) >> 1 if u & 1 else -(u >> 1)


# ------------------------------------------------------------ block plumbing


def _pad_to_blocks(plane: np.ndarray, n: int) -> np.ndarray:
    h, w = plane.shape
    ph = (-h) % n
    pw = (-w) % n
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


def _to_blocks(padded: np.ndarray, n: int) -> np.ndarray:
    bh, bw = padded.shape[0] // n, padded.shape[1] // n
    return padded.reshape(bh, n, bw, n).transpose(0, 2, 1, 3).reshape(bh * bw, n, n)


def _from_blocks(blocks: np.ndarray, bh: int, bw: int, n: int) -> np.ndarray:
    return blocks.reshape(bh, bw, n, n).transpose(0, 2, 1, 3).reshape(bh * n, bw * n)


def _synthesize(quantized: np.ndarray, height: int, width: int, n: int,
                delta: float) -> np.ndarray:
    """Decode quantized block coefficients to a cropped frame plane.

    Shared by encoder (reference reconstruction) and decoder so both sides
    compute bit-identical planes.
    """
    coeffs = quantized.astype(np.float64) * delta
    blocks = spfft.idctn(coeffs, type=2, norm="ortho", axes=(1, 2))
    bh = math.ceil(height / n)
    bw = math.ceil(width / n)
    return _from_blocks(blocks, bh, bw, n)[:height, :width]


def _quantize_plane(plane: np.ndarray, n: int, delta: float) -> np.ndarray:
    blocks = _to_blocks(_pad_to_blocks(plane, n), n)
    coeffs = spfft.dctn(blocks, type=2, norm="ortho", axes=(1, 2))
    return np.rint(coeffs / delta).astype(np.int64)


def _entropy_code_plane(quantized: np.ndarray, n: int):
    """Entropy-code a frame's quantized blocks; returns (writer, block_bits)."""
    order = zigzag_order(n)
    scanned = quantized.reshape(quantized.shape[0], n * n)[:, order]
    dc_diffs = np.diff(scanned[:, 0], prepend=0)
    writer = BitWriter()
    block_bits = []
    for b in range(scanned.shape[0]):
        start = writer.bit_length
        writer.write_se(int(dc_diffs[b]))
        row = scanned[b]
        prev = 0
        for pos in np.nonzero(row[1:])[0] + 1:
            writer.write(1, 1)
            writer.write_ue(int(pos) - prev - 1)
            writer.write_se(int(row[pos]))
            prev = int(pos)
        writer.write(0, 1)
        block_bits.append(writer.bit_length - start)
    return writer, block_bits


def _entropy_decode_plane(reader: BitReader, nblocks: int, n: int) -> np.ndarray:
    order = zigzag_order(n)
    scanned = np.zeros((nblocks, n * n), dtype=np.int64)
    top = n * n - 1
    dc = 0
    for b in range(nblocks):
        dc += reader.read_se()
        row = scanned[b]
        row[0] = dc
        pos = 0
        while reader.read_bit():
            pos += reader.read_ue() + 1
            if pos > top:
                raise CorruptStreamError("coefficient index out of block")
            row[pos] = reader.read_se()
    quantized = np.zeros((nblocks, n * n), dtype=np.int64)
    quantized[:, order] = scanned
    return quantized.reshape(nblocks, n, n)


# ------------------------------------------------------------ builtin codec


def builtin_encode(signal: SignalBuffer, params: CodecParams) -> CompressedBitstream:
    """Encode a signal to a self-contained bitstream."""
    geom = signal.geometry
    n = params.block_size
    delta = quantizer_step(params.theta)
    flags = bytearray((geom.frames + 7) // 8)
    body = BitWriter()
    block_bits: list[int] = []
    prev_recon = None
    for k in range(geom.frames):
        plane = signal.frame(k)
        q_intra = _quantize_plane(plane, n, delta)
        writer, bits = _entropy_code_plane(q_intra, n)
        chosen_q = q_intra
        diff_mode = False
        if prev_recon is not None:
            q_diff = _quantize_plane(plane - prev_recon, n, delta)
            writer_d, bits_d = _entropy_code_plane(q_diff, n)
            if writer_d.bit_length < writer.bit_length:
                writer, bits, chosen_q, diff_mode = writer_d, bits_d, q_diff, True
        if diff_mode:
            flags[k // 8] |= 1 << (k % 8)
        body.extend(writer)
        block_bits.extend(bits)
        recon = _synthesize(chosen_q, geom.height, geom.width, n, delta)
        if diff_mode:
            recon = recon + prev_recon
        prev_recon = recon
    header = _HEADER.pack(
        MAGIC, VERSION, geom.width, geom.height, geom.frames, params.theta, n
    )
    payload = header + bytes(flags) + body.getvalue()
    header_bits = 8 * (len(header) + len(flags))
    padding_bits = 8 * len(payload) - header_bits - body.bit_length
    return CompressedBitstream(
        payload=payload,
        bit_count=8 * len(payload),
        params=params,
        header_bits=header_bits,
        padding_bits=padding_bits,
        block_bits=tuple(block_bits),
    )


def builtin_decode(stream: CompressedBitstream | bytes) -> SignalBuffer:
    """Decode a bitstream produced by builtin_encode."""
    payload = stream.payload if isinstance(stream, CompressedBitstream) else stream
    if len(payload) < _HEADER.size:
        raise CorruptStreamError("stream shorter than header")
    magic, version, width, height, frames, theta, n = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise CorruptStreamError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptStreamError(f"unsupported version {version}")
    try:
        geom = SignalGeometry(width=width, height=height, frames=frames)
    except ValueError as e:
        raise CorruptStreamError(f"bad geometry in header: {e}") from e
    flag_count = (frames + 7) // 8
    flags = payload[_HEADER.size : _HEADER.size + flag_count]
    if len(flags) != flag_count:
        raise CorruptStreamError("stream shorter than frame flags")
    delta = quantizer_step(theta)
    nblocks = math.ceil(height / n) * math.ceil(width / n)
    reader = BitReader(payload, bit_offset=8 * (_HEADER.size + flag_count))
    planes = np.empty((frames, height, width))
    prev = None
    for k in range(frames):
        quantized = _entropy_decode_plane(reader, nblocks, n)
        plane = _synthesize(quantized, height, width, n, delta)
        if flags[k // 8] >> (k % 8) & 1:
            if prev is None:
                raise CorruptStreamError("difference mode on the first frame")
            plane = plane + prev
        planes[k] = plane
        prev = plane
    return SignalBuffer(geom, planes)


def compress_decompress(signal: SignalBuffer, params: CodecParams):
    """Run the codec round trip; returns (decompressed, bitstream)."""
    if params.backend == "builtin":
        stream = builtin_encode(signal, params)
        return builtin_decode(stream), stream
    from . import external

    return external.external_roundtrip(signal, params)
