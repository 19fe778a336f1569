"""Linear degradation operators and the regularized inverse solve.

Models a known post-decompression degradation H: construction of blur and
motion operators, forward and adjoint application, and the solve

    z = argmin ||x - H z||^2 + (beta/2) ||z - v_tilde||^2
      = (H^T H + (beta/2) I)^{-1} (H^T x + (beta/2) v_tilde)

which is the consensus step of the pre-compensation loop. Every operator
acts frame-by-frame; per-frame motion degradations combine into a
block-diagonal composite whose solve decomposes into independent
frame-level solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps
from scipy.sparse import linalg as spla

from .signal import SignalBuffer, SignalGeometry


class SolveError(RuntimeError):
    """Regularized solve failed to reach the required residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class FrameOperator:
    """Linear operator applied independently to each frame of a signal.

    Subclasses implement ``apply_frame`` / ``adjoint_frame`` on 2-D arrays.
    ``transfer_function`` returns the circular-convolution OTF when the
    operator is exactly shift invariant with periodic boundary on the given
    frame shape, else None; the regularized solve uses it to pick the
    closed-form frequency-domain path.
    """

    # (height, width) the operator is bound to, or None when shape-agnostic
    frame_shape: tuple[int, int] | None = None

    def apply_frame(self, frame: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint_frame(self, frame: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def transfer_function(self, shape: tuple[int, int]) -> np.ndarray | None:
        return None

    def frame_count(self) -> int | None:
        """Number of frames the operator is bound to (None = any)."""
        return None

    def frame_op(self, k: int) -> "FrameOperator":
        """Operator acting on frame ``k``."""
        return self

    def _check_frame_shape(self, geometry: SignalGeometry):
        if self.frame_shape is not None and self.frame_shape != geometry.frame_shape:
            raise ValueError(
                f"operator bound to frame shape {self.frame_shape}, "
                f"signal has {geometry.frame_shape}"
            )

    def apply(self, signal: SignalBuffer) -> SignalBuffer:
        self._check_frame_shape(signal.geometry)
        out = np.stack(
            [self.apply_frame(signal.frame(k)) for k in range(signal.geometry.frames)]
        )
        return signal.with_data(out)

    def adjoint(self, signal: SignalBuffer) -> SignalBuffer:
        self._check_frame_shape(signal.geometry)
        out = np.stack(
            [self.adjoint_frame(signal.frame(k)) for k in range(signal.geometry.frames)]
        )
        return signal.with_data(out)


@dataclass(frozen=True)
class IdentityOperator(FrameOperator):
    """H = I; degradation-free reference."""

    def apply_frame(self, frame: np.ndarray) -> np.ndarray:
        return np.array(frame, dtype=np.float64)

    adjoint_frame = apply_frame

    def transfer_function(self, shape):
        return np.ones(shape, dtype=np.complex128)


@dataclass(frozen=True)
class ShiftInvariantBlur(FrameOperator):
    """2-D convolution with a fixed kernel.

    boundary_mode 'replicate' pads with edge values (spatial path only);
    'circular' wraps periodically and admits the frequency-domain solve.
    Apply follows convolution semantics (kernel flipped), so asymmetric
    kernels and their adjoints are distinct operators.
    """

    kernel: np.ndarray
    boundary_mode: str = "circular"

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise ValueError(f"kernel must be 2-D with odd sides, got {k.shape}")
        if not np.all(np.isfinite(k)):
            raise ValueError("kernel entries must be finite")
        if self.boundary_mode not in ("replicate", "circular"):
            raise ValueError(f"unknown boundary mode {self.boundary_mode!r}")
        k = k.copy()
        k.flags.writeable = False
        object.__setattr__(self, "kernel", k)

    def _pads(self):
        kh, kw = self.kernel.shape
        return (kh - 1) // 2, (kw - 1) // 2

    def transfer_function(self, shape):
        if self.boundary_mode != "circular":
            return None
        kh, kw = self.kernel.shape
        if shape[0] < kh or shape[1] < kw:
            raise ValueError(f"frame {shape} smaller than kernel {self.kernel.shape}")
        ah, aw = self._pads()
        psf = np.zeros(shape, dtype=np.float64)
        psf[:kh, :kw] = self.kernel
        # move the kernel anchor to index (0, 0) of the periodic grid
        psf = np.roll(psf, (-ah, -aw), axis=(0, 1))
        return np.fft.fft2(psf)

    def _circular(self, frame: np.ndarray, conjugate: bool) -> np.ndarray:
        otf = self.transfer_function(frame.shape)
        if conjugate:
            otf = np.conj(otf)
        return np.fft.ifft2(np.fft.fft2(frame) * otf).real

    def apply_frame(self, frame: np.ndarray) -> np.ndarray:
        if self.boundary_mode == "circular":
            return self._circular(frame, conjugate=False)
        ah, aw = self._pads()
        padded = np.pad(frame, ((ah, ah), (aw, aw)), mode="edge")
        return sps.convolve(padded, self.kernel, mode="valid")

    def adjoint_frame(self, frame: np.ndarray) -> np.ndarray:
        if self.boundary_mode == "circular":
            return self._circular(frame, conjugate=True)
        # exact transpose of pad-then-valid-convolve: full correlation,
        # then fold each padded cell back onto the edge pixel it replicated
        ah, aw = self._pads()
        full = sps.convolve(frame, self.kernel[::-1, ::-1], mode="full")
        h, w = frame.shape
        rows = np.clip(np.arange(full.shape[0]) - ah, 0, h - 1)
        cols = np.clip(np.arange(full.shape[1]) - aw, 0, w - 1)
        out = np.zeros_like(frame)
        np.add.at(out, (rows[:, None], cols[None, :]), full)
        return out


def _split_offset(v: float):
    """Integer cell(s) covering coordinate v, with bilinear weights."""
    lo = math.floor(v)
    frac = v - lo
    if frac < 1e-12:
        return ((lo, 1.0),)
    if frac > 1.0 - 1e-12:
        return ((lo + 1, 1.0),)
    return ((lo, 1.0 - frac), (lo + 1, frac))


def motion_taps(motion: tuple[float, float]) -> list[tuple[int, int, float]]:
    """Averaging taps (drow, dcol, weight) for a hold-interval motion vector.

    motion = (dx, dy) in pixels/frame, x along columns and y along rows.
    The path covers L = max(|dx|, |dy|) unit steps opposite to nothing:
    tap s sits at s * (dx, dy) / L, so taps trail from the pixel itself
    toward where the content came from. Integer L gives L equal taps of
    1/L; a fractional tail contributes one end tap weighted by the
    fractional part. Weights always sum to 1.
    """
    dx, dy = float(motion[0]), float(motion[1])
    if not (math.isfinite(dx) and math.isfinite(dy)):
        raise ValueError(f"motion components must be finite, got {motion}")
    length = max(abs(dx), abs(dy))
    # threshold above the fractional-tail epsilon so the tap list is never empty
    if length < 1e-9:
        return [(0, 0, 1.0)]
    ux, uy = dx / length, dy / length
    steps = int(math.floor(length + 1e-12))
    stops = [(s, 1.0 / length) for s in range(steps)]
    tail = length - steps
    if tail > 1e-12:
        stops.append((steps, tail / length))
    taps: dict[tuple[int, int], float] = {}
    for s, w in stops:
        for r, wr in _split_offset(s * uy):
            for c, wc in _split_offset(s * ux):
                taps[(r, c)] = taps.get((r, c), 0.0) + w * wr * wc
    return [(r, c, w) for (r, c), w in sorted(taps.items())]


def _shift_slices(n: int, d: int) -> tuple[slice, slice]:
    """(dst, src) slices so that dst indices i map to src indices i + d."""
    lo = max(0, -d)
    hi = min(n, n - d)
    return slice(lo, hi), slice(lo + d, hi + d)


@dataclass(frozen=True)
class MotionBlurFrameOp(FrameOperator):
    """Hold-type motion blur for one frame: averaging along the motion path.

    Rows are row-stochastic: taps falling outside the frame are dropped and
    the remaining weights renormalize to sum 1, so a constant frame passes
    through unchanged. Motion (0, 0) is exactly the identity.
    """

    width: int
    height: int
    motion: tuple[float, float]
    taps: tuple = field(init=False, repr=False)
    weight_field: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be positive")
        object.__setattr__(self, "motion", (float(self.motion[0]), float(self.motion[1])))
        object.__setattr__(self, "frame_shape", (self.height, self.width))
        taps = tuple(motion_taps(self.motion))
        wsum = np.zeros((self.height, self.width))
        for dr, dc, w in taps:
            dst_r, _ = _shift_slices(self.height, dr)
            dst_c, _ = _shift_slices(self.width, dc)
            wsum[dst_r, dst_c] += w
        wsum.flags.writeable = False
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "weight_field", wsum)

    def apply_frame(self, frame: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(frame)
        for dr, dc, w in self.taps:
            dst_r, src_r = _shift_slices(self.height, dr)
            dst_c, src_c = _shift_slices(self.width, dc)
            acc[dst_r, dst_c] += w * frame[src_r, src_c]
        return acc / self.weight_field

    def adjoint_frame(self, frame: np.ndarray) -> np.ndarray:
        scaled = frame / self.weight_field
        out = np.zeros_like(frame)
        for dr, dc, w in self.taps:
            dst_r, src_r = _shift_slices(self.height, dr)
            dst_c, src_c = _shift_slices(self.width, dc)
            out[src_r, src_c] += w * scaled[dst_r, dst_c]
        return out


def build_motion_blur(geometry: SignalGeometry, motion) -> MotionBlurFrameOp:
    """Motion-blur operator for one frame of the given geometry."""
    return MotionBlurFrameOp(geometry.width, geometry.height, (motion[0], motion[1]))


@dataclass(frozen=True)
class BlockDiagonalOp:
    """Independent frame-level operators, one per frame of a video signal."""

    per_frame_ops: tuple

    def __post_init__(self):
        ops = tuple(self.per_frame_ops)
        if not ops:
            raise ValueError("need at least one per-frame operator")
        object.__setattr__(self, "per_frame_ops", ops)

    def frame_count(self):
        return len(self.per_frame_ops)

    def frame_op(self, k: int) -> FrameOperator:
        return self.per_frame_ops[k]

    def _check(self, geometry: SignalGeometry):
        if geometry.frames != len(self.per_frame_ops):
            raise ValueError(
                f"block-diagonal operator has {len(self.per_frame_ops)} frame "
                f"operators, signal has {geometry.frames} frames"
            )
        for op in self.per_frame_ops:
            op._check_frame_shape(geometry)

    def apply(self, signal: SignalBuffer) -> SignalBuffer:
        self._check(signal.geometry)
        out = np.stack(
            [
                self.per_frame_ops[k].apply_frame(signal.frame(k))
                for k in range(signal.geometry.frames)
            ]
        )
        return signal.with_data(out)

    def adjoint(self, signal: SignalBuffer) -> SignalBuffer:
        self._check(signal.geometry)
        out = np.stack(
            [
                self.per_frame_ops[k].adjoint_frame(signal.frame(k))
                for k in range(signal.geometry.frames)
            ]
        )
        return signal.with_data(out)


def apply(op, signal: SignalBuffer) -> SignalBuffer:
    """Forward application Hv."""
    return op.apply(signal)


def apply_adjoint(op, signal: SignalBuffer) -> SignalBuffer:
    """Adjoint application H^T v."""
    return op.adjoint(signal)


def gaussian_kernel(sigma: float, side: int) -> np.ndarray:
    """Sampled isotropic Gaussian on an odd side x side grid, sum 1."""
    if side % 2 == 0 or side < 1:
        raise ValueError(f"side must be odd and positive, got {side}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = side // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    profile = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    kernel = np.outer(profile, profile)
    return kernel / kernel.sum()


def _solve_frame_fft(otf, x_frame, vt_frame, beta):
    numer = np.conj(otf) * np.fft.fft2(x_frame) + (beta / 2.0) * np.fft.fft2(vt_frame)
    denom = np.abs(otf) ** 2 + beta / 2.0
    return np.fft.ifft2(numer / denom).real


def _solve_frame_cg(op: FrameOperator, x_frame, vt_frame, beta):
    shape = x_frame.shape
    n = x_frame.size

    def normal_matvec(z_flat):
        z = z_flat.reshape(shape)
        return (op.adjoint_frame(op.apply_frame(z)) + (beta / 2.0) * z).ravel()

    lin = spla.LinearOperator((n, n), matvec=normal_matvec, dtype=np.float64)
    rhs = (op.adjoint_frame(x_frame) + (beta / 2.0) * vt_frame).ravel()
    z_flat, _ = spla.cg(lin, rhs, x0=vt_frame.ravel(), rtol=1e-10, atol=0.0, maxiter=10 * n)
    residual = float(np.linalg.norm(normal_matvec(z_flat) - rhs))
    bound = 1e-8 * float(np.linalg.norm(rhs))
    if residual > bound:
        raise SolveError(
            f"conjugate gradient stalled: residual {residual:.3e} "
            f"exceeds {bound:.3e}",
            residual,
        )
    return z_flat.reshape(shape)


def regularized_solve(op, x: SignalBuffer, v_tilde: SignalBuffer, beta: float,
                      method: str = "auto") -> SignalBuffer:
    """Minimize ||x - H z||^2 + (beta/2) ||z - v_tilde||^2 over z.

    The solve always decomposes frame by frame (the degradations here act
    per frame, so the normal equations are block diagonal). Each frame uses
    the frequency-domain closed form when the frame operator has a circular
    transfer function, else conjugate gradient on the normal equations.
    ``method`` forces a path: 'fft', 'cg', or 'auto'.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if x.geometry != v_tilde.geometry:
        raise ValueError("x and v_tilde geometries differ")
    if method not in ("auto", "fft", "cg"):
        raise ValueError(f"unknown solve method {method!r}")
    frames = x.geometry.frames
    wanted = op.frame_count()
    if wanted is not None and wanted != frames:
        raise ValueError(f"operator expects {wanted} frames, signal has {frames}")
    out = np.empty((frames,) + x.geometry.frame_shape)
    for k in range(frames):
        fop = op.frame_op(k)
        fop._check_frame_shape(x.geometry)
        otf = fop.transfer_function(x.geometry.frame_shape) if method != "cg" else None
        if otf is not None:
            out[k] = _solve_frame_fft(otf, x.frame(k), v_tilde.frame(k), beta)
        elif method == "fft":
            raise ValueError("fft solve requires a circular shift-invariant operator")
        else:
            out[k] = _solve_frame_cg(fop, x.frame(k), v_tilde.frame(k), beta)
    return x.with_data(out)


def pseudoinverse_prefilter(blur: ShiftInvariantBlur, x: SignalBuffer,
                            eps: float = 1e-3):
    """Inverse-filter x by the blur's spectrum, then map into [0, 1].

    Returns (filtered, (a, b)) where filtered = a * raw + b lies in [0, 1]
    and raw is the (Tikhonov-floored) pseudoinverse filter output. eps
    scales the spectral floor relative to the peak spectral magnitude;
    eps = 0 inverts exactly over the nonzero frequencies. The caller undoes
    the affine map after decompression via raw = (filtered - b) / a.
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    otf = ShiftInvariantBlur(blur.kernel, "circular").transfer_function(
        x.geometry.frame_shape
    )
    mag = np.abs(otf)
    peak = float(mag.max())
    if peak == 0.0:
        raise ValueError("all-zero kernel has no pseudoinverse")
    if eps == 0.0:
        inv = np.zeros_like(otf)
        nonzero = mag > 0
        inv[nonzero] = 1.0 / otf[nonzero]
    else:
        floor = (eps * peak) ** 2
        inv = np.conj(otf) / (mag**2 + floor)
    raw = np.stack(
        [
            np.fft.ifft2(np.fft.fft2(x.frame(k)) * inv).real
            for k in range(x.geometry.frames)
        ]
    )
    lo = min(0.0, float(raw.min()))
    hi = max(1.0, float(raw.max()))
    a = 1.0 / (hi - lo)
    b = -lo / (hi - lo)
    return x.with_data(a * raw + b), (a, b)


def operator_from_spec(spec: dict, geometry: SignalGeometry):
    """Build an operator from a JSON-style description.

    {"type": "identity"}
    {"type": "gaussian", "sigma": 0.6, "side": 15, "boundary": "circular"}
    {"type": "motion", "motion": [dx, dy]}            shared by all frames
    {"type": "motion", "per_frame": [[dx, dy], ...]}  one vector per frame
    """
    kind = spec.get("type")
    if kind == "identity":
        return IdentityOperator()
    if kind == "gaussian":
        kernel = gaussian_kernel(float(spec["sigma"]), int(spec["side"]))
        return ShiftInvariantBlur(kernel, spec.get("boundary", "circular"))
    if kind == "motion":
        if "per_frame" in spec:
            vectors = spec["per_frame"]
            if len(vectors) != geometry.frames:
                raise ValueError(
                    f"per_frame lists {len(vectors)} motions for "
                    f"{geometry.frames} frames"
                )
            return BlockDiagonalOp(
                tuple(build_motion_blur(geometry, v) for v in vectors)
            )
        return build_motion_blur(geometry, spec["motion"])
    raise ValueError(f"unknown operator type {kind!r}")
