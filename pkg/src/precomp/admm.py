"""Iterative pre-compensation of compression for a known linear degradation.

The driver alternates a standard codec call with a degradation-aware
least-squares correction, coupled through a scaled dual variable:

    z_tilde(t) = z_hat(t-1) - u(t)
    v_hat(t), stream = codec(z_tilde(t))
    v_tilde(t) = v_hat(t) + u(t)
    z_hat(t) = argmin_z ||x - H z||^2 + (beta/2) ||z - v_tilde(t)||^2
    u(t+1) = u(t) + v_hat(t) - z_hat(t)

initialized with z_hat(0) = x and u(1) = 0, so iteration 1 compresses the
raw input unchanged and a one-iteration run reduces to regular compression.
The output is the bitstream from the final codec call (or the one before
it when the residual trace diverges); it needs only the standard decoder,
with all degradation awareness baked into the bits.

Convergence bookkeeping follows the per-iteration residual
w(t) = ||v_hat(t) - z_hat(t)||_1: small changes for several consecutive
iterations stop the loop, a large jump aborts it with a rollback. The
default thresholds assume sample values in a nominal [0, 1] range and
scale with the frame count for video.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .codec import CodecParams, CompressedBitstream, compress_decompress
from .degradation import regularized_solve
from .metrics import psnr
from .signal import SignalBuffer

IMAGE_MAX_ITERS = 40
VIDEO_MAX_ITERS = 10
IMAGE_CONV_TOL = 0.2
IMAGE_DIV_TOL = 50.0


def beta_schedule(qp: int) -> float:
    """Coupling weight for a quality parameter, piecewise over QP brackets."""
    if not 0 <= qp <= 51:
        raise ValueError(f"qp must be in [0, 51], got {qp}")
    if qp <= 20:
        return 0.03
    if qp <= 30:
        return 0.05
    if qp <= 40:
        return 0.10
    if qp <= 45:
        return 0.35
    return 0.45


@dataclass(frozen=True)
class AdmmConfig:
    """Loop controls. None fields resolve per signal:

    max_iters: 40 for single-frame signals, 10 for video.
    conv_tol / div_tol: 0.2 / 50 for single-frame; 0.5*T / 50/T for video
    (w scales with sample count, divergence jumps shrink relative to it).
    beta: 'auto' follows beta_schedule(theta), times 10 (psnr mode) or 50
    (smooth mode) for video; a float is used verbatim.
    normalize_w divides w by the total sample count for size-independent
    thresholds; the defaults above assume it is off.
    """

    beta: float | str = "auto"
    max_iters: int | None = None
    conv_tol: float | None = None
    conv_streak: int = 3
    div_tol: float | None = None
    mode: str = "psnr"
    normalize_w: bool = False
    solve_method: str = "auto"
    psnr_margin: int = 0

    def __post_init__(self):
        if isinstance(self.beta, str):
            if self.beta != "auto":
                raise ValueError(f"beta must be positive or 'auto', got {self.beta!r}")
        elif not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.conv_streak < 1:
            raise ValueError("conv_streak must be at least 1")
        mode = {"psnr": "psnr", "psnr_oriented": "psnr",
                "smooth": "smooth", "smoothness_oriented": "smooth"}.get(self.mode)
        if mode is None:
            raise ValueError(f"mode must be psnr or smooth, got {self.mode!r}")
        object.__setattr__(self, "mode", mode)

    def resolve_beta(self, theta: int, frames: int) -> float:
        if self.beta != "auto":
            return float(self.beta)
        base = beta_schedule(theta)
        if frames > 1:
            return base * (10.0 if self.mode == "psnr" else 50.0)
        return base

    def resolve_max_iters(self, frames: int) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return IMAGE_MAX_ITERS if frames == 1 else VIDEO_MAX_ITERS

    def resolve_tols(self, frames: int) -> tuple[float, float]:
        if frames == 1:
            conv = IMAGE_CONV_TOL if self.conv_tol is None else self.conv_tol
            div = IMAGE_DIV_TOL if self.div_tol is None else self.div_tol
        else:
            conv = 0.5 * frames if self.conv_tol is None else self.conv_tol
            div = 50.0 / frames if self.div_tol is None else self.div_tol
        return float(conv), float(div)


@dataclass(frozen=True)
class AdmmState:
    """Loop state after `iteration` completed steps."""

    iteration: int
    z_hat: SignalBuffer
    u: SignalBuffer
    v_hat: SignalBuffer | None = None
    w_history: tuple = ()
    last_stream: CompressedBitstream | None = None
    prev_stream: CompressedBitstream | None = None
    prev_v_hat: SignalBuffer | None = None
    status: str = "running"


def init_state(x: SignalBuffer) -> AdmmState:
    """z_hat(0) = x and u(1) = 0."""
    return AdmmState(iteration=0, z_hat=x, u=SignalBuffer.zeros(x.geometry))


def admm_step(state: AdmmState, x: SignalBuffer, operator,
              codec_params: CodecParams, config: AdmmConfig) -> AdmmState:
    """One full v/z/u update; appends w(t) and advances the stream history."""
    beta = config.resolve_beta(codec_params.theta, x.geometry.frames)
    z_tilde = x.with_data(state.z_hat.data - state.u.data)
    v_hat, stream = compress_decompress(z_tilde, codec_params)
    v_tilde = x.with_data(v_hat.data + state.u.data)
    z_hat = regularized_solve(operator, x, v_tilde, beta, method=config.solve_method)
    residual = v_hat.data - z_hat.data
    u = x.with_data(state.u.data + residual)
    w = float(np.abs(residual).sum())
    if config.normalize_w:
        w /= x.geometry.total_samples
    return replace(
        state,
        iteration=state.iteration + 1,
        z_hat=z_hat,
        u=u,
        v_hat=v_hat,
        w_history=state.w_history + (w,),
        last_stream=stream,
        prev_stream=state.last_stream,
        prev_v_hat=state.v_hat,
    )


def check_stop(state: AdmmState, config: AdmmConfig, frames: int) -> str:
    """'running', 'converged', or 'diverged' from the w trace."""
    conv_tol, div_tol = config.resolve_tols(frames)
    w = state.w_history
    if len(w) < 2:
        return "running"
    if w[-1] - w[-2] > div_tol:
        return "diverged"
    if len(w) < config.conv_streak + 1:
        return "running"
    tail = w[-(config.conv_streak + 1):]
    deltas = np.diff(tail)
    if np.all(np.abs(deltas) < conv_tol):
        return "converged"
    return "running"


@dataclass(frozen=True)
class RunResult:
    stream: CompressedBitstream
    decompressed: SignalBuffer
    diagnostics: dict
    state: AdmmState


def run(x: SignalBuffer, operator, codec_params: CodecParams,
        config: AdmmConfig | None = None) -> RunResult:
    """Full pre-compensation loop; returns the chosen stream + diagnostics.

    The returned stream is the last codec output, or on divergence the one
    from the preceding iteration. `decompressed` is its decoded signal, and
    diagnostics carry the per-iteration residual trace, degraded-domain
    PSNR of each iterate, and the stopping status.
    """
    config = config or AdmmConfig()
    frames = x.geometry.frames
    beta = config.resolve_beta(codec_params.theta, frames)
    conv_tol, div_tol = config.resolve_tols(frames)
    max_iters = config.resolve_max_iters(frames)
    state = init_state(x)
    log = []
    status = "max_iters"
    for _ in range(max_iters):
        state = admm_step(state, x, operator, codec_params, config)
        degraded = operator.apply(state.v_hat)
        log.append({
            "t": state.iteration,
            "w": state.w_history[-1],
            "psnr_degraded": psnr(x, degraded, margin=config.psnr_margin),
            "bits": state.last_stream.bit_count,
        })
        verdict = check_stop(state, config, frames)
        if verdict != "running":
            status = verdict
            break
    state = replace(state, status=status)
    if status == "diverged":
        stream = state.prev_stream
        decompressed = state.prev_v_hat
    else:
        stream = state.last_stream
        decompressed = state.v_hat
    if codec_params.backend == "builtin":
        from .codec import builtin_decode

        decompressed = builtin_decode(stream)
    diagnostics = {
        "status": status,
        "iterations": state.iteration,
        "bits": stream.bit_count,
        "beta": beta,
        "conv_tol": conv_tol,
        "div_tol": div_tol,
        "max_iters": max_iters,
        "iterations_log": log,
    }
    return RunResult(stream=stream, decompressed=decompressed,
                     diagnostics=diagnostics, state=state)
