"""Pre-compensating compression for known post-decompression degradations.

Adapts any lossy codec to a linear degradation that will act on the signal
after decompression (display blur, optical blur): an iterative splitting
loop shapes the compressed bits so that degrading the decompressed signal
lands close to the original, while the bitstream stays decodable by the
standard decoder alone.
"""

from .admm import AdmmConfig, AdmmState, RunResult, admm_step, beta_schedule, run
from .codec import (
    CodecParams,
    CompressedBitstream,
    CorruptStreamError,
    builtin_decode,
    builtin_encode,
    compress_decompress,
    quantizer_step,
)
from .degradation import (
    BlockDiagonalOp,
    IdentityOperator,
    MotionBlurFrameOp,
    ShiftInvariantBlur,
    SolveError,
    build_motion_blur,
    gaussian_kernel,
    operator_from_spec,
    pseudoinverse_prefilter,
    regularized_solve,
)
from .experiment import (
    ExperimentSpec,
    estimate_global_motion,
    make_synthetic_pan,
    run_experiment,
    simulate_display,
)
from .external import ExternalCodecError, external_roundtrip
from .io import SignalFormatError, read_signal, write_signal
from .metrics import RdCurve, RdPoint, bd_psnr, psnr, ssim
from .signal import BlockGrid, SignalBuffer, SignalGeometry, extract_block, place_block

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "AdmmState",
    "BlockDiagonalOp",
    "BlockGrid",
    "CodecParams",
    "CompressedBitstream",
    "CorruptStreamError",
    "ExperimentSpec",
    "ExternalCodecError",
    "IdentityOperator",
    "MotionBlurFrameOp",
    "RdCurve",
    "RdPoint",
    "RunResult",
    "ShiftInvariantBlur",
    "SignalBuffer",
    "SignalFormatError",
    "SignalGeometry",
    "SolveError",
    "admm_step",
    "bd_psnr",
    "beta_schedule",
    "build_motion_blur",
    "builtin_decode",
    "builtin_encode",
    "compress_decompress",
    "estimate_global_motion",
    "external_roundtrip",
    "extract_block",
    "gaussian_kernel",
    "make_synthetic_pan",
    "operator_from_spec",
    "place_block",
    "pseudoinverse_prefilter",
    "psnr",
    "quantizer_step",
    "read_signal",
    "regularized_solve",
    "run",
    "run_experiment",
    "simulate_display",
    "ssim",
    "write_signal",
]
