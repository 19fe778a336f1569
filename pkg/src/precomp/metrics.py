"""Quality metrics and rate-distortion curve comparison.

PSNR supports a per-frame border margin so boundary effects of the
degradation operators stay out of the score. Curve differencing follows
the Bjontegaard convention: cubic fits of PSNR against log10(rate),
integrated over the common rate span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .signal import SignalBuffer


def _cropped(x: SignalBuffer, margin: int) -> np.ndarray:
    h, w = x.geometry.frame_shape
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if 2 * margin >= min(w, h):
        raise ValueError(f"margin {margin} leaves no pixels on a {w}x{h} frame")
    if margin == 0:
        return x.data
    return x.data[:, margin:-margin, margin:-margin]


def psnr(x: SignalBuffer, y: SignalBuffer, peak: float = 1.0, margin: int = 0) -> float:
    """10*log10(peak^2 / MSE) over margin-cropped frames; inf when equal."""
    if x.geometry != y.geometry:
        raise ValueError("signals must share geometry")
    diff = _cropped(x, margin) - _cropped(y, margin)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _ssim_window(side: int, sigma: float) -> np.ndarray:
    half = side // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    profile = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    window = np.outer(profile, profile)
    return window / window.sum()


def ssim(x: SignalBuffer, y: SignalBuffer, peak: float = 1.0,
         window_side: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity per frame, averaged over frames.

    Gaussian-weighted local statistics on the valid (fully covered) region.
    """
    if x.geometry != y.geometry:
        raise ValueError("signals must share geometry")
    h, w = x.geometry.frame_shape
    if window_side > min(h, w):
        raise ValueError(f"window {window_side} exceeds frame {w}x{h}")
    window = _ssim_window(window_side, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    means = []
    for k in range(x.geometry.frames):
        fx = x.frame(k)
        fy = y.frame(k)
        mu_x = sps.convolve(fx, window, mode="valid")
        mu_y = sps.convolve(fy, window, mode="valid")
        var_x = sps.convolve(fx * fx, window, mode="valid") - mu_x * mu_x
        var_y = sps.convolve(fy * fy, window, mode="valid") - mu_y * mu_y
        cov = sps.convolve(fx * fy, window, mode="valid") - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        means.append(float(np.mean(num / den)))
    return float(np.mean(means))


@dataclass(frozen=True)
class RdPoint:
    """One rate-distortion working point: rate in bits per sample."""

    bpp: float
    psnr_db: float
    ssim: float | None = None

    def __post_init__(self):
        if not self.bpp > 0:
            raise ValueError(f"bpp must be positive, got {self.bpp}")


@dataclass(frozen=True)
class RdCurve:
    """Labelled rate-distortion curve with strictly increasing rates."""

    label: str
    points: tuple

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: p.bpp))
        if not pts:
            raise ValueError("curve needs at least one point")
        rates = [p.bpp for p in pts]
        if any(earlier >= later for earlier, later in zip(rates, rates[1:])):
            raise ValueError("bpp values must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def rates(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points])

    def psnrs(self) -> np.ndarray:
        return np.array([p.psnr_db for p in self.points])

    def ssims(self) -> list:
        return [p.ssim for p in self.points]


def _fit_curve(curve: RdCurve, subset: str):
    points = curve.points
    if subset == "high_rate":
        points = points[-4:]
    if len(points) < 4:
        raise ValueError(
            f"curve {curve.label!r} has {len(points)} usable points; need 4"
        )
    log_rate = np.log10([p.bpp for p in points])
    quality = np.array([p.psnr_db for p in points])
    if not np.all(np.isfinite(quality)):
        raise ValueError(f"curve {curve.label!r} has non-finite quality values")
    return np.polyfit(log_rate, quality, 3), log_rate.min(), log_rate.max()


def bd_psnr(curve_a: RdCurve, curve_b: RdCurve, subset: str = "all") -> float:
    """Average vertical gap of curve_a over curve_b across the shared span.

    Positive means curve_a sits above curve_b. subset='high_rate' restricts
    both curves to their 4 highest-rate points before fitting.
    """
    if subset not in ("all", "high_rate"):
        raise ValueError(f"unknown subset {subset!r}")
    poly_a, lo_a, hi_a = _fit_curve(curve_a, subset)
    poly_b, lo_b, hi_b = _fit_curve(curve_b, subset)
    lo = max(lo_a, lo_b)
    hi = min(hi_a, hi_b)
    if not hi > lo:
        raise ValueError("curves have disjoint rate ranges")
    int_a = np.polyint(poly_a)
    int_b = np.polyint(poly_b)
    area = (np.polyval(int_a, hi) - np.polyval(int_a, lo)) - (
        np.polyval(int_b, hi) - np.polyval(int_b, lo)
    )
    return float(area / (hi - lo))
