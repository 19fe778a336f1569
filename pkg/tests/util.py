"""Shared fixture builders and independent reference implementations.

Everything here is deliberately written from scratch (dense matrices,
double loops, direct quadrature) so tests compare the package against
independent arithmetic rather than against itself.
"""

import numpy as np

from precomp import SignalBuffer


def make_texture(seed, shape=(64, 64), alpha=1.2, noise=0.0):
    """Broadband textured image on the 1/255 grid.

    Random-phase 1/f^alpha field plus a disk, a bar and a striped corner,
    optionally with white noise, clipped to [0, 1] and rounded to 8-bit
    levels so it behaves like natively quantized content.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0
    spectrum = radius ** -alpha * np.exp(2j * np.pi * rng.random((h, w)))
    base = np.fft.ifft2(spectrum).real
    base = (base - base.min()) / (base.max() - base.min())
    yy, xx = np.mgrid[0:h, 0:w]
    img = base.copy()
    disk = (yy - 0.32 * h) ** 2 + (xx - 0.38 * w) ** 2 < (0.16 * min(h, w)) ** 2
    img[disk] = 0.2 + 0.15 * base[disk]
    bar = (np.abs(yy - 0.68 * h) < 0.07 * h) & (np.abs(xx - 0.55 * w) < 0.24 * w)
    img[bar] = 0.85 - 0.2 * base[bar]
    stripes = (yy > 0.75 * h) & (xx > 0.7 * w)
    img[stripes] = 0.5 + 0.4 * np.sin(2 * np.pi * xx[stripes] / 7.0)
    if noise:
        img = img + rng.normal(0.0, noise, shape)
    img = np.clip(0.04 + 0.92 * img, 0.0, 1.0)
    return np.round(img * 255) / 255


def make_test_card(seed, shape=(128, 128), noise=0.08, band=0.35):
    """Flat shapes plus one noisy textured band, on the 1/255 grid.

    The flat background and shapes keep most codec blocks cheap while the
    grainy band carries broadband detail; together they exercise both the
    near-lossless and the texture-limited regimes of a transform codec.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0
    spectrum = radius ** -1.6 * np.exp(2j * np.pi * rng.random((h, w)))
    base = np.fft.ifft2(spectrum).real
    base = (base - base.min()) / (base.max() - base.min())
    yy, xx = np.mgrid[0:h, 0:w]
    img = np.full(shape, 0.55)
    disk = (yy - 0.30 * h) ** 2 + (xx - 0.34 * w) ** 2 < (0.18 * min(h, w)) ** 2
    img[disk] = 0.22
    bar = (np.abs(yy - 0.70 * h) < 0.08 * h) & (np.abs(xx - 0.52 * w) < 0.26 * w)
    img[bar] = 0.86
    tex = xx > (1.0 - band) * w
    img[tex] = 0.35 + 0.45 * base[tex]
    img[tex] += rng.normal(0.0, noise, shape)[tex]
    img = np.clip(img, 0.0, 1.0)
    return np.round(img * 255) / 255


def buffer_from(array):
    return SignalBuffer.from_array(np.asarray(array, dtype=np.float64))


def dense_matrix(op, geometry):
    """Materialize an operator as a dense (N, N) matrix via basis vectors."""
    n = geometry.total_samples
    mat = np.zeros((n, n))
    for j in range(n):
        basis = np.zeros(n)
        basis[j] = 1.0
        buf = SignalBuffer.from_array(
            basis.reshape((geometry.frames,) + geometry.frame_shape)
        )
        mat[:, j] = op.apply(buf).data.ravel()
    return mat


def dense_regularized_solve(mat, x_flat, vt_flat, beta):
    """Direct normal-equation solve (A^T A + beta/2 I) z = A^T x + beta/2 v."""
    n = mat.shape[0]
    lhs = mat.T @ mat + (beta / 2.0) * np.eye(n)
    rhs = mat.T @ x_flat + (beta / 2.0) * vt_flat
    return np.linalg.solve(lhs, rhs)


def reference_psnr(x, y, peak=1.0, margin=0):
    """Per-pixel double-loop PSNR with margin cropping."""
    total = 0.0
    count = 0
    frames, h, w = x.shape
    for k in range(frames):
        for r in range(margin, h - margin):
            for c in range(margin, w - margin):
                d = x[k, r, c] - y[k, r, c]
                total += d * d
                count += 1
    mse = total / count
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def reference_ssim_frame(x, y, peak=1.0):
    """Brute-force windowed structural similarity for one frame."""
    side, sigma = 11, 1.5
    half = side // 2
    ax = np.arange(side) - half
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * sigma * sigma))
    g /= g.sum()
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    h, w = x.shape
    values = []
    for r in range(h - side + 1):
        for c in range(w - side + 1):
            px = x[r:r + side, c:c + side]
            py = y[r:r + side, c:c + side]
            mx = (g * px).sum()
            my = (g * py).sum()
            vx = (g * px * px).sum() - mx * mx
            vy = (g * py * py).sum() - my * my
            cov = (g * px * py).sum() - mx * my
            values.append(
                ((2 * mx * my + c1) * (2 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    return float(np.mean(values))
