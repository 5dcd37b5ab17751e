"""MFCCs and their summary statistics.

Two summaries are produced from a clip's MFCC matrix:

* a global 275-vector (25 coefficients x 11 statistics) over all frames,
  used to describe isolated sound-class exemplars;
* a contextual T x 275 matrix where row ``t`` summarizes the frames
  ``t - 45 .. t + 45`` (truncated at the clip edges), used as the
  per-frame signal of a soundtrack.

Statistic layout is coefficient-major: entry ``11 * i + j`` is statistic
``j`` of coefficient ``i``, with statistics ordered as in :data:`STAT_NAMES`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .audio_io import FrameSequence
from .errors import EmptyFrames, EmptyInput, TooFewFrames, ValidationError

STAT_NAMES = (
    "min", "max", "median", "mean", "var", "skew", "kurt",
    "d1_mean", "d1_var", "d2_mean", "d2_var",
)
N_STATS = len(STAT_NAMES)
N_MFCC = 25
FEATURE_DIM = N_MFCC * N_STATS  # 275
CONTEXT_RADIUS = 45

# below this population variance, skewness and kurtosis are reported as 0
VAR_EPS = 1e-12


@dataclass(frozen=True)
class MfccParams:
    sample_rate: int = 44100
    n_fft: int = 1024
    hop: int = 512
    n_mels: int = 40
    fmin: float = 0.0
    fmax: float = 22050.0
    n_mfcc: int = N_MFCC
    include_c0: bool = True
    log_floor: float = 1e-10

    def validate(self):
        if self.n_fft <= 0 or self.hop <= 0 or self.sample_rate <= 0:
            raise ValidationError("n_fft, hop and sample_rate must be positive")
        if not 0 <= self.fmin < self.fmax <= self.sample_rate / 2:
            raise ValidationError(f"mel range [{self.fmin}, {self.fmax}] outside [0, Nyquist]")
        last = self.n_mfcc + (0 if self.include_c0 else 1)
        if self.n_mfcc < 1 or last > self.n_mels:
            raise ValidationError(f"cannot keep {self.n_mfcc} coefficients from {self.n_mels} mel bands")
        if self.log_floor <= 0:
            raise ValidationError("log_floor must be positive")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MfccMatrix:
    coeffs: np.ndarray  # (T, n_mfcc)
    frame_hop_s: float
    source_id: str = ""

    def __len__(self):
        return self.coeffs.shape[0]


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray  # (T, 275); transposed, this is the 275 x T projection signal
    context_radius: int = CONTEXT_RADIUS
    source_id: str = ""

    def __len__(self):
        return self.rows.shape[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(params: MfccParams = MfccParams()) -> np.ndarray:
    """Triangular filters of unit peak, equally spaced on the HTK mel scale.

    Returns an (n_mels, n_fft // 2 + 1) weight matrix.
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(params.fmin), hz_to_mel(params.fmax), params.n_mels + 2))
    freqs = np.arange(params.n_fft // 2 + 1) * params.sample_rate / params.n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II as an (n, n) matrix acting on column vectors."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    d = np.sqrt(2.0 / n) * np.cos(np.pi * k * (2 * i + 1) / (2 * n))
    d[0] /= np.sqrt(2.0)
    return d


def hann(n: int) -> np.ndarray:
    # periodic form
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def mfcc(frames: FrameSequence, params: MfccParams = MfccParams()) -> MfccMatrix:
    """Hann window, power spectrum, mel filterbank, log, DCT-II.

    No pre-emphasis or liftering. ``include_c0=False`` keeps coefficients
    1..n_mfcc instead of 0..n_mfcc-1.
    """
    params.validate()
    if len(frames) == 0:
        raise EmptyFrames(f"{frames.source_id}: no frames")
    if frames.window_len != params.n_fft or frames.sample_rate_hz != params.sample_rate:
        raise ValidationError(
            f"frames are {frames.window_len} samples at {frames.sample_rate_hz} Hz, "
            f"expected {params.n_fft} at {params.sample_rate} Hz"
        )
    spec = np.fft.rfft(frames.frames * hann(params.n_fft), axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    logmel = np.log(np.maximum(power @ mel_filterbank(params).T, params.log_floor))
    ceps = logmel @ dct_matrix(params.n_mels).T
    start = 0 if params.include_c0 else 1
    coeffs = np.ascontiguousarray(ceps[:, start:start + params.n_mfcc])
    return MfccMatrix(coeffs, frames.hop_len / frames.sample_rate_hz, frames.source_id)


def _moments(x: np.ndarray):
    if x.shape[-1] == 0:
        z = np.zeros(x.shape[:-1])
        return z, z
    mean = x.mean(axis=-1)
    centred = x - mean[..., None]
    return mean, (centred * centred).mean(axis=-1)


def _window_stats(w: np.ndarray) -> np.ndarray:
    """Statistics of a batch of windows.

    ``w`` has shape (N, C, S) with time last; returns (N, C * 11) in
    coefficient-major order.
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    n, c, _ = w.shape
    out = np.empty((n, c, N_STATS))
    out[..., 0] = w.min(axis=-1)
    out[..., 1] = w.max(axis=-1)
    out[..., 2] = np.median(w, axis=-1)
    mean = w.mean(axis=-1)
    centred = w - mean[..., None]
    sq = centred * centred
    var = sq.mean(axis=-1)
    out[..., 3] = mean
    out[..., 4] = var
    ok = var >= VAR_EPS
    safe = np.where(ok, var, 1.0)
    out[..., 5] = np.where(ok, (sq * centred).mean(axis=-1) / safe ** 1.5, 0.0)
    out[..., 6] = np.where(ok, (sq * sq).mean(axis=-1) / safe ** 2 - 3.0, 0.0)
    d1 = np.diff(w, axis=-1)
    out[..., 7], out[..., 8] = _moments(d1)
    out[..., 9], out[..., 10] = _moments(np.diff(d1, axis=-1))
    return out.reshape(n, c * N_STATS)


def summarize(coeff_rows) -> np.ndarray:
    """Summary statistics over the rows of an (S, n_coeff) block.

    Population variance; excess kurtosis; skewness and kurtosis are 0 for
    columns with variance below 1e-12. Derivatives are adjacent-frame
    differences, and their mean/variance are 0 when the difference
    sequence is empty.
    """
    x = np.asarray(coeff_rows, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyInput("summarize needs at least one row")
    return _window_stats(x.T[None])[0]


def _coeffs(m) -> np.ndarray:
    return m.coeffs if isinstance(m, MfccMatrix) else np.asarray(m, dtype=np.float64)


def summarize_global(m: MfccMatrix) -> np.ndarray:
    c = _coeffs(m)
    if c.shape[0] < 3:
        raise TooFewFrames(f"need >= 3 frames for a global summary, got {c.shape[0]}")
    return summarize(c)


def summarize_context(m: MfccMatrix, radius: int = CONTEXT_RADIUS) -> FeatureMatrix:
    """One summary row per frame over a window of +-radius frames."""
    c = _coeffs(m)
    t = c.shape[0]
    if t < 3:
        raise TooFewFrames(f"need >= 3 frames for contextual summaries, got {t}")
    width = 2 * radius + 1
    rows = np.empty((t, c.shape[1] * N_STATS))
    interior = range(radius, t - radius) if t >= width else range(0)
    if len(interior):
        windows = np.lib.stride_tricks.sliding_window_view(c, width, axis=0)  # (T - 2r, C, width)
        for start in range(0, windows.shape[0], 256):
            chunk = windows[start:start + 256]
            rows[radius + start:radius + start + chunk.shape[0]] = _window_stats(chunk)
    for i in range(t):
        if i not in interior:
            rows[i] = _window_stats(c[max(0, i - radius):min(t, i + radius + 1)].T[None])[0]
    return FeatureMatrix(rows, radius, getattr(m, "source_id", ""))
