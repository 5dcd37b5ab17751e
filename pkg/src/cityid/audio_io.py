"""WAV decoding, resampling and fixed-size framing.

Everything downstream expects mono float64 audio at 44100 Hz, cut into
1024-sample windows with a 512-sample hop (about 23.2 ms, 50% overlap).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import ClampedSamples, CorruptHeader, EmptyAudio, TooShort, UnsupportedEncoding

CANONICAL_RATE = 44100
WINDOW_LEN = 1024
HOP_LEN = 512

_PCM = 0x0001
_IEEE_FLOAT = 0x0003
_EXTENSIBLE = 0xFFFE

ENCODINGS = ("pcm16", "pcm24", "pcm32", "float32")


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int
    source_id: str = ""
    n_clamped: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip samples must be mono (1-D)")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (n_frames, window_len), a read-only strided view
    window_len: int
    hop_len: int
    sample_rate_hz: int
    source_id: str = ""

    def __len__(self):
        return self.frames.shape[0]


def _clamp(x: np.ndarray, source_id: str) -> tuple[np.ndarray, int]:
    bad = ~np.isfinite(x)
    x = np.where(bad, 0.0, x)
    over = np.abs(x) > 1.0
    n = int(bad.sum() + over.sum())
    if n:
        x = np.clip(x, -1.0, 1.0)
        warnings.warn(f"{source_id}: clamped {n} samples to [-1, 1]", ClampedSamples, stacklevel=3)
    return x, n


def _iter_chunks(data: bytes, path):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = pos + 8
        if body + size > len(data):
            raise CorruptHeader(f"{path}: chunk {cid!r} overruns file ({size} bytes declared)")
        yield cid, data[body:body + size]
        pos = body + size + (size & 1)


def _decode(raw: bytes, fmt_tag: int, bits: int, n_channels: int, path) -> np.ndarray:
    if fmt_tag == _PCM and bits == 16:
        x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif fmt_tag == _PCM and bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v & 0x800000, v - 0x1000000, v)
        x = v.astype(np.float64) / 8388608.0
    elif fmt_tag == _PCM and bits == 32:
        x = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    elif fmt_tag == _IEEE_FLOAT and bits == 32:
        x = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedEncoding(f"{path}: format tag {fmt_tag:#06x} with {bits} bits is not supported")
    return x.reshape(-1, n_channels)


def load_wav(path, source_id: str | None = None) -> AudioClip:
    """Read a RIFF/WAVE file and mix it down to mono.

    Integer PCM is scaled by the type's maximum magnitude (2**15, 2**23,
    2**31). Float data is clamped to [-1, 1]; the count of clamped or
    non-finite samples is stored on the clip and emitted as a warning.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt = None
    raw = None
    for cid, body in _iter_chunks(data, path):
        if cid == b"fmt ":
            if len(body) < 16:
                raise CorruptHeader(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body)
            if fmt[0] == _EXTENSIBLE:
                if len(body) < 26:
                    raise CorruptHeader(f"{path}: truncated WAVE_FORMAT_EXTENSIBLE header")
                sub = struct.unpack_from("<H", body, 24)[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            raw = body
    if fmt is None or raw is None:
        raise CorruptHeader(f"{path}: missing fmt or data chunk")

    fmt_tag, n_channels, rate, _, block_align, bits = fmt
    if n_channels not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {n_channels} channels (only mono/stereo)")
    if rate == 0 or block_align != n_channels * bits // 8:
        raise CorruptHeader(f"{path}: inconsistent fmt fields")
    raw = raw[: len(raw) - len(raw) % block_align]
    x = _decode(raw, fmt_tag, bits, n_channels, path)
    if x.shape[0] == 0:
        raise EmptyAudio(f"{path}: no samples")

    mono = x.mean(axis=1) if n_channels == 2 else x[:, 0]
    sid = source_id if source_id is not None else path.stem
    mono, n = _clamp(mono, sid)
    return AudioClip(mono, int(rate), sid, n)


def write_wav(path, samples, sample_rate_hz: int, encoding: str = "pcm16") -> None:
    """Write mono (1-D) or stereo ((n, 2)) float samples in [-1, 1]."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n_channels = x.shape[1]
    x = np.clip(x, -1.0, 1.0)
    if encoding == "pcm16":
        tag, bits = _PCM, 16
        payload = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
    elif encoding == "pcm24":
        tag, bits = _PCM, 24
        v = np.clip(np.round(x * 8388608.0), -8388608, 8388607).astype(np.int64).ravel()
        v &= 0xFFFFFF
        payload = np.stack([v & 0xFF, (v >> 8) & 0xFF, (v >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    elif encoding == "pcm32":
        tag, bits = _PCM, 32
        payload = np.clip(np.round(x * 2147483648.0), -2147483648, 2147483647).astype("<i4").tobytes()
    elif encoding == "float32":
        tag, bits = _IEEE_FLOAT, 32
        payload = x.astype("<f4").tobytes()
    else:
        raise UnsupportedEncoding(f"unknown encoding {encoding!r}")
    block = n_channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, n_channels, sample_rate_hz, sample_rate_hz * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def resample(clip: AudioClip, target_hz: int) -> AudioClip:
    """Polyphase band-limited resampling (Kaiser-windowed sinc)."""
    if len(clip) == 0:
        raise EmptyAudio(f"{clip.source_id}: cannot resample empty audio")
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if target_hz == clip.sample_rate_hz:
        return clip
    g = gcd(int(target_hz), int(clip.sample_rate_hz))
    y = resample_poly(clip.samples, target_hz // g, clip.sample_rate_hz // g)
    y, n = _clamp(y, clip.source_id)
    return AudioClip(y, int(target_hz), clip.source_id, clip.n_clamped + n)


def frame_signal(clip: AudioClip, window_len: int = WINDOW_LEN, hop_len: int = HOP_LEN) -> FrameSequence:
    """Cut the clip into overlapping windows; a trailing partial window is dropped."""
    n = len(clip)
    if n < window_len:
        raise TooShort(f"{clip.source_id}: {n} samples is shorter than one {window_len}-sample window")
    n_frames = (n - window_len) // hop_len + 1
    view = np.lib.stride_tricks.sliding_window_view(clip.samples, window_len)[::hop_len]
    assert view.shape[0] == n_frames
    return FrameSequence(view, window_len, hop_len, clip.sample_rate_hz, clip.source_id)


def load_canonical(path, source_id: str | None = None, sample_rate_hz: int = CANONICAL_RATE) -> AudioClip:
    """load_wav followed by resampling to the canonical rate."""
    return resample(load_wav(path, source_id), sample_rate_hz)
