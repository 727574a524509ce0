"""Waveform <-> normalized log-mel spectrogram conversion.

Analysis runs in float64 with numpy/scipy. The forward path is
``load_audio -> stft -> mel_project -> to_log_normalized`` and the inverse path
is ``from_log_normalized -> mel_invert -> griffin_lim``.
"""
from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator, Optional

import numpy as np
from scipy import signal
from scipy.io import wavfile


@dataclass(frozen=True)
class DspConfig:
    """Analysis/synthesis settings.

    ``window_size``, ``fft_size``, ``mel_channels`` and ``mel_fmax`` default to
    values derived from ``hop_size`` and ``sample_rate``. ``ref_db`` is normally
    left unset and computed per corpus (see :func:`corpus_ref_db`).
    """

    sample_rate: int = 16000
    hop_size: int = 192
    window_size: Optional[int] = None
    fft_size: Optional[int] = None
    mel_channels: Optional[int] = None
    mel_fmin: float = 0.0
    mel_fmax: Optional[float] = None
    amp_floor: float = 1e-5
    griffin_lim_iters: int = 60
    min_db: float = -100.0
    ref_db: Optional[float] = None

    def __post_init__(self):
        if self.window_size is None:
            object.__setattr__(self, "window_size", 6 * self.hop_size)
        if self.fft_size is None:
            object.__setattr__(self, "fft_size", self.window_size)
        if self.mel_channels is None:
            object.__setattr__(self, "mel_channels", self.hop_size)
        if self.mel_fmax is None:
            object.__setattr__(self, "mel_fmax", self.sample_rate / 2)
        if self.sample_rate <= 0 or self.hop_size <= 0:
            raise ValueError("sample_rate and hop_size must be positive")
        if self.window_size != 6 * self.hop_size:
            raise ValueError("window_size must equal 6 * hop_size")
        if self.mel_channels != self.hop_size:
            raise ValueError("mel_channels must equal hop_size")
        if self.fft_size < self.window_size:
            raise ValueError("fft_size must be >= window_size")
        if self.amp_floor <= 0:
            raise ValueError("amp_floor must be positive")
        if not 0 <= self.mel_fmin < self.mel_fmax <= self.sample_rate / 2:
            raise ValueError("need 0 <= mel_fmin < mel_fmax <= sample_rate / 2")
        if self.griffin_lim_iters < 1:
            raise ValueError("griffin_lim_iters must be >= 1")
        if self.ref_db is not None and not self.min_db < self.ref_db:
            raise ValueError("min_db must be below ref_db")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def digest(self) -> str:
        """Identifier of the fields that shape a spectrogram."""
        keys = ("sample_rate", "hop_size", "window_size", "fft_size", "mel_channels",
                "mel_fmin", "mel_fmax", "amp_floor", "min_db")
        payload = json.dumps({k: getattr(self, k) for k in keys}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform must be mono (1-D)")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class LinearSpectrogram:
    magnitudes: np.ndarray  # (fft_size // 2 + 1, frames)
    frame_hop: int

    @property
    def frames(self) -> int:
        return self.magnitudes.shape[1]


@dataclass(frozen=True)
class NormalizationStats:
    min_db: float
    ref_db: float

    def __post_init__(self):
        if not self.min_db < self.ref_db:
            raise ValueError(f"min_db ({self.min_db}) must be below ref_db ({self.ref_db})")


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (mel_channels, frames), entries in [-1, 1]
    stats: NormalizationStats
    config_digest: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("mel spectrogram must be 2-D")
        if np.any(np.abs(self.values) > 1):
            raise ValueError("mel spectrogram entries must lie in [-1, 1]")

    @property
    def frames(self) -> int:
        return self.values.shape[1]

    @property
    def mel_channels(self) -> int:
        return self.values.shape[0]


# ----------------------------------------------------------------------------
# audio files


def load_audio(path, config: DspConfig) -> Waveform:
    """Read a RIFF/WAVE file as a mono waveform at ``config.sample_rate``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such audio file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise ValueError(f"unsupported audio file {path}: {exc}") from exc

    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported sample encoding {data.dtype} in {path}")

    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise ValueError(f"zero-length audio: {path}")

    if rate != config.sample_rate:
        g = math.gcd(int(rate), config.sample_rate)
        x = signal.resample_poly(x, config.sample_rate // g, int(rate) // g)
    return Waveform(np.clip(x, -1.0, 1.0), config.sample_rate)


def save_audio(path, w: Waveform) -> None:
    """Write PCM16 mono."""
    pcm = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), w.sample_rate, pcm)


# ----------------------------------------------------------------------------
# STFT


@functools.lru_cache(maxsize=8)
def _window(size: int) -> np.ndarray:
    w = signal.get_window("hann", size, fftbins=True)
    w.setflags(write=False)
    return w


def n_frames(n_samples: int, hop_size: int) -> int:
    return -(-n_samples // hop_size)


def _frame_spectra(padded: np.ndarray, frames: int, config: DspConfig) -> np.ndarray:
    # complex spectra of the first ``frames`` windows of an already padded signal
    win = config.window_size
    view = np.lib.stride_tricks.sliding_window_view(padded, win)[:: config.hop_size][:frames]
    return np.fft.rfft(view * _window(win), n=config.fft_size, axis=1).T


@functools.lru_cache(maxsize=16)
def _reflect_index(n: int, half: int) -> np.ndarray:
    # padded position -> source sample under reflect padding
    idx = np.pad(np.arange(n), (half, half), mode="reflect")
    idx.setflags(write=False)
    return idx


def _overlap_add(spectra: np.ndarray, n: int, config: DspConfig) -> np.ndarray:
    """Least-squares length-``n`` signal whose centered STFT is closest to ``spectra``.

    Padded-domain overlap-add sums are folded back through the reflect padding,
    which keeps the solve diagonal and makes it an exact projection.
    """
    win, hop = config.window_size, config.hop_size
    frames = spectra.shape[1]
    w = _window(win)
    chunks = np.fft.irfft(spectra, n=config.fft_size, axis=0)[:win].T * w
    idx = _reflect_index(n, win // 2)
    num = np.zeros(len(idx))
    den = np.zeros(len(idx))
    for f in range(frames):
        num[f * hop:f * hop + win] += chunks[f]
        den[f * hop:f * hop + win] += w * w
    num = np.bincount(idx, weights=num, minlength=n)
    den = np.bincount(idx, weights=den, minlength=n)
    out = np.zeros(n)
    nz = den > 1e-10
    out[nz] = num[nz] / den[nz]
    return out


def _centered_spectra(x: np.ndarray, frames: int, config: DspConfig) -> np.ndarray:
    half = config.window_size // 2
    return _frame_spectra(np.pad(x, (half, half), mode="reflect"), frames, config)


def stft(w: Waveform, config: DspConfig) -> LinearSpectrogram:
    """Hann-window magnitude STFT with centered, reflect-padded frames.

    Produces ``ceil(len(w) / hop_size)`` frames.
    """
    n = len(w)
    if n < config.window_size:
        raise ValueError(f"waveform of {n} samples is shorter than one window ({config.window_size})")
    frames = n_frames(n, config.hop_size)
    return LinearSpectrogram(np.abs(_centered_spectra(w.samples, frames, config)), config.hop_size)


# ----------------------------------------------------------------------------
# mel filterbank


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@functools.lru_cache(maxsize=8)
def mel_filterbank(config: DspConfig) -> np.ndarray:
    """Triangular filters, unit peak, centers evenly spaced on the mel scale.

    Shape ``(mel_channels, fft_size // 2 + 1)``. Adjacent triangles overlap so
    that interior bins are covered with total weight 1.
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(config.mel_fmin), hz_to_mel(config.mel_fmax),
                                  config.mel_channels + 2))
    freqs = np.arange(config.n_bins) * config.sample_rate / config.fft_size
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (center - lo)
    falling = (hi - freqs[None, :]) / (hi - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


@functools.lru_cache(maxsize=8)
def _mel_inverse_matrix(config: DspConfig) -> np.ndarray:
    fb = mel_filterbank(config)
    energy = fb @ fb.sum(axis=0)  # (W W^T 1)
    inv = fb.T / np.where(energy > 0, energy, 1.0)[None, :]
    inv.setflags(write=False)
    return inv


def mel_project(s: LinearSpectrogram, config: DspConfig) -> np.ndarray:
    fb = mel_filterbank(config)
    if s.magnitudes.shape[0] != fb.shape[1]:
        raise ValueError(f"spectrogram has {s.magnitudes.shape[0]} bins, filterbank expects {fb.shape[1]}")
    return fb @ s.magnitudes


def mel_invert(mel_linear: np.ndarray, config: DspConfig) -> LinearSpectrogram:
    """Approximate linear magnitudes via the energy-normalized filterbank transpose."""
    mel_linear = np.asarray(mel_linear, dtype=np.float64)
    if mel_linear.ndim != 2 or mel_linear.shape[0] != config.mel_channels:
        raise ValueError(f"expected ({config.mel_channels}, frames) mel matrix, got {mel_linear.shape}")
    mags = np.maximum(_mel_inverse_matrix(config) @ mel_linear, 0.0)
    return LinearSpectrogram(mags, config.hop_size)


# ----------------------------------------------------------------------------
# log-amplitude normalization


def amplitude_to_db(a: np.ndarray, config: DspConfig) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.asarray(a, dtype=np.float64), config.amp_floor))


def to_log_normalized(mel: np.ndarray, stats: NormalizationStats, config: DspConfig) -> MelSpectrogram:
    """Map linear mel amplitudes to [-1, 1] through clipped decibels."""
    mel = np.asarray(mel, dtype=np.float64)
    if np.any(mel < 0):
        raise ValueError("mel amplitudes must be non-negative")
    d = np.clip(amplitude_to_db(mel, config), stats.min_db, stats.ref_db)
    values = 2.0 * (d - stats.min_db) / (stats.ref_db - stats.min_db) - 1.0
    return MelSpectrogram(np.clip(values, -1.0, 1.0), stats, config.digest())


def from_log_normalized(m: MelSpectrogram) -> np.ndarray:
    v = np.asarray(m.values, dtype=np.float64)
    if np.any(np.abs(v) > 1):
        raise ValueError("normalized values must lie in [-1, 1]")
    st = m.stats
    d = (v + 1.0) * 0.5 * (st.ref_db - st.min_db) + st.min_db
    return 10.0 ** (d / 20.0)


def corpus_ref_db(mels, config: DspConfig) -> float:
    """Loudest log-amplitude across an iterable of linear mel matrices."""
    ref = -math.inf
    for mel in mels:
        ref = max(ref, float(amplitude_to_db(mel, config).max()))
    if not ref > config.min_db:
        raise ValueError("corpus is silent: maximum level does not exceed min_db")
    return ref


def waveform_to_mel_linear(w: Waveform, config: DspConfig) -> np.ndarray:
    return mel_project(stft(w, config), config)


def waveform_to_spectrogram(w: Waveform, stats: NormalizationStats, config: DspConfig) -> MelSpectrogram:
    return to_log_normalized(waveform_to_mel_linear(w, config), stats, config)


# ----------------------------------------------------------------------------
# Griffin-Lim


def spectral_convergence(magnitudes: np.ndarray, target: np.ndarray) -> float:
    return float(np.linalg.norm(magnitudes - target) / np.linalg.norm(target))


def griffin_lim(s: LinearSpectrogram, config: DspConfig, seed: int = 0,
                peak: Optional[float] = 0.95, errors: Optional[list] = None) -> Waveform:
    """Estimate a waveform whose STFT magnitudes match ``s``.

    Starts from seeded uniform random phase, then alternates the least-squares
    inverse STFT with the forward STFT, keeping the estimated phase and
    restoring the target magnitudes. Each inverse is an exact projection for
    :func:`stft`, so the spectral convergence never increases. If ``errors`` is
    a list, the spectral convergence after each iteration is appended to it.

    The output has ``frames * hop_size`` samples and is scaled to a maximum
    absolute value of ``peak`` unless ``peak`` is None.
    """
    target = np.asarray(s.magnitudes, dtype=np.float64)
    if target.shape[0] != config.n_bins:
        raise ValueError(f"expected {config.n_bins} frequency bins, got {target.shape[0]}")
    out_len = target.shape[1] * config.hop_size
    if not np.any(target > 0):
        return Waveform(np.zeros(out_len), config.sample_rate)
    # very short inputs: synthesize at least one window of silence-padded frames
    min_frames = config.window_size // config.hop_size
    if target.shape[1] < min_frames:
        target = np.pad(target, ((0, 0), (0, min_frames - target.shape[1])))
    frames = target.shape[1]
    n = frames * config.hop_size

    rng = np.random.default_rng(seed)
    spectra = target * np.exp(2j * np.pi * rng.random(target.shape))
    for _ in range(config.griffin_lim_iters):
        x = _overlap_add(spectra, n, config)
        rebuilt = _centered_spectra(x, frames, config)
        if errors is not None:
            errors.append(spectral_convergence(np.abs(rebuilt), target))
        spectra = target * np.exp(1j * np.angle(rebuilt))

    x = x[:out_len]
    if peak is not None:
        top = np.max(np.abs(x))
        if top > 0:
            x = x * (peak / top)
    return Waveform(x, config.sample_rate)


def spectrogram_to_waveform(m: MelSpectrogram, config: DspConfig, seed: int = 0,
                            peak: Optional[float] = 0.95) -> Waveform:
    return griffin_lim(mel_invert(from_log_normalized(m), config), config, seed=seed, peak=peak)


# ----------------------------------------------------------------------------
# spectrogram cache records

CACHE_MAGIC = b"MGVC"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


def write_cache_record(fh: BinaryIO, m: MelSpectrogram) -> int:
    """Append one record; returns the number of bytes written."""
    values = np.asarray(m.values, dtype="<f4")
    mel, t = values.shape
    header = _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, mel, t, m.stats.min_db, m.stats.ref_db)
    body = np.ascontiguousarray(values.T).tobytes()  # time-major
    fh.write(header)
    fh.write(body)
    return len(header) + len(body)


def read_cache_record(fh: BinaryIO, config_digest: str = "") -> MelSpectrogram:
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise EOFError("truncated cache record header")
    magic, version, mel, t, min_db, ref_db = _HEADER.unpack(raw)
    if magic != CACHE_MAGIC:
        raise ValueError(f"bad cache magic {magic!r}")
    if version != CACHE_VERSION:
        raise ValueError(f"unsupported cache version {version}")
    body = fh.read(4 * mel * t)
    if len(body) != 4 * mel * t:
        raise EOFError("truncated cache record body")
    values = np.frombuffer(body, dtype="<f4").reshape(t, mel).T.astype(np.float32)
    return MelSpectrogram(values, NormalizationStats(min_db, ref_db), config_digest)


def iter_cache(path, config_digest: str = "") -> Iterator[MelSpectrogram]:
    size = Path(path).stat().st_size
    with open(path, "rb") as fh:
        while fh.tell() < size:
            yield read_cache_record(fh, config_digest)


def read_cache_at(path, offset: int, config_digest: str = "") -> MelSpectrogram:
    with open(path, "rb") as fh:
        fh.seek(offset)
        return read_cache_record(fh, config_digest)
