"""WDM fiber link: sinc shaping, split-step propagation, DBP receiver.

Everything uses a circular (FFT-periodic) time grid, so a block of ``n``
symbols is treated as one period of a periodic signal. Units are SI: seconds,
metres, watts, ``beta2`` in s^2/m and ``gamma_nl`` in 1/(W m). Fiber loss is
assumed exactly compensated by ideal distributed Raman gain, whose
spontaneous emission enters as white noise added after every step.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .constellation import Constellation, SymbolSequence, sample_sequence

PLANCK = 6.62607015e-34


@dataclass(frozen=True)
class LinkConfig:
    length_km: float = 1000.0
    step_km: float = 0.1
    dbp_step_km: float | None = None
    beta2: float = -21.7e-27
    gamma_nl: float = 1.27e-3
    alpha_db_per_km: float = 0.2
    nsp: float = 1.0
    carrier_hz: float = 193.4e12
    ase_psd: float | None = None
    symbol_rate: float = 50e9
    n_wdm_channels: int = 5
    channel_spacing_hz: float = 50e9
    oversampling: int = 8
    rx_bandwidth_hz: float | None = None

    def __post_init__(self):
        for f in ("length_km", "step_km", "symbol_rate", "channel_spacing_hz"):
            if not getattr(self, f) > 0:
                raise ValueError(f"{f} must be positive")
        for f in ("gamma_nl", "alpha_db_per_km", "nsp"):
            if getattr(self, f) < 0:
                raise ValueError(f"{f} must be nonnegative")
        if self.ase_psd is not None and self.ase_psd < 0:
            raise ValueError("ase_psd must be nonnegative")
        if self.n_wdm_channels < 1 or self.n_wdm_channels % 2 == 0:
            raise ValueError("n_wdm_channels must be a positive odd integer")
        os_ = self.oversampling
        if os_ < 2 or os_ & (os_ - 1):
            raise ValueError("oversampling must be a power of two >= 2")
        if self.n_wdm_channels > 1 and (
            os_ * self.symbol_rate < self.n_wdm_channels * self.channel_spacing_hz
        ):
            raise ValueError(
                "simulation bandwidth oversampling*symbol_rate does not cover "
                "the WDM spectrum n_wdm_channels*channel_spacing_hz"
            )

    @property
    def sample_rate(self) -> float:
        return self.oversampling * self.symbol_rate

    @property
    def length_m(self) -> float:
        return self.length_km * 1e3

    @property
    def total_ase_psd(self) -> float:
        """ASE PSD accumulated over the link (W/Hz, one polarisation)."""
        if self.ase_psd is not None:
            return self.ase_psd
        alpha = self.alpha_db_per_km / (10 * math.log10(math.e)) / 1e3
        return self.nsp * PLANCK * self.carrier_hz * alpha * self.length_m

    def channel_offsets(self) -> np.ndarray:
        k = np.arange(self.n_wdm_channels) - (self.n_wdm_channels - 1) // 2
        return k * self.channel_spacing_hz

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> LinkConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown link parameters: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SampledSignal:
    samples: np.ndarray
    sample_rate: float
    center_freq_offset: float = 0.0


def _band_bins(n_symbols: int, oversampling: int) -> np.ndarray:
    """FFT bins (of an ``n_symbols * oversampling`` grid) inside ``[-R/2, R/2)``."""
    k = np.fft.fftfreq(n_symbols, d=1.0 / n_symbols).astype(np.int64)
    return np.mod(k, n_symbols * oversampling)


def shape_pulses(x, oversampling: int, symbol_rate: float) -> SampledSignal:
    """Ideal sinc interpolation of the symbol train onto ``oversampling`` samples/symbol.

    The spectrum occupies the ``n`` bins in ``[-R/2, R/2)``; the Nyquist bin is
    kept whole at ``-R/2``, which keeps the samples at the symbol instants
    equal to ``x`` and the mean power equal to ``mean(|x|^2)``.
    """
    if oversampling < 2:
        raise ValueError("oversampling must be >= 2")
    values = np.asarray(x.values if isinstance(x, SymbolSequence) else x, dtype=complex)
    n = values.size
    spec = np.zeros(n * oversampling, dtype=complex)
    spec[_band_bins(n, oversampling)] = np.fft.fft(values) * oversampling
    return SampledSignal(np.fft.ifft(spec), oversampling * symbol_rate)


def matched_filter_downsample(samples, oversampling: int) -> np.ndarray:
    """Brick-wall filter to ``[-R/2, R/2)`` and take one sample per symbol."""
    samples = np.asarray(samples, dtype=complex)
    n = samples.size // oversampling
    if n * oversampling != samples.size:
        raise ValueError("sample count is not a multiple of the oversampling")
    spec = np.fft.fft(samples)[_band_bins(n, oversampling)] / oversampling
    return np.fft.ifft(spec)


def _omega(n: int, fs: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n, d=1.0 / fs)


def ssfm(
    u,
    fs: float,
    length_m: float,
    step_m: float,
    beta2: float,
    gamma_nl: float,
    ase_psd: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Symmetric split-step Fourier solution of the lossless NLSE.

    One step of size ``h``: half a dispersion step ``exp(1j beta2/2 w^2 h/2)``,
    the Kerr rotation ``exp(1j gamma |u|^2 h)``, the other half dispersion
    step, then complex white noise of variance ``ase_psd * fs * h / L``.
    """
    u = np.array(u, dtype=complex)
    n_steps = max(1, math.ceil(length_m / step_m - 1e-9))
    h = length_m / n_steps
    half = np.exp(0.5j * beta2 * _omega(u.size, fs) ** 2 * (h / 2))
    noise_std = math.sqrt(ase_psd * fs * h / length_m / 2) if ase_psd > 0 else 0.0
    if noise_std and rng is None:
        raise ValueError("an RNG is required when ASE noise is enabled")
    for _ in range(n_steps):
        u = np.fft.ifft(half * np.fft.fft(u))
        if gamma_nl:
            u *= np.exp(1j * gamma_nl * h * (u.real**2 + u.imag**2))
        u = np.fft.ifft(half * np.fft.fft(u))
        if noise_std:
            u += noise_std * (rng.standard_normal(u.size) + 1j * rng.standard_normal(u.size))
    return u


def multiplex(cfg: LinkConfig, tx: list[SampledSignal]) -> np.ndarray:
    """Sum the WDM channels at their carrier offsets (centre channel unshifted)."""
    if len(tx) != cfg.n_wdm_channels:
        raise ValueError(f"expected {cfg.n_wdm_channels} channels, got {len(tx)}")
    n = tx[0].samples.size
    if any(s.samples.size != n for s in tx):
        raise ValueError("all WDM channels must have the same length")
    fs = cfg.sample_rate
    t = np.arange(n) / fs
    out = np.zeros(n, dtype=complex)
    for f, s in zip(cfg.channel_offsets(), tx):
        cycles = f * n / fs
        if abs(cycles - round(cycles)) > 1e-9:
            raise ValueError("channel offset is not periodic on the simulation grid")
        out += s.samples * np.exp(2j * np.pi * f * t)
    return out


def propagate(cfg: LinkConfig, tx: list[SampledSignal], seed) -> SampledSignal:
    """Propagate the multiplexed WDM field over the link; deterministic given ``seed``."""
    u = multiplex(cfg, tx)
    rng = np.random.default_rng(seed)
    out = ssfm(
        u,
        cfg.sample_rate,
        cfg.length_m,
        cfg.step_km * 1e3,
        cfg.beta2,
        cfg.gamma_nl,
        cfg.total_ase_psd,
        rng,
    )
    return SampledSignal(out, cfg.sample_rate)


def bandpass(samples, fs: float, bandwidth: float) -> np.ndarray:
    spec = np.fft.fft(samples)
    f = np.fft.fftfreq(spec.size, d=1.0 / fs)
    spec[np.abs(f) > bandwidth / 2] = 0.0
    return np.fft.ifft(spec)


def receive(cfg: LinkConfig, rx: SampledSignal) -> np.ndarray:
    """Bandpass to the centre channel, single-channel DBP, matched filter, downsample."""
    bw = cfg.rx_bandwidth_hz if cfg.rx_bandwidth_hz is not None else cfg.channel_spacing_hz
    u = rx.samples
    if bw < rx.sample_rate:
        u = bandpass(u, rx.sample_rate, bw)
    dbp_step = cfg.dbp_step_km if cfg.dbp_step_km is not None else cfg.step_km
    u = ssfm(u, rx.sample_rate, cfg.length_m, dbp_step * 1e3, -cfg.beta2, -cfg.gamma_nl)
    return matched_filter_downsample(u, cfg.oversampling)


def simulate_link(cfg: LinkConfig, c: Constellation, n_symbols: int, seed):
    """Transmit one block over the WDM link.

    Interferers carry independent sequences from the same constellation.
    Returns ``(x, y)`` for the centre channel.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    tx_seeds = ss.spawn(cfg.n_wdm_channels + 1)
    xs = [sample_sequence(c, n_symbols, s) for s in tx_seeds[:-1]]
    tx = [shape_pulses(x, cfg.oversampling, cfg.symbol_rate) for x in xs]
    rx = propagate(cfg, tx, tx_seeds[-1])
    y = receive(cfg, rx)
    return xs[(cfg.n_wdm_channels - 1) // 2], y


def save_dataset(path, c: Constellation, xs: list[SymbolSequence], ys: list) -> None:
    """Write paired ``(x, y)`` sequences to ``.npz``.

    Arrays: ``radius_idx`` and ``phase_idx`` (int64, shape ``(m, n)``),
    ``y`` (complex128, ``(m, n)``), and ``constellation`` (JSON string).
    """
    np.savez(
        Path(path),
        radius_idx=np.stack([x.radius_idx for x in xs]),
        phase_idx=np.stack([x.phase_idx for x in xs]),
        y=np.stack([np.asarray(y, dtype=complex) for y in ys]),
        constellation=np.array(json.dumps(c.to_dict())),
    )


def load_dataset(path):
    """Inverse of :func:`save_dataset`: returns ``(c, xs, ys)``."""
    with np.load(Path(path)) as d:
        c = Constellation.from_dict(json.loads(str(d["constellation"])))
        xs = [
            SymbolSequence.from_indices(c, ri, pi)
            for ri, pi in zip(d["radius_idx"], d["phase_idx"])
        ]
        ys = list(d["y"])
    return c, xs, ys
