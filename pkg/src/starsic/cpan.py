"""Correlated phase and additive noise (CPAN) surrogate channel.

``y_i = x_i * exp(1j * theta_i) + n_i`` with AR(1) phase noise
``theta_i = mu_delta * theta_{i-1} + sigma_delta * delta_i`` and circular
Gaussian ``n_i`` of variance ``sigma_n_sq``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

from .constellation import SymbolSequence
from .sic import wrap

# Symbols whose per-symbol phase-measurement variance sigma_n^2 / (2 |x|^2)
# exceeds this are left out of the phase statistics; keeps wrap events out.
_MAX_PHASE_MEAS_VAR = 0.1
_MU_CLAMP = 1.0 - 1e-9


def steady_state_variance(mu_delta: float, sigma_delta_sq: float) -> float:
    if not abs(mu_delta) < 1:
        raise ValueError(f"|mu_delta| must be < 1, got {mu_delta}")
    return sigma_delta_sq / (1.0 - mu_delta**2)


@dataclass(frozen=True)
class CpanParams:
    """Surrogate channel parameters.

    ``sigma_theta_sq`` must equal ``sigma_delta_sq / (1 - mu_delta**2)``; use
    :meth:`from_steady_state` to build from the stationary variance.
    ``degenerate`` is set by :func:`fit_params` when the phase statistics
    carry no usable correlation.
    """

    mu_delta: float
    sigma_delta_sq: float
    sigma_theta_sq: float
    sigma_n_sq: float
    degenerate: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not abs(self.mu_delta) < 1:
            raise ValueError(f"|mu_delta| must be < 1, got {self.mu_delta}")
        if self.sigma_delta_sq < 0 or self.sigma_theta_sq < 0:
            raise ValueError("phase-noise variances must be nonnegative")
        if self.sigma_n_sq < 0:
            raise ValueError("sigma_n_sq must be nonnegative")
        expected = steady_state_variance(self.mu_delta, self.sigma_delta_sq)
        if abs(self.sigma_theta_sq - expected) > 1e-12 * max(abs(expected), 1e-300):
            raise ValueError(
                f"sigma_theta_sq={self.sigma_theta_sq} violates the steady-state "
                f"relation (expected {expected})"
            )

    @classmethod
    def from_steady_state(
        cls, mu_delta: float, sigma_theta_sq: float, sigma_n_sq: float, degenerate=False
    ) -> CpanParams:
        mu_delta, sigma_theta_sq, sigma_n_sq = float(mu_delta), float(sigma_theta_sq), float(sigma_n_sq)
        sigma_delta_sq = sigma_theta_sq * (1.0 - mu_delta**2)
        # recompute so the relation holds to rounding
        sigma_theta_sq = steady_state_variance(mu_delta, sigma_delta_sq)
        return cls(mu_delta, sigma_delta_sq, sigma_theta_sq, sigma_n_sq, degenerate)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> CpanParams:
        if "sigma_delta_sq" in d:
            return cls(
                float(d["mu_delta"]),
                float(d["sigma_delta_sq"]),
                float(d["sigma_theta_sq"]),
                float(d["sigma_n_sq"]),
                bool(d.get("degenerate", False)),
            )
        return cls.from_steady_state(
            float(d["mu_delta"]), float(d["sigma_theta_sq"]), float(d["sigma_n_sq"])
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    y: np.ndarray
    theta: np.ndarray


def simulate_phase(params: CpanParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) phase path of length ``n``."""
    drive = rng.standard_normal(n)
    drive[0] *= math.sqrt(params.sigma_theta_sq)
    drive[1:] *= math.sqrt(params.sigma_delta_sq)
    return lfilter([1.0], [1.0, -params.mu_delta], drive)


def simulate(params: CpanParams, x, seed) -> ChannelRealization:
    """Pass ``x`` (a :class:`SymbolSequence` or complex array) through the channel."""
    values = np.asarray(x.values if isinstance(x, SymbolSequence) else x, dtype=complex)
    n = values.size
    if n < 1:
        raise ValueError("input sequence must be nonempty")
    rng = np.random.default_rng(seed)
    theta = simulate_phase(params, n, rng)
    noise = np.array([1.0, 1j]) @ rng.standard_normal((2, n))
    y = values * np.exp(1j * theta) + math.sqrt(params.sigma_n_sq / 2) * noise
    return ChannelRealization(y=y, theta=theta)


def _as_pairs(training):
    pairs = []
    for x, y in training:
        xv = np.asarray(x.values if isinstance(x, SymbolSequence) else x, dtype=complex)
        yv = np.asarray(y, dtype=complex)
        if xv.shape != yv.shape:
            raise ValueError("x and y lengths differ in a training pair")
        if np.any(xv == 0):
            raise ValueError("training symbols must be nonzero")
        pairs.append((xv, yv))
    if not pairs:
        raise ValueError("training set is empty")
    return pairs


def fit_awgn_variance(training) -> float:
    """Memoryless AWGN fit ``mean |y - x|^2`` (phase noise counted as noise)."""
    pairs = _as_pairs(training)
    num = sum(float(np.sum(np.abs(y - x) ** 2)) for x, y in pairs)
    return num / sum(x.size for x, _ in pairs)


def mean_phase_offset(training) -> float:
    """Circular mean of ``angle(y / x)``; the common rotation a receiver removes."""
    pairs = _as_pairs(training)
    s = sum(complex(np.sum(y * np.conj(x))) for x, y in pairs)
    return float(np.angle(s))


def fit_params(training) -> CpanParams:
    """Fit :class:`CpanParams` from paired ``(x, y)`` training sequences.

    The additive noise power comes from the radial residual
    ``| |y| - |x| |^2``, which holds half of the circular noise power, so it is
    doubled. Symbols on low rings bias that residual upward (Rician bias), so a
    first pass ``mean(|y|^2 - |x|^2)`` selects the rings with
    ``|x|^2 >= 25 * sigma_n^2``.

    The phase path is estimated as ``wrap(angle(y / x))`` on the rings where the
    measurement variance ``sigma_n^2 / (2 |x|^2)`` stays small enough that wraps
    do not occur. That estimate carries white measurement noise, which only
    inflates the lag-0 autocovariance, so the AR(1) pair is taken from lags 1
    and 2: ``mu = c(2) / c(1)`` and ``sigma_theta^2 = c(1) / mu``. Lag products
    never straddle two training sequences.

    Degenerate input (no significant positive lag-1/lag-2 correlation) clamps ``mu_delta``
    to 0, falls back to the noise-corrected lag-0 variance and sets
    ``degenerate=True``.
    """
    pairs = _as_pairs(training)
    n_total = sum(x.size for x, _ in pairs)

    power_excess = sum(float(np.sum(np.abs(y) ** 2 - np.abs(x) ** 2)) for x, y in pairs)
    sn_first = max(power_excess / n_total, 0.0)
    num = cnt = 0.0
    for x, y in pairs:
        sel = np.abs(x) ** 2 >= 25 * sn_first
        num += float(np.sum((np.abs(y[sel]) - np.abs(x[sel])) ** 2))
        cnt += int(sel.sum())
    sigma_n_sq = 2 * num / cnt if cnt else sn_first

    paths = []
    meas_var_sum = 0.0
    for x, y in pairs:
        meas_var = sigma_n_sq / (2 * np.abs(x) ** 2)
        ok = meas_var <= _MAX_PHASE_MEAS_VAR
        paths.append((wrap(np.angle(y * np.conj(x))), ok))
        meas_var_sum += float(np.sum(meas_var[ok]))
    n_ok = sum(int(ok.sum()) for _, ok in paths)
    if n_ok == 0:
        raise ValueError("no training symbol is reliable enough for phase estimation")
    offset = sum(float(np.sum(t[ok])) for t, ok in paths) / n_ok

    sums = np.zeros(3)
    counts = np.zeros(3)
    for theta_hat, ok in paths:
        t = np.where(ok, theta_hat - offset, 0.0)
        m = t.size
        for lag in range(3):
            both = ok[: m - lag] & ok[lag:]
            sums[lag] += float(np.sum(t[: m - lag] * t[lag:] * both))
            counts[lag] += int(both.sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        acov = np.where(counts > 0, sums / counts, 0.0)

    var0 = max(acov[0] - meas_var_sum / counts[0], 0.0)
    # lag-1 correlation must clear ~3 standard errors of a white sequence
    significant = counts[1] > 0 and acov[1] > 3 * acov[0] / math.sqrt(counts[1])
    if significant and acov[2] > 0:
        mu = min(acov[2] / acov[1], _MU_CLAMP)
        sigma_theta_sq = acov[1] / mu
        return CpanParams.from_steady_state(mu, sigma_theta_sq, sigma_n_sq)
    return CpanParams.from_steady_state(0.0, var0, sigma_n_sq, degenerate=True)
