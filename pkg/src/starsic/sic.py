"""Successive interference cancellation (SIC) receiver for star-QAM over CPAN.

Detection runs in stages. Stage 0 detects ring amplitudes with a memoryless
metric. Phase symbols are split round-robin into ``S`` groups; group 1 uses a
memoryless metric and group ``s > 1`` conditions on the (genie-decoded) phases
of groups ``< s`` through a Gaussian smoother on the AR(1) phase chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import i0e, logsumexp

if TYPE_CHECKING:
    from .constellation import Constellation, SymbolSequence
    from .cpan import CpanParams

TWO_PI = 2 * np.pi


def wrap(x):
    """Map angles to ``[-pi, pi)``: ``((x + pi) mod 2 pi) - pi``."""
    return np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi


def _wrap1(x: float) -> float:
    return (x + math.pi) % (2 * math.pi) - math.pi


def log_i0(z):
    """``log I0(z)`` for ``z >= 0`` without overflow."""
    z = np.asarray(z, dtype=float)
    return np.log(i0e(z)) + z


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    """Per-symbol categorical posteriors of one detection stage.

    ``probs[k]`` is the distribution for symbol ``symbol_idx[k]``.
    """

    probs: np.ndarray
    symbol_idx: np.ndarray

    def __len__(self) -> int:
        return self.probs.shape[0]

    def to_tsv(self, path) -> None:
        header = "symbol\t" + "\t".join(f"p{k}" for k in range(self.probs.shape[1]))
        rows = np.column_stack([self.symbol_idx, self.probs])
        fmt = ["%d"] + ["%.10g"] * self.probs.shape[1]
        np.savetxt(path, rows, fmt=fmt, delimiter="\t", header=header, comments="")


@dataclass(frozen=True, eq=False)
class PhaseBelief:
    """Gaussian phase summaries ``N(mu[i], sigma_sq[i])`` from the smoother."""

    mu: np.ndarray
    sigma_sq: np.ndarray
    n_messages: int = 0


@dataclass(frozen=True)
class SicSchedule:
    """Round-robin assignment of phase symbols to ``n_stages`` SIC stages."""

    n_stages: int

    def __post_init__(self):
        if int(self.n_stages) != self.n_stages or self.n_stages < 1:
            raise ValueError("n_stages must be a positive integer")

    def stage_of_symbol(self, n: int) -> np.ndarray:
        """Stage (1-based) that detects the phase of each of ``n`` symbols."""
        return np.arange(n) % self.n_stages + 1

    def symbols_of_stage(self, s: int, n: int) -> np.ndarray:
        return np.arange(s - 1, n, self.n_stages)


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    lse = logsumexp(logw, axis=-1, keepdims=True)
    if np.any(~np.isfinite(lse)):
        raise FloatingPointError("all posterior log-weights underflowed")
    return np.exp(logw - lse)


def amplitude_posterior(y, c: Constellation, params: CpanParams) -> np.ndarray:
    """Memoryless ring posterior ``q(r | y_i)`` for each sample of ``y``.

    ``q(r | y) ~ P(r) exp(-r^2 / s) I0(2 |y| r / s)`` with ``s = sigma_n^2``:
    the phase sum is replaced by an integral over a uniform phase, which makes
    the metric independent of the phase noise.

    Returns an array of shape ``y.shape + (n_r,)``.
    """
    s = params.sigma_n_sq
    if not s > 0:
        raise ValueError("sigma_n_sq must be positive")
    mag = np.abs(np.asarray(y, dtype=complex))[..., None]
    r = c.radii
    logw = np.log(c.radial_pmf) - r**2 / s + log_i0(2 * mag * r / s)
    return _normalize_log(logw)


def _phase_posterior(y, r, mu, sigma_sq, c: Constellation, sigma_n_sq: float):
    if not sigma_n_sq > 0:
        raise ValueError("sigma_n_sq must be positive")
    y = np.asarray(y, dtype=complex)
    r = np.broadcast_to(np.asarray(r, dtype=float), y.shape)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), y.shape)
    sigma_sq = np.broadcast_to(np.asarray(sigma_sq, dtype=float), y.shape)
    if np.any(r <= 0):
        raise ValueError("ring radii must be positive")
    mag = np.abs(y)
    zero = mag == 0
    with np.errstate(divide="ignore"):
        var = sigma_sq + sigma_n_sq / (2 * mag * r)
    var = np.where(zero, 1.0, var)[..., None]
    resid = wrap(np.angle(y)[..., None] - c.phase_set - mu[..., None])
    logw = -0.5 * resid**2 / var
    logw = np.where(zero[..., None], 0.0, logw)
    return _normalize_log(logw)


def phase_stage1_posterior(y, r, c: Constellation, params: CpanParams) -> np.ndarray:
    """First-stage phase posterior given the ring radius.

    ``q(gamma | y, r) ~ N(wrap(angle(y) - gamma); 0, sigma_theta^2 + sigma_n^2 / (2 |y| r))``.
    A zero sample gives a uniform row.
    """
    return _phase_posterior(y, r, 0.0, params.sigma_theta_sq, c, params.sigma_n_sq)


def phase_stagek_posterior(y, r, mu, sigma_sq, c: Constellation, params: CpanParams):
    """Later-stage phase posterior with the smoother belief ``N(mu, sigma_sq)``."""
    if np.any(np.asarray(sigma_sq) < 0):
        raise ValueError("belief variances must be nonnegative")
    return _phase_posterior(y, r, mu, sigma_sq, c, params.sigma_n_sq)


def _known_array(known_phases, n: int) -> np.ndarray:
    if isinstance(known_phases, dict):
        out = np.full(n, np.nan)
        for i, g in known_phases.items():
            out[int(i)] = g
        return out
    if known_phases is None:
        return np.full(n, np.nan)
    out = np.asarray(known_phases, dtype=float)
    if out.shape != (n,):
        raise ValueError("known_phases must have one entry per symbol (NaN = unknown)")
    return out


def _predict_pass(z, v, a, q, p0):
    """One-step predictive ``N(theta_i | measurements before i)`` for every ``i``."""
    n = len(z)
    pm = [0.0] * n
    pv = [0.0] * n
    m, P = 0.0, p0
    for i in range(n):
        pm[i] = m
        pv[i] = P
        vi = v[i]
        if vi != math.inf and P > 0.0:
            if vi == 0.0:
                m, P = m + _wrap1(z[i] - m), 0.0
            else:
                k = P / (P + vi)
                m, P = m + k * _wrap1(z[i] - m), P * vi / (P + vi)
        m, P = a * m, a * a * P + q
    return pm, pv


def _fuse(m1, v1, m2, v2, p0):
    """Combine two predictives of the same variable that share the prior ``N(0, p0)``."""
    if v1 == 0.0 or p0 == 0.0:
        return m1, v1
    if v2 == 0.0:
        return m1 + _wrap1(m2 - m1), 0.0
    m2 = m1 + _wrap1(m2 - m1)
    lam = 1.0 / v1 + 1.0 / v2 - 1.0 / p0
    eta = m1 / v1 + m2 / v2
    return eta / lam, 1.0 / lam


def phase_smoother(
    y, r, known_phases, params: CpanParams, leave_one_out: bool = True
) -> PhaseBelief:
    """Gaussian forward-backward smoothing of the AR(1) phase chain.

    Factor graph: a prior factor on ``theta_0``, transition factors
    ``p(theta_i | theta_{i-1})`` and one measurement factor per symbol. A symbol
    with known phase ``gamma_i`` contributes the pseudo-measurement
    ``wrap(angle(y_i) - gamma_i)`` with variance ``sigma_n^2 / (2 |y_i| r_i)``;
    the other measurement factors are flat. The schedule sends

    * 1 prior message,
    * ``n`` measurement-to-variable messages,
    * ``2 (n - 1)`` forward messages (variable-to-transition, transition-to-variable),
    * ``2 (n - 1)`` backward messages,

    i.e. ``5 n - 3`` mean/variance pairs, counted in ``PhaseBelief.n_messages``.
    Backward messages are carried in normalised form (times the prior), which
    keeps their means bounded when ``mu_delta`` is small and wrapping their
    innovations well defined. The output at ``i`` combines the forward and
    backward messages arriving at ``theta_i``, so it excludes the symbol's own
    measurement; with ``leave_one_out=False`` a measured position also
    includes its own.

    Innovations are wrapped before each update; means are not re-wrapped.

    Parameters
    ----------
    y, r : array_like
        Received samples and (decoded) ring radii, length ``n``.
    known_phases : dict or array_like or None
        ``{i: gamma_i}`` or a length-``n`` array with NaN at unknown positions.
    params : CpanParams
    leave_one_out : bool
    """
    y = np.asarray(y, dtype=complex)
    n = y.size
    r = np.broadcast_to(np.asarray(r, dtype=float), (n,))
    known = _known_array(known_phases, n)
    if np.any(r <= 0):
        raise ValueError("ring radii must be positive")

    mag = np.abs(y)
    measured = ~np.isnan(known) & (mag > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(measured, wrap(np.angle(y) - known), 0.0)
        v = np.where(measured, params.sigma_n_sq / (2 * mag * r), np.inf)
    z = z.tolist()
    v = v.tolist()

    a = float(params.mu_delta)
    q = float(params.sigma_delta_sq)
    p0 = float(params.sigma_theta_sq)
    inf = math.inf

    n_msg = 1 + n  # prior + one message out of every measurement factor
    fm, fv = _predict_pass(z, v, a, q, p0)
    n_msg += 2 * (n - 1)
    # the stationary chain is time-reversible: the backward messages are the
    # one-step predictions of the same filter run on the reversed sequence
    bm, bv = _predict_pass(z[::-1], v[::-1], a, q, p0)
    bm.reverse()
    bv.reverse()
    n_msg += 2 * (n - 1)

    mu_out = np.empty(n)
    var_out = np.empty(n)
    for i in range(n):
        m, P = _fuse(fm[i], fv[i], bm[i], bv[i], p0)
        if not leave_one_out and v[i] != inf and P > 0.0:
            vi = v[i]
            k = P / (P + vi)
            m, P = m + k * _wrap1(z[i] - m), P * vi / (P + vi)
        mu_out[i] = m
        var_out[i] = P
    return PhaseBelief(mu=mu_out, sigma_sq=var_out, n_messages=n_msg)


def run_sic(
    y,
    truth: SymbolSequence,
    schedule: SicSchedule,
    c: Constellation,
    params: CpanParams,
    leave_one_out: bool = True,
) -> list[PosteriorTable]:
    """Run the amplitude stage and ``S`` phase stages with genie decoding.

    Returns ``[amplitude, phase_1, ..., phase_S]``. Phase stage ``s`` covers the
    symbols ``i`` with ``i % S == s - 1``; for ``s > 1`` it conditions on the
    true phases of all earlier stages and on the true radii.
    """
    y = np.asarray(y, dtype=complex)
    n = y.size
    if len(truth) != n:
        raise ValueError("y and truth lengths differ")
    r = c.radii[truth.radius_idx]
    gamma = c.phase_set[truth.phase_idx]
    stage = schedule.stage_of_symbol(n)

    tables = [PosteriorTable(amplitude_posterior(y, c, params), np.arange(n))]
    for s in range(1, schedule.n_stages + 1):
        idx = np.flatnonzero(stage == s)
        if s == 1:
            probs = phase_stage1_posterior(y[idx], r[idx], c, params)
        else:
            known = np.where(stage < s, gamma, np.nan)
            belief = phase_smoother(y, r, known, params, leave_one_out=leave_one_out)
            probs = phase_stagek_posterior(
                y[idx], r[idx], belief.mu[idx], belief.sigma_sq[idx], c, params
            )
        tables.append(PosteriorTable(probs, idx))
    return tables
