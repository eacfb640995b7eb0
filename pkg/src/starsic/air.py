"""Achievable information rates from detector posteriors.

Every rate here is the mismatched-decoding lower bound
``E[log2 q(x | .) - log2 P(x)]`` estimated by a sample mean over the
transmitted symbols.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation, SymbolSequence, source_entropy
from .sic import PosteriorTable, SicSchedule, run_sic

log = logging.getLogger(__name__)

_CHUNK = 512


@dataclass
class StageAir:
    bits: float
    std_error: float
    clamped: bool = False
    n_inf: int = 0


@dataclass
class AirResult:
    per_stage_bits: list
    total_bits: float
    n_symbols_used: int
    std_error: float
    flags: list = field(default_factory=list)


def awgn_air_gaussian(snr_db: float) -> float:
    """Capacity ``log2(1 + SNR)`` of the AWGN channel with Gaussian input."""
    return math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def _per_symbol_terms(probs, truth_idx, prior):
    q = probs[np.arange(len(truth_idx)), truth_idx]
    with np.errstate(divide="ignore"):
        return np.log2(q) - np.log2(prior[truth_idx])


def _summarise(terms: np.ndarray, groups=None) -> tuple[float, float, int]:
    """Mean, standard error and number of ``-inf`` terms.

    With ``groups`` (e.g. the sequence id of each term) the standard error is
    taken over group means, which accounts for correlation inside a sequence.
    """
    bad = ~np.isfinite(terms)
    n_inf = int(bad.sum())
    if n_inf:
        log.warning("%d symbols got zero posterior probability on the truth", n_inf)
        terms = np.where(bad, np.nan, terms)
    mean = float(np.nanmean(terms)) if terms.size else 0.0
    if groups is not None:
        groups = np.asarray(groups)
        labels = np.unique(groups)
        if labels.size > 1:
            gm = np.array([np.nanmean(terms[groups == g]) for g in labels])
            return mean, float(np.std(gm, ddof=1) / math.sqrt(labels.size)), n_inf
    k = int(np.sum(~np.isnan(terms)))
    se = float(np.nanstd(terms, ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return mean, se, n_inf


def stage_air(
    posteriors: PosteriorTable,
    truth_idx,
    prior,
    symbols_per_use: float = 1.0,
    groups=None,
) -> StageAir:
    """Per-channel-use rate of one detection stage.

    Parameters
    ----------
    posteriors : PosteriorTable
        Rows are ``q(. | observations)`` for the stage's symbols.
    truth_idx : array_like of int
        Index of the transmitted letter of every row.
    prior : array_like
        Strictly positive prior over the stage alphabet.
    symbols_per_use : float
        Fraction of channel uses carried by this stage (``1`` for the ring
        stage, ``n_stage / n`` for a phase stage).
    groups : array_like, optional
        Sequence label per row for the standard error.

    Zero posterior mass on the truth gives a ``-inf`` term; such terms are
    dropped, counted in ``n_inf`` and the result is flagged. A negative mean is
    clamped to zero.
    """
    prior = np.asarray(prior, dtype=float)
    if np.any(prior <= 0):
        raise ValueError("prior must be strictly positive")
    truth_idx = np.asarray(truth_idx)
    terms = _per_symbol_terms(posteriors.probs, truth_idx, prior)
    mean, se, n_inf = _summarise(terms, groups)
    bits = mean * symbols_per_use
    clamped = bits < 0
    if clamped:
        log.warning("negative stage AIR %.4g clamped to 0", bits)
    return StageAir(max(bits, 0.0), se * symbols_per_use, clamped, n_inf)


def _log_metric_full(y, c: Constellation, sigma_n_sq: float, truth_point_idx):
    """Return ``(log q(x_true | y), log P(x_true))`` for the memoryless AWGN metric.

    ``q(x | y) ~ P(x) exp(-|y - x|^2 / sigma_n^2)`` over the whole alphabet,
    evaluated in chunks so the full table is never materialised.
    """
    pts = c.points
    logp = np.log(c.point_pmf)
    # -|y-x|^2/s = (2 Re(y x*) - |x|^2 - |y|^2)/s ; the |y|^2 term cancels
    base = logp - np.abs(pts) ** 2 / sigma_n_sq
    xri = np.stack([pts.real, pts.imag]) * (2.0 / sigma_n_sq)
    y = np.asarray(y, dtype=complex)
    out = np.empty(y.size)
    for lo in range(0, y.size, _CHUNK):
        yc = y[lo : lo + _CHUNK]
        rows = np.arange(yc.size)
        metric = np.stack([yc.real, yc.imag], axis=1) @ xri
        metric += base
        own = metric[rows, truth_point_idx[lo : lo + _CHUNK]]
        peak = metric.max(axis=1)
        metric -= peak[:, None]
        np.exp(metric, out=metric)
        out[lo : lo + _CHUNK] = own - peak - np.log(metric.sum(axis=1))
    return out, logp[truth_point_idx]


def awgn_air_starqam(c: Constellation, snr_db: float, n_mc: int, seed) -> AirResult:
    """Monte Carlo mutual information of star-QAM over memoryless AWGN.

    ``SNR = ptx / sigma_n^2``. The estimate is ``mean(log2 p(y|x) / p(y))``
    with the exact channel law, and its i.i.d. standard error.
    """
    if n_mc < 10_000:
        raise ValueError("n_mc must be at least 1e4")
    from .constellation import sample_sequence

    rng = np.random.default_rng(seed)
    sigma_n_sq = c.ptx / 10.0 ** (snr_db / 10.0)
    x = sample_sequence(c, n_mc, rng)
    noise = np.array([1.0, 1j]) @ rng.standard_normal((2, n_mc))
    y = x.values + math.sqrt(sigma_n_sq / 2) * noise
    logq, logp = _log_metric_full(y, c, sigma_n_sq, x.point_idx)
    terms = (logq - logp) / math.log(2)
    mean, se, n_inf = _summarise(terms)
    flags = ["clamped"] if mean < 0 else []
    total = max(mean, 0.0)
    return AirResult([total], total, n_mc, se, flags)


def memoryless_baseline_air(
    y, truth: SymbolSequence, c: Constellation, sigma_n_sq_fit: float, groups=None
) -> AirResult:
    """Rate of the memoryless AWGN metric applied to phase-noisy data.

    ``sigma_n_sq_fit`` should be fitted with the phase noise counted as
    additive noise (see :func:`starsic.cpan.fit_awgn_variance`).
    """
    if not sigma_n_sq_fit > 0:
        raise ValueError("sigma_n_sq_fit must be positive")
    logq, logp = _log_metric_full(y, c, sigma_n_sq_fit, truth.point_idx)
    terms = (logq - logp) / math.log(2)
    mean, se, n_inf = _summarise(terms, groups)
    flags = []
    if n_inf:
        flags.append(f"{n_inf} infinite terms dropped")
    if mean < 0:
        flags.append("clamped")
    total = max(mean, 0.0)
    return AirResult([total], total, int(np.size(y)), se, flags)


def sic_terms(tables, truth: SymbolSequence, c: Constellation) -> np.ndarray:
    """Per-symbol bits ``log2 q/P``: row 0 ring stage, row 1 own phase stage.

    Every symbol contributes its ring term and the term of the one phase stage
    that detected it, so the mean of the result is the total SIC rate.
    """
    n = len(truth)
    amp = _per_symbol_terms(tables[0].probs, truth.radius_idx, c.radial_pmf)
    phase = np.empty(n)
    uniform = np.full(c.n_p, 1.0 / c.n_p)
    for t in tables[1:]:
        phase[t.symbol_idx] = _per_symbol_terms(t.probs, truth.phase_idx[t.symbol_idx], uniform)
    return np.stack([amp, phase])


def sic_air(
    ys, truths, schedule: SicSchedule, c: Constellation, params, leave_one_out=True
) -> AirResult:
    """Total and per-stage SIC rate pooled over several test sequences.

    Raw per-symbol contributions are averaged over all sequences first and the
    per-stage aggregates are clamped afterwards. The standard error uses
    per-sequence means (batch means) when there is more than one sequence.
    """
    if len(ys) != len(truths) or not ys:
        raise ValueError("need matching, nonempty lists of outputs and truths")
    S = schedule.n_stages
    amp_terms, phase_terms, stage_ids, seq_ids = [], [], [], []
    for j, (y, truth) in enumerate(zip(ys, truths)):
        tables = run_sic(y, truth, schedule, c, params, leave_one_out=leave_one_out)
        a, p = sic_terms(tables, truth, c)
        amp_terms.append(a)
        phase_terms.append(p)
        stage_ids.append(schedule.stage_of_symbol(len(truth)))
        seq_ids.append(np.full(len(truth), j))
    amp = np.concatenate(amp_terms)
    phase = np.concatenate(phase_terms)
    stage = np.concatenate(stage_ids)
    seq = np.concatenate(seq_ids)
    n = amp.size

    flags = []
    n_bad = int(np.sum(~np.isfinite(amp)) + np.sum(~np.isfinite(phase)))
    if n_bad:
        flags.append(f"{n_bad} infinite terms dropped")
    amp = np.where(np.isfinite(amp), amp, np.nan)
    phase = np.where(np.isfinite(phase), phase, np.nan)

    per_stage = [float(np.nanmean(amp))]
    for s in range(1, S + 1):
        sel = stage == s
        # each phase stage contributes on its own share of the channel uses
        if sel.any():
            per_stage.append(float(np.nanmean(phase[sel]) * sel.sum() / n))
        else:
            per_stage.append(0.0)
    for k, b in enumerate(per_stage):
        if b < 0:
            flags.append(f"stage {k} clamped")
            per_stage[k] = 0.0

    totals = np.nan_to_num(amp) + np.nan_to_num(phase)
    _, se, _ = _summarise(totals, seq if len(ys) > 1 else None)
    return AirResult(per_stage, float(sum(per_stage)), n, se, flags)


def source_bits(c: Constellation) -> float:
    h_r, h_p = source_entropy(c)
    return h_r + h_p
