"""Probabilistically shaped star-QAM constellations.

A star-QAM point is ``r * exp(1j * gamma)`` where the ring radius ``r`` and the
phase ``gamma`` are drawn independently. Radii carry a discretised Rayleigh
prior ``P(r) ~ r * exp(-r**2 / ptx)`` and phases are uniform over ``n_p``
equally spaced angles starting at zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_TRUNCATION = 3.2


@dataclass(frozen=True, eq=False)
class Constellation:
    """Immutable star-QAM alphabet with independent radius and phase priors."""

    radii: np.ndarray
    radial_pmf: np.ndarray
    n_p: int
    ptx: float
    phase_set: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        pmf = np.asarray(self.radial_pmf, dtype=float)
        if radii.ndim != 1 or radii.shape != pmf.shape or radii.size == 0:
            raise ValueError("radii and radial_pmf must be 1-D arrays of equal length")
        if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
            raise ValueError("radii must be positive and strictly increasing")
        if np.any(pmf <= 0):
            raise ValueError("radial_pmf entries must be strictly positive")
        if abs(pmf.sum() - 1.0) > 1e-12:
            raise ValueError(f"radial_pmf sums to {pmf.sum()!r}, expected 1")
        if int(self.n_p) < 1:
            raise ValueError("n_p must be a positive integer")
        if not self.ptx > 0:
            raise ValueError("ptx must be positive")
        radii.setflags(write=False)
        pmf.setflags(write=False)
        phases = 2 * np.pi * np.arange(int(self.n_p)) / int(self.n_p)
        phases.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "radial_pmf", pmf)
        object.__setattr__(self, "n_p", int(self.n_p))
        object.__setattr__(self, "ptx", float(self.ptx))
        object.__setattr__(self, "phase_set", phases)

    @property
    def n_r(self) -> int:
        return self.radii.size

    @property
    def size(self) -> int:
        return self.n_r * self.n_p

    @property
    def points(self) -> np.ndarray:
        """All points, ring-major: index ``k * n_p + l`` is ring ``k``, phase ``l``."""
        return (self.radii[:, None] * np.exp(1j * self.phase_set[None, :])).ravel()

    @property
    def point_pmf(self) -> np.ndarray:
        return np.repeat(self.radial_pmf / self.n_p, self.n_p)

    @property
    def average_power(self) -> float:
        return float(np.sum(self.radial_pmf * self.radii**2))

    def to_dict(self) -> dict:
        return {
            "radii": self.radii.tolist(),
            "radial_pmf": self.radial_pmf.tolist(),
            "n_p": self.n_p,
            "ptx": self.ptx,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Constellation:
        return cls(
            radii=np.asarray(d["radii"], dtype=float),
            radial_pmf=np.asarray(d["radial_pmf"], dtype=float),
            n_p=int(d["n_p"]),
            ptx=float(d["ptx"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> Constellation:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class SymbolSequence:
    """Transmit record: ring and phase indices plus the complex symbols."""

    radius_idx: np.ndarray
    phase_idx: np.ndarray
    values: np.ndarray
    n_p: int

    def __len__(self) -> int:
        return self.values.size

    @property
    def point_idx(self) -> np.ndarray:
        """Flat index into :attr:`Constellation.points`."""
        return self.radius_idx * self.n_p + self.phase_idx

    @classmethod
    def from_indices(cls, c: Constellation, radius_idx, phase_idx) -> SymbolSequence:
        radius_idx = np.asarray(radius_idx, dtype=np.int64)
        phase_idx = np.asarray(phase_idx, dtype=np.int64)
        values = c.radii[radius_idx] * np.exp(1j * c.phase_set[phase_idx])
        return cls(radius_idx, phase_idx, values, c.n_p)


def build_star_qam(
    n_rings: int,
    n_phases: int,
    ptx: float,
    truncation: float = DEFAULT_TRUNCATION,
    placement: str = "uniform",
) -> Constellation:
    """Discretise a circularly symmetric Gaussian into a shaped star-QAM.

    Parameters
    ----------
    n_rings : int
        Number of rings.
    n_phases : int
        Phase cardinality ``n_p``.
    ptx : float
        Average transmit power in watts (or any linear unit).
    truncation : float
        Largest radius in units of ``sqrt(ptx)`` before power rescaling.
        Only used by ``placement="uniform"``.
    placement : {"uniform", "quantile"}
        ``"uniform"`` puts rings at ``k * truncation * sqrt(ptx) / n_rings``
        with the Rayleigh-shaped prior evaluated there. ``"quantile"`` puts
        equiprobable rings at the Rayleigh quantiles ``(k - 1/2) / n_rings``.

    Returns
    -------
    Constellation
        Radii are rescaled so that the average power equals ``ptx``.
    """
    if int(n_rings) != n_rings or n_rings < 1:
        raise ValueError("n_rings must be a positive integer")
    if int(n_phases) != n_phases or n_phases < 1:
        raise ValueError("n_phases must be a positive integer")
    if not ptx > 0:
        raise ValueError("ptx must be positive")
    if not truncation > 0:
        raise ValueError("truncation must be positive")

    k = np.arange(1, int(n_rings) + 1)
    if placement == "uniform":
        radii = k * (truncation * np.sqrt(ptx) / n_rings)
        # log-domain weights; normalising by the max keeps the ratio exact
        logw = np.log(radii) - radii**2 / ptx
        w = np.exp(logw - logw.max())
        if np.any(w == 0):
            raise ValueError(
                "radial PMF underflows to zero; reduce the truncation"
            )
        pmf = w / w.sum()
    elif placement == "quantile":
        u = (k - 0.5) / n_rings
        radii = np.sqrt(-ptx * np.log1p(-u))
        pmf = np.full(int(n_rings), 1.0 / n_rings)
    else:
        raise ValueError(f"unknown placement {placement!r}")

    radii = radii * np.sqrt(ptx / np.sum(pmf * radii**2))
    return Constellation(radii=radii, radial_pmf=pmf, n_p=int(n_phases), ptx=ptx)


def sample_sequence(c: Constellation, n: int, seed) -> SymbolSequence:
    """Draw ``n`` i.i.d. symbols from ``c``; deterministic given ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    radius_idx = rng.choice(c.n_r, size=n, p=c.radial_pmf)
    phase_idx = rng.integers(0, c.n_p, size=n)
    return SymbolSequence.from_indices(c, radius_idx, phase_idx)


def source_entropy(c: Constellation) -> tuple[float, float]:
    """Return ``(H_radius, H_phase)`` in bits."""
    p = c.radial_pmf
    h_r = float(-np.sum(p * np.log2(p)))
    return max(h_r, 0.0), float(np.log2(c.n_p))
