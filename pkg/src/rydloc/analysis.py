"""Spatial profiles, decay-law fits and low-energy diagnostics.

The radial density of a population vector around a chosen centre averages
the per-atom excitation probability over annuli of width ``delta_r``:
n(r) = (1/|K_r|) sum_{j in K_r} P_j with K_r the atoms inside the annulus.
Localized eigenstates of the power-law model typically decay as r^-6 at
large distance; disorder-averaged late-time distributions decay as a
stretched exponential exp[-(r/xi)^beta] at short range.  Both laws are
extracted by explicit-window least squares (windows are inputs, never
auto-detected).

Low-energy structure is diagnosed through the per-site mean-field potential
V^mf_j = -sum_i V_ij (row sums of the hopping matrix), the sign structure of
eigenvectors, and histograms of individual eigenenergies across disorder
realizations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InsufficientData, NoConvergence
from .spectra import BinnedAccumulator, BinnedSeries

SIGN_ZERO_TOL = 1e-10
POPULATION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Annulus-averaged population profile.

    Bins with no atoms are flagged empty (``counts == 0``) and carry NaN
    densities rather than zeros.
    """

    r_bin_centers: np.ndarray
    densities: np.ndarray
    counts: np.ndarray
    delta_r: float

    @property
    def nonempty(self) -> np.ndarray:
        return self.counts > 0


@dataclass(frozen=True, eq=False)
class FitResult:
    """Result of a profile or growth-law fit."""

    model: str  # "power_law" | "stretched_exponential" | "growth_exponent"
    params: dict
    param_stderr: dict
    window: tuple
    residual_norm: float


def radial_density(
    populations: np.ndarray,
    positions: np.ndarray,
    center: np.ndarray,
    delta_r: float,
) -> RadialProfile:
    """Mean population per annulus around ``center``.

    ``center`` is the max-population atom position for eigenstate profiles or
    the cloud centre for late-time distributions; the caller chooses.
    """
    populations = np.asarray(populations, dtype=float)
    if abs(populations.sum() - 1.0) > POPULATION_TOL:
        raise ValueError("populations must sum to 1")
    if delta_r <= 0:
        raise ValueError("delta_r must be positive")
    positions = np.asarray(positions, dtype=float)
    center = np.asarray(center, dtype=float)
    r = np.linalg.norm(positions - center, axis=1)
    n_bins = max(1, int(np.floor(r.max() / delta_r)) + 1)
    idx = np.minimum((r / delta_r).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=populations, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        dens = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    centers = (np.arange(n_bins) + 0.5) * delta_r
    return RadialProfile(
        r_bin_centers=centers,
        densities=dens,
        counts=counts.astype(np.int64),
        delta_r=float(delta_r),
    )


def _fit_points(profile: RadialProfile, window: tuple[float, float]):
    lo, hi = window
    m = (
        profile.nonempty
        & (profile.r_bin_centers >= lo)
        & (profile.r_bin_centers <= hi)
        & np.isfinite(profile.densities)
        & (profile.densities > 0)
    )
    if np.count_nonzero(m) < 5:
        raise InsufficientData(
            f"only {np.count_nonzero(m)} usable bins inside window {window}"
        )
    return profile.r_bin_centers[m], profile.densities[m]


def fit_power_law(profile: RadialProfile, window: tuple[float, float]) -> FitResult:
    """Least squares of log n against log r: n(r) ~ A r^p."""
    r, n = _fit_points(profile, window)
    x = np.log(r)
    y = np.log(n)
    coeffs, cov = np.polyfit(x, y, 1, cov=True)
    p, log_a = coeffs
    resid = y - np.polyval(coeffs, x)
    return FitResult(
        model="power_law",
        params={"exponent": float(p), "amplitude": float(np.exp(log_a))},
        param_stderr={
            "exponent": float(np.sqrt(cov[0, 0])),
            "amplitude": float(np.exp(log_a) * np.sqrt(cov[1, 1])),
        },
        window=tuple(window),
        residual_norm=float(np.linalg.norm(resid)),
    )


def fit_stretched_exponential(
    profile: RadialProfile, window: tuple[float, float]
) -> FitResult:
    """Nonlinear fit of log n = log A - (r/xi)^beta.

    Initialized at beta = 1 with xi at the window midpoint.
    """
    from scipy.optimize import curve_fit

    r, n = _fit_points(profile, window)
    y = np.log(n)

    def model(rv, log_a, xi, beta):
        return log_a - (rv / xi) ** beta

    xi0 = max(0.5 * (window[0] + window[1]), 1e-6)
    p0 = (float(y[0]), xi0, 1.0)
    try:
        popt, pcov = curve_fit(
            model,
            r,
            y,
            p0=p0,
            bounds=([-np.inf, 1e-9, 1e-3], [np.inf, np.inf, 8.0]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise NoConvergence(f"stretched-exponential fit failed: {exc}") from exc
    perr = np.sqrt(np.diag(pcov))
    resid = y - model(r, *popt)
    return FitResult(
        model="stretched_exponential",
        params={
            "amplitude": float(np.exp(popt[0])),
            "xi": float(popt[1]),
            "beta": float(popt[2]),
        },
        param_stderr={
            "amplitude": float(np.exp(popt[0]) * perr[0]),
            "xi": float(perr[1]),
            "beta": float(perr[2]),
        },
        window=tuple(window),
        residual_norm=float(np.linalg.norm(resid)),
    )


def fit_growth_exponent(
    times: np.ndarray, msd: np.ndarray, window: tuple[float, float]
) -> FitResult:
    """Power-law growth exponent of an MSD curve inside a time window."""
    times = np.asarray(times, dtype=float)
    msd = np.asarray(msd, dtype=float)
    m = (times >= window[0]) & (times <= window[1]) & (msd > 0) & (times > 0)
    if np.count_nonzero(m) < 5:
        raise InsufficientData("need at least five samples inside the window")
    coeffs, cov = np.polyfit(np.log(times[m]), np.log(msd[m]), 1, cov=True)
    resid = np.log(msd[m]) - np.polyval(coeffs, np.log(times[m]))
    return FitResult(
        model="growth_exponent",
        params={"alpha": float(coeffs[0])},
        param_stderr={"alpha": float(np.sqrt(cov[0, 0]))},
        window=tuple(window),
        residual_norm=float(np.linalg.norm(resid)),
    )


def mean_field_potential(h: np.ndarray) -> np.ndarray:
    """Per-site mean-field potential V^mf_j = -sum_i V_ij (row sums of H)."""
    h = np.asarray(h, dtype=float)
    return h.sum(axis=1)


def sign_structure(state: np.ndarray) -> tuple[int, int, bool]:
    """Counts of strictly positive/negative components and a uniformity flag.

    The global sign is fixed so the largest-magnitude component is positive;
    components of magnitude below 1e-10 count as zero-sign.
    """
    state = np.asarray(state, dtype=float)
    pivot = state[int(np.argmax(np.abs(state)))]
    if pivot < 0:
        state = -state
    n_pos = int(np.sum(state > SIGN_ZERO_TOL))
    n_neg = int(np.sum(state < -SIGN_ZERO_TOL))
    uniform = n_neg == 0 and n_pos > 0
    return n_pos, n_neg, uniform


class LowEnergyAccumulator:
    """Histograms and moments of the k lowest eigenenergies across disorder.

    Tracks, per eigenstate index, the energy histogram plus raw moment sums
    so that mean, standard deviation and skewness merge exactly across
    workers.
    """

    def __init__(self, k_lowest: int, bin_edges: np.ndarray):
        self.k_lowest = int(k_lowest)
        self.bin_edges = np.asarray(bin_edges, dtype=float)
        self.accumulators = [
            BinnedAccumulator(self.bin_edges) for _ in range(self.k_lowest)
        ]
        self.count = 0
        self.sums = np.zeros(self.k_lowest)
        self.sq_sums = np.zeros(self.k_lowest)
        self.cube_sums = np.zeros(self.k_lowest)

    def add(self, eigenvalues: np.ndarray) -> None:
        e = np.asarray(eigenvalues, dtype=float)[: self.k_lowest]
        if e.size < self.k_lowest:
            raise ValueError("spectrum smaller than k_lowest")
        for i in range(self.k_lowest):
            self.accumulators[i].add(e[i : i + 1])
        self.count += 1
        self.sums += e
        self.sq_sums += e**2
        self.cube_sums += e**3

    def merge(self, other: "LowEnergyAccumulator") -> "LowEnergyAccumulator":
        if self.k_lowest != other.k_lowest:
            raise ValueError("k_lowest mismatch")
        out = LowEnergyAccumulator(self.k_lowest, self.bin_edges)
        out.accumulators = [
            a.merge(b) for a, b in zip(self.accumulators, other.accumulators)
        ]
        out.count = self.count + other.count
        out.sums = self.sums + other.sums
        out.sq_sums = self.sq_sums + other.sq_sums
        out.cube_sums = self.cube_sums + other.cube_sums
        return out

    def histograms(self) -> list[BinnedSeries]:
        return [acc.to_count_series() for acc in self.accumulators]

    def statistics(self) -> dict:
        """Per-index mean, std and skewness from the raw moment sums."""
        n = max(self.count, 1)
        mean = self.sums / n
        var = np.maximum(self.sq_sums / n - mean**2, 0.0)
        std = np.sqrt(var)
        m3 = self.cube_sums / n - 3 * mean * var - mean**3
        with np.errstate(invalid="ignore", divide="ignore"):
            skew = np.where(std > 0, m3 / np.where(std > 0, std, 1.0) ** 3, 0.0)
        return {"mean": mean, "std": std, "skewness": skew, "count": self.count}


def per_index_energy_histograms(
    spectra: Iterable, k_lowest: int, bin_edges: np.ndarray
) -> tuple[list[BinnedSeries], dict]:
    """Histogram of each of the k lowest eigenenergies across realizations."""
    acc = LowEnergyAccumulator(k_lowest, bin_edges)
    for spectrum in spectra:
        acc.add(np.asarray(getattr(spectrum, "eigenvalues", spectrum)))
    return acc.histograms(), acc.statistics()
