"""Exact diagonalization and eigenstate localization observables.

A :class:`Spectrum` holds the full eigendecomposition of one realization's
hopping matrix (eigenvalues ascending, orthonormal real eigenvectors as
columns).  Observables derived from it:

* ``ipr``: inverse participation ratio, sum of |c_j|^4, between 1/N
  (ergodic) and 1 (single site);
* ``moments``: generalized moments I_q = sum |c_j|^(2q);
* ``gfd``: finite-size generalized fractal dimension
  log_N(I_q) / (1 - q), 1 for ergodic and 0 for localized states.

Disorder-averaged curves (density of states, energy-binned IPR/GFD, level
spacing ratios) accumulate into :class:`BinnedAccumulator`, whose merge is
associative and commutative so ensemble workers can combine results in a
canonical order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    BinningMismatch,
    ConvergenceFailure,
    DegenerateQ,
    NotNormalized,
)

NORM_TOL = 1e-6
DEGENERACY_REL_TOL = 1e-10

DEFAULT_ENERGY_RANGE = (-4.0, 4.0)
DEFAULT_ENERGY_BINS = 200


def default_energy_bins(
    n_bins: int = DEFAULT_ENERGY_BINS,
    e_min: float = DEFAULT_ENERGY_RANGE[0],
    e_max: float = DEFAULT_ENERGY_RANGE[1],
) -> np.ndarray:
    """Half-open energy bins [edge_i, edge_{i+1}); 200 bins over [-4, 4]."""
    return np.linspace(e_min, e_max, n_bins + 1)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Full eigendecomposition of one hopping matrix.

    ``eigenvectors[:, n]`` belongs to ``eigenvalues[n]``.  ``block_ids``
    labels groups of eigenvalues closer than ``1e-10 * ||H||_2``; downstream
    diagonal-ensemble code projects onto those blocks jointly.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    block_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.block_ids is None:
            object.__setattr__(
                self, "block_ids", _degeneracy_blocks(self.eigenvalues)
            )

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.n else 0.0

    @property
    def has_degeneracies(self) -> bool:
        return self.n > 1 and self.block_ids[-1] != self.n - 1


def _degeneracy_blocks(eigenvalues: np.ndarray) -> np.ndarray:
    """Integer label per eigenvalue; equal labels mark a degenerate block."""
    n = eigenvalues.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    tol = DEGENERACY_REL_TOL * max(np.max(np.abs(eigenvalues)), 1e-300)
    gaps = np.diff(eigenvalues)
    ids = np.zeros(n, dtype=np.int64)
    ids[1:] = np.cumsum(gaps > tol)
    return ids


def diagonalize(h: np.ndarray, validate: bool = False) -> Spectrum:
    """Full symmetric eigendecomposition of a hopping matrix.

    Uses LAPACK's Householder tridiagonalization + divide-and-conquer
    (``eigh``).  With ``validate=True`` the residual and orthonormality
    invariants are checked explicitly.
    """
    h = np.asarray(h, dtype=float)
    try:
        evals, evecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise ConvergenceFailure(str(exc)) from exc
    spectrum = Spectrum(
        eigenvalues=evals, eigenvectors=evecs, block_ids=_degeneracy_blocks(evals)
    )
    if validate:
        scale = max(spectrum.spectral_radius, 1e-300)
        residual = np.max(np.abs(h @ evecs - evecs * evals))
        if residual > 1e-8 * scale:
            raise ConvergenceFailure(f"residual {residual:.2e} above tolerance")
        ortho = np.max(np.abs(evecs.T @ evecs - np.eye(h.shape[0])))
        if ortho > 1e-8:
            raise ConvergenceFailure(f"orthonormality defect {ortho:.2e}")
    return spectrum


def _check_normalized(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state)
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > NORM_TOL:
        raise NotNormalized(f"state norm {norm} deviates from 1 beyond {NORM_TOL}")
    return state


def moments(state: np.ndarray, q: float) -> float:
    """Generalized moment I_q = sum_j |c_j|^(2q) of a normalized state."""
    state = _check_normalized(state)
    if q <= 0:
        raise ValueError("q must be positive")
    return float(np.sum(np.abs(state) ** (2.0 * q)))


def ipr(state: np.ndarray) -> float:
    """Inverse participation ratio, the q=2 moment."""
    return moments(state, 2.0)


def gfd(state: np.ndarray, q: float, n: int) -> float:
    """Finite-size generalized fractal dimension log_N(I_q)/(1-q)."""
    if q == 1:
        raise DegenerateQ("q = 1 is excluded from the fractal dimension")
    if n < 2:
        raise ValueError("n must be at least 2")
    return float(np.log(moments(state, q)) / ((1.0 - q) * np.log(n)))


def all_iprs(spectrum: Spectrum) -> np.ndarray:
    """IPR of every eigenstate (vectorized over columns)."""
    return np.sum(spectrum.eigenvectors**4, axis=0)


def all_moments(spectrum: Spectrum, q: float) -> np.ndarray:
    return np.sum(np.abs(spectrum.eigenvectors) ** (2.0 * q), axis=0)


def all_gfds(spectrum: Spectrum, q: float = 2.0) -> np.ndarray:
    if q == 1:
        raise DegenerateQ("q = 1 is excluded from the fractal dimension")
    return np.log(all_moments(spectrum, q)) / ((1.0 - q) * np.log(spectrum.n))


@dataclass(eq=False)
class BinnedSeries:
    """Energy-binned curve with per-bin mean, counts and standard errors."""

    bin_edges: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    value_sq_sums: np.ndarray

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def stderr(self) -> np.ndarray:
        """Standard error of the per-bin mean (NaN where counts < 2)."""
        out = np.full_like(self.values, np.nan, dtype=float)
        m = self.counts > 1
        mean = self.values[m]
        var = self.value_sq_sums[m] / self.counts[m] - mean**2
        out[m] = np.sqrt(np.maximum(var, 0.0) / (self.counts[m] - 1))
        return out

    def to_csv(self, path) -> None:
        from pathlib import Path

        lines = ["bin_center,mean,stderr,count"]
        err = self.stderr
        for c, v, e, k in zip(self.bin_centers, self.values, err, self.counts):
            lines.append(f"{c!r},{float(v)!r},{float(e)!r},{int(k)}")
        Path(path).write_text("\n".join(lines) + "\n")


class BinnedAccumulator:
    """Mergeable histogram of (coordinate, value) samples.

    With ``values=None`` the accumulator is a plain event histogram (used for
    the density of states); otherwise it tracks per-bin sums and squared sums
    of the attached observable.  ``merge`` requires identical bin edges and
    is associative and commutative up to float rounding, so the ensemble
    layer merges worker results in canonical realization order.
    """

    def __init__(self, bin_edges: np.ndarray):
        self.bin_edges = np.asarray(bin_edges, dtype=float)
        nb = self.bin_edges.size - 1
        self.counts = np.zeros(nb, dtype=np.int64)
        self.sums = np.zeros(nb)
        self.sq_sums = np.zeros(nb)
        self.underflow = 0
        self.overflow = 0
        self.n_realizations = 0

    def add(self, coords: np.ndarray, values: np.ndarray | None = None) -> None:
        """Accumulate one realization's samples."""
        coords = np.asarray(coords, dtype=float)
        idx = np.searchsorted(self.bin_edges, coords, side="right") - 1
        below = idx < 0
        above = idx >= self.counts.size
        # right edge is exclusive: a coordinate equal to the last edge overflows
        inside = ~(below | above)
        self.underflow += int(np.sum(below))
        self.overflow += int(np.sum(above))
        sel = idx[inside]
        self.counts += np.bincount(sel, minlength=self.counts.size)
        if values is not None:
            values = np.asarray(values, dtype=float)[inside]
            self.sums += np.bincount(sel, weights=values, minlength=self.sums.size)
            self.sq_sums += np.bincount(
                sel, weights=values**2, minlength=self.sq_sums.size
            )
        self.n_realizations += 1

    def merge(self, other: "BinnedAccumulator") -> "BinnedAccumulator":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise BinningMismatch("bin edges differ")
        out = BinnedAccumulator(self.bin_edges)
        out.counts = self.counts + other.counts
        out.sums = self.sums + other.sums
        out.sq_sums = self.sq_sums + other.sq_sums
        out.underflow = self.underflow + other.underflow
        out.overflow = self.overflow + other.overflow
        out.n_realizations = self.n_realizations + other.n_realizations
        return out

    def __add__(self, other):
        return self.merge(other)

    def to_mean_series(self) -> BinnedSeries:
        """Per-bin mean of the attached observable."""
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(self.counts > 0, self.sums / self.counts, np.nan)
        return BinnedSeries(
            bin_edges=self.bin_edges.copy(),
            values=means,
            counts=self.counts.copy(),
            value_sq_sums=self.sq_sums.copy(),
        )

    def to_count_series(self) -> BinnedSeries:
        """Mean event count per bin per realization (density of states)."""
        nr = max(self.n_realizations, 1)
        return BinnedSeries(
            bin_edges=self.bin_edges.copy(),
            values=self.counts / nr,
            counts=self.counts.copy(),
            value_sq_sums=self.sq_sums.copy(),
        )


def dos_histogram(
    spectra: Iterable[Spectrum], bin_edges: np.ndarray
) -> BinnedSeries:
    """Disorder-accumulated density of states.

    Every eigenvalue of every spectrum is tallied; values outside the edges
    go to the under/overflow counters, so the per-realization total always
    equals N.
    """
    acc = BinnedAccumulator(bin_edges)
    for spectrum in spectra:
        acc.add(_eigenvalues_of(spectrum))
    return acc.to_count_series()


def _eigenvalues_of(spectrum) -> np.ndarray:
    return np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float)


def binned_eigenstate_observable(
    spectra: Iterable[Spectrum],
    bin_edges: np.ndarray,
    observable: str = "ipr",
    q: float = 2.0,
) -> BinnedSeries:
    """Mean of an eigenstate observable per energy bin with standard errors.

    ``observable`` is ``"ipr"`` or ``"gfd"`` (with exponent ``q``).
    """
    acc = BinnedAccumulator(bin_edges)
    for spectrum in spectra:
        if observable == "ipr":
            vals = all_iprs(spectrum)
        elif observable == "gfd":
            vals = all_gfds(spectrum, q)
        else:
            raise ValueError(f"unknown observable {observable!r}")
        acc.add(spectrum.eigenvalues, vals)
    return acc.to_mean_series()
