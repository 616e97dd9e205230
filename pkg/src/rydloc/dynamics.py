"""Unitary transport of a single excitation via spectral decomposition.

Populations follow from the eigendecomposition with no step error:

    P_j(t) = | sum_n exp(-i E_n t) <j|phi_n> <phi_n|psi_0> |^2,

and the infinite-time average collapses to the diagonal ensemble
P_j = sum_n |<j|phi_n>|^2 |<phi_n|psi_0>|^2, where exactly degenerate blocks
are projected jointly.  The mean square displacement sum_j |r_j - r_0|^2 P_j
tracks the spatial spread of the excitation; for a uniform disk of radius R
it saturates at R^2/2 when the distribution is homogeneous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectra import Spectrum

MSD_POPULATION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PopulationSeries:
    """Per-time site populations P_j(t) and mean square displacement.

    ``populations`` has shape (n_times, N); it may be ``None`` for
    ensemble-aggregated curves where only the MSD is retained.
    """

    times: np.ndarray
    populations: np.ndarray | None
    msd: np.ndarray | None = None


def central_site(config) -> int:
    """Index of the atom nearest the geometric centre of the sampling region.

    The sampling region is centred at the origin for every profile; ties are
    broken toward the lowest index.
    """
    positions = np.asarray(getattr(config, "positions", config), dtype=float)
    r2 = np.sum(positions**2, axis=1)
    return int(np.argmin(r2))


def default_time_grid(
    t_min: float = 1e-2, t_max: float = 1e5, n_points: int = 200
) -> np.ndarray:
    """Logarithmic time grid covering the transport window."""
    return np.geomspace(t_min, t_max, n_points)


def evolve_populations(
    spectrum: Spectrum,
    psi0: int,
    times: np.ndarray,
    positions: np.ndarray | None = None,
    origin: np.ndarray | None = None,
) -> PopulationSeries:
    """Exact populations at the requested times for a site-localized start.

    When ``positions`` are supplied the series also carries the MSD relative
    to ``origin`` (default: the initial atom's position).
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    v = spectrum.eigenvectors
    amps = v[psi0, :]  # <phi_n|psi_0>
    phases = np.exp(-1j * np.outer(spectrum.eigenvalues, times))
    weighted = phases * amps[:, None]
    amplitudes = v @ weighted  # (N, n_times)
    populations = np.abs(amplitudes.T) ** 2

    msd_values = None
    if positions is not None:
        msd_values = np.array(
            [msd(p, positions, origin=origin, start=psi0) for p in populations]
        )
    return PopulationSeries(times=times, populations=populations, msd=msd_values)


def diagonal_ensemble(spectrum: Spectrum, psi0: int) -> np.ndarray:
    """Infinite-time-averaged populations.

    Within exactly degenerate blocks the projector onto the whole block
    replaces individual eigenstate projectors, which is the correct time
    average when phases never dephase inside the block.
    """
    v = spectrum.eigenvectors
    amps = v[psi0, :]
    ids = spectrum.block_ids
    if not spectrum.has_degeneracies:
        return (v**2) @ (amps**2)
    populations = np.zeros(spectrum.n)
    start = 0
    n = spectrum.n
    while start < n:
        stop = start
        while stop < n and ids[stop] == ids[start]:
            stop += 1
        block_amp = v[:, start:stop] @ amps[start:stop]
        populations += block_amp**2
        start = stop
    return populations


def time_averaged_populations(
    spectrum: Spectrum, psi0: int, t_start: float, t_stop: float
) -> np.ndarray:
    """Exact average of P_j(t) over the continuous window [t_start, t_stop].

    The window average of every phase factor has the closed form
    (sin(w t_stop) - sin(w t_start)) / (w (t_stop - t_start)), so no time
    sampling is involved.  Converges to the diagonal ensemble as the window
    grows.
    """
    if t_stop <= t_start:
        raise ValueError("t_stop must exceed t_start")
    v = spectrum.eigenvectors
    w = v * v[psi0, :]  # w_[j,n] = <j|phi_n><phi_n|psi_0>
    omega = spectrum.eigenvalues[:, None] - spectrum.eigenvalues[None, :]
    span = t_stop - t_start
    with np.errstate(invalid="ignore", divide="ignore"):
        g = (np.sin(omega * t_stop) - np.sin(omega * t_start)) / (omega * span)
    g[omega == 0.0] = 1.0
    return np.einsum("jn,nm,jm->j", w, g, w, optimize=True)


def msd(
    populations: np.ndarray,
    positions: np.ndarray,
    origin: np.ndarray | None = None,
    start: int | None = None,
) -> float:
    """Mean square displacement sum_j |r_j - origin|^2 P_j.

    ``origin`` defaults to the position of atom ``start`` (the initially
    excited site).  Requires populations summing to 1 within 1e-6.
    """
    populations = np.asarray(populations, dtype=float)
    total = populations.sum()
    if abs(total - 1.0) > MSD_POPULATION_TOL:
        raise ValueError(f"populations sum to {total}, expected 1")
    positions = np.asarray(positions, dtype=float)
    if origin is None:
        if start is None:
            raise ValueError("provide either origin or start index")
        origin = positions[start]
    origin = np.asarray(origin, dtype=float)
    r2 = np.sum((positions - origin) ** 2, axis=1)
    return float(r2 @ populations)
