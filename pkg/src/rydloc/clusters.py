"""Small regular clusters as analytic anchors for the full pipeline.

Closely spaced groups of atoms dominate the spectrum at strong disorder: an
isolated pair (dimer) contributes symmetric/antisymmetric states at
E = -/+ V, a line trimer contributes the characteristic IPR ~ 0.387 state at
the top of its spectrum, and so on.  Cluster spectra here are computed
through the same coupling + diagonalization pipeline as full clouds; closed
forms live in the test suite only.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .coupling import ModelParams, build_hamiltonian
from .spectra import Spectrum, all_iprs, diagonalize

CLUSTER_KINDS = ("dimer", "line_trimer", "triangle", "square")

_COUPLING_RATIO_WARN = 0.3


@dataclass(frozen=True)
class ClusterGeometry:
    """Canonical few-atom arrangement with nearest-neighbour ``spacing``."""

    kind: str
    spacing: float = 1.0
    positions: np.ndarray | None = None  # used by kind == "custom"

    def coordinates(self) -> np.ndarray:
        if self.spacing < 1.0:
            raise ValueError("spacing below the blockade radius")
        s = self.spacing
        if self.kind == "dimer":
            pts = [(0.0, 0.0), (s, 0.0)]
        elif self.kind == "line_trimer":
            pts = [(0.0, 0.0), (s, 0.0), (2 * s, 0.0)]
        elif self.kind == "triangle":
            pts = [(0.0, 0.0), (s, 0.0), (s / 2.0, s * np.sqrt(3.0) / 2.0)]
        elif self.kind == "square":
            pts = [(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)]
        elif self.kind == "custom":
            if self.positions is None:
                raise ValueError("custom geometry requires positions")
            return np.asarray(self.positions, dtype=float)
        else:
            raise ValueError(f"unknown cluster kind {self.kind!r}")
        return np.array(pts, dtype=float)


def cluster_spectrum(
    geometry: ClusterGeometry | str, spacing: float = 1.0
) -> tuple[np.ndarray, np.ndarray, Spectrum]:
    """Eigenvalues and per-state IPRs of a small cluster.

    Returns ``(eigenvalues, iprs, spectrum)``; the spectrum carries the
    degeneracy flags used e.g. by the CLI table.
    """
    if isinstance(geometry, str):
        geometry = ClusterGeometry(kind=geometry, spacing=spacing)
    positions = geometry.coordinates()
    h = build_hamiltonian(positions, ModelParams())
    spectrum = diagonalize(h)
    return spectrum.eigenvalues.copy(), all_iprs(spectrum), spectrum


def dimer_perturbation_shift(
    v_dimer: float, v_couple: float
) -> tuple[float, np.ndarray]:
    """Level shift of a single site weakly coupled to a dimer.

    Models the three-level system spanned by the dimer's symmetric state at
    energy -V_dimer, its antisymmetric state at +V_dimer (decoupled), and the
    single-site level at 0, with coupling sqrt(2) * V_couple between the
    symmetric state and the site.  Returns the eigenvalue continuously
    connected to the single-site level together with its overlap weights on
    (symmetric, antisymmetric, site).  The shift is positive: level repulsion
    from the lower-lying symmetric state pushes the site level upward.
    """
    if v_dimer <= 0 or v_couple < 0:
        raise ValueError("require v_dimer > 0 and v_couple >= 0")
    if v_couple > _COUPLING_RATIO_WARN * v_dimer:
        warnings.warn(
            "coupling/dimer ratio above 0.3: perturbative picture unreliable",
            stacklevel=2,
        )
    h = np.array(
        [
            [-v_dimer, 0.0, -np.sqrt(2.0) * v_couple],
            [0.0, v_dimer, 0.0],
            [-np.sqrt(2.0) * v_couple, 0.0, 0.0],
        ]
    )
    evals, evecs = np.linalg.eigh(h)
    site_weights = evecs[2, :] ** 2
    branch = int(np.argmax(site_weights))
    weights = evecs[:, branch] ** 2
    return float(evals[branch]), weights


def cluster_table(spacing: float = 1.0) -> list[dict]:
    """Rows (kind, eigenvalue, degeneracy, ipr) for all canonical clusters."""
    rows = []
    for kind in CLUSTER_KINDS:
        evals, iprs, spectrum = cluster_spectrum(kind, spacing=spacing)
        _, block_sizes = np.unique(spectrum.block_ids, return_counts=True)
        degeneracy = block_sizes[spectrum.block_ids]
        for e, p, d in zip(evals, iprs, degeneracy):
            rows.append(
                {
                    "kind": kind,
                    "eigenvalue": float(e),
                    "degeneracy": int(d),
                    "ipr": float(p),
                }
            )
    return rows
