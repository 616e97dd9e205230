"""Dense single-excitation hopping Hamiltonian from atom positions.

The dipolar exchange coupling between atoms i and j is

    V_ij = C3 (1 - 3 cos^2 theta_ij) / |r_i - r_j|^3,

with theta_ij the angle between the quantization axis and the separation
vector.  For a 2D cloud with the axis perpendicular to the plane,
theta = pi/2 for every pair and the coupling reduces to the isotropic
V_ij = C3 / r^3.  In the single-excitation sector the Hamiltonian is the
purely off-diagonal hopping matrix H_ij = -V_ij, H_ii = 0.

Internal units set r_b = C3 = hbar = 1, so energies come in C3/(hbar r_b^3)
and times in hbar r_b^3 / C3.  SI conversion uses C3/2pi = 0.86 GHz um^3 and
r_b = 5 um unless overridden.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DuplicatePositions

DUPLICATE_GUARD = 1e-9

# default experimental scale: C3/2pi in GHz um^3 and blockade radius in um
C3_OVER_2PI_GHZ_UM3 = 0.86
RB_UM = 5.0


@dataclass(frozen=True)
class ModelParams:
    """Coupling model parameters.

    ``axis=None`` selects the isotropic perpendicular-axis mode; otherwise
    ``axis`` is a unit 3-vector and the angular factor (1 - 3 cos^2 theta) is
    evaluated per pair (it may vanish or change sign at the magic angle).
    """

    c3: float = 1.0
    axis: tuple[float, float, float] | None = None
    energy_unit_hz: float | None = None

    def __post_init__(self):
        if self.c3 <= 0:
            raise ValueError("C3 must be positive")
        if self.axis is not None:
            a = np.asarray(self.axis, dtype=float)
            if a.shape != (3,) or not np.isclose(np.linalg.norm(a), 1.0, atol=1e-9):
                raise ValueError("axis must be a unit 3-vector")

    def to_dict(self) -> dict:
        return {
            "c3": self.c3,
            "axis": None if self.axis is None else list(self.axis),
            "energy_unit_hz": self.energy_unit_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        if d.get("axis") is not None:
            d["axis"] = tuple(d["axis"])
        return cls(**d)


def energy_unit_hz(
    c3_over_2pi_ghz_um3: float = C3_OVER_2PI_GHZ_UM3, rb_um: float = RB_UM
) -> float:
    """Energy unit C3/(hbar r_b^3) expressed as an ordinary frequency in Hz."""
    return c3_over_2pi_ghz_um3 * 1e9 / rb_um**3


def time_unit_us(
    c3_over_2pi_ghz_um3: float = C3_OVER_2PI_GHZ_UM3, rb_um: float = RB_UM
) -> float:
    """Time unit hbar r_b^3 / C3 in microseconds."""
    return 1e6 / (2.0 * np.pi * energy_unit_hz(c3_over_2pi_ghz_um3, rb_um))


def gamma_khz_to_internal(gamma_khz: float, unit_hz: float | None = None) -> float:
    """Convert a dephasing rate quoted in kHz to internal units."""
    unit = energy_unit_hz() if unit_hz is None else unit_hz
    return gamma_khz * 1e3 / unit


def time_internal_to_us(t: np.ndarray | float) -> np.ndarray | float:
    """Convert internal times to microseconds at the default SI scale."""
    return np.asarray(t) * time_unit_us()


def energy_internal_to_mhz(e: np.ndarray | float) -> np.ndarray | float:
    """Convert internal energies to MHz at the default SI scale."""
    return np.asarray(e) * energy_unit_hz() * 1e-6


def build_hamiltonian(
    config, params: ModelParams | None = None
) -> np.ndarray:
    """Dense hopping matrix H_ij = -V_ij (zero diagonal) for a configuration.

    Accepts a :class:`~rydloc.geometry.Configuration` or a raw ``(N, d)``
    position array.  Raises :class:`DuplicatePositions` if any pair sits
    closer than ``1e-9`` (impossible for blockade-valid configurations).
    """
    params = params or ModelParams()
    positions = np.asarray(getattr(config, "positions", config), dtype=float)
    if positions.ndim != 2:
        raise ValueError("positions must have shape (N, d)")
    n = positions.shape[0]
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = np.sum(diff**2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    if n > 1 and d2.min() < DUPLICATE_GUARD**2:
        raise DuplicatePositions("pair distance below 1e-9")
    dist = np.sqrt(d2)

    if params.axis is None:
        # theta = pi/2 for every pair: V = C3 / r^3
        h = -params.c3 / dist**3
    else:
        axis = np.asarray(params.axis, dtype=float)
        if positions.shape[1] == 2:
            diff3 = np.concatenate(
                [diff, np.zeros(diff.shape[:2] + (1,))], axis=-1
            )
        else:
            diff3 = diff
        cos_theta = np.einsum("ijk,k->ij", diff3, axis) / dist
        h = -params.c3 * (1.0 - 3.0 * cos_theta**2) / dist**3
    np.fill_diagonal(h, 0.0)
    return h


def dump_hamiltonian(h: np.ndarray, path: str | Path, provenance: dict | None = None) -> Path:
    """Binary dump (row-major little-endian float64) with a JSON sidecar."""
    path = Path(path)
    h = np.ascontiguousarray(h, dtype="<f8")
    h.tofile(path)
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = {
        "n": int(h.shape[0]),
        "dtype": "<f8",
        "order": "row-major",
        "units": "C3/(hbar r_b^3)",
    }
    if provenance:
        meta["provenance"] = provenance
    sidecar.write_text(json.dumps(meta, indent=2) + "\n")
    return sidecar


def load_hamiltonian(path: str | Path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    n = meta["n"]
    return np.fromfile(path, dtype="<f8").reshape(n, n)
