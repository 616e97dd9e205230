"""Blockade-constrained random cloud generation.

Atom positions are drawn by random sequential adsorption (RSA): proposals are
sampled uniformly over the target region and rejected whenever they fall
within one blockade radius of an already accepted atom.  A spatial grid with
cell size equal to the blockade radius keeps the neighbour search local
(9 cells in 2D, 27 in 3D), so sampling stays fast up to densities close to
the hard-disk jamming limit.

All lengths are expressed in units of the blockade radius ``r_b``.  The
dimensionless packing fraction ``rho = N (r_b/2)^2 / R^2`` is the single
disorder parameter of the model; the RSA jamming limit sits at
``rho ~ 0.5472`` and the sampler refuses densities above a configurable cap
(default 0.53).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import InvalidSpec, JammingUnreachable, TooFewAtoms

JAMMING_LIMIT = 0.5472
DEFAULT_RHO_CAP = 0.53
DEFAULT_ATTEMPT_BUDGET = 1_000_000
GENERATOR_NAME = "PCG64"

_PROPOSAL_BATCH = 4096
_CELL_CAPACITY = 8  # hard disks of diameter r_b: at most 4 centres fit in an r_b cell


class Profile(str, enum.Enum):
    """Supported cloud density profiles."""

    UNIFORM_DISK = "uniform_disk"
    GAUSSIAN_DISK = "gaussian_disk"
    PANCAKE = "pancake"


@dataclass(frozen=True)
class CloudSpec:
    """Parameters of one disorder realization.

    Args:
        n_atoms: number of atoms to place.
        radius: disk radius R (uniform-disk and pancake profiles).
        profile: density profile of the cloud.
        blockade_radius: minimum allowed pairwise distance r_b (1 in
            internal units).
        sigma_in_plane: in-plane Gaussian width (gaussian-disk profile);
            positions are truncated at four sigma.
        sigma_z: transverse Gaussian width (pancake profile); the blockade
            constraint is then enforced in 3D.
        seed: 64-bit seed of the position stream.
    """

    n_atoms: int
    radius: float = 0.0
    profile: Profile = Profile.UNIFORM_DISK
    blockade_radius: float = 1.0
    sigma_in_plane: float | None = None
    sigma_z: float | None = None
    seed: int = 0

    def validate(self, rho_cap: float = DEFAULT_RHO_CAP) -> None:
        if self.n_atoms < 1:
            raise InvalidSpec(f"n_atoms must be >= 1, got {self.n_atoms}")
        if self.blockade_radius <= 0:
            raise InvalidSpec("blockade_radius must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec("seed must fit in 64 bits")
        if self.profile is Profile.GAUSSIAN_DISK:
            if self.sigma_in_plane is None or self.sigma_in_plane <= 0:
                raise InvalidSpec("gaussian_disk profile requires sigma_in_plane > 0")
        else:
            if self.radius <= 0:
                raise InvalidSpec("radius must be positive")
        if self.profile is Profile.PANCAKE:
            if self.sigma_z is None or self.sigma_z <= 0:
                raise InvalidSpec("pancake profile requires sigma_z > 0")
        rho = self.rho
        if rho > rho_cap:
            raise InvalidSpec(
                f"packing fraction {rho:.4f} exceeds the cap {rho_cap} "
                f"(jamming limit {JAMMING_LIMIT})"
            )

    @property
    def rho(self) -> float:
        """Packing fraction; for Gaussian clouds the peak-density equivalent."""
        if self.profile is Profile.GAUSSIAN_DISK:
            return peak_packing_fraction(
                self.n_atoms, self.sigma_in_plane, self.blockade_radius
            )
        return packing_fraction(self.n_atoms, self.radius, self.blockade_radius)

    def to_dict(self) -> dict:
        return {
            "n_atoms": self.n_atoms,
            "radius": self.radius,
            "profile": self.profile.value,
            "blockade_radius": self.blockade_radius,
            "sigma_in_plane": self.sigma_in_plane,
            "sigma_z": self.sigma_z,
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CloudSpec":
        d = dict(d)
        d["profile"] = Profile(d.get("profile", Profile.UNIFORM_DISK))
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Sampled atom positions plus sampling metadata.

    ``positions`` has shape (N, 2), or (N, 3) for the pancake profile, in
    units of the blockade radius.
    """

    positions: np.ndarray
    spec: CloudSpec
    rho: float
    attempts_used: int
    generator: str = field(default=GENERATOR_NAME)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


def packing_fraction(n_atoms: int, radius: float, blockade_radius: float = 1.0) -> float:
    """Dimensionless density rho = N (r_b/2)^2 / R^2 of a disk-shaped cloud."""
    if radius <= 0 or blockade_radius <= 0:
        raise InvalidSpec("radius and blockade_radius must be positive")
    return n_atoms * (blockade_radius / 2.0) ** 2 / radius**2


def radius_for_density(n_atoms: int, rho: float, blockade_radius: float = 1.0) -> float:
    """Disk radius that realizes packing fraction ``rho`` with ``n_atoms`` atoms."""
    if rho <= 0:
        raise InvalidSpec("rho must be positive")
    return blockade_radius / 2.0 * np.sqrt(n_atoms / rho)


def peak_packing_fraction(n_atoms: int, sigma: float, blockade_radius: float = 1.0) -> float:
    """Packing fraction of a uniform cloud matching the Gaussian peak density.

    The peak areal density of an isotropic 2D Gaussian cloud is
    ``N / (2 pi sigma^2)``; multiplying by the disk area per atom
    ``pi (r_b/2)^2`` gives the equivalent uniform-disk ``rho``.
    """
    if sigma is None or sigma <= 0:
        raise InvalidSpec("sigma must be positive")
    return n_atoms * blockade_radius**2 / (8.0 * sigma**2)


@njit(cache=True)
def _rsa_consume_2d(
    cand,
    max_r2,
    rb2,
    pos,
    n_acc,
    grid_count,
    grid_items,
    origin,
    inv_cell,
    attempts_since,
    attempts_total,
    n_target,
    budget,
):
    """Consume proposal batch sequentially; returns updated counters.

    The final flag is 1 when the per-atom attempt budget was exhausted.
    """
    ncx, ncy = grid_count.shape
    for k in range(cand.shape[0]):
        if n_acc >= n_target:
            break
        attempts_total += 1
        attempts_since += 1
        if attempts_since > budget:
            return n_acc, attempts_since, attempts_total, 1
        x = cand[k, 0]
        y = cand[k, 1]
        if x * x + y * y > max_r2:
            continue
        cx = int((x - origin) * inv_cell)
        cy = int((y - origin) * inv_cell)
        ok = True
        for dx in range(-1, 2):
            ix = cx + dx
            if ix < 0 or ix >= ncx:
                continue
            for dy in range(-1, 2):
                iy = cy + dy
                if iy < 0 or iy >= ncy:
                    continue
                for t in range(grid_count[ix, iy]):
                    j = grid_items[ix, iy, t]
                    ddx = x - pos[j, 0]
                    ddy = y - pos[j, 1]
                    if ddx * ddx + ddy * ddy < rb2:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            pos[n_acc, 0] = x
            pos[n_acc, 1] = y
            grid_items[cx, cy, grid_count[cx, cy]] = n_acc
            grid_count[cx, cy] += 1
            n_acc += 1
            attempts_since = 0
    return n_acc, attempts_since, attempts_total, 0


@njit(cache=True)
def _rsa_consume_3d(
    cand,
    max_r2,
    max_abs_z,
    rb2,
    pos,
    n_acc,
    grid_count,
    grid_items,
    origin_xy,
    origin_z,
    inv_cell,
    attempts_since,
    attempts_total,
    n_target,
    budget,
):
    ncx, ncy, ncz = grid_count.shape
    for k in range(cand.shape[0]):
        if n_acc >= n_target:
            break
        attempts_total += 1
        attempts_since += 1
        if attempts_since > budget:
            return n_acc, attempts_since, attempts_total, 1
        x = cand[k, 0]
        y = cand[k, 1]
        z = cand[k, 2]
        if x * x + y * y > max_r2 or abs(z) > max_abs_z:
            continue
        cx = int((x - origin_xy) * inv_cell)
        cy = int((y - origin_xy) * inv_cell)
        cz = int((z - origin_z) * inv_cell)
        ok = True
        for dx in range(-1, 2):
            ix = cx + dx
            if ix < 0 or ix >= ncx:
                continue
            for dy in range(-1, 2):
                iy = cy + dy
                if iy < 0 or iy >= ncy:
                    continue
                for dz in range(-1, 2):
                    iz = cz + dz
                    if iz < 0 or iz >= ncz:
                        continue
                    for t in range(grid_count[ix, iy, iz]):
                        j = grid_items[ix, iy, iz, t]
                        ddx = x - pos[j, 0]
                        ddy = y - pos[j, 1]
                        ddz = z - pos[j, 2]
                        if ddx * ddx + ddy * ddy + ddz * ddz < rb2:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            pos[n_acc, 0] = x
            pos[n_acc, 1] = y
            pos[n_acc, 2] = z
            grid_items[cx, cy, cz, grid_count[cx, cy, cz]] = n_acc
            grid_count[cx, cy, cz] += 1
            n_acc += 1
            attempts_since = 0
    return n_acc, attempts_since, attempts_total, 0


def _propose_2d(rng: np.random.Generator, spec: CloudSpec, n: int) -> np.ndarray:
    if spec.profile is Profile.GAUSSIAN_DISK:
        return rng.normal(0.0, spec.sigma_in_plane, size=(n, 2))
    # exact uniform sampling over the disk by polar inversion
    u = rng.random((n, 2))
    r = spec.radius * np.sqrt(u[:, 0])
    theta = 2.0 * np.pi * u[:, 1]
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_configuration(
    spec: CloudSpec,
    rho_cap: float = DEFAULT_RHO_CAP,
    max_attempts_per_atom: int = DEFAULT_ATTEMPT_BUDGET,
) -> Configuration:
    """Draw one blockade-constrained configuration by sequential adsorption.

    Deterministic for a given ``spec`` (including its seed): the proposal
    stream comes from a seeded PCG64 generator and proposals are consumed in
    order.  Raises :class:`JammingUnreachable` when ``max_attempts_per_atom``
    consecutive proposals for the same atom were rejected, and
    :class:`InvalidSpec` when the implied density exceeds ``rho_cap``.
    """
    spec.validate(rho_cap=rho_cap)
    rng = np.random.Generator(np.random.PCG64(int(spec.seed)))
    rb = spec.blockade_radius
    rb2 = rb * rb
    n = spec.n_atoms

    if spec.profile is Profile.GAUSSIAN_DISK:
        extent = 4.0 * spec.sigma_in_plane
    else:
        extent = spec.radius
    max_r2 = extent * extent
    n_cells = max(1, int(np.ceil(2.0 * extent / rb)))
    origin = -extent

    if spec.profile is Profile.PANCAKE:
        z_extent = 4.0 * spec.sigma_z
        ncz = max(1, int(np.ceil(2.0 * z_extent / rb)))
        pos = np.empty((n, 3))
        grid_count = np.zeros((n_cells, n_cells, ncz), dtype=np.int32)
        grid_items = np.zeros((n_cells, n_cells, ncz, _CELL_CAPACITY), dtype=np.int32)
    else:
        pos = np.empty((n, 2))
        grid_count = np.zeros((n_cells, n_cells), dtype=np.int32)
        grid_items = np.zeros((n_cells, n_cells, _CELL_CAPACITY), dtype=np.int32)

    n_acc = 0
    attempts_since = 0
    attempts_total = 0
    while n_acc < n:
        xy = _propose_2d(rng, spec, _PROPOSAL_BATCH)
        if spec.profile is Profile.PANCAKE:
            z = rng.normal(0.0, spec.sigma_z, size=_PROPOSAL_BATCH)
            cand = np.column_stack((xy, z))
            n_acc, attempts_since, attempts_total, exhausted = _rsa_consume_3d(
                cand, max_r2, z_extent, rb2, pos, n_acc, grid_count, grid_items,
                origin, origin, 1.0 / rb, attempts_since, attempts_total, n,
                max_attempts_per_atom,
            )
        else:
            n_acc, attempts_since, attempts_total, exhausted = _rsa_consume_2d(
                xy, max_r2, rb2, pos, n_acc, grid_count, grid_items,
                origin, 1.0 / rb, attempts_since, attempts_total, n,
                max_attempts_per_atom,
            )
        if exhausted:
            raise JammingUnreachable(
                f"placed {n_acc}/{n} atoms before exhausting "
                f"{max_attempts_per_atom} attempts for one atom (rho={spec.rho:.4f})"
            )
    return Configuration(
        positions=pos, spec=spec, rho=spec.rho, attempts_used=attempts_total
    )


def min_pair_distance(config: Configuration | np.ndarray) -> float:
    """Smallest pairwise Euclidean distance in a configuration."""
    positions = np.asarray(getattr(config, "positions", config), dtype=float)
    if positions.shape[0] < 2:
        raise TooFewAtoms("min_pair_distance requires at least two atoms")
    from scipy.spatial import cKDTree

    tree = cKDTree(positions)
    dists, _ = tree.query(positions, k=2)
    return float(dists[:, 1].min())


def validate_configuration(config: Configuration) -> None:
    """Check the blockade, region and count invariants of a configuration."""
    spec = config.spec
    pos = config.positions
    if pos.shape[0] != spec.n_atoms:
        raise InvalidSpec("position count does not match the spec")
    if pos.shape[0] >= 2 and min_pair_distance(config) < spec.blockade_radius:
        raise InvalidSpec("blockade constraint violated")
    r2 = np.sum(pos[:, :2] ** 2, axis=1)
    if spec.profile is Profile.GAUSSIAN_DISK:
        limit = 4.0 * spec.sigma_in_plane
    else:
        limit = spec.radius
    if np.any(r2 > limit**2 * (1 + 1e-12)):
        raise InvalidSpec("atom outside the declared region")


def save_configuration(config: Configuration, csv_path: str | Path) -> Path:
    """Write positions as CSV plus a JSON metadata sidecar.

    The CSV has one row per atom (``index,x,y[,z]``); metadata goes to
    ``<stem>.meta.json`` next to it.  Floats are written in round-trippable
    precision.
    """
    csv_path = Path(csv_path)
    dim = config.positions.shape[1]
    header = "index,x,y" + (",z" if dim == 3 else "")
    lines = [header]
    for i, row in enumerate(config.positions):
        lines.append(",".join([str(i)] + [repr(float(v)) for v in row]))
    csv_path.write_text("\n".join(lines) + "\n")
    meta = {
        "spec": config.spec.to_dict(),
        "rho": config.rho,
        "attempts_used": int(config.attempts_used),
        "generator": config.generator,
    }
    meta_path = csv_path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return meta_path


def load_configuration(csv_path: str | Path) -> Configuration:
    """Load a configuration written by :func:`save_configuration`."""
    csv_path = Path(csv_path)
    rows = csv_path.read_text().strip().splitlines()
    data = np.array([[float(v) for v in line.split(",")[1:]] for line in rows[1:]])
    meta = json.loads(csv_path.with_suffix(".meta.json").read_text())
    spec = CloudSpec.from_dict(meta["spec"])
    return Configuration(
        positions=data,
        spec=spec,
        rho=meta["rho"],
        attempts_used=meta["attempts_used"],
        generator=meta.get("generator", GENERATOR_NAME),
    )
