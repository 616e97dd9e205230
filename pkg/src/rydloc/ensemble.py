"""Disorder-ensemble orchestration: seeds, scheduling, merging, persistence.

Every experiment runs ``n_realizations`` independent pipelines
(sample -> build -> diagonalize -> observables).  Each realization gets a
seed derived from the master seed by a SplitMix64 finalizer, so results are
reproducible and independent of scheduling.  Workers return small
per-realization payloads which the parent folds in ascending realization
order; float addition order is therefore canonical and the merged result is
bit-identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EnsembleFailure
from .geometry import GENERATOR_NAME, CloudSpec, sample_configuration
from .coupling import ModelParams, build_hamiltonian

log = logging.getLogger(__name__)

EXPERIMENTS = ("spectral", "lsr", "dynamics", "lindblad", "lowenergy")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, realization_index: int) -> int:
    """Derive a per-realization 64-bit seed.

    SplitMix64 finalizer applied to ``master + golden * (index + 1)``; the
    finalizer is a bijection, so distinct inputs always map to distinct
    seeds and neighbouring masters or indices decorrelate completely.
    """
    z = (int(master_seed) + _GOLDEN * (int(realization_index) + 1)) & _MASK64
    return _splitmix64(z)


@dataclass
class RunConfig:
    """Complete description of one disorder-averaged experiment."""

    experiment: str
    n_atoms: int
    rho: float
    n_realizations: int
    master_seed: int = 0
    radius: float | None = None  # overrides the rho-derived radius if set
    profile: str = "uniform_disk"
    sigma_in_plane: float | None = None
    sigma_z: float | None = None
    model: ModelParams = field(default_factory=ModelParams)
    energy_bins: tuple[float, float, int] = (-4.0, 4.0, 200)
    ratio_bins: tuple[float, float, int] = (0.0, 1.0, 100)
    ratio_window: tuple[float, float] | None = None
    time_grid: tuple[float, float, int] = (1e-2, 1e5, 200)
    gamma: float = 0.0  # internal units; lindblad experiment only
    lindblad_method: str = "spectral"
    k_lowest: int = 10
    delta_r: float = 1.0
    gfd_q: float = 2.0
    log_per_realization: bool = False
    failure_budget: int = 0
    workers: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")

    def cloud_spec(self, seed: int) -> CloudSpec:
        from .geometry import Profile, radius_for_density

        profile = Profile(self.profile)
        radius = self.radius
        if radius is None and profile is not Profile.GAUSSIAN_DISK:
            radius = radius_for_density(self.n_atoms, self.rho)
        return CloudSpec(
            n_atoms=self.n_atoms,
            radius=radius if radius is not None else 0.0,
            profile=profile,
            sigma_in_plane=self.sigma_in_plane,
            sigma_z=self.sigma_z,
            seed=seed,
        )

    def energy_bin_edges(self) -> np.ndarray:
        lo, hi, n = self.energy_bins
        return np.linspace(lo, hi, int(n) + 1)

    def ratio_bin_edges(self) -> np.ndarray:
        lo, hi, n = self.ratio_bins
        return np.linspace(lo, hi, int(n) + 1)

    def times(self) -> np.ndarray:
        lo, hi, n = self.time_grid
        return np.geomspace(lo, hi, int(n))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if isinstance(d.get("model"), dict):
            d["model"] = ModelParams.from_dict(d["model"])
        for key in ("energy_bins", "ratio_bins", "time_grid", "ratio_window"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


class ResultStore:
    """Named artifacts of one run plus the manifest tying them to the config."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.series: dict = {}  # name -> BinnedSeries
        self.tables: dict = {}  # name -> {column: array}
        self.scalars: dict = {}  # name -> per-realization array
        self.stats: dict = {}  # free-form summary numbers
        self.failures: list = []

    def manifest(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "version": __version__,
            "rng": GENERATOR_NAME,
            "series": sorted(self.series),
            "tables": sorted(self.tables),
            "scalars": sorted(self.scalars),
            "stats": self.stats,
            "failures": self.failures,
        }

    def save(self, outdir: str | Path) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for name, series in self.series.items():
            series.to_csv(outdir / f"{name}.csv")
        for name, table in self.tables.items():
            cols = list(table)
            rows = [",".join(cols)]
            length = len(next(iter(table.values())))
            for i in range(length):
                rows.append(",".join(_fmt(table[c][i]) for c in cols))
            (outdir / f"{name}.csv").write_text("\n".join(rows) + "\n")
        for name, arr in self.scalars.items():
            rows = ["realization,value"] + [
                f"{i},{_fmt(v)}" for i, v in enumerate(arr)
            ]
            (outdir / f"{name}.csv").write_text("\n".join(rows) + "\n")
        manifest_path = outdir / "manifest.json"
        manifest_path.write_text(json.dumps(self.manifest(), indent=2, default=_json_default) + "\n")
        return manifest_path


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# per-realization pipelines; each returns a small payload dict


def _realize_spectral(config: RunConfig, index: int) -> dict:
    from .spectra import all_gfds, all_iprs, diagonalize

    seed = derive_seed(config.master_seed, index)
    cfg = sample_configuration(config.cloud_spec(seed))
    spectrum = diagonalize(build_hamiltonian(cfg, config.model))
    return {
        "eigenvalues": spectrum.eigenvalues,
        "iprs": all_iprs(spectrum),
        "gfds": all_gfds(spectrum, config.gfd_q),
    }


def _realize_lsr(config: RunConfig, index: int) -> dict:
    from .levelstats import spacing_ratios

    seed = derive_seed(config.master_seed, index)
    cfg = sample_configuration(config.cloud_spec(seed))
    h = build_hamiltonian(cfg, config.model)
    eigenvalues = np.linalg.eigvalsh(h)
    rs = spacing_ratios(eigenvalues)
    return {
        "energies": rs.energies,
        "ratios": rs.ratios,
        "zero_spacings": rs.zero_spacing_count,
    }


def _realize_dynamics(config: RunConfig, index: int) -> dict:
    from .dynamics import central_site, diagonal_ensemble, evolve_populations, msd
    from .spectra import diagonalize

    seed = derive_seed(config.master_seed, index)
    cfg = sample_configuration(config.cloud_spec(seed))
    spectrum = diagonalize(build_hamiltonian(cfg, config.model))
    start = central_site(cfg)
    times = config.times()
    series = evolve_populations(
        spectrum, start, times, positions=cfg.positions, origin=cfg.positions[start]
    )
    late = diagonal_ensemble(spectrum, start)
    late_msd = msd(late, cfg.positions, origin=cfg.positions[start])
    from .analysis import radial_density

    profile = radial_density(
        late, cfg.positions, center=np.zeros(cfg.positions.shape[1]),
        delta_r=config.delta_r,
    )
    return {
        "msd": series.msd,
        "late_msd": late_msd,
        "profile_centers": profile.r_bin_centers,
        "profile_densities": profile.densities,
        "profile_counts": profile.counts,
    }


def _realize_lindblad(config: RunConfig, index: int) -> dict:
    from .dephasing import DephasingParams, evolve_lindblad, site_density_matrix
    from .dynamics import central_site

    seed = derive_seed(config.master_seed, index)
    cfg = sample_configuration(config.cloud_spec(seed))
    h = build_hamiltonian(cfg, config.model)
    start = central_site(cfg)
    params = DephasingParams(gamma=config.gamma, method=config.lindblad_method)
    result = evolve_lindblad(
        h,
        site_density_matrix(cfg.n_atoms, start),
        params,
        config.times(),
        positions=cfg.positions,
        origin=cfg.positions[start],
    )
    return {
        "times": result.series.times,
        "msd": result.series.msd,
        "final_populations": result.series.populations[-1],
        "trace_drift": float(np.max(np.abs(result.trace - 1.0))),
    }


def _realize_lowenergy(config: RunConfig, index: int) -> dict:
    from .analysis import sign_structure
    from .spectra import diagonalize

    seed = derive_seed(config.master_seed, index)
    cfg = sample_configuration(config.cloud_spec(seed))
    spectrum = diagonalize(build_hamiltonian(cfg, config.model))
    _, _, uniform = sign_structure(spectrum.eigenvectors[:, 0])
    return {
        "low_energies": spectrum.eigenvalues[: config.k_lowest],
        "ground_uniform": bool(uniform),
    }


_REALIZERS = {
    "spectral": _realize_spectral,
    "lsr": _realize_lsr,
    "dynamics": _realize_dynamics,
    "lindblad": _realize_lindblad,
    "lowenergy": _realize_lowenergy,
}


def run_realization(config: RunConfig, index: int) -> dict:
    """Execute the pipeline for one realization (used directly in tests)."""
    return _REALIZERS[config.experiment](config, index)


def _worker_run(args):
    config_dict, index = args
    config = RunConfig.from_dict(config_dict)
    return index, _REALIZERS[config.experiment](config, index)


def run_ensemble(config: RunConfig) -> ResultStore:
    """Run all realizations, merge payloads in canonical order.

    Per-realization errors are collected; once they exceed
    ``failure_budget`` the run aborts with :class:`EnsembleFailure`.
    """
    payloads: dict[int, dict] = {}
    failures: list[tuple[int, str]] = []

    if config.workers > 1:
        import multiprocessing as mp

        from ._mpinit import limit_blas_threads

        ctx_args = [(config.to_dict(), i) for i in range(config.n_realizations)]
        with ProcessPoolExecutor(
            max_workers=config.workers,
            mp_context=mp.get_context("spawn"),
            initializer=limit_blas_threads,
        ) as pool:
            futures = [pool.submit(_worker_run, a) for a in ctx_args]
            for i, fut in enumerate(futures):
                try:
                    index, payload = fut.result()
                    payloads[index] = payload
                except Exception as exc:  # noqa: BLE001 - budgeted failures
                    failures.append((i, repr(exc)))
                    if len(failures) > config.failure_budget:
                        raise EnsembleFailure(
                            f"failure budget exceeded: {failures}"
                        ) from exc
    else:
        for i in range(config.n_realizations):
            try:
                payloads[i] = run_realization(config, i)
            except Exception as exc:  # noqa: BLE001
                failures.append((i, repr(exc)))
                if len(failures) > config.failure_budget:
                    raise EnsembleFailure(
                        f"realization {i} failed: {exc!r}"
                    ) from exc
            if (i + 1) % 50 == 0:
                log.info("%s: %d/%d realizations", config.experiment, i + 1,
                         config.n_realizations)

    store = ResultStore(config)
    store.failures = [{"index": i, "error": e} for i, e in failures]
    ordered = [payloads[i] for i in sorted(payloads)]
    _reduce(config, ordered, store)
    if config.output_dir:
        store.save(config.output_dir)
    return store


def _reduce(config: RunConfig, payloads: list[dict], store: ResultStore) -> None:
    from .spectra import BinnedAccumulator

    edges = config.energy_bin_edges()
    if config.experiment == "spectral":
        dos = BinnedAccumulator(edges)
        ipr_acc = BinnedAccumulator(edges)
        gfd_acc = BinnedAccumulator(edges)
        for p in payloads:
            dos.add(p["eigenvalues"])
            ipr_acc.add(p["eigenvalues"], p["iprs"])
            gfd_acc.add(p["eigenvalues"], p["gfds"])
        store.series["dos"] = dos.to_count_series()
        store.series["ipr_binned"] = ipr_acc.to_mean_series()
        store.series["gfd_binned"] = gfd_acc.to_mean_series()
        store.stats["dos_underflow"] = dos.underflow
        store.stats["dos_overflow"] = dos.overflow
        store.stats["n_realizations_done"] = dos.n_realizations
    elif config.experiment == "lsr":
        lsr_acc = BinnedAccumulator(edges)
        hist = BinnedAccumulator(config.ratio_bin_edges())
        zero_tally = 0
        window = config.ratio_window
        for p in payloads:
            lsr_acc.add(p["energies"], p["ratios"])
            ratios = p["ratios"]
            if window is not None:
                sel = (p["energies"] >= window[0]) & (p["energies"] <= window[1])
                ratios = ratios[sel]
            hist.add(ratios)
            zero_tally += p["zero_spacings"]
        store.series["lsr_binned"] = lsr_acc.to_mean_series()
        store.series["ratio_hist"] = hist.to_count_series()
        store.stats["zero_spacings"] = zero_tally
        all_r = np.concatenate([p["ratios"] for p in payloads])
        all_e = np.concatenate([p["energies"] for p in payloads])
        if window is not None:
            sel = (all_e >= window[0]) & (all_e <= window[1])
            all_r = all_r[sel]
        store.stats["mean_ratio"] = float(all_r.mean()) if all_r.size else None
    elif config.experiment == "dynamics":
        times = config.times()
        msd_sum = np.zeros(times.size)
        msd_sq = np.zeros(times.size)
        late = []
        profile_sum = None
        profile_sq = None
        profile_counts = None
        for p in payloads:
            msd_sum += p["msd"]
            msd_sq += p["msd"] ** 2
            late.append(p["late_msd"])
            nb = p["profile_centers"].size
            if profile_sum is None:
                profile_sum = np.zeros(0)
                profile_sq = np.zeros(0)
                profile_counts = np.zeros(0, dtype=np.int64)
            if nb > profile_sum.size:
                profile_sum = np.pad(profile_sum, (0, nb - profile_sum.size))
                profile_sq = np.pad(profile_sq, (0, nb - profile_sq.size))
                profile_counts = np.pad(
                    profile_counts, (0, nb - profile_counts.size)
                )
            dens = np.nan_to_num(p["profile_densities"], nan=0.0)
            occupied = p["profile_counts"] > 0
            profile_sum[:nb] += np.where(occupied, dens, 0.0)
            profile_sq[:nb] += np.where(occupied, dens**2, 0.0)
            profile_counts[:nb] += occupied.astype(np.int64)
        nr = len(payloads)
        store.tables["msd"] = {
            "time": times,
            "msd_mean": msd_sum / nr,
            "msd_stderr": _stderr(msd_sum, msd_sq, nr),
        }
        with np.errstate(invalid="ignore", divide="ignore"):
            prof_mean = np.where(
                profile_counts > 0, profile_sum / np.maximum(profile_counts, 1),
                np.nan,
            )
        store.tables["late_profile"] = {
            "r": (np.arange(profile_sum.size) + 0.5) * config.delta_r,
            "density_mean": prof_mean,
            "realizations": profile_counts,
        }
        store.stats["late_msd_mean"] = float(np.mean(late))
        store.stats["late_msd_std"] = float(np.std(late))
        if config.log_per_realization:
            store.scalars["late_msd"] = np.array(late)
    elif config.experiment == "lindblad":
        times = payloads[0]["times"]
        msd_sum = np.zeros(times.size)
        msd_sq = np.zeros(times.size)
        final_sum = None
        drift = 0.0
        for p in payloads:
            msd_sum += p["msd"]
            msd_sq += p["msd"] ** 2
            if final_sum is None:
                final_sum = np.zeros_like(p["final_populations"])
            final_sum += p["final_populations"]
            drift = max(drift, p["trace_drift"])
        nr = len(payloads)
        store.tables["msd"] = {
            "time": times,
            "msd_mean": msd_sum / nr,
            "msd_stderr": _stderr(msd_sum, msd_sq, nr),
        }
        store.tables["final_populations"] = {
            "site": np.arange(final_sum.size),
            "population_mean": final_sum / nr,
        }
        store.stats["max_trace_drift"] = drift
        store.stats["gamma_internal"] = config.gamma
    elif config.experiment == "lowenergy":
        from .analysis import LowEnergyAccumulator

        acc = LowEnergyAccumulator(config.k_lowest, edges)
        uniform_count = 0
        for p in payloads:
            acc.add(p["low_energies"])
            uniform_count += int(p["ground_uniform"])
        for i, hist in enumerate(acc.histograms()):
            store.series[f"energy_index_{i}"] = hist
        stats = acc.statistics()
        store.tables["level_statistics"] = {
            "index": np.arange(config.k_lowest),
            "mean": stats["mean"],
            "std": stats["std"],
            "skewness": stats["skewness"],
        }
        store.stats["ground_uniform_fraction"] = uniform_count / max(
            len(payloads), 1
        )


def _stderr(sums: np.ndarray, sq_sums: np.ndarray, n: int) -> np.ndarray:
    if n < 2:
        return np.full_like(sums, np.nan)
    mean = sums / n
    var = np.maximum(sq_sums / n - mean**2, 0.0)
    return np.sqrt(var / (n - 1))
