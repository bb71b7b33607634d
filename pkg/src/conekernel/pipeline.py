"""End-to-end pipeline driver: configuration, stage orchestration, run manifests.

A run resolves a :class:`RunConfig`, generates or loads a dataset, applies the
optional centering and delay embedding, estimates velocities, assembles the
kernel matrix, normalizes it into a diffusion operator, solves for
eigenfunctions, and writes plot-ready artifacts plus a manifest that fully
reproduces the run. Identical configurations produce bitwise identical output
files; nothing time- or path-dependent enters the artifacts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio, synth
from .dataset import TimeSeriesDataset, center as center_data, delay_embed, trim
from .diffusion import build_operator
from .kernels import KernelSpec, build_kernel_matrix
from .spectral import along_flow_energy, dirichlet_energy, eigensolve, power_spectrum, timeseries
from .torus import TorusModel, embed as torus_embed, orbit_angles
from .velocity import FdScheme, estimate_velocity, speed_ratio

_TWO_PI = 2.0 * math.pi


@dataclass
class RunConfig:
    """Resolved parameters of one pipeline run.

    Defaults follow the torus experiments: cone kernel with zeta = 0.995,
    alpha = 1 diffusion-map normalization, central fourth-order differences,
    500 steps per quasi-period, tube radius 1/2, beta = 0.5.
    """

    source: str = "torus"          # torus | synth | file
    out: str = "run"
    # torus source
    beta: float = 0.5
    omega: float = math.sqrt(30.0)
    gamma: float = 0.0
    tube_radius: float = 0.5
    samples: int = 8000
    steps_per_period: int = 500
    # synth source (periodic/rednoise/modulated describe components; patterns
    # are drawn deterministically from the seed)
    grid_points: int = 16
    months: int = 1200
    periodic: tuple = ()           # frequencies, cycles per month
    rednoise: tuple = ()           # decorrelation times, months
    modulated: tuple = ()          # (carrier frequency, envelope decorrelation time)
    noise: float = 0.0
    seed: int = 0
    # file source
    data: str = ""
    dt: float = 1.0
    weights: str = ""
    csv_header: bool = False
    # preprocessing
    center: bool = False
    delay: int = 1
    # velocity
    fd_kind: str = "central"
    fd_order: int = 4
    velocity_floor: float = 0.0
    # kernel
    kernel: str = "cone_geometric"
    zeta: float = 0.995
    epsilon: float = 1.0
    knn: int = 0                   # 0 disables truncation
    # operator and eigenfunctions
    alpha: float = 1.0
    eigs: int = 16
    dense_threshold: int = 2048
    # execution
    threads: int = 1
    save_operator: bool = False
    save_data: bool = False

    def validated(self) -> "RunConfig":
        if self.source not in ("torus", "synth", "file"):
            raise ValueError(f"unknown source {self.source!r}; expected torus, synth, or file")
        if self.source == "file" and not self.data:
            raise ValueError("file source requires a data path")
        if self.eigs < 1:
            raise ValueError("eigenpair count must be at least 1")
        if self.delay < 1:
            raise ValueError("delay must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.knn < 0:
            raise ValueError("knn must be nonnegative (0 disables truncation)")
        return self


_BOOL_STRINGS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(name: str, raw: str, kind):
    if kind is bool:
        try:
            return _BOOL_STRINGS[raw.strip().lower()]
        except KeyError:
            raise ValueError(f"config key {name}: expected a boolean, got {raw!r}") from None
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is str:
        return raw.strip()
    if kind is tuple:
        raw = raw.strip()
        if not raw:
            return ()
        items = []
        for chunk in raw.split(","):
            if ":" in chunk:
                items.append(tuple(float(part) for part in chunk.split(":")))
            else:
                items.append(float(chunk))
        return tuple(items)
    raise ValueError(f"config key {name}: unsupported type {kind}")


def parse_config_file(path) -> dict:
    """Flat ``key = value`` text with ``#`` comments; unknown keys are errors."""
    fields = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    kinds = {name: type(getattr(RunConfig(), name)) for name in fields}
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, raw, kinds[key])
    return out


def make_config(file_path=None, overrides=None) -> RunConfig:
    """Config file values overridden by explicit settings, then validated."""
    values = {}
    if file_path:
        values.update(parse_config_file(file_path))
    if overrides:
        values.update(overrides)
    return RunConfig(**values).validated()


def _synth_components(config: RunConfig):
    components = []
    index = 0
    for freq in config.periodic:
        components.append(synth.Periodic(
            pattern=synth.random_pattern(config.seed + 1, config.grid_points, index), frequency=freq))
        index += 1
    for tau in config.rednoise:
        components.append(synth.RedNoise(
            pattern=synth.random_pattern(config.seed + 1, config.grid_points, index),
            decorrelation_time=tau, seed=config.seed + 101 + index))
        index += 1
    for item in config.modulated:
        carrier, tau = item
        components.append(synth.Modulated(
            pattern=synth.random_pattern(config.seed + 1, config.grid_points, index),
            carrier_frequency=carrier, envelope_decorrelation_time=tau,
            seed=config.seed + 101 + index))
        index += 1
    return tuple(components)


def load_source(config: RunConfig):
    """Build the raw dataset and, for torus runs, the orbit angles."""
    if config.source == "torus":
        model = TorusModel(beta=config.beta, omega=config.omega,
                           R=config.tube_radius, gamma=config.gamma)
        angles = orbit_angles(model, config.samples, config.steps_per_period)
        dataset = TimeSeriesDataset(
            samples=np.atleast_2d(torus_embed(model, (angles[:, 0], angles[:, 1]))),
            dt=model.sampling_interval(config.steps_per_period))
        return dataset, angles
    if config.source == "synth":
        spec = synth.SyntheticFieldSpec(
            grid_points=config.grid_points, months=config.months,
            components=_synth_components(config), noise_amplitude=config.noise,
            seed=config.seed)
        return synth.generate_field(spec), None
    path = Path(config.data)
    if path.suffix == ".csv":
        samples = fileio.read_csv_samples(path, header=config.csv_header)
    else:
        samples = fileio.read_dense(path)
    weights = None
    if config.weights:
        weights = fileio.read_dense(config.weights).ravel()
    return TimeSeriesDataset(samples=samples, dt=config.dt, weights=weights), None


@dataclass
class PipelineResult:
    config: RunConfig
    dataset: TimeSeriesDataset       # after preprocessing, before trim
    trimmed: TimeSeriesDataset       # samples the operator lives on
    velocity: object
    kernel: object
    operator: object
    solution: object
    angles: np.ndarray = None        # torus runs only; aligned with `trimmed`

    @property
    def s_eff(self) -> int:
        return self.trimmed.n_samples


def run_stages(config: RunConfig) -> PipelineResult:
    """Execute every stage in memory; see :func:`run_pipeline` for file output."""
    config = config.validated()
    dataset, angles = load_source(config)
    if config.center:
        dataset = center_data(dataset)
    if config.delay > 1:
        dataset = delay_embed(dataset, config.delay)
    scheme = FdScheme(config.fd_kind, config.fd_order)
    velocity = estimate_velocity(dataset, scheme)
    spec = KernelSpec(family=config.kernel, zeta=config.zeta, epsilon=config.epsilon)
    b = config.knn if config.knn else None
    kernel = build_kernel_matrix(dataset, velocity, spec, b=b,
                                 velocity_floor=config.velocity_floor,
                                 threads=config.threads)
    operator = build_operator(kernel, alpha=config.alpha)
    solution = eigensolve(operator, config.eigs, dense_threshold=config.dense_threshold)
    trimmed = trim(dataset, velocity.trim_left, velocity.trim_right)
    if angles is not None:
        # map trimmed row j back to its generating orbit sample
        first = (config.delay - 1) + velocity.trim_left
        angles = angles[first: first + trimmed.n_samples] % _TWO_PI
    return PipelineResult(config=config, dataset=dataset, trimmed=trimmed,
                          velocity=velocity, kernel=kernel, operator=operator,
                          solution=solution, angles=angles)


def _config_dict(config: RunConfig) -> dict:
    out = dataclasses.asdict(config)
    out["periodic"] = list(config.periodic)
    out["rednoise"] = list(config.rednoise)
    out["modulated"] = [list(item) for item in config.modulated]
    return out


def run_pipeline(config: RunConfig, out_dir=None) -> Path:
    """Run all stages and write artifacts into the run directory.

    Writes manifest.json, eigenvalues/eigenfunctions/pi (CKD1), per-eigenfunction
    time series and spectra (CSV), along-flow/Dirichlet diagnostics (CSV), and
    scatter-plot data for torus runs.
    """
    from . import __version__

    result = run_stages(config)
    config = result.config
    out = Path(out_dir if out_dir is not None else config.out)
    out.mkdir(parents=True, exist_ok=True)

    solution = result.solution
    operator = result.operator
    fileio.write_dense(out / "eigenvalues.ckd1", solution.lambdas)
    fileio.write_dense(out / "eigenfunctions.ckd1", solution.phis)
    fileio.write_dense(out / "pi.ckd1", operator.pi)

    diag_rows = {"index": [], "lambda": [], "dirichlet": [], "along_flow": [], "residual": []}
    for k in range(solution.count):
        ts = timeseries(solution, k, result.trimmed)
        fileio.write_csv_columns(out / f"timeseries_{k:03d}.csv",
                                 {"t": ts.times, "value": ts.values})
        freqs, power = power_spectrum(ts)
        fileio.write_csv_columns(out / f"spectrum_{k:03d}.csv", {"freq": freqs, "power": power})
        diag_rows["index"].append(float(k))
        diag_rows["lambda"].append(solution.lambdas[k])
        diag_rows["dirichlet"].append(dirichlet_energy(solution.phis[:, k], operator))
        diag_rows["along_flow"].append(along_flow_energy(ts, operator.pi))
        diag_rows["residual"].append(solution.residuals[k])
    fileio.write_csv_columns(out / "diagnostics.csv", diag_rows)

    if result.angles is not None:
        scatter = {"theta1": result.angles[:, 0], "theta2": result.angles[:, 1]}
        for k in range(solution.count):
            scatter[f"phi_{k}"] = solution.phis[:, k]
        fileio.write_csv_columns(out / "scatter.csv", scatter)

    if config.save_data:
        fileio.write_dense(out / "dataset.ckd1", result.dataset.samples)
    if config.save_operator:
        fileio.write_sparse(out / "kernel.cks1", result.kernel.matrix)
        fileio.write_sparse(out / "k_tilde.cks1", operator.k_tilde)
        fileio.write_sparse(out / "markov.cks1", operator.markov)
        fileio.write_dense(out / "degrees.ckd1", operator.degrees)
        fileio.write_dense(out / "xi.ckd1", result.velocity.xi)

    manifest = {
        "format": "conekernel-run",
        "version": __version__,
        "config": _config_dict(config),
        "dataset": {
            "digest_sha256": hashlib.sha256(result.dataset.samples.tobytes()).hexdigest(),
            "samples": result.dataset.n_samples,
            "dimension": result.dataset.dimension,
            "dt": result.dataset.dt,
            "time_origin": result.dataset.time_origin,
        },
        "velocity": {
            "trim_left": result.velocity.trim_left,
            "trim_right": result.velocity.trim_right,
            "speed_ratio": (speed_ratio(result.velocity)
                            if result.velocity.norms.min() > 0 else None),
        },
        "kernel": {
            "s_eff": result.s_eff,
            "neighbors": result.kernel.neighbors,
            "nnz": int(result.kernel.matrix.nnz),
            "truncation_level": result.kernel.truncation_level(),
        },
        "eigenvalues": [float(v) for v in solution.lambdas],
        "max_residual": float(solution.residuals.max()),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
