"""Seeded Monte-Carlo experiment driver emitting CSV artifacts.

Experiments are described by an `ExperimentConfig` (serializable to JSON) and
run fully deterministically: every random draw is keyed by a counter-based
scheme on top of the config seed, so estimators within a trial share the same
channel and noise, re-running a config reproduces its CSVs byte for byte, and
growing the trial count leaves earlier trials' records unchanged.

Seed derivation: a draw of purpose `code` at sweep point `p`, trial `t` uses
`numpy.random.SeedSequence(entropy=seed, spawn_key=(code, p, t))`. Codes:
0 scenario, 1 compressed-frame noise, 2 full-frame noise, 10/11 the
compressed/full pilot matrices, 12 covariance draws, 20-23 the federated
pipeline (datasets, eval set, initialization, training).

Every CSV starts with `# nearsplit-csv schema=<name> config=<hash> version=
<tool version>` followed by a column-name row.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__
from .channel import normalize_for_snr, sample_scenario, synthesize_channel
from .config import SystemConfig
from .dictionary import (
    PhysicalGrid,
    SteeringDictionary,
    build_nba,
    build_physical_grid,
    build_si_farfield,
    build_si_nearfield,
)
from .estimators import (
    LmmseEstimator,
    LsEstimator,
    OmpEstimator,
    estimate_covariance,
    make_pilot_matrix,
    nmse,
    sound,
)
from .fedlearn import (
    NetSpec,
    build_datasets,
    build_eval_set,
    init_params,
    overhead_cl,
    overhead_fl,
    param_count,
    predict_channels,
    train,
    vector_nmse,
)
from .validation import check_seed
from .wavefield import (
    SIN_DOA_LIMIT,
    PolarPoint,
    array_gain_profile,
    fraunhofer_distance,
)

OMP_ESTIMATORS = ("nba-omp", "nf-omp", "ff-omp")
KNOWN_ESTIMATORS = OMP_ESTIMATORS + ("ls", "lmmse")


@dataclass(frozen=True)
class SweepSpec:
    """What varies across sweep points: SNR, bandwidth, or nothing."""

    kind: str = "snr"  # "snr" | "bandwidth" | "none"
    values: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)

    def __post_init__(self) -> None:
        if self.kind not in ("snr", "bandwidth", "none"):
            raise ValueError(f"sweep kind must be snr|bandwidth|none, got {self.kind!r}")
        if self.kind != "none" and len(self.values) == 0:
            raise ValueError("sweep values must not be empty")


@dataclass(frozen=True)
class GridSpec:
    """Dictionary grid controls; q_angle defaults to the antenna count."""

    q_angle: int | None = None
    q_range: int = 10
    r_min_m: float = 3.0
    r_max_m: float | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    """Multipath statistics: path count, range band, optional angle band."""

    n_paths: int = 3
    range_bounds_m: tuple[float, float] = (5.0, 30.0)
    angle_bounds_deg: tuple[float, float] | None = None

    def sectors(self, n_users: int) -> list[tuple[float, float]] | None:
        if self.angle_bounds_deg is None:
            return None
        return [tuple(self.angle_bounds_deg)] * n_users


@dataclass(frozen=True)
class GainMapSpec:
    """Cartesian raster around a user; the array sits at the origin along x."""

    user_angle_deg: float = 45.0
    user_range_m: float = 6.0
    x_min_m: float = 2.5
    x_max_m: float = 6.0
    y_min_m: float = 2.5
    y_max_m: float = 6.0
    nx: int = 113
    ny: int = 113
    subcarriers: tuple[int, ...] = (0, 64, 127)


@dataclass(frozen=True)
class FlSpec:
    """Federated experiment controls plus reference overhead inputs."""

    v_scenarios: int = 32
    train_snrs_db: tuple[float, ...] = (15.0, 20.0, 25.0)
    augment: int = 1
    hidden: tuple[int, ...] = (128, 128)
    n_rounds: int = 1500
    lr: float = 2e-2
    batch: int | None = 256
    eval_samples: int = 200
    eval_snr_db: float = 20.0
    label_paths: int = 3
    ref_z: int = 1_196_928
    ref_rounds: int = 100
    ref_users: int = 8
    ref_d_k: int = 128_000_000
    ref_rf_chains: int = 8
    ref_antennas: int = 256


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    estimators: tuple[str, ...] = ("nba-omp", "nf-omp", "ff-omp")
    trials: int = 50
    sweep: SweepSpec = field(default_factory=SweepSpec)
    snr_db: float = 10.0
    grid: GridSpec = field(default_factory=GridSpec)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    gain_map: GainMapSpec = field(default_factory=GainMapSpec)
    fl: FlSpec = field(default_factory=FlSpec)
    cov_draws: int = 2000
    seed: int = 1

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if len(self.estimators) == 0:
            raise ValueError("estimator list must not be empty")
        for name in self.estimators:
            if name not in KNOWN_ESTIMATORS:
                raise ValueError(
                    f"unknown estimator {name!r}; known: {', '.join(KNOWN_ESTIMATORS)}"
                )
        check_seed(self.seed)


def desk_profile() -> ExperimentConfig:
    """Small geometry that keeps every experiment interactive-fast.

    Scenarios sit deep inside the near field (0.15-0.4 of the Fraunhofer
    distance) in a +-30 degree sector: at this array size that is the regime
    where the three wavefront-model errors (beam split, missing curvature,
    noise) are all individually visible in the estimator ordering.
    """
    system = SystemConfig(
        n_antennas=64,
        carrier_hz=300e9,
        bandwidth_hz=30e9,
        n_subcarriers=16,
        n_pilots=24,
        n_rf_chains=8,
        n_users=4,
    )
    return ExperimentConfig(
        system=system,
        estimators=("nba-omp", "nf-omp", "ff-omp", "lmmse"),
        trials=100,
        sweep=SweepSpec(kind="snr", values=(0.0, 5.0, 10.0, 15.0, 20.0)),
        snr_db=10.0,
        grid=GridSpec(q_angle=128, q_range=5, r_min_m=0.25, r_max_m=None),
        scenario=ScenarioSpec(
            n_paths=3,
            range_bounds_m=(0.3, 0.8),
            angle_bounds_deg=(-30.0, 30.0),
        ),
        gain_map=GainMapSpec(
            user_angle_deg=45.0,
            user_range_m=1.2,
            x_min_m=0.05,
            x_max_m=1.85,
            y_min_m=0.05,
            y_max_m=1.85,
            nx=91,
            ny=91,
            subcarriers=(0, 8, 15),
        ),
        fl=FlSpec(),
        cov_draws=2000,
        seed=1,
    )


def paper_profile() -> ExperimentConfig:
    """Full-size geometry matching the reference system parameters."""
    return ExperimentConfig(
        system=SystemConfig(),
        estimators=("nba-omp", "nf-omp", "ff-omp"),
        trials=50,
        sweep=SweepSpec(kind="snr", values=(0.0, 5.0, 10.0, 15.0, 20.0)),
        snr_db=10.0,
        grid=GridSpec(q_angle=None, q_range=10, r_min_m=3.0, r_max_m=None),
        scenario=ScenarioSpec(n_paths=3, range_bounds_m=(5.0, 30.0)),
        gain_map=GainMapSpec(),
        fl=FlSpec(v_scenarios=4, hidden=(256, 256), eval_samples=200),
        cov_draws=500,
        seed=1,
    )


PROFILES = {"desk": desk_profile, "paper": paper_profile}


def config_to_dict(config: ExperimentConfig) -> dict:
    return dataclasses.asdict(config)


def _merge_dataclass(base, overlay: dict, path: str):
    """Replace dataclass fields from a plain dict, recursing into nested ones."""
    if not isinstance(overlay, dict):
        raise ValueError(f"config section {path or 'root'} must be a mapping")
    updates = {}
    names = {f.name: f for f in dataclasses.fields(base)}
    for key, value in overlay.items():
        if key not in names:
            raise ValueError(f"unknown config key {path}{key}")
        current = getattr(base, key)
        if dataclasses.is_dataclass(current) and not isinstance(current, type):
            updates[key] = _merge_dataclass(current, value, f"{path}{key}.")
        elif isinstance(current, tuple) and not isinstance(value, (list, tuple)):
            raise ValueError(f"config key {path}{key} must be a list")
        elif isinstance(value, (list, tuple)):
            updates[key] = tuple(
                tuple(v) if isinstance(v, (list, tuple)) else v for v in value
            )
        else:
            updates[key] = value
    return dataclasses.replace(base, **updates)


def config_from_dict(doc: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay a (possibly partial) JSON document onto a base config."""
    return _merge_dataclass(base if base is not None else ExperimentConfig(), doc, "")


def config_to_json(config: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True)


def config_from_json(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return config_from_dict(json.loads(text), base=base)


def config_hash(config: ExperimentConfig) -> str:
    canon = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def derive_seed(config_seed: int, *spawn_key: int) -> int:
    """Deterministic child seed for one purpose/point/trial coordinate."""
    ss = np.random.SeedSequence(entropy=config_seed, spawn_key=tuple(spawn_key))
    return int(ss.generate_state(1)[0])


def _format_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str, schema: str, cfg_hash: str, columns, rows) -> None:
    lines = [f"# nearsplit-csv schema={schema} config={cfg_hash} version={__version__}"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_format_value(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _build_grid(system: SystemConfig, grid_spec: GridSpec) -> PhysicalGrid:
    q_angle = grid_spec.q_angle if grid_spec.q_angle is not None else system.n_antennas
    return build_physical_grid(
        system,
        q_angle,
        grid_spec.q_range,
        r_min_m=grid_spec.r_min_m,
        r_max_m=grid_spec.r_max_m,
    )


def build_dictionary(
    name: str, system: SystemConfig, grid_spec: GridSpec
) -> SteeringDictionary:
    """The atom bank an OMP variant runs against."""
    if name == "nba-omp":
        return build_nba(_build_grid(system, grid_spec), system)
    if name == "nf-omp":
        return build_si_nearfield(_build_grid(system, grid_spec), system)
    if name == "ff-omp":
        # Same angle axis as the near-field grids so the three dictionaries
        # form a nested ablation: plane waves -> +range -> +split tracking.
        q_angle = grid_spec.q_angle if grid_spec.q_angle is not None else system.n_antennas
        return build_si_farfield(system, q_angle)
    raise ValueError(f"not an OMP estimator: {name!r}")


@dataclass
class _PointKit:
    """Everything reusable across the trials of one sweep point."""

    system: SystemConfig
    omp: dict[str, OmpEstimator]
    f_compressed: np.ndarray | None
    f_full: np.ndarray | None
    ls: LsEstimator | None
    lmmse: LmmseEstimator | None


def _prepare_point(config: ExperimentConfig, system: SystemConfig, point: int) -> _PointKit:
    omp_names = [e for e in config.estimators if e in OMP_ESTIMATORS]
    full_names = [e for e in config.estimators if e in ("ls", "lmmse")]
    f_compressed = None
    omp = {}
    if omp_names:
        f_compressed = make_pilot_matrix(
            system.n_antennas,
            system.n_pilots,
            derive_seed(config.seed, 10),
            mode="random-phase",
        )
        for name in omp_names:
            est = OmpEstimator(
                dictionary=build_dictionary(name, system, config.grid),
                n_paths=config.scenario.n_paths,
                reconstruction="sd-exact" if name == "nba-omp" else "si-carrier",
            )
            omp[name] = est.fit(f_compressed)
    f_full = None
    ls = None
    lmmse = None
    if full_names:
        f_full = make_pilot_matrix(
            system.n_antennas,
            system.n_antennas,
            derive_seed(config.seed, 11),
            mode="orthonormal",
        )
        if "ls" in full_names:
            ls = LsEstimator().fit(f_full)
        if "lmmse" in full_names:
            cov = estimate_covariance(
                system,
                config.cov_draws,
                derive_seed(config.seed, 12, point),
                n_paths=config.scenario.n_paths,
                range_bounds_m=config.scenario.range_bounds_m,
                sector_bounds_deg=config.scenario.sectors(system.n_users),
            )
            lmmse = LmmseEstimator().fit(f_full, cov)
    return _PointKit(
        system=system,
        omp=omp,
        f_compressed=f_compressed,
        f_full=f_full,
        ls=ls,
        lmmse=lmmse,
    )


@dataclass
class SweepResult:
    """In-memory view of a sweep: per-trial NMSE keyed by (axis, estimator)."""

    sweep_kind: str
    axis_values: list[float]
    records: dict[tuple[float, str], np.ndarray]

    def mean_nmse(self, axis_value: float, estimator: str) -> float:
        return float(np.mean(self.records[(axis_value, estimator)]))


def run_nmse_sweep(config: ExperimentConfig, out_dir: str) -> tuple[str, str, SweepResult]:
    """Monte-Carlo NMSE benchmark over the configured sweep axis.

    Writes `nmse_sweep.csv` (per-point summaries) and `nmse_trials.csv`
    (every trial) under `out_dir` and returns their paths plus the raw
    records. Within a trial all estimators score the same channel; the two
    sounding families (compressed for sparse recovery, full-rank orthonormal
    for LS/LMMSE) each have their own noise stream.
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg_hash = config_hash(config)
    if config.sweep.kind == "snr":
        points = [(float(v), config.system) for v in config.sweep.values]
    elif config.sweep.kind == "bandwidth":
        points = [
            (float(b), config.system.with_bandwidth(float(b)))
            for b in config.sweep.values
        ]
    else:
        points = [(float(config.snr_db), config.system)]

    records: dict[tuple[float, str], np.ndarray] = {}
    trial_rows = []
    summary_rows = []
    for p, (axis_value, system) in enumerate(points):
        kit = _prepare_point(config, system, p)
        snr_db = axis_value if config.sweep.kind == "snr" else float(config.snr_db)
        noise_var = 10.0 ** (-snr_db / 10.0)
        per_est = {name: np.empty(config.trials) for name in config.estimators}
        for t in range(config.trials):
            scenario = sample_scenario(
                system,
                config.scenario.n_paths,
                derive_seed(config.seed, 0, p, t),
                range_bounds_m=config.scenario.range_bounds_m,
                sector_bounds_deg=config.scenario.sectors(system.n_users),
            )
            tensor, _ = normalize_for_snr(synthesize_channel(scenario, system))
            frame_c = None
            if kit.f_compressed is not None:
                frame_c = sound(
                    tensor, kit.f_compressed, noise_var, derive_seed(config.seed, 1, p, t)
                )
            frame_f = None
            if kit.f_full is not None:
                frame_f = sound(
                    tensor, kit.f_full, noise_var, derive_seed(config.seed, 2, p, t)
                )
            for name in config.estimators:
                if name in OMP_ESTIMATORS:
                    est = kit.omp[name]
                    value = nmse(tensor, est.predict(frame_c))
                elif name == "ls":
                    value = nmse(tensor, kit.ls.predict(frame_f))
                else:
                    value = nmse(tensor, kit.lmmse.predict(frame_f))
                per_est[name][t] = value
                trial_rows.append([config.sweep.kind, axis_value, t, name, value])
        for name in config.estimators:
            values = per_est[name]
            records[(axis_value, name)] = values
            std = float(np.std(values, ddof=1)) if config.trials > 1 else 0.0
            summary_rows.append(
                [
                    config.sweep.kind,
                    axis_value,
                    name,
                    float(np.mean(values)),
                    std,
                    config.trials,
                ]
            )

    summary_path = os.path.join(out_dir, "nmse_sweep.csv")
    trials_path = os.path.join(out_dir, "nmse_trials.csv")
    write_csv(
        summary_path,
        "nmse-v1",
        cfg_hash,
        ["sweep", "axis_value", "estimator", "mean_nmse", "std_nmse", "trials"],
        summary_rows,
    )
    write_csv(
        trials_path,
        "nmse-trials-v1",
        cfg_hash,
        ["sweep", "axis_value", "trial", "estimator", "nmse"],
        trial_rows,
    )
    result = SweepResult(
        sweep_kind=config.sweep.kind,
        axis_values=[axis for axis, _ in points],
        records=records,
    )
    return summary_path, trials_path, result


def run_gain_map(config: ExperimentConfig, out_dir: str) -> tuple[str, str]:
    """Cartesian raster of a carrier-designed beam's gain per subcarrier.

    The beam is focused on the configured user; each listed subcarrier gets
    one raster layer plus a composite layer tagged m = -1. Writes
    `gain_map.csv` (x_m, y_m, m, gain; out-of-view cells carry nan) and
    `gain_map_markers.csv` (the user square and one peak triangle per layer,
    at the argmax cell of that layer).
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg_hash = config_hash(config)
    system = config.system
    spec = config.gain_map
    grid = system.subcarriers
    for m in spec.subcarriers:
        if not 0 <= m < system.n_subcarriers:
            raise ValueError(f"subcarrier index {m} outside [0, {system.n_subcarriers})")
    if spec.nx < 2 or spec.ny < 2:
        raise ValueError("gain map needs nx, ny >= 2")
    user = PolarPoint(
        sin_doa=math.sin(math.radians(spec.user_angle_deg)),
        range_m=spec.user_range_m,
    )
    # A user beyond the Fraunhofer distance is served with a plane-wave beam,
    # whose focus then drifts in angle only.
    u_farfield = user.range_m > fraunhofer_distance(system.geometry)
    xs = np.linspace(spec.x_min_m, spec.x_max_m, spec.nx)
    ys = np.linspace(spec.y_min_m, spec.y_max_m, spec.ny)
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    xf, yf = xg.ravel(), yg.ravel()
    r = np.hypot(xf, yf)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.where(r > 0, xf / np.maximum(r, 1e-300), 2.0)
    valid = (yf > 0) & (r > 1e-6) & (np.abs(phi) < SIN_DOA_LIMIT)

    layers: dict[int, np.ndarray] = {}
    for m in spec.subcarriers:
        gains = np.full(xf.shape, np.nan)
        gains[valid] = array_gain_profile(
            user, m, grid, system.geometry, phi[valid], r[valid],
            u_farfield=u_farfield,
        )
        layers[m] = gains
    composite = np.full(xf.shape, np.nan)
    composite[valid] = sum(layers[m][valid] for m in spec.subcarriers)
    layers[-1] = composite

    rows = []
    marker_rows = [["user", -1, user.sin_doa * user.range_m,
                    user.range_m * math.sqrt(1.0 - user.sin_doa**2)]]
    for m in [*spec.subcarriers, -1]:
        gains = layers[m]
        for i in range(xf.shape[0]):
            rows.append([xf[i], yf[i], m, gains[i]])
        peak = int(np.nanargmax(gains))
        marker_rows.append(["peak", m, xf[peak], yf[peak]])

    map_path = os.path.join(out_dir, "gain_map.csv")
    markers_path = os.path.join(out_dir, "gain_map_markers.csv")
    write_csv(map_path, "gainmap-v1", cfg_hash, ["x_m", "y_m", "m", "gain"], rows)
    write_csv(
        markers_path,
        "gainmap-markers-v1",
        cfg_hash,
        ["kind", "m", "x_m", "y_m"],
        marker_rows,
    )
    return map_path, markers_path


def run_fl_experiment(config: ExperimentConfig, out_dir: str) -> tuple[str, str]:
    """Label, train federated, evaluate per round, and account overheads.

    Writes `fl_trace.csv` (round, train_loss, eval_nmse; row 0 is the
    untrained model) and `fl_overhead.csv` with centralized/federated symbol
    counts for both label-shipping choices, from the reference inputs
    ("reference" rows) and from this run's actual sizes ("run" rows).
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg_hash = config_hash(config)
    system = config.system
    fl = config.fl
    dictionary = build_nba(_build_grid(system, config.grid), system)
    f_matrix = make_pilot_matrix(
        system.n_antennas, system.n_pilots, derive_seed(config.seed, 10),
        mode="random-phase",
    )
    datasets = build_datasets(
        system,
        fl.v_scenarios,
        fl.train_snrs_db,
        derive_seed(config.seed, 20),
        dictionary=dictionary,
        f_matrix=f_matrix,
        n_paths=fl.label_paths,
        augment=fl.augment,
        range_bounds_m=config.scenario.range_bounds_m,
    )
    eval_set = build_eval_set(
        system,
        fl.eval_samples,
        fl.eval_snr_db,
        derive_seed(config.seed, 21),
        dictionary=dictionary,
        f_matrix=f_matrix,
        datasets=datasets,
        n_paths=fl.label_paths,
        range_bounds_m=config.scenario.range_bounds_m,
    )
    net = NetSpec.for_config(system, hidden=fl.hidden)
    theta0 = init_params(net, derive_seed(config.seed, 22))
    eval_trace = np.empty(fl.n_rounds + 1)

    def score(t: int, theta: np.ndarray) -> None:
        eval_trace[t] = vector_nmse(
            predict_channels(theta, net, eval_set.inputs), eval_set.true_h
        )

    result = train(
        theta0,
        net,
        datasets,
        fl.n_rounds,
        fl.lr,
        batch=fl.batch,
        rng_seed=derive_seed(config.seed, 23),
        callback=score,
    )
    trace_rows = [
        [t, result.loss_trace[t], eval_trace[t]] for t in range(fl.n_rounds + 1)
    ]

    overhead_rows = []
    run_z = param_count(net)
    run_d = datasets[0].count
    for source, z, t, k, d_k, n_rf, n_ant in (
        ("reference", fl.ref_z, fl.ref_rounds, fl.ref_users, fl.ref_d_k,
         fl.ref_rf_chains, fl.ref_antennas),
        ("run", run_z, fl.n_rounds, system.n_users, run_d,
         system.n_rf_chains, system.n_antennas),
    ):
        t_fl = overhead_fl(z, t, k)
        for xi in (0, 1):
            t_cl = overhead_cl(k, d_k, n_rf, xi, n_ant)
            ratio = t_cl / t_fl if t_fl else float("inf")
            overhead_rows.append([source, xi, t_cl, t_fl, ratio])

    trace_path = os.path.join(out_dir, "fl_trace.csv")
    overhead_path = os.path.join(out_dir, "fl_overhead.csv")
    write_csv(
        trace_path, "fl-v1", cfg_hash, ["round", "train_loss", "eval_nmse"], trace_rows
    )
    write_csv(
        overhead_path,
        "overhead-v1",
        cfg_hash,
        ["source", "xi", "t_cl", "t_fl", "ratio"],
        overhead_rows,
    )
    return trace_path, overhead_path


def run_overhead_report(config: ExperimentConfig, out_dir: str) -> str:
    """Overhead CSV alone, without training: reference inputs + config-derived."""
    os.makedirs(out_dir, exist_ok=True)
    cfg_hash = config_hash(config)
    system = config.system
    fl = config.fl
    net = NetSpec.for_config(system, hidden=fl.hidden)
    cfg_d = (
        system.n_subcarriers * fl.v_scenarios * len(fl.train_snrs_db) * fl.augment
    )
    rows = []
    for source, z, t, k, d_k, n_rf, n_ant in (
        ("reference", fl.ref_z, fl.ref_rounds, fl.ref_users, fl.ref_d_k,
         fl.ref_rf_chains, fl.ref_antennas),
        ("config", param_count(net), fl.n_rounds, system.n_users, cfg_d,
         system.n_rf_chains, system.n_antennas),
    ):
        t_fl = overhead_fl(z, t, k)
        for xi in (0, 1):
            t_cl = overhead_cl(k, d_k, n_rf, xi, n_ant)
            ratio = t_cl / t_fl if t_fl else float("inf")
            rows.append([source, xi, t_cl, t_fl, ratio])
    path = os.path.join(out_dir, "overhead.csv")
    write_csv(path, "overhead-v1", cfg_hash, ["source", "xi", "t_cl", "t_fl", "ratio"], rows)
    return path
