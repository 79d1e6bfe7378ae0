"""Federated training of a channel-regression network on OMP-labeled data.

Each user holds a local dataset of pilot observations: inputs are (P, 3) real
feature maps [Re y, Im y, angle y], labels are the 2N-real stacked
[Re h_hat; Im h_hat] produced by the sparse estimator on noiseless pilots.
A small fully-connected network is trained by federated averaging: every
round each user computes a full-batch gradient of its local mean squared
error and the server averages the K gradients into one descent step.

The network and its reverse-mode gradients are written directly in numpy
(float64 throughout) so the federated-vs-centralized equivalence and
finite-difference checks can be made exact to near machine precision.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import normalize_for_snr, sample_scenario, synthesize_channel
from .config import SystemConfig
from .dictionary import SteeringDictionary
from .estimators import omp_run, sound
from .validation import check_seed

# Abort training when the loss exceeds this multiple of its initial value.
DIVERGENCE_FACTOR = 1e6

_PARAMS_MAGIC = b"NSFLPRM1"
_DATASET_MAGIC = b"NSFLDAT1"


@dataclass(frozen=True)
class NetSpec:
    """Fully-connected architecture: n_inputs -> hidden... -> n_outputs.

    Hidden layers use rectifier activations; the output layer is linear.
    Inputs arrive as (P, 3) feature maps and are flattened, so
    n_inputs = 3 * P; outputs stack the real and imaginary channel parts,
    so n_outputs = 2 * N.
    """

    n_inputs: int
    n_outputs: int
    hidden: tuple[int, ...] = (1024, 1024)

    def __post_init__(self) -> None:
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise ValueError("n_inputs and n_outputs must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be >= 1")

    @classmethod
    def for_config(
        cls, cfg: SystemConfig, hidden: tuple[int, ...] = (1024, 1024)
    ) -> "NetSpec":
        return cls(
            n_inputs=3 * cfg.n_pilots,
            n_outputs=2 * cfg.n_antennas,
            hidden=tuple(hidden),
        )

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.n_inputs, *self.hidden, self.n_outputs)


def param_count(spec: NetSpec) -> int:
    """Number of learnable scalars: sum over layers of (fan_in + 1) * fan_out."""
    sizes = spec.layer_sizes
    return sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))


def init_params(spec: NetSpec, rng_seed: int) -> np.ndarray:
    """Flat parameter vector; scaled normal weights, zero biases.

    Hidden weights use std sqrt(2 / fan_in) (rectifier-friendly), the linear
    output layer uses std sqrt(1 / fan_in).
    """
    check_seed(rng_seed)
    rng = np.random.default_rng(rng_seed)
    sizes = spec.layer_sizes
    chunks: list[np.ndarray] = []
    n_layers = len(sizes) - 1
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        std = math.sqrt((2.0 if i < n_layers - 1 else 1.0) / fan_in)
        chunks.append(rng.standard_normal(fan_in * fan_out) * std)
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def _views(theta: np.ndarray, spec: NetSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """(W, b) views into the flat vector, one pair per layer. No copies."""
    if theta.shape != (param_count(spec),):
        raise ValueError(
            f"theta length {theta.shape} != parameter count {param_count(spec)}"
        )
    sizes = spec.layer_sizes
    layers = []
    pos = 0
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        w = theta[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = theta[pos : pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def _as_batch(x: np.ndarray, spec: NetSpec) -> np.ndarray:
    """Coerce (D, P, 3) or (D, n_inputs) inputs to a (D, n_inputs) batch."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.reshape(arr.shape[0], -1)
    if arr.ndim != 2 or arr.shape[1] != spec.n_inputs:
        raise ValueError(
            f"inputs must flatten to (D, {spec.n_inputs}), got shape {np.shape(x)}"
        )
    if arr.shape[0] < 1:
        raise ValueError("empty input batch")
    return arr


def model_forward(
    theta: np.ndarray,
    spec: NetSpec,
    x: np.ndarray,
    *,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Deterministic forward pass, (D, n_outputs).

    Dropout is a training-mode option: it requires an explicit generator and
    uses inverted scaling so the expected activation is unchanged.
    """
    a = _as_batch(x, spec)
    if dropout_rate > 0.0 and rng is None:
        raise ValueError("dropout requires an explicit rng (training mode only)")
    layers = _views(np.asarray(theta, dtype=np.float64), spec)
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        if i < len(layers) - 1:
            a = np.maximum(z, 0.0)
            if dropout_rate > 0.0:
                mask = (rng.random(a.shape) >= dropout_rate) / (1.0 - dropout_rate)
                a = a * mask
        else:
            a = z
    return a


def model_loss(
    theta: np.ndarray, spec: NetSpec, inputs: np.ndarray, labels: np.ndarray
) -> float:
    """(1/D) sum_i ||f(x_i) - y_i||^2."""
    out = model_forward(theta, spec, inputs)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != out.shape:
        raise ValueError(f"labels shape {y.shape} != outputs shape {out.shape}")
    return float(np.sum((out - y) ** 2) / out.shape[0])


def model_loss_and_gradient(
    theta: np.ndarray,
    spec: NetSpec,
    inputs: np.ndarray,
    labels: np.ndarray,
    *,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray]:
    """Loss and its exact reverse-mode gradient as one flat vector."""
    theta = np.asarray(theta, dtype=np.float64)
    x = _as_batch(inputs, spec)
    y = np.asarray(labels, dtype=np.float64)
    if dropout_rate > 0.0 and rng is None:
        raise ValueError("dropout requires an explicit rng (training mode only)")
    layers = _views(theta, spec)
    n_layers = len(layers)

    activations = [x]
    masks: list[np.ndarray | None] = []
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        if i < n_layers - 1:
            a = np.maximum(z, 0.0)
            if dropout_rate > 0.0:
                mask = (rng.random(a.shape) >= dropout_rate) / (1.0 - dropout_rate)
                a = a * mask
                masks.append(mask)
            else:
                masks.append(None)
        else:
            a = z
        activations.append(a)

    out = activations[-1]
    if y.shape != out.shape:
        raise ValueError(f"labels shape {y.shape} != outputs shape {out.shape}")
    d = out.shape[0]
    diff = out - y
    loss = float(np.sum(diff**2) / d)

    grad = np.zeros_like(theta)
    grad_layers = _views(grad, spec)
    delta = (2.0 / d) * diff
    for i in range(n_layers - 1, -1, -1):
        w, _ = layers[i]
        gw, gb = grad_layers[i]
        gw += activations[i].T @ delta
        gb += delta.sum(axis=0)
        if i > 0:
            delta = delta @ w.T
            if masks[i - 1] is not None:
                delta = delta * masks[i - 1]
            delta = delta * (activations[i] > 0.0)
    return loss, grad


@dataclass
class LocalDataset:
    """One user's training shard plus the feature standardization it used."""

    owner: int
    inputs: np.ndarray  # (D, P, 3) float64, standardized
    labels: np.ndarray  # (D, 2N) float64
    feature_mean: np.ndarray  # (3,)
    feature_std: np.ndarray  # (3,)

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        self.feature_mean = np.asarray(self.feature_mean, dtype=np.float64)
        self.feature_std = np.asarray(self.feature_std, dtype=np.float64)
        if self.inputs.ndim != 3 or self.inputs.shape[2] != 3:
            raise ValueError(f"inputs must be (D, P, 3), got {self.inputs.shape}")
        if self.labels.ndim != 2 or self.labels.shape[0] != self.inputs.shape[0]:
            raise ValueError("labels count must match inputs count")
        if self.feature_mean.shape != (3,) or self.feature_std.shape != (3,):
            raise ValueError("feature stats must have shape (3,)")
        if np.any(self.feature_std <= 0):
            raise ValueError("feature_std entries must be positive")

    @property
    def count(self) -> int:
        return self.inputs.shape[0]


def local_gradient(
    theta: np.ndarray,
    spec: NetSpec,
    dataset: LocalDataset,
    *,
    batch: int | None = None,
    rng: np.random.Generator | None = None,
    dropout_rate: float = 0.0,
) -> np.ndarray:
    """Gradient of the user's mean squared error; full batch by default."""
    if dataset.count == 0:
        raise ValueError("empty dataset")
    x, y = dataset.inputs, dataset.labels
    if batch is not None:
        if rng is None:
            raise ValueError("mini-batching requires an explicit rng")
        if not 1 <= batch <= dataset.count:
            raise ValueError(f"batch must be in [1, {dataset.count}], got {batch}")
        idx = rng.choice(dataset.count, size=batch, replace=False)
        x, y = x[idx], y[idx]
    _, grad = model_loss_and_gradient(
        theta, spec, x, y, dropout_rate=dropout_rate, rng=rng
    )
    return grad


def fedavg_round(
    theta: np.ndarray, gradients: Sequence[np.ndarray], lr: float
) -> np.ndarray:
    """One server step: theta - lr * (unweighted mean of user gradients)."""
    if len(gradients) == 0:
        raise ValueError("need at least one gradient")
    if lr < 0.0:
        raise ValueError(f"lr must be >= 0, got {lr}")
    stack = np.stack([np.asarray(g, dtype=np.float64) for g in gradients])
    if stack.shape[1:] != np.shape(theta):
        raise ValueError("gradient length != parameter length")
    return np.asarray(theta, dtype=np.float64) - lr * stack.mean(axis=0)


@dataclass
class TrainResult:
    theta: np.ndarray
    loss_trace: np.ndarray  # (n_rounds + 1,), entry t is the loss at theta_t


def train(
    theta0: np.ndarray,
    spec: NetSpec,
    datasets: Sequence[LocalDataset],
    n_rounds: int,
    lr: float,
    *,
    batch: int | None = None,
    dropout_rate: float = 0.0,
    rng_seed: int = 0,
    callback=None,
) -> TrainResult:
    """Federated averaging over the given users.

    Each round every user computes a local gradient at the current
    parameters; the server applies their unweighted mean. The loss trace
    holds the across-user mean of local losses at theta_0 ... theta_T.
    `callback(t, theta_t)`, when given, fires at t = 0 and after each round.
    Raises if the loss exceeds 1e6 times its initial value.
    """
    if n_rounds < 0:
        raise ValueError(f"n_rounds must be >= 0, got {n_rounds}")
    if len(datasets) == 0:
        raise ValueError("need at least one user dataset")
    check_seed(rng_seed)
    rng = np.random.default_rng(rng_seed)
    theta = np.array(theta0, dtype=np.float64, copy=True)

    def mean_loss(th: np.ndarray) -> float:
        return float(
            np.mean([model_loss(th, spec, ds.inputs, ds.labels) for ds in datasets])
        )

    trace = np.empty(n_rounds + 1)
    trace[0] = mean_loss(theta)
    if callback is not None:
        callback(0, theta)
    guard = DIVERGENCE_FACTOR * max(trace[0], np.finfo(np.float64).tiny)
    for t in range(n_rounds):
        grads = [
            local_gradient(
                theta, spec, ds, batch=batch, rng=rng, dropout_rate=dropout_rate
            )
            for ds in datasets
        ]
        theta = fedavg_round(theta, grads, lr)
        trace[t + 1] = mean_loss(theta)
        if callback is not None:
            callback(t + 1, theta)
        if not math.isfinite(trace[t + 1]) or trace[t + 1] > guard:
            raise RuntimeError(
                f"training diverged at round {t + 1}: loss {trace[t + 1]:.3e} "
                f"exceeds {DIVERGENCE_FACTOR:.0e} x initial {trace[0]:.3e}"
            )
    return TrainResult(theta=theta, loss_trace=trace)


def train_centralized(
    theta0: np.ndarray,
    spec: NetSpec,
    inputs: np.ndarray,
    labels: np.ndarray,
    n_rounds: int,
    lr: float,
) -> TrainResult:
    """Plain full-batch gradient descent on one pooled dataset."""
    if n_rounds < 0:
        raise ValueError(f"n_rounds must be >= 0, got {n_rounds}")
    theta = np.array(theta0, dtype=np.float64, copy=True)
    trace = np.empty(n_rounds + 1)
    loss, grad = model_loss_and_gradient(theta, spec, inputs, labels)
    trace[0] = loss
    guard = DIVERGENCE_FACTOR * max(trace[0], np.finfo(np.float64).tiny)
    for t in range(n_rounds):
        theta = theta - lr * grad
        loss, grad = model_loss_and_gradient(theta, spec, inputs, labels)
        trace[t + 1] = loss
        if not math.isfinite(loss) or loss > guard:
            raise RuntimeError(
                f"training diverged at round {t + 1}: loss {loss:.3e} "
                f"exceeds {DIVERGENCE_FACTOR:.0e} x initial {trace[0]:.3e}"
            )
    return TrainResult(theta=theta, loss_trace=trace)


def features_from_measurements(y: np.ndarray) -> np.ndarray:
    """Stack [Re y, Im y, angle y] along a trailing axis of size 3."""
    y = np.asarray(y, dtype=np.complex128)
    return np.stack([y.real, y.imag, np.angle(y)], axis=-1)


def user_sectors_deg(n_users: int) -> list[tuple[float, float]]:
    """Disjoint angular sectors: user k owns [-90 + 180 k/K, -90 + 180 (k+1)/K)."""
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    width = 180.0 / n_users
    return [(-90.0 + width * k, -90.0 + width * (k + 1)) for k in range(n_users)]


def build_datasets(
    cfg: SystemConfig,
    v_scenarios: int,
    train_snrs_db: Sequence[float],
    rng_seed: int,
    *,
    dictionary: SteeringDictionary,
    f_matrix: np.ndarray,
    n_paths: int = 3,
    augment: int = 1,
    range_bounds_m: tuple[float, float] = (5.0, 30.0),
) -> list[LocalDataset]:
    """Per-user training shards labeled by the sparse estimator.

    Draws `v_scenarios` channel realizations with user k's paths confined to
    its own angular sector. Labels come from one sparse-recovery run on
    noiseless pilots per realization; inputs are `augment` independent noisy
    soundings at each training SNR. Every (user, subcarrier, realization,
    SNR, augmentation) tuple contributes one sample, so
    D_k = M * V * |snrs| * augment. Features are standardized per user and
    per channel; the statistics ride along on the dataset.
    """
    if v_scenarios < 1:
        raise ValueError(f"v_scenarios must be >= 1, got {v_scenarios}")
    if len(train_snrs_db) == 0:
        raise ValueError("train_snrs_db must not be empty")
    if augment < 1:
        raise ValueError(f"augment must be >= 1, got {augment}")
    check_seed(rng_seed)
    sectors = user_sectors_deg(cfg.n_users)
    root = np.random.SeedSequence(rng_seed)
    scen_seeds = root.generate_state(v_scenarios)
    noise_root = np.random.SeedSequence(entropy=rng_seed, spawn_key=(1,))
    noise_seeds = noise_root.generate_state(
        v_scenarios * len(train_snrs_db) * augment
    )

    k_count = cfg.n_users
    m_count = cfg.n_subcarriers
    raw_inputs: list[list[np.ndarray]] = [[] for _ in range(k_count)]
    all_labels: list[list[np.ndarray]] = [[] for _ in range(k_count)]
    noise_i = 0
    for v in range(v_scenarios):
        scenario = sample_scenario(
            cfg,
            n_paths,
            int(scen_seeds[v]),
            range_bounds_m=range_bounds_m,
            sector_bounds_deg=sectors,
        )
        tensor, _ = normalize_for_snr(synthesize_channel(scenario, cfg))
        clean = sound(tensor, f_matrix, 0.0, 0)
        report = omp_run(clean, dictionary, n_paths)
        h_hat = report.h_hat.h  # (K, M, N)
        labels = np.concatenate([h_hat.real, h_hat.imag], axis=2)  # (K, M, 2N)
        for snr_db in train_snrs_db:
            noise_var = 10.0 ** (-float(snr_db) / 10.0)
            for _ in range(augment):
                frame = sound(tensor, f_matrix, noise_var, int(noise_seeds[noise_i]))
                noise_i += 1
                feats = features_from_measurements(frame.y)  # (K, M, P, 3)
                for k in range(k_count):
                    for m in range(m_count):
                        raw_inputs[k].append(feats[k, m])
                        all_labels[k].append(labels[k, m])

    datasets = []
    for k in range(k_count):
        x = np.stack(raw_inputs[k])  # (D, P, 3)
        y = np.stack(all_labels[k])  # (D, 2N)
        mean = x.mean(axis=(0, 1))
        std = x.std(axis=(0, 1))
        std = np.where(std < 1e-12, 1.0, std)
        datasets.append(
            LocalDataset(
                owner=k,
                inputs=(x - mean) / std,
                labels=y,
                feature_mean=mean,
                feature_std=std,
            )
        )
    return datasets


@dataclass
class EvalSet:
    """Held-out samples with ground truth for scoring a trained model."""

    inputs: np.ndarray  # (D, P, 3), standardized with the owners' stats
    labels: np.ndarray  # (D, 2N) estimator labels
    true_h: np.ndarray  # (D, N) complex ground-truth channels

    def __post_init__(self) -> None:
        if not (
            self.inputs.shape[0] == self.labels.shape[0] == self.true_h.shape[0]
        ):
            raise ValueError("eval arrays must agree on sample count")

    @property
    def count(self) -> int:
        return self.inputs.shape[0]


def build_eval_set(
    cfg: SystemConfig,
    n_samples: int,
    snr_db: float,
    rng_seed: int,
    *,
    dictionary: SteeringDictionary,
    f_matrix: np.ndarray,
    datasets: Sequence[LocalDataset],
    n_paths: int = 3,
    range_bounds_m: tuple[float, float] = (5.0, 30.0),
) -> EvalSet:
    """Fresh scenarios, same per-user sectors and standardization as training."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if len(datasets) != cfg.n_users:
        raise ValueError("need one training dataset per user for the stats")
    check_seed(rng_seed)
    sectors = user_sectors_deg(cfg.n_users)
    per_real = cfg.n_users * cfg.n_subcarriers
    n_real = -(-n_samples // per_real)
    root = np.random.SeedSequence(entropy=rng_seed, spawn_key=(2,))
    seeds = root.generate_state(2 * n_real)
    noise_var = 10.0 ** (-float(snr_db) / 10.0)

    inputs, labels, truths = [], [], []
    for v in range(n_real):
        scenario = sample_scenario(
            cfg,
            n_paths,
            int(seeds[2 * v]),
            range_bounds_m=range_bounds_m,
            sector_bounds_deg=sectors,
        )
        tensor, _ = normalize_for_snr(synthesize_channel(scenario, cfg))
        clean = sound(tensor, f_matrix, 0.0, 0)
        report = omp_run(clean, dictionary, n_paths)
        h_hat = report.h_hat.h
        lab = np.concatenate([h_hat.real, h_hat.imag], axis=2)
        frame = sound(tensor, f_matrix, noise_var, int(seeds[2 * v + 1]))
        feats = features_from_measurements(frame.y)
        for k in range(cfg.n_users):
            ds = datasets[k]
            for m in range(cfg.n_subcarriers):
                inputs.append((feats[k, m] - ds.feature_mean) / ds.feature_std)
                labels.append(lab[k, m])
                truths.append(tensor.h[k, m])
    return EvalSet(
        inputs=np.stack(inputs)[:n_samples],
        labels=np.stack(labels)[:n_samples],
        true_h=np.stack(truths)[:n_samples],
    )


def channels_from_stacked(stacked: np.ndarray) -> np.ndarray:
    """Invert the [Re; Im] stacking: (D, 2N) real -> (D, N) complex."""
    arr = np.asarray(stacked, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] % 2 != 0:
        raise ValueError(f"expected (D, 2N) real array, got {arr.shape}")
    n = arr.shape[1] // 2
    return arr[:, :n] + 1j * arr[:, n:]


def predict_channels(
    theta: np.ndarray, spec: NetSpec, inputs: np.ndarray
) -> np.ndarray:
    """Trained-model channel estimates as complex (D, N) vectors."""
    return channels_from_stacked(model_forward(theta, spec, inputs))


def vector_nmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean over samples of ||pred - truth||^2 / ||truth||^2."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    err = np.sum(np.abs(pred - truth) ** 2, axis=-1)
    ref = np.sum(np.abs(truth) ** 2, axis=-1)
    if np.any(ref <= 0):
        raise ValueError("zero-energy truth vector")
    return float(np.mean(err / ref))


def _as_exact_int(value, name: str) -> int:
    as_int = int(value)
    if as_int != value:
        raise ValueError(f"{name} must be an integer, got {value}")
    return as_int


def overhead_cl(
    n_users: int,
    d_k,
    n_rf_chains: int,
    xi: int,
    n_antennas: int = 0,
) -> int:
    """Symbols to ship every user's dataset to a server.

    sum_k D_k (3 N_RF + xi * 2 N); `d_k` is one shared count or a per-user
    sequence. With xi = 0 the label term vanishes and N is irrelevant.
    """
    if xi not in (0, 1):
        raise ValueError(f"xi must be 0 or 1, got {xi}")
    if n_users < 1 or n_rf_chains < 1:
        raise ValueError("n_users and n_rf_chains must be >= 1")
    if xi == 1 and n_antennas < 1:
        raise ValueError("xi = 1 requires n_antennas >= 1")
    counts = (
        [_as_exact_int(d_k, "d_k")] * n_users
        if np.isscalar(d_k)
        else [_as_exact_int(d, "d_k") for d in d_k]
    )
    if len(counts) != n_users:
        raise ValueError(f"need {n_users} dataset sizes, got {len(counts)}")
    if any(d < 1 for d in counts):
        raise ValueError("dataset sizes must be >= 1")
    per_sample = 3 * n_rf_chains + xi * 2 * n_antennas
    return sum(d * per_sample for d in counts)


def overhead_fl(z: int, t: int, k: int) -> int:
    """Symbols for two-way model exchange over training: 2 Z T K."""
    z = _as_exact_int(z, "z")
    t = _as_exact_int(t, "t")
    k = _as_exact_int(k, "k")
    if z < 1 or k < 1 or t < 0:
        raise ValueError("need z >= 1, k >= 1, t >= 0")
    return 2 * z * t * k


def save_params(path: str, theta: np.ndarray, spec: NetSpec) -> None:
    """Flat binary: magic, layer count, layer sizes, little-endian float64."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (param_count(spec),):
        raise ValueError("theta length does not match the architecture")
    sizes = spec.layer_sizes
    with open(path, "wb") as fh:
        fh.write(_PARAMS_MAGIC)
        fh.write(struct.pack("<Q", len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}Q", *sizes))
        fh.write(theta.astype("<f8").tobytes())


def load_params(path: str) -> tuple[np.ndarray, NetSpec]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _PARAMS_MAGIC:
            raise ValueError(f"not a parameter file (magic {magic!r})")
        (n_sizes,) = struct.unpack("<Q", fh.read(8))
        sizes = struct.unpack(f"<{n_sizes}Q", fh.read(8 * n_sizes))
        spec = NetSpec(
            n_inputs=sizes[0], n_outputs=sizes[-1], hidden=tuple(sizes[1:-1])
        )
        theta = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    if theta.shape != (param_count(spec),):
        raise ValueError("parameter payload length does not match the header")
    return theta, spec


def save_dataset(path: str, dataset: LocalDataset) -> None:
    """Flat binary: magic, owner, D, P, 2N, inputs, labels, feature stats."""
    d, p, _ = dataset.inputs.shape
    n_out = dataset.labels.shape[1]
    with open(path, "wb") as fh:
        fh.write(_DATASET_MAGIC)
        fh.write(struct.pack("<4Q", dataset.owner, d, p, n_out))
        fh.write(dataset.inputs.astype("<f8").tobytes())
        fh.write(dataset.labels.astype("<f8").tobytes())
        fh.write(dataset.feature_mean.astype("<f8").tobytes())
        fh.write(dataset.feature_std.astype("<f8").tobytes())


def load_dataset(path: str) -> LocalDataset:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _DATASET_MAGIC:
            raise ValueError(f"not a dataset file (magic {magic!r})")
        owner, d, p, n_out = struct.unpack("<4Q", fh.read(32))
        inputs = np.frombuffer(fh.read(8 * d * p * 3), dtype="<f8").reshape(d, p, 3)
        labels = np.frombuffer(fh.read(8 * d * n_out), dtype="<f8").reshape(d, n_out)
        mean = np.frombuffer(fh.read(24), dtype="<f8")
        std = np.frombuffer(fh.read(24), dtype="<f8")
    return LocalDataset(
        owner=int(owner),
        inputs=inputs.astype(np.float64),
        labels=labels.astype(np.float64),
        feature_mean=mean.astype(np.float64),
        feature_std=std.astype(np.float64),
    )
