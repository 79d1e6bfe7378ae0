"""Pilot sounding and channel estimators: LS, LMMSE, and greedy sparse OMP.

The OMP engine selects support on the shared physical grid by accumulating
correlation magnitudes over all subcarriers, so a selected index means the
same (direction, range) at every subcarrier regardless of which dictionary
kind supplied the atoms. Duplicate selections are masked out. Per-subcarrier
path weights are refit by least squares against the compressed atoms, and the
channel is rebuilt from steering vectors at the recovered points.

Estimators follow the fit/predict convention: `fit` binds the pilot matrix
(and, for LMMSE, a bank of channel draws), `predict` maps a sounded frame to
a (K, M, N) channel estimate.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .channel import ChannelTensor, normalize_for_snr, sample_scenario, synthesize_channel
from .config import SystemConfig
from .dictionary import SteeringDictionary
from .validation import as_complex_matrix, check_nonnegative, check_seed
from .wavefield import PolarPoint, farfield_steering_vector, steering_vector

# Relative singular-value floor for every pseudo-inverse in this module.
SV_FLOOR = 1e-10


@dataclass
class PilotFrame:
    """One sounding result: the pilot matrix, its noise level, and outputs."""

    f_matrix: np.ndarray  # (P, N)
    noise_var: float
    y: np.ndarray  # (K, M, P)

    def __post_init__(self) -> None:
        self.f_matrix = as_complex_matrix(self.f_matrix, "f_matrix")
        check_nonnegative(self.noise_var, "noise_var")
        y = np.asarray(self.y, dtype=np.complex128)
        if y.ndim != 3:
            raise ValueError(f"y must be (K, M, P), got shape {y.shape}")
        if y.shape[2] != self.f_matrix.shape[0]:
            raise ValueError(
                f"y pilot dimension {y.shape[2]} != pilot matrix rows "
                f"{self.f_matrix.shape[0]}"
            )
        self.y = y

    @property
    def n_users(self) -> int:
        return self.y.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.y.shape[1]


def make_pilot_matrix(
    n_antennas: int,
    n_pilots: int,
    rng_seed: int,
    *,
    mode: str = "random-phase",
) -> np.ndarray:
    """Pilot combining matrix F of shape (P, N).

    "random-phase": entries (1/sqrt(N)) e^{j psi}, psi ~ U[0, 2 pi) — the
    constant-modulus analog beams used for compressed sounding.
    "orthonormal": F^H F = I_N (requires P >= N); the idealized full-rank
    sounding the LS/LMMSE baselines assume.
    """
    check_seed(rng_seed)
    if n_antennas < 1 or n_pilots < 1:
        raise ValueError("n_antennas and n_pilots must be >= 1")
    rng = np.random.default_rng(rng_seed)
    if mode == "random-phase":
        psi = rng.uniform(0.0, 2.0 * math.pi, size=(n_pilots, n_antennas))
        return np.exp(1j * psi) / math.sqrt(n_antennas)
    if mode == "orthonormal":
        if n_pilots < n_antennas:
            raise ValueError("orthonormal mode requires n_pilots >= n_antennas")
        a = rng.standard_normal((n_pilots, n_antennas)) + 1j * rng.standard_normal(
            (n_pilots, n_antennas)
        )
        q, _ = np.linalg.qr(a)
        return q[:, :n_antennas] if q.shape[1] >= n_antennas else q
    raise ValueError(f"mode must be 'random-phase' or 'orthonormal', got {mode!r}")


def sound(
    tensor: ChannelTensor,
    f_matrix: np.ndarray,
    noise_var: float,
    rng_seed: int,
) -> PilotFrame:
    """Apply the pilot matrix and add circular complex Gaussian noise.

    y_k[m] = F h_k[m] + w, w ~ CN(0, noise_var I_P). Deterministic per seed.
    """
    f = as_complex_matrix(f_matrix, "f_matrix")
    check_nonnegative(noise_var, "noise_var")
    check_seed(rng_seed)
    if f.shape[1] != tensor.n_antennas:
        raise ValueError(
            f"pilot matrix columns {f.shape[1]} != antennas {tensor.n_antennas}"
        )
    y = np.einsum("pn,kmn->kmp", f, tensor.h)
    if noise_var > 0.0:
        rng = np.random.default_rng(rng_seed)
        sigma = math.sqrt(noise_var / 2.0)
        w = sigma * (
            rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        )
        y = y + w
    return PilotFrame(f_matrix=f, noise_var=noise_var, y=y)


def nmse_per_user(truth: ChannelTensor, estimate: np.ndarray | ChannelTensor) -> np.ndarray:
    """Per-user sum_m ||h_hat - h||^2 / sum_m ||h||^2."""
    est = estimate.h if isinstance(estimate, ChannelTensor) else np.asarray(estimate)
    if est.shape != truth.h.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.h.shape}")
    err = np.sum(np.abs(est - truth.h) ** 2, axis=(1, 2))
    ref = np.sum(np.abs(truth.h) ** 2, axis=(1, 2))
    if np.any(ref <= 0):
        raise ValueError("true channel has a zero-energy user")
    return err / ref


def nmse(truth: ChannelTensor, estimate: np.ndarray | ChannelTensor) -> float:
    """Mean over users of the per-user normalized squared error."""
    return float(np.mean(nmse_per_user(truth, estimate)))


@dataclass
class EstimateReport:
    """Everything a sparse estimator recovered, plus the rebuilt channel."""

    h_hat: ChannelTensor
    supports: np.ndarray  # (K, L) grid indices
    sin_doas: np.ndarray  # (K, L)
    ranges_m: np.ndarray  # (K, L), inf for plane-wave atoms
    delta_sin_doa: np.ndarray  # (K, L, M) per-subcarrier focus offsets
    delta_range_m: np.ndarray  # (K, L, M)
    nmse: np.ndarray | None = None  # (K,), filled once truth is available

    def __post_init__(self) -> None:
        if self.nmse is not None and np.any(np.asarray(self.nmse) < 0):
            raise ValueError("nmse must be non-negative")

    def scored_against(self, truth: ChannelTensor) -> "EstimateReport":
        """Copy of this report with the per-user NMSE filled in."""
        return EstimateReport(
            h_hat=self.h_hat,
            supports=self.supports,
            sin_doas=self.sin_doas,
            ranges_m=self.ranges_m,
            delta_sin_doa=self.delta_sin_doa,
            delta_range_m=self.delta_range_m,
            nmse=nmse_per_user(truth, self.h_hat),
        )

    def to_json(self) -> str:
        doc = {
            "kind": "nearsplit-estimate-report",
            "version": 1,
            "supports": self.supports.tolist(),
            "sin_doas": self.sin_doas.tolist(),
            "ranges_m": self.ranges_m.tolist(),
            "delta_sin_doa": self.delta_sin_doa.tolist(),
            "delta_range_m": self.delta_range_m.tolist(),
            "nmse": None if self.nmse is None else np.asarray(self.nmse).tolist(),
            "h_hat_re": self.h_hat.h.real.tolist(),
            "h_hat_im": self.h_hat.h.imag.tolist(),
        }
        return json.dumps(doc)


def report_from_json(text: str) -> EstimateReport:
    doc = json.loads(text)
    if doc.get("kind") != "nearsplit-estimate-report":
        raise ValueError("not an estimate-report document")
    h = np.asarray(doc["h_hat_re"], dtype=np.float64) + 1j * np.asarray(
        doc["h_hat_im"], dtype=np.float64
    )
    return EstimateReport(
        h_hat=ChannelTensor(h=h),
        supports=np.asarray(doc["supports"], dtype=np.int64),
        sin_doas=np.asarray(doc["sin_doas"], dtype=np.float64),
        ranges_m=np.asarray(doc["ranges_m"], dtype=np.float64),
        delta_sin_doa=np.asarray(doc["delta_sin_doa"], dtype=np.float64),
        delta_range_m=np.asarray(doc["delta_range_m"], dtype=np.float64),
        nmse=None if doc["nmse"] is None else np.asarray(doc["nmse"], dtype=np.float64),
    )


def _focus_deltas(
    sin_doa: float, range_m: float, etas: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-subcarrier (delta_phi, delta_r) of a recovered point.

    Same expressions as `wavefield.nb_deltas`, evaluated in closed form so
    points whose focus leaves the visible region at some subcarrier still get
    a (extrapolated) value instead of an error; plane-wave points (infinite
    range) report NaN range offsets.
    """
    d_phi = (etas - 1.0) * sin_doa
    if not math.isfinite(range_m):
        return d_phi, np.full(etas.shape, np.nan)
    ratio = (1.0 - (etas * sin_doa) ** 2) / (etas * (1.0 - sin_doa**2))
    return d_phi, (ratio - 1.0) * range_m


def reconstruct(
    frame: PilotFrame,
    dictionary: SteeringDictionary,
    supports: np.ndarray,
    *,
    reconstruction: str = "sd-exact",
    sv_floor: float = SV_FLOOR,
) -> ChannelTensor:
    """Rebuild channels from recovered grid points and the sounded frame.

    For each user and subcarrier, the path weights u = Psi_m^+ y are refit
    against the compressed dictionary atoms Psi_m = F C_m[:, support], then
    h_hat[m] = Xi_m u with Xi_m holding steering vectors at the recovered
    physical points: exact spherical phases at the subcarrier frequency
    ("sd-exact") or at the carrier ("si-carrier"); plane-wave columns for
    points recovered without a range.
    """
    if reconstruction not in ("sd-exact", "si-carrier"):
        raise ValueError(f"unknown reconstruction mode {reconstruction!r}")
    supports = np.asarray(supports, dtype=np.int64)
    if supports.ndim != 2 or supports.shape[0] != frame.n_users:
        raise ValueError("supports must be (K, L)")
    cfg = dictionary.cfg
    geom = cfg.geometry
    freqs = cfg.subcarriers.freqs_hz
    m_count = frame.n_subcarriers
    if m_count != dictionary.n_subcarriers:
        raise ValueError("frame and dictionary disagree on subcarrier count")
    f = frame.f_matrix
    n_paths = supports.shape[1]
    h_hat = np.zeros((frame.n_users, m_count, cfg.n_antennas), dtype=np.complex128)
    for k in range(frame.n_users):
        points = [dictionary.recovered_point(int(q)) for q in supports[k]]
        for m in range(m_count):
            atom_freq = freqs[m] if reconstruction == "sd-exact" else cfg.carrier_hz
            psi = f @ dictionary.atoms(m)[:, supports[k]]  # (P, L)
            coef, *_ = np.linalg.lstsq(psi, frame.y[k, m], rcond=sv_floor)
            xi = np.empty((cfg.n_antennas, n_paths), dtype=np.complex128)
            for l, (phi, r) in enumerate(points):
                if math.isfinite(r):
                    xi[:, l] = steering_vector(
                        PolarPoint(sin_doa=phi, range_m=r), float(atom_freq), geom
                    )
                else:
                    xi[:, l] = farfield_steering_vector(phi, float(atom_freq), geom)
            h_hat[k, m] = xi @ coef
    return ChannelTensor(h=h_hat)


class OmpEstimator(BaseEstimator):
    """Greedy sparse recovery against a steering dictionary.

    Parameters
    ----------
    dictionary : the atom bank (split-aware or carrier-built).
    n_paths : number of grid points to select per user.
    reconstruction : steering model for the rebuilt channel, "sd-exact"
        (default) or "si-carrier".
    sv_floor : relative singular-value floor for the internal least squares.
    """

    def __init__(
        self,
        dictionary: SteeringDictionary | None = None,
        n_paths: int = 3,
        reconstruction: str = "sd-exact",
        sv_floor: float = SV_FLOOR,
    ):
        self.dictionary = dictionary
        self.n_paths = n_paths
        self.reconstruction = reconstruction
        self.sv_floor = sv_floor

    def fit(self, f_matrix: np.ndarray, y=None) -> "OmpEstimator":
        """Bind the pilot matrix and project the atom bank through it."""
        if self.dictionary is None:
            raise ValueError("OmpEstimator needs a dictionary")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        f = as_complex_matrix(f_matrix, "f_matrix")
        if f.shape[1] != self.dictionary.cfg.n_antennas:
            raise ValueError("pilot matrix width != array size")
        if self.n_paths > self.dictionary.size:
            raise ValueError("n_paths exceeds dictionary size")
        m_count = self.dictionary.n_subcarriers
        projected = np.empty(
            (m_count, f.shape[0], self.dictionary.size), dtype=np.complex128
        )
        for m in range(m_count):
            projected[m] = f @ self.dictionary.atoms(m)
        self.f_matrix_ = f
        self.projected_ = projected
        return self

    def _support_one_user(self, y: np.ndarray) -> tuple[list[int], np.ndarray]:
        """OMP loop for one user's (M, P) measurements."""
        a = self.projected_
        resid = y.copy()
        selected: list[int] = []
        masked = np.zeros(a.shape[2], dtype=bool)
        for _ in range(self.n_paths):
            corr = np.abs(np.einsum("mpq,mp->mq", a.conj(), resid)).sum(axis=0)
            corr[masked] = -np.inf
            q = int(np.argmax(corr))
            selected.append(q)
            masked[q] = True
            psi = a[:, :, selected]  # (M, P, l)
            pinv = np.linalg.pinv(psi, rcond=self.sv_floor)  # (M, l, P)
            coef = np.einsum("mlp,mp->ml", pinv, y)
            resid = y - np.einsum("mpl,ml->mp", psi, coef)
        return selected, resid

    def estimate(self, frame: PilotFrame) -> EstimateReport:
        """Full recovery report for every user in the frame."""
        if not hasattr(self, "projected_"):
            raise RuntimeError("call fit(f_matrix) before estimate()")
        if not np.array_equal(frame.f_matrix, self.f_matrix_):
            raise ValueError("frame was sounded with a different pilot matrix")
        d = self.dictionary
        m_count = frame.n_subcarriers
        k_count = frame.n_users
        supports = np.empty((k_count, self.n_paths), dtype=np.int64)
        sin_doas = np.empty((k_count, self.n_paths))
        ranges = np.empty((k_count, self.n_paths))
        d_phi = np.empty((k_count, self.n_paths, m_count))
        d_r = np.empty((k_count, self.n_paths, m_count))
        for k in range(k_count):
            selected, _ = self._support_one_user(frame.y[k])
            supports[k] = selected
            for l, q in enumerate(selected):
                phi, r = d.recovered_point(int(q))
                sin_doas[k, l] = phi
                ranges[k, l] = r
                d_phi[k, l], d_r[k, l] = _focus_deltas(phi, r, d.etas)
        h_hat = reconstruct(
            frame,
            d,
            supports,
            reconstruction=self.reconstruction,
            sv_floor=self.sv_floor,
        )
        return EstimateReport(
            h_hat=h_hat,
            supports=supports,
            sin_doas=sin_doas,
            ranges_m=ranges,
            delta_sin_doa=d_phi,
            delta_range_m=d_r,
        )

    def predict(self, frame: PilotFrame) -> np.ndarray:
        return self.estimate(frame).h_hat.h


def omp_run(
    frame: PilotFrame,
    dictionary: SteeringDictionary,
    n_paths: int,
    *,
    reconstruction: str = "sd-exact",
    sv_floor: float = SV_FLOOR,
) -> EstimateReport:
    """One-call OMP: fit the frame's pilot matrix and estimate."""
    est = OmpEstimator(
        dictionary=dictionary,
        n_paths=n_paths,
        reconstruction=reconstruction,
        sv_floor=sv_floor,
    )
    return est.fit(frame.f_matrix).estimate(frame)


class LsEstimator(BaseEstimator):
    """Least squares on a full-rank orthonormal pilot matrix."""

    def __init__(self, sv_floor: float = SV_FLOOR):
        self.sv_floor = sv_floor

    def fit(self, f_matrix: np.ndarray, y=None) -> "LsEstimator":
        f = as_complex_matrix(f_matrix, "f_matrix")
        p, n = f.shape
        if p < n:
            raise ValueError(f"LS needs n_pilots >= n_antennas, got {p} < {n}")
        gram = f.conj().T @ f
        if not np.allclose(gram, np.eye(n), atol=1e-8):
            raise ValueError("LS expects a pilot matrix with orthonormal columns")
        self.f_matrix_ = f
        self.pinv_ = np.linalg.pinv(f, rcond=self.sv_floor)
        return self

    def predict(self, frame: PilotFrame) -> np.ndarray:
        if not hasattr(self, "pinv_"):
            raise RuntimeError("call fit(f_matrix) before predict()")
        return np.einsum("np,kmp->kmn", self.pinv_, frame.y)


def ls_estimate(frame: PilotFrame) -> np.ndarray:
    return LsEstimator().fit(frame.f_matrix).predict(frame)


def estimate_covariance(
    cfg: SystemConfig,
    n_draws: int,
    rng_seed: int,
    *,
    n_paths: int = 3,
    range_bounds_m: tuple[float, float] = (5.0, 30.0),
    sector_bounds_deg: list[tuple[float, float]] | None = None,
) -> np.ndarray:
    """Per-subcarrier sample covariance (M, N, N) of normalized channels.

    Draws `n_draws` independent scenarios, normalizes each, and pools all
    users. The draw distribution (range band, angle sectors) should match
    the scenarios the estimator will face.
    """
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    check_seed(rng_seed)
    seeds = np.random.SeedSequence(rng_seed).generate_state(n_draws)
    r = np.zeros(
        (cfg.n_subcarriers, cfg.n_antennas, cfg.n_antennas), dtype=np.complex128
    )
    total = 0
    for i in range(n_draws):
        scenario = sample_scenario(
            cfg,
            n_paths,
            int(seeds[i]),
            range_bounds_m=range_bounds_m,
            sector_bounds_deg=sector_bounds_deg,
        )
        tensor, _ = normalize_for_snr(synthesize_channel(scenario, cfg))
        r += np.einsum("kmn,kmj->mnj", tensor.h, tensor.h.conj())
        total += tensor.n_users
    return r / total


class LmmseEstimator(BaseEstimator):
    """Linear MMSE per subcarrier from a sample channel covariance.

    W_m = R_m F^H (F R_m F^H + sigma^2 I)^{-1}, applied to each user's
    measurements. Knows the noise level from the frame it is given.
    """

    def __init__(self, sv_floor: float = SV_FLOOR):
        self.sv_floor = sv_floor

    def fit(self, f_matrix: np.ndarray, covariance: np.ndarray) -> "LmmseEstimator":
        f = as_complex_matrix(f_matrix, "f_matrix")
        cov = np.asarray(covariance, dtype=np.complex128)
        if cov.ndim != 3 or cov.shape[1] != cov.shape[2]:
            raise ValueError("covariance must be (M, N, N)")
        if cov.shape[1] != f.shape[1]:
            raise ValueError("covariance size != pilot matrix width")
        # Hermitian positive semidefinite check (up to numerical tolerance).
        if not np.allclose(cov, np.conj(np.transpose(cov, (0, 2, 1))), atol=1e-8):
            raise ValueError("covariance must be Hermitian")
        self.f_matrix_ = f
        self.covariance_ = cov
        self._weights_cache: tuple[float, np.ndarray] | None = None
        return self

    def _weights(self, noise_var: float) -> np.ndarray:
        if self._weights_cache is not None and self._weights_cache[0] == noise_var:
            return self._weights_cache[1]
        f = self.f_matrix_
        p = f.shape[0]
        m_count = self.covariance_.shape[0]
        w = np.empty((m_count, f.shape[1], p), dtype=np.complex128)
        eye = np.eye(p)
        for m in range(m_count):
            rm = self.covariance_[m]
            b = rm @ f.conj().T  # (N, P)
            g = f @ b + noise_var * eye  # (P, P)
            try:
                w[m] = np.linalg.solve(g.T, b.T).T
            except np.linalg.LinAlgError as exc:
                raise ValueError(
                    f"singular innovation matrix at subcarrier {m} "
                    f"(noise_var={noise_var}); the covariance is rank-deficient"
                ) from exc
        self._weights_cache = (noise_var, w)
        return w

    def predict(self, frame: PilotFrame) -> np.ndarray:
        if not hasattr(self, "covariance_"):
            raise RuntimeError("call fit(f_matrix, covariance) before predict()")
        w = self._weights(frame.noise_var)
        return np.einsum("mnp,kmp->kmn", w, frame.y)


def lmmse_estimate(frame: PilotFrame, covariance: np.ndarray) -> np.ndarray:
    return LmmseEstimator().fit(frame.f_matrix, covariance).predict(frame)
