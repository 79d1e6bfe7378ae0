"""Polar-domain steering dictionaries for sparse wideband recovery.

All dictionaries share one physical grid of (direction sine, range) points.
The split-aware dictionary synthesizes its atoms at each subcarrier's own
frequency, so a source sitting on grid point q projects onto column q at
*every* subcarrier and the support stays aligned across the band. The
carrier-built variants evaluate all atoms at f_c only; against a wideband
spherical-wavefront channel their best-matching column drifts with the
subcarrier index, which is exactly the beam-split defect the split-aware
construction removes. Atoms use Fresnel-mode phases; the synthesis side uses
exact ranges, and the residual mismatch is bounded by the Fresnel accuracy
invariants in `wavefield`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .validation import check_positive
from .wavefield import C0, SIN_DOA_LIMIT, fraunhofer_distance

# Eager per-subcarrier atom caches are kept below this footprint; larger
# dictionaries synthesize atoms on demand.
_EAGER_BYTE_LIMIT = 256 * 1024 * 1024


@dataclass(frozen=True)
class PhysicalGrid:
    """Cartesian product of an angle axis and a range axis, flattened.

    Point q = a * q_range + r pairs angle index a with range index r. Angles
    are uniform in the sine domain; ranges are uniform in reciprocal distance
    (so the grid densifies toward the array, matching where wavefront
    curvature actually changes). `q_range = 1` keeps the single range at
    `r_min`. Far-field grids store `inf` ranges.
    """

    angle_axis: np.ndarray  # (q_angle,) strictly increasing sines
    range_axis: np.ndarray  # (q_range,) strictly increasing ranges, may be inf

    def __post_init__(self) -> None:
        ang = np.asarray(self.angle_axis, dtype=np.float64)
        rng = np.asarray(self.range_axis, dtype=np.float64)
        if ang.ndim != 1 or rng.ndim != 1 or ang.size < 1 or rng.size < 1:
            raise ValueError("grid axes must be non-empty 1-D arrays")
        if not np.all(np.diff(ang) > 0):
            raise ValueError("angle_axis must be strictly increasing")
        if ang[0] < -1.0 or ang[-1] > 1.0:
            raise ValueError("angle_axis must lie in [-1, 1]")
        if rng.size > 1 and not np.all(np.diff(rng) > 0):
            raise ValueError("range_axis must be strictly increasing")
        if np.any(rng <= 0):
            raise ValueError("range_axis must be positive")
        object.__setattr__(self, "angle_axis", ang)
        object.__setattr__(self, "range_axis", rng)

    @property
    def q_angle(self) -> int:
        return int(self.angle_axis.size)

    @property
    def q_range(self) -> int:
        return int(self.range_axis.size)

    @property
    def size(self) -> int:
        return self.q_angle * self.q_range

    @property
    def sin_doas(self) -> np.ndarray:
        """Flattened per-point direction sines, shape (Q,)."""
        return np.repeat(self.angle_axis, self.q_range)

    @property
    def ranges_m(self) -> np.ndarray:
        """Flattened per-point ranges, shape (Q,)."""
        return np.tile(self.range_axis, self.q_angle)

    def point(self, q: int) -> tuple[float, float]:
        """(sin_doa, range_m) of flattened grid index q."""
        if not 0 <= q < self.size:
            raise ValueError(f"grid index {q} out of range [0, {self.size})")
        return (
            float(self.angle_axis[q // self.q_range]),
            float(self.range_axis[q % self.q_range]),
        )


def build_physical_grid(
    cfg: SystemConfig,
    q_angle: int,
    q_range: int,
    *,
    r_min_m: float = 3.0,
    r_max_m: float | None = None,
    angle_limit: float = SIN_DOA_LIMIT,
) -> PhysicalGrid:
    """Grid over [-angle_limit, angle_limit] x [r_min, r_max].

    `r_max_m` defaults to the Fraunhofer distance of the configured geometry.
    Ranges are placed uniformly in 1/r from 1/r_min down to 1/r_max.
    """
    if q_angle < 2:
        raise ValueError(f"q_angle must be >= 2, got {q_angle}")
    if q_range < 1:
        raise ValueError(f"q_range must be >= 1, got {q_range}")
    check_positive(r_min_m, "r_min_m")
    if not 0.0 < angle_limit <= 1.0:
        raise ValueError(f"angle_limit must lie in (0, 1], got {angle_limit}")
    if r_max_m is None:
        r_max_m = fraunhofer_distance(cfg.geometry)
    if not r_min_m < r_max_m:
        raise ValueError(
            f"need r_min < r_max, got [{r_min_m}, {r_max_m}] "
            "(at small apertures the Fraunhofer default shrinks; pass r_max_m)"
        )
    angles = np.linspace(-angle_limit, angle_limit, q_angle)
    if q_range == 1:
        ranges = np.array([r_min_m])
    else:
        inv = np.linspace(1.0 / r_min_m, 1.0 / r_max_m, q_range)
        ranges = np.sort(1.0 / inv)
    return PhysicalGrid(angle_axis=angles, range_axis=ranges)


@dataclass
class SteeringDictionary:
    """Per-subcarrier atom matrices C_m over a shared physical grid.

    `atom_freqs_hz[m]` is the frequency the m-th atom matrix is synthesized
    at: the subcarrier's own frequency for the split-aware kind, the carrier
    for the single-frequency kinds. Columns are unit-norm by construction
    (constant-modulus entries scaled by 1/sqrt(N)).
    """

    grid: PhysicalGrid
    cfg: SystemConfig
    kind: str  # "split-aware" | "carrier-nearfield" | "carrier-farfield"
    atom_freqs_hz: np.ndarray  # (M,)
    etas: np.ndarray  # (M,) carrier/subcarrier ratios of the system grid
    storage: str = "auto"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("split-aware", "carrier-nearfield", "carrier-farfield"):
            raise ValueError(f"unknown dictionary kind {self.kind!r}")
        if self.storage not in ("auto", "eager", "lazy"):
            raise ValueError(f"storage must be auto|eager|lazy, got {self.storage!r}")
        self.atom_freqs_hz = np.asarray(self.atom_freqs_hz, dtype=np.float64)
        self.etas = np.asarray(self.etas, dtype=np.float64)
        if self.atom_freqs_hz.shape != (self.cfg.n_subcarriers,):
            raise ValueError("atom_freqs_hz must have one entry per subcarrier")

    @property
    def n_subcarriers(self) -> int:
        return int(self.atom_freqs_hz.size)

    @property
    def size(self) -> int:
        return self.grid.size

    def _cache_enabled(self) -> bool:
        if self.storage == "lazy":
            return False
        if self.storage == "eager":
            return True
        footprint = 16 * self.cfg.n_antennas * self.grid.size
        distinct = len(set(self.atom_freqs_hz.tolist()))
        return footprint * distinct <= _EAGER_BYTE_LIMIT

    def _synthesize(self, freq_hz: float) -> np.ndarray:
        n = self.cfg.n_antennas
        offsets = self.cfg.geometry.element_offsets_m()  # (N,)
        phi = self.grid.sin_doas  # (Q,)
        if self.kind == "carrier-farfield":
            phase = 2.0 * math.pi * (freq_hz / C0) * np.outer(offsets, phi)
            return np.exp(1j * phase) / math.sqrt(n)
        r = self.grid.ranges_m  # (Q,)
        zeta = (1.0 - phi**2) / (2.0 * r)
        ranges = (
            r[None, :]
            - offsets[:, None] * phi[None, :]
            + (offsets**2)[:, None] * zeta[None, :]
        )
        phase = -2.0 * math.pi * (freq_hz / C0) * ranges
        return np.exp(1j * phase) / math.sqrt(n)

    def atoms(self, m: int) -> np.ndarray:
        """Atom matrix C_m of shape (N, Q) for subcarrier m (0-based)."""
        if not 0 <= m < self.n_subcarriers:
            raise ValueError(f"subcarrier index {m} out of range")
        freq = float(self.atom_freqs_hz[m])
        if not self._cache_enabled():
            return self._synthesize(freq)
        if freq not in self._cache:
            self._cache[freq] = self._synthesize(freq)
        return self._cache[freq]

    def recovered_point(self, q: int) -> tuple[float, float]:
        """Physical (sin_doa, range_m) a selected column index stands for."""
        return self.grid.point(q)


def build_nba(
    grid: PhysicalGrid, cfg: SystemConfig, *, storage: str = "auto"
) -> SteeringDictionary:
    """Split-aware dictionary: atoms track each subcarrier's frequency."""
    sub = cfg.subcarriers
    return SteeringDictionary(
        grid=grid,
        cfg=cfg,
        kind="split-aware",
        atom_freqs_hz=sub.freqs_hz.copy(),
        etas=sub.etas.copy(),
        storage=storage,
    )


def build_si_nearfield(
    grid: PhysicalGrid, cfg: SystemConfig, *, storage: str = "auto"
) -> SteeringDictionary:
    """Carrier-frequency near-field dictionary, shared by all subcarriers."""
    sub = cfg.subcarriers
    return SteeringDictionary(
        grid=grid,
        cfg=cfg,
        kind="carrier-nearfield",
        atom_freqs_hz=np.full(cfg.n_subcarriers, cfg.carrier_hz),
        etas=sub.etas.copy(),
        storage=storage,
    )


def build_si_farfield(
    cfg: SystemConfig,
    q_angle: int,
    *,
    angle_limit: float = SIN_DOA_LIMIT,
    storage: str = "auto",
) -> SteeringDictionary:
    """Carrier-frequency plane-wave dictionary (angle axis only)."""
    if q_angle < 2:
        raise ValueError(f"q_angle must be >= 2, got {q_angle}")
    grid = PhysicalGrid(
        angle_axis=np.linspace(-angle_limit, angle_limit, q_angle),
        range_axis=np.array([np.inf]),
    )
    sub = cfg.subcarriers
    return SteeringDictionary(
        grid=grid,
        cfg=cfg,
        kind="carrier-farfield",
        atom_freqs_hz=np.full(cfg.n_subcarriers, cfg.carrier_hz),
        etas=sub.etas.copy(),
        storage=storage,
    )


def coherence(dictionary: SteeringDictionary, m: int, i: int, j: int) -> float:
    """|<c_i, c_j>| between two columns of C_m (unit columns, so in [0, 1])."""
    atoms = dictionary.atoms(m)
    if not (0 <= i < atoms.shape[1] and 0 <= j < atoms.shape[1]):
        raise ValueError("column index out of range")
    return float(np.abs(np.vdot(atoms[:, i], atoms[:, j])))
