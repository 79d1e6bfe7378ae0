"""Multipath spherical-wavefront channel synthesis over a wideband grid.

A scenario is a list of users, each carrying `L` paths. Path `l` of user `k`
contributes sqrt(N/L) * alpha_{k,m,l} * a_m(phi, r) * e^{-j 2 pi tau f_m} to
the user's channel at subcarrier m, where a_m is the steering vector evaluated
with exact per-antenna ranges at the subcarrier's own frequency. The
subcarrier dependence of both the steering phases and the gains is what makes
wideband recovery with a single carrier-built dictionary drift.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .validation import check_nonnegative, check_positive, check_seed
from .wavefield import (
    C0,
    SIN_DOA_LIMIT,
    PolarPoint,
    _antenna_ranges,
    fraunhofer_distance,
)

# Extra excess delay drawn for non-line-of-sight paths, seconds.
NLOS_DELAY_SPREAD_S = 10e-9


@dataclass(frozen=True)
class PathSpec:
    """One propagation path: location, absolute delay, per-subcarrier gains."""

    point: PolarPoint
    delay_s: float
    gains: np.ndarray  # (M,) complex

    def __post_init__(self) -> None:
        check_nonnegative(self.delay_s, "delay_s")
        gains = np.asarray(self.gains, dtype=np.complex128)
        if gains.ndim != 1:
            raise ValueError(f"gains must be 1-D, got shape {gains.shape}")
        if not np.all(np.isfinite(gains)):
            raise ValueError("gains contain non-finite entries")
        object.__setattr__(self, "gains", gains)


@dataclass
class ChannelTensor:
    """Channel coefficients for K users, M subcarriers, N antennas."""

    h: np.ndarray  # (K, M, N) complex128

    def __post_init__(self) -> None:
        arr = np.asarray(self.h, dtype=np.complex128)
        if arr.ndim != 3:
            raise ValueError(f"h must be (K, M, N), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("channel tensor contains non-finite entries")
        self.h = arr

    @property
    def n_users(self) -> int:
        return self.h.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.h.shape[1]

    @property
    def n_antennas(self) -> int:
        return self.h.shape[2]


def path_gain_magnitude(freq_hz: float, range_m: float, k_abs_per_m: float) -> float:
    """RMS gain of a path: spreading loss times molecular absorption.

    Returns sqrt(E{|alpha|^2}) = (c0 / (4 pi f r)) * e^{-k_abs r / 2}.
    """
    check_positive(freq_hz, "freq_hz")
    check_positive(range_m, "range_m")
    check_nonnegative(k_abs_per_m, "k_abs_per_m")
    spreading = C0 / (4.0 * math.pi * freq_hz * range_m)
    return spreading * math.exp(-0.5 * k_abs_per_m * range_m)


def sample_scenario(
    cfg: SystemConfig,
    n_paths: int,
    rng_seed: int,
    *,
    range_bounds_m: tuple[float, float] = (5.0, 30.0),
    sector_bounds_deg: list[tuple[float, float]] | None = None,
) -> list[list[PathSpec]]:
    """Draw a random multipath scenario for all users.

    Directions are uniform in angle over [-85, 85] degrees (or per-user
    sectors, intersected with that span); ranges uniform over
    `range_bounds_m`, which must lie inside (0, Fraunhofer]. The first path of
    each user is line-of-sight (delay r/c0); the rest add an excess delay
    uniform in [0, 10 ns]. Gain magnitudes follow `path_gain_magnitude` at
    each subcarrier frequency with one random phase per path.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    check_seed(rng_seed)
    r_lo, r_hi = range_bounds_m
    check_positive(r_lo, "range_bounds_m[0]")
    if not r_lo < r_hi:
        raise ValueError(f"range bounds must increase, got {range_bounds_m}")
    fraunhofer = fraunhofer_distance(cfg.geometry)
    if r_hi > fraunhofer * (1.0 + 1e-12):
        raise ValueError(
            f"range bound {r_hi} m exceeds the Fraunhofer distance "
            f"{fraunhofer:.3f} m for this geometry"
        )
    limit_deg = math.degrees(math.asin(SIN_DOA_LIMIT))
    if sector_bounds_deg is not None and len(sector_bounds_deg) != cfg.n_users:
        raise ValueError("sector_bounds_deg must provide one (lo, hi) per user")

    rng = np.random.default_rng(rng_seed)
    freqs = cfg.subcarriers.freqs_hz
    scenario: list[list[PathSpec]] = []
    for k in range(cfg.n_users):
        if sector_bounds_deg is None:
            lo_deg, hi_deg = -limit_deg, limit_deg
        else:
            lo_deg = max(sector_bounds_deg[k][0], -limit_deg)
            hi_deg = min(sector_bounds_deg[k][1], limit_deg)
            if not lo_deg < hi_deg:
                raise ValueError(f"empty angle sector for user {k}")
        paths: list[PathSpec] = []
        for l in range(n_paths):
            angle_deg = rng.uniform(lo_deg, hi_deg)
            r = rng.uniform(r_lo, r_hi)
            point = PolarPoint(sin_doa=math.sin(math.radians(angle_deg)), range_m=r)
            delay = r / C0
            if l > 0:
                delay += rng.uniform(0.0, NLOS_DELAY_SPREAD_S)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            mags = np.array(
                [path_gain_magnitude(f, r, cfg.k_abs_per_m) for f in freqs]
            )
            gains = mags * np.exp(1j * phase)
            paths.append(PathSpec(point=point, delay_s=delay, gains=gains))
        scenario.append(paths)
    return scenario


def synthesize_channel(
    scenario: list[list[PathSpec]],
    cfg: SystemConfig,
    *,
    steering_mode: str = "exact",
) -> ChannelTensor:
    """Sum the path contributions into a (K, M, N) channel tensor.

    h_k[m] = sqrt(N/L) * sum_l gains[l][m] * a_m(point_l) * e^{-j 2 pi tau_l f_m},
    with a_m the unit-norm steering vector at subcarrier frequency f_m.
    """
    if not scenario or any(len(paths) == 0 for paths in scenario):
        raise ValueError("scenario must contain at least one path per user")
    geom = cfg.geometry
    freqs = cfg.subcarriers.freqs_hz  # (M,)
    m_count = freqs.shape[0]
    n = geom.n_antennas
    wave = -2j * math.pi * freqs / C0  # (M,)
    out = np.zeros((len(scenario), m_count, n), dtype=np.complex128)
    for k, paths in enumerate(scenario):
        scale = math.sqrt(n / len(paths))
        acc = np.zeros((m_count, n), dtype=np.complex128)
        for path in paths:
            if path.gains.shape[0] != m_count:
                raise ValueError(
                    f"path gains length {path.gains.shape[0]} != subcarrier count {m_count}"
                )
            ranges = _antenna_ranges(path.point, geom, steering_mode)  # (N,)
            steer = np.exp(np.outer(wave, ranges)) / math.sqrt(n)  # (M, N)
            weights = path.gains * np.exp(-2j * math.pi * path.delay_s * freqs)  # (M,)
            acc += weights[:, None] * steer
        out[k] = scale * acc
    return ChannelTensor(h=out)


def normalize_for_snr(tensor: ChannelTensor) -> tuple[ChannelTensor, float]:
    """Scale so the mean per-entry power is one; returns (scaled, scale).

    The returned scale is the multiplier that was applied; divide by it to
    undo the normalization.
    """
    power = float(np.mean(np.abs(tensor.h) ** 2))
    if power <= 0.0:
        raise ValueError("cannot normalize an all-zero channel tensor")
    scale = 1.0 / math.sqrt(power)
    return ChannelTensor(h=tensor.h * scale), scale


def scenario_to_json(scenario: list[list[PathSpec]], *, rng_seed: int | None = None) -> str:
    """Serialize a scenario to structured text (complex gains as [re, im])."""
    users = []
    for paths in scenario:
        users.append(
            [
                {
                    "sin_doa": p.point.sin_doa,
                    "range_m": p.point.range_m,
                    "delay_s": p.delay_s,
                    "gains": [[float(g.real), float(g.imag)] for g in p.gains],
                }
                for p in paths
            ]
        )
    doc = {
        "kind": "nearsplit-scenario",
        "version": 1,
        "rng_seed": rng_seed,
        "n_users": len(scenario),
        "n_paths": len(scenario[0]) if scenario else 0,
        "users": users,
    }
    return json.dumps(doc, indent=2)


def scenario_from_json(text: str) -> list[list[PathSpec]]:
    """Inverse of :func:`scenario_to_json`."""
    doc = json.loads(text)
    if doc.get("kind") != "nearsplit-scenario":
        raise ValueError("not a scenario document")
    scenario = []
    for paths in doc["users"]:
        specs = []
        for p in paths:
            gains = np.array([complex(re, im) for re, im in p["gains"]])
            specs.append(
                PathSpec(
                    point=PolarPoint(sin_doa=p["sin_doa"], range_m=p["range_m"]),
                    delay_s=p["delay_s"],
                    gains=gains,
                )
            )
        scenario.append(specs)
    return scenario
