"""Array geometry, spherical-wavefront steering vectors, and focus-point maps.

Everything downstream (channel synthesis, dictionaries, estimators) is built on
the primitives here: per-antenna path lengths for a uniform linear array, their
Fresnel approximation, the subcarrier-dependent mapping between a physical
source location and the spatial location an analog beam actually focuses on,
and the Dirichlet-kernel array gain used to verify that mapping.

Conventions:
- A direction is always carried as phi = sin(angle-from-broadside), in [-1, 1].
- Steering vectors use the e^{-j 2 pi (f/c0) r^(n)} phase sign and 1/sqrt(N)
  scaling, so every steering vector has unit L2 norm.
- Subcarrier indices are 0-based in code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_positive, check_sin_doa

# Propagation speed [m/s]. The nominal 3e8 value keeps the classic half-wave
# geometry numbers exact (e.g. N=256 at 300 GHz -> aperture 12.8 cm,
# Fraunhofer distance 32.768 m).
C0 = 3.0e8

# Directions are kept off exact endfire; the focus maps degenerate at phi = +-1.
SIN_DOA_LIMIT = math.sin(math.radians(85.0))


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array with half-wavelength spacing at the carrier."""

    n_antennas: int
    carrier_hz: float

    def __post_init__(self) -> None:
        if self.n_antennas < 1:
            raise ValueError(f"n_antennas must be >= 1, got {self.n_antennas}")
        check_positive(self.carrier_hz, "carrier_hz")

    @property
    def spacing_m(self) -> float:
        """Element spacing d = lambda/2 = c0 / (2 f_c), exactly."""
        return C0 / (2.0 * self.carrier_hz)

    @property
    def aperture_m(self) -> float:
        """Aperture D = N * d."""
        return self.n_antennas * self.spacing_m

    def element_offsets_m(self) -> np.ndarray:
        """Positions (n-1) d of the N elements along the array axis."""
        return np.arange(self.n_antennas, dtype=np.float64) * self.spacing_m


@dataclass(frozen=True)
class PolarPoint:
    """A source location: direction sine and range from the first element."""

    sin_doa: float
    range_m: float

    def __post_init__(self) -> None:
        check_sin_doa(self.sin_doa)
        check_positive(self.range_m, "range_m")

    @property
    def curvature(self) -> float:
        """Fresnel curvature coefficient zeta = (1 - phi^2) / (2 r)."""
        return (1.0 - self.sin_doa**2) / (2.0 * self.range_m)


@dataclass
class SubcarrierGrid:
    """OFDM subcarrier frequencies centred on the carrier.

    Subcarrier i (0-based) sits at f_i = f_c + (B/M) * (i - (M-1)/2), so the
    grid is symmetric about f_c and, for odd M, the middle subcarrier is the
    carrier itself.
    """

    m_count: int
    bandwidth_hz: float
    carrier_hz: float
    freqs_hz: np.ndarray = field(init=False, repr=False)
    etas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.m_count < 1:
            raise ValueError(f"m_count must be >= 1, got {self.m_count}")
        check_positive(self.carrier_hz, "carrier_hz")
        if self.bandwidth_hz < 0:
            raise ValueError(f"bandwidth_hz must be >= 0, got {self.bandwidth_hz}")
        if self.bandwidth_hz >= 2.0 * self.carrier_hz:
            raise ValueError("bandwidth_hz must be < 2 * carrier_hz")
        idx = np.arange(self.m_count, dtype=np.float64)
        step = self.bandwidth_hz / self.m_count
        self.freqs_hz = self.carrier_hz + step * (idx - (self.m_count - 1) / 2.0)
        self.etas = self.carrier_hz / self.freqs_hz


def fraunhofer_distance(geom: ArrayGeometry) -> float:
    """Near/far-field boundary F = 2 D^2 / lambda with D = N d."""
    wavelength = C0 / geom.carrier_hz
    return 2.0 * geom.aperture_m**2 / wavelength


def exact_antenna_range(point: PolarPoint, n: int, geom: ArrayGeometry) -> float:
    """Distance from the source to element n (1-based), law of cosines.

    r^(n) = sqrt(r^2 + (n-1)^2 d^2 - 2 r (n-1) d phi).
    """
    if not 1 <= n <= geom.n_antennas:
        raise ValueError(f"antenna index n must be in [1, {geom.n_antennas}], got {n}")
    offset = (n - 1) * geom.spacing_m
    return math.sqrt(
        point.range_m**2 + offset**2 - 2.0 * point.range_m * offset * point.sin_doa
    )


def fresnel_antenna_range(point: PolarPoint, n: int, geom: ArrayGeometry) -> float:
    """Second-order expansion r - (n-1) d phi + (n-1)^2 d^2 zeta."""
    if not 1 <= n <= geom.n_antennas:
        raise ValueError(f"antenna index n must be in [1, {geom.n_antennas}], got {n}")
    offset = (n - 1) * geom.spacing_m
    return point.range_m - offset * point.sin_doa + offset**2 * point.curvature


def _antenna_ranges(point: PolarPoint, geom: ArrayGeometry, mode: str) -> np.ndarray:
    """Vector of r^(n) for all N elements."""
    offsets = geom.element_offsets_m()
    if mode == "exact":
        return np.sqrt(
            point.range_m**2
            + offsets**2
            - 2.0 * point.range_m * offsets * point.sin_doa
        )
    if mode == "fresnel":
        return point.range_m - offsets * point.sin_doa + offsets**2 * point.curvature
    raise ValueError(f"mode must be 'exact' or 'fresnel', got {mode!r}")


def steering_vector(
    point: PolarPoint,
    freq_hz: float,
    geom: ArrayGeometry,
    mode: str = "exact",
) -> np.ndarray:
    """Unit-norm array response at `freq_hz` for a spherical wavefront.

    Entry n carries phase -2 pi (f/c0) r^(n); `mode` selects the exact or the
    Fresnel per-antenna range.
    """
    check_positive(freq_hz, "freq_hz")
    ranges = _antenna_ranges(point, geom, mode)
    phases = -2.0 * math.pi * (freq_hz / C0) * ranges
    return np.exp(1j * phases) / math.sqrt(geom.n_antennas)


def farfield_steering_vector(
    sin_doa: float, freq_hz: float, geom: ArrayGeometry
) -> np.ndarray:
    """Plane-wave limit: linear phase only, curvature dropped."""
    check_sin_doa(sin_doa)
    check_positive(freq_hz, "freq_hz")
    offsets = geom.element_offsets_m()
    phases = 2.0 * math.pi * (freq_hz / C0) * offsets * sin_doa
    return np.exp(1j * phases) / math.sqrt(geom.n_antennas)


def spatial_from_physical(point: PolarPoint, eta: float) -> PolarPoint:
    """Where a carrier-designed beam toward `point` focuses at f = f_c / eta.

    phi_bar = eta phi;  r_bar = r (1 - eta^2 phi^2) / (eta (1 - phi^2)).
    """
    check_positive(eta, "eta")
    phi = point.sin_doa
    if abs(phi) >= 1.0:
        raise ValueError("sin_doa = +-1 is outside the map's domain")
    phi_bar = eta * phi
    if abs(phi_bar) > 1.0:
        raise ValueError(
            f"|eta * sin_doa| = {abs(phi_bar):.6f} > 1: focus leaves the visible region"
        )
    r_bar = point.range_m * (1.0 - phi_bar**2) / (eta * (1.0 - phi**2))
    return PolarPoint(sin_doa=phi_bar, range_m=r_bar)


def physical_from_spatial(point: PolarPoint, eta: float) -> PolarPoint:
    """Inverse of :func:`spatial_from_physical`."""
    check_positive(eta, "eta")
    phi_bar = point.sin_doa
    phi = phi_bar / eta
    if abs(phi) >= 1.0:
        raise ValueError(
            f"|sin_doa / eta| = {abs(phi):.6f} >= 1: no physical source maps here"
        )
    r = point.range_m * eta * (1.0 - phi**2) / (1.0 - phi_bar**2)
    return PolarPoint(sin_doa=phi, range_m=r)


def nb_deltas(point: PolarPoint, eta: float) -> tuple[float, float]:
    """Direction and range offsets of the focus point from the source.

    Returns (delta_phi, delta_r) with delta_phi = (eta - 1) phi and
    delta_r = ((1 - eta^2 phi^2) / (eta (1 - phi^2)) - 1) r.
    """
    mapped = spatial_from_physical(point, eta)
    return mapped.sin_doa - point.sin_doa, mapped.range_m - point.range_m


def array_gain(
    p_physical: PolarPoint,
    p_spatial: PolarPoint,
    m: int,
    grid: SubcarrierGrid,
    geom: ArrayGeometry,
) -> float:
    """Normalized gain of a carrier-designed beam observed at subcarrier m.

    The beam weights are the Fresnel steering vector of `p_physical` at f_c;
    the response is evaluated against the Fresnel steering vector of
    `p_spatial` at f_m. Returns |u^H v|^2 in [0, 1].
    """
    if not 0 <= m < grid.m_count:
        raise ValueError(f"subcarrier index m must be in [0, {grid.m_count}), got {m}")
    u = steering_vector(p_physical, grid.carrier_hz, geom, mode="fresnel")
    v = steering_vector(p_spatial, float(grid.freqs_hz[m]), geom, mode="fresnel")
    return float(np.abs(np.vdot(u, v)) ** 2)


def array_gain_profile(
    p_physical: PolarPoint,
    m: int,
    grid: SubcarrierGrid,
    geom: ArrayGeometry,
    sin_doas: np.ndarray,
    ranges_m: np.ndarray,
    *,
    u_farfield: bool = False,
    chunk: int = 8192,
) -> np.ndarray:
    """Vectorized :func:`array_gain` over many candidate spatial points.

    Evaluates |u^H v_c|^2 for every (sin_doa, range) pair, chunked so the
    candidate steering matrix never exceeds `chunk` columns at a time.
    With `u_farfield` the beam is designed on the plane-wave vector of the
    physical direction (for sources beyond the Fraunhofer distance).
    """
    if not 0 <= m < grid.m_count:
        raise ValueError(f"subcarrier index m must be in [0, {grid.m_count}), got {m}")
    phi = np.asarray(sin_doas, dtype=np.float64).ravel()
    r = np.asarray(ranges_m, dtype=np.float64).ravel()
    if phi.shape != r.shape:
        raise ValueError("sin_doas and ranges_m must have the same length")
    if np.any(np.abs(phi) >= 1.0) or np.any(r <= 0.0):
        raise ValueError("candidate points need |sin_doa| < 1 and range > 0")
    if u_farfield:
        u = farfield_steering_vector(p_physical.sin_doa, grid.carrier_hz, geom)
    else:
        u = steering_vector(p_physical, grid.carrier_hz, geom, mode="fresnel")
    offsets = geom.element_offsets_m()
    wave = 2.0 * math.pi * float(grid.freqs_hz[m]) / C0
    gains = np.empty(phi.shape[0], dtype=np.float64)
    for lo in range(0, phi.shape[0], chunk):
        hi = min(lo + chunk, phi.shape[0])
        p, rr = phi[lo:hi], r[lo:hi]
        zeta = (1.0 - p**2) / (2.0 * rr)
        ranges = (
            rr[None, :]
            - offsets[:, None] * p[None, :]
            + (offsets**2)[:, None] * zeta[None, :]
        )
        v = np.exp(-1j * wave * ranges) / math.sqrt(geom.n_antennas)
        gains[lo:hi] = np.abs(u.conj() @ v) ** 2
    return gains


def dirichlet_sinc(x: float, n: int) -> float:
    """Normalized Dirichlet kernel sin(pi n x) / (n sin(pi x)).

    The removable singularities at integer x evaluate to the limit +-1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    denom = math.sin(math.pi * x)
    if abs(denom) < 1e-9:
        # Near an integer k the kernel tends to cos(pi n k) / cos(pi k).
        k = round(x)
        return float((-1) ** (k * (n - 1)))
    return math.sin(math.pi * n * x) / (n * denom)
