"""System-level configuration shared across synthesis, sounding and recovery."""
from __future__ import annotations

from dataclasses import dataclass

from .validation import check_nonnegative, check_positive
from .wavefield import ArrayGeometry, SubcarrierGrid, fraunhofer_distance


@dataclass(frozen=True)
class SystemConfig:
    """Static description of the link: array, spectrum, sounding and users.

    Defaults reproduce the large-array wideband setting (256 antennas, 300 GHz
    carrier, 30 GHz bandwidth, 128 subcarriers, 8 pilot beams / RF chains /
    users). Tests and the desk profile shrink N and M.
    """

    n_antennas: int = 256
    carrier_hz: float = 300e9
    bandwidth_hz: float = 30e9
    n_subcarriers: int = 128
    n_pilots: int = 8
    n_rf_chains: int = 8
    n_users: int = 8
    k_abs_per_m: float = 0.0033

    def __post_init__(self) -> None:
        if self.n_antennas < 2:
            raise ValueError(f"n_antennas must be >= 2, got {self.n_antennas}")
        check_positive(self.carrier_hz, "carrier_hz")
        check_nonnegative(self.bandwidth_hz, "bandwidth_hz")
        if self.n_subcarriers < 1:
            raise ValueError(f"n_subcarriers must be >= 1, got {self.n_subcarriers}")
        if not 1 <= self.n_pilots:
            raise ValueError(f"n_pilots must be >= 1, got {self.n_pilots}")
        if self.n_pilots > self.n_antennas:
            raise ValueError("n_pilots must be <= n_antennas")
        if self.n_rf_chains < 1:
            raise ValueError(f"n_rf_chains must be >= 1, got {self.n_rf_chains}")
        if self.n_users < 1:
            raise ValueError(f"n_users must be >= 1, got {self.n_users}")
        check_nonnegative(self.k_abs_per_m, "k_abs_per_m")

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(n_antennas=self.n_antennas, carrier_hz=self.carrier_hz)

    @property
    def subcarriers(self) -> SubcarrierGrid:
        return SubcarrierGrid(
            m_count=self.n_subcarriers,
            bandwidth_hz=self.bandwidth_hz,
            carrier_hz=self.carrier_hz,
        )

    @property
    def fraunhofer_m(self) -> float:
        return fraunhofer_distance(self.geometry)

    def with_bandwidth(self, bandwidth_hz: float) -> "SystemConfig":
        """Copy of this config at a different bandwidth (sweep helper)."""
        return SystemConfig(
            n_antennas=self.n_antennas,
            carrier_hz=self.carrier_hz,
            bandwidth_hz=bandwidth_hz,
            n_subcarriers=self.n_subcarriers,
            n_pilots=self.n_pilots,
            n_rf_chains=self.n_rf_chains,
            n_users=self.n_users,
            k_abs_per_m=self.k_abs_per_m,
        )
