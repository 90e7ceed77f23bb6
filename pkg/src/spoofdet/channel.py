"""Clustered-delay-line multipath channel draws on a uniform linear array.

Energy arrives in a small number of delay/azimuth clusters.  Each cluster is
realized as a bundle of rays with independent uniform phases and Gaussian
angle offsets around the cluster azimuth; an optional Ricean factor on the
first cluster splits off a deterministic-direction dominant ray.  Because the
cluster count is small and angular spreads are narrow, the per-tap response
across antennas is sparse in the beam (DFT-across-antennas) domain — the
physical property the fingerprint extractor exploits.

Draws are small-scale normalized: the expected squared Frobenius norm of the
tap matrix is ``M * sum(cluster powers) = M``.  Distance-dependent gain and
shadowing are applied by callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import ClusterTableError, ConfigurationError, ShapeError

__all__ = [
    "ClusterTable",
    "GeometryScenario",
    "PolarPosition",
    "ChannelRealization",
    "load_cluster_table",
    "default_cluster_table",
    "steering_vector",
    "draw_channel",
    "place_actors",
    "beamspace",
    "vectorize_taps",
]

DEFAULT_TABLE_PATH = Path(__file__).parent / "data" / "clustered_los.yaml"


@dataclass(frozen=True)
class ClusterTable:
    """Per-cluster delay/power/angle parameterization of a multipath profile.

    Attributes
    ----------
    delays_ns : numpy.ndarray
        Cluster excess delays in nanoseconds, non-negative, sorted ascending.
    powers : numpy.ndarray
        Linear cluster powers normalized to sum to one.
    azimuths_deg : numpy.ndarray
        Cluster azimuth offsets in degrees, relative to the source's
        line-of-sight azimuth as seen from the array.
    spreads_deg : numpy.ndarray
        Per-cluster ray angular spread (standard deviation, degrees).
    ricean_k_db : float or None
        Ricean factor for the first cluster in dB.  When set, a fraction
        ``K/(K+1)`` of the first cluster's power goes to a single
        deterministic-direction ray at the exact cluster azimuth and the
        remainder is spread over diffuse rays.  ``None`` means fully diffuse.
    """

    delays_ns: np.ndarray
    powers: np.ndarray
    azimuths_deg: np.ndarray
    spreads_deg: np.ndarray
    ricean_k_db: float | None = None

    def __post_init__(self) -> None:
        arrays = (self.delays_ns, self.powers, self.azimuths_deg, self.spreads_deg)
        n = len(self.delays_ns)
        if n == 0:
            raise ClusterTableError("cluster table must contain at least one cluster")
        if any(len(a) != n for a in arrays):
            raise ClusterTableError("cluster table columns differ in length")
        if np.any(self.delays_ns < 0):
            raise ClusterTableError("cluster delays must be non-negative")
        if np.any(np.diff(self.delays_ns) < 0):
            raise ClusterTableError("cluster delays must be sorted ascending")
        if np.any(self.powers <= 0):
            raise ClusterTableError("cluster powers must be positive")
        if abs(float(np.sum(self.powers)) - 1.0) > 1e-9:
            raise ClusterTableError("normalized cluster powers must sum to 1")
        if np.any(self.spreads_deg < 0):
            raise ClusterTableError("angular spreads must be non-negative")

    @property
    def num_clusters(self) -> int:
        return len(self.delays_ns)

    @classmethod
    def from_dict(cls, raw: dict) -> "ClusterTable":
        """Build a table from a plain mapping (e.g. a parsed YAML document).

        Recognized keys: ``delays_ns``, ``powers_db`` (relative powers in dB,
        normalized here to sum to one in linear units), ``azimuths_deg``,
        ``spreads_deg``, and optional ``ricean_k_db``.
        """
        try:
            delays = np.asarray(raw["delays_ns"], dtype=float)
            powers_db = np.asarray(raw["powers_db"], dtype=float)
            azimuths = np.asarray(raw["azimuths_deg"], dtype=float)
            spreads = np.asarray(raw["spreads_deg"], dtype=float)
        except KeyError as missing:
            raise ClusterTableError(f"cluster table missing key {missing}") from None
        powers = 10.0 ** (powers_db / 10.0)
        total = float(np.sum(powers))
        if total <= 0:
            raise ClusterTableError("cluster powers sum to zero")
        k_db = raw.get("ricean_k_db")
        return cls(
            delays_ns=delays,
            powers=powers / total,
            azimuths_deg=azimuths,
            spreads_deg=spreads,
            ricean_k_db=None if k_db is None else float(k_db),
        )


def load_cluster_table(path: str | Path) -> ClusterTable:
    """Load a :class:`ClusterTable` from a YAML file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ClusterTableError(f"{path}: expected a mapping at top level")
    return ClusterTable.from_dict(raw)


def default_cluster_table() -> ClusterTable:
    """Return the shipped line-of-sight-dominant cluster profile."""
    return load_cluster_table(DEFAULT_TABLE_PATH)


@dataclass(frozen=True)
class PolarPosition:
    """Polar position of an actor relative to the array: range and azimuth."""

    radius_m: float
    azimuth_deg: float


@dataclass(frozen=True)
class GeometryScenario:
    """Array geometry plus actor placement inside a deployment annulus.

    Attributes
    ----------
    num_antennas : int
        Array size ``M`` (uniform linear array).
    element_spacing_wavelengths : float
        Inter-element spacing in carrier wavelengths (0.5 = half wavelength).
    inner_radius_m, outer_radius_m : float
        Deployment annulus bounds; every actor radius must lie inside.
    user_positions : tuple of PolarPosition
        One position per served user.
    attacker_position : PolarPosition
    """

    num_antennas: int
    element_spacing_wavelengths: float
    inner_radius_m: float
    outer_radius_m: float
    user_positions: tuple
    attacker_position: PolarPosition

    def __post_init__(self) -> None:
        if self.num_antennas < 1:
            raise ConfigurationError("need at least one antenna")
        if self.element_spacing_wavelengths <= 0:
            raise ConfigurationError("element spacing must be positive")
        if not 0 < self.inner_radius_m < self.outer_radius_m:
            raise ConfigurationError(
                "need 0 < inner radius < outer radius, got "
                f"{self.inner_radius_m} and {self.outer_radius_m}"
            )
        for pos in (*self.user_positions, self.attacker_position):
            if not self.inner_radius_m <= pos.radius_m <= self.outer_radius_m:
                raise ConfigurationError(
                    f"actor radius {pos.radius_m} outside annulus "
                    f"[{self.inner_radius_m}, {self.outer_radius_m}]"
                )

    def position_of(self, source: int | str) -> PolarPosition:
        """Resolve a source id: a 0-based user index or ``"attacker"``."""
        if source == "attacker":
            return self.attacker_position
        if isinstance(source, int) and 0 <= source < len(self.user_positions):
            return self.user_positions[source]
        raise ConfigurationError(f"unknown source id {source!r}")


@dataclass(frozen=True)
class ChannelRealization:
    """One drawn multipath channel: tap-by-antenna matrix plus metadata.

    Attributes
    ----------
    taps : numpy.ndarray
        Complex matrix of shape ``(num_taps, M)``; row ``t`` is the response
        across antennas at delay tap ``t``.
    source : int or str
        Which actor this channel belongs to (user index or ``"attacker"``).
    cluster_azimuths_deg : numpy.ndarray
        Absolute azimuth of each cluster for this draw.
    """

    taps: np.ndarray
    source: int | str
    cluster_azimuths_deg: np.ndarray

    @property
    def num_taps(self) -> int:
        return self.taps.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.taps.shape[1]


def steering_vector(
    num_antennas: int, azimuth_deg: float, spacing_wavelengths: float = 0.5
) -> np.ndarray:
    """Uniform-linear-array response to a plane wave from ``azimuth_deg``.

    Element ``m`` has phase ``2*pi*spacing*m*sin(azimuth)``; broadside (0
    degrees) gives the all-ones vector.
    """
    m = np.arange(num_antennas)
    phase = 2.0 * np.pi * spacing_wavelengths * m * math.sin(math.radians(azimuth_deg))
    return np.exp(1j * phase)


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_channel(
    scenario: GeometryScenario,
    table: ClusterTable,
    source: int | str,
    num_taps: int,
    tap_duration_ns: float,
    rng,
    rays_per_cluster: int = 20,
) -> ChannelRealization:
    """Draw one small-scale channel realization for ``source``.

    Each cluster maps to the tap nearest its delay and contributes a bundle
    of ``rays_per_cluster`` equal-power rays with independent uniform phases
    and Gaussian azimuth offsets (standard deviation = the cluster's spread)
    around the cluster azimuth.  With a Ricean factor configured, the first
    cluster instead sends the fraction ``K/(K+1)`` of its power on a single
    random-phase ray at the exact cluster azimuth.  Expected total energy is
    ``M`` (per-antenna unit average gain); per-draw randomness enters only
    through ray phases and angle offsets.

    Parameters
    ----------
    rng : int, SeedSequence, or numpy.random.Generator
        Seed material for reproducible draws.
    """
    if num_taps < 1:
        raise ConfigurationError(f"num_taps must be positive, got {num_taps}")
    if tap_duration_ns <= 0:
        raise ConfigurationError("tap duration must be positive")
    gen = _as_generator(rng)
    position = scenario.position_of(source)
    m_ant = scenario.num_antennas
    spacing = scenario.element_spacing_wavelengths

    taps = np.zeros((num_taps, m_ant), dtype=np.complex128)
    cluster_azimuths = position.azimuth_deg + table.azimuths_deg

    for c in range(table.num_clusters):
        tap_index = int(round(table.delays_ns[c] / tap_duration_ns))
        if tap_index >= num_taps:
            raise ClusterTableError(
                f"cluster {c} at {table.delays_ns[c]} ns maps to tap "
                f"{tap_index}, beyond the {num_taps}-tap window "
                f"({tap_duration_ns} ns per tap)"
            )
        power = float(table.powers[c])
        diffuse_power = power
        if c == 0 and table.ricean_k_db is not None:
            k_lin = 10.0 ** (table.ricean_k_db / 10.0)
            dominant_power = power * k_lin / (k_lin + 1.0)
            diffuse_power = power / (k_lin + 1.0)
            phase = gen.uniform(0.0, 2.0 * np.pi)
            taps[tap_index] += (
                math.sqrt(dominant_power)
                * np.exp(1j * phase)
                * steering_vector(m_ant, cluster_azimuths[c], spacing)
            )
        ray_amp = math.sqrt(diffuse_power / rays_per_cluster)
        offsets = gen.normal(0.0, table.spreads_deg[c], size=rays_per_cluster)
        phases = gen.uniform(0.0, 2.0 * np.pi, size=rays_per_cluster)
        sines = np.sin(np.radians(cluster_azimuths[c] + offsets))
        steering = np.exp(
            2j * np.pi * spacing * np.outer(sines, np.arange(m_ant))
        )
        gains = ray_amp * np.exp(1j * phases)
        taps[tap_index] += gains @ steering

    return ChannelRealization(
        taps=taps, source=source, cluster_azimuths_deg=cluster_azimuths
    )


def place_actors(
    inner_radius_m: float, outer_radius_m: float, count: int, rng
) -> list[PolarPosition]:
    """Draw ``count`` positions uniformly over the annulus area.

    The squared radius is uniform on ``[inner^2, outer^2]`` (area-uniform
    law) and the azimuth is uniform on ``[0, 360)`` degrees.
    """
    if not 0 < inner_radius_m < outer_radius_m:
        raise ConfigurationError(
            f"need 0 < inner < outer, got {inner_radius_m}, {outer_radius_m}"
        )
    if count < 0:
        raise ConfigurationError(f"count must be non-negative, got {count}")
    gen = _as_generator(rng)
    sq = gen.uniform(inner_radius_m**2, outer_radius_m**2, size=count)
    azimuths = gen.uniform(0.0, 360.0, size=count)
    return [
        PolarPosition(radius_m=float(np.sqrt(s)), azimuth_deg=float(a))
        for s, a in zip(sq, azimuths)
    ]


def beamspace(taps: np.ndarray) -> np.ndarray:
    """Unitary DFT across the antenna axis, tap by tap.

    Input shape ``(..., num_taps, M)``; output has the same shape with the
    last axis in beam coordinates.  Energy is preserved exactly.
    """
    taps = np.asarray(taps)
    if taps.ndim < 2:
        raise ShapeError(f"expected (..., taps, antennas), got {taps.shape}")
    return np.fft.fft(taps, axis=-1, norm="ortho")


def vectorize_taps(taps: np.ndarray) -> np.ndarray:
    """Flatten a ``(num_taps, M)`` matrix tap-major into a length ``M*tau``
    vector: coordinate ``i = tap * M + column``."""
    taps = np.asarray(taps)
    if taps.ndim != 2:
        raise ShapeError(f"expected a (taps, antennas) matrix, got {taps.shape}")
    return taps.reshape(-1)
