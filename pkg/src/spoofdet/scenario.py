"""Scenario configuration: one object tying every module's knobs together.

A scenario fixes the array and user population, the radio operating point
(signal-to-noise and jammer-to-signal ratios), the pilot layout, the channel
profile, per-detector settings, and the Monte Carlo budget.  It can be
round-tripped through a nested YAML file and hashed for reproducibility
bookkeeping.

Conventions baked in here rather than scattered through the harness:

* Resource blocks map to estimation samples linearly: ``L = samples_per_rb *
  rb_count`` (12 samples per block by default, so 16 blocks give 192 samples
  and 4 blocks give 48).
* Absolute transmit powers are normalized away; only the two ratios matter.
  The stated signal-to-noise ratio is interpreted at the channel-estimate
  level: the per-element estimate-noise variance is ``link_gain /
  snr_linear``, with ``link_gain`` the reference per-element signal level
  of the estimate.  The link-layer nominal noise variance is back-solved
  from that target through the configured noise convention.
* The attacker's strength is calibrated per trial so that its received
  energy over the victim's is exactly the configured jammer-to-signal
  ratio.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .baselines import EdConfig, SdConfig
from .detector import UPDATE_POLICIES
from .errors import ConfigurationError
from .extractor import ExtractorConfig
from .link import LinkConfig
from .zc import PreamblePool, build_pool, generate_zc


def db_to_linear(value_db: float) -> float:
    """Convert a decibel power ratio to linear units."""
    return float(10.0 ** (value_db / 10.0))


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulated deployment and experiment.

    Attributes
    ----------
    num_antennas, num_users, num_taps, sequence_length, shift_size
        Array size M, active user count K, channel delay-spread length in
        taps, reference-sequence length N, and the cyclic-shift separation
        of the pilot pool (must exceed the delay spread so same-root pilots
        stay orthogonal over the delay window).
    rb_count, samples_per_rb
        Occupied resource blocks and the per-block estimation-sample
        count; their product is the per-subframe sample budget L.
    snr_db, jsr_db, link_gain, victim_power, victim_index
        Radio operating point.  ``snr_db`` is the received signal-to-noise
        ratio; ``jsr_db`` the received jammer-to-signal ratio; ``link_gain``
        the per-element estimate signal reference used to convert the SNR
        into an estimate-noise variance.
    inner_radius_m, outer_radius_m, element_spacing_wavelengths
        Deployment annulus and array spacing.
    tap_duration_ns, rays_per_cluster, cluster_table
        Channel sampling and the cluster profile (``None`` selects the
        packaged default profile).
    extractor, similarity_threshold, update_policy
        Fingerprint-extraction settings and the sequential detector's
        similarity threshold / reference-update policy.
    energy, subspace
        Reference-detector settings.  When ``subspace`` is ``None`` a
        default is derived with the expected no-attack dimension set to
        the user count (each active transmitter contributes one dominant
        spatial direction).
    trials, master_seed, output_dir, workers
        Monte Carlo budget, root seed, result directory, and worker count.
    """

    num_antennas: int = 64
    num_users: int = 16
    num_taps: int = 4
    sequence_length: int = 139
    shift_size: int = 5
    rb_count: int = 16
    samples_per_rb: int = 12
    snr_db: float = 5.0
    jsr_db: float = 0.0
    link_gain: float = 5.0
    victim_power: float = 1.0
    victim_index: int = 0
    inner_radius_m: float = 100.0
    outer_radius_m: float = 120.0
    element_spacing_wavelengths: float = 0.5
    tap_duration_ns: float = 240.0
    rays_per_cluster: int = 20
    cluster_table: str | None = None
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    similarity_threshold: float = 0.92
    update_policy: str = "quarantine"
    energy: EdConfig = field(default_factory=EdConfig)
    subspace: SdConfig | None = None
    trials: int = 500
    master_seed: int = 2026
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self) -> None:
        for name in ("num_antennas", "num_users", "num_taps", "rb_count",
                     "samples_per_rb", "rays_per_cluster", "trials",
                     "workers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        if self.sequence_length < 2:
            raise ConfigurationError("sequence length must be at least 2")
        if self.shift_size <= self.num_taps:
            raise ConfigurationError(
                f"shift size {self.shift_size} must exceed the delay "
                f"spread {self.num_taps} to keep same-root pilots "
                "orthogonal over the delay window"
            )
        if not 0 <= self.victim_index < self.num_users:
            raise ConfigurationError(
                f"victim index {self.victim_index} outside "
                f"0..{self.num_users - 1}"
            )
        for name in ("snr_db", "jsr_db"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")
        if self.link_gain <= 0:
            raise ConfigurationError("link gain must be positive")
        if self.victim_power <= 0:
            raise ConfigurationError("victim power must be positive")
        if not 0 < self.inner_radius_m < self.outer_radius_m:
            raise ConfigurationError(
                "need 0 < inner radius < outer radius"
            )
        if self.tap_duration_ns <= 0:
            raise ConfigurationError("tap duration must be positive")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ConfigurationError(
                "similarity threshold must lie in [0, 1]"
            )
        if self.update_policy not in UPDATE_POLICIES:
            raise ConfigurationError(
                f"update policy must be one of {UPDATE_POLICIES}"
            )
        if self.master_seed < 0:
            raise ConfigurationError("master seed must be non-negative")
        expected_dim = self.num_taps * self.num_antennas
        if (self.extractor.dimension is not None
                and self.extractor.dimension != expected_dim):
            raise ConfigurationError(
                f"extractor dimension {self.extractor.dimension} does not "
                f"match taps x antennas = {expected_dim}"
            )

    # ---------------------------------------------------------------- derived

    @property
    def n_samples(self) -> int:
        """Per-subframe estimation samples L implied by the block count."""
        return self.samples_per_rb * self.rb_count

    @property
    def fingerprint_dimension(self) -> int:
        """Sparse-fingerprint length: taps times antennas."""
        return self.num_taps * self.num_antennas

    @property
    def snr_linear(self) -> float:
        return db_to_linear(self.snr_db)

    @property
    def jsr_linear(self) -> float:
        return db_to_linear(self.jsr_db)

    @property
    def estimate_noise_variance(self) -> float:
        """Target per-element variance of the frequency-domain estimate noise."""
        return self.link_gain / self.snr_linear

    @property
    def tap_noise_variance(self) -> float:
        """Per-element variance of the delay-tap estimate noise."""
        return self.estimate_noise_variance / self.sequence_length

    @property
    def receive_noise_variance(self) -> float:
        """Per-element variance of the raw received-signal noise."""
        return (self.estimate_noise_variance * self.victim_power
                / self.sequence_length)

    def link_config(self) -> LinkConfig:
        """Link-layer settings realizing the target estimate-noise level."""
        nominal = (self.estimate_noise_variance * self.sequence_length
                   * self.victim_power)
        return LinkConfig(
            n_subcarriers=self.sequence_length,
            n_samples=self.n_samples,
            num_users=self.num_users,
            victim_index=self.victim_index,
            victim_power=self.victim_power,
            noise_variance=nominal,
            noise_convention="normalized",
            rb_count=self.rb_count,
        )

    def build_pool(self) -> PreamblePool:
        """Single-root pilot pool with one entry per user."""
        base = generate_zc(self.sequence_length, 1)
        return build_pool(
            [base],
            shift_size=self.shift_size,
            pool_size=self.num_users,
            num_users=self.num_users,
        )

    def subspace_config(self) -> SdConfig:
        """Resolved subspace-detector settings.

        Defaults the expected no-attack dimension to the user count: with
        every user active, the no-attack antenna covariance carries one
        dominant direction per user.
        """
        if self.subspace is not None:
            return self.subspace
        return SdConfig(baseline_dimension=self.num_users)

    def cell_tag(self) -> str:
        """Short label for this operating point, used in file naming."""
        return f"snr{self.snr_db:+g}_rb{self.rb_count}"

    # ------------------------------------------------------------ serialization

    def to_dict(self) -> dict:
        """Nested plain-data view mirroring the YAML layout."""
        return {
            "array": {
                "num_antennas": self.num_antennas,
                "element_spacing_wavelengths": self.element_spacing_wavelengths,
            },
            "users": {
                "num_users": self.num_users,
                "victim_index": self.victim_index,
            },
            "radio": {
                "snr_db": self.snr_db,
                "jsr_db": self.jsr_db,
                "link_gain": self.link_gain,
                "victim_power": self.victim_power,
            },
            "pilot": {
                "sequence_length": self.sequence_length,
                "shift_size": self.shift_size,
                "rb_count": self.rb_count,
                "samples_per_rb": self.samples_per_rb,
            },
            "channel": {
                "num_taps": self.num_taps,
                "tap_duration_ns": self.tap_duration_ns,
                "rays_per_cluster": self.rays_per_cluster,
                "cluster_table": self.cluster_table,
            },
            "geometry": {
                "inner_radius_m": self.inner_radius_m,
                "outer_radius_m": self.outer_radius_m,
            },
            "extractor": asdict(self.extractor),
            "detector": {
                "similarity_threshold": self.similarity_threshold,
                "update_policy": self.update_policy,
            },
            "energy": asdict(self.energy),
            "subspace": (None if self.subspace is None
                         else asdict(self.subspace)),
            "experiment": {
                "trials": self.trials,
                "master_seed": self.master_seed,
                "output_dir": self.output_dir,
                "workers": self.workers,
            },
        }

    def config_hash(self) -> str:
        """Stable short hash of every configuration field."""
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_yaml(self, path: str | Path) -> None:
        Path(path).write_text(
            yaml.safe_dump(self.to_dict(), sort_keys=False)
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        """Build a config from the nested plain-data layout.

        Missing sections or keys fall back to defaults; unknown keys are
        rejected so typos fail loudly.
        """
        if not isinstance(raw, dict):
            raise ConfigurationError("configuration root must be a mapping")
        section_fields = {
            "array": ("num_antennas", "element_spacing_wavelengths"),
            "users": ("num_users", "victim_index"),
            "radio": ("snr_db", "jsr_db", "link_gain", "victim_power"),
            "pilot": ("sequence_length", "shift_size", "rb_count",
                      "samples_per_rb"),
            "channel": ("num_taps", "tap_duration_ns", "rays_per_cluster",
                        "cluster_table"),
            "geometry": ("inner_radius_m", "outer_radius_m"),
            "detector": ("similarity_threshold", "update_policy"),
            "experiment": ("trials", "master_seed", "output_dir", "workers"),
        }
        kwargs: dict = {}
        for section, keys in section_fields.items():
            body = raw.get(section, {})
            if body is None:
                body = {}
            if not isinstance(body, dict):
                raise ConfigurationError(
                    f"section {section!r} must be a mapping"
                )
            unknown = set(body) - set(keys)
            if unknown:
                raise ConfigurationError(
                    f"unknown keys in section {section!r}: {sorted(unknown)}"
                )
            for key in keys:
                if key in body:
                    kwargs[key] = body[key]
        for section, config_cls, target in (
            ("extractor", ExtractorConfig, "extractor"),
            ("energy", EdConfig, "energy"),
            ("subspace", SdConfig, "subspace"),
        ):
            if section in raw and raw[section] is not None:
                body = raw[section]
                if not isinstance(body, dict):
                    raise ConfigurationError(
                        f"section {section!r} must be a mapping"
                    )
                valid = {f.name for f in fields(config_cls)}
                unknown = set(body) - valid
                if unknown:
                    raise ConfigurationError(
                        f"unknown keys in section {section!r}: "
                        f"{sorted(unknown)}"
                    )
                converted = {
                    key: (tuple(value) if isinstance(value, list) else value)
                    for key, value in body.items()
                }
                kwargs[target] = config_cls(**converted)
        known_sections = set(section_fields) | {"extractor", "energy",
                                                "subspace"}
        unknown_sections = set(raw) - known_sections
        if unknown_sections:
            raise ConfigurationError(
                f"unknown configuration sections: {sorted(unknown_sections)}"
            )
        return cls(**kwargs)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(
                f"cannot read configuration file {path}: {exc}"
            ) from exc
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(
                f"configuration file {path} is not valid YAML: {exc}"
            ) from exc
        if raw is None:
            raw = {}
        return cls.from_dict(raw)

    def with_overrides(self, **overrides) -> "ScenarioConfig":
        """Replace top-level fields, dropping ``None`` values."""
        cleaned = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **cleaned)
