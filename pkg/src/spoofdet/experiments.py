"""Monte Carlo experiment engine: paired trials, ROC curves, result files.

Each trial draws one deployment (geometry and channels), then produces the
decision statistics of all three detectors under both hypotheses with
common random numbers: the attack-present arm reuses every random draw of
the attack-absent arm and differs only by the attacker's deterministic
contribution.  All randomness is derived from ``(master seed, trial index,
stream id)`` so results are reproducible and independent of scheduling.

The per-trial observation builders use exact distributional shortcuts
instead of materialising the full ``(L, M, N)`` receive tensor:

* Fingerprint batches: the probe response of the clean tap-domain estimate
  is computed directly, and the estimate noise enters as one complex
  Gaussian per sample with variance ``tap-noise variance x ||probe||^2`` —
  exactly the law of projecting white estimate noise onto the probe.
* Energy-detector sketches: a random isotropic probe of the received
  vector gives ``|u^H y|^2 = ||y||^2 x Exp(1)``, and ``||clean + noise||^2``
  is one noncentral component plus a Gamma bulk.
* Subspace windows: the clean antenna-by-subcarrier receive matrix is
  assembled per actor from closed-form spectra (pilot spectrum times tap
  spectrum), and white receive noise is added to the snapshot rows.

The equivalence of these shortcuts with the full transmit/receive chain is
anchored by tests comparing noiseless outputs element-wise.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import ed_statistic, sd_statistic
from .channel import (
    ChannelRealization,
    GeometryScenario,
    beamspace,
    default_cluster_table,
    draw_channel,
    load_cluster_table,
    place_actors,
    vectorize_taps,
)
from .detector import StreamResult, run_stream, similarity
from .errors import (
    ConfigurationError,
    InsufficientDataError,
    SpoofdetError,
)
from .extractor import (
    SensingBatch,
    SparsityFingerprint,
    draw_gaussian_probes,
    extract,
)
from .link import SubframeObservation
from .scenario import ScenarioConfig

DETECTOR_NAMES = ("sparsity", "energy", "subspace")

# Alarm orientation per detector: +1 alarms on large statistics, -1 on
# small ones (the similarity detector alarms when the statistic drops).
_ORIENTATION = {"sparsity": -1.0, "energy": 1.0, "subspace": 1.0}

# Seed-stream identifiers.  Every random draw in a trial comes from
# SeedSequence(master, spawn_key=(trial, stream)), so changing one trial
# index changes only that trial's draws.
_STREAM_GEOMETRY = 0
_STREAM_ATTACKER_CHANNEL = 1
_STREAM_USER_CHANNEL = 100      # + user index
_STREAM_PROBES = 1000           # + subframe index
_STREAM_TAP_NOISE = 2000        # + subframe index
_STREAM_SKETCH = 3000           # + subframe index
_STREAM_SNAPSHOT_NOISE = 4000   # + subframe index


def trial_rng(master_seed: int, trial_index: int, stream: int) -> np.random.Generator:
    """Independent, reproducible generator for one purpose within one trial."""
    sequence = np.random.SeedSequence(
        entropy=master_seed, spawn_key=(trial_index, stream)
    )
    return np.random.default_rng(sequence)


@dataclass(frozen=True)
class ArmObservables:
    """Decision statistics of one hypothesis arm of one trial."""

    similarity: float
    energy: float
    subspace_dimension: int

    def statistic(self, detector: str) -> float:
        if detector == "sparsity":
            return self.similarity
        if detector == "energy":
            return self.energy
        if detector == "subspace":
            return float(self.subspace_dimension)
        raise ConfigurationError(
            f"unknown detector {detector!r}; expected one of {DETECTOR_NAMES}"
        )


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one paired trial, or its failure."""

    trial_index: int
    quiet: ArmObservables | None
    attacked: ArmObservables | None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class RocCurve:
    """Threshold-swept operating points of one detector."""

    detector: str
    points: tuple  # (p_fa, p_d, threshold) triples, p_fa ascending
    auc: float
    n_attack: int
    n_normal: int
    config_hash: str = ""

    def __post_init__(self) -> None:
        fa = [p[0] for p in self.points]
        pd = [p[1] for p in self.points]
        if any(not 0.0 <= v <= 1.0 for v in fa + pd):
            raise ConfigurationError("operating points must lie in [0, 1]")
        if any(b < a for a, b in zip(fa, fa[1:])):
            raise ConfigurationError("points must be sorted by false-alarm rate")
        if not 0.0 <= self.auc <= 1.0:
            raise ConfigurationError("area under the curve must lie in [0, 1]")


class TrialSimulator:
    """One trial's frozen deployment plus its observation builders.

    Construction draws the geometry and all channels; the builders then
    produce per-subframe observables for either hypothesis arm.  Every
    random quantity is regenerated from named seed streams, so calling a
    builder twice — or for both arms — replays identical draws.
    """

    def __init__(self, cfg: ScenarioConfig, trial_index: int):
        self.cfg = cfg
        self.trial_index = trial_index
        if cfg.cluster_table is None:
            table = default_cluster_table()
        else:
            table = load_cluster_table(cfg.cluster_table)
        positions = place_actors(
            cfg.inner_radius_m,
            cfg.outer_radius_m,
            cfg.num_users + 1,
            trial_rng(cfg.master_seed, trial_index, _STREAM_GEOMETRY),
        )
        self.geometry = GeometryScenario(
            num_antennas=cfg.num_antennas,
            element_spacing_wavelengths=cfg.element_spacing_wavelengths,
            inner_radius_m=cfg.inner_radius_m,
            outer_radius_m=cfg.outer_radius_m,
            user_positions=tuple(positions[: cfg.num_users]),
            attacker_position=positions[cfg.num_users],
        )
        self.channels = [
            draw_channel(
                self.geometry,
                table,
                k,
                cfg.num_taps,
                cfg.tap_duration_ns,
                trial_rng(cfg.master_seed, trial_index, _STREAM_USER_CHANNEL + k),
            )
            for k in range(cfg.num_users)
        ]
        self.attacker_channel = draw_channel(
            self.geometry,
            table,
            "attacker",
            cfg.num_taps,
            cfg.tap_duration_ns,
            trial_rng(cfg.master_seed, trial_index, _STREAM_ATTACKER_CHANNEL),
        )
        victim_taps = self.channels[cfg.victim_index].taps
        victim_energy = float(np.sum(np.abs(victim_taps) ** 2))
        attacker_energy = float(np.sum(np.abs(self.attacker_channel.taps) ** 2))
        if attacker_energy <= 0 or victim_energy <= 0:
            raise ConfigurationError(
                f"trial {trial_index}: drew a zero-energy channel"
            )
        # Amplitude ratio making the attacker's received energy exactly
        # jsr_linear times the victim's.
        self.rho = float(
            np.sqrt(cfg.jsr_linear * victim_energy / attacker_energy)
        )

        # Clean tap-domain fingerprint coordinates (beamspace, tap-major).
        self.psi_victim = vectorize_taps(beamspace(victim_taps))
        self.psi_attacker = self.rho * vectorize_taps(
            beamspace(self.attacker_channel.taps)
        )

        # Clean received energies for the energy detector's sketches.
        power = cfg.victim_power
        self.clean_energy_quiet = power * float(
            sum(np.sum(np.abs(ch.taps) ** 2) for ch in self.channels)
        )
        cross = 2.0 * self.rho * power * float(
            np.real(np.vdot(self.attacker_channel.taps, victim_taps))
        )
        self.clean_energy_attacked = (
            self.clean_energy_quiet
            + self.rho**2 * power * attacker_energy
            + cross
        )

        # Clean antenna-by-subcarrier receive matrices for the subspace
        # detector's snapshots.
        pool = cfg.build_pool()
        n = cfg.sequence_length
        base = np.zeros((cfg.num_antennas, n), dtype=np.complex128)
        for k, channel in enumerate(self.channels):
            base += np.sqrt(power) * self._clean_spectrum(
                pool.sequence_for_user(k), channel, n
            )
        attack_term = self.rho * np.sqrt(power) * self._clean_spectrum(
            pool.sequence_for_user(cfg.victim_index), self.attacker_channel, n
        )
        self.snapshot_quiet = base
        self.snapshot_attacked = base + attack_term

    @staticmethod
    def _clean_spectrum(
        pilot: np.ndarray, channel: ChannelRealization, n: int
    ) -> np.ndarray:
        """Unitary-FFT receive of one pilot through one channel, (M, N).

        Column ``n`` is ``pilot_spectrum[n] * tap_spectrum[n, :] / sqrt(N)``
        — the frequency-domain image of the circular convolution.
        """
        padded = np.zeros((n, channel.num_antennas), dtype=np.complex128)
        padded[: channel.num_taps] = channel.taps
        tap_spectrum = np.fft.fft(padded, axis=0)
        pilot_spectrum = np.fft.fft(np.asarray(pilot, dtype=np.complex128))
        return (pilot_spectrum[:, None] * tap_spectrum).T / np.sqrt(n)

    # ------------------------------------------------------------- builders

    def _clean_fingerprint_vector(self, attacked: bool) -> np.ndarray:
        if attacked:
            return self.psi_victim + self.psi_attacker
        return self.psi_victim

    def sensing_batch(self, subframe: int, attacked: bool) -> SensingBatch:
        """Probe-energy samples of one subframe's channel estimates."""
        cfg = self.cfg
        n_samples = cfg.n_samples
        dimension = cfg.fingerprint_dimension
        probes = draw_gaussian_probes(
            n_samples,
            dimension,
            trial_rng(cfg.master_seed, self.trial_index, _STREAM_PROBES + subframe),
        )
        noise_rng = trial_rng(
            cfg.master_seed, self.trial_index, _STREAM_TAP_NOISE + subframe
        )
        pair = noise_rng.normal(size=(n_samples, 2))
        psi = self._clean_fingerprint_vector(attacked)
        clean_response = probes.conj() @ psi
        probe_norms = np.linalg.norm(probes, axis=1)
        noise_scale = np.sqrt(cfg.tap_noise_variance / 2.0) * probe_norms
        response = clean_response + noise_scale * (pair[:, 0] + 1j * pair[:, 1])
        samples = np.abs(response) ** 2
        mean = float(samples.mean())
        normalized = False
        if mean > 0:
            samples = samples / mean
            normalized = True
        return SensingBatch(
            probes=probes,
            samples=samples,
            subframe_index=subframe,
            normalized=normalized,
        )

    def extract_fingerprint(
        self, subframe: int, attacked: bool
    ) -> SparsityFingerprint:
        return extract(self.sensing_batch(subframe, attacked), self.cfg.extractor)

    def energy_observation(
        self, subframe: int, attacked: bool
    ) -> SubframeObservation:
        """Isotropic-sketch energy samples of the raw received signal."""
        cfg = self.cfg
        n_samples = cfg.n_samples
        dimension = cfg.num_antennas * cfg.sequence_length
        rng = trial_rng(
            cfg.master_seed, self.trial_index, _STREAM_SKETCH + subframe
        )
        pair = rng.normal(size=(n_samples, 2))
        bulk = rng.gamma(shape=dimension - 1, scale=1.0, size=n_samples)
        sketch = rng.exponential(size=n_samples)
        sigma = cfg.receive_noise_variance
        amplitude = np.sqrt(
            self.clean_energy_attacked if attacked else self.clean_energy_quiet
        )
        radial = np.sqrt(sigma / 2.0)
        received_energy = (
            (amplitude + radial * pair[:, 0]) ** 2
            + (radial * pair[:, 1]) ** 2
            + sigma * bulk
        )
        return SubframeObservation(
            samples=received_energy * sketch, subframe_index=subframe
        )

    def snapshot_window(self, subframe: int, attacked: bool) -> np.ndarray:
        """Antenna-space snapshot rows for the subspace detector.

        One row per (pilot sample, subcarrier) pair: the clean antenna
        vector of that subcarrier plus white receive noise.
        """
        cfg = self.cfg
        rows_per_sample = cfg.sequence_length
        n_repeats = cfg.subspace_config().samples_per_subframe
        clean = (
            self.snapshot_attacked if attacked else self.snapshot_quiet
        ).T  # (N, M)
        rows = np.tile(clean, (n_repeats, 1))
        rng = trial_rng(
            cfg.master_seed, self.trial_index, _STREAM_SNAPSHOT_NOISE + subframe
        )
        sigma = cfg.receive_noise_variance
        if sigma > 0:
            shape = (n_repeats * rows_per_sample, cfg.num_antennas)
            rows = rows + np.sqrt(sigma / 2.0) * (
                rng.normal(size=shape) + 1j * rng.normal(size=shape)
            )
        return rows

    def arm_observables(
        self, reference: SparsityFingerprint, attacked: bool
    ) -> ArmObservables:
        """Test-subframe statistics of one arm against a fixed reference."""
        test = self.extract_fingerprint(2, attacked)
        c = similarity(reference, test)
        energy = ed_statistic(self.energy_observation(2, attacked))
        dimension = sd_statistic(
            self.snapshot_window(2, attacked), self.cfg.subspace_config()
        )
        return ArmObservables(
            similarity=c, energy=energy, subspace_dimension=dimension
        )


def run_single_trial(cfg: ScenarioConfig, trial_index: int) -> TrialRecord:
    """Run one paired trial; failures become records, not exceptions."""
    try:
        simulator = TrialSimulator(cfg, trial_index)
        reference = simulator.extract_fingerprint(1, attacked=False)
        quiet = simulator.arm_observables(reference, attacked=False)
        attacked = simulator.arm_observables(reference, attacked=True)
        return TrialRecord(trial_index, quiet, attacked)
    except SpoofdetError as exc:
        return TrialRecord(
            trial_index,
            None,
            None,
            error=f"trial {trial_index}: {type(exc).__name__}: {exc}",
        )


def _trial_task(payload) -> TrialRecord:
    cfg, index = payload
    return run_single_trial(cfg, index)


def run_trials(cfg: ScenarioConfig) -> list:
    """All trials of one scenario, ordered by trial index.

    With ``cfg.workers > 1`` trials run in a process pool; results are
    identical to the serial run because every trial is seeded from
    ``(master seed, trial index)`` alone.
    """
    indices = range(cfg.trials)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(
                pool.map(
                    _trial_task,
                    [(cfg, i) for i in indices],
                    chunksize=max(1, cfg.trials // (4 * cfg.workers)),
                )
            )
    else:
        records = [run_single_trial(cfg, i) for i in indices]
    return sorted(records, key=lambda r: r.trial_index)


# ----------------------------------------------------------------- ROC math


def detector_scores(records, detector: str) -> tuple:
    """(attack statistics, no-attack statistics) over completed trials."""
    if detector not in DETECTOR_NAMES:
        raise ConfigurationError(
            f"unknown detector {detector!r}; expected one of {DETECTOR_NAMES}"
        )
    attack = [
        r.attacked.statistic(detector) for r in records if not r.failed
    ]
    normal = [r.quiet.statistic(detector) for r in records if not r.failed]
    return np.asarray(attack, dtype=float), np.asarray(normal, dtype=float)


def auc_rank(attack_scores, normal_scores, orientation: float = 1.0) -> float:
    """Probability a random attack trial outscores a random quiet one.

    Midrank (tie-aware) formulation; equals the trapezoid area under the
    threshold-swept operating curve.
    """
    attack = orientation * np.asarray(attack_scores, dtype=float)
    normal = orientation * np.asarray(normal_scores, dtype=float)
    if attack.size == 0 or normal.size == 0:
        raise InsufficientDataError(
            "ranking needs at least one sample of each class"
        )
    pooled = np.concatenate([attack, normal])
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(pooled.size, dtype=float)
    ranks[order] = np.arange(1, pooled.size + 1, dtype=float)
    # midranks for ties
    sorted_vals = pooled[order]
    start = 0
    while start < pooled.size:
        stop = start
        while (
            stop + 1 < pooled.size
            and sorted_vals[stop + 1] == sorted_vals[start]
        ):
            stop += 1
        if stop > start:
            ranks[order[start : stop + 1]] = 0.5 * (start + stop) + 1.0
        start = stop + 1
    rank_sum = float(np.sum(ranks[: attack.size]))
    n_a, n_n = attack.size, normal.size
    return (rank_sum - n_a * (n_a + 1) / 2.0) / (n_a * n_n)


def roc_from_outcomes(records, detector: str, config_hash: str = "") -> RocCurve:
    """Threshold sweep over one detector's recorded statistics."""
    attack, normal = detector_scores(records, detector)
    if attack.size == 0 or normal.size == 0:
        raise InsufficientDataError(
            f"ROC for {detector!r} needs completed trials of both classes"
        )
    orientation = _ORIENTATION[detector]
    attack_s = orientation * attack
    normal_s = orientation * normal
    cuts = np.concatenate(
        [np.unique(np.concatenate([attack_s, normal_s]))[::-1], [-np.inf]]
    )
    points = []
    for cut in cuts:
        p_fa = float(np.mean(normal_s > cut))
        p_d = float(np.mean(attack_s > cut))
        threshold = float(orientation * cut)
        points.append((p_fa, p_d, threshold))
    points.sort(key=lambda p: (p[0], p[1]))
    fa = np.array([p[0] for p in points])
    pd = np.array([p[1] for p in points])
    auc = float(np.trapz(pd, fa))
    return RocCurve(
        detector=detector,
        points=tuple(points),
        auc=auc,
        n_attack=int(attack.size),
        n_normal=int(normal.size),
        config_hash=config_hash,
    )


def paired_auc_gap(
    records,
    detector_a: str,
    detector_b: str,
    n_boot: int = 300,
    seed: int = 0,
) -> tuple:
    """(gap, bootstrap standard error) of AUC(a) - AUC(b).

    Trials are resampled jointly, preserving the pairing between the two
    detectors' statistics within each trial.
    """
    complete = [r for r in records if not r.failed]
    if not complete:
        raise InsufficientDataError("no completed trials to resample")

    def gap_of(subset) -> float:
        values = []
        for name in (detector_a, detector_b):
            attack, normal = detector_scores(subset, name)
            values.append(auc_rank(attack, normal, _ORIENTATION[name]))
        return values[0] - values[1]

    base = gap_of(complete)
    rng = np.random.default_rng(seed)
    n = len(complete)
    draws = np.empty(n_boot)
    for b in range(n_boot):
        picks = rng.integers(0, n, size=n)
        draws[b] = gap_of([complete[i] for i in picks])
    return base, float(np.std(draws, ddof=1))


# ------------------------------------------------------------ multi-subframe


def fingerprint_stream(
    cfg: ScenarioConfig,
    trial_index: int,
    n_subframes: int,
    attack_start: int | None = None,
) -> list:
    """Per-subframe fingerprints of one deployment.

    The attack, if any, is active from subframe ``attack_start`` onward.
    """
    if n_subframes < 1:
        raise ConfigurationError("need at least one subframe")
    simulator = TrialSimulator(cfg, trial_index)
    out = []
    for subframe in range(1, n_subframes + 1):
        attacked = attack_start is not None and subframe >= attack_start
        out.append(simulator.extract_fingerprint(subframe, attacked))
    return out


@dataclass(frozen=True)
class CalibrationResult:
    """No-attack similarity statistics used to choose the alarm threshold."""

    similarities: tuple
    suggested_threshold: float
    quantile: float
    fraction_above_threshold: float
    threshold: float

    def cdf_points(self) -> tuple:
        values = np.sort(np.asarray(self.similarities))
        n = values.size
        return tuple(
            (float(v), (i + 1) / n) for i, v in enumerate(values)
        )


def calibrate(
    cfg: ScenarioConfig,
    n_streams: int = 20,
    subframes_per_stream: int = 11,
    quantile: float = 0.02,
) -> CalibrationResult:
    """Collect no-attack similarities and suggest an alarm threshold.

    Runs ``n_streams`` independent deployments for ``subframes_per_stream``
    subframes each without any attack, records every sequential similarity,
    and suggests the requested lower quantile as the threshold.
    """
    if n_streams < 1 or subframes_per_stream < 2:
        raise ConfigurationError(
            "calibration needs at least one stream of at least two subframes"
        )
    if not 0.0 < quantile < 1.0:
        raise ConfigurationError("quantile must lie strictly inside (0, 1)")
    values = []
    for stream in range(n_streams):
        fingerprints = fingerprint_stream(
            cfg, stream, subframes_per_stream, attack_start=None
        )
        result = run_stream(
            fingerprints,
            threshold=cfg.similarity_threshold,
            policy=cfg.update_policy,
        )
        values.extend(outcome.similarity for outcome in result.outcomes)
    similarities = np.asarray(values)
    return CalibrationResult(
        similarities=tuple(float(v) for v in similarities),
        suggested_threshold=float(np.quantile(similarities, quantile)),
        quantile=quantile,
        fraction_above_threshold=float(
            np.mean(similarities > cfg.similarity_threshold)
        ),
        threshold=cfg.similarity_threshold,
    )


@dataclass(frozen=True)
class DelayResult:
    """First-alarm positions of attack-onset streams."""

    first_alarms: tuple  # subframe index or None per stream
    attack_start: int
    n_subframes: int

    @property
    def median_first_alarm(self) -> float:
        filled = [
            float("inf") if alarm is None else float(alarm)
            for alarm in self.first_alarms
        ]
        return float(np.median(filled))

    @property
    def alarm_fraction(self) -> float:
        caught = sum(1 for a in self.first_alarms if a is not None)
        return caught / len(self.first_alarms)


def run_detection_delay(
    cfg: ScenarioConfig,
    attack_start: int = 4,
    n_subframes: int = 6,
    n_streams: int = 200,
) -> DelayResult:
    """Measure when the sequential detector first alarms after attack onset."""
    if attack_start < 2:
        raise ConfigurationError(
            "attack must start at subframe 2 or later (subframe 1 seeds "
            "the reference)"
        )
    if n_subframes < attack_start:
        raise ConfigurationError(
            "stream must extend at least to the attack-start subframe"
        )
    if n_streams < 1:
        raise ConfigurationError("need at least one stream")
    alarms = []
    for stream in range(n_streams):
        fingerprints = fingerprint_stream(
            cfg, stream, n_subframes, attack_start=attack_start
        )
        result: StreamResult = run_stream(
            fingerprints,
            threshold=cfg.similarity_threshold,
            policy=cfg.update_policy,
        )
        alarms.append(result.first_alarm_index)
    return DelayResult(
        first_alarms=tuple(alarms),
        attack_start=attack_start,
        n_subframes=n_subframes,
    )


# -------------------------------------------------------------- result files

SCHEMA_VERSION = 1


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def emit_results(
    curves,
    records,
    out_dir,
    cfg: ScenarioConfig,
    wall_time_s: float = 0.0,
    extra: dict | None = None,
) -> dict:
    """Write ROC tables, the per-trial log, and the run summary.

    Returns the summary dictionary.  Output is byte-stable across reruns
    with the same seed except for the wall-time field of the summary.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for curve in curves:
        rows = [
            (repr(p_fa), repr(p_d), repr(threshold),
             curve.n_attack, curve.n_normal)
            for p_fa, p_d, threshold in curve.points
        ]
        _write_csv(
            out / f"roc_{curve.detector}.csv",
            ("p_fa", "p_d", "threshold", "n_attack", "n_normal"),
            rows,
        )

    trial_rows = []
    for record in sorted(records, key=lambda r: r.trial_index):
        if record.failed:
            trial_rows.append(
                (record.trial_index, record.error, "", "", "", "", "", "")
            )
        else:
            trial_rows.append(
                (
                    record.trial_index,
                    "",
                    repr(record.quiet.similarity),
                    repr(record.attacked.similarity),
                    repr(record.quiet.energy),
                    repr(record.attacked.energy),
                    record.quiet.subspace_dimension,
                    record.attacked.subspace_dimension,
                )
            )
    _write_csv(
        out / "trials.csv",
        (
            "trial",
            "error",
            "similarity_quiet",
            "similarity_attack",
            "energy_quiet",
            "energy_attack",
            "subspace_quiet",
            "subspace_attack",
        ),
        trial_rows,
    )

    summary = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "trials": cfg.trials,
        "failed_trials": sum(1 for r in records if r.failed),
        "auc": {curve.detector: curve.auc for curve in curves},
        "wall_time_s": wall_time_s,
    }
    if extra:
        summary.update(extra)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def emit_calibration(result: CalibrationResult, out_dir, cfg: ScenarioConfig) -> dict:
    """Write the no-attack similarity CDF and the threshold suggestion."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "calibration.csv",
        ("similarity", "empirical_cdf"),
        [(repr(c), repr(f)) for c, f in result.cdf_points()],
    )
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg.config_hash(),
        "n_samples": len(result.similarities),
        "threshold": result.threshold,
        "fraction_above_threshold": result.fraction_above_threshold,
        "suggested_threshold": result.suggested_threshold,
        "quantile": result.quantile,
    }
    (out / "calibration.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> dict:
    """Full single-cell pipeline: trials, ROC per detector, files."""
    started = time.perf_counter()
    records = run_trials(cfg)
    complete = [r for r in records if not r.failed]
    if not complete:
        raise InsufficientDataError("every trial failed; nothing to report")
    config_hash = cfg.config_hash()
    curves = [
        roc_from_outcomes(records, name, config_hash)
        for name in DETECTOR_NAMES
    ]
    wall = time.perf_counter() - started
    destination = cfg.output_dir if out_dir is None else out_dir
    summary = emit_results(curves, records, destination, cfg, wall_time_s=wall)
    return summary


def run_sweep(cfg: ScenarioConfig, snr_values, rb_values, out_dir=None) -> dict:
    """Grid of scenarios over operating points, one subdirectory per cell."""
    root = Path(cfg.output_dir if out_dir is None else out_dir)
    cells = {}
    for snr_db in snr_values:
        for rb_count in rb_values:
            cell_cfg = replace(cfg, snr_db=float(snr_db), rb_count=int(rb_count))
            summary = run_scenario(cell_cfg, root / cell_cfg.cell_tag())
            cells[cell_cfg.cell_tag()] = summary["auc"]
    grid_summary = {
        "schema_version": SCHEMA_VERSION,
        "master_seed": cfg.master_seed,
        "trials_per_cell": cfg.trials,
        "cells": cells,
    }
    root.mkdir(parents=True, exist_ok=True)
    (root / "sweep.json").write_text(json.dumps(grid_summary, indent=2) + "\n")
    return grid_summary
