"""Clustered-channel oracles: steering geometry, energy normalization,
area-uniform placement, and beam-domain sparsity of draws."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from spoofdet.channel import (
    ChannelRealization,
    ClusterTable,
    GeometryScenario,
    PolarPosition,
    beamspace,
    default_cluster_table,
    draw_channel,
    load_cluster_table,
    place_actors,
    steering_vector,
    vectorize_taps,
)
from spoofdet.errors import ClusterTableError, ConfigurationError


def single_cluster_table(azimuth_offset=0.0, spread=0.0, ricean_k_db=None):
    return ClusterTable(
        delays_ns=np.array([0.0]),
        powers=np.array([1.0]),
        azimuths_deg=np.array([azimuth_offset]),
        spreads_deg=np.array([spread]),
        ricean_k_db=ricean_k_db,
    )


def scenario_with_user_at(azimuth_deg, num_antennas=4, radius=110.0):
    return GeometryScenario(
        num_antennas=num_antennas,
        element_spacing_wavelengths=0.5,
        inner_radius_m=100.0,
        outer_radius_m=120.0,
        user_positions=(PolarPosition(radius, azimuth_deg),),
        attacker_position=PolarPosition(radius, azimuth_deg + 90.0),
    )


class TestClusterTable:
    def test_from_dict_normalizes_powers(self):
        table = ClusterTable.from_dict(
            {
                "delays_ns": [0.0, 100.0],
                "powers_db": [0.0, -10.0],
                "azimuths_deg": [0.0, 30.0],
                "spreads_deg": [1.0, 1.0],
            }
        )
        assert abs(table.powers.sum() - 1.0) < 1e-9
        assert table.powers[0] / table.powers[1] == pytest.approx(10.0)

    def test_default_table_loads_and_normalizes(self):
        table = default_cluster_table()
        assert table.num_clusters >= 2
        assert abs(table.powers.sum() - 1.0) < 1e-9
        assert np.all(np.diff(table.delays_ns) >= 0)
        assert table.ricean_k_db is not None

    def test_empty_table_rejected(self):
        with pytest.raises(ClusterTableError):
            ClusterTable(
                delays_ns=np.array([]),
                powers=np.array([]),
                azimuths_deg=np.array([]),
                spreads_deg=np.array([]),
            )

    def test_unsorted_delays_rejected(self):
        with pytest.raises(ClusterTableError):
            ClusterTable(
                delays_ns=np.array([100.0, 0.0]),
                powers=np.array([0.5, 0.5]),
                azimuths_deg=np.array([0.0, 0.0]),
                spreads_deg=np.array([1.0, 1.0]),
            )

    def test_missing_key_rejected(self):
        with pytest.raises(ClusterTableError):
            ClusterTable.from_dict({"delays_ns": [0.0]})


class TestGeometryScenario:
    def test_radius_outside_annulus_rejected(self):
        with pytest.raises(ConfigurationError):
            GeometryScenario(
                num_antennas=4,
                element_spacing_wavelengths=0.5,
                inner_radius_m=100.0,
                outer_radius_m=120.0,
                user_positions=(PolarPosition(95.0, 0.0),),
                attacker_position=PolarPosition(110.0, 0.0),
            )

    def test_position_resolution(self):
        sc = scenario_with_user_at(10.0)
        assert sc.position_of(0).azimuth_deg == 10.0
        assert sc.position_of("attacker").azimuth_deg == 100.0
        with pytest.raises(ConfigurationError):
            sc.position_of(5)


class TestSteering:
    def test_broadside_is_all_ones(self):
        np.testing.assert_allclose(steering_vector(8, 0.0), np.ones(8))

    def test_unit_magnitude_elements(self):
        v = steering_vector(16, 37.0)
        np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-12)


class TestDrawChannel:
    def test_zero_spread_broadside_proportional_to_ones(self):
        table = single_cluster_table(azimuth_offset=0.0, spread=0.0)
        sc = scenario_with_user_at(0.0, num_antennas=4)
        real = draw_channel(sc, table, 0, num_taps=1, tap_duration_ns=100.0, rng=7)
        row = real.taps[0]
        # All rays share the broadside direction, so the antenna response is
        # a common complex scalar times the all-ones vector.
        np.testing.assert_allclose(row, row[0] * np.ones(4), atol=1e-12)
        assert abs(row[0]) > 0

    def test_mean_energy_matches_cluster_power(self):
        table = single_cluster_table(spread=2.0)
        sc = scenario_with_user_at(25.0, num_antennas=8)
        rng = np.random.default_rng(123)
        n_draws = 10_000
        total = 0.0
        for _ in range(n_draws):
            real = draw_channel(sc, table, 0, 1, 100.0, rng)
            total += np.sum(np.abs(real.taps) ** 2)
        mean_energy = total / n_draws
        assert mean_energy == pytest.approx(8.0, rel=0.05)

    def test_default_table_mean_energy_is_m(self):
        table = default_cluster_table()
        sc = scenario_with_user_at(40.0, num_antennas=8)
        rng = np.random.default_rng(99)
        n_draws = 10_000
        total = 0.0
        for _ in range(n_draws):
            real = draw_channel(sc, table, 0, 4, 240.0, rng)
            total += np.sum(np.abs(real.taps) ** 2)
        assert total / n_draws == pytest.approx(8.0, rel=0.05)

    def test_sources_at_distinct_azimuths_peak_in_distinct_beams(self):
        table = single_cluster_table(spread=1.0)
        sc = GeometryScenario(
            num_antennas=32,
            element_spacing_wavelengths=0.5,
            inner_radius_m=100.0,
            outer_radius_m=120.0,
            user_positions=(PolarPosition(110.0, 0.0), PolarPosition(110.0, 60.0)),
            attacker_position=PolarPosition(110.0, 180.0),
        )
        rng = np.random.default_rng(5)
        spectra = np.zeros((2, 32))
        for _ in range(200):
            for idx in (0, 1):
                real = draw_channel(sc, table, idx, 1, 100.0, rng)
                spectra[idx] += np.abs(np.fft.fft(real.taps[0])) ** 2
        assert int(np.argmax(spectra[0])) != int(np.argmax(spectra[1]))

    def test_delay_beyond_tap_window_rejected(self):
        table = ClusterTable(
            delays_ns=np.array([0.0, 900.0]),
            powers=np.array([0.5, 0.5]),
            azimuths_deg=np.array([0.0, 30.0]),
            spreads_deg=np.array([1.0, 1.0]),
        )
        sc = scenario_with_user_at(0.0)
        with pytest.raises(ClusterTableError):
            draw_channel(sc, table, 0, num_taps=2, tap_duration_ns=240.0, rng=0)

    def test_clusters_land_on_nearest_taps(self):
        table = ClusterTable(
            delays_ns=np.array([0.0, 500.0]),
            powers=np.array([0.5, 0.5]),
            azimuths_deg=np.array([0.0, 30.0]),
            spreads_deg=np.array([0.0, 0.0]),
        )
        sc = scenario_with_user_at(0.0)
        real = draw_channel(sc, table, 0, num_taps=4, tap_duration_ns=240.0, rng=3)
        energies = np.sum(np.abs(real.taps) ** 2, axis=1)
        assert energies[0] > 0 and energies[2] > 0
        assert energies[1] == 0 and energies[3] == 0

    def test_reproducible_from_seed(self):
        table = default_cluster_table()
        sc = scenario_with_user_at(12.0, num_antennas=16)
        a = draw_channel(sc, table, 0, 4, 240.0, rng=42)
        b = draw_channel(sc, table, 0, 4, 240.0, rng=42)
        np.testing.assert_array_equal(a.taps, b.taps)


class TestBeamspaceSparsity:
    def test_energy_concentrates_in_few_beams(self):
        # The shipped profile has 4 clusters; averaged over draws, the top
        # 3 * 4 = 12 of 64 beams must hold at least 90% of the energy.
        table = default_cluster_table()
        sc = scenario_with_user_at(33.0, num_antennas=64)
        rng = np.random.default_rng(17)
        fractions = []
        for _ in range(200):
            real = draw_channel(sc, table, 0, 4, 240.0, rng)
            beams = beamspace(real.taps)
            beam_energy = np.sum(np.abs(beams) ** 2, axis=0)
            top = np.sort(beam_energy)[::-1][: 3 * table.num_clusters]
            fractions.append(top.sum() / beam_energy.sum())
        assert np.mean(fractions) >= 0.90

    def test_separated_sources_have_low_support_overlap(self):
        table = default_cluster_table()
        rng = np.random.default_rng(29)
        jaccards = []
        for _ in range(150):
            az1 = rng.uniform(0.0, 360.0)
            az2 = az1 + rng.uniform(20.0, 340.0)
            sc = GeometryScenario(
                num_antennas=64,
                element_spacing_wavelengths=0.5,
                inner_radius_m=100.0,
                outer_radius_m=120.0,
                user_positions=(
                    PolarPosition(110.0, az1),
                    PolarPosition(110.0, az2 % 360.0),
                ),
                attacker_position=PolarPosition(110.0, 0.0),
            )
            supports = []
            for idx in (0, 1):
                real = draw_channel(sc, table, idx, 4, 240.0, rng)
                beam_energy = np.sum(np.abs(beamspace(real.taps)) ** 2, axis=0)
                order = np.argsort(beam_energy)[::-1]
                cumulative = np.cumsum(beam_energy[order]) / beam_energy.sum()
                cutoff = int(np.searchsorted(cumulative, 0.9)) + 1
                supports.append(set(order[:cutoff].tolist()))
            a, b = supports
            jaccards.append(len(a & b) / len(a | b))
        assert np.mean(jaccards) < 0.5


class TestPlaceActors:
    def test_all_radii_within_range(self):
        positions = place_actors(119.0, 120.0, 500, rng=1)
        radii = np.array([p.radius_m for p in positions])
        assert np.all((radii >= 119.0) & (radii <= 120.0))

    def test_area_uniform_radius_law(self):
        positions = place_actors(100.0, 120.0, 100_000, rng=2)
        radii = np.array([p.radius_m for p in positions])

        def cdf(rho):
            return (np.asarray(rho) ** 2 - 100.0**2) / (120.0**2 - 100.0**2)

        ks = stats.kstest(radii, cdf)
        assert ks.statistic < 0.01

    def test_count_zero_gives_empty_list(self):
        assert place_actors(100.0, 120.0, 0, rng=3) == []

    def test_inverted_annulus_rejected(self):
        with pytest.raises(ConfigurationError):
            place_actors(120.0, 100.0, 5, rng=0)

    @given(
        inner=st.floats(min_value=1.0, max_value=100.0),
        width=st.floats(min_value=0.5, max_value=50.0),
        count=st.integers(min_value=0, max_value=50),
        seed=st.integers(min_value=0, max_value=10**6),
    )
    @settings(max_examples=40, deadline=None)
    def test_containment_property(self, inner, width, count, seed):
        outer = inner + width
        for p in place_actors(inner, outer, count, rng=seed):
            assert inner <= p.radius_m <= outer
            assert 0.0 <= p.azimuth_deg < 360.0


class TestBeamspaceTransform:
    @given(seed=st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=30, deadline=None)
    def test_unitary(self, seed):
        rng = np.random.default_rng(seed)
        taps = rng.normal(size=(3, 8)) + 1j * rng.normal(size=(3, 8))
        assert np.linalg.norm(beamspace(taps)) == pytest.approx(
            np.linalg.norm(taps), rel=1e-12
        )

    def test_vectorize_is_tap_major(self):
        taps = np.arange(6).reshape(2, 3) + 0j
        vec = vectorize_taps(taps)
        # coordinate i = tap * M + column
        assert vec[0 * 3 + 2] == taps[0, 2]
        assert vec[1 * 3 + 1] == taps[1, 1]
