"""Tests for core reactor data types and configuration lookup."""

import datetime as dt

import pytest

from rtp.domain import (
    DEFAULT_CONFIGS,
    FULL_POWER_W,
    CoreConfiguration,
    PowerClassBins,
    ReactorState,
    TransientObservation,
    config_for_date,
    direction_of,
    reactivity_of_state,
)


def make_obs(p_i, p_f, date=dt.date(2014, 6, 1)):
    return TransientObservation(
        date=date,
        start_time=dt.time(10, 0),
        end_time=dt.time(10, 30),
        initial=ReactorState(p_i, (12.0, 12.0, 12.0, 12.0)),
        final=ReactorState(p_f, (13.0, 13.0, 13.0, 13.0)),
    )


class TestReactorState:
    def test_valid_state(self):
        state = ReactorState(1000.0, (0.0, 12.0, 24.0, 6.5))
        assert state.power == 1000.0

    def test_power_bounds(self):
        with pytest.raises(ValueError):
            ReactorState(0.0, (1.0, 1.0, 1.0, 1.0))
        with pytest.raises(ValueError):
            ReactorState(-5.0, (1.0, 1.0, 1.0, 1.0))
        with pytest.raises(ValueError):
            ReactorState(FULL_POWER_W + 1.0, (1.0, 1.0, 1.0, 1.0))
        # Full power itself is valid.
        ReactorState(FULL_POWER_W, (1.0, 1.0, 1.0, 1.0))

    def test_rod_height_bounds(self):
        with pytest.raises(ValueError):
            ReactorState(100.0, (25.0, 1.0, 1.0, 1.0))
        with pytest.raises(ValueError):
            ReactorState(100.0, (1.0, -0.1, 1.0, 1.0))

    def test_rod_count(self):
        with pytest.raises(ValueError):
            ReactorState(100.0, (1.0, 1.0, 1.0))


class TestTransientObservation:
    def test_duration_minutes(self):
        obs = make_obs(10.0, 100.0)
        assert obs.duration_minutes == 30.0

    def test_end_before_start_rejected(self):
        with pytest.raises(ValueError):
            TransientObservation(
                date=dt.date(2014, 6, 1),
                start_time=dt.time(10, 0),
                end_time=dt.time(9, 0),
                initial=ReactorState(10.0, (1.0, 1.0, 1.0, 1.0)),
                final=ReactorState(100.0, (2.0, 2.0, 2.0, 2.0)),
            )


class TestDirection:
    def test_up(self):
        assert direction_of(make_obs(10.0, 100.0)) == 1

    def test_down(self):
        assert direction_of(make_obs(100.0, 10.0)) == -1

    def test_zero_change_invalid(self):
        with pytest.raises(ValueError):
            direction_of(make_obs(50.0, 50.0))


class TestConfigForDate:
    def test_era_boundaries(self):
        # [DERIVED] from the configured start dates.
        cases = [
            (dt.date(2013, 6, 1), 120),
            (dt.date(2014, 1, 14), 120),
            (dt.date(2014, 1, 15), 121),
            (dt.date(2014, 10, 8), 121),
            (dt.date(2014, 10, 9), 122),
            (dt.date(2014, 10, 15), 122),
            (dt.date(2014, 10, 16), 123),
            (dt.date(2015, 8, 1), 123),
        ]
        for date, expected_id in cases:
            assert config_for_date(date).id == expected_id, date

    def test_fallback_before_first_start(self):
        assert config_for_date(dt.date(2012, 1, 1)).id == 120

    def test_order_independent(self):
        shuffled = (DEFAULT_CONFIGS[2], DEFAULT_CONFIGS[0], DEFAULT_CONFIGS[3], DEFAULT_CONFIGS[1])
        assert config_for_date(dt.date(2014, 10, 10), shuffled).id == 122


class TestReactivity:
    def test_half_withdrawal(self):
        # [DERIVED] 0.5 * (6.387 + 5.380 + 2.963 + 0.488) = 7.609
        config = DEFAULT_CONFIGS[0]
        state = ReactorState(100.0, (12.0, 12.0, 12.0, 12.0))
        assert reactivity_of_state(state, config) == pytest.approx(7.609, abs=1e-12)

    def test_partial_withdrawal(self):
        # [DERIVED] config 122: full rod1 + full reg = 6.597 + 0.387 = 6.984
        config = DEFAULT_CONFIGS[2]
        state = ReactorState(100.0, (24.0, 0.0, 0.0, 24.0))
        assert reactivity_of_state(state, config) == pytest.approx(6.984, abs=1e-12)

    def test_all_in_is_zero(self):
        state = ReactorState(100.0, (0.0, 0.0, 0.0, 0.0))
        for config in DEFAULT_CONFIGS:
            assert reactivity_of_state(state, config) == 0.0

    def test_total_worth(self):
        # [DERIVED] sums of the per-rod worth tables.
        assert DEFAULT_CONFIGS[0].total_worth() == pytest.approx(15.218, abs=1e-12)
        assert DEFAULT_CONFIGS[2].total_worth() == pytest.approx(15.345, abs=1e-12)
        assert DEFAULT_CONFIGS[3].total_worth() == pytest.approx(15.300, abs=1e-12)


class TestPowerClassBins:
    def test_defaults(self):
        bins = PowerClassBins()
        assert bins.n_classes == 5
        assert bins.ceilings[-1] == FULL_POWER_W

    def test_non_increasing_rejected(self):
        with pytest.raises(ValueError):
            PowerClassBins(ceilings=(90.0, 90.0, FULL_POWER_W))

    def test_wrong_top_rejected(self):
        with pytest.raises(ValueError):
            PowerClassBins(ceilings=(90.0, 900.0))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            PowerClassBins(ceilings=())


def test_configuration_worths_are_frozen():
    # Guard against accidental edits to the worth tables.
    expected = {
        120: (6.387, 5.380, 2.963, 0.488),
        121: (6.387, 5.380, 2.963, 0.488),
        122: (6.597, 5.398, 2.963, 0.387),
        123: (6.583, 5.267, 3.017, 0.433),
    }
    assert {c.id: c.rod_worths for c in DEFAULT_CONFIGS} == expected


def test_configuration_is_frozen_dataclass():
    with pytest.raises(AttributeError):
        DEFAULT_CONFIGS[0].id = 999


def test_core_configuration_type():
    config = CoreConfiguration(200, (1.0, 1.0, 1.0, 1.0), dt.date(2020, 1, 1))
    assert config.total_worth() == 4.0
