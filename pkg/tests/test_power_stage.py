import math

import numpy as np
import pytest

from errors import ConfigurationError, DutySaturationWarning, SizingError
from power_stage import (
    BoostSizing,
    ControlInputs,
    PlantParams,
    PlantState,
    boost_duty,
    boost_min_inductance,
    boost_output_voltage,
    dc_link_capacitance,
    grid_voltage,
    plant_derivatives,
    pwm_switch_states,
    size_from,
    stored_energy,
)

P = PlantParams()


class TestPlantDerivatives:
    def test_full_duty_shorts_inductor_to_source(self):
        d = plant_derivatives(PlantState(200.0, 5.0, 400.0, 3.0), ControlInputs(1.0, 0.2), 7.0, 100.0, P)
        assert d.x2 == pytest.approx(200.0 / P.l_o)

    def test_boost_branch_balance(self):
        u1 = 1 - 203 / 400
        d = plant_derivatives(PlantState(203.0, 7.35, 400.0, 0.0), ControlInputs(u1, 0.0), 7.35, 0.0, P)
        assert d.x1 == pytest.approx(0.0, abs=1e-9)
        assert d.x2 == pytest.approx(0.0, abs=1e-9)

    def test_full_equilibrium(self):
        u1 = 1 - 203 / 400
        x4 = (1 - u1) * 7.35 / 0.5
        d = plant_derivatives(PlantState(203.0, 7.35, 400.0, x4), ControlInputs(u1, 0.5), 7.35, 200.0, P)
        assert d == pytest.approx((0.0, 0.0, 0.0, 0.0), abs=1e-9)

    def test_parasitic_drops(self):
        lossy = PlantParams(r_lo=0.8, r_lg=0.6, r_on=0.1)
        s, u = PlantState(200.0, 5.0, 400.0, 3.0), ControlInputs(0.5, 0.4)
        ideal, real = plant_derivatives(s, u, 7.0, 100.0, P), plant_derivatives(s, u, 7.0, 100.0, lossy)
        assert ideal.x2 - real.x2 == pytest.approx((0.8 + 0.5 * 0.1) * 5.0 / P.l_o)
        assert ideal.x4 - real.x4 == pytest.approx((0.6 + 0.2) * 3.0 / P.l_g)
        assert real.x1 == ideal.x1 and real.x3 == ideal.x3

    def test_affine_in_duties(self):
        s = PlantState(203.0, 7.0, 398.0, 4.0)
        lossy = PlantParams(r_lo=0.8, r_lg=0.6, r_on=0.1)
        a, b = ControlInputs(0.2, -0.4), ControlInputs(0.7, 0.9)
        mix = ControlInputs(0.3 * a.u1 + 0.7 * b.u1, 0.3 * a.u2 + 0.7 * b.u2)
        expected = 0.3 * np.array(plant_derivatives(s, a, 7.1, 150.0, lossy)) \
            + 0.7 * np.array(plant_derivatives(s, b, 7.1, 150.0, lossy))
        assert np.allclose(plant_derivatives(s, mix, 7.1, 150.0, lossy), expected, rtol=1e-12)

    def test_linear_in_state_at_fixed_inputs(self):
        u = ControlInputs(0.45, 0.6)
        s1, s2 = PlantState(200.0, 6.0, 400.0, 3.0), PlantState(-20.0, 1.5, 12.0, -2.0)
        # zero PV current and grid voltage leave a purely linear system
        f = lambda s: np.array(plant_derivatives(s, u, 0.0, 0.0, P))  # noqa: E731
        combined = PlantState(*(2.0 * np.array(s1) - 3.0 * np.array(s2)))
        assert np.allclose(f(combined), 2.0 * f(s1) - 3.0 * f(s2), rtol=1e-12)


class TestPwmSwitchStates:
    def test_full_duty(self):
        assert all(pwm_switch_states(ControlInputs(1.0, 0.0), k * 1.3e-7, P).mu1 == 1 for k in range(200))

    def test_zero_modulation_averages_to_zero(self):
        mu2 = [pwm_switch_states(ControlInputs(0.5, 0.0), k * 1e-7, P).mu2 for k in range(1000)]
        assert np.mean(mu2) == 0.0

    def test_half_duty_over_one_carrier_period(self):
        mu1 = [pwm_switch_states(ControlInputs(0.5, 0.0), k * 1e-7, P).mu1 for k in range(100)]
        assert abs(sum(mu1) - 50) <= 1

    def test_inverter_average_follows_modulation(self):
        mu2 = [pwm_switch_states(ControlInputs(0.5, 0.6), k * 1e-7, P).mu2 for k in range(1000)]
        assert np.mean(mu2) == pytest.approx(0.6, abs=0.01)
        assert set(mu2) <= {-1, 0, 1}


class TestGridVoltage:
    def test_zero_crossing_and_peak(self):
        assert grid_voltage(0.0, P) == 0.0
        assert grid_voltage(1 / (4 * P.grid_freq), P) == pytest.approx(math.sqrt(2) * P.grid_v_rms)

    def test_rms_over_a_period(self):
        t = np.arange(2000) * (P.grid_period / 2000)
        v = np.array([grid_voltage(x, P) for x in t])
        assert math.sqrt(np.mean(v ** 2)) == pytest.approx(P.grid_v_rms, rel=1e-3)


class TestSizing:
    def test_min_inductance(self):
        z = BoostSizing(v_in=203.0, v_out=406.0, delta_i=1.0, f_s=1e5)
        assert boost_min_inductance(z) == pytest.approx(203 * 203 / (406 * 1e5))
        faster = BoostSizing(v_in=203.0, v_out=406.0, delta_i=1.0, f_s=2e5)
        assert boost_min_inductance(faster) == pytest.approx(boost_min_inductance(z) / 2)

    def test_inductance_vanishes_with_headroom(self):
        assert boost_min_inductance(BoostSizing(v_in=399.9999, v_out=400.0)) < 1e-8

    def test_no_boost_needed(self):
        with pytest.raises(SizingError):
            boost_min_inductance(BoostSizing(v_in=400.0, v_out=400.0))

    @pytest.mark.parametrize("duty,expected", [(0.5, 406.0), (0.0, 203.0), (0.4925, 400.0)])
    def test_output_voltage(self, duty, expected):
        assert boost_output_voltage(203.0, duty) == pytest.approx(expected, rel=1e-3)

    def test_duty_ceiling_warns(self):
        with pytest.warns(DutySaturationWarning):
            assert boost_output_voltage(203.0, 0.97) == pytest.approx(203.0 / 0.05)

    def test_duty_out_of_range(self):
        with pytest.raises(SizingError):
            boost_output_voltage(203.0, 1.0)

    def test_duty_from_on_time(self):
        assert boost_duty(5e-6, 1e5) == pytest.approx(0.5)
        with pytest.raises(SizingError):
            boost_duty(1e-5, 1e5)

    def test_dc_link_capacitance(self):
        c = dc_link_capacitance(1492.0, 0.1, 400.0, 2 * math.pi * 50)
        assert c == pytest.approx(2.97e-4, rel=2e-3)
        assert dc_link_capacitance(2984.0, 0.1, 400.0, 2 * math.pi * 50) == pytest.approx(2 * c)
        assert dc_link_capacitance(1492.0, 0.05, 400.0, 2 * math.pi * 50) == pytest.approx(2 * c)
        with pytest.raises(SizingError):
            dc_link_capacitance(1492.0, 0.3, 400.0, 2 * math.pi * 50)

    def test_size_from_on_time(self):
        out = size_from(BoostSizing(v_in=203.0, v_out=406.0, t_on=5e-6))
        assert out["duty"] == pytest.approx(0.5)
        assert out["v_out"] == pytest.approx(406.0)
        assert set(out) == {"l_min", "c_dc", "duty", "v_out"}


class TestPlantParams:
    def test_negative_capacitance_names_field(self):
        with pytest.raises(ConfigurationError, match="c_pv"):
            PlantParams(c_pv=-1.0)

    def test_lossless_flag(self):
        assert PlantParams().lossless
        assert not PlantParams(r_on=0.1).lossless

    def test_stored_energy(self):
        s = PlantState(200.0, 5.0, 400.0, 3.0)
        expected = 0.5 * (P.c_pv * 200 ** 2 + P.l_o * 25 + P.c_dc * 400 ** 2 + P.l_g * 9)
        assert stored_energy(s, P) == pytest.approx(expected)
