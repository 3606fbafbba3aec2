import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import ConfigurationError, ExtractionError
from pv_model import (
    SOLTECH_215,
    STC,
    Datasheet,
    EnvironmentInput,
    PVArray,
    PVPanelParams,
    PVSource,
    apply_environment,
    datasheet_errors,
    fit_single_diode,
    mpp_oracle,
    open_circuit_voltage,
    pv_current,
    unimodal_peaks,
)


class TestFitSingleDiode:
    def test_reproduces_datasheet_points(self, panel):
        assert max(datasheet_errors(panel, SOLTECH_215)) <= 0.02

    def test_parameter_ranges(self, panel):
        assert panel.r_s >= 0
        assert panel.r_p > 0
        assert 1.0 <= panel.a <= 2.0

    def test_ideal_limit_is_exact_at_the_ends(self):
        ideal = fit_single_diode(SOLTECH_215, ideal=True)
        assert ideal.r_s == 0.0
        assert math.isinf(ideal.r_p)
        one = PVArray(ideal, 1, 1)
        assert pv_current(0.0, STC, one) == pytest.approx(SOLTECH_215.i_sc, rel=1e-9)
        assert open_circuit_voltage(one, STC) == pytest.approx(SOLTECH_215.v_oc, rel=1e-9)

    def test_infeasible_datasheet(self):
        with pytest.raises(ExtractionError):
            fit_single_diode(Datasheet(v_oc=36.4, i_sc=7.84, v_mpp=40.0, p_max=215.0))
        with pytest.raises(ExtractionError):
            fit_single_diode(Datasheet(v_oc=36.4, i_sc=7.84, v_mpp=29.0, p_max=300.0))


class TestPvCurrent:
    def test_short_circuit(self, array):
        assert pv_current(0.0, STC, array) == pytest.approx(7.84, rel=0.02)

    def test_open_circuit(self, array):
        assert abs(pv_current(7 * 36.4, STC, array)) < 0.02 * 7.84

    def test_rated_point(self, array):
        assert 203.0 * pv_current(203.0, STC, array) == pytest.approx(1492.0, rel=0.03)

    def test_array_input_keeps_shape(self, array):
        v = np.linspace(0.0, 250.0, 12).reshape(3, 4)
        assert pv_current(v, STC, array).shape == (3, 4)
        assert isinstance(pv_current(100.0, STC, array), float)

    def test_bisection_agrees_with_newton(self, array):
        v = np.linspace(0.0, 250.0, 51)
        assert_allclose(pv_current(v, STC, array, method="bisect"), pv_current(v, STC, array), atol=1e-7)

    def test_monotone_in_voltage(self, array):
        for env in (STC, EnvironmentInput(400.0, 60.0)):
            v = np.linspace(0.0, open_circuit_voltage(array, env), 500)
            assert np.all(np.diff(pv_current(v, env, array)) < 0)

    def test_monotone_in_irradiance(self, array):
        levels = np.linspace(100.0, 1200.0, 12)
        for v in (0.0, 150.0, 200.0):
            i = [pv_current(v, EnvironmentInput(g, 25.0), array) for g in levels]
            assert np.all(np.diff(i) > 0)

    def test_unknown_method(self, array):
        with pytest.raises(ConfigurationError):
            pv_current(1.0, STC, array, method="secant")

    def test_series_and_parallel_scaling(self, panel):
        one = PVArray(panel, 1, 1)
        assert open_circuit_voltage(PVArray(panel, 7, 1), STC) == pytest.approx(
            7 * open_circuit_voltage(one, STC), rel=1e-9)
        assert pv_current(0.0, STC, PVArray(panel, 1, 2)) == pytest.approx(
            2 * pv_current(0.0, STC, one), rel=1e-9)


class TestApplyEnvironment:
    def test_identity_at_stc(self, panel):
        c = apply_environment(panel, STC)
        assert c.i_ph == panel.i_ph_stc
        assert c.i_0 == panel.i_0_stc

    def test_photocurrent_scales_with_irradiance(self, panel):
        half = apply_environment(panel, EnvironmentInput(500.0, 25.0))
        assert half.i_ph == pytest.approx(0.5 * panel.i_ph_stc)

    def test_saturation_current_grows_with_temperature(self, panel):
        assert apply_environment(panel, EnvironmentInput(1000.0, 50.0)).i_0 > panel.i_0_stc

    @pytest.mark.parametrize("g,t", [(-1.0, 25.0), (2000.0, 25.0), (1000.0, 120.0)])
    def test_environment_range(self, g, t):
        with pytest.raises(ConfigurationError):
            EnvironmentInput(g, t)


class TestMppOracle:
    def test_stc(self, array):
        v, p = mpp_oracle(array, STC)
        assert abs(v - 203.0) < 4.0
        assert abs(p - 1492.0) < 30.0

    @pytest.mark.parametrize("g,t,p_ref", [(800.0, 30.0, 1202.0), (700.0, 35.0, 1050.5)])
    def test_derated_cases(self, array, g, t, p_ref):
        assert mpp_oracle(array, EnvironmentInput(g, t)).p_mpp == pytest.approx(p_ref, rel=0.03)

    def test_dark(self, array):
        assert mpp_oracle(array, EnvironmentInput(0.0, 25.0)).p_mpp == 0.0

    def test_oracle_beats_the_scan(self, array):
        v = np.linspace(0.0, open_circuit_voltage(array, STC), 500)
        assert mpp_oracle(array, STC).p_mpp >= np.max(v * pv_current(v, STC, array)) - 1e-9

    def test_single_peak(self, array):
        assert unimodal_peaks(array, STC) == 1


class TestPVSource:
    def test_matches_vectorised_solver(self, array):
        src = PVSource(array, STC)
        for v in (0.0, 150.0, 203.0, 240.0, 120.0):
            assert src.current(v) == pytest.approx(pv_current(v, STC, array), abs=1e-8)

    def test_environment_switch(self, array):
        src = PVSource(array, STC)
        env = EnvironmentInput(700.0, 35.0)
        src.set_environment(env)
        assert src.v_oc == pytest.approx(open_circuit_voltage(array, env))
        assert src.current(180.0) == pytest.approx(pv_current(180.0, env, array), abs=1e-8)


class TestParams:
    @pytest.mark.parametrize("field,value", [("r_s", -0.1), ("r_p", 0.0), ("a", 2.5), ("i_0_stc", 0.0)])
    def test_validation_names_field(self, field, value):
        args = {"i_ph_stc": 7.84, "i_0_stc": 1e-7, "r_s": 0.3, "r_p": 300.0, "a": 1.3, field: value}
        with pytest.raises(ConfigurationError, match=field):
            PVPanelParams(**args)
