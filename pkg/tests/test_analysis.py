import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oamopto.analysis import (RotationalProbe, Spectrum, cooling_diagnostic, detect_rotation, displacement_sensitivity,
                              homodyne_signal, integrate_linearized_rotational, linear_response_rotational,
                              output_spectrum, phase_slope, power_sweep, spectrum_of, thermal_initial_states)
from oamopto.coupling import CavityParams, MechanicalParams
from oamopto.dynamics import NoiseConfig, Trajectory

OMEGA0 = 2 * math.pi * 3e14


def tone(omega, n=40000, dt=1e-3, amp=1.0, phase=0.0):
    t = np.arange(n) * dt
    return amp * np.sin(omega * t + phase)


class TestSpectrum:
    def test_pure_tone_peak(self):
        spec = spectrum_of(tone(123.4), 1e-3)
        det = detect_rotation(spec, (1.0, 3000.0))
        assert abs(det.omega_d - 123.4) < 0.1 * spec.resolution

    def test_segments_and_resolution(self):
        spec = spectrum_of(np.zeros(9000), 1e-3)
        assert spec.n_segments >= 8
        assert spec.resolution == pytest.approx(2 * math.pi / (2000 * 1e-3))
        assert spec.window == "hann"

    def test_peak_estimator_unbiased(self):
        rng = np.random.default_rng(11)
        errs = []
        for w in rng.uniform(50, 2500, 100):
            spec = spectrum_of(tone(w, phase=rng.uniform(0, 2 * math.pi)), 1e-3)
            errs.append((detect_rotation(spec, (10.0, 3000.0)).omega_d - w) / spec.resolution)
        errs = np.array(errs)
        assert np.max(np.abs(errs)) < 0.5
        assert abs(errs.mean()) < 3 * errs.std() / math.sqrt(errs.size) + 1e-3

    def test_white_noise_flat(self):
        x = np.random.default_rng(2).standard_normal(2**18)
        spec = spectrum_of(x, 1e-3)
        level = 1e-3 / math.pi  # one-sided density per rad/s for unit variance
        interior = spec.psd[5:-5]
        assert np.median(interior) == pytest.approx(level, rel=0.05)
        halves = np.array_split(interior, 4)
        assert np.ptp([h.mean() for h in halves]) < 0.05 * level

    def test_parseval(self):
        x = np.random.default_rng(4).standard_normal(2**16) * 3.0
        spec = spectrum_of(x, 2e-3)
        area = np.sum(spec.psd) * (spec.freqs[1] - spec.freqs[0])
        assert area == pytest.approx(np.var(x), rel=0.02)

    def test_short_record(self):
        with pytest.raises(ValueError, match="too short"):
            spectrum_of(np.zeros(50), 1e-3)

    def test_empty_band(self):
        spec = spectrum_of(tone(100.0), 1e-3)
        with pytest.raises(ValueError, match="no spectral bins"):
            detect_rotation(spec, (5000.0, 6000.0))

    def test_csv(self, tmp_path):
        spec = spectrum_of(tone(100.0), 1e-3)
        text = spec.to_csv(tmp_path / "s.csv").read_text().splitlines()
        assert text[0] == "omega_rads,psd"
        assert len(text) == spec.freqs.size + 1


class TestHomodyne:
    def test_phase_quadrature(self):
        t = np.linspace(0, 1, 1001)
        alpha = 5 * np.exp(1j * (0.7 + 0.01 * np.sin(40 * t)))
        x = homodyne_signal(alpha)
        np.testing.assert_allclose(x, 5 * np.sin(0.01 * np.sin(40 * t) + 0.7 - np.angle(alpha.mean())), atol=1e-12)

    def test_record_length_minimum(self):
        t = np.arange(1000) * 1e-3
        traj = Trajectory("rotational", t, np.zeros_like(t), np.zeros_like(t), np.ones_like(t, dtype=complex),
                          1e-3, 1)
        with pytest.raises(ValueError, match="minimum"):
            output_spectrum(traj, beat_frequency=10.0)
        output_spectrum(traj, beat_frequency=100.0)


class TestLinearResponse:
    def make(self, dU0=1e-3 + 2e-4j, gamma_m=1e3):
        return linear_response_rotational(2, 10.0, 30.0 + 4j, 10.0, 1e-24, 0.05 - 0.02j, dU0, 1e-26,
                                          gamma_m=gamma_m)

    def test_matches_numeric(self):
        lr = self.make()
        t = np.linspace(0, 2.0, 4001)
        du, da, dl = integrate_linearized_rotational(lr, t)
        for num, ana in ((du, lr.delta_U(t)), (da, lr.delta_a(t)), (dl, lr.delta_Lz(t))):
            rms = np.sqrt(np.mean(np.abs(num - ana) ** 2) / np.mean(np.abs(ana) ** 2))
            assert rms < 1e-3

    def test_no_lattice_fluctuation_no_sideband(self):
        lr = self.make(dU0=0j)
        assert lr.B == 0
        t = np.linspace(0, 1, 11)
        np.testing.assert_allclose(lr.delta_a(t), lr.da0)

    def test_sideband_weights(self):
        lr = self.make()
        w = lr.spectral_weights()
        assert set(w) == {0.0, -lr.omega_s, lr.omega_s}
        assert lr.omega_s == pytest.approx(40.0)
        assert w[lr.omega_s] == pytest.approx(lr.B.conjugate())

    def test_rejects_off_resonance(self):
        with pytest.raises(ValueError):
            linear_response_rotational(2, 10.0, 1.0, 10.0, 1e-24, 0, 1e-3, detuning_prime=1.0)
        with pytest.raises(ValueError):
            linear_response_rotational(2, 10.0, 1.0, 10.0, 1e-24, 0, 1e-3, gamma0=1.0)


class TestSensitivity:
    @given(st.floats(1e3, 1e7), st.floats(1e10, 1e18), st.floats(-1e7, 1e7))
    @settings(max_examples=40)
    def test_finite_difference(self, gamma0, g, det):
        cav = CavityParams(0.01, OMEGA0, gamma0, det, 1e6)
        h = 1e-4 * max(gamma0, abs(det)) / g
        curve = displacement_sensitivity(cav, g, [-h, 0.0, h])
        fd = (curve.phase[2] - curve.phase[0]) / (2 * h)
        assert fd == pytest.approx(curve.slope, rel=1e-6)

    def test_resonant_value_and_scaling(self):
        g = 1e16
        s1 = phase_slope(CavityParams(0.01, OMEGA0, 2e5, 0.0, 1e6), g)
        s2 = phase_slope(CavityParams(0.01, OMEGA0, 1e5, 0.0, 1e6), g)
        assert s1 == pytest.approx(g / 1e5, rel=1e-12)
        assert s2 == pytest.approx(2 * s1, rel=1e-12)


class TestCooling:
    def test_thermal_draws(self):
        mech = MechanicalParams("vibrational", 1e-15, 1e6, 1e2, 300.0)
        q, p = thermal_initial_states(mech, 20000, 3)
        kt = 1.380649e-23 * 300
        assert np.mean(p**2) / (2 * mech.inertia) == pytest.approx(kt / 2, rel=0.05)
        assert np.array_equal(q, thermal_initial_states(mech, 20000, 3)[0])

    def test_red_detuning_cools(self):
        cav = CavityParams(0.01, OMEGA0, 2e5, 0.0, 2e6)
        mech = MechanicalParams("vibrational", 1e-15, 1e6, 1e2, 1e-4)
        pts = cooling_diagnostic(cav, mech, [0.0, 1e6, -1e6], coupling=1e16, duration=5e-3, n_traj=8, dt=5e-9,
                                 stride=20, seed=1)
        assert pts[1].mean_energy < pts[0].mean_energy
        assert pts[2].mean_energy > pts[0].mean_energy  # blue side heats
        assert not pts[1].unstable and pts[1].status == "stable"

    def test_needs_bound_oscillator(self):
        with pytest.raises(ValueError):
            cooling_diagnostic(CavityParams(0.01, OMEGA0, 1.0), MechanicalParams("vibrational", 1.0, 0.0, 1.0),
                               [0.0], coupling=1.0, duration=1.0)


def small_probe(**kw):
    cav = CavityParams(1e-3, OMEGA0, 1e3, 5.0)
    mech = MechanicalParams("rotational", 1e-24, 0.0, 1e3, 1e-3, 1e-20)
    return RotationalProbe(cav, mech, 10.0, 2, 20.0, dt=1e-5, stride=100, **kw)


class TestSweep:
    def test_reproducible_and_ordered(self):
        probe = small_probe()
        a = power_sweep(probe, [1e-8, 1e-3], [1, 2], workers=1)
        b = power_sweep(probe, [1e-8, 1e-3], [1, 2], workers=2)
        assert [(r.P_in, r.seed) for r in a.results] == [(1e-8, 1), (1e-8, 2), (1e-3, 1), (1e-3, 2)]
        assert a.results == b.results
        assert abs(a.mean_omega_d()[1e-8] - 40.0) < a.resolution
        assert a.critical_power == 1e-3
        assert abs(a.mean_rate()[1e-3]) < 0.1

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            power_sweep(small_probe(), [1e-3, 1e-8], [1])
        with pytest.raises(ValueError):
            power_sweep(small_probe(), [0.0], [1])

    def test_csv(self, tmp_path):
        res = power_sweep(small_probe(), [1e-8], [4])
        lines = res.to_csv(tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "P_in,seed,omega_d,snr,mean_rate"
        assert lines[1].startswith("1e-08,4,")
