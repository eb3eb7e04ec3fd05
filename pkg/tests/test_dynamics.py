import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import optimize
from scipy.constants import hbar, k as k_B

from oamopto import dynamics as dyn
from oamopto._accel import HAVE_NUMBA
from oamopto.coupling import CavityParams, MechanicalParams, torsional_coupling
from oamopto.dynamics import (NoiseConfig, RotationalState, SimulationDiverged, TorsionalState, VibrationalState,
                              adiabatic_field, rotational_steady_state, simulate_rotational, simulate_torsional,
                              simulate_vibrational)

OMEGA0 = 2 * math.pi * 3e14
G_VIB = 1e16


def cooling_setup(detuning=1e6, drive=2e6, T=1e-4):
    cav = CavityParams(0.01, OMEGA0, 2e5, detuning, drive)
    mech = MechanicalParams("vibrational", 1e-15, 1e6, 1e3, T)
    return cav, mech


def rotor(T=1e-3, torque=1e-20, gamma=1e3):
    return MechanicalParams("rotational", 1e-24, 0.0, gamma, T, torque)


backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


class TestDeterminism:
    def test_same_seed_bitwise(self):
        cav, mech = cooling_setup()
        a = simulate_vibrational(VibrationalState(), cav, mech, coupling=G_VIB, dt=1e-8, n_steps=20000,
                                 noise=NoiseConfig(seed=7), n_traj=2)
        b = simulate_vibrational(VibrationalState(), cav, mech, coupling=G_VIB, dt=1e-8, n_steps=20000,
                                 noise=NoiseConfig(seed=7), n_traj=2)
        c = simulate_vibrational(VibrationalState(), cav, mech, coupling=G_VIB, dt=1e-8, n_steps=20000,
                                 noise=NoiseConfig(seed=8), n_traj=2)
        assert np.array_equal(a.coord, b.coord) and np.array_equal(a.alpha, b.alpha)
        assert not np.array_equal(a.coord, c.coord)

    def test_trajectory_independent_of_ensemble_layout(self):
        # crosses a noise-chunk boundary on purpose
        cav, mech = cooling_setup()
        n = dyn.CHUNK_STEPS + 123
        ens = simulate_vibrational(VibrationalState(), cav, mech, coupling=G_VIB, dt=1e-8, n_steps=n,
                                   noise=NoiseConfig(seed=3), n_traj=3)
        one = simulate_vibrational(VibrationalState(), cav, mech, coupling=G_VIB, dt=1e-8, n_steps=n,
                                   noise=NoiseConfig(seed=3), first_index=2)
        assert np.array_equal(ens.coord[:, 2], one.coord[:, 0])

    @pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
    def test_backends_agree_linear(self):
        cav, mech = cooling_setup()
        kw = dict(coupling=G_VIB, dt=1e-8, n_steps=5000, stride=7, noise=NoiseConfig(seed=1), n_traj=3)
        a = simulate_vibrational(VibrationalState(1e-12, 0, 3 + 1j), cav, mech, backend="numba", **kw)
        b = simulate_vibrational(VibrationalState(1e-12, 0, 3 + 1j), cav, mech, backend="numpy", **kw)
        assert np.array_equal(a.coord, b.coord) and np.array_equal(a.alpha, b.alpha)

    @pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
    def test_backends_agree_rotational(self):
        cav = CavityParams(1e-3, OMEGA0, 1e3, 5.0, 1e6)
        kw = dict(dt=1e-5, n_steps=5000, stride=5, noise=NoiseConfig(seed=1), n_traj=2)
        a = simulate_rotational(RotationalState(0.2, 1e-23, 10j), cav, rotor(), 10.0, 2, backend="numba", **kw)
        b = simulate_rotational(RotationalState(0.2, 1e-23, 10j), cav, rotor(), 10.0, 2, backend="numpy", **kw)
        np.testing.assert_allclose(a.coord, b.coord, rtol=1e-12)
        np.testing.assert_allclose(a.alpha, b.alpha, rtol=1e-12)

    def test_env_flag_selects_numpy(self):
        code = "from oamopto._accel import default_backend; print(default_backend())"
        env = dict(os.environ, OAMOPTO_DISABLE_NUMBA="1")
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numpy"


class TestVibrational:
    @pytest.mark.parametrize("backend", backends)
    def test_dark_cavity_is_damped_oscillator(self, backend):
        w, gam, m = 1e6, 2e4, 1e-15
        cav = CavityParams(0.01, OMEGA0, 2e5)
        mech = MechanicalParams("vibrational", m, w, gam)
        ens = simulate_vibrational(VibrationalState(1e-12, 0.0, 0j), cav, mech, coupling=G_VIB, dt=1e-9,
                                   n_steps=20000, stride=100, backend=backend)
        t = ens.t
        wd = math.sqrt(w * w - gam * gam / 4)
        q = 1e-12 * np.exp(-gam * t / 2) * (np.cos(wd * t) + gam / (2 * wd) * np.sin(wd * t))
        # Heun phase error is O((w dt)^2) per radian
        np.testing.assert_allclose(ens.coord[:, 0], q, atol=1e-5 * 1e-12)
        assert np.all(ens.alpha == 0)

    def test_second_order_convergence(self):
        cav = CavityParams(0.01, OMEGA0, 2e5, 3e5, 0.0)
        mech = MechanicalParams("vibrational", 1e-15, 1e6, 1e4)
        s0 = VibrationalState(2e-12, 0.0, 30 + 0j)
        kw = dict(coupling=G_VIB, duration=2e-5, noise=NoiseConfig(include_thermal=False))
        ref = simulate_vibrational(s0, cav, mech, dt=1e-10 / 8, **kw)[0].final_state()
        errs = []
        for dt in (4e-10, 2e-10):
            s = simulate_vibrational(s0, cav, mech, dt=dt, **kw)[0].final_state()
            errs.append(abs(s.q - ref.q) / abs(ref.q) + abs(s.alpha - ref.alpha) / abs(ref.alpha))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)

    def test_energy_conserved_short(self):
        cav = CavityParams(0.01, OMEGA0, 0.0, 2e5, 0.0)
        mech = MechanicalParams("vibrational", 1e-12, 2 * math.pi * 1e5, 0.0)
        s0 = VibrationalState(1e-12, 0.0, 100 + 0j)
        ens = simulate_vibrational(s0, cav, mech, duration=20 * 2 * math.pi / mech.omega_m, stride=1000)
        e = dyn.linear_energy(ens[0], cav, mech, dyn.vibrational_coupling(cav))
        assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-7

    def test_photon_number_conserved_without_loss(self):
        cav = CavityParams(0.01, OMEGA0, 0.0, 2e5, 0.0)
        mech = MechanicalParams("vibrational", 1e-12, 2 * math.pi * 1e5, 0.0)
        ens = simulate_vibrational(VibrationalState(1e-12, 0.0, 100 + 0j), cav, mech, n_steps=10000)
        np.testing.assert_allclose(np.abs(ens.alpha[:, 0]) ** 2, 1e4, rtol=1e-9)


class TestAdiabatic:
    def test_resonant_origin(self):
        cav = CavityParams(0.01, OMEGA0, 2e5, 0.0, 3e6)
        a = adiabatic_field(0.0, cav, G_VIB)
        assert a == pytest.approx(2 * 3e6 / 2e5)
        assert a.imag == 0

    def test_polar_magnitude_and_phase(self):
        cav = CavityParams(0.01, OMEGA0, 2e5, 0.0, 3e6)
        q = np.linspace(-2e-11, 2e-11, 9)
        a = adiabatic_field(q, cav, G_VIB)
        np.testing.assert_allclose(np.abs(a), 3e6 / np.sqrt(1e5**2 + (G_VIB * q) ** 2), rtol=1e-13)
        np.testing.assert_allclose(np.angle(a), np.arctan(G_VIB * q / 1e5), rtol=1e-12, atol=1e-15)

    def test_is_fixed_point_of_field_equation(self):
        cav = CavityParams(0.01, OMEGA0, 2e5, 7e4, 3e6)
        q = 3e-12
        a = adiabatic_field(q, cav, G_VIB)
        rhs = -(1j * cav.detuning + cav.gamma0 / 2) * a + 1j * G_VIB * q * a + cav.drive
        assert abs(rhs) < 1e-9 * cav.drive

    def test_bad_cavity_tracking(self):
        w = 1e4
        cav = CavityParams(0.01, OMEGA0, 100 * w, 0.0, 1e7)
        mech = MechanicalParams("vibrational", 1e-9, w, 10.0)
        g = 1e17
        s0 = VibrationalState(5e-12, 0.0, adiabatic_field(5e-12, cav, g))
        ens = simulate_vibrational(s0, cav, mech, coupling=g, dt=1e-8, duration=2e-3, stride=10,
                                   noise=NoiseConfig(include_thermal=False))
        tr = ens[0]
        ad = adiabatic_field(tr.coord, cav, g)
        rms = np.sqrt(np.mean(np.abs(tr.alpha - ad) ** 2) / np.mean(np.abs(ad) ** 2))
        assert rms < 0.02


class TestTorsional:
    def params(self, gamma=2e3):
        cav = CavityParams(0.01, OMEGA0, 1e6, 0.0, drive_for(1e-9, 1e6))
        mech = MechanicalParams("torsional", 1e-20, 2 * math.pi * 1e3, gamma)
        return cav, mech

    def test_dark_cavity_pendulum(self):
        cav, mech = self.params(gamma=100.0)
        cav = CavityParams(cav.L, cav.omega0, cav.gamma0)
        ens = simulate_torsional(TorsionalState(1e-6, 0.0, 0j), cav, mech, 6e10, dt=1e-7, duration=2e-3,
                                 stride=10)
        w, gam = mech.omega_m, mech.gamma_m
        wd = math.sqrt(w * w - gam * gam / 4)
        t = ens.t
        ref = 1e-6 * np.exp(-gam * t / 2) * (np.cos(wd * t) + gam / (2 * wd) * np.sin(wd * t))
        np.testing.assert_allclose(ens.coord[:, 0], ref, atol=1e-5 * 1e-6)

    def test_static_deflection(self):
        cav, mech = self.params()
        g = torsional_coupling(2, cav.L)

        def balance(phi):
            return mech.inertia * mech.omega_m**2 * phi - hbar * g * abs(adiabatic_field(phi, cav, g)) ** 2

        phi_eq = optimize.brentq(balance, -1e-5, 1e-5, xtol=1e-20)
        ens = simulate_torsional(TorsionalState(0.0, 0.0, adiabatic_field(0.0, cav, g)), cav, mech, g,
                                 dt=1e-8, duration=1e-2, stride=1000)
        assert ens.coord[-1, 0] == pytest.approx(phi_eq, rel=1e-4)
        n_s = abs(adiabatic_field(0.0, cav, g)) ** 2
        # the linearized estimate ignores the deflection-induced detuning, so it overshoots slightly
        linear = hbar * g * n_s / (mech.inertia * mech.omega_m**2)
        assert phi_eq < linear < 1.005 * phi_eq

    def test_coupling_parity(self):
        cav, mech = self.params()
        cav = CavityParams(cav.L, cav.omega0, cav.gamma0)
        s = TorsionalState(1e-7, 0.0, 300 + 0j)
        kw = dict(dt=1e-8, n_steps=20000, stride=100, noise=NoiseConfig(include_thermal=False))
        a = simulate_torsional(s, cav, mech, 6e10, **kw)
        b = simulate_torsional(TorsionalState(-1e-7, 0.0, 300 + 0j), cav, mech, -6e10, **kw)
        np.testing.assert_allclose(a.coord, -b.coord, rtol=1e-12, atol=1e-25)


def drive_for(power, gamma0):
    from oamopto.coupling import drive_from_power
    return drive_from_power(power, gamma0, OMEGA0)


class TestRotational:
    def test_free_relaxation(self):
        cav = CavityParams(1e-3, OMEGA0, 1e3)
        mech = rotor(T=0.0)
        ens = simulate_rotational(RotationalState(0.0, 0.0, 0j), cav, mech, 0.0, 2, dt=1e-6, duration=5e-3,
                                  stride=50)
        lz_inf = mech.torque / mech.gamma_m
        np.testing.assert_allclose(ens.momentum[:, 0], lz_inf * (1 - np.exp(-mech.gamma_m * ens.t)),
                                   rtol=1e-6, atol=1e-10 * lz_inf)

    def test_unit_modulus(self):
        cav = CavityParams(1e-3, OMEGA0, 1e3, 5.0, 1e5)
        ens = simulate_rotational(RotationalState(0.0, 1e-23, 0j), cav, rotor(), 10.0, 3, dt=1e-5, n_steps=5000)
        u = np.exp(2j * 3 * ens.coord[:, 0])
        np.testing.assert_allclose(np.abs(u), 1.0, rtol=0, atol=1e-15)
        assert ens[0].final_state().U(3) == pytest.approx(u[-1])

    def test_energy_conserved_without_loss(self):
        cav = CavityParams(1e-3, OMEGA0, 0.0, 0.0, 0.0)
        mech = MechanicalParams("rotational", 1e-24, 0.0, 0.0)
        s0 = RotationalState(0.1, 1e-23, 1e5 + 0j)
        ens = simulate_rotational(s0, cav, mech, 5.0, 2, duration=10 * 2 * math.pi / 10, stride=1000)
        e = dyn.rotational_energy(ens[0], cav, mech, 5.0, 2)
        assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-8

    def test_steady_state_values(self):
        cav = CavityParams(1e-3, OMEGA0, 1e3, 5.0, 1e5)
        ss = rotational_steady_state(cav, rotor(), 10.0)
        assert ss.omega_ms == pytest.approx(10.0)
        dp = cav.detuning - 10.0 / 2
        assert abs(ss.alpha_s) == pytest.approx(1e5 / math.sqrt(dp**2 + (1e3 / 2) ** 2))
        assert ss.U_time_average == 0 and ss.U_modulus == 1.0
        assert rotational_steady_state(cav, rotor(torque=0.0), 10.0).omega_ms == 0.0
        assert math.isinf(rotational_steady_state(cav, rotor(gamma=0.0), 10.0).omega_ms)

    def test_invalid_l(self):
        with pytest.raises(ValueError):
            simulate_rotational(RotationalState(), CavityParams(1e-3, OMEGA0, 1e3), rotor(), 1.0, 0, dt=1e-5,
                                n_steps=1)


class TestGuards:
    def test_dt_guard(self):
        cav, mech = cooling_setup()
        with pytest.raises(ValueError, match="too large"):
            simulate_vibrational(VibrationalState(), cav, mech, coupling=G_VIB, dt=1e-6, n_steps=10)

    def test_divergence_reported(self):
        cav, mech = cooling_setup()
        with pytest.raises(SimulationDiverged) as info:
            simulate_vibrational(VibrationalState(math.nan, 0.0, 0j), cav, mech, coupling=G_VIB, dt=1e-9,
                                 n_steps=10)
        assert info.value.step >= 1

    def test_needs_duration(self):
        cav, mech = cooling_setup()
        with pytest.raises(ValueError):
            simulate_vibrational(VibrationalState(), cav, mech, coupling=G_VIB, dt=1e-9)


class TestSteppers:
    def test_step_matches_driver_without_noise(self):
        cav, mech = cooling_setup(T=0.0)
        s0 = VibrationalState(1e-12, 1e-20, 3 + 2j)
        one = dyn.step_vibrational(s0, cav, mech, 1e-9, coupling=G_VIB)
        ref = simulate_vibrational(s0, cav, mech, coupling=G_VIB, dt=1e-9, n_steps=1)[0].final_state()
        assert one == ref

    def test_step_reproducible_with_rng(self):
        cav, mech = cooling_setup(T=300.0)
        s0 = VibrationalState(0.0, 0.0, 1 + 0j)
        a = dyn.step_vibrational(s0, cav, mech, 1e-9, np.random.default_rng(5), coupling=G_VIB)
        b = dyn.step_vibrational(s0, cav, mech, 1e-9, np.random.default_rng(5), coupling=G_VIB)
        assert a == b and a.p != 0.0

    def test_step_torsional_and_rotational(self):
        cav = CavityParams(1e-3, OMEGA0, 1e3, 5.0, 1e5)
        s = dyn.step_rotational(RotationalState(0.0, 1e-23, 0j), cav, rotor(T=0.0), 10.0, 2, 1e-5)
        assert s.phi == pytest.approx(1e-23 / 1e-24 * 1e-5, rel=1e-3)
        mech = MechanicalParams("torsional", 1e-20, 1e3, 1.0)
        t = dyn.step_torsional(TorsionalState(1e-6, 0.0, 0j), CavityParams(0.01, OMEGA0, 1e6), mech, 1e-8,
                               coupling=6e10)
        assert t.phi < 1e-6


def test_trajectory_csv(tmp_path):
    cav, mech = cooling_setup()
    tr = simulate_vibrational(VibrationalState(), cav, mech, coupling=G_VIB, dt=1e-8, n_steps=100, stride=10)[0]
    path = tr.to_csv(tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,q,p,re_alpha,im_alpha,abs2_alpha"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (11, 6)
    np.testing.assert_allclose(data[:, 5], data[:, 3] ** 2 + data[:, 4] ** 2, rtol=1e-9)
    rot = simulate_rotational(RotationalState(), CavityParams(1e-3, OMEGA0, 1e3), rotor(), 1.0, 1, dt=1e-5,
                              n_steps=10)[0]
    assert rot.to_csv(tmp_path / "r.csv").read_text().startswith("t,phi,Lz,")
