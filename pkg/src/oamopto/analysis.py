"""Spectra, rotation velocimetry, power sweeps and sensing/cooling diagnostics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate, signal

from .constants import HBAR, K_B
from .coupling import CavityParams, MechanicalParams, drive_from_power
from .dynamics import (NoiseConfig, RotationalState, SimulationDiverged, Trajectory, VibrationalState,
                       adiabatic_field, mean_rotation_rate, rotational_steady_state, sideband_frequency,
                       simulate_rotational, simulate_vibrational)

MIN_SEGMENTS = 8


@dataclass(frozen=True)
class Spectrum:
    """One-sided PSD on an angular-frequency axis.

    ``psd`` is in (signal units)^2 per rad/s, so integrating it over
    ``freqs`` returns the signal variance. ``resolution`` is the bin width,
    2 pi over the segment length.
    """

    freqs: np.ndarray
    psd: np.ndarray
    resolution: float
    window: str = "hann"
    n_segments: int = 0

    def to_csv(self, path) -> Path:
        path = Path(path)
        np.savetxt(path, np.column_stack([self.freqs, self.psd]), delimiter=",",
                   header="omega_rads,psd", comments="", fmt="%.12g")
        return path


@dataclass(frozen=True)
class DetectionResult:
    omega_d: float
    snr: float
    P_in: float = math.nan
    seed: int | None = None
    resolution: float = math.nan
    mean_rate: float = math.nan


def homodyne_signal(alpha: np.ndarray, lo_phase: float | None = None) -> np.ndarray:
    """Phase quadrature of the field; the local oscillator defaults to the mean field phase."""
    alpha = np.asarray(alpha)
    if lo_phase is None:
        mean = alpha.mean()
        lo_phase = float(np.angle(mean)) if abs(mean) > 0 else 0.0
    return (alpha * np.exp(-1j * lo_phase)).imag


def spectrum_of(x: np.ndarray, sample_interval: float, *, nperseg: int | None = None,
                min_segments: int = MIN_SEGMENTS, window: str = "hann") -> Spectrum:
    """Welch estimate of a real signal with 50% overlap."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if nperseg is None:
        nperseg = 2 * (n // (min_segments + 1))  # even, so the 50% hop tiles exactly
    if nperseg < 16 or nperseg > n:
        raise ValueError(f"record of {n} samples is too short for {min_segments} segments; "
                         f"need at least {8 * (min_segments + 1)} samples")
    noverlap = nperseg // 2
    n_seg = 1 + (n - nperseg) // (nperseg - noverlap)
    if n_seg < min_segments:
        raise ValueError(f"only {n_seg} segments of {nperseg} samples fit; need {min_segments}")
    f, p = signal.welch(x, fs=1.0 / sample_interval, window=window, nperseg=nperseg, noverlap=noverlap,
                        detrend="constant", return_onesided=True, scaling="density")
    two_pi = 2.0 * math.pi
    return Spectrum(two_pi * f, p / two_pi, two_pi / (nperseg * sample_interval), window, n_seg)


def output_spectrum(traj: Trajectory, *, lo_phase: float | None = None, discard: float = 0.0,
                    beat_frequency: float | None = None, nperseg: int | None = None,
                    min_segments: int = MIN_SEGMENTS) -> Spectrum:
    """Spectrum of the homodyne phase quadrature of the intracavity field.

    ``discard`` drops that fraction of the record as transient. When
    ``beat_frequency`` is given the remaining record must span at least
    eight beat periods.
    """
    i0 = int(discard * len(traj.t))
    alpha = traj.alpha[i0:]
    length = traj.sample_interval * len(alpha)
    if beat_frequency is not None and beat_frequency > 0:
        needed = 8 * 2 * math.pi / beat_frequency
        if length < needed:
            raise ValueError(f"record length {length:.4g} s is below the minimum {needed:.4g} s "
                             f"(eight beat periods at {beat_frequency:.4g} rad/s)")
    return spectrum_of(homodyne_signal(alpha, lo_phase), traj.sample_interval, nperseg=nperseg,
                       min_segments=min_segments)


def detect_rotation(spec: Spectrum, band: tuple[float, float] | None = None, *, P_in: float = math.nan,
                    seed: int | None = None, exclude_bins: int = 3) -> DetectionResult:
    """Peak frequency in ``band`` refined by a parabola through the log-PSD.

    ``snr`` is the peak PSD over the median PSD of the band with the peak
    neighbourhood removed.
    """
    freqs, psd = spec.freqs, spec.psd
    if freqs.size == 0:
        raise ValueError("empty spectrum")
    lo, hi = band if band is not None else (freqs[1] if freqs.size > 1 else freqs[0], freqs[-1])
    idx = np.flatnonzero((freqs >= lo) & (freqs <= hi))
    if idx.size == 0:
        raise ValueError(f"no spectral bins in band [{lo:.4g}, {hi:.4g}] rad/s")
    i = int(idx[np.argmax(psd[idx])])
    omega = float(freqs[i])
    if 0 < i < freqs.size - 1 and np.all(psd[i - 1:i + 2] > 0):
        a, b, c = np.log(psd[i - 1:i + 2])
        den = a - 2 * b + c
        if den < 0:
            delta = float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))
            omega += delta * (freqs[i + 1] - freqs[i])
    bg = idx[np.abs(idx - i) > exclude_bins]
    med = float(np.median(psd[bg])) if bg.size else 0.0
    snr = float(psd[i] / med) if med > 0 else math.inf
    return DetectionResult(omega, snr, P_in, seed, spec.resolution)


# -- linear response of the rotor ----------------------------------------------

@dataclass(frozen=True)
class RotationalLinearResponse:
    """Small-signal solution about uniform rotation, on resonance and without cavity loss.

    Fourier convention: f(omega) = (2 pi)^-1/2 integral f(t) exp(+i omega t) dt.
    Under it the field fluctuation is A delta(omega) - B delta(omega + omega_s)
    + B* delta(omega - omega_s), with
    B = sqrt(2 pi) a_s g dU0 / (2 omega_s) and A = sqrt(2 pi) da0 + B - B*.
    """

    l: int
    g: float
    a_s: complex
    omega_ms: float
    gamma_m: float
    inertia: float
    da0: complex
    dU0: complex
    dLz0: float

    @property
    def omega_s(self) -> float:
        return sideband_frequency(self.l, self.omega_ms)

    @property
    def B(self) -> complex:
        return math.sqrt(2 * math.pi) * self.a_s * self.g * self.dU0 / (2 * self.omega_s)

    @property
    def A(self) -> complex:
        B = self.B
        return math.sqrt(2 * math.pi) * self.da0 + B - B.conjugate()

    def spectral_weights(self) -> dict:
        """Delta-function weights keyed by frequency."""
        B = self.B
        return {0.0: self.A, -self.omega_s: -B, self.omega_s: B.conjugate()}

    def delta_U(self, t):
        return self.dU0 * np.exp(1j * self.omega_s * np.asarray(t, dtype=float))

    def delta_a(self, t):
        t = np.asarray(t, dtype=float)
        ws = self.omega_s
        k = self.g * self.a_s / (2 * ws)
        u = self.dU0
        return self.da0 - k * (u * (np.exp(1j * ws * t) - 1) - np.conj(u) * (np.exp(-1j * ws * t) - 1))

    def delta_Lz(self, t):
        t = np.asarray(t, dtype=float)
        c = -2j * self.l * HBAR * self.g * abs(self.a_s) ** 2 * self.dU0
        ws, gm = self.omega_s, self.gamma_m
        decay = np.exp(-gm * t)
        forced = c * (np.exp(1j * ws * t) - decay) / (gm + 1j * ws)
        return self.dLz0 * decay + 2 * forced.real


def linear_response_rotational(l: int, g: float, a_s: complex, omega_ms: float, inertia: float,
                               da0: complex, dU0: complex, dLz0: float = 0.0, *, gamma_m: float = 0.0,
                               detuning_prime: float = 0.0, gamma0: float = 0.0) -> RotationalLinearResponse:
    """Closed-form fluctuations about steady rotation at omega_ms with steady field a_s.

    Only valid on resonance (Delta' = 0) and without cavity loss; other
    cases must be integrated numerically.
    """
    if detuning_prime != 0 or gamma0 != 0:
        raise ValueError("the closed form needs Delta' = 0 and gamma0 = 0; integrate numerically instead")
    if omega_ms == 0:
        raise ValueError("the closed form needs a nonzero rotation rate")
    return RotationalLinearResponse(int(l), g, complex(a_s), omega_ms, gamma_m, inertia, complex(da0),
                                    complex(dU0), float(dLz0))


def integrate_linearized_rotational(lr: RotationalLinearResponse, t: np.ndarray, rtol: float = 1e-10):
    """Integrate the linearized equations numerically; returns (dU, da, dLz) at ``t``."""
    ws = lr.omega_s
    n = abs(lr.a_s) ** 2

    def rhs(_, y):
        du = y[0] + 1j * y[1]
        dudt = 1j * ws * du
        dadt = -0.5j * lr.g * (du + np.conj(du)) * lr.a_s
        dldt = -lr.gamma_m * y[4] - 2j * lr.l * HBAR * lr.g * (du - np.conj(du)) * n
        return [dudt.real, dudt.imag, dadt.real, dadt.imag, dldt.real]

    y0 = [lr.dU0.real, lr.dU0.imag, lr.da0.real, lr.da0.imag, lr.dLz0]
    t = np.asarray(t, dtype=float)
    # components differ by tens of orders of magnitude, so each gets its own absolute scale
    su = abs(lr.dU0)
    sa = abs(lr.da0) + abs(lr.g * lr.a_s) * su / ws
    sl = abs(lr.dLz0) + 2 * abs(lr.l) * HBAR * abs(lr.g) * n * su / max(ws, lr.gamma_m)
    scale = np.array([su, su, sa, sa, sl])
    scale[scale == 0] = 1e-300
    sol = integrate.solve_ivp(rhs, (t[0], t[-1]), y0, t_eval=t, method="DOP853", rtol=rtol, atol=rtol * scale)
    if not sol.success:
        raise RuntimeError(sol.message)
    y = sol.y
    return y[0] + 1j * y[1], y[2] + 1j * y[3], y[4]


# -- rotation velocimetry and the probe-power sweep ----------------------------

@dataclass(frozen=True)
class RotationalProbe:
    """Rotor probed by an angular lattice; the cavity drive is set from the probe power.

    ``discard`` is the fraction of each record dropped as transient before
    spectra and mean rates are taken.
    """

    cavity: CavityParams
    mech: MechanicalParams
    g: float
    l: int
    duration: float
    dt: float | None = None
    stride: int = 1
    discard: float = 0.1
    noise: NoiseConfig = NoiseConfig()
    band: tuple[float, float] | None = None
    backend: str | None = None

    @property
    def omega_ms(self) -> float:
        return self.mech.torque / (self.mech.inertia * self.mech.gamma_m)

    @property
    def omega_s(self) -> float:
        return sideband_frequency(self.l, self.omega_ms)

    def cavity_at(self, power: float) -> CavityParams:
        return replace(self.cavity, drive=drive_from_power(power, self.cavity.gamma0, self.cavity.omega0))

    def initial_state(self, cav: CavityParams) -> RotationalState:
        ss = rotational_steady_state(cav, self.mech, self.g)
        return RotationalState(0.0, self.mech.inertia * self.omega_ms, ss.alpha_s)

    def simulate(self, power: float, seed: int) -> Trajectory:
        cav = self.cavity_at(power)
        ens = simulate_rotational(self.initial_state(cav), cav, self.mech, self.g, self.l, dt=self.dt,
                                  duration=self.duration, stride=self.stride,
                                  noise=replace(self.noise, seed=seed), backend=self.backend)
        return ens[0]

    def detect(self, power: float, seed: int) -> DetectionResult:
        try:
            traj = self.simulate(power, seed)
        except SimulationDiverged as exc:
            raise SimulationDiverged(f"rotational (P_in = {power:.4g} W)", exc.step, exc.time) from exc
        spec = output_spectrum(traj, discard=self.discard)
        band = self.band or (2 * spec.resolution, 1.5 * self.omega_s)
        res = detect_rotation(spec, band, P_in=power, seed=seed)
        return replace(res, mean_rate=mean_rotation_rate(traj, self.discard))


@dataclass
class SweepResult:
    results: list
    omega_s: float
    resolution: float
    departure_bins: float
    critical_power: float | None
    powers: list = field(default_factory=list)

    def mean_omega_d(self) -> dict:
        out = {}
        for r in self.results:
            out.setdefault(r.P_in, []).append(r.omega_d)
        return {p: float(np.mean(v)) for p, v in out.items()}

    def mean_rate(self) -> dict:
        out = {}
        for r in self.results:
            out.setdefault(r.P_in, []).append(r.mean_rate)
        return {p: float(np.mean(v)) for p, v in out.items()}

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("P_in,seed,omega_d,snr,mean_rate\n")
            for r in self.results:
                fh.write(f"{r.P_in:.12g},{r.seed},{r.omega_d:.12g},{r.snr:.12g},{r.mean_rate:.12g}\n")
        return path


def power_sweep(probe: RotationalProbe, powers, seeds, *, departure_bins: float = 2.0,
                workers: int | None = None) -> SweepResult:
    """Detected rotation signature versus probe power.

    Every (power, seed) pair is an independent full simulation. Results come
    back ordered by power then seed whatever the worker count. The critical
    power is the smallest power whose seed-averaged detected frequency is
    more than ``departure_bins`` bins from 2 l omega_ms.
    """
    powers = [float(p) for p in powers]
    if any(p <= 0 for p in powers):
        raise ValueError("probe powers must be positive")
    if any(b <= a for a, b in zip(powers, powers[1:])):
        raise ValueError("probe powers must be strictly ascending")
    seeds = [int(s) for s in seeds]
    jobs = [(p, s) for p in powers for s in seeds]
    if workers == 1 or len(jobs) == 1:
        results = [probe.detect(p, s) for p, s in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: probe.detect(*job), jobs))
    resolution = results[0].resolution
    ws = probe.omega_s
    critical = None
    means = {}
    for r in results:
        means.setdefault(r.P_in, []).append(r.omega_d)
    for p in powers:
        if abs(np.mean(means[p]) - ws) > departure_bins * resolution:
            critical = p
            break
    return SweepResult(results, ws, resolution, departure_bins, critical, powers)


# -- vibrational sensing and cooling -------------------------------------------

@dataclass(frozen=True)
class SensitivityCurve:
    q: np.ndarray
    phase: np.ndarray
    slope: float


def phase_slope(cav: CavityParams, coupling: float) -> float:
    """d arg(alpha) / dq at q = 0 for the adiabatic field."""
    h = 0.5 * cav.gamma0
    return coupling * h / (h * h + cav.detuning**2)


def displacement_sensitivity(cav: CavityParams, coupling: float, q) -> SensitivityCurve:
    """Phase of the adiabatically eliminated field across displacements ``q``."""
    q = np.asarray(q, dtype=float)
    phase = np.unwrap(np.angle(np.atleast_1d(adiabatic_field(q, cav, coupling))))
    return SensitivityCurve(q, phase.reshape(q.shape), phase_slope(cav, coupling))


@dataclass(frozen=True)
class CoolingPoint:
    detuning: float
    mean_energy: float
    sem: float
    energies: np.ndarray
    unstable: bool = False

    @property
    def status(self) -> str:
        return "unstable" if self.unstable else "stable"


def thermal_initial_states(mech: MechanicalParams, n: int, seed: int):
    """Positions and momenta drawn from the Boltzmann distribution."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2**32 - 1]))
    kt = K_B * mech.temperature
    q = rng.standard_normal(n) * math.sqrt(kt / (mech.inertia * mech.omega_m**2))
    p = rng.standard_normal(n) * math.sqrt(kt * mech.inertia)
    return q, p


def cooling_diagnostic(cav: CavityParams, mech: MechanicalParams, detunings, *, coupling: float,
                       duration: float, n_traj: int = 32, seed: int = 0, dt: float | None = None,
                       discard: float = 0.5, stride: int = 10, instability_factor: float = 1e3,
                       backend: str | None = None) -> list[CoolingPoint]:
    """Steady-state mechanical energy versus drive detuning.

    Each detuning uses the same seeds and thermal initial conditions so that
    the comparison is paired. A run whose energy blows up (or exceeds
    ``instability_factor`` k_B T) is marked unstable instead of raising.
    """
    if mech.omega_m <= 0:
        raise ValueError("cooling needs a harmonically bound oscillator")
    q0, p0 = thermal_initial_states(mech, n_traj, seed)
    kt = K_B * mech.temperature
    out = []
    for det in detunings:
        c = replace(cav, detuning=float(det))
        state = VibrationalState(q0, p0, adiabatic_field(0.0, c, coupling))
        try:
            ens = simulate_vibrational(state, c, mech, coupling=coupling, dt=dt, duration=duration,
                                       stride=stride, noise=NoiseConfig(seed=seed), n_traj=n_traj,
                                       backend=backend)
        except SimulationDiverged:
            out.append(CoolingPoint(float(det), math.inf, math.nan, np.full(n_traj, math.inf), True))
            continue
        i0 = int(discard * len(ens.t))
        e = (ens.momentum[i0:] ** 2 / (2 * mech.inertia)
             + 0.5 * mech.inertia * mech.omega_m**2 * ens.coord[i0:] ** 2)
        per = e.mean(axis=0)
        unstable = bool(kt > 0 and np.any(e[-1] > instability_factor * kt))
        out.append(CoolingPoint(float(det), float(per.mean()), float(per.std(ddof=1) / math.sqrt(n_traj)),
                                per, unstable))
    return out
