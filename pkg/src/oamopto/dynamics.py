"""Classical Langevin dynamics of the three optomechanical systems.

Fields are integrated in the frame rotating with the drive laser. Mechanical
baths enter as additive white forces with correlator 2 M gamma_m k_B T,
where M is the mass or moment of inertia. The integrator is the stochastic
Heun scheme; with additive noise the Ito and Stratonovich readings agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from ._accel import default_backend
from .constants import HBAR, K_B
from .coupling import CavityParams, MechanicalParams, vibrational_coupling

#: default dt is this fraction of the fastest rate in the problem
DT_FACTOR = 2e-4
#: stability guard on dt * max(gamma0, omega_m, |detuning|)
MAX_RATE_DT = 0.1
CHUNK_STEPS = 8192


class SimulationDiverged(RuntimeError):
    def __init__(self, system: str, step: int, time: float):
        super().__init__(f"{system} integration produced a non-finite state at step {step} "
                         f"(t = {time:.6g} s); reduce dt or check the parameters")
        self.system = system
        self.step = step
        self.time = time


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    include_thermal: bool = True
    include_optical_input: bool = False


@dataclass(frozen=True)
class VibrationalState:
    q: float = 0.0
    p: float = 0.0
    alpha: complex = 0j


@dataclass(frozen=True)
class TorsionalState:
    phi: float = 0.0
    Lz: float = 0.0
    alpha: complex = 0j


@dataclass(frozen=True)
class RotationalState:
    """Rotor state; the angle is kept unwrapped."""

    phi: float = 0.0
    Lz: float = 0.0
    alpha: complex = 0j

    def U(self, l: int) -> complex:
        return complex(np.exp(2j * l * self.phi))


_COLUMNS = {
    "vibrational": ("q", "p"),
    "torsional": ("phi", "Lz"),
    "rotational": ("phi", "Lz"),
}


@dataclass
class Trajectory:
    """Sampled time series of one trajectory."""

    system: str
    t: np.ndarray
    coord: np.ndarray
    momentum: np.ndarray
    alpha: np.ndarray
    dt: float
    stride: int = 1

    @property
    def sample_interval(self) -> float:
        return self.dt * self.stride

    def final_state(self):
        cls = {"vibrational": VibrationalState, "torsional": TorsionalState,
               "rotational": RotationalState}[self.system]
        return cls(float(self.coord[-1]), float(self.momentum[-1]), complex(self.alpha[-1]))

    def to_csv(self, path, stride: int = 1) -> Path:
        path = Path(path)
        c, m = _COLUMNS[self.system]
        sl = slice(None, None, stride)
        data = np.column_stack([self.t[sl], self.coord[sl], self.momentum[sl], self.alpha[sl].real,
                                self.alpha[sl].imag, np.abs(self.alpha[sl]) ** 2])
        header = f"t,{c},{m},re_alpha,im_alpha,abs2_alpha"
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.12g")
        return path


@dataclass
class Ensemble:
    """Independent trajectories sharing parameters; arrays are (n_samples, n_traj)."""

    system: str
    t: np.ndarray
    coord: np.ndarray
    momentum: np.ndarray
    alpha: np.ndarray
    dt: float
    stride: int
    seeds: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.coord.shape[1]

    def __getitem__(self, j: int) -> Trajectory:
        return Trajectory(self.system, self.t, self.coord[:, j], self.momentum[:, j],
                          self.alpha[:, j], self.dt, self.stride)


def _traj_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _check_dt(dt: float, *rates: float) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    worst = dt * max(abs(r) for r in rates)
    if worst >= MAX_RATE_DT:
        raise ValueError(f"dt = {dt:.3g} s is too large: dt * max rate = {worst:.3g} >= {MAX_RATE_DT}")


def _broadcast_state(state, n_traj: int) -> np.ndarray:
    vals = [np.broadcast_to(np.asarray(v, dtype=complex if i == 2 else float), (n_traj,))
            for i, v in enumerate(state)]
    y = np.empty((4, n_traj))
    y[0], y[1] = vals[0], vals[1]
    y[2], y[3] = vals[2].real, vals[2].imag
    return y


def _integrate(kind: str, system: str, y: np.ndarray, par: np.ndarray, dt: float, n_steps: int,
               stride: int, noise: NoiseConfig, first_index: int, backend: str | None):
    if n_steps < 0:
        raise ValueError("number of steps must be non-negative")
    if stride < 1:
        raise ValueError("output stride must be >= 1")
    backend = backend or default_backend()
    kernel = _kernels.KERNELS[(kind, backend)]
    n_traj = y.shape[1]
    out = np.empty((1 + n_steps // stride, 4, n_traj))
    out[0] = y
    noisy = par[-1] > 0 or par[-2] > 0
    gens = [_traj_rng(noise.seed, first_index + j) for j in range(n_traj)] if noisy else []
    sqdt = math.sqrt(dt)
    k = 1
    for start in range(0, n_steps, CHUNK_STEPS):
        n = min(CHUNK_STEPS, n_steps - start)
        dw = np.zeros((n, 3, n_traj))
        for j, gen in enumerate(gens):
            dw[:, :, j] = gen.standard_normal((n, 3))
        if noisy:
            dw *= sqdt
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported through status
            k, status = kernel(y, par, dt, dw, start, stride, out, k)
        if status >= 0:
            raise SimulationDiverged(system, int(status), status * dt)
    t = np.arange(out.shape[0]) * dt * stride
    return t, out


def _n_steps(dt: float, duration: float | None, n_steps: int | None) -> int:
    if n_steps is not None:
        return int(n_steps)
    if duration is None:
        raise ValueError("give either duration or n_steps")
    return int(round(duration / dt))


def _thermal_sigma(mech: MechanicalParams, noise: NoiseConfig) -> float:
    if not noise.include_thermal:
        return 0.0
    return math.sqrt(2.0 * mech.inertia * mech.gamma_m * K_B * mech.temperature)


def _optical_sigma(cav: CavityParams, noise: NoiseConfig) -> float:
    return math.sqrt(cav.gamma0) if noise.include_optical_input else 0.0


# -- vibrational and torsional (shared linear structure) ----------------------

def _linear_params(cav, mech, g, noise) -> np.ndarray:
    return np.array([mech.inertia, mech.omega_m**2, mech.gamma_m, HBAR * g, g, cav.detuning,
                     0.5 * cav.gamma0, cav.drive, _thermal_sigma(mech, noise), _optical_sigma(cav, noise)])


def default_dt_linear(cav: CavityParams, mech: MechanicalParams, coupling: float, state=None) -> float:
    """Default step: DT_FACTOR over the fastest rate, including the coupling-induced detuning."""
    x0 = abs(state[0]) if state is not None else 0.0
    p0 = abs(state[1]) if state is not None else 0.0
    a2 = abs(state[2]) ** 2 if state is not None else 0.0
    scale = x0
    if mech.omega_m > 0:
        scale += p0 / (mech.inertia * mech.omega_m)
        scale += math.sqrt(K_B * mech.temperature / (mech.inertia * mech.omega_m**2))
        n_ss = (2.0 * cav.drive / cav.gamma0) ** 2 if cav.gamma0 > 0 else 0.0
        scale += HBAR * abs(coupling) * max(a2, n_ss) / (mech.inertia * mech.omega_m**2)
    if a2 == 0 and cav.drive == 0:
        scale = 0.0  # dark cavity: the coupling never acts
    rate = max(cav.gamma0, mech.omega_m, mech.gamma_m, abs(cav.detuning) + abs(coupling) * scale)
    if rate <= 0:
        raise ValueError("all rates vanish; give dt explicitly")
    return DT_FACTOR / rate


def _simulate_linear(system, state, cav, mech, coupling, dt, duration, n_steps, stride, noise,
                     n_traj, first_index, backend) -> Ensemble:
    if dt is None:
        dt = default_dt_linear(cav, mech, coupling, (np.max(np.abs(state[0])), np.max(np.abs(state[1])),
                                                     np.max(np.abs(state[2]))))
    _check_dt(dt, cav.gamma0, mech.omega_m, cav.detuning)
    y = _broadcast_state(state, n_traj)
    par = _linear_params(cav, mech, coupling, noise)
    t, out = _integrate("linear", system, y, par, dt, _n_steps(dt, duration, n_steps), stride, noise,
                        first_index, backend)
    seeds = [(noise.seed, first_index + j) for j in range(n_traj)]
    return Ensemble(system, t, out[:, 0], out[:, 1], out[:, 2] + 1j * out[:, 3], dt, stride, seeds)


def simulate_vibrational(state: VibrationalState, cav: CavityParams, mech: MechanicalParams, *,
                         coupling: float | None = None, dt: float | None = None,
                         duration: float | None = None, n_steps: int | None = None, stride: int = 1,
                         noise: NoiseConfig = NoiseConfig(), n_traj: int = 1, first_index: int = 0,
                         backend: str | None = None) -> Ensemble:
    """Integrate the Fabry-Perot system with a harmonically bound mirror.

    dq/dt = p/m, dp/dt = -m w^2 q - gamma_m p + hbar g |alpha|^2 + xi,
    dalpha/dt = -(i Delta0 + gamma0/2) alpha + i g q alpha + F.
    ``coupling`` defaults to omega0 / L. State fields may be arrays of
    length ``n_traj`` to start each trajectory differently.
    """
    g = vibrational_coupling(cav) if coupling is None else coupling
    return _simulate_linear("vibrational", (state.q, state.p, state.alpha), cav, mech, g, dt, duration,
                            n_steps, stride, noise, n_traj, first_index, backend)


def simulate_torsional(state: TorsionalState, cav: CavityParams, mech: MechanicalParams, coupling: float, *,
                       dt: float | None = None, duration: float | None = None, n_steps: int | None = None,
                       stride: int = 1, noise: NoiseConfig = NoiseConfig(), n_traj: int = 1,
                       first_index: int = 0, backend: str | None = None) -> Ensemble:
    """Integrate the spiral-plate resonator; ``coupling`` is g_phi = c l / L (1/s)."""
    return _simulate_linear("torsional", (state.phi, state.Lz, state.alpha), cav, mech, coupling, dt,
                            duration, n_steps, stride, noise, n_traj, first_index, backend)


def _single_step(simulate, state, dt, rng, noise, **kw):
    # a one-step run seeded from the caller's generator
    seed = int(rng.integers(0, 2**63 - 1)) if rng is not None else noise.seed
    ens = simulate(state, dt=dt, n_steps=1, noise=replace(noise, seed=seed), backend="numpy", **kw)
    return ens[0].final_state()


def step_vibrational(state: VibrationalState, cav: CavityParams, mech: MechanicalParams, dt: float,
                     rng: np.random.Generator | None = None, *, coupling: float | None = None,
                     noise: NoiseConfig = NoiseConfig()) -> VibrationalState:
    """Advance one Heun step."""
    return _single_step(lambda s, **kw: simulate_vibrational(s, cav, mech, coupling=coupling, **kw),
                        state, dt, rng, noise)


def step_torsional(state: TorsionalState, cav: CavityParams, mech: MechanicalParams, dt: float,
                   rng: np.random.Generator | None = None, *, coupling: float,
                   noise: NoiseConfig = NoiseConfig()) -> TorsionalState:
    return _single_step(lambda s, **kw: simulate_torsional(s, cav, mech, coupling, **kw),
                        state, dt, rng, noise)


def linear_energy(traj: Trajectory, cav: CavityParams, mech: MechanicalParams, coupling: float) -> np.ndarray:
    """Drive-frame Hamiltonian p^2/2M + M w^2 x^2/2 + hbar Delta0 |alpha|^2 - hbar g x |alpha|^2."""
    n = np.abs(traj.alpha) ** 2
    return (traj.momentum**2 / (2 * mech.inertia) + 0.5 * mech.inertia * mech.omega_m**2 * traj.coord**2
            + HBAR * cav.detuning * n - HBAR * coupling * traj.coord * n)


def mechanical_energy(traj, mech: MechanicalParams) -> np.ndarray:
    return traj.momentum**2 / (2 * mech.inertia) + 0.5 * mech.inertia * mech.omega_m**2 * traj.coord**2


def adiabatic_field(q, cav: CavityParams, coupling: float):
    """Cavity amplitude slaved to the mirror position (bad-cavity limit).

    Setting the field derivative to zero gives F / (gamma0/2 + i (Delta0 - g q)).
    """
    out = cav.drive / (0.5 * cav.gamma0 + 1j * (cav.detuning - coupling * np.asarray(q, dtype=float)))
    return out if np.ndim(out) else complex(out)


# -- free rotor in an angular lattice ------------------------------------------

def rotational_detuning(cav: CavityParams, g: float) -> float:
    """Delta' = Delta - g/2, with Delta = omega_d - omega_c stored as ``cav.detuning``."""
    return cav.detuning - 0.5 * g


def _rotational_params(cav, mech, g, l, noise) -> np.ndarray:
    return np.array([mech.inertia, mech.gamma_m, 4.0 * l * HBAR * g, 2.0 * l, g,
                     rotational_detuning(cav, g), 0.5 * cav.gamma0, cav.drive, mech.torque,
                     _thermal_sigma(mech, noise), _optical_sigma(cav, noise)])


def default_dt_rotational(cav: CavityParams, mech: MechanicalParams, g: float, l: int,
                          state: RotationalState | None = None) -> float:
    omega = abs(state.Lz) / mech.inertia if state is not None else 0.0
    if mech.gamma_m > 0:
        omega = max(omega, abs(mech.torque) / (mech.inertia * mech.gamma_m))
    rate = max(cav.gamma0, mech.gamma_m, abs(rotational_detuning(cav, g)) + abs(g), 2 * l * omega)
    if rate <= 0:
        raise ValueError("all rates vanish; give dt explicitly")
    return DT_FACTOR / rate


def simulate_rotational(state: RotationalState, cav: CavityParams, mech: MechanicalParams, g: float, l: int, *,
                        dt: float | None = None, duration: float | None = None, n_steps: int | None = None,
                        stride: int = 1, noise: NoiseConfig = NoiseConfig(), n_traj: int = 1,
                        first_index: int = 0, backend: str | None = None) -> Ensemble:
    """Integrate a particle circulating through a 2l-site angular lattice.

    dphi/dt = Lz / I,
    dLz/dt = -gamma_m Lz - 2 i l hbar g (U - U*) |alpha|^2 + tau + tau_in,
    dalpha/dt = {i [Delta' - (g/2)(U + U*)] - gamma0/2} alpha + sqrt(gamma0) a_in,
    with U = exp(2 i l phi) evaluated from the unwrapped angle. ``cav.drive``
    is the mean input sqrt(gamma0) a_in.
    """
    if int(l) != l or l < 1:
        raise ValueError(f"probe OAM l must be an integer >= 1, got {l}")
    if dt is None:
        dt = default_dt_rotational(cav, mech, g, l, state)
    _check_dt(dt, cav.gamma0, mech.gamma_m, rotational_detuning(cav, g))
    y = _broadcast_state((state.phi, state.Lz, state.alpha), n_traj)
    par = _rotational_params(cav, mech, g, l, noise)
    t, out = _integrate("rotational", "rotational", y, par, dt, _n_steps(dt, duration, n_steps), stride,
                        noise, first_index, backend)
    seeds = [(noise.seed, first_index + j) for j in range(n_traj)]
    return Ensemble("rotational", t, out[:, 0], out[:, 1], out[:, 2] + 1j * out[:, 3], dt, stride, seeds)


def step_rotational(state: RotationalState, cav: CavityParams, mech: MechanicalParams, g: float, l: int,
                    dt: float, rng: np.random.Generator | None = None, *,
                    noise: NoiseConfig = NoiseConfig()) -> RotationalState:
    return _single_step(lambda s, **kw: simulate_rotational(s, cav, mech, g, l, **kw), state, dt, rng, noise)


def rotational_energy(traj: Trajectory, cav: CavityParams, mech: MechanicalParams, g: float, l: int) -> np.ndarray:
    """Quantity conserved by the rotor equations without loss, drive, torque or noise."""
    n = np.abs(traj.alpha) ** 2
    return (traj.momentum**2 / (2 * mech.inertia) + 2.0 * HBAR * g * n * np.cos(2 * l * traj.coord)
            - HBAR * rotational_detuning(cav, g) * n)


@dataclass(frozen=True)
class RotationalSteadyState:
    omega_ms: float
    alpha_s: complex
    U_time_average: complex
    U_modulus: float = 1.0


def rotational_steady_state(cav: CavityParams, mech: MechanicalParams, g: float) -> RotationalSteadyState:
    """Uniform-rotation steady state.

    The rotation rate is tau / (I gamma_m); the lattice torque averages out.
    U = exp(2 i l phi) keeps unit modulus while its time average vanishes;
    both readings are returned. An undamped rotor has no steady rate and is
    reported with ``omega_ms = inf``.
    """
    if mech.gamma_m > 0:
        omega = mech.torque / (mech.inertia * mech.gamma_m)
    else:
        omega = math.inf
    dp = rotational_detuning(cav, g)
    denom = complex(0.5 * cav.gamma0, -dp)
    alpha = cav.drive / denom if denom != 0 else complex(math.inf)
    u_avg = 0j if omega != 0 else complex(np.nan)
    return RotationalSteadyState(omega, alpha, u_avg)


def sideband_frequency(l: int, omega_ms: float) -> float:
    """Rotational Doppler sideband, 2 l omega_ms."""
    return 2.0 * l * omega_ms


def mean_rotation_rate(traj: Trajectory, discard: float = 0.0) -> float:
    """Average angular velocity from the unwrapped angle, skipping the first ``discard`` fraction."""
    i0 = int(discard * (len(traj.t) - 1))
    return float((traj.coord[-1] - traj.coord[i0]) / (traj.t[-1] - traj.t[i0]))
