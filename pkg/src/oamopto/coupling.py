"""Optomechanical coupling constants.

Closed forms for the vibrational, torsional and rotational couplings, and a
numerical Bethe-Schwinger frequency shift obtained by quadrature of the
probe-mode intensity over a small dielectric body.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .beams import LGModeSpec, lg_amplitude
from .constants import C_LIGHT, EPS0, HBAR, MU0


class MechanicalKind(str, enum.Enum):
    VIBRATIONAL = "vibrational"
    TORSIONAL = "torsional"
    ROTATIONAL = "rotational"


@dataclass(frozen=True)
class CavityParams:
    """Single optical quasi-mode of a Fabry-Perot cavity, in the drive frame.

    ``drive`` is the amplitude F (1/sqrt(s)); use :meth:`from_power` to set it
    from an input power.
    """

    L: float
    omega0: float
    gamma0: float
    detuning: float = 0.0
    drive: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"cavity length must be positive, got {self.L}")
        if not self.omega0 > 0:
            raise ValueError(f"optical resonance must be positive, got {self.omega0}")
        if self.gamma0 < 0:
            raise ValueError(f"cavity decay rate must be non-negative, got {self.gamma0}")
        if self.drive < 0:
            raise ValueError(f"drive amplitude must be non-negative, got {self.drive}")

    @classmethod
    def resonant(cls, n: int, L: float, gamma0: float, **kw) -> "CavityParams":
        """Cavity tuned to its n-th longitudinal resonance, omega0 = n pi c / L."""
        if int(n) != n or n < 1:
            raise ValueError(f"mode number must be a positive integer, got {n}")
        return cls(L=L, omega0=n * math.pi * C_LIGHT / L, gamma0=gamma0, **kw)

    @classmethod
    def from_power(cls, L: float, omega0: float, gamma0: float, power: float,
                   detuning: float = 0.0) -> "CavityParams":
        if power < 0:
            raise ValueError(f"drive power must be non-negative, got {power}")
        return cls(L, omega0, gamma0, detuning, drive_from_power(power, gamma0, omega0))

    @property
    def k(self) -> float:
        return self.omega0 / C_LIGHT

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.k

    def field_per_photon(self, volume: float) -> tuple[float, float]:
        """Electric and magnetic field amplitudes (E0, B0) of one photon in ``volume``."""
        e0 = math.sqrt(HBAR * self.omega0 / (EPS0 * volume))
        b0 = MU0 / self.k * math.sqrt(EPS0 * HBAR * self.omega0**3 / volume)
        return e0, b0


def drive_from_power(power: float, gamma0: float, omega0: float) -> float:
    """F = sqrt(P gamma0 / (hbar omega0))."""
    return math.sqrt(power * gamma0 / (HBAR * omega0))


@dataclass(frozen=True)
class MechanicalParams:
    """Mechanical element: mass (or moment of inertia), frequency, bath.

    ``inertia`` is the mass in kg for vibrational motion and the moment of
    inertia in kg m^2 otherwise. ``torque`` is used only by the rotor.
    """

    kind: MechanicalKind
    inertia: float
    omega_m: float
    gamma_m: float
    temperature: float = 0.0
    torque: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MechanicalKind(self.kind))
        if not self.inertia > 0:
            raise ValueError(f"mass / moment of inertia must be positive, got {self.inertia}")
        if self.omega_m < 0:
            raise ValueError(f"omega_m must be non-negative, got {self.omega_m}")
        if self.gamma_m < 0:
            raise ValueError(f"gamma_m must be non-negative, got {self.gamma_m}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be non-negative, got {self.temperature}")

    @classmethod
    def disk(cls, mass: float, radius: float, omega_phi: float, gamma: float, **kw) -> "MechanicalParams":
        """Torsional disk about its symmetry axis, I = M R^2 / 2."""
        return cls(MechanicalKind.TORSIONAL, 0.5 * mass * radius**2, omega_phi, gamma, **kw)

    @classmethod
    def ring_particle(cls, mass: float, radius: float, gamma: float, **kw) -> "MechanicalParams":
        """Point particle circulating on a ring, I = m R^2, no restoring force."""
        return cls(MechanicalKind.ROTATIONAL, mass * radius**2, 0.0, gamma, **kw)


@dataclass(frozen=True)
class DielectricBody:
    """Small dielectric body; either a point on a ring or an axis-aligned box.

    For the ring geometry the body is a cube of the given volume centred at
    (R cos phi, R sin phi, z).
    """

    eps_r: float
    volume: float
    R: float | None = None
    phi: float = 0.0
    z: float = 0.0
    box: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.eps_r < 1:
            raise ValueError(f"relative permittivity must be >= 1, got {self.eps_r}")
        if not self.volume > 0:
            raise ValueError(f"volume must be positive, got {self.volume}")
        if self.box is not None and not math.isclose(math.prod(self.box), self.volume, rel_tol=1e-9):
            raise ValueError("box side lengths are inconsistent with the volume")

    @property
    def sides(self) -> tuple[float, float, float]:
        if self.box is not None:
            return tuple(self.box)
        a = self.volume ** (1.0 / 3.0)
        return (a, a, a)

    def center(self) -> tuple[float, float, float]:
        r = self.R or 0.0
        return (r * math.cos(self.phi), r * math.sin(self.phi), self.z)

    def check_small(self, wavelength: float, L: float) -> None:
        size = max(self.sides)
        if size > 0.1 * wavelength or size > 0.1 * L:
            warnings.warn(f"body size {size:.3g} m is not small compared with the wavelength "
                          f"({wavelength:.3g} m) or cavity length; the perturbative shift may be inaccurate",
                          stacklevel=3)


def vibrational_coupling(cav: CavityParams) -> float:
    """Frequency pull per unit mirror displacement, g = omega0 / L."""
    return cav.omega0 / cav.L


def vibrational_coupling_from_k(k: float, L: float) -> float:
    return C_LIGHT * k / L


def zero_point(mech: MechanicalParams) -> tuple[float, float]:
    """Zero-point amplitudes (q0, p0) of the mechanical oscillator."""
    if mech.omega_m == 0:
        raise ValueError("zero-point length is undefined for a free rotor (omega_m = 0)")
    q0 = math.sqrt(HBAR / (2.0 * mech.inertia * mech.omega_m))
    p0 = math.sqrt(mech.inertia * HBAR * mech.omega_m / 2.0)
    return q0, p0


def single_photon_coupling(g: float, mech: MechanicalParams) -> float:
    return g * zero_point(mech)[0]


def torsional_coupling(l: int, L: float) -> float:
    """Torque per photon over hbar for a spiral-plate resonator, g_phi = c l / L."""
    if not L > 0:
        raise ValueError(f"cavity length must be positive, got {L}")
    return C_LIGHT * l / L


def rotational_coupling_factor(l: int, R: float, w0: float) -> float:
    """Dimensionless l-dependent factor of the optorotational coupling."""
    if l < 1:
        raise ValueError(f"probe OAM must be >= 1, got {l}")
    return 2.0 ** ((l + 3) / 2.0) / math.gamma((l + 1) / 2.0) * (R / w0) ** l * math.exp(-2.0 * R**2 / w0**2)


def rotational_coupling(l: int, body: DielectricBody, R: float, w0: float, L: float, omega_c: float) -> float:
    """Amplitude g(l) of the lattice frequency modulation omega_c - g cos^2(l phi), in rad/s."""
    if not (R > 0 and w0 > 0 and L > 0):
        raise ValueError("R, w0 and L must be positive")
    return (omega_c * (body.eps_r - 1.0) * rotational_coupling_factor(l, R, w0)
            * body.volume / (math.pi * w0**2 * L))


def rotational_coupling_mode_overlap(l: int, body: DielectricBody, R: float, w0: float, L: float,
                                     omega_c: float) -> float:
    """Point-body limit of the Bethe-Schwinger shift for normalized LG_{+-l,0} standing waves.

    Same geometry as :func:`rotational_coupling`, but with the radial factor
    that follows from unit-normalized modes, 2^(l+2) / l! (R/w0)^(2l).
    """
    if l < 1:
        raise ValueError(f"probe OAM must be >= 1, got {l}")
    factor = math.exp((l + 2) * math.log(2.0) - math.lgamma(l + 1) + 2 * l * math.log(R / w0)
                      - 2.0 * R**2 / w0**2)
    return omega_c * (body.eps_r - 1.0) * factor * body.volume / (math.pi * w0**2 * L)


@dataclass(frozen=True)
class ProbeMode:
    """Standing-wave probe: (LG_{l,0} + LG_{-l,0}) cos(k_p z) in a cavity of length L."""

    l: int
    w0: float
    wavelength: float
    L: float

    @property
    def k_p(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def intensity(self, x, y, z):
        x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
        rho = np.hypot(x, y)
        phi = np.arctan2(y, x)
        if self.l == 0:
            transverse = np.abs(lg_amplitude(LGModeSpec(0, 0, self.w0, self.wavelength), rho, phi)) ** 2
        else:
            # |u_l e^{il phi} + u_l e^{-il phi}|^2 = 4 |u_l|^2 cos^2(l phi)
            u = lg_amplitude(LGModeSpec(abs(self.l), 0, self.w0, self.wavelength), rho, 0.0)
            transverse = 4.0 * np.abs(u) ** 2 * np.cos(self.l * phi) ** 2
        return transverse * np.cos(self.k_p * z) ** 2


@lru_cache(maxsize=64)
def mode_volume_integral(mode: ProbeMode, n_rho: int = 200) -> float:
    """Integral of the probe intensity over the cavity (transverse plane x [0, L]).

    The azimuthal and axial factors are trigonometric and integrated exactly
    by periodic trapezoid rules; the radial factor by Gauss-Legendre.
    """
    al = abs(mode.l)
    rmax = mode.w0 * (math.sqrt(al / 2.0) + 7.0)
    x, w = np.polynomial.legendre.leggauss(n_rho)
    rho = 0.5 * rmax * (x + 1.0)
    wr = 0.5 * rmax * w
    u = np.abs(lg_amplitude(LGModeSpec(al, 0, mode.w0, mode.wavelength), rho, 0.0)) ** 2
    radial = float(np.sum(wr * rho * u))
    n_phi = 4 * al + 8
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    azim = (4.0 * np.mean(np.cos(mode.l * phi) ** 2) if al else 1.0) * 2.0 * np.pi
    # cos^2(k z) over [0, L] in closed form
    k = mode.k_p
    axial = 0.5 * mode.L + math.sin(2.0 * k * mode.L) / (4.0 * k)
    return radial * azim * axial


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    converged: bool


class QuadratureError(RuntimeError):
    def __init__(self, message: str, result: QuadratureResult):
        super().__init__(message)
        self.result = result


def body_overlap_integral(body: DielectricBody, mode: ProbeMode, rtol: float = 1e-4,
                          max_order: int = 64) -> QuadratureResult:
    """Integral of the probe intensity over the body by tensor-product Gauss-Legendre.

    The order is doubled until two successive estimates agree to ``rtol``.
    """
    cx, cy, cz = body.center()
    sides = body.sides

    def estimate(order: int) -> float:
        x, w = np.polynomial.legendre.leggauss(order)
        pts = [c + 0.5 * s * x for c, s in zip((cx, cy, cz), sides)]
        wts = [0.5 * s * w for s in sides]
        X, Y, Z = np.meshgrid(*pts, indexing="ij")
        W = wts[0][:, None, None] * wts[1][None, :, None] * wts[2][None, None, :]
        return float(np.sum(W * mode.intensity(X, Y, Z)))

    order = 4
    prev = estimate(order)
    while order < max_order:
        order *= 2
        cur = estimate(order)
        err = abs(cur - prev)
        scale = max(abs(cur), 1e-300)
        if err <= rtol * scale or cur == prev:
            return QuadratureResult(cur, err, True)
        prev = cur
    return QuadratureResult(prev, err, False)


def bethe_schwinger_shift(body: DielectricBody, mode: ProbeMode, rtol: float = 1e-4) -> float:
    """Fractional cavity frequency shift produced by a small dielectric body.

    Returns omega_c(body) / omega_c(empty) - 1, which is negative for eps_r > 1.
    Raises :class:`QuadratureError` if the body integral does not converge.
    """
    if body.eps_r == 1.0:
        return 0.0
    body.check_small(mode.wavelength, mode.L)
    res = body_overlap_integral(body, mode, rtol)
    if not res.converged:
        raise QuadratureError(f"body quadrature did not converge: estimate {res.value:.6g} "
                              f"+- {res.error:.3g}", res)
    return -(body.eps_r - 1.0) * res.value / (2.0 * mode_volume_integral(mode))


def lattice_coupling_from_shift(body: DielectricBody, mode: ProbeMode, omega_c: float) -> float:
    """g(l) from the numerical shift, for a body placed at a lattice antinode."""
    return -omega_c * bethe_schwinger_shift(body, mode)


def torsional_coupling_from_shift(shift_fn, phi0: float, inertia: float, omega_phi: float,
                                  omega_c: float, step: float = 1e-4) -> float:
    """Single-phonon torsional coupling sqrt(hbar / I omega_phi) d omega_c / d phi at ``phi0``.

    ``shift_fn(phi)`` returns the fractional frequency shift at angle phi;
    the derivative is a central difference.
    """
    deriv = omega_c * (shift_fn(phi0 + step) - shift_fn(phi0 - step)) / (2.0 * step)
    return math.sqrt(HBAR / (inertia * omega_phi)) * deriv


def saw_azimuthal_overlap(l: int, l_prime: int, n: int | None = None) -> complex:
    """(1/2 pi) integral of cos^2(l phi) e^{i l' phi} over one period.

    Periodic trapezoid rule; exact for these trigonometric polynomials once
    n exceeds 2|l| + |l'|.
    """
    if n is None:
        n = max(4096, 4 * (2 * abs(l) + abs(l_prime)) + 8)
    phi = 2.0 * np.pi * np.arange(n) / n
    return complex(np.mean(np.cos(l * phi) ** 2 * np.exp(1j * l_prime * phi)))


def saw_radial_overlap(l: int, p: int, w0: float, wavelength: float, acoustic_profile,
                       rmax: float | None = None) -> float:
    """Overlap of the optical radial intensity with a user-supplied acoustic profile.

    ``acoustic_profile(rho)`` gives the mechanical displacement profile; the
    result is the integral of |u_lp(rho)|^2 f(rho) 2 pi rho d rho.
    """
    mode = LGModeSpec(abs(l), p, w0, wavelength)
    if rmax is None:
        rmax = w0 * (math.sqrt(abs(l) / 2.0 + p) + 8.0)

    def integrand(rho):
        return 2.0 * math.pi * rho * abs(lg_amplitude(mode, rho, 0.0)) ** 2 * acoustic_profile(rho)

    val, _ = integrate.quad(integrand, 0.0, rmax, limit=200)
    return val


def saw_coupling(g_prime: float, l: int, l_prime: int, radial_overlap: float) -> float:
    """Surface-acoustic-wave coupling with the |l'| = 2|l| selection rule."""
    return g_prime * (1.0 if abs(l_prime) == 2 * abs(l) else 0.0) * radial_overlap
