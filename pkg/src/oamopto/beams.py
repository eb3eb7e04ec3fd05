"""Laguerre-Gaussian modes, spiral phase plates and azimuthal lattices.

All lengths are in meters and all angles in radians. Mode functions are
normalized so that the transverse integral of ``|u|**2`` equals one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, optimize


@dataclass(frozen=True)
class LGModeSpec:
    """One Laguerre-Gaussian mode LG_lp with waist ``w0`` at ``z = 0``."""

    l: int
    p: int
    w0: float
    wavelength: float

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"radial index p must be a non-negative integer, got {self.p}")
        if int(self.l) != self.l:
            raise ValueError(f"topological charge l must be an integer, got {self.l}")
        if not self.w0 > 0:
            raise ValueError(f"waist w0 must be positive, got {self.w0}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.w0**2 / self.wavelength

    def waist(self, z=0.0):
        return self.w0 * np.sqrt(1.0 + (np.asarray(z, dtype=float) / self.rayleigh_range) ** 2)

    def log_norm(self) -> float:
        """Natural log of the normalization constant C_lp."""
        al = abs(self.l)
        return 0.5 * ((al + 1) * math.log(2.0) + math.lgamma(self.p + 1)
                      - math.log(math.pi) - math.lgamma(self.p + al + 1))


@dataclass(frozen=True)
class FieldGrid:
    """Complex field sampled on a square grid spanning [-extent, extent]^2."""

    values: np.ndarray
    extent: float
    wavelength: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"field values must be a square 2-D array, got shape {values.shape}")
        if values.shape[0] < 2:
            raise ValueError("field grid needs at least 2 samples per axis")
        if not self.extent > 0:
            raise ValueError(f"grid extent must be positive, got {self.extent}")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.n - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.n)

    def coordinates(self):
        """Return (x, y) meshgrids with ``values[i, j]`` at ``(x[j], y[i])``."""
        ax = self.axis()
        return np.meshgrid(ax, ax, indexing="xy")

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def power(self) -> float:
        return float(self.intensity().sum() * self.spacing**2)

    def __add__(self, other: "FieldGrid") -> "FieldGrid":
        if self.n != other.n or not math.isclose(self.extent, other.extent):
            raise ValueError("cannot add fields sampled on different grids")
        return FieldGrid(self.values + other.values, self.extent, self.wavelength)


@dataclass(frozen=True)
class RingLattice:
    """Azimuthal lattice formed by counter-rotating LG_{+l,0} and LG_{-l,0} modes."""

    l: int
    R: float
    w0: float
    k_p: float

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 1:
            raise ValueError(f"probe OAM l must be an integer >= 1, got {self.l}")
        if not self.w0 > 0:
            raise ValueError(f"waist w0 must be positive, got {self.w0}")
        if self.R < 0:
            raise ValueError(f"ring radius must be non-negative, got {self.R}")

    @classmethod
    def from_trap(cls, l: int, trap_l: int, w0: float, k_p: float) -> "RingLattice":
        """Place the lattice on the intensity ring of an LG trap mode with OAM ``trap_l``."""
        return cls(l=l, R=ring_radius(trap_l, w0), w0=w0, k_p=k_p)


def ring_radius(l: int, w0: float) -> float:
    """Radius of maximum intensity of a p = 0 mode at the waist."""
    return w0 * math.sqrt(abs(l) / 2.0)


def assoc_laguerre(p: int, alpha, x):
    """Generalized Laguerre polynomial L_p^alpha(x) by upward recurrence."""
    if int(p) != p or p < 0:
        raise ValueError(f"degree p must be a non-negative integer, got {p}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if np.ndim(cur) else float(cur)


def lg_amplitude(mode: LGModeSpec, rho, phi, z=0.0):
    """Complex amplitude of ``mode`` at cylindrical coordinates (rho, phi, z).

    Broadcasts over array arguments. The prefactor is assembled in log space
    so that charges in the hundreds neither overflow nor underflow early.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    phi = np.asarray(phi, dtype=float)
    z = np.asarray(z, dtype=float)
    al = abs(mode.l)
    w = mode.waist(z)
    zr = mode.rayleigh_range
    s = rho / w
    with np.errstate(divide="ignore"):
        log_radial = mode.log_norm() - np.log(w) + (al * np.log(s) if al else 0.0) - s**2
    radial = np.exp(log_radial) * assoc_laguerre(mode.p, al, 2.0 * s**2)
    phase = (mode.l * phi
             - mode.k * rho**2 * z / (2.0 * (zr**2 + z**2))
             + (2 * mode.p + al + 1) * np.arctan2(z, zr))
    out = radial * np.exp(1j * phase)
    return out if out.ndim else complex(out)


def render_mode(mode: LGModeSpec, z: float = 0.0, n: int = 256, extent: float | None = None) -> FieldGrid:
    """Sample ``mode`` on an n x n grid; ``extent`` defaults to 4 w(z)."""
    if extent is None:
        extent = 4.0 * float(mode.waist(z))
    if not extent > 0:
        raise ValueError(f"grid extent must be positive, got {extent}")
    if n < 2:
        raise ValueError("grid needs at least 2 samples per axis")
    ax = np.linspace(-extent, extent, n)
    x, y = np.meshgrid(ax, ax, indexing="xy")
    values = lg_amplitude(mode, np.hypot(x, y), np.arctan2(y, x), z)
    return FieldGrid(values, extent, mode.wavelength)


def phase_plate_transform(field: FieldGrid, step_height: float, wavelength: float) -> FieldGrid:
    """Pass ``field`` through a spiral phase plate imparting l = t / lambda."""
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    charge = step_height / wavelength
    x, y = field.coordinates()
    return FieldGrid(field.values * np.exp(1j * charge * np.arctan2(y, x)), field.extent, field.wavelength)


def ring_angles(n_phi: int) -> np.ndarray:
    # half-step offset keeps samples off the negative x axis (arctan2 branch cut)
    return 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi


def sample_ring(field: FieldGrid, radius, n_phi: int = 256, order: int = 3) -> np.ndarray:
    """Interpolate the field onto circles; returns shape (len(radius), n_phi)."""
    radius = np.atleast_1d(np.asarray(radius, dtype=float))
    phi = ring_angles(n_phi)
    xs = radius[:, None] * np.cos(phi)[None, :]
    ys = radius[:, None] * np.sin(phi)[None, :]
    h = field.spacing
    coords = np.array([(ys + field.extent) / h, (xs + field.extent) / h])
    re = ndimage.map_coordinates(field.values.real, coords, order=order, mode="nearest")
    im = ndimage.map_coordinates(field.values.imag, coords, order=order, mode="nearest")
    return re + 1j * im


def azimuthal_spectrum(field: FieldGrid, n_phi: int = 256, n_r: int | None = None, carrier: float = 0.0):
    """Power in each azimuthal harmonic e^{i m phi}, integrated over radius.

    ``carrier`` is a charge removed from the grid samples before
    interpolation and restored exactly on the rings, so a phase step along
    the negative x axis is not smeared by the interpolant.
    Returns ``(m, power)`` with m in FFT order [0, 1, ..., -1].
    """
    if n_r is None:
        n_r = field.n // 2
    dr = field.extent / n_r
    radii = (np.arange(n_r) + 0.5) * dr
    if carrier:
        x, y = field.coordinates()
        field = FieldGrid(field.values * np.exp(-1j * carrier * np.arctan2(y, x)), field.extent)
    samples = sample_ring(field, radii, n_phi)
    if carrier:
        phi = ring_angles(n_phi)
        phi = np.where(phi > np.pi, phi - 2.0 * np.pi, phi)
        samples = samples * np.exp(1j * carrier * phi)[None, :]
    coeffs = np.fft.fft(samples, axis=1) / n_phi
    power = (np.abs(coeffs) ** 2 * (radii * dr)[:, None]).sum(axis=0) * 2.0 * np.pi
    m = np.fft.fftfreq(n_phi, 1.0 / n_phi).astype(int)
    return m, power


def _centered_mean(m: np.ndarray, weights: np.ndarray, n_phi: int) -> float:
    # harmonics are known modulo n_phi; pick representatives nearest the mean
    mean = float(np.dot(m, weights))
    for _ in range(20):
        shifted = m - n_phi * np.round((m - mean) / n_phi)
        new = float(np.dot(shifted, weights))
        if new == mean:
            break
        mean = new
    return mean


def oam_expectation(field: FieldGrid, n_phi: int = 256) -> float:
    """Mean orbital angular momentum per photon, in units of hbar.

    Power-weighted mean of the azimuthal harmonic index. For a phase step of
    fractional height nu this is nu - sin(2 pi nu) / (2 pi), which equals nu
    at integer and half-integer steps.

    The ring decomposition is carried out about a carrier charge equal to the
    result itself (found by secant iteration), so that a phase step is not
    smeared by the interpolant.
    """
    def mean_about(carrier: float) -> float:
        m, power = azimuthal_spectrum(field, n_phi, carrier=carrier)
        total = power.sum()
        if not total > 0:
            raise ValueError("OAM expectation is undefined for a field with zero intensity")
        return _centered_mean(m, power / total, n_phi)

    first = mean_about(0.0)
    if abs(first - round(first)) < 1e-9:
        return first
    try:
        sol = optimize.root_scalar(lambda c: mean_about(c) - c, x0=first, x1=first + 1e-3,
                                   method="secant", xtol=1e-13, maxiter=50)
    except (ArithmeticError, ValueError):
        return first
    return float(sol.root) if sol.converged else first


def lattice_intensity(lat: RingLattice, phi, z=0.0):
    """Dimensionless probe intensity on the lattice ring."""
    al = abs(lat.l)
    x = lat.R * math.sqrt(2.0) / lat.w0
    radial = math.exp(2 * al * math.log(x) - math.lgamma(al + 1) - 2.0 * lat.R**2 / lat.w0**2) if x > 0 else 0.0
    return radial * np.cos(lat.k_p * np.asarray(z)) ** 2 * np.cos(lat.l * np.asarray(phi)) ** 2


def count_azimuthal_maxima(samples: np.ndarray, rel_threshold: float = 1e-6) -> int:
    """Count strict local maxima of a periodic 1-D sequence."""
    s = np.asarray(samples, dtype=float)
    floor = rel_threshold * s.max()
    left = np.roll(s, 1)
    right = np.roll(s, -1)
    return int(np.count_nonzero((s > left) & (s >= right) & (s > floor)))


def save_field_csv(field: FieldGrid, path) -> Path:
    """Write real/imag pairs as CSV plus a JSON sidecar with the grid metadata."""
    path = Path(path)
    n = field.n
    pairs = np.empty((n, 2 * n))
    pairs[:, 0::2] = field.values.real
    pairs[:, 1::2] = field.values.imag
    header = ",".join(f"re{j},im{j}" for j in range(n))
    np.savetxt(path, pairs, delimiter=",", header=header, comments="", fmt="%.17g")
    meta = {"extent": field.extent, "n": n, "wavelength": field.wavelength}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_field_csv(path) -> FieldGrid:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    pairs = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    values = pairs[:, 0::2] + 1j * pairs[:, 1::2]
    if values.shape != (meta["n"], meta["n"]):
        raise ValueError(f"{path}: expected {meta['n']}x{meta['n']} samples, found {values.shape}")
    return FieldGrid(values, meta["extent"], meta["wavelength"])


def save_intensity_csv(field: FieldGrid, path) -> Path:
    path = Path(path)
    np.savetxt(path, field.intensity(), delimiter=",", fmt="%.10g")
    return path
