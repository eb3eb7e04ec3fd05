"""Execute a validated scenario and persist its results."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (RotationalProbe, detect_rotation, output_spectrum, phase_slope, power_sweep)
from .beams import (count_azimuthal_maxima, oam_expectation, phase_plate_transform, render_mode, ring_radius,
                    sample_ring, save_field_csv, save_intensity_csv)
from .constants import HBAR, K_B
from .coupling import single_photon_coupling, zero_point
from .dynamics import (NoiseConfig, TorsionalState, VibrationalState, adiabatic_field, mean_rotation_rate,
                       rotational_steady_state, sideband_frequency, simulate_torsional, simulate_vibrational)
from .scenario import Scenario, parse_scenario


@dataclass
class RunManifest:
    digest: str
    version: str
    seed: int
    wall_clock: float
    files: list = field(default_factory=list)

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path


def example_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("oamopto").joinpath("scenarios").iterdir()
                  if p.name.endswith(".ini"))


def example_text(name: str) -> str:
    return resources.files("oamopto").joinpath("scenarios", f"{name}.ini").read_text()


def load_scenario(source: str, overrides: dict | None = None) -> Scenario:
    """Parse a scenario from a file path or the name of a bundled example."""
    path = Path(source)
    if path.is_file():
        text = path.read_text()
    elif source in example_names():
        text = example_text(source)
    else:
        raise FileNotFoundError(f"no scenario file or bundled example named {source!r}")
    return parse_scenario(text, overrides)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+}j"
    return str(v)


def _backend(s: Scenario):
    b = s.get("run", "backend", "auto")
    return None if b == "auto" else b


def _spectrum_summary(s: Scenario, traj, out: Path, files: list, summary: dict, default_band) -> None:
    if not s.get("analysis", "spectrum", True):
        return
    spec = output_spectrum(traj, discard=s.get("analysis", "discard", 0.1))
    files.append(spec.to_csv(out / "spectrum.csv").name)
    lo, hi = default_band(spec)
    band = (s.get("analysis", "band_low", lo), s.get("analysis", "band_high", hi))
    det = detect_rotation(spec, band)
    summary["spectrum_resolution_rads"] = spec.resolution
    summary["detected_omega_rads"] = det.omega_d
    summary["detected_snr"] = det.snr


def _run_linear(s: Scenario, out: Path, files: list, summary: dict) -> None:
    cav, mech, g = s.cavity(), s.mechanical(), s.coupling_constant()
    coord, mom, alpha = s.initial()
    alpha = adiabatic_field(coord or 0.0, cav, g) if alpha is None else alpha
    kw = dict(dt=s.get("run", "dt"), duration=s.get("run", "duration"), stride=s.get("run", "stride", 1),
              noise=NoiseConfig(seed=s.seed), n_traj=s.get("run", "n_traj", 1), backend=_backend(s))
    if s.system == "vibrational":
        ens = simulate_vibrational(VibrationalState(coord or 0.0, mom or 0.0, alpha), cav, mech, coupling=g, **kw)
        summary["coupling_g_rads_per_m"] = g
        if mech.omega_m > 0:
            q0, _ = zero_point(mech)
            summary["zero_point_q0_m"] = q0
            summary["single_photon_coupling_rads"] = single_photon_coupling(g, mech)
        summary["adiabatic_phase_slope_rad_per_m"] = phase_slope(cav, g)
    else:
        ens = simulate_torsional(TorsionalState(coord or 0.0, mom or 0.0, alpha), cav, mech, g, **kw)
        summary["coupling_g_phi_per_s"] = g
    traj = ens[0]
    files.append(traj.to_csv(out / "trajectory.csv").name)
    n_ss = abs(adiabatic_field(0.0, cav, g)) ** 2
    summary["steady_photon_number"] = n_ss
    if mech.omega_m > 0:
        summary["static_displacement"] = HBAR * g * n_ss / (mech.inertia * mech.omega_m**2)
    i0 = len(traj.t) // 2
    e = traj.momentum[i0:] ** 2 / (2 * mech.inertia) + 0.5 * mech.inertia * mech.omega_m**2 * traj.coord[i0:] ** 2
    summary["mean_mechanical_energy_J"] = float(np.mean(e))
    if mech.temperature > 0:
        summary["mean_mechanical_energy_over_kT"] = float(np.mean(e)) / (K_B * mech.temperature)
    nyq = math.pi / traj.sample_interval
    _spectrum_summary(s, traj, out, files, summary, lambda spec: (2 * spec.resolution, nyq))


def _run_rotational(s: Scenario, out: Path, files: list, summary: dict) -> None:
    cav, mech, g = s.cavity(), s.mechanical(), s.coupling_constant()
    lat = s.lattice()
    power = s.get("cavity", "power")
    if power is None:
        power = cav.drive**2 * HBAR * cav.omega0 / cav.gamma0 if cav.gamma0 > 0 else 0.0
    probe = RotationalProbe(cav, mech, g, lat.l, s.get("run", "duration"), dt=s.get("run", "dt"),
                            stride=s.get("run", "stride", 1), discard=s.get("analysis", "discard", 0.1),
                            noise=NoiseConfig(seed=s.seed), backend=_backend(s))
    ss = rotational_steady_state(cav, mech, g)
    ws = sideband_frequency(lat.l, ss.omega_ms)
    summary.update({"probe_l": lat.l, "ring_radius_m": lat.R, "coupling_g_rads": g, "probe_power_W": power,
                    "omega_ms_rads": ss.omega_ms, "sideband_omega_s_rads": ws, "alpha_s_abs": abs(ss.alpha_s),
                    "U_time_average_expected": ss.U_time_average, "U_modulus": ss.U_modulus})
    traj = probe.simulate(power, s.seed)
    files.append(traj.to_csv(out / "trajectory.csv").name)
    summary["simulated_mean_rate_rads"] = mean_rotation_rate(traj, probe.discard)
    i0 = int(probe.discard * len(traj.t))
    summary["simulated_U_time_average_abs"] = float(abs(np.mean(np.exp(2j * lat.l * traj.coord[i0:]))))
    _spectrum_summary(s, traj, out, files, summary, lambda spec: (2 * spec.resolution, 1.5 * ws))
    powers = s.get("analysis", "sweep_powers")
    if powers:
        if "band_low" in s.values.get("analysis", {}) or "band_high" in s.values.get("analysis", {}):
            probe = replace(probe, band=(s.get("analysis", "band_low", 0.0), s.get("analysis", "band_high", math.inf)))
        sweep = power_sweep(probe, powers, s.get("analysis", "sweep_seeds", (s.seed,)),
                            departure_bins=s.get("analysis", "departure_bins", 2.0))
        files.append(sweep.to_csv(out / "sweep.csv").name)
        summary["sweep_resolution_rads"] = sweep.resolution
        summary["sweep_critical_power_W"] = sweep.critical_power if sweep.critical_power is not None else "none"


def _run_beams(s: Scenario, out: Path, files: list, summary: dict) -> None:
    modes = s.beam_modes()
    n = s.get("beam", "grid", 256)
    z = s.get("beam", "z", 0.0)
    lmax = max(abs(m.l) for m in modes)
    extent = s.get("beam", "extent", modes[0].waist(z) * max(4.0, 2.0 + math.sqrt(lmax + 1.0)))
    fields = [render_mode(m, z, n, extent) for m in modes]
    total = fields[0]
    for f in fields[1:]:
        total = total + f
    total = type(total)(total.values / math.sqrt(len(fields)), total.extent, total.wavelength)
    step = s.get("beam", "plate_step")
    if step:
        total = phase_plate_transform(total, step, modes[0].wavelength)
    files.append(save_field_csv(total, out / "beam_field.csv").name)
    files.append((out / "beam_field.csv").with_suffix(".json").name)
    files.append(save_intensity_csv(total, out / "beam_intensity.csv").name)
    summary["modes_l"] = ",".join(str(m.l) for m in modes)
    summary["grid"] = n
    summary["extent_m"] = extent
    summary["power"] = total.power()
    radius = ring_radius(max(lmax, 1), modes[0].waist(z))
    ring = np.abs(sample_ring(total, radius, 720)[0]) ** 2
    summary["azimuthal_lobes"] = count_azimuthal_maxima(ring)
    summary["oam_expectation"] = oam_expectation(total)


def run(scenario: Scenario, out_dir) -> RunManifest:
    """Run a scenario, writing CSV results, summary.txt and manifest.json to ``out_dir``."""
    start = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    summary: dict = {"system": scenario.system, "seed": scenario.seed, "digest": scenario.digest()}
    if scenario.system == "beams-demo":
        _run_beams(scenario, out, files, summary)
    elif scenario.system == "rotational":
        _run_rotational(scenario, out, files, summary)
    else:
        _run_linear(scenario, out, files, summary)
    (out / "scenario.ini").write_text(scenario.serialize())
    files.append("scenario.ini")
    (out / "summary.txt").write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in summary.items()))
    files.append("summary.txt")
    manifest = RunManifest(scenario.digest(), __version__, scenario.seed, time.perf_counter() - start, files)
    manifest.to_json(out / "manifest.json")
    return manifest
