"""Command-line front end: every computation as a reproducible batch command.

Exit codes: 0 success, 2 usage/validation error, 3 domain error,
4 numerical non-convergence.  All numeric output uses '.' decimals via
repr/format, independent of locale; identical configs and seeds give
byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import atomdata, floquet, lightshift, scattering, spectra
from .errors import ConfigError, ConvergenceError, DomainError
from .keyvalue import load_keyvalue

SPECIES_ENV_VAR = "MODFESH_SPECIES"

_POLARIZATIONS = {
    "sigma-minus": lightshift.Polarization.sigma_minus,
    "sigma-plus": lightshift.Polarization.sigma_plus,
    "linear": lightshift.Polarization.linear,
    "pi": lightshift.Polarization.pi,
}


def _parse_grid(text: str):
    """'0.87' -> [0.87]; '0.2:1.7:16' -> 16 points from 0.2 to 1.7."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec {text!r} must be start:stop:points")
        try:
            start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"cannot parse grid spec {text!r}") from None
        if n < 1:
            raise ConfigError("grid needs at least one point")
        return np.linspace(start, stop, n)
    try:
        return np.array([float(text)])
    except ValueError:
        raise ConfigError(f"cannot parse number {text!r}") from None


def _parse_window(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window {text!r} must be lo:hi")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"cannot parse window {text!r}") from None


def _load_species(args) -> atomdata.AtomSpecies:
    path = getattr(args, "species", None) or os.environ.get(SPECIES_ENV_VAR)
    if path:
        return atomdata.load_species(path)
    return atomdata.cesium()


def _emit(args, columns, rows, payload_extra=None):
    """Write rows as an aligned table, CSV, or JSON per --format."""
    fmt = getattr(args, "format", "table")
    out_path = getattr(args, "output", None)
    if fmt == "json":
        payload = {"schema_version": spectra.SCHEMA_VERSION, "columns": columns,
                   "rows": [list(r) for r in rows]}
        if payload_extra:
            payload.update(payload_extra)
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        lines = [f"# schema_version={spectra.SCHEMA_VERSION}", ",".join(columns)]
        for row in rows:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
        text = "\n".join(lines) + "\n"
    else:
        widths = [max(len(str(c)), 14) for c in columns]
        lines = ["  ".join(str(c).ljust(w) for c, w in zip(columns, widths))]
        for row in rows:
            cells = [f"{v:.9g}" if isinstance(v, float) else str(v) for v in row]
            lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
        text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def cmd_fictitious_field(args) -> int:
    species = _load_species(args)
    f_level = args.f_level if args.f_level is not None else species.ground_F
    rows = []
    for intensity in _parse_grid(args.intensity):
        field = lightshift.LightField(intensity=float(intensity), detuning=args.detuning,
                                      polarization=_POLARIZATIONS[args.pol]())
        b = lightshift.fictitious_field(field, species, f_level)
        rows.append((float(intensity), b, b * 1e3))
    _emit(args, ["intensity_W_cm2", "B_fict_G", "B_fict_mG"], rows)
    return 0


def cmd_scattering_rate(args) -> int:
    species = _load_species(args)
    f_level = args.f_level if args.f_level is not None else species.ground_F
    m_f = args.mf if args.mf is not None else f_level
    rows = []
    for intensity in _parse_grid(args.intensity):
        field = lightshift.LightField(intensity=float(intensity), detuning=args.detuning,
                                      polarization=_POLARIZATIONS[args.pol]())
        rows.append((float(intensity),
                     lightshift.scattering_rate(field, species, f_level, m_f)))
    _emit(args, ["intensity_W_cm2", "scattering_rate_Hz"], rows)
    return 0


def cmd_heating_rate(args) -> int:
    species = _load_species(args)
    f_level = args.f_level if args.f_level is not None else species.ground_F
    m_f = args.mf if args.mf is not None else f_level
    rows = []
    for intensity in _parse_grid(args.intensity):
        field = lightshift.LightField(intensity=float(intensity), detuning=args.detuning,
                                      polarization=_POLARIZATIONS[args.pol]())
        rows.append((float(intensity),
                     lightshift.heating_rate(field, species, f_level, m_f)))
    _emit(args, ["intensity_W_cm2", "heating_rate_nK_per_ms"], rows)
    return 0


def cmd_resonances(args) -> int:
    omega_b = 2.0 * math.pi * args.omega_b_hz
    rows = [(m, w_res / (2.0 * math.pi))
            for m, w_res in floquet.resonance_frequencies(omega_b, args.m_max)]
    _emit(args, ["m", "f_res_Hz"], rows)
    return 0


def cmd_floquet_gap(args) -> int:
    omega_b = 2.0 * math.pi * args.omega_b_hz
    model = floquet.DrivenTwoLevel(omega_alpha=0.0, omega_beta=-omega_b,
                                   Omega=2.0 * math.pi * args.rabi_hz,
                                   A=2.0 * math.pi * args.amplitude_hz,
                                   omega_mod=2.0 * math.pi * abs(args.omega_b_hz / args.m))
    w_expect = -omega_b / args.m
    if args.window:
        lo, hi = _parse_window(args.window)
        window = (2.0 * math.pi * lo, 2.0 * math.pi * hi)
    else:
        half = 0.02 * w_expect / abs(args.m)
        window = (w_expect - half, w_expect + half)
    gap, center = floquet.avoided_crossing_gap(model, args.m, window)
    model_at = floquet.DrivenTwoLevel(model.omega_alpha, model.omega_beta,
                                      model.Omega, model.A, center)
    rwa = abs(floquet.effective_coupling(model_at, args.m))
    _emit(args, ["m", "gap_Hz", "center_Hz", "rwa_gap_Hz"],
          [(args.m, gap / (2 * math.pi), center / (2 * math.pi), rwa / (2 * math.pi))])
    return 0


def cmd_scattering_length(args) -> int:
    model = scattering.ResonanceModel(a_bk=args.a_bk,
                                      delta_m=2.0 * math.pi * args.delta_m_hz,
                                      omega0=2.0 * math.pi * args.omega0_hz,
                                      m=args.m)
    rows = []
    for f in _parse_grid(args.grid):
        rows.append((float(f), scattering.scattering_length(model, 2.0 * math.pi * float(f))))
    _emit(args, ["f_Hz", "a_s_a0"], rows)
    return 0


def cmd_dressed(args) -> int:
    model = scattering.DressedChannelModel(
        a_bk=args.a_bk, delta_m=2.0 * math.pi * args.delta_m_hz,
        gamma_in=2.0 * math.pi * args.gamma_hz,
        omega_b=2.0 * math.pi * args.omega_b_hz,
        delta_shift=2.0 * math.pi * args.delta_shift_hz, m=args.m)
    rows = []
    for f in _parse_grid(args.grid):
        alpha, beta = scattering.dressed_alpha_beta(model, 2.0 * math.pi * float(f),
                                                    k=args.k_wavenumber,
                                                    k_convention=args.k_convention,
                                                    reduced_mass=atomdata.CS_MASS / 2.0)
        rows.append((float(f), alpha, beta))
    _emit(args, ["f_Hz", "alpha_a0", "beta_a0"], rows)
    return 0


# -- scan ------------------------------------------------------------------

def _section_float(sec, key, path, default=None):
    if key not in sec.values:
        if default is not None:
            return default
        raise ConfigError(f"missing key {key!r} in [{sec.name}]", path, sec.line)
    try:
        return float(sec.values[key])
    except ValueError:
        raise ConfigError(f"cannot parse {key!r} = {sec.values[key]!r}",
                          path, sec.value_lines[key]) from None


def cmd_scan(args) -> int:
    path = args.config
    sections = load_keyvalue(path)
    scan_sec = None
    res_secs = []
    widths_sec = None
    for sec in sections:
        if sec.name == "scan":
            scan_sec = sec
        elif sec.name == "resonance":
            res_secs.append(sec)
        elif sec.name == "widths":
            widths_sec = sec
        else:
            raise ConfigError(f"unknown section [{sec.name}]", path, sec.line)
    if scan_sec is None:
        raise ConfigError("missing [scan] section", path)

    axis = scan_sec.values.get("axis", spectra.AXIS_FREQ)
    seed_val = scan_sec.values.get("seed")
    seed = int(seed_val) if seed_val is not None else None
    if args.seed is not None:
        seed = args.seed
    common = dict(
        hold_time=_section_float(scan_sec, "hold_time_ms", path, 5.0) * 1e-3,
        density=_section_float(scan_sec, "density_cm3", path, 1e13),
        noise_sigma=_section_float(scan_sec, "noise_sigma", path, 0.0),
        seed=seed,
    )
    metadata = {}
    for key in ("field_G", "intensity_W_cm2"):
        if key in scan_sec.values:
            metadata[key] = _section_float(scan_sec, key, path)

    if axis == spectra.AXIS_FREQ:
        if not res_secs:
            raise ConfigError("frequency scan needs at least one [resonance] section", path)
        start = _section_float(scan_sec, "start_hz", path)
        stop = _section_float(scan_sec, "stop_hz", path)
        n = int(_section_float(scan_sec, "points", path))
        dc_shift = _section_float(scan_sec, "dc_shift_hz", path, 0.0)
        models = []
        for sec in res_secs:
            models.append(scattering.ResonanceModel(
                a_bk=_section_float(sec, "a_bk", path),
                delta_m=2 * math.pi * _section_float(sec, "delta_m_hz", path),
                omega0=2 * math.pi * (_section_float(sec, "omega0_hz", path) + dc_shift),
                m=int(_section_float(sec, "m", path))))
        spec = spectra.synthesize_spectrum(models, np.linspace(start, stop, n),
                                           metadata=metadata, **common)
    elif axis == spectra.AXIS_FIELD:
        if widths_sec is None or not widths_sec.rows:
            raise ConfigError("field scan needs a [widths] section with '<|m|> <width_hz>' rows",
                              path)
        widths = {}
        for lineno, tokens in widths_sec.rows:
            if len(tokens) != 2:
                raise ConfigError("width row must be '<|m|> <width_hz>'", path, lineno)
            widths[int(tokens[0])] = float(tokens[1])
        registry_arg = scan_sec.values.get("registry", "builtin")
        registry = (atomdata.cesium_states() if registry_arg == "builtin"
                    else atomdata.load_state_registry(registry_arg))
        label = scan_sec.values.get("state")
        if label is None:
            raise ConfigError("field scan needs 'state = <label>'", path, scan_sec.line)
        state = next((s for s in registry if s.label == label), None)
        if state is None:
            raise ConfigError(f"state {label!r} not in registry", path, scan_sec.line)
        start = _section_float(scan_sec, "start_G", path)
        stop = _section_float(scan_sec, "stop_G", path)
        n = int(_section_float(scan_sec, "points", path))
        spec = spectra.synthesize_field_scan(
            state, registry, _section_float(scan_sec, "f_mod_hz", path),
            np.linspace(start, stop, n), widths,
            a_bk=_section_float(scan_sec, "a_bk", path, 200.0),
            dc_shift_hz=_section_float(scan_sec, "dc_shift_hz", path, 0.0),
            metadata=metadata, **common)
    else:
        raise ConfigError(f"unknown axis {axis!r}", path, scan_sec.line)

    base = Path(args.out)
    spectra.write_spectrum_csv(spec, base.with_suffix(".csv"))
    spectra.write_spectrum_json(spec, base.with_suffix(".json"))
    sys.stdout.write(f"wrote {base.with_suffix('.csv')} and {base.with_suffix('.json')} "
                     f"({len(spec)} points)\n")
    return 0


# -- fit ---------------------------------------------------------------------

def _read_plain_csv(path, n_cols_min):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                if lineno == 1 or (rows == [] and not line[0].isdigit() and line[0] != "-"):
                    continue   # header row
                raise ConfigError("cannot parse numeric row", path, lineno) from None
            if len(fields) < n_cols_min:
                raise ConfigError(f"need at least {n_cols_min} columns", path, lineno)
    if not rows:
        raise ConfigError("no data rows", path)
    return rows


def _fit_report(args, payload) -> None:
    payload["schema_version"] = spectra.SCHEMA_VERSION
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_fit(args) -> int:
    if args.model == "fano":
        spec = spectra.read_spectrum_csv(args.input)
        window = _parse_window(args.window) if args.window else None
        try:
            fit = spectra.fit_fano(spec, window=window)
        except ConvergenceError as exc:
            _fit_report(args, {"model": "fano", "converged": False, "error": str(exc),
                               "last_params": list(map(float, exc.last))
                               if exc.last is not None else None})
            return 4
        _fit_report(args, {
            "model": "fano", "converged": True,
            "params": {"center": fit.center, "width": fit.width, "q": fit.q,
                       "amplitude": fit.amplitude, "offset": fit.offset},
            "center_stderr": fit.center_stderr,
            "covariance": fit.covariance.tolist(),
            "residual_norm": fit.residual_norm,
            "iterations": fit.iterations,
        })
        return 0
    if args.model == "lz":
        rows = _read_plain_csv(args.input, 3)
        data = [(r[0], r[1], int(r[2])) for r in rows]
        try:
            fit = spectra.fit_landau_zener(data)
        except ConvergenceError as exc:
            _fit_report(args, {"model": "lz", "converged": False, "error": str(exc),
                               "last_params": list(map(float, exc.last))
                               if exc.last is not None else None})
            return 4
        _fit_report(args, {
            "model": "lz", "converged": True,
            "params": {"v_ij_hz": fit.v_ij, "e_i0_hz": fit.e_i0,
                       "slope_i_hz_per_G": fit.slope_i, "e_j0_hz": fit.e_j0,
                       "slope_j_hz_per_G": fit.slope_j, "b_center_G": fit.b_center},
            "covariance": fit.covariance.tolist(),
            "residual_norm": fit.residual_norm,
            "iterations": fit.iterations,
            "condition_warning": fit.condition_warning,
        })
        return 0
    # linear shift compensation
    rows = _read_plain_csv(args.input, 2)
    sigma = [r[2] for r in rows] if all(len(r) >= 3 for r in rows) else None
    fit = spectra.fit_linear_shift([(r[0], r[1]) for r in rows], sigma)
    _fit_report(args, {
        "model": "linear", "converged": True,
        "params": {"zero_intensity_center_hz": fit.intercept,
                   "slope_hz_per_intensity": fit.slope},
        "stderr": {"intercept": fit.intercept_stderr, "slope": fit.slope_stderr},
        "residual_norm": fit.residual_norm,
    })
    return 0


def cmd_energy_map(args) -> int:
    scan_dir = Path(args.scan_dir)
    if not scan_dir.is_dir():
        raise ConfigError(f"{scan_dir} is not a directory")
    files = sorted(scan_dir.glob("*.json"))
    if not files:
        raise ConfigError(f"no spectrum JSON files in {scan_dir}")
    scans = []
    for path in files:
        spec = spectra.read_spectrum_json(path)
        try:
            b_field = float(spec.metadata["field_G"])
            intensity = float(spec.metadata["intensity_W_cm2"])
        except KeyError as exc:
            raise ConfigError(f"spectrum metadata lacks {exc}", path) from None
        scans.append((b_field, spec, intensity))
    registry = (atomdata.cesium_states() if args.registry == "builtin"
                else atomdata.load_state_registry(args.registry))
    points = spectra.assemble_energy_map(
        scans, registry, min_depth=args.min_depth,
        min_separation_hz=args.min_separation_hz)
    if args.output:
        spectra.write_energy_map_csv(points, args.output)
        sys.stdout.write(f"wrote {args.output} ({len(points)} points)\n")
    else:
        _emit(args, ["B_Gauss", "omega_res_Hz", "order_m", "state", "bound", "flagged"],
              [(p.B, p.omega_res, p.order_m, p.state_label, int(p.bound), int(p.flagged))
               for p in points])
    n_flagged = sum(p.flagged for p in points)
    if n_flagged:
        sys.stderr.write(f"{n_flagged} ambiguous association(s) flagged\n")
        return 3
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

# argparse's stock matcher rejects scientific notation, breaking values like
# '--detuning -24e9'; widen it on every (sub)parser we build
_NEGATIVE_NUMBER = re.compile(r"^-\d+$|^-\d*\.?\d+([eE][-+]?\d+)?$")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modfesh",
        description="Modulation-induced Feshbach resonance toolkit")
    parser._negative_number_matcher = _NEGATIVE_NUMBER
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--species", help=f"species data file (default: ${SPECIES_ENV_VAR} "
                                          "or embedded cesium)")
    common.add_argument("--format", choices=("table", "csv", "json"), default="table")
    common.add_argument("--output", help="write result to this file instead of stdout")

    light = argparse.ArgumentParser(add_help=False)
    light.add_argument("--intensity", required=True,
                       help="W/cm^2, single value or start:stop:points grid")
    light.add_argument("--detuning", type=float, required=True,
                       help="Hz, signed, relative to the D2 F->F'=F+1 line (red < 0)")
    light.add_argument("--pol", choices=sorted(_POLARIZATIONS), required=True)
    light.add_argument("--f-level", type=int, default=None,
                       help="hyperfine manifold F (default: species ground F)")

    p = sub.add_parser("fictitious-field", parents=[common, light],
                       help="vector-light-shift fictitious magnetic field")
    p.set_defaults(func=cmd_fictitious_field)

    p = sub.add_parser("scattering-rate", parents=[common, light],
                       help="photon scattering rate of |F, mF>")
    p.add_argument("--mf", type=int, default=None, help="mF (default: stretched, mF = F)")
    p.set_defaults(func=cmd_scattering_rate)

    p = sub.add_parser("heating-rate", parents=[common, light],
                       help="recoil heating rate in nK/ms")
    p.add_argument("--mf", type=int, default=None)
    p.set_defaults(func=cmd_heating_rate)

    p = sub.add_parser("resonances", parents=[common],
                       help="modulation-resonance positions (fundamental + subharmonics)")
    p.add_argument("--omega-b-hz", type=float, required=True,
                   help="free-to-bound gap omega_b/2pi in Hz (positive: state below threshold)")
    p.add_argument("--m-max", type=int, default=3)
    p.set_defaults(func=cmd_resonances)

    p = sub.add_parser("floquet-gap", parents=[common],
                       help="numerical avoided-crossing gap vs the RWA prediction")
    p.add_argument("--omega-b-hz", type=float, required=True)
    p.add_argument("--rabi-hz", type=float, required=True, help="bare coupling Omega/2pi")
    p.add_argument("--amplitude-hz", type=float, required=True, help="drive amplitude A/2pi")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--window", default=None, help="scan window lo:hi in Hz")
    p.set_defaults(func=cmd_floquet_gap)

    p = sub.add_parser("scattering-length", parents=[common],
                       help="effective scattering length vs modulation frequency")
    p.add_argument("--a-bk", type=float, required=True, help="background length, Bohr radii")
    p.add_argument("--delta-m-hz", type=float, required=True)
    p.add_argument("--omega0-hz", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--grid", required=True, help="frequency grid start:stop:points in Hz")
    p.set_defaults(func=cmd_scattering_length)

    p = sub.add_parser("dressed", parents=[common],
                       help="dressed-atom complex scattering length alpha - i beta")
    p.add_argument("--a-bk", type=float, required=True)
    p.add_argument("--delta-m-hz", type=float, required=True)
    p.add_argument("--gamma-hz", type=float, required=True, help="inelastic coupling gamma/2pi")
    p.add_argument("--omega-b-hz", type=float, required=True)
    p.add_argument("--delta-shift-hz", type=float, default=0.0)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--k-wavenumber", type=float, default=0.0, help="collisional k in 1/m")
    p.add_argument("--k-convention", choices=("collision_energy", "wavenumber"),
                   default="collision_energy")
    p.set_defaults(func=cmd_dressed)

    p = sub.add_parser("scan", parents=[common],
                       help="synthesize a loss spectrum from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output base path (.csv and .json)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fit", parents=[common],
                       help="fit a spectrum or crossing data; JSON report")
    p.add_argument("--model", choices=("fano", "lz", "linear"), required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--window", default=None, help="fano fit window lo:hi (axis units)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("energy-map", parents=[common],
                       help="assemble the binding-energy map from processed scans")
    p.add_argument("--scan-dir", required=True,
                   help="directory of spectrum JSON files with field_G/intensity metadata")
    p.add_argument("--registry", default="builtin",
                   help="molecular-state registry file, or 'builtin'")
    p.add_argument("--min-depth", type=float, default=0.05)
    p.add_argument("--min-separation-hz", type=float, default=8e3)
    p.set_defaults(func=cmd_energy_map)

    for action in sub.choices.values():
        action._negative_number_matcher = _NEGATIVE_NUMBER
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def run(argv=None) -> int:
    """Entry point with the exit-code contract applied."""
    try:
        return main(argv)
    except SystemExit as exc:   # argparse: 0 for --help, 2 for usage errors
        code = exc.code
        return code if isinstance(code, int) else (0 if code is None else 2)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except DomainError as exc:
        sys.stderr.write(f"domain error: {exc}\n")
        return 3
    except ConvergenceError as exc:
        sys.stderr.write(f"convergence error: {exc}\n")
        return 4


if __name__ == "__main__":
    sys.exit(run())
