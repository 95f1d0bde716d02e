"""Command-line front end: ``blochpdc <subcommand> --config FILE``.

Subcommands write CSV grids and JSON reports into ``--out``.  Every flag can
also be set through an environment variable ``BLOCHPDC_<FLAG>`` (for example
``BLOCHPDC_THREADS=8`` or ``BLOCHPDC_NO_CHI2_WEIGHTING=1``); flags win.
Failures print a one-line JSON object on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .band_diagram import band_gaps, band_scan, dispersion_surface, effective_indices
from .bloch_modes import co_propagating_mode
from .config import ConfigError, RunConfig, parse_config
from .phase_matching import (
    NoIntersection,
    NoSolution,
    dominant_terms,
    efficiency_ratio,
    emission_map,
    find_intersections,
    make_candidate,
    solve_ring,
)
from .structure import Polarization

SUBCOMMANDS = ("band", "modes", "surface", "emission", "intersect", "efficiency")
ENV_PREFIX = "BLOCHPDC_"
# amplitudes quoted for the bundled example, shown next to ours for audit
REFERENCE_AMPLITUDES = {"chi": 0.66, "pump": 0.90, "signal": 0.99, "idler": 0.98}
FLOAT = "%.12e"


def _fmt(x) -> str:
    return FLOAT % x


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _cplx(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


# ----------------------------------------------------------------------------
# subcommands


def run_band(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    b = cfg.band
    lams = np.linspace(b.lambda_min, b.lambda_max, b.lambda_samples)
    k_par = np.linspace(0.0, b.k_par_max, b.k_par_samples)
    grid = band_scan(cfg.structure, lams, k_par, b.polarization, threads=threads)
    rows = []
    for i, lam in enumerate(grid.wavelength):
        for j in range(grid.k_par.shape[1]):
            K = grid.K_z[i, j]
            rows.append((lam, grid.k_par[i, j], str(grid.classification[i, j]), K.real, K.imag))
    csv_path = out / "band.csv"
    _write_csv(csv_path, ["lambda_nm", "k_par_rad_per_nm", "classification", "re_Kz_rad_per_nm", "im_Kz_rad_per_nm"], rows)
    # refined stop bands at normal incidence, restricted to the usable range
    lo, hi = b.lambda_min, b.lambda_max
    for m in (cfg.structure.material_a, cfg.structure.material_b):
        r_lo, r_hi = m.dispersion.wavelength_range
        lo = max(lo, r_lo, m.absorption_edge or 0.0)
        hi = min(hi, r_hi)
    gaps = band_gaps(cfg.structure, (lo, hi), 0.0, b.polarization) if lo < hi else []
    json_path = out / "band_gaps.json"
    _write_json(json_path, {
        "polarization": b.polarization.value,
        "k_par_rad_per_nm": 0.0,
        "lambda_range_nm": [lo, hi],
        "gaps": [
            {
                "lambda_short_nm": g.lambda_short,
                "lambda_long_nm": g.lambda_long,
                "omega_normalized": list(g.omega_normalized),
            }
            for g in gaps
        ],
        "cell_counts": {str(k): grid.count(k) for k in sorted(set(grid.classification.ravel().tolist()))},
    })
    return [csv_path, json_path]


def run_surface(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    s = cfg.structure
    lam = cfg.surface_wavelength or 40 * s.period
    rows = []
    for pol in (Polarization.TE, Polarization.TM):
        surf = dispersion_surface(s, lam, pol, cfg.surface_samples)
        for k, kz in zip(surf.k_par, surf.K_z):
            rows.append((pol.value, k, kz))
    path = out / "surface.csv"
    _write_csv(path, ["polarization", "k_par_rad_per_nm", "Kz_rad_per_nm"], rows)
    n_o, n_e = effective_indices(s, lam)
    meta = out / "surface.json"
    _write_json(meta, {"wavelength_nm": lam, "n_o": n_o, "n_e": n_e})
    return [path, meta]


def run_modes(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    q = cfg.modes_query or cfg.process.pump
    flux = cfg.modes_flux
    mode = co_propagating_mode(cfg.structure, q, flux, window=cfg.window)
    idx = cfg.window.indices
    coeffs = mode.fourier(idx)
    G = cfg.structure.reciprocal
    rows = []
    for n, c in zip(idx, coeffs):
        rows.append((f"{int(n)}", n * G, c[0].real, c[0].imag, c[1].real, c[1].imag, c[2].real, c[2].imag))
    csv_path = out / "modes.csv"
    _write_csv(csv_path, ["n", "G_rad_per_nm", "re_ex", "im_ex", "re_ey", "im_ey", "re_ez", "im_ez"], rows)
    meta = out / "modes.json"
    _write_json(meta, {
        "wavelength_nm": q.wavelength,
        "k_par_rad_per_nm": list(q.k_par),
        "polarization": q.polarization.value,
        "classification": mode.K.classification.value,
        "K_z_rad_per_nm": _cplx(mode.K_z),
        "flux_sign": mode.flux_sign,
        "normalization": mode.norm_convention,
        "window_half_width": cfg.fourier_window,
    })
    return [csv_path, meta]


def _ring_radius(spec, s, azimuth):
    try:
        return solve_ring(spec, s, azimuth).radius
    except NoSolution:
        return None


def run_emission(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    spec, s = cfg.process, cfg.structure
    emap = emission_map(
        spec, s, cfg.emission_resolution, cfg.emission_extent, cfg.chi2_weighting, threads, cfg.window
    )
    kx, ky = np.meshgrid(emap.kx, emap.ky)
    tag = spec.process_type
    csv_path = out / f"emission_{tag}.csv"
    _write_csv(
        csv_path,
        ["kx_rad_per_nm", "ky_rad_per_nm", "intensity", "intensity_te", "intensity_tm"],
        zip(kx.ravel(), ky.ravel(), emap.intensity.ravel(), emap.te.ravel(), emap.tm.ravel()),
    )
    meta = out / f"emission_{tag}.json"
    _write_json(meta, {
        "process_type": tag,
        "chi2_weighting": emap.chi2_weighting,
        "resolution": cfg.emission_resolution,
        "grid_step_rad_per_nm": emap.resolution,
        "light_line_rad_per_nm": emap.light_line,
        "peak_intensity": emap.peak,
        "pump_k_par_rad_per_nm": list(spec.pump.k_par),
        # distance from half the pump k_par to the ring, along -y and +y
        "ring_radius_rad_per_nm": {
            "minus_y": _ring_radius(spec, s, -math.pi / 2),
            "plus_y": _ring_radius(spec, s, math.pi / 2),
        },
        "units": "intensity is |amplitude|^2, dimensionless, prefactors set to 1",
    })
    return [csv_path, meta]


def run_intersect(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    spec = replace(cfg.process, process_type="II")
    found = find_intersections(spec, cfg.structure, cfg.azimuth_samples)
    path = out / "intersections.json"
    _write_json(path, {
        "coincident_rings": found.coincident,
        "pairs": [
            {"TE_H_k_par_rad_per_nm": list(p.te), "TM_V_k_par_rad_per_nm": list(p.tm)}
            for p in found.pairs
        ],
        "two_photon_state": found.state,
    })
    return [path]


def efficiency_report(cfg: RunConfig) -> dict:
    """Single-term efficiency at the first Type II intersection (TE photon as signal)."""
    spec = replace(cfg.process, process_type="II")
    s = cfg.structure
    found = find_intersections(spec, s, cfg.azimuth_samples)
    if found.coincident:
        k_signal = solve_ring(spec, s, -math.pi / 2).k_signal
    else:
        k_signal = found.pairs[0].te
    cand = make_candidate(spec, s, k_signal, window=cfg.window)
    terms = dominant_terms(cand.pump, cand.signal, cand.idler, s, spec.g_total)
    amps = cand.fourier_amplitudes
    return {
        "k_signal_rad_per_nm": list(k_signal),
        "g_combo": list(cand.g_combo),
        "dominant_g_combo": list(terms[0][0]),
        "delta_kz_rad_per_nm": cand.delta_kz,
        "fourier_product": abs(cand.fourier_product),
        "chi2_factor": cand.chi2_normalized,
        "ratio_vs_reference": efficiency_ratio(cand, cfg.reference_chi2),
        "reference_chi2_pm_per_V": cfg.reference_chi2,
        "amplitudes": amps,
        "reference_amplitudes": REFERENCE_AMPLITUDES,
    }


def run_efficiency(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    path = out / "efficiency.json"
    _write_json(path, efficiency_report(cfg))
    return [path]


RUNNERS = {
    "band": run_band,
    "modes": run_modes,
    "surface": run_surface,
    "emission": run_emission,
    "intersect": run_intersect,
    "efficiency": run_efficiency,
}


# ----------------------------------------------------------------------------
# argument handling


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blochpdc", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", default=_env("CONFIG"),
                    help="YAML run config, or a bundled example name (algaas_air, illustrative)")
    ap.add_argument("--out", default=_env("OUT"), help="output directory (default: config output_dir)")
    ap.add_argument("--threads", type=int, default=int(_env("THREADS") or 1))
    ap.add_argument("--window", type=int, default=_env("WINDOW") and int(_env("WINDOW")),
                    help="Fourier window half-width")
    ap.add_argument("--resolution", type=int, default=_env("RESOLUTION") and int(_env("RESOLUTION")),
                    help="emission grid points per axis")
    ap.add_argument("--process", choices=("I", "II", "III"), default=_env("PROCESS"))
    ap.add_argument("--no-chi2-weighting", action="store_true",
                    default=(_env("NO_CHI2_WEIGHTING") or "0").lower() not in ("0", "", "false", "no"),
                    help="drop the tensor contraction from emission maps")
    return ap


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.window:
        changes["fourier_window"] = args.window
    if args.resolution:
        changes["emission_resolution"] = args.resolution
    if args.no_chi2_weighting:
        changes["chi2_weighting"] = False
    if args.process:
        changes["process"] = cfg.process.with_type(args.process)
    if args.out:
        changes["output_dir"] = Path(args.out)
    return replace(cfg, **changes)


def _fail(subcommand, exc, code: int) -> int:
    err = {"subcommand": subcommand, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        err["violations"] = exc.errors
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not args.config:
        return _fail(args.subcommand, ValueError("no config given (--config or BLOCHPDC_CONFIG)"), 2)
    if args.threads < 1:
        return _fail(args.subcommand, ValueError("--threads must be at least 1"), 2)
    try:
        cfg = apply_overrides(parse_config(args.config), args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        return _fail(args.subcommand, exc, 2)
    try:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = RUNNERS[args.subcommand](cfg, out, args.threads)
    except (NoIntersection, NoSolution, ValueError, ArithmeticError, OSError) as exc:
        return _fail(args.subcommand, exc, 1)
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
