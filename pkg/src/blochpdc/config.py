"""Run configuration: a YAML file validated against a fixed schema.

Layout (units are part of the key names)::

    materials:
      <name>:
        index: 3.4                # constant index, or
        table: [[700, 3.41], ...] # inline (lambda_nm, n) rows, or
        table_file: algaas_x040   # CSV path (relative to this file) or bundled table name
        absorption_edge_nm: 640
        chi2: {symmetry: zincblende_43m, magnitude_pm_per_V: 200, rotation_deg: 0}
    structure:
      a: {material: <name>, thickness_nm: 123}
      b: {material: <name>, thickness_nm: 64.5}
      periods: 15
      layers: 30
    process:
      pump: {wavelength_nm: 750, polarization: TM, incidence_angle_deg: 40}
      signal_wavelength_nm: 1500
      type: II
      g_combo: [0, 1, 0, 0]
    scans: {band: {...}, surface: {...}, emission: {...}, intersect: {...}}
    fourier_window: 32
    reference_chi2_pm_per_V: 2.2
    output_dir: out               # relative to the working directory

Every violation is collected before raising, so one run reports them all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from .bloch_modes import FourierWindow
from .materials import Chi2Tensor, DispersionModel, Material, bundled_table, rotation_about_z
from .phase_matching import ProcessSpec
from .structure import BraggStructure, ModeQuery, Polarization


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, path, errors):
        self.path = str(path)
        self.errors = list(errors)
        super().__init__(f"{self.path}: " + "; ".join(self.errors))


_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_POL = {"enum": ["TE", "TM"]}

_MATERIAL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "index": {"type": "number", "minimum": 1},
        "table": {
            "type": "array",
            "minItems": 2,
            "items": {"type": "array", "items": _POSITIVE, "minItems": 2, "maxItems": 2},
        },
        "table_file": {"type": "string", "minLength": 1},
        "absorption_edge_nm": _POSITIVE,
        "chi2": {
            "type": "object",
            "additionalProperties": False,
            "required": ["symmetry"],
            "properties": {
                "symmetry": {"enum": ["zincblende_43m", "scalar_isotropic", "zero"]},
                "magnitude_pm_per_V": {"type": "number"},
                "rotation_deg": {"type": "number"},
            },
        },
    },
}

_LAYER = {
    "type": "object",
    "additionalProperties": False,
    "required": ["material", "thickness_nm"],
    "properties": {
        "material": {"type": "string"},
        # sign is checked separately so the message names the field plainly
        "thickness_nm": {"type": "number"},
    },
}

_SCANS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "band": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda_min_nm": _POSITIVE,
                "lambda_max_nm": _POSITIVE,
                "lambda_samples": _POS_INT,
                "k_par_max_rad_per_nm": {"type": "number", "minimum": 0},
                "k_par_samples": _POS_INT,
                "polarization": _POL,
            },
        },
        "surface": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"wavelength_nm": _POSITIVE, "samples": {"type": "integer", "minimum": 2}},
        },
        "emission": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resolution": {"type": "integer", "minimum": 2},
                "extent_rad_per_nm": _POSITIVE,
                "chi2_weighting": {"type": "boolean"},
            },
        },
        "modes": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "wavelength_nm": _POSITIVE,
                "polarization": _POL,
                "k_par_rad_per_nm": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "flux": {"enum": [1, -1]},
            },
        },
        "intersect": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"azimuth_samples": {"type": "integer", "minimum": 8}},
        },
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["materials", "structure"],
    "properties": {
        "materials": {"type": "object", "minProperties": 1, "additionalProperties": _MATERIAL},
        "structure": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a", "b"],
            "properties": {"a": _LAYER, "b": _LAYER, "periods": _POS_INT, "layers": _POS_INT},
        },
        "process": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pump": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "wavelength_nm": _POSITIVE,
                        "polarization": _POL,
                        "k_par_rad_per_nm": {
                            "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2,
                        },
                        "incidence_angle_deg": {"type": "number", "minimum": 0, "exclusiveMaximum": 90},
                        "branch": {"enum": [1, -1]},
                    },
                },
                "signal_wavelength_nm": _POSITIVE,
                "type": {"enum": ["I", "II", "III"]},
                "g_combo": {"type": "array", "items": {"type": "integer"}, "minItems": 4, "maxItems": 4},
            },
        },
        "scans": _SCANS,
        "fourier_window": {"type": "integer", "minimum": 1},
        "reference_chi2_pm_per_V": _POSITIVE,
        "output_dir": {"type": "string"},
    },
}


@dataclass(frozen=True)
class BandScanConfig:
    lambda_min: float = 200.0
    lambda_max: float = 4000.0
    lambda_samples: int = 512
    k_par_max: float = 0.0
    k_par_samples: int = 1
    polarization: Polarization = Polarization.TE


@dataclass(frozen=True)
class RunConfig:
    source: Path
    structure: BraggStructure
    process: ProcessSpec
    band: BandScanConfig = field(default_factory=BandScanConfig)
    surface_wavelength: float | None = None
    surface_samples: int = 256
    emission_resolution: int = 200
    emission_extent: float | None = None
    chi2_weighting: bool = True
    modes_query: ModeQuery | None = None
    modes_flux: int = 1
    azimuth_samples: int = 720
    fourier_window: int = 32
    reference_chi2: float = 2.2
    output_dir: Path = Path("out")

    @property
    def window(self) -> FourierWindow:
        return FourierWindow.symmetric(self.fourier_window)


def _field_path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def _schema_errors(raw) -> list[str]:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        out.append(f"{_field_path(err)}: {err.message}")
    return out


def _resolve_table(ref: str, base: Path) -> Path | None:
    p = Path(ref)
    if not p.is_absolute():
        p = base / p
    if p.is_file():
        return p
    try:
        return bundled_table(ref)
    except FileNotFoundError:
        return None


def _material(name, spec, base, errors) -> Material | None:
    sources = [k for k in ("index", "table", "table_file") if k in spec]
    if "table" in spec and "table_file" in spec:
        errors.append(f"materials.{name}: ambiguous dispersion, both 'table' and 'table_file' given")
        return None
    if len(sources) > 1:
        errors.append(f"materials.{name}: give only one of index, table, table_file (got {', '.join(sources)})")
        return None
    try:
        if "index" in spec:
            disp = DispersionModel(constant=float(spec["index"]))
        elif "table" in spec:
            disp = DispersionModel(table=tuple(tuple(r) for r in spec["table"]))
        elif "table_file" in spec:
            path = _resolve_table(spec["table_file"], base)
            if path is None:
                errors.append(f"materials.{name}.table_file: cannot find {spec['table_file']!r}")
                return None
            disp = DispersionModel.from_csv(path)
        else:
            disp = DispersionModel.vacuum()
        chi = spec.get("chi2", {"symmetry": "zero"})
        tensor = Chi2Tensor(
            chi["symmetry"],
            float(chi.get("magnitude_pm_per_V", 0.0)),
            rotation_about_z(math.radians(chi.get("rotation_deg", 0.0))),
        )
        return Material(name, disp, spec.get("absorption_edge_nm"), tensor)
    except (ValueError, OSError) as exc:
        errors.append(f"materials.{name}: {exc}")
        return None


def _pump(raw, errors) -> ModeQuery:
    pump = raw.get("pump", {})
    lam = float(pump.get("wavelength_nm", 750.0))
    pol = pump.get("polarization", "TM")
    if "k_par_rad_per_nm" in pump and "incidence_angle_deg" in pump:
        errors.append("process.pump: give k_par_rad_per_nm or incidence_angle_deg, not both")
        return ModeQuery(lam, polarization=pol)
    if "incidence_angle_deg" in pump:
        # external incidence from vacuum, tilted in the y-z plane
        k = 2 * math.pi / lam * math.sin(math.radians(pump["incidence_angle_deg"]))
        return ModeQuery(lam, (0.0, k), pol)
    return ModeQuery(lam, tuple(pump.get("k_par_rad_per_nm", (0.0, 0.0))), pol)


def build_config(raw, source: Path) -> RunConfig:
    """Validate a parsed mapping and build the typed configuration."""
    source = Path(source)
    if not isinstance(raw, dict):
        raise ConfigError(source, ["<root>: expected a mapping"])
    errors = _schema_errors(raw)
    if errors:
        # structural problems make the semantic pass unreliable
        raise ConfigError(source, errors)
    base = source.parent

    mats = {}
    for name, spec in raw["materials"].items():
        m = _material(name, spec, base, errors)
        if m is not None:
            mats[name] = m
    st = raw["structure"]
    layers = {}
    for key in ("a", "b"):
        layer = st[key]
        if layer["thickness_nm"] < 0:
            errors.append(f"structure.{key}.thickness_nm: must be non-negative, got {layer['thickness_nm']}")
        if layer["material"] not in raw["materials"]:
            errors.append(f"structure.{key}.material: unknown material {layer['material']!r}")
        layers[key] = (mats.get(layer["material"]), float(layer["thickness_nm"]))
    periods = st.get("periods", 1)
    if "layers" in st and st["layers"] not in (2 * periods, 2 * periods + 1):
        errors.append(f"structure.layers: {st['layers']} is inconsistent with {periods} periods")
    if layers["a"][1] + layers["b"][1] <= 0 and layers["a"][1] >= 0 and layers["b"][1] >= 0:
        errors.append("structure: period must be positive")

    proc = raw.get("process", {})
    pump = _pump(proc, errors)
    band = raw.get("scans", {}).get("band", {})
    if band.get("lambda_min_nm", 0) and band.get("lambda_max_nm", 0):
        if band["lambda_min_nm"] >= band["lambda_max_nm"]:
            errors.append("scans.band: lambda_min_nm must be below lambda_max_nm")
    signal = proc.get("signal_wavelength_nm")
    if signal is not None and signal <= pump.wavelength:
        errors.append("process.signal_wavelength_nm: must exceed the pump wavelength")
    if errors:
        raise ConfigError(source, errors)

    structure = BraggStructure(layers["a"][0], layers["a"][1], layers["b"][0], layers["b"][1],
                               periods, st.get("layers"))
    process = ProcessSpec(
        pump,
        signal,
        proc.get("type", "II"),
        tuple(proc.get("g_combo", (0, 1, 0, 0))),
        raw.get("process", {}).get("pump", {}).get("branch", 1),
    )
    scans = raw.get("scans", {})
    band_cfg = BandScanConfig(
        float(band.get("lambda_min_nm", 200.0)),
        float(band.get("lambda_max_nm", 4000.0)),
        int(band.get("lambda_samples", 512)),
        float(band.get("k_par_max_rad_per_nm", 0.0)),
        int(band.get("k_par_samples", 1)),
        Polarization(band.get("polarization", "TE")),
    )
    surf = scans.get("surface", {})
    emis = scans.get("emission", {})
    modes = scans.get("modes", {})
    modes_query = None
    if modes:
        modes_query = ModeQuery(
            float(modes.get("wavelength_nm", pump.wavelength)),
            tuple(modes.get("k_par_rad_per_nm", (0.0, 0.0))),
            modes.get("polarization", "TE"),
        )
    return RunConfig(
        source=source,
        structure=structure,
        process=process,
        band=band_cfg,
        surface_wavelength=surf.get("wavelength_nm"),
        surface_samples=int(surf.get("samples", 256)),
        emission_resolution=int(emis.get("resolution", 200)),
        emission_extent=emis.get("extent_rad_per_nm"),
        chi2_weighting=bool(emis.get("chi2_weighting", True)),
        modes_query=modes_query,
        modes_flux=int(modes.get("flux", 1)),
        azimuth_samples=int(scans.get("intersect", {}).get("azimuth_samples", 720)),
        fourier_window=int(raw.get("fourier_window", 32)),
        reference_chi2=float(raw.get("reference_chi2_pm_per_V", 2.2)),
        output_dir=Path(raw.get("output_dir", "out")),
    )


def bundled_config(name: str) -> Path:
    """Path of an example configuration shipped with the package."""
    path = Path(__file__).parent / "data" / f"{name}.cfg"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled config {name!r}")
    return path


def parse_config(path) -> RunConfig:
    """Read and validate a YAML run configuration.

    ``path`` may also name a bundled example (``algaas_air``, ``illustrative``).
    """
    p = Path(path)
    if not p.is_file():
        try:
            p = bundled_config(str(path))
        except FileNotFoundError:
            raise FileNotFoundError(f"config file not found: {path}") from None
    try:
        raw = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(p, [f"<root>: not valid YAML ({exc})"]) from None
    return build_config(raw, p)
