"""Optical materials: refractive-index dispersion, absorption cutoff and chi(2) tensors."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator


class MaterialError(ValueError):
    """Base class for material lookup failures."""


class AbsorbingRegion(MaterialError):
    """Requested wavelength lies below the material absorption edge."""

    def __init__(self, material: str, wavelength: float, edge: float):
        self.material = material
        self.wavelength = wavelength
        self.edge = edge
        super().__init__(
            f"{material} absorbs at {wavelength:g} nm (absorption edge {edge:g} nm)"
        )


class OutOfRange(MaterialError):
    """Requested wavelength lies outside a tabulated dispersion range."""

    def __init__(self, material: str, wavelength: float, lo: float, hi: float):
        self.material = material
        self.wavelength = wavelength
        self.bounds = (lo, hi)
        super().__init__(
            f"{material}: {wavelength:g} nm outside table range [{lo:g}, {hi:g}] nm"
        )


@dataclass(frozen=True)
class DispersionModel:
    """Refractive index as a function of free-space wavelength (nm).

    Exactly one of ``constant`` or ``table`` is set; neither means vacuum.
    Tables with more than two rows use monotone (PCHIP) cubic interpolation,
    two-row tables are interpolated linearly.
    """

    constant: float | None = None
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.constant is not None and self.table is not None:
            raise ValueError("dispersion model takes a constant or a table, not both")
        if self.constant is not None and not self.constant >= 1.0:
            raise ValueError(f"constant index must be >= 1, got {self.constant}")
        if self.table is not None:
            rows = tuple((float(lam), float(n)) for lam, n in self.table)
            if len(rows) < 2:
                raise ValueError("dispersion table needs at least 2 rows")
            lams = np.array([r[0] for r in rows])
            if np.any(np.diff(lams) <= 0):
                raise ValueError("dispersion table wavelengths must be strictly increasing")
            if any(n < 1.0 for _, n in rows):
                raise ValueError("dispersion table indices must be >= 1")
            object.__setattr__(self, "table", rows)

    @classmethod
    def vacuum(cls) -> DispersionModel:
        return cls()

    @classmethod
    def from_csv(cls, path: str | Path) -> DispersionModel:
        """Read a ``lambda_nm,n`` CSV file."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or {"lambda_nm", "n"} - set(reader.fieldnames):
                raise ValueError(f"{path}: expected header 'lambda_nm,n'")
            rows = [(float(r["lambda_nm"]), float(r["n"])) for r in reader]
        return cls(table=tuple(rows))

    @property
    def is_vacuum(self) -> bool:
        return self.constant is None and self.table is None

    def _interpolator(self):
        lams, ns = np.array(self.table).T
        if len(lams) == 2:
            return lambda x: np.interp(x, lams, ns)
        return PchipInterpolator(lams, ns, extrapolate=False)

    def __call__(self, wavelength):
        wavelength = np.asarray(wavelength, dtype=float)
        if self.is_vacuum:
            return np.ones_like(wavelength)
        if self.constant is not None:
            return np.full_like(wavelength, self.constant)
        # cached on first use; frozen dataclass so bypass __setattr__
        interp = self.__dict__.get("_interp")
        if interp is None:
            interp = self._interpolator()
            object.__setattr__(self, "_interp", interp)
        return np.asarray(interp(wavelength), dtype=float)

    @property
    def wavelength_range(self) -> tuple[float, float]:
        if self.table is None:
            return (0.0, np.inf)
        return (self.table[0][0], self.table[-1][0])


_ZINCBLENDE_INDICES = tuple(itertools.permutations(range(3)))


def rotation_about_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Chi2Tensor:
    """Second-order susceptibility as a full 3-index tensor in pm/V.

    ``orientation`` maps crystal-frame vectors to the lab frame; identity puts
    the crystal [100], [010], [001] axes along lab x, y, z.
    """

    symmetry: str = "zero"
    magnitude: float = 0.0
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if self.symmetry not in ("zincblende_43m", "scalar_isotropic", "zero"):
            raise ValueError(f"unknown chi2 symmetry {self.symmetry!r}")
        rot = np.asarray(self.orientation, dtype=float)
        if rot.shape != (3, 3) or not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9):
            raise ValueError("chi2 orientation must be a 3x3 rotation matrix")
        object.__setattr__(self, "orientation", rot)

    @classmethod
    def zincblende(cls, magnitude: float, rotation_deg: float = 0.0) -> Chi2Tensor:
        return cls("zincblende_43m", magnitude, rotation_about_z(np.deg2rad(rotation_deg)))

    @property
    def crystal_components(self) -> np.ndarray:
        chi = np.zeros((3, 3, 3))
        if self.symmetry == "zincblende_43m":
            for ijk in _ZINCBLENDE_INDICES:
                chi[ijk] = self.magnitude
        elif self.symmetry == "scalar_isotropic":
            # scalar model: chi_ijk = magnitude * delta_ij delta_jk
            for i in range(3):
                chi[i, i, i] = self.magnitude
        return chi

    @property
    def components(self) -> np.ndarray:
        """Lab-frame tensor chi_ijk."""
        r = self.orientation
        return np.einsum("ia,jb,kc,abc->ijk", r, r, r, self.crystal_components)

    @property
    def is_zero(self) -> bool:
        return self.symmetry == "zero" or self.magnitude == 0.0


def chi2_contract(tensor: Chi2Tensor, e_p, e_1, e_2, *, check_norm: bool = True) -> complex:
    """Return sum_ijk chi_ijk conj(e_p)_i (e_1)_j (e_2)_k in pm/V."""
    vecs = [np.asarray(v, dtype=complex) for v in (e_p, e_1, e_2)]
    if check_norm:
        for v in vecs:
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError("polarization vectors must have unit norm")
    return complex(np.einsum("ijk,i,j,k->", tensor.components, vecs[0].conj(), vecs[1], vecs[2]))


@dataclass(frozen=True)
class Material:
    name: str
    dispersion: DispersionModel = field(default_factory=DispersionModel)
    absorption_edge: float | None = None
    chi2: Chi2Tensor = field(default_factory=Chi2Tensor)

    def __post_init__(self):
        if self.absorption_edge is not None and not self.absorption_edge > 0:
            raise ValueError(f"{self.name}: absorption edge must be positive")

    @classmethod
    def constant(cls, name: str, n: float, **kwargs) -> Material:
        return cls(name, DispersionModel(constant=n), **kwargs)

    def absorbs(self, wavelength):
        wavelength = np.asarray(wavelength, dtype=float)
        if self.absorption_edge is None:
            return np.zeros(wavelength.shape, dtype=bool)
        return wavelength < self.absorption_edge

    def in_range(self, wavelength):
        lo, hi = self.dispersion.wavelength_range
        wavelength = np.asarray(wavelength, dtype=float)
        return (wavelength >= lo) & (wavelength <= hi)

    def index_unchecked(self, wavelength):
        """Vectorised index lookup for scans; NaN outside a table range."""
        return self.dispersion(wavelength)


def refractive_index(material: Material, wavelength: float) -> float:
    """Refractive index of ``material`` at free-space ``wavelength`` (nm)."""
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    if material.absorption_edge is not None and wavelength < material.absorption_edge:
        raise AbsorbingRegion(material.name, wavelength, material.absorption_edge)
    lo, hi = material.dispersion.wavelength_range
    if not lo <= wavelength <= hi:
        raise OutOfRange(material.name, wavelength, lo, hi)
    return float(material.dispersion(wavelength))


VACUUM = Material("vacuum")


def bundled_table(name: str) -> Path:
    """Path of a dispersion table shipped with the package (``data/<name>.csv``)."""
    path = Path(__file__).parent / "data" / f"{name}.csv"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled dispersion table {name!r}")
    return path


def algaas(chi2_magnitude: float = 200.0, rotation_deg: float = 0.0) -> Material:
    """Al(0.4)Ga(0.6)As: tabulated index from the absorption edge (640 nm) to 2 um."""
    return Material(
        "AlGaAs",
        DispersionModel.from_csv(bundled_table("algaas_x040")),
        absorption_edge=640.0,
        chi2=Chi2Tensor.zincblende(chi2_magnitude, rotation_deg),
    )
