"""Band classification scans, gap edges, dispersion surfaces and effective indices."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .materials import MaterialError
from .structure import BraggStructure, ModeQuery, Polarization
from .transfer_matrix import (
    ModeClass,
    bloch_k_from_complements,
    bloch_wavevector,
    cell_matrix,
    trace_complements,
)

__all__ = [
    "BraggStructure",
    "BandGrid",
    "BandGap",
    "DispersionSurface",
    "EmptySurface",
    "classify",
    "band_scan",
    "band_scan_normalized",
    "band_gaps",
    "effective_indices",
    "dispersion_surface",
    "uniaxial_kz",
    "trivial_dispersion_check",
    "geometric_dispersion_residual",
]

ABSORBING = ModeClass.ABSORBING.value
OUT_OF_RANGE = "out_of_range"
# rows per work unit; fixed so results do not depend on the thread count
SCAN_CHUNK = 32


class EmptySurface(ValueError):
    pass


def classify(structure: BraggStructure, query: ModeQuery) -> tuple[str, complex]:
    """(classification, K_z) for one point; absorption is a class, not an error."""
    lam = query.wavelength
    for m in (structure.material_a, structure.material_b):
        if bool(m.absorbs(lam)):
            return ABSORBING, complex("nan+nanj")
    try:
        n_a, n_b = structure.indices(lam)
    except MaterialError:
        return OUT_OF_RANGE, complex("nan+nanj")
    K = bloch_wavevector(cell_matrix(structure, query), structure.period, max(n_a, n_b))
    return K.classification.value, K.K_z


@dataclass(frozen=True)
class BandGrid:
    """Classification and K_z on a (wavelength x k_par) grid.

    ``k_par`` is 2-D (one row per wavelength) so that angle axes, where
    k_par depends on wavelength, fit the same structure.  ``angle_deg`` is
    set when the scan was requested in incidence angles.
    """

    wavelength: np.ndarray            # (nw,) nm
    k_par: np.ndarray                 # (nw, nk) rad/nm
    polarization: Polarization
    classification: np.ndarray        # (nw, nk) str
    K_z: np.ndarray                   # (nw, nk) complex rad/nm
    period: float
    angle_deg: np.ndarray | None = None

    @property
    def omega_normalized(self) -> np.ndarray:
        """omega L / (pi c) = 2 L / lambda."""
        return 2 * self.period / self.wavelength

    @property
    def k_par_normalized(self) -> np.ndarray:
        return self.k_par * self.period / math.pi

    def count(self, label: str) -> int:
        return int(np.sum(self.classification == label))

    def gap_cells(self) -> int:
        return self.count(ModeClass.GAP.value)


def _row_block(structure, wavelengths, k_par, pol):
    """Classify a block of rows; wavelengths (r,), k_par (r, nk)."""
    mat_a, mat_b = structure.material_a, structure.material_b
    n_a = mat_a.index_unchecked(wavelengths)
    n_b = mat_b.index_unchecked(wavelengths)
    absorbing = mat_a.absorbs(wavelengths) | mat_b.absorbs(wavelengths)
    defined = mat_a.in_range(wavelengths) & mat_b.in_range(wavelengths) & ~absorbing
    lam = wavelengths[:, None]
    na = np.where(defined, n_a, 1.0)[:, None]
    nb = np.where(defined, n_b, 1.0)[:, None]
    p, m = trace_complements(na, nb, structure.thickness_a, structure.thickness_b, lam, k_par, pol)
    K = bloch_k_from_complements(p, m, structure.period)
    prop = (p >= 0) & (m >= 0)
    n_max_k0 = np.maximum(na, nb) * (2 * math.pi / lam)
    labels = np.where(prop, ModeClass.PROPAGATING.value, ModeClass.GAP.value)
    labels = np.where(~prop & (k_par > n_max_k0), ModeClass.TIR.value, labels)
    labels = np.where(absorbing[:, None], ABSORBING, labels)
    labels = np.where((~defined & ~absorbing)[:, None], OUT_OF_RANGE, labels)
    K = np.where(defined[:, None], K, complex("nan+nanj"))
    return labels.astype("<U16"), K


def _scan(structure, wavelengths, k_par, pol, threads):
    blocks = [slice(i, i + SCAN_CHUNK) for i in range(0, len(wavelengths), SCAN_CHUNK)]

    def run(sl):
        return _row_block(structure, wavelengths[sl], k_par[sl], pol)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    labels = np.concatenate([p[0] for p in parts])
    K = np.concatenate([p[1] for p in parts])
    return labels, K


def band_scan(
    structure: BraggStructure,
    wavelengths,
    k_par=None,
    polarization=Polarization.TE,
    angles_deg=None,
    threads: int = 1,
) -> BandGrid:
    """Classify every (wavelength, k_par) cell.

    Give either ``k_par`` (rad/nm, shared by all rows) or ``angles_deg``:
    propagation angles in the low-index layer, sin(theta) = k_par / (n_low w/c).
    """
    wavelengths = np.asarray(wavelengths, dtype=float)
    if np.any(wavelengths <= 0):
        raise ValueError("wavelengths must be positive")
    pol = Polarization(polarization)
    angle_axis = None
    if (k_par is None) == (angles_deg is None):
        raise ValueError("give exactly one of k_par or angles_deg")
    if angles_deg is not None:
        angle_axis = np.asarray(angles_deg, dtype=float)
        n_a = structure.material_a.index_unchecked(wavelengths)
        n_b = structure.material_b.index_unchecked(wavelengths)
        n_low = np.fmin(n_a, n_b)
        k0 = 2 * math.pi / wavelengths
        kp = (n_low * k0)[:, None] * np.sin(np.deg2rad(angle_axis))[None, :]
        kp = np.where(np.isfinite(kp), kp, 0.0)
    else:
        axis = np.asarray(k_par, dtype=float)
        if np.any(axis < 0):
            raise ValueError("k_par values must be non-negative")
        kp = np.broadcast_to(axis, (len(wavelengths), len(axis))).copy()
    labels, K = _scan(structure, wavelengths, kp, pol, max(1, int(threads)))
    return BandGrid(wavelengths, kp, pol, labels, K, structure.period, angle_axis)


def band_scan_normalized(
    structure: BraggStructure,
    omega_norm,
    k_par_norm,
    polarization=Polarization.TE,
    threads: int = 1,
) -> BandGrid:
    """Scan on omega L / (pi c) and k_par L / pi axes (dispersion-free structures)."""
    omega_norm = np.asarray(omega_norm, dtype=float)
    if np.any(omega_norm <= 0):
        raise ValueError("normalised frequencies must be positive")
    wavelengths = 2 * structure.period / omega_norm
    k_par = np.asarray(k_par_norm, dtype=float) * math.pi / structure.period
    return band_scan(structure, wavelengths, k_par, polarization, threads=threads)


# ----------------------------------------------------------------------------
# gap edges


@dataclass(frozen=True)
class BandGap:
    """A stop band at fixed k_par, edges in free-space wavelength (nm)."""

    lambda_short: float
    lambda_long: float
    k_par: float
    period: float

    @property
    def omega_normalized(self) -> tuple[float, float]:
        """(lower, upper) edge in omega L / (pi c)."""
        return 2 * self.period / self.lambda_long, 2 * self.period / self.lambda_short


def _abs_half_trace_minus_one(structure, lam, k_par, pol):
    n_a, n_b = structure.indices(lam)
    p, m = trace_complements(n_a, n_b, structure.thickness_a, structure.thickness_b, lam, k_par, pol)
    return -float(min(p, m))


def band_gaps(
    structure: BraggStructure,
    lambda_range: tuple[float, float],
    k_par: float = 0.0,
    polarization=Polarization.TE,
    samples: int = 4096,
    xtol: float = 1e-12,
) -> list[BandGap]:
    """Stop bands in ``lambda_range`` with edges refined by Brent's method.

    Sampling is uniform in frequency.  Gaps touching the range ends are
    reported with the range end as that edge (unrefined).
    """
    lo, hi = sorted(float(v) for v in lambda_range)
    pol = Polarization(polarization)
    nu = np.linspace(1 / hi, 1 / lo, samples)
    lams = 1 / nu
    vals = np.array([_abs_half_trace_minus_one(structure, lam, k_par, pol) for lam in lams])
    inside = vals > 0
    gaps = []

    def edge(i):
        # crossing between samples i and i+1
        f = lambda lam: _abs_half_trace_minus_one(structure, lam, k_par, pol)  # noqa: E731
        return brentq(f, lams[i + 1], lams[i], xtol=xtol * lams[i], rtol=4 * np.finfo(float).eps)

    i = 0
    while i < samples:
        if not inside[i]:
            i += 1
            continue
        start = i
        while i < samples and inside[i]:
            i += 1
        long_edge = lams[0] if start == 0 else edge(start - 1)
        short_edge = lams[-1] if i == samples else edge(i - 1)
        gaps.append(BandGap(float(short_edge), float(long_edge), float(k_par), structure.period))
    return gaps


# ----------------------------------------------------------------------------
# long-wavelength limit and dispersion surfaces


def effective_indices(structure: BraggStructure, lambda_ref: float | None = None) -> tuple[float, float]:
    """(n_o, n_e) of the homogenised stack (valid for lambda_ref >> period).

    Layer indices are sampled at ``lambda_ref`` (any value for
    dispersion-free materials).
    """
    lam = 1000.0 if lambda_ref is None else float(lambda_ref)
    n_a, n_b = structure.indices(lam)
    fa = structure.thickness_a / structure.period
    fb = structure.thickness_b / structure.period
    n_o = math.sqrt(fa * n_a**2 + fb * n_b**2)
    n_e = 1.0 / math.sqrt(fa / n_a**2 + fb / n_b**2)
    return n_o, n_e


def uniaxial_kz(n_o: float, n_e: float, wavelength: float, k_par, polarization):
    """K_z of a uniaxial medium with its optic axis along z (NaN beyond cutoff)."""
    k0 = 2 * math.pi / wavelength
    k_par = np.asarray(k_par, dtype=float)
    if Polarization(polarization) is Polarization.TE:
        q = (n_o * k0) ** 2 - k_par**2
    else:
        q = n_o**2 * (k0**2 - (k_par / n_e) ** 2)
    return np.where(q >= 0, np.sqrt(np.abs(q)), np.nan)


@dataclass(frozen=True)
class DispersionSurface:
    """Cut through the iso-frequency surface: K_z against k_par (NaN where not propagating)."""

    wavelength: float
    polarization: Polarization
    k_par: np.ndarray
    K_z: np.ndarray

    @property
    def propagating(self) -> np.ndarray:
        return np.isfinite(self.K_z)

    @property
    def magnitude(self) -> np.ndarray:
        """|K| = sqrt(k_par^2 + K_z^2) along each sampled direction."""
        return np.hypot(self.k_par, self.K_z)

    @property
    def direction(self) -> np.ndarray:
        """Angle of (k_par, K_z) from the z axis, radians."""
        return np.arctan2(self.k_par, self.K_z)

    def uniaxial_deviation(self, n_o: float, n_e: float) -> float:
        """Largest relative gap between |K| and the uniaxial surface along the
        same propagation direction (optic axis z)."""
        ok = self.propagating
        if not ok.any():
            raise EmptySurface("surface has no propagating samples")
        theta = self.direction[ok]
        k0 = 2 * math.pi / self.wavelength
        if self.polarization is Polarization.TE:
            model = np.full(theta.shape, n_o * k0)
        else:
            model = k0 / np.sqrt(np.cos(theta) ** 2 / n_o**2 + np.sin(theta) ** 2 / n_e**2)
        return float(np.max(np.abs(self.magnitude[ok] / model - 1.0)))

    def ellipse_deviation(self) -> float:
        """Largest radial departure from the least-squares ellipse
        k_par^2 / A^2 + K_z^2 / B^2 = 1 through the propagating samples."""
        ok = self.propagating
        if ok.sum() < 3:
            raise EmptySurface("too few propagating samples for an ellipse fit")
        x2, z2 = self.k_par[ok] ** 2, self.K_z[ok] ** 2
        design = np.column_stack([x2, z2])
        (u, v), *_ = np.linalg.lstsq(design, np.ones_like(x2), rcond=None)
        radial = np.sqrt(np.abs(u * x2 + v * z2))
        return float(np.max(np.abs(radial - 1.0)))


def dispersion_surface(
    structure: BraggStructure,
    wavelength: float,
    polarization=Polarization.TE,
    samples: int = 256,
    k_par_max: float | None = None,
) -> DispersionSurface:
    """Sample K_z(k_par) from normal incidence out to ``k_par_max``
    (default: the larger layer light line, beyond which nothing propagates)."""
    n_a, n_b = structure.indices(wavelength)
    k0 = 2 * math.pi / wavelength
    kmax = max(n_a, n_b) * k0 if k_par_max is None else float(k_par_max)
    k_par = np.linspace(0.0, kmax, samples)
    pol = Polarization(polarization)
    p, m = trace_complements(n_a, n_b, structure.thickness_a, structure.thickness_b, wavelength, k_par, pol)
    K = bloch_k_from_complements(p, m, structure.period)
    Kz = np.where((p >= 0) & (m >= 0), K.real, np.nan)
    if not np.isfinite(Kz).any():
        raise EmptySurface(f"no propagating {pol.value} states at {wavelength} nm")
    return DispersionSurface(float(wavelength), pol, k_par, Kz)


# ----------------------------------------------------------------------------
# geometric dispersion


def _optical_structure(structure: BraggStructure, f: float):
    """Layer thicknesses with the same optical period l = n_a a + n_b b but
    optical fill fraction ``f`` (indices sampled once, dispersion-free use)."""
    n_a, n_b = structure.indices(1000.0)
    optical = n_a * structure.thickness_a + n_b * structure.thickness_b
    a = f * optical / n_a
    b = (1 - f) * optical / n_b
    return n_a, n_b, a, b, optical


def geometric_dispersion_residual(structure: BraggStructure, f: float, x: float) -> float:
    """Distance of K_z L from k_a a + k_b b (mod 2 pi, up to the sign of K)
    at normal incidence, for optical fill ``f`` and wavelength ``x * l``."""
    if not 0 <= f <= 1:
        raise ValueError("optical fill fraction must lie in [0, 1]")
    if not x > 0:
        raise ValueError("x must be positive")
    n_a, n_b, a, b, optical = _optical_structure(structure, f)
    lam = x * optical
    p, m = trace_complements(n_a, n_b, a, b, lam, 0.0, Polarization.TE)
    if p < 0 or m < 0:
        return math.inf
    phase = 2 * math.atan2(math.sqrt(p), math.sqrt(m))
    target = 2 * math.pi / x          # k_a a + k_b b = 2 pi l / lambda
    best = math.inf
    for sign in (1, -1):
        d = math.remainder(sign * phase - target, 2 * math.pi)
        best = min(best, abs(d))
    return best


def trivial_dispersion_check(structure: BraggStructure, f: float, x: float, tol: float = 1e-10) -> bool:
    """True when the stack shows no geometric dispersion at (f, x)."""
    return geometric_dispersion_residual(structure, f, x) < tol
