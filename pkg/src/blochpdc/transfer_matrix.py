"""Per-cell transfer-matrix algebra for TE/TM waves in a two-layer Bragg stack.

Within a layer the field is a forward/backward pair
``f+ exp(-i kz (z - nL)) + f- exp(+i kz (z - nL))`` (time dependence
``exp(+i w t)``).  The cell matrix maps the layer-a amplitudes of cell n onto
those of cell n-1, so a Bloch mode with ``a_n = exp(-i n K L) a_0`` is an
eigenvector with eigenvalue ``exp(i K L)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .structure import BraggStructure, ModeQuery, Polarization

# |kz * thickness| below which grazing-limit series are used
GRAZING_EPS = 1e-8
# |1 -/+ h| below which the trace sits exactly on a band edge (Im K L < 1.5e-14)
EDGE_EPS = 1e-28


class ModeClass(str, enum.Enum):
    PROPAGATING = "propagating"
    GAP = "evanescent_gap"
    TIR = "evanescent_tir"
    ABSORBING = "absorbing"


def kz_layer(n, wavelength, k_par_mag):
    """z component of a plane wave of index ``n``: real >= 0 or positive imaginary."""
    k0 = 2 * np.pi / np.asarray(wavelength, dtype=float)
    q = (np.asarray(n, dtype=float) * k0) ** 2 - np.asarray(k_par_mag, dtype=float) ** 2
    # +0j keeps the imaginary part at +0.0 so negative q maps to +i*sqrt(|q|)
    return np.sqrt(q + 0j)


def _sin_over(k, d):
    """sin(k d) / k, finite at k = 0."""
    x = k * d
    small = np.abs(x) < GRAZING_EPS
    safe = np.where(small, 1.0, x)
    return np.where(small, d * (1 - x * x / 6), np.sin(safe) / np.where(small, 1.0, k))


def _guard(kz, d):
    """Keep kz away from the exact light line where the plane-wave basis degenerates."""
    tiny = GRAZING_EPS / d if d > 0 else GRAZING_EPS
    return np.where(np.abs(kz) < tiny, tiny + 0j, kz)


def _impedance_weights(pol, n_a, n_b):
    """(w_a, w_b) such that the TE formulas become TM ones under k -> k / w."""
    if Polarization(pol) is Polarization.TE:
        return 1.0, 1.0
    return np.asarray(n_a, dtype=float) ** 2, np.asarray(n_b, dtype=float) ** 2


def half_trace(n_a, n_b, a, b, wavelength, k_par_mag, pol):
    """(A + D) / 2 in a form that stays finite through the layer light lines."""
    ka = kz_layer(n_a, wavelength, k_par_mag)
    kb = kz_layer(n_b, wavelength, k_par_mag)
    wa, wb = _impedance_weights(pol, n_a, n_b)
    sa, sb = _sin_over(ka, a), _sin_over(kb, b)
    mix = (wb / wa) * ka**2 + (wa / wb) * kb**2
    return np.cos(ka * a) * np.cos(kb * b) - 0.5 * mix * sa * sb


def trace_complements(n_a, n_b, a, b, wavelength, k_par_mag, pol):
    """(1 - h, 1 + h) for h = (A + D) / 2, free of cancellation near |h| = 1.

    Uses h = cos(ka a + kb b) - delta with delta proportional to the squared
    impedance contrast, so band edges keep full relative precision.
    """
    ka = kz_layer(n_a, wavelength, k_par_mag)
    kb = kz_layer(n_b, wavelength, k_par_mag)
    wa, wb = _impedance_weights(pol, n_a, n_b)
    sa, sb = _sin_over(ka, a), _sin_over(kb, b)
    delta = 0.5 * (wb * ka - wa * kb) ** 2 / (wa * wb) * sa * sb
    half = 0.5 * (ka * a + kb * b)
    p = np.real(2 * np.sin(half) ** 2 + delta)
    m = np.real(2 * np.cos(half) ** 2 - delta)
    return np.where(np.abs(p) < EDGE_EPS, 0.0, p), np.where(np.abs(m) < EDGE_EPS, 0.0, m)


def cell_entries(n_a, n_b, a, b, wavelength, k_par_mag, pol):
    """A, B, C, D of the cell matrix (vectorised over wavelength / k_par)."""
    ka = _guard(kz_layer(n_a, wavelength, k_par_mag), a)
    kb = kz_layer(n_b, wavelength, k_par_mag)
    sb = _sin_over(kb, b)
    if Polarization(pol) is Polarization.TE:
        plus = (kb**2 + ka**2) * sb / ka
        minus = (kb**2 - ka**2) * sb / ka
    else:
        na2 = np.asarray(n_a, dtype=float) ** 2
        nb2 = np.asarray(n_b, dtype=float) ** 2
        plus = (nb2**2 * ka**2 + na2**2 * kb**2) * sb / (na2 * nb2 * ka)
        minus = (nb2**2 * ka**2 - na2**2 * kb**2) * sb / (na2 * nb2 * ka)
    cb = np.cos(kb * b)
    ea = np.exp(1j * ka * a)
    ea_inv = np.exp(-1j * ka * a)
    A = ea * (cb + 0.5j * plus)
    B = ea_inv * (0.5j * minus)
    # analytic continuation of C = B*, D = A* (they coincide for real kz)
    C = ea * (-0.5j * minus)
    D = ea_inv * (cb - 0.5j * plus)
    return A, B, C, D


@dataclass(frozen=True)
class CellMatrix:
    A: complex
    B: complex
    C: complex
    D: complex
    query: ModeQuery
    # (1 - h, 1 + h) evaluated without cancellation, when known
    complements: tuple[float, float] | None = None

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.A, self.B], [self.C, self.D]])

    @property
    def det(self) -> complex:
        return self.A * self.D - self.B * self.C

    @property
    def half_trace(self) -> complex:
        return 0.5 * (self.A + self.D)


def cell_matrix(structure: BraggStructure, query: ModeQuery) -> CellMatrix:
    n_a, n_b = structure.indices(query.wavelength)
    args = (
        n_a, n_b, structure.thickness_a, structure.thickness_b,
        query.wavelength, query.k_par_mag, query.polarization,
    )
    A, B, C, D = cell_entries(*args)
    p, m = trace_complements(*args)
    return CellMatrix(complex(A), complex(B), complex(C), complex(D), query, (float(p), float(m)))


@dataclass(frozen=True)
class BlochWavevector:
    """K_z with Re in [0, pi/L]; evanescent solutions decay (Im K_z > 0)."""

    K_z: complex
    classification: ModeClass

    @property
    def propagating(self) -> bool:
        return self.classification is ModeClass.PROPAGATING


def bloch_k_from_half_trace(h, period):
    """Vectorised principal-branch K_z = arccos(h) / period for real h."""
    h = np.real(np.asarray(h))
    inside = np.abs(h) <= 1.0
    K = np.empty(h.shape, dtype=complex)
    K[inside] = np.arccos(h[inside])
    above = h > 1.0
    K[above] = 1j * np.arccosh(h[above])
    below = h < -1.0
    K[below] = np.pi + 1j * np.arccosh(-h[below])
    return K / period


def bloch_k_from_complements(p, m, period):
    """Principal-branch K_z from p = 1 - h and m = 1 + h (see trace_complements)."""
    p = np.asarray(p, dtype=float)
    m = np.asarray(m, dtype=float)
    K = 2 * np.arctan2(np.sqrt(np.maximum(p, 0.0)), np.sqrt(np.maximum(m, 0.0))) + 0j
    K = np.where(p < 0, 2j * np.arcsinh(np.sqrt(np.maximum(-p, 0.0) / 2)), K)
    K = np.where(m < 0, np.pi + 2j * np.arcsinh(np.sqrt(np.maximum(-m, 0.0) / 2)), K)
    return K / period


def classify_half_trace(h, k_par_mag, n_max_k0):
    """Propagating / gap / total-internal-reflection labels for a scan."""
    h = np.real(np.asarray(h))
    labels = np.where(np.abs(h) <= 1.0, ModeClass.PROPAGATING.value, ModeClass.GAP.value)
    tir = (np.abs(h) > 1.0) & (np.asarray(k_par_mag) > np.asarray(n_max_k0))
    return np.where(tir, ModeClass.TIR.value, labels).astype(object)


def bloch_wavevector(cell: CellMatrix, period: float, n_max: float | None = None) -> BlochWavevector:
    """Bloch wavevector from the cell trace.

    ``n_max`` (largest layer index) lets evanescent solutions beyond both
    layer light lines be labelled as total internal reflection.
    """
    if cell.complements is not None:
        p, m = cell.complements
        K = complex(bloch_k_from_complements(p, m, period))
        propagating = p >= 0 and m >= 0
    else:
        h = cell.half_trace.real
        K = complex(bloch_k_from_half_trace(np.array([h]), period)[0])
        propagating = abs(h) <= 1.0
    if propagating:
        cls = ModeClass.PROPAGATING
    elif n_max is not None and cell.query.k_par_mag > n_max * cell.query.omega_over_c:
        cls = ModeClass.TIR
    else:
        cls = ModeClass.GAP
    return BlochWavevector(K, cls)


@dataclass(frozen=True)
class LayerAmplitudes:
    """Cell-0 amplitudes of the forward/backward waves in layers a and b."""

    a_plus: complex
    a_minus: complex
    b_plus: complex
    b_minus: complex

    def scaled(self, factor: complex) -> LayerAmplitudes:
        return LayerAmplitudes(
            self.a_plus * factor, self.a_minus * factor,
            self.b_plus * factor, self.b_minus * factor,
        )

    @property
    def a(self) -> np.ndarray:
        return np.array([self.a_plus, self.a_minus])

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b_plus, self.b_minus])


def interface_matrix(n_a, n_b, a, wavelength, k_par_mag, pol) -> np.ndarray:
    """M with (b+, b-) = M (a+, a-) inside one cell."""
    ka = _guard(kz_layer(n_a, wavelength, k_par_mag), a)
    kb = _guard(kz_layer(n_b, wavelength, k_par_mag), a)
    m11, m12, m21, m22 = _interface_entries(n_a, n_b, a, ka, kb, pol)
    return np.array([[m11, m12], [m21, m22]])


def eigenvector(cell: CellMatrix, eigenvalue: complex, rtol: float = 1e-12) -> np.ndarray:
    """Eigenvector of the cell matrix for ``eigenvalue`` (unnormalised).

    Falls back to a pure forward wave when the matrix is a multiple of the
    identity (uniform medium at a zone boundary).
    """
    v1 = np.array([cell.B, eigenvalue - cell.A])
    v2 = np.array([eigenvalue - cell.D, cell.C])
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    scale = max(abs(cell.A), abs(cell.B), abs(cell.C), abs(cell.D), 1.0)
    if max(n1, n2) <= rtol * scale:
        return np.array([1.0 + 0j, 0.0j])
    return v1 if n1 >= n2 else v2


def layer_amplitudes(
    cell: CellMatrix,
    K: BlochWavevector,
    query: ModeQuery,
    structure: BraggStructure,
    branch: int = 1,
) -> LayerAmplitudes:
    """Eigen-amplitudes for the Bloch wave with K -> branch * K_z.

    ``branch=+1`` is the eigenvalue exp(i K_z L); ``branch=-1`` its
    counter-propagating partner exp(-i K_z L).
    """
    lam = np.exp(1j * branch * K.K_z * structure.period)
    a_vec = eigenvector(cell, lam)
    n_a, n_b = structure.indices(query.wavelength)
    M = interface_matrix(
        n_a, n_b, structure.thickness_a, query.wavelength, query.k_par_mag, query.polarization
    )
    b_vec = M @ a_vec
    return LayerAmplitudes(*a_vec, *b_vec)


def energy_flux_sign(amps: LayerAmplitudes, ka: complex, kb: complex) -> int:
    """Sign of the time-averaged z energy flux (+1 means towards +z).

    Uses whichever layer carries real kz; returns 0 if both are evanescent.
    """
    for k, (fp, fm) in ((ka, amps.a), (kb, amps.b)):
        if abs(k.imag) <= 1e-14 * max(abs(k), 1e-300) and k.real > 0:
            flux = k.real * (abs(fp) ** 2 - abs(fm) ** 2)
            return int(np.sign(flux))
    return 0


def _interface_entries(n_a, n_b, a, ka, kb, pol):
    if Polarization(pol) is Polarization.TE:
        same = (ka + kb) / (2 * kb)
        cross = (kb - ka) / (2 * kb)
    else:
        na2, nb2 = n_a**2, n_b**2
        denom = 2 * n_a * n_b * kb
        same = (nb2 * ka + na2 * kb) / denom
        cross = (nb2 * ka - na2 * kb) / denom
    return (
        same * np.exp(1j * a * (ka - kb)),
        cross * np.exp(-1j * a * (ka + kb)),
        cross * np.exp(1j * a * (ka + kb)),
        same * np.exp(-1j * a * (ka - kb)),
    )


@dataclass(frozen=True)
class BatchSolution:
    """Array-valued Bloch solutions over many in-plane wavevector magnitudes."""

    K_z: np.ndarray          # signed, rad/nm
    propagating: np.ndarray  # bool
    a_plus: np.ndarray
    a_minus: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray
    kz_a: np.ndarray
    kz_b: np.ndarray
    branch: np.ndarray       # +1 / -1 per cell


def _batch_eigenvectors(A, B, C, D, lam):
    v1p, v1m = B, lam - A
    v2p, v2m = lam - D, C
    n1 = np.abs(v1p) ** 2 + np.abs(v1m) ** 2
    n2 = np.abs(v2p) ** 2 + np.abs(v2m) ** 2
    use1 = n1 >= n2
    vp = np.where(use1, v1p, v2p)
    vm = np.where(use1, v1m, v2m)
    scale = np.maximum.reduce([np.abs(A), np.abs(B), np.abs(C), np.abs(D), np.ones_like(np.abs(A))])
    degenerate = np.sqrt(np.maximum(n1, n2)) <= 1e-12 * scale
    return np.where(degenerate, 1.0 + 0j, vp), np.where(degenerate, 0j, vm)


def solve_batch(n_a, n_b, a, b, wavelength, k_par_mag, pol, branch=1, flux=None) -> BatchSolution:
    """Vectorised Bloch solve; same conventions as :func:`layer_amplitudes`.

    If ``flux`` is given, each cell picks the branch whose energy flux along z
    has that sign (cells with no propagating layer keep ``branch``).
    """
    k_par_mag = np.asarray(k_par_mag, dtype=float)
    period = a + b
    A, B, C, D = cell_entries(n_a, n_b, a, b, wavelength, k_par_mag, pol)
    p, m = trace_complements(n_a, n_b, a, b, wavelength, k_par_mag, pol)
    p = np.broadcast_to(p, k_par_mag.shape)
    m = np.broadcast_to(m, k_par_mag.shape)
    K = bloch_k_from_complements(p, m, period)
    prop = (p >= 0) & (m >= 0)
    ka = _guard(kz_layer(n_a, wavelength, k_par_mag), a)
    kb = _guard(kz_layer(n_b, wavelength, k_par_mag), a)
    M11, M12, M21, M22 = _interface_entries(n_a, n_b, a, ka, kb, pol)

    def amps(sign):
        ap, am = _batch_eigenvectors(A, B, C, D, np.exp(1j * sign * K * period))
        return ap, am, M11 * ap + M12 * am, M21 * ap + M22 * am

    br = np.broadcast_to(np.asarray(branch), k_par_mag.shape).astype(int)
    ap, am, bp, bm = amps(br)
    if flux is not None:
        real_a = np.abs(ka.imag) <= 1e-14 * np.abs(ka)
        real_b = np.abs(kb.imag) <= 1e-14 * np.abs(kb)
        fa = ka.real * (np.abs(ap) ** 2 - np.abs(am) ** 2)
        fb = kb.real * (np.abs(bp) ** 2 - np.abs(bm) ** 2)
        f = np.sign(np.where(real_a, fa, np.where(real_b, fb, 0.0)))
        flip = (f != 0) & (f != flux)
        br = np.where(flip, -br, br)
        ap2, am2, bp2, bm2 = amps(br)
        ap, am, bp, bm = ap2, am2, bp2, bm2
    return BatchSolution(br * K, prop, ap, am, bp, bm, ka, kb, br)
