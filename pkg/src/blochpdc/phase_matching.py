"""Down-conversion in a Bragg stack: quasi-momentum matching and overlap integrals.

Fields are written ``E(z) = sum_n eps(n) exp(-i (K - n G) z)`` and the
nonlinearity ``chi(z) = sum_n chi(n) exp(i n G z)``, so the z-integral of
``chi conj(E_p) E_1 E_2`` over the crystal [0, N L] picks out

    dK = K_p - K_1 - K_2 + (n_chi + n_1 + n_2 - n_p) G.

Transverse momentum is conserved exactly: the idler in-plane wavevector is
always ``k_pump - k_signal``.  Dimensionful prefactors (eps0, volumes) are 1.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .bloch_modes import (
    BlochMode,
    ConvergenceWarning,
    FourierWindow,
    bloch_mode,
    co_propagating_mode,
    mode_batch,
)
from .materials import Chi2Tensor
from .structure import BraggStructure, ModeQuery, Polarization
from .transfer_matrix import solve_batch

PROCESS_POLARIZATIONS = {
    "I": (Polarization.TE, Polarization.TE),
    "II": (Polarization.TE, Polarization.TM),
    "III": (Polarization.TM, Polarization.TM),
}

# relative change of |Phi| allowed between successive window doublings
PHI_RTOL = 1e-6
# largest half-width the Fourier-space overlap will try
PHI_MAX_WINDOW = 2**17


class NoSolution(ValueError):
    pass


class NoIntersection(ValueError):
    pass


@dataclass(frozen=True)
class ProcessSpec:
    """Pump mode, signal wavelength and polarization type of a down-conversion.

    ``g_combo`` is (n_chi, n_p, n_1, n_2); only its total
    ``n_chi + n_1 + n_2 - n_p`` enters the longitudinal mismatch.
    """

    pump: ModeQuery = field(default_factory=lambda: ModeQuery(750.0, polarization=Polarization.TM))
    signal_wavelength: float | None = None
    process_type: str = "II"
    g_combo: tuple[int, int, int, int] = (0, 1, 0, 0)
    pump_branch: int = 1

    def __post_init__(self):
        if self.process_type not in PROCESS_POLARIZATIONS:
            raise ValueError(f"process type must be I, II or III, got {self.process_type!r}")
        if self.signal_wavelength is None:
            object.__setattr__(self, "signal_wavelength", 2 * self.pump.wavelength)
        if not self.signal_wavelength > self.pump.wavelength:
            raise ValueError("signal wavelength must exceed the pump wavelength")
        object.__setattr__(self, "g_combo", tuple(int(g) for g in self.g_combo))
        if len(self.g_combo) != 4:
            raise ValueError("g_combo must hold (n_chi, n_p, n_1, n_2)")
        if self.pump_branch not in (1, -1):
            raise ValueError("pump_branch must be +1 or -1")

    @property
    def idler_wavelength(self) -> float:
        return 1.0 / (1.0 / self.pump.wavelength - 1.0 / self.signal_wavelength)

    @property
    def polarizations(self) -> tuple[Polarization, Polarization]:
        return PROCESS_POLARIZATIONS[self.process_type]

    @property
    def g_total(self) -> int:
        n_chi, n_p, n_1, n_2 = self.g_combo
        return n_chi + n_1 + n_2 - n_p

    def with_type(self, process_type: str) -> ProcessSpec:
        return replace(self, process_type=process_type)

    def idler_k_par(self, k_signal) -> np.ndarray:
        k_signal = np.asarray(k_signal, dtype=float)
        return np.asarray(self.pump.k_par) - k_signal


# ----------------------------------------------------------------------------
# chi2 Fourier series


def layer_weights(structure: BraggStructure, n):
    """Fourier weights of the layer indicator functions, (w_a(n), w_b(n)).

    Layer a occupies [-a, 0] and layer b [-L, -a] of the unit cell.
    """
    n = np.asarray(n)
    a, b, period = structure.thickness_a, structure.thickness_b, structure.period
    nz = np.where(n == 0, 1, n)
    w_a = np.exp(1j * math.pi * n * a / period) * np.sin(math.pi * n * a / period) / (math.pi * nz)
    w_b = (
        np.exp(1j * math.pi * n * (2 * a + b) / period)
        * np.sin(math.pi * n * b / period)
        / (math.pi * nz)
    )
    w_a = np.where(n == 0, a / period, w_a)
    w_b = np.where(n == 0, b / period, w_b)
    return w_a, w_b


def _chi_scalar(material) -> float:
    return 0.0 if material.chi2.is_zero else float(material.chi2.magnitude)


def chi2_fourier(structure: BraggStructure, n):
    """Scalar chi2 Fourier coefficient(s) in pm/V (weighted average at n = 0)."""
    w_a, w_b = layer_weights(structure, n)
    out = _chi_scalar(structure.material_a) * w_a + _chi_scalar(structure.material_b) * w_b
    return complex(out) if np.ndim(out) == 0 else out


def chi2_tensor_fourier(structure: BraggStructure, n) -> np.ndarray:
    """Tensor coefficients chi_ijk(n); shape (len(n), 3, 3, 3)."""
    w_a, w_b = layer_weights(structure, np.atleast_1d(n))
    t_a = structure.material_a.chi2.components
    t_b = structure.material_b.chi2.components
    return w_a[:, None, None, None] * t_a + w_b[:, None, None, None] * t_b


def reference_chi2(structure: BraggStructure) -> Chi2Tensor:
    """The larger of the two layer tensors (used to normalise contractions)."""
    ca, cb = structure.material_a.chi2, structure.material_b.chi2
    return ca if _chi_scalar(structure.material_a) >= _chi_scalar(structure.material_b) else cb


# ----------------------------------------------------------------------------
# longitudinal mismatch


def sinc_factor(delta_kz, length):
    """sin(x)/x with x = delta_kz * length, equal to 1 at x = 0."""
    x = np.asarray(delta_kz, dtype=float) * length
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)
    return float(out) if np.ndim(out) == 0 else out


def delta_kz(K_p, K_1, K_2, g_total: int, structure: BraggStructure):
    return K_p - K_1 - K_2 + g_total * structure.reciprocal


def longitudinal_mismatch(
    pump: BlochMode, signal: BlochMode, idler: BlochMode, g_combo, structure: BraggStructure
) -> tuple[float, float]:
    """(dK_z, sinc factor) for a mode triple and (n_chi, n_p, n_1, n_2)."""
    for m in (pump, signal, idler):
        if not m.K.propagating:
            raise ValueError("longitudinal mismatch needs three propagating modes")
    n_chi, n_p, n_1, n_2 = g_combo
    dk = delta_kz(pump.K_z.real, signal.K_z.real, idler.K_z.real, n_chi + n_1 + n_2 - n_p, structure)
    return float(dk), sinc_factor(dk, structure.length)


# ----------------------------------------------------------------------------
# candidate modes


def process_modes(spec: ProcessSpec, structure: BraggStructure, k_signal, window=None):
    """(pump, signal, idler) Bloch modes with the down-converted pair
    carrying energy in the same z direction as the pump."""
    window = window or FourierWindow()
    pump = bloch_mode(structure, spec.pump, branch=spec.pump_branch, window=window)
    flux = pump.flux_sign or 1
    pol_1, pol_2 = spec.polarizations
    k_signal = tuple(float(k) for k in k_signal)
    k_idler = tuple(spec.idler_k_par(k_signal))
    signal = co_propagating_mode(
        structure, ModeQuery(spec.signal_wavelength, k_signal, pol_1), flux, window=window
    )
    idler = co_propagating_mode(
        structure, ModeQuery(spec.idler_wavelength, k_idler, pol_2), flux, window=window
    )
    return pump, signal, idler


@dataclass(frozen=True)
class PhaseMatchCandidate:
    pump: BlochMode
    signal: BlochMode
    idler: BlochMode
    g_combo: tuple[int, int, int, int]
    delta_kz: float
    sinc_factor: float
    fourier_product: complex
    chi2_factor: complex
    amplitude: complex
    chi2_reference: float

    def __post_init__(self):
        kp = np.asarray(self.pump.query.k_par)
        k1 = np.asarray(self.signal.query.k_par)
        k2 = np.asarray(self.idler.query.k_par)
        if not np.array_equal(k2, kp - k1):
            raise ValueError("transverse momentum is not conserved")

    @property
    def chi2_normalized(self) -> float:
        """|contraction| of the unit Fourier directions with the reference tensor / |chi|."""
        if self.chi2_reference == 0:
            return 0.0
        return abs(self.chi2_factor) / self.chi2_reference

    @property
    def fourier_amplitudes(self) -> dict[str, float]:
        """Magnitudes entering ``fourier_product``: chi, pump, signal, idler."""
        n_chi, n_p, n_1, n_2 = self.g_combo
        s = self.pump.structure
        chi = abs(chi2_fourier(s, n_chi)) / self.chi2_reference if self.chi2_reference else 0.0
        return {
            "chi": chi,
            "pump": self.pump.amplitude(n_p),
            "signal": self.signal.amplitude(n_1),
            "idler": self.idler.amplitude(n_2),
        }


def make_candidate(
    spec: ProcessSpec,
    structure: BraggStructure,
    k_signal,
    g_combo=None,
    window: FourierWindow | None = None,
) -> PhaseMatchCandidate:
    """Evaluate the single-term quantities for one G combination."""
    g_combo = tuple(spec.g_combo if g_combo is None else g_combo)
    pump, signal, idler = process_modes(spec, structure, k_signal, window)
    dk, sinc = longitudinal_mismatch(pump, signal, idler, g_combo, structure)
    n_chi, n_p, n_1, n_2 = g_combo
    ref = reference_chi2(structure)
    chi_ref = float(ref.magnitude) if not ref.is_zero else 0.0
    e_p = pump.fourier(np.array([n_p]))[0]
    e_1 = signal.fourier(np.array([n_1]))[0]
    e_2 = idler.fourier(np.array([n_2]))[0]
    amp_p, amp_1, amp_2 = (float(np.linalg.norm(e)) for e in (e_p, e_1, e_2))
    chi_n = chi2_fourier(structure, n_chi)
    fourier_product = (abs(chi_n) / chi_ref if chi_ref else 0.0) * amp_p * amp_1 * amp_2
    if min(amp_p, amp_1, amp_2) > 0 and chi_ref:
        dirs = [e / np.linalg.norm(e) for e in (e_p, e_1, e_2)]
        chi_factor = complex(np.einsum("ijk,i,j,k->", ref.components, dirs[0].conj(), dirs[1], dirs[2]))
    else:
        chi_factor = 0j
    tensor = chi2_tensor_fourier(structure, np.array([n_chi]))[0]
    amplitude = sinc * complex(np.einsum("ijk,i,j,k->", tensor, e_p.conj(), e_1, e_2))
    return PhaseMatchCandidate(
        pump, signal, idler, g_combo, dk, sinc, fourier_product, chi_factor, amplitude, chi_ref
    )


# ----------------------------------------------------------------------------
# overlap integral, Fourier form


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def _phi_fourier_window(pump, signal, idler, structure, half_width: int, sinc_mode: str):
    """Sum over all (n_chi, n_p, n_1, n_2) in [-W, W]^4 via one FFT convolution.

    The coefficient of total index m = n_chi + n_1 + n_2 - n_p is the
    4-fold convolution of chi, eps_1, eps_2 and the reversed conj(eps_p).
    """
    idx = np.arange(-half_width, half_width + 1)
    ep = pump.fourier(idx)
    e1 = signal.fourier(idx)
    e2 = idler.fourier(idx)
    w_a, w_b = layer_weights(structure, idx)
    size = _next_pow2(4 * idx.size)
    fp = np.fft.fft(ep[::-1].conj(), size, axis=0)
    f1 = np.fft.fft(e1, size, axis=0)
    f2 = np.fft.fft(e2, size, axis=0)
    spectrum = np.zeros(size, dtype=complex)
    for w, mat in ((w_a, structure.material_a), (w_b, structure.material_b)):
        if mat.chi2.is_zero:
            continue
        fw = np.fft.fft(w, size)
        spectrum += fw * np.einsum("ijk,si,sj,sk->s", mat.chi2.components, fp, f1, f2)
    conv = np.fft.ifft(spectrum)
    # element j of the linear convolution has total index m = j - 4W
    m = np.arange(size) - 4 * half_width
    valid = np.abs(m) <= 4 * half_width
    dk = delta_kz(pump.K_z.real, signal.K_z.real, idler.K_z.real, m[valid], structure)
    length = structure.length
    if sinc_mode == "exact":
        weight = np.exp(0.5j * dk * length) * sinc_factor(0.5 * dk, length)
    else:
        weight = sinc_factor(dk, length)
    return complex(np.sum(weight * conv[valid]))


def phi_fourier(
    pump: BlochMode,
    signal: BlochMode,
    idler: BlochMode,
    structure: BraggStructure,
    window: int | None = None,
    sinc_mode: str = "printed",
    rtol: float = PHI_RTOL,
    max_window: int = PHI_MAX_WINDOW,
    extrapolate: bool = True,
) -> complex:
    """Overlap integral as a sum over reciprocal-lattice combinations.

    ``sinc_mode="printed"`` weights each total index by sin(x)/x with
    x = dK L; ``"exact"`` uses the finite-crystal integral
    exp(i x/2) sin(x/2)/(x/2).  Both agree at dK = 0 (all other totals have
    dK L in 2 pi N Z and vanish either way).

    Field and chi2 jumps sit on the same interfaces, so the box-truncated
    sum converges like 1/W.  With ``extrapolate`` the 1/W term is removed
    from successive half-widths (2 S(2W) - S(W)); the half-width (starting
    at ``window``, default 2048) is doubled until that estimate changes by
    less than ``rtol`` relative, with a ConvergenceWarning if ``max_window``
    is reached first.
    """
    if sinc_mode not in ("printed", "exact"):
        raise ValueError("sinc_mode must be 'printed' or 'exact'")
    if structure.material_a.chi2.is_zero and structure.material_b.chi2.is_zero:
        return 0j
    w = int(window) if window is not None else 2048
    if w < 1:
        raise ValueError("window half-width must be positive")

    def level(width):
        return _phi_fourier_window(pump, signal, idler, structure, width, sinc_mode)

    sums = [level(w), level(2 * w)]
    w *= 2
    estimate = (lambda: 2 * sums[-1] - sums[-2]) if extrapolate else (lambda: sums[-1])
    prev = estimate()
    # an absolute floor so exactly-forbidden processes (Phi = 0) terminate
    floor = 1e-13 * max(
        abs(_chi_scalar(structure.material_a)), abs(_chi_scalar(structure.material_b))
    )
    while True:
        sums.append(level(2 * w))
        w *= 2
        cur = estimate()
        change = abs(cur - prev)
        if change <= rtol * abs(cur) or change <= floor:
            return cur
        if 2 * w > max_window:
            warnings.warn(
                f"overlap sum changed by {change / max(abs(cur), 1e-300):.2e} (relative) "
                f"at half-width {w}",
                ConvergenceWarning,
                stacklevel=2,
            )
            return cur
        prev = cur


# ----------------------------------------------------------------------------
# overlap integral, real space


def _gauss_cell_nodes(structure: BraggStructure, points: int):
    """Gauss-Legendre nodes/weights covering one cell [-L, 0], per layer."""
    x, wts = np.polynomial.legendre.leggauss(points)
    a, b = structure.thickness_a, structure.thickness_b
    nodes, weights, layer = [], [], []
    for lo, hi, tag in ((-a - b, -a, "b"), (-a, 0.0, "a")):
        if hi - lo <= 0:
            continue
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * wts)
        layer.extend([tag] * points)
    return np.concatenate(nodes), np.concatenate(weights), np.array(layer)


def _phi_spatial_once(pump, signal, idler, structure, points):
    z0, w0, layer = _gauss_cell_nodes(structure, points)
    t_a = structure.material_a.chi2.components
    t_b = structure.material_b.chi2.components
    total = 0j
    for cell in range(1, structure.periods + 1):
        # sample strictly inside each layer so the a/b assignment is unambiguous
        z = z0 + cell * structure.period
        ep = pump.field_at(z).conj()
        e1 = signal.field_at(z)
        e2 = idler.field_at(z)
        in_a = layer == "a"
        part_a = np.einsum("ijk,si,sj,sk->s", t_a, ep[in_a], e1[in_a], e2[in_a])
        part_b = np.einsum("ijk,si,sj,sk->s", t_b, ep[~in_a], e1[~in_a], e2[~in_a])
        total += np.dot(w0[in_a], part_a) + np.dot(w0[~in_a], part_b)
    return total / structure.length


def phi_spatial(
    pump: BlochMode,
    signal: BlochMode,
    idler: BlochMode,
    structure: BraggStructure,
    quadrature_points: int = 24,
) -> complex:
    """(1/L_z) * integral over [0, N L] of chi_ijk conj(E_p,i) E_1,j E_2,k.

    Composite Gauss-Legendre per layer and per cell; warns if doubling the
    points changes the result by more than 1e-7 relative.
    """
    if structure.material_a.chi2.is_zero and structure.material_b.chi2.is_zero:
        return 0j
    coarse = _phi_spatial_once(pump, signal, idler, structure, quadrature_points)
    fine = _phi_spatial_once(pump, signal, idler, structure, 2 * quadrature_points)
    floor = 1e-13 * max(
        abs(_chi_scalar(structure.material_a)), abs(_chi_scalar(structure.material_b))
    )
    if abs(fine - coarse) > max(1e-7 * abs(fine), floor):
        warnings.warn(
            f"quadrature changed by {abs(fine - coarse) / max(abs(fine), 1e-300):.2e} "
            "when doubling the points",
            ConvergenceWarning,
            stacklevel=2,
        )
    return fine


def dominant_terms(
    pump: BlochMode,
    signal: BlochMode,
    idler: BlochMode,
    structure: BraggStructure,
    g_total: int,
    half_width: int = 4,
    cumulative: float = 1 - 1e-9,
) -> list[tuple[tuple[int, int, int, int], complex]]:
    """Terms of the overlap sum with fixed total index, largest first.

    Enumerates (n_chi, n_p, n_1, n_2) with |n_p|, |n_1|, |n_2| <= half_width;
    the list is cut where the running sum of |term|^2 reaches ``cumulative``
    of the total.  Ties are broken by the index tuple so the order is stable.
    """
    idx = np.arange(-half_width, half_width + 1)
    ep = pump.fourier(idx).conj()
    e1 = signal.fourier(idx)
    e2 = idler.fourier(idx)
    np_, n1, n2 = np.meshgrid(idx, idx, idx, indexing="ij")
    n_chi = g_total + np_ - n1 - n2
    tensors = chi2_tensor_fourier(structure, n_chi.ravel())
    ip, i1, i2 = (g.ravel() + half_width for g in (np_, n1, n2))
    values = np.einsum("sijk,si,sj,sk->s", tensors, ep[ip], e1[i1], e2[i2])
    keys = list(zip(n_chi.ravel().tolist(), np_.ravel().tolist(), n1.ravel().tolist(), n2.ravel().tolist()))
    order = sorted(range(len(keys)), key=lambda t: (-abs(values[t]), keys[t]))
    weights = np.abs(values[order]) ** 2
    total = weights.sum()
    out = []
    running = 0.0
    for t, wgt in zip(order, weights):
        out.append((keys[t], complex(values[t])))
        running += wgt
        if total == 0 or running >= cumulative * total:
            break
    return out


# ----------------------------------------------------------------------------
# vectorised evaluation over many signal directions

MAP_CHUNK = 2048


@dataclass(frozen=True)
class PumpState:
    K_z: float
    flux: int
    amplitude: float        # |eps_p(n_p)|
    direction: np.ndarray   # unit eps_p(n_p)


def pump_state(spec: ProcessSpec, structure: BraggStructure, window=None) -> PumpState:
    pump = bloch_mode(structure, spec.pump, branch=spec.pump_branch, window=window or FourierWindow())
    if not pump.K.propagating:
        raise ValueError(f"pump at {spec.pump.wavelength} nm is not a propagating Bloch mode")
    e = pump.fourier(np.array([spec.g_combo[1]]))[0]
    amp = float(np.linalg.norm(e))
    direction = e / amp if amp > 0 else e
    return PumpState(float(pump.K_z.real), pump.flux_sign or 1, amp, direction)


def _signed_kz(structure, wavelength, k_par, pol, flux):
    k_par = np.atleast_2d(np.asarray(k_par, dtype=float))
    n_a, n_b = structure.indices(wavelength)
    sol = solve_batch(
        n_a, n_b, structure.thickness_a, structure.thickness_b, wavelength,
        np.hypot(k_par[:, 0], k_par[:, 1]), pol, flux=flux,
    )
    return np.where(sol.propagating, sol.K_z.real, np.nan)


def mismatch_batch(spec: ProcessSpec, structure: BraggStructure, k_signal, pump: PumpState | None = None):
    """dK_z for signal in-plane wavevectors of shape (c, 2); NaN where a photon is evanescent."""
    pump = pump or pump_state(spec, structure)
    k_signal = np.atleast_2d(np.asarray(k_signal, dtype=float))
    pol_1, pol_2 = spec.polarizations
    K1 = _signed_kz(structure, spec.signal_wavelength, k_signal, pol_1, pump.flux)
    K2 = _signed_kz(structure, spec.idler_wavelength, spec.idler_k_par(k_signal), pol_2, pump.flux)
    return delta_kz(pump.K_z, K1, K2, spec.g_total, structure)


def amplitude_batch(
    spec: ProcessSpec,
    structure: BraggStructure,
    k_signal,
    pump: PumpState | None = None,
    chi2_weighting: bool = True,
    window: FourierWindow | None = None,
) -> np.ndarray:
    """sinc * fourier_product * normalised contraction for the configured
    G combination; zero where either photon is evanescent."""
    window = window or FourierWindow()
    pump = pump or pump_state(spec, structure, window)
    k_signal = np.atleast_2d(np.asarray(k_signal, dtype=float))
    n_chi, _, n_1, n_2 = spec.g_combo
    pol_1, pol_2 = spec.polarizations
    sig = mode_batch(structure, spec.signal_wavelength, k_signal, pol_1, flux=pump.flux, window=window)
    idl = mode_batch(
        structure, spec.idler_wavelength, spec.idler_k_par(k_signal), pol_2, flux=pump.flux, window=window
    )
    ok = sig.propagating & idl.propagating
    dk = delta_kz(pump.K_z, sig.K_z.real, idl.K_z.real, spec.g_total, structure)
    sinc = np.where(ok, sinc_factor(np.where(ok, dk, 0.0), structure.length), 0.0)
    e1 = sig.fourier(np.array([n_1]))[:, 0, :]
    e2 = idl.fourier(np.array([n_2]))[:, 0, :]
    a1 = np.linalg.norm(e1, axis=1)
    a2 = np.linalg.norm(e2, axis=1)
    ref = reference_chi2(structure)
    chi_ref = _chi_scalar(structure.material_a if ref is structure.material_a.chi2 else structure.material_b)
    chi_n = abs(chi2_fourier(structure, n_chi)) / chi_ref if chi_ref else 0.0
    product = chi_n * pump.amplitude * a1 * a2
    if chi2_weighting and chi_ref:
        safe1 = np.where(a1 > 0, a1, 1.0)[:, None]
        safe2 = np.where(a2 > 0, a2, 1.0)[:, None]
        contraction = np.einsum(
            "ijk,i,sj,sk->s", ref.components / chi_ref, pump.direction.conj(), e1 / safe1, e2 / safe2
        )
    else:
        contraction = np.ones(len(k_signal))
    return np.where(ok, sinc * product * contraction, 0.0)


def _chunked(fn, points: np.ndarray, threads: int):
    """Apply ``fn`` to fixed-size chunks (independent of ``threads``) in order."""
    chunks = [points[i:i + MAP_CHUNK] for i in range(0, len(points), MAP_CHUNK)]
    if threads <= 1 or len(chunks) <= 1:
        parts = [fn(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    return np.concatenate(parts) if parts else np.zeros(0)


# ----------------------------------------------------------------------------
# rings


@dataclass(frozen=True)
class RingPoint:
    """Signal wavevector on a phase-matching ring, found along one ray."""

    process_type: str
    center: tuple[float, float]
    azimuth: float
    radius: float           # distance from ``center`` (rad/nm)
    k_signal: tuple[float, float]
    delta_kz: float


def light_line(wavelength: float) -> float:
    """Free-space in-plane cutoff 2 pi / lambda (rad/nm)."""
    return 2 * math.pi / wavelength


def _ray_limit(center, u, radius):
    """Largest t >= 0 with |center + t u| <= radius (0 if the centre is outside)."""
    c = np.asarray(center, dtype=float)
    b = float(np.dot(c, u))
    disc = b * b - (float(np.dot(c, c)) - radius * radius)
    if disc < 0:
        return 0.0
    return max(0.0, -b + math.sqrt(disc))


def solve_ring(
    spec: ProcessSpec,
    structure: BraggStructure,
    azimuth: float = math.pi / 2,
    center=None,
    samples: int = 256,
    pump: PumpState | None = None,
    tol: float = 1e-12,
) -> RingPoint:
    """Signal k_par where dK_z changes sign along a ray from ``center``.

    The ray starts at ``center`` (default: half the pump k_par, the centre
    of the degenerate pair geometry) and ends where either photon reaches
    its free-space light line.  The first sign change is refined by Brent's
    method until |dK_z| < ``tol``.
    """
    pump = pump or pump_state(spec, structure)
    c = np.asarray(spec.pump.k_par, dtype=float) / 2 if center is None else np.asarray(center, float)
    u = np.array([math.cos(azimuth), math.sin(azimuth)])
    kp = np.asarray(spec.pump.k_par, dtype=float)
    t_max = min(
        _ray_limit(c, u, light_line(spec.signal_wavelength)),
        _ray_limit(kp - c, -u, light_line(spec.idler_wavelength)),
    )
    if not t_max > 0:
        raise NoSolution("ray starts outside the light circle")

    def dk(t):
        return float(mismatch_batch(spec, structure, (c + t * u)[None, :], pump)[0])

    ts = np.linspace(0.0, t_max, samples + 1)
    vals = mismatch_batch(spec, structure, c[None, :] + ts[:, None] * u[None, :], pump)
    for i in range(samples):
        v0, v1 = vals[i], vals[i + 1]
        if not (np.isfinite(v0) and np.isfinite(v1)):
            continue
        if v0 == 0.0:
            t = ts[i]
            break
        if v0 * v1 < 0:
            t = brentq(dk, ts[i], ts[i + 1], xtol=1e-18, rtol=1e-15, maxiter=200)
            break
    else:
        raise NoSolution(
            f"Type {spec.process_type}: no phase-matching crossing along azimuth {azimuth:.4f} rad"
        )
    residual = dk(t)
    if abs(residual) >= tol:
        raise NoSolution(f"root refinement stalled at |dK_z| = {abs(residual):.2e}")
    k = c + t * u
    return RingPoint(spec.process_type, (float(c[0]), float(c[1])), float(azimuth), float(t),
                     (float(k[0]), float(k[1])), residual)


def ring_curve(spec: ProcessSpec, structure: BraggStructure, n_azimuth: int = 180, **kw) -> np.ndarray:
    """Signal ring sampled at ``n_azimuth`` equally spaced rays; NaN rows where no crossing."""
    pump = kw.pop("pump", None) or pump_state(spec, structure)
    out = np.full((n_azimuth, 2), np.nan)
    for i, phi in enumerate(np.arange(n_azimuth) * (2 * math.pi / n_azimuth)):
        try:
            out[i] = solve_ring(spec, structure, phi, pump=pump, **kw).k_signal
        except NoSolution:
            pass
    return out


def ring_profile(
    spec: ProcessSpec,
    structure: BraggStructure,
    azimuth: float = math.pi / 2,
    center=None,
    samples: int = 4001,
    chi2_weighting: bool = False,
):
    """(t, |amplitude|^2) along a ray from ``center`` out to the light line."""
    pump = pump_state(spec, structure)
    c = np.asarray(spec.pump.k_par, dtype=float) / 2 if center is None else np.asarray(center, float)
    u = np.array([math.cos(azimuth), math.sin(azimuth)])
    t_max = _ray_limit(c, u, light_line(spec.signal_wavelength))
    t = np.linspace(0.0, t_max, samples)
    pts = c[None, :] + t[:, None] * u[None, :]
    amp = amplitude_batch(spec, structure, pts, pump, chi2_weighting)
    return t, np.abs(amp) ** 2


def ring_fwhm(spec: ProcessSpec, structure: BraggStructure, azimuth: float = math.pi / 2, **kw) -> float:
    """Full width at half maximum of the ring's radial intensity profile (rad/nm).

    Half-maximum crossings are located by linear interpolation on the
    sampled profile around its peak.
    """
    t, y = ring_profile(spec, structure, azimuth, **kw)
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    if not half > 0:
        raise NoSolution("no emission along this ray")
    lo = i
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1
    if y[lo] > half or y[hi] > half:
        raise NoSolution("ring profile does not fall to half maximum inside the light circle")

    def cross(j0, j1):
        return t[j0] + (half - y[j0]) * (t[j1] - t[j0]) / (y[j1] - y[j0])

    return float(cross(hi, hi - 1) - cross(lo, lo + 1))


# ----------------------------------------------------------------------------
# emission maps


@dataclass(frozen=True)
class EmissionMap:
    """Photon emission density on a Cartesian (k_x, k_y) grid.

    ``te`` / ``tm`` count photons of each polarization leaving at that
    in-plane wavevector, whichever member of the pair they are.
    """

    process_type: str
    kx: np.ndarray
    ky: np.ndarray
    te: np.ndarray          # shape (len(ky), len(kx))
    tm: np.ndarray
    light_line: float
    chi2_weighting: bool

    @property
    def intensity(self) -> np.ndarray:
        return self.te + self.tm

    @property
    def resolution(self) -> float:
        return float(self.kx[1] - self.kx[0]) if len(self.kx) > 1 else 0.0

    @property
    def peak(self) -> float:
        return float(self.intensity.max())


def symmetric_axis(half_extent: float, resolution: int) -> np.ndarray:
    """``resolution`` cell centres on [-half_extent, half_extent], exactly odd about 0."""
    step = 2 * half_extent / (resolution - 1)
    return (np.arange(resolution) - (resolution - 1) / 2) * step


def emission_map(
    spec: ProcessSpec,
    structure: BraggStructure,
    resolution: int = 200,
    extent: float | None = None,
    chi2_weighting: bool = True,
    threads: int = 1,
    window: FourierWindow | None = None,
) -> EmissionMap:
    """|sinc * fourier_product * contraction|^2 over a square k_par grid.

    Cells where either photon of the pair is evanescent in the crystal, or
    lies outside its free-space light circle (cannot leave the crystal),
    score zero.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    window = window or FourierWindow()
    k0 = light_line(spec.signal_wavelength)
    axis = symmetric_axis(extent or k0, resolution)
    kx, ky = np.meshgrid(axis, axis)
    grid = np.column_stack([kx.ravel(), ky.ravel()])
    pump = pump_state(spec, structure, window)
    kp = np.asarray(spec.pump.k_par)
    k0_i = light_line(spec.idler_wavelength)

    def role(points):
        # photon 1 at ``points``; its twin at kp - points
        amp = amplitude_batch(spec, structure, points, pump, chi2_weighting, window)
        escapes = (np.hypot(points[:, 0], points[:, 1]) <= k0) & (
            np.hypot(kp[0] - points[:, 0], kp[1] - points[:, 1]) <= k0_i
        )
        return np.where(escapes, np.abs(amp) ** 2, 0.0)

    first = _chunked(role, grid, threads).reshape(kx.shape)
    # the same pair seen from its second photon: photon 1 sits at kp - k
    second = _chunked(role, kp[None, :] - grid, threads).reshape(kx.shape)
    pol_1, pol_2 = spec.polarizations
    te = np.zeros_like(first)
    tm = np.zeros_like(first)
    for pol, part in ((pol_1, first), (pol_2, second)):
        if pol is Polarization.TE:
            te = te + part
        else:
            tm = tm + part
    return EmissionMap(spec.process_type, axis, axis.copy(), te, tm, k0, chi2_weighting)


# ----------------------------------------------------------------------------
# Type II intersections

TWO_PHOTON_STATE = "(|H>_A |V>_B + exp(i*Upsilon) |V>_A |H>_B) / sqrt(2)"


@dataclass(frozen=True)
class IntersectionPair:
    """One pair event: TE (H) photon at ``te`` and its TM (V) twin at ``tm``."""

    te: tuple[float, float]
    tm: tuple[float, float]


@dataclass(frozen=True)
class Intersections:
    pairs: tuple[IntersectionPair, ...]
    coincident: bool
    state: str = TWO_PHOTON_STATE

    @property
    def points(self) -> list[tuple[float, float]]:
        return sorted({p.te for p in self.pairs})


def find_intersections(
    spec: ProcessSpec,
    structure: BraggStructure,
    n_azimuth: int = 720,
    coincidence_tol: float = 1e-9,
) -> Intersections:
    """Points where the TE ring meets the TM ring (the pump-translated twin
    constraint) for a Type II process.

    Along the TE ring, g(phi) = dK_z at signal wavevector kp - P(phi); its
    zeros are TE ring points that are also TM emission directions.  If g
    vanishes everywhere the rings coincide (normal-incidence pump).
    """
    if spec.process_type != "II":
        raise ValueError("intersections are defined for Type II processes")
    pump = pump_state(spec, structure)
    kp = np.asarray(spec.pump.k_par, dtype=float)
    reciprocal = structure.reciprocal

    def on_ring(phi):
        return np.asarray(solve_ring(spec, structure, phi, pump=pump).k_signal)

    def g(phi):
        return float(mismatch_batch(spec, structure, (kp - on_ring(phi))[None, :], pump)[0])

    phis = np.arange(n_azimuth) * (2 * math.pi / n_azimuth)
    vals = np.full(n_azimuth, np.nan)
    for i, phi in enumerate(phis):
        try:
            vals[i] = g(phi)
        except NoSolution:
            pass
    finite = np.isfinite(vals)
    if not finite.any():
        raise NoIntersection("the TE ring does not exist for this configuration")
    if finite.all() and np.max(np.abs(vals)) < coincidence_tol * reciprocal:
        return Intersections((), True)
    roots = []
    for i in range(n_azimuth):
        j = (i + 1) % n_azimuth
        v0, v1 = vals[i], vals[j]
        if not (np.isfinite(v0) and np.isfinite(v1)):
            continue
        hi = phis[j] if j else 2 * math.pi
        if v0 == 0.0:
            roots.append(phis[i])
        elif v0 * v1 < 0:
            roots.append(brentq(g, phis[i], hi, xtol=1e-15, rtol=1e-15))
    if not roots:
        raise NoIntersection("TE and TM rings are disjoint")
    pairs = []
    for phi in roots:
        x = on_ring(phi)
        twin = kp - x
        pairs.append(IntersectionPair((float(x[0]), float(x[1])), (float(twin[0]), float(twin[1]))))
    pairs.sort(key=lambda p: (p.te[0], p.te[1]))
    return Intersections(tuple(pairs), False)


# ----------------------------------------------------------------------------
# efficiency


def efficiency_ratio(candidate: PhaseMatchCandidate, reference_chi2: float) -> float:
    """(normalised contraction * |fourier product| * chi_material / reference)^2.

    The reference crystal is taken as perfectly phase matched with no
    tensor reduction.
    """
    if reference_chi2 == 0:
        raise ValueError("reference chi2 must be non-zero")
    value = candidate.chi2_normalized * abs(candidate.fourier_product) * candidate.chi2_reference
    return float((value / reference_chi2) ** 2)
