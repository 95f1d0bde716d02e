"""Bloch modes: real-space fields and closed-form Fourier coefficients.

A mode is ``E(z) = exp(-i K z) sum_n eps(n) exp(i n G z)`` with ``G = 2 pi / L``.
The coefficients follow from integrating each layer's two plane waves
against ``exp(-i n G z)`` over the unit cell, which gives one sinc term per
(layer, direction).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .structure import BraggStructure, ModeQuery, Polarization
from .transfer_matrix import (
    BlochWavevector,
    LayerAmplitudes,
    bloch_wavevector,
    cell_matrix,
    energy_flux_sign,
    kz_layer,
    layer_amplitudes,
    solve_batch,
)

DEFAULT_WINDOW = 32


class ConvergenceWarning(UserWarning):
    pass


class DegenerateMode(ValueError):
    pass


@dataclass(frozen=True)
class FourierWindow:
    n_min: int = -DEFAULT_WINDOW
    n_max: int = DEFAULT_WINDOW

    def __post_init__(self):
        if not self.n_min <= 0 <= self.n_max:
            raise ValueError(f"window must contain 0, got [{self.n_min}, {self.n_max}]")

    @classmethod
    def symmetric(cls, half_width: int) -> FourierWindow:
        return cls(-int(half_width), int(half_width))

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def doubled(self) -> FourierWindow:
        return FourierWindow(2 * self.n_min, 2 * self.n_max)


def _sinc(x):
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 - x * x / 6, np.sin(safe) / safe)


def frame_matrices(angle) -> np.ndarray:
    """Solver-to-lab rotation(s) for frame angle(s); shape (..., 3, 3)."""
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    zero, one = np.zeros_like(c), np.ones_like(c)
    rows = [[s, c, zero], [-c, s, zero], [zero, zero, one]]
    return np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def component_vectors(pol, n, kz, k_par_mag, k0):
    """Solver-frame unit vectors of the forward and backward waves in one layer."""
    kz = np.asarray(kz, dtype=complex)
    shape = kz.shape + (3,)
    if Polarization(pol) is Polarization.TE:
        fwd = np.zeros(shape, dtype=complex)
        fwd[..., 0] = 1.0
        return fwd, fwd.copy()
    kp = np.broadcast_to(np.asarray(k_par_mag, dtype=float), kz.shape)
    fwd = np.zeros(shape, dtype=complex)
    bwd = np.zeros(shape, dtype=complex)
    fwd[..., 1] = bwd[..., 1] = kz / (n * k0)
    fwd[..., 2] = -kp / (n * k0)
    bwd[..., 2] = kp / (n * k0)
    return fwd, bwd


def fourier_sum(q, K, kz_a, kz_b, amps, vectors, a, b):
    """Closed-form unit-cell Fourier integrals.

    ``K``, ``kz_*`` and the four amplitudes have shape (c,), ``vectors`` the
    four (c, 3) directions, ``q`` shape (m,).  Returns (c, m, 3).
    """
    period = a + b
    q = np.asarray(q, dtype=float)[None, :]
    K = np.asarray(K)[:, None]
    terms = (
        (amps[0], K - kz_a[:, None], a, a / 2, vectors[0]),
        (amps[1], K + kz_a[:, None], a, a / 2, vectors[1]),
        (amps[2], K - kz_b[:, None], b, a + b / 2, vectors[2]),
        (amps[3], K + kz_b[:, None], b, a + b / 2, vectors[3]),
    )
    total = np.zeros(K.shape[:1] + q.shape[1:] + (3,), dtype=complex)
    for coeff, shift, width, centre, e in terms:
        if width == 0:
            continue
        u = shift - q
        scalar = coeff[:, None] * width * _sinc(u * width / 2) * np.exp(-1j * u * centre)
        total += scalar[..., None] * e[:, None, :]
    return total / period


@dataclass(frozen=True)
class BlochMode:
    """One Bloch wave of a Bragg structure.

    ``branch`` selects K = +K_z (eigenvalue exp(i K_z L)) or the
    counter-propagating K = -K_z.  Amplitudes carry the normalisation.
    """

    structure: BraggStructure
    query: ModeQuery
    K: BlochWavevector
    amplitudes: LayerAmplitudes
    n_a: float
    n_b: float
    branch: int = 1
    window: FourierWindow = FourierWindow()
    norm_convention: str = "unnormalized"

    @property
    def K_z(self) -> complex:
        """Signed Bloch wavevector along z (rad/nm)."""
        return self.branch * self.K.K_z

    @property
    def kz_a(self) -> complex:
        return complex(kz_layer(self.n_a, self.query.wavelength, self.query.k_par_mag))

    @property
    def kz_b(self) -> complex:
        return complex(kz_layer(self.n_b, self.query.wavelength, self.query.k_par_mag))

    @property
    def flux_sign(self) -> int:
        return energy_flux_sign(self.amplitudes, self.kz_a, self.kz_b)

    def polarization_vectors(self) -> dict[str, np.ndarray]:
        """Lab-frame unit vectors of the four plane-wave components.

        TE: along the solver x axis.  TM: in the solver y-z plane,
        perpendicular to each component's wavevector, with positive y part.
        Complex for evanescent layers.
        """
        frame = self.query.frame
        k0 = self.query.omega_over_c
        kp = self.query.k_par_mag
        pol = self.query.polarization
        out = {}
        for layer, n, kz in (("a", self.n_a, self.kz_a), ("b", self.n_b, self.kz_b)):
            fwd, bwd = component_vectors(pol, n, np.array(kz), kp, k0)
            out[layer + "+"] = frame @ fwd
            out[layer + "-"] = frame @ bwd
        return out

    def fourier(self, n) -> np.ndarray:
        """Coefficients eps(n * 2 pi / L) for integer array ``n``; shape (len(n), 3)."""
        s = self.structure
        q = np.atleast_1d(np.asarray(n, dtype=float)) * s.reciprocal
        amp = self.amplitudes
        vec = self.polarization_vectors()
        out = fourier_sum(
            q,
            np.array([self.K_z]),
            np.array([self.kz_a]),
            np.array([self.kz_b]),
            [np.array([c]) for c in (amp.a_plus, amp.a_minus, amp.b_plus, amp.b_minus)],
            [vec[k][None, :] for k in ("a+", "a-", "b+", "b-")],
            s.thickness_a,
            s.thickness_b,
        )
        return out[0]

    def field_at(self, z) -> np.ndarray:
        """Complex field vector at positions ``z`` (nm) on the x = y = 0 line."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        s = self.structure
        period, a = s.period, s.thickness_a
        cell = np.ceil(z / period)
        local = z - cell * period
        # floating point can leave local a hair above 0 or at -period
        cell = np.where(local > 0, cell + 1, cell)
        local = z - cell * period
        in_a = local >= -a
        vec = self.polarization_vectors()
        amp = self.amplitudes
        ka, kb = self.kz_a, self.kz_b
        fa_p = amp.a_plus * np.exp(-1j * ka * local)
        fa_m = amp.a_minus * np.exp(1j * ka * local)
        fb_p = amp.b_plus * np.exp(-1j * kb * local)
        fb_m = amp.b_minus * np.exp(1j * kb * local)
        fa = fa_p[:, None] * vec["a+"] + fa_m[:, None] * vec["a-"]
        fb = fb_p[:, None] * vec["b+"] + fb_m[:, None] * vec["b-"]
        envelope = np.where(in_a[:, None], fa, fb)
        return envelope * np.exp(-1j * self.K_z * cell * period)[:, None]

    def envelope_at(self, z) -> np.ndarray:
        """Lattice-periodic part exp(+i K z) E(z)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return self.field_at(z) * np.exp(1j * self.K_z * z)[:, None]

    def scaled(self, factor: complex) -> BlochMode:
        return replace(self, amplitudes=self.amplitudes.scaled(factor))

    def coefficients(self, window: FourierWindow | None = None) -> dict[int, np.ndarray]:
        return fourier_coefficients(self, window)

    def amplitude(self, n: int) -> float:
        """Euclidean norm of eps(n)."""
        return float(np.linalg.norm(self.fourier(np.array([n]))[0]))

    def direction(self, n: int) -> np.ndarray:
        """Unit vector along eps(n)."""
        v = self.fourier(np.array([n]))[0]
        norm = np.linalg.norm(v)
        if norm == 0:
            raise DegenerateMode(f"Fourier component {n} vanishes")
        return v / norm


def fourier_coefficients(mode: BlochMode, window: FourierWindow | None = None) -> dict[int, np.ndarray]:
    """Map n -> eps(n * 2 pi / L) over ``window`` (default: the mode's own).

    Warns with ConvergenceWarning when the window holds less than 99.9 % of
    the norm retained by a window twice as wide.
    """
    if not mode.K.propagating:
        raise ValueError("Fourier analysis is only defined for propagating modes")
    window = window or mode.window
    idx = window.indices
    coeffs = mode.fourier(idx)
    retained = float(np.sum(np.abs(coeffs) ** 2))
    wide = float(np.sum(np.abs(mode.fourier(window.doubled().indices)) ** 2))
    if wide > 0 and retained < 0.999 * wide:
        warnings.warn(
            f"Fourier window [{window.n_min}, {window.n_max}] keeps only "
            f"{retained / wide:.5f} of the doubled-window norm",
            ConvergenceWarning,
            stacklevel=2,
        )
    return {int(n): c for n, c in zip(idx, coeffs)}


def normalize(mode: BlochMode) -> BlochMode:
    """Scale the mode so sum |eps(n)|^2 = 1 over its window (idempotent)."""
    coeffs = mode.fourier(mode.window.indices)
    norm = math.sqrt(float(np.sum(np.abs(coeffs) ** 2)))
    if not norm > 0 or not math.isfinite(norm):
        raise DegenerateMode("cannot normalise a mode with zero field")
    out = mode.scaled(1.0 / norm)
    return replace(out, norm_convention="unit_fourier_norm")


def bloch_mode(
    structure: BraggStructure,
    query: ModeQuery,
    branch: int = 1,
    window: FourierWindow | None = None,
    normalized: bool = True,
) -> BlochMode:
    """Solve the transfer-matrix problem and assemble a Bloch mode.

    Evanescent modes are returned unnormalised.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    n_a, n_b = structure.indices(query.wavelength)
    cell = cell_matrix(structure, query)
    K = bloch_wavevector(cell, structure.period, max(n_a, n_b))
    amps = layer_amplitudes(cell, K, query, structure, branch=branch)
    mode = BlochMode(
        structure, query, K, amps, n_a, n_b, branch, window or FourierWindow()
    )
    if normalized and K.propagating:
        mode = normalize(mode)
    return mode


def co_propagating_mode(structure: BraggStructure, query: ModeQuery, flux: int, **kwargs) -> BlochMode:
    """Mode whose energy flux along z has sign ``flux``."""
    mode = bloch_mode(structure, query, branch=1, **kwargs)
    if mode.flux_sign == flux or mode.flux_sign == 0:
        return mode
    return bloch_mode(structure, query, branch=-1, **kwargs)


@dataclass(frozen=True)
class ModeBatch:
    """Many Bloch modes at one wavelength and polarization (vectorised).

    ``k_par`` has shape (c, 2).  Each mode is normalised to unit Fourier norm
    over ``window``; evanescent entries are left with zero amplitudes.
    """

    structure: BraggStructure
    wavelength: float
    polarization: Polarization
    k_par: np.ndarray
    K_z: np.ndarray
    propagating: np.ndarray
    amplitudes: tuple
    kz_a: np.ndarray
    kz_b: np.ndarray
    vectors: tuple
    window: FourierWindow

    def fourier(self, n) -> np.ndarray:
        """Coefficients eps(n * 2 pi / L); shape (c, len(n), 3)."""
        s = self.structure
        q = np.atleast_1d(np.asarray(n, dtype=float)) * s.reciprocal
        return fourier_sum(
            q, self.K_z, self.kz_a, self.kz_b, self.amplitudes, self.vectors,
            s.thickness_a, s.thickness_b,
        )


def mode_batch(
    structure: BraggStructure,
    wavelength: float,
    k_par,
    polarization,
    flux: int | None = None,
    branch: int = 1,
    window: FourierWindow | None = None,
    azimuth: float = math.pi / 2,
) -> ModeBatch:
    window = window or FourierWindow()
    pol = Polarization(polarization)
    k_par = np.atleast_2d(np.asarray(k_par, dtype=float))
    kmag = np.hypot(k_par[:, 0], k_par[:, 1])
    n_a, n_b = structure.indices(wavelength)
    a, b = structure.thickness_a, structure.thickness_b
    sol = solve_batch(n_a, n_b, a, b, wavelength, kmag, pol, branch=branch, flux=flux)
    k0 = 2 * math.pi / wavelength
    kz_a = kz_layer(n_a, wavelength, kmag)
    kz_b = kz_layer(n_b, wavelength, kmag)
    angle = np.where(kmag == 0.0, azimuth, np.arctan2(k_par[:, 1], k_par[:, 0]))
    frame = frame_matrices(angle)
    vecs = []
    for n, kz in ((n_a, kz_a), (n_b, kz_b)):
        for v in component_vectors(pol, n, kz, kmag, k0):
            vecs.append(np.einsum("cij,cj->ci", frame, v))
    amps = [sol.a_plus, sol.a_minus, sol.b_plus, sol.b_minus]
    raw = fourier_sum(
        window.indices * structure.reciprocal, sol.K_z, kz_a, kz_b, amps, vecs, a, b
    )
    norm = np.sqrt(np.sum(np.abs(raw) ** 2, axis=(1, 2)))
    ok = sol.propagating & (norm > 0) & np.isfinite(norm)
    scale = np.where(ok, 1.0 / np.where(ok, norm, 1.0), 0.0)
    amps = tuple(c * scale for c in amps)
    return ModeBatch(
        structure, wavelength, pol, k_par, sol.K_z, sol.propagating, amps,
        kz_a, kz_b, tuple(vecs), window,
    )
