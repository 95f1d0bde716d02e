"""Independent reference computations used to freeze expected values.

None of these call into the closed-form code paths they check: the cell
matrix is rebuilt from field-continuity matrices, and Fourier coefficients
are recovered by FFT of sampled real-space data.
"""

import numpy as np

FFT_SAMPLES = 2**14


def _kz(n, lam, k_par):
    k0 = 2 * np.pi / lam
    return np.sqrt(complex((n * k0) ** 2 - k_par**2))


def _dynamical(n, kz, k0, pol):
    # columns: forward, backward wave; rows: tangential E, tangential H (up to a common factor)
    if pol == "TE":
        return np.array([[1, 1], [kz, -kz]], dtype=complex)
    p = kz / (n * k0)
    return np.array([[p, p], [-n, n]], dtype=complex)


def _propagation(kz, x):
    return np.diag([np.exp(1j * kz * x), np.exp(-1j * kz * x)])


def transfer_oracle(n_a, n_b, a, b, lam, k_par, pol):
    """Cell matrix acting on (a+, a-) of cell n to give those of cell n+1,
    built from continuity of tangential E and H at both interfaces."""
    k0 = 2 * np.pi / lam
    ka, kb = _kz(n_a, lam, k_par), _kz(n_b, lam, k_par)
    Da, Db = _dynamical(n_a, ka, k0, pol), _dynamical(n_b, kb, k0, pol)
    to_b = np.linalg.inv(_propagation(kb, a)) @ np.linalg.inv(Db) @ Da @ _propagation(ka, a)
    return np.linalg.inv(Da) @ Db @ _propagation(kb, a + b) @ to_b


def _midpoint_samples(fn, period, samples):
    """fn sampled on a uniform grid over one period, each value averaged from
    both sides so jump points take the mean of their one-sided limits.

    The comparison with aliased Fourier sums is only sharp when the
    interfaces sit on grid nodes; callers choose layer widths accordingly.
    """
    z = np.arange(samples) * (period / samples)
    left = fn(np.nextafter(z, -np.inf))
    right = fn(np.nextafter(z, np.inf))
    return 0.5 * (left + right)


def envelope_fft(mode, indices, samples=FFT_SAMPLES):
    """FFT estimate of eps(n): aliased sums sum_m eps(n + m * samples)."""
    period = mode.structure.period
    env = _midpoint_samples(mode.envelope_at, period, samples)
    spec = np.fft.fft(env, axis=0) / samples
    # envelope is sum eps(n) exp(+i n G z), so eps(n) sits at FFT bin n
    return spec[np.asarray(indices) % samples]


def aliased(coeff_fn, indices, samples=FFT_SAMPLES, images=256):
    """sum over all m of coeff_fn(n + m * samples), summed symmetrically.

    Jump discontinuities leave a 1/images tail after truncation, so the sums
    over ``images`` and ``2 * images`` are Richardson-combined.
    """
    indices = np.asarray(indices)
    total = coeff_fn(indices)
    half = None
    for m in range(1, 2 * images + 1):
        total = total + coeff_fn(indices + m * samples) + coeff_fn(indices - m * samples)
        if m == images:
            half = total
    return 2 * total - half


def chi_fft(structure, chi_a, chi_b, indices, samples=FFT_SAMPLES):
    """FFT estimate of the chi Fourier series chi(z) = sum chi(n) exp(i n G z)."""
    period, a = structure.period, structure.thickness_a

    def chi(z):
        local = np.mod(z, period)
        # cell holds b on [0, L - a) and a on [L - a, L)
        return np.where(local >= period - a, chi_a, chi_b).astype(complex)

    vals = _midpoint_samples(chi, period, samples)
    spec = np.fft.fft(vals) / samples
    return spec[np.asarray(indices) % samples]
