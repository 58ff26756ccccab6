"""Pure numpy versions of the mean-field kernels.

Same signatures and results as the compiled ``_kernels`` module; used when the
extension is not built or ``KERRSSH_PURE_PYTHON=1`` is set.

The chain is stored as one interleaved vector, so every site couples to its two
flat neighbours with the same strength ``g``.  Per-site data:

``diag``   complex, ``-i(Delta - i*loss)``
``kerr``   real, ``2U`` on Kerr sites and zero elsewhere
``drive``  real, the Rabi amplitude on driven sites and zero elsewhere
"""
import numpy as np


def rhs(z, diag, g, kerr, drive):
    z = np.asarray(z, dtype=complex)
    out = diag * z + drive
    out -= 1j * kerr * (z.real * z.real + z.imag * z.imag) * z
    hop = np.zeros_like(z)
    hop[1:] += z[:-1]
    hop[:-1] += z[1:]
    out -= 1j * g * hop
    return out


def rk4_evolve(z0, diag, g, kerr, drive, dt, max_steps, tol, check_every=64):
    """Fixed-step RK4 until ``max|dz/dt| < tol`` or ``max_steps`` is reached.

    Returns ``(z, steps, residual, converged)``.
    """
    z = np.array(z0, dtype=complex)
    diag = np.asarray(diag, dtype=complex)
    kerr = np.asarray(kerr, dtype=float)
    drive = np.asarray(drive, dtype=float)
    half = 0.5 * dt
    steps = 0
    residual = np.abs(rhs(z, diag, g, kerr, drive)).max()
    if residual < tol:
        return z, 0, float(residual), True
    while steps < max_steps:
        n = min(check_every, max_steps - steps)
        for _ in range(n):
            k1 = rhs(z, diag, g, kerr, drive)
            k2 = rhs(z + half * k1, diag, g, kerr, drive)
            k3 = rhs(z + half * k2, diag, g, kerr, drive)
            k4 = rhs(z + dt * k3, diag, g, kerr, drive)
            z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        steps += n
        residual = np.abs(rhs(z, diag, g, kerr, drive)).max()
        if not np.isfinite(residual):
            return z, steps, float(residual), False
        if residual < tol:
            return z, steps, float(residual), True
    return z, steps, float(residual), False
