# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mean-field kernels; see ``_kernels_py`` for the reference version."""
import numpy as np

cdef inline void _rhs(const double complex[::1] z, const double complex[::1] diag,
                      double g, const double[::1] kerr, const double[::1] drive,
                      double complex[::1] out) noexcept nogil:
    cdef Py_ssize_t n = z.shape[0], k
    cdef double complex zk, hop
    cdef double n2
    cdef double complex mi = -1j
    for k in range(n):
        zk = z[k]
        hop = 0
        if k > 0:
            hop = hop + z[k - 1]
        if k < n - 1:
            hop = hop + z[k + 1]
        n2 = zk.real * zk.real + zk.imag * zk.imag
        out[k] = diag[k] * zk + mi * (g * hop + kerr[k] * n2 * zk) + drive[k]


cdef inline double _maxabs(const double complex[::1] v) noexcept nogil:
    cdef Py_ssize_t k
    cdef double m = 0.0, a
    for k in range(v.shape[0]):
        a = v[k].real * v[k].real + v[k].imag * v[k].imag
        if a > m or a != a:
            m = a
    return m ** 0.5


def rhs(z, diag, g, kerr, drive):
    cdef double complex[::1] zz = np.ascontiguousarray(z, dtype=complex)
    out = np.empty(zz.shape[0], dtype=complex)
    _rhs(zz, np.ascontiguousarray(diag, dtype=complex), float(g),
         np.ascontiguousarray(kerr, dtype=float), np.ascontiguousarray(drive, dtype=float),
         out)
    return out


def rk4_evolve(z0, diag, g, kerr, drive, double dt, long max_steps, double tol,
               long check_every=64):
    cdef double complex[::1] z = np.array(z0, dtype=complex)
    cdef double complex[::1] d = np.ascontiguousarray(diag, dtype=complex)
    cdef double[::1] ke = np.ascontiguousarray(kerr, dtype=float)
    cdef double[::1] dr = np.ascontiguousarray(drive, dtype=float)
    cdef double gg = g
    cdef Py_ssize_t n = z.shape[0], k
    cdef double complex[::1] k1 = np.empty(n, dtype=complex)
    cdef double complex[::1] k2 = np.empty(n, dtype=complex)
    cdef double complex[::1] k3 = np.empty(n, dtype=complex)
    cdef double complex[::1] k4 = np.empty(n, dtype=complex)
    cdef double complex[::1] tmp = np.empty(n, dtype=complex)
    cdef double half = 0.5 * dt, sixth = dt / 6.0, residual
    cdef long steps = 0, i, chunk
    cdef bint converged = False

    with nogil:
        _rhs(z, d, gg, ke, dr, k1)
        residual = _maxabs(k1)
        if residual < tol:
            converged = True
        while not converged and steps < max_steps:
            chunk = check_every
            if max_steps - steps < chunk:
                chunk = max_steps - steps
            for i in range(chunk):
                _rhs(z, d, gg, ke, dr, k1)
                for k in range(n):
                    tmp[k] = z[k] + half * k1[k]
                _rhs(tmp, d, gg, ke, dr, k2)
                for k in range(n):
                    tmp[k] = z[k] + half * k2[k]
                _rhs(tmp, d, gg, ke, dr, k3)
                for k in range(n):
                    tmp[k] = z[k] + dt * k3[k]
                _rhs(tmp, d, gg, ke, dr, k4)
                for k in range(n):
                    z[k] = z[k] + sixth * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
            steps += chunk
            _rhs(z, d, gg, ke, dr, k1)
            residual = _maxabs(k1)
            if residual != residual:
                break
            if residual < tol:
                converged = True
    return np.asarray(z), int(steps), float(residual), bool(converged)
