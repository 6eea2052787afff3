# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled quantum-jump stepping kernel.

Same contract and algorithm as the pure-Python fallback (see
``_mcwf_py.advance``): eigenbasis no-jump propagation, bracketed
safeguarded-Newton waiting times, two uniforms per jump.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, fabs, sin, sqrt

cnp.import_array()

# fixed stack-buffer capacity; the model space is 8-dimensional
cdef enum:
    MAXDIM = 16

cdef double _BRACKET_GROWTH = 8.0
cdef double _REL_TOL = 1e-14


cdef void _propagate(int n, double complex[::1] lam, double complex[:, ::1] v,
                     double complex* a, double tau,
                     double complex* phi, double complex* dphi) noexcept:
    """phi = V (e^{-i lam tau} . a); dphi = V (-i lam e^{-i lam tau} . a)."""
    cdef int j, kk
    cdef double re, im, ex, cs, sn
    cdef double complex b[MAXDIM]
    cdef double complex db[MAXDIM]
    cdef double complex acc, dacc, eb
    for kk in range(n):
        re = lam[kk].real
        im = lam[kk].imag
        ex = exp(im * tau)
        cs = cos(re * tau)
        sn = sin(re * tau)
        eb = (ex * cs) - 1j * (ex * sn)
        b[kk] = eb * a[kk]
        db[kk] = -1j * lam[kk] * b[kk]
    for j in range(n):
        acc = 0
        dacc = 0
        for kk in range(n):
            acc = acc + v[j, kk] * b[kk]
            dacc = dacc + v[j, kk] * db[kk]
        phi[j] = acc
        dphi[j] = dacc


cdef double _norm2(int n, double complex* phi) noexcept:
    cdef int j
    cdef double out = 0.0
    for j in range(n):
        out += phi[j].real * phi[j].real + phi[j].imag * phi[j].imag
    return out


cdef double _deriv(int n, double complex* phi, double complex* dphi) noexcept:
    cdef int j
    cdef double out = 0.0
    for j in range(n):
        out += 2.0 * (phi[j].real * dphi[j].real + phi[j].imag * dphi[j].imag)
    return out


cdef double _g_of(int n, double complex[::1] lam, double complex[:, ::1] v,
                  double complex* a, double tau, double r1,
                  double complex* phi, double complex* dphi) noexcept:
    _propagate(n, lam, v, a, tau, phi, dphi)
    return _norm2(n, phi) - r1


def advance(double complex[::1] lam, double complex[:, ::1] v,
            double complex[:, ::1] vinv, double complex[:, :, ::1] ops,
            double[::1] rates, double complex[::1] psi, double t_start,
            double[::1] uniforms, double[::1] times_out, int[::1] chans_out,
            int max_events, double t_max, double t_stall, double tau0):
    """Advance one trajectory by up to ``max_events`` jumps.

    ``psi`` is updated in place to the (normalized) post-jump state.
    Returns ``(n_written, t_end, uniforms_used, status)``.
    """
    cdef int n = lam.shape[0]
    cdef int n_channels = ops.shape[0]
    cdef int n_uniforms = uniforms.shape[0]
    if n > MAXDIM or n_channels > MAXDIM:
        raise ValueError("kernel supports at most 16 dimensions/channels")
    cdef double t = t_start
    cdef int u = 0
    cdef int k = 0
    cdef int c, j, kk, it, chosen
    cdef double r1, r2, remaining, horizon, xl, xh, x, xn, g, dg, tau
    cdef double total, target, cum, nrm, wr, wi
    cdef double complex a[MAXDIM]
    cdef double complex phi[MAXDIM]
    cdef double complex dphi[MAXDIM]
    cdef double complex lphi[MAXDIM]
    cdef double weights[MAXDIM]
    cdef double complex acc

    while k < max_events:
        if u + 2 > n_uniforms:
            return k, t, u, 1
        for j in range(n):
            acc = 0
            for kk in range(n):
                acc = acc + vinv[j, kk] * psi[kk]
            a[j] = acc
        r1 = uniforms[u]
        u += 1

        remaining = t_max - t
        if remaining <= t_stall:
            if _g_of(n, lam, v, a, remaining, r1, phi, dphi) > 0.0:
                return k, t_max, u, 2
            horizon = remaining
        else:
            if _g_of(n, lam, v, a, t_stall, r1, phi, dphi) > 0.0:
                return k, t, u, 3
            horizon = t_stall

        xl = 0.0
        xh = tau0 if tau0 < horizon else horizon
        while True:
            if _g_of(n, lam, v, a, xh, r1, phi, dphi) <= 0.0:
                break
            xl = xh
            if xh >= horizon:
                break
            xh = xh * _BRACKET_GROWTH
            if xh > horizon:
                xh = horizon

        x = 0.5 * (xl + xh)
        for it in range(128):
            _propagate(n, lam, v, a, x, phi, dphi)
            g = _norm2(n, phi) - r1
            dg = _deriv(n, phi, dphi)
            if g > 0.0:
                xl = x
            else:
                xh = x
            if dg != 0.0:
                xn = x - g / dg
            else:
                xn = 0.5 * (xl + xh)
            if not (xl < xn < xh):
                xn = 0.5 * (xl + xh)
            if fabs(xn - x) < _REL_TOL * (fabs(xn) if fabs(xn) > 1.0 else 1.0):
                x = xn
                break
            x = xn

        tau = x
        _propagate(n, lam, v, a, tau, phi, dphi)
        total = 0.0
        for c in range(n_channels):
            wr = 0.0
            for j in range(n):
                acc = 0
                for kk in range(n):
                    acc = acc + ops[c, j, kk] * phi[kk]
                wr += acc.real * acc.real + acc.imag * acc.imag
            weights[c] = rates[c] * wr
            total += weights[c]
        if not total > 0.0:
            return k, t, u, 3
        r2 = uniforms[u]
        u += 1
        target = r2 * total
        cum = 0.0
        chosen = n_channels - 1
        for c in range(n_channels):
            cum += weights[c]
            if target < cum:
                chosen = c
                break
        nrm = 0.0
        for j in range(n):
            acc = 0
            for kk in range(n):
                acc = acc + ops[chosen, j, kk] * phi[kk]
            lphi[j] = acc
            nrm += acc.real * acc.real + acc.imag * acc.imag
        nrm = sqrt(nrm)
        for j in range(n):
            psi[j] = lphi[j] / nrm
        t = t + tau
        times_out[k] = t
        chans_out[k] = chosen
        k += 1
    return k, t, u, 0
