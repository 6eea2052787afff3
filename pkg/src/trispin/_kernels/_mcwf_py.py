"""Pure-Python quantum-jump stepping kernel.

Same contract and algorithm as the compiled extension: the no-jump state is
propagated through the eigendecomposition of the effective Hamiltonian, the
waiting time solves ``||e^{-i H_eff tau} psi||^2 = r`` by bracketed
safeguarded Newton iteration, and the jump channel is selected by a second
uniform draw weighted by ``rate_c ||L_c phi||^2``.  Each jump consumes
exactly two uniforms.

Status codes returned by :func:`advance`:

- 0: wrote ``max_events`` events;
- 1: uniform buffer exhausted (resume with a fresh buffer);
- 2: no further jump before ``t_max`` (trajectory ends at ``t_max``);
- 3: no jump within ``t_stall`` of the last event (dark-trapped).
"""

import numpy as np

_NEWTON_MAX_ITER = 128
_BRACKET_GROWTH = 8.0
_REL_TOL = 1e-14


def _survival(v, b):
    """Squared norm of ``v @ b``."""
    phi = v @ b
    return float(np.vdot(phi, phi).real)


def advance(lam, v, vinv, ops, rates, psi, t_start, uniforms,
            times_out, chans_out, max_events, t_max, t_stall, tau0):
    """Advance one trajectory by up to ``max_events`` jumps.

    ``psi`` is updated in place to the (normalized) post-jump state.
    Returns ``(n_written, t_end, uniforms_used, status)``.
    """
    n_uniforms = uniforms.shape[0]
    n_channels = ops.shape[0]
    t = float(t_start)
    u = 0
    k = 0
    minus_i_lam = -1j * lam
    while k < max_events:
        if u + 2 > n_uniforms:
            return k, t, u, 1
        a = vinv @ psi
        r1 = uniforms[u]
        u += 1

        def g_of(tau):
            return _survival(v, np.exp(minus_i_lam * tau) * a) - r1

        remaining = t_max - t
        if remaining <= t_stall:
            if g_of(remaining) > 0.0:
                return k, t_max, u, 2
            horizon = remaining
        else:
            if g_of(t_stall) > 0.0:
                return k, t, u, 3
            horizon = t_stall

        xl = 0.0
        xh = tau0 if tau0 < horizon else horizon
        while True:
            if g_of(xh) <= 0.0:
                break
            xl = xh
            if xh >= horizon:
                break
            xh = min(xh * _BRACKET_GROWTH, horizon)

        x = 0.5 * (xl + xh)
        for _ in range(_NEWTON_MAX_ITER):
            b = np.exp(minus_i_lam * x) * a
            phi = v @ b
            dphi = v @ (minus_i_lam * b)
            g = float(np.vdot(phi, phi).real) - r1
            dg = 2.0 * float(np.vdot(phi, dphi).real)
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
            if abs(xn - x) < _REL_TOL * max(abs(xn), 1.0):
                x = xn
                break
            x = xn

        tau = x
        phi = v @ (np.exp(minus_i_lam * tau) * a)
        weights = np.empty(n_channels)
        for c in range(n_channels):
            lphi = ops[c] @ phi
            weights[c] = rates[c] * float(np.vdot(lphi, lphi).real)
        total = float(weights.sum())
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
        new = ops[chosen] @ phi
        nrm = float(np.sqrt(np.vdot(new, new).real))
        psi[:] = new / nrm
        t = t + tau
        times_out[k] = t
        chans_out[k] = chosen
        k += 1
    return k, t, u, 0
