"""Compiled inner loops for the two propagation routes.

Both walk a piecewise-constant field ``b = (a_x, a_y, a_z + eta_z)`` given as
segment edges and per-segment values, and record the propagator at the edge
indices listed in ``sample_idx`` (sorted, non-decreasing).
"""

import numpy as np
from numba import njit

OK = 0
OVERFLOW = 1
NONFINITE = 2


@njit(cache=True, nogil=True)
def riccati_rhs(alpha, beta, gamma, h_plus, h_minus, h_z):
    # U = exp(alpha s+) exp(beta sz) exp(gamma s-) with i dU/dt = H U
    d_alpha = -1j * (h_plus + h_z * alpha - h_minus * alpha * alpha)
    d_beta = -1j * (h_z - 2.0 * h_minus * alpha)
    d_gamma = -1j * h_minus * np.exp(beta)
    return d_alpha, d_beta, d_gamma


@njit(cache=True, nogil=True)
def chart_into(alpha, beta, gamma, out):
    e_plus = np.exp(0.5 * beta)
    e_minus = np.exp(-0.5 * beta)
    out[0, 0] = e_plus + alpha * gamma * e_minus
    out[0, 1] = alpha * e_minus
    out[1, 0] = gamma * e_minus
    out[1, 1] = e_minus


@njit(cache=True, nogil=True)
def su2_step_into(bx, by, bz, dt, out):
    # exp(-i (b . sigma / 2) dt) = cos(|b| dt/2) I - i sin(|b| dt/2) (b_hat . sigma)
    norm = np.sqrt(bx * bx + by * by + bz * bz)
    c = np.cos(0.5 * norm * dt)
    if norm > 0.0:
        s = np.sin(0.5 * norm * dt) / norm
    else:
        s = 0.0
    out[0, 0] = complex(c, -s * bz)
    out[1, 1] = complex(c, s * bz)
    out[0, 1] = complex(-s * by, -s * bx)
    out[1, 0] = complex(s * by, -s * bx)


@njit(cache=True, nogil=True)
def _left_multiply(a, u, tmp):
    # u <- a @ u
    for i in range(2):
        for j in range(2):
            tmp[i, j] = a[i, 0] * u[0, j] + a[i, 1] * u[1, j]
    for i in range(2):
        for j in range(2):
            u[i, j] = tmp[i, j]


@njit(cache=True, nogil=True)
def exact_path(edges, field, sample_idx, out_u):
    u = np.eye(2, dtype=np.complex128)
    seg = np.empty((2, 2), dtype=np.complex128)
    tmp = np.empty((2, 2), dtype=np.complex128)
    n_samples = sample_idx.shape[0]
    si = 0
    while si < n_samples and sample_idx[si] == 0:
        out_u[si] = u
        si += 1
    for j in range(edges.shape[0] - 1):
        su2_step_into(field[j, 0], field[j, 1], field[j, 2], edges[j + 1] - edges[j], seg)
        _left_multiply(seg, u, tmp)
        while si < n_samples and sample_idx[si] == j + 1:
            out_u[si] = u
            si += 1


@njit(cache=True, nogil=True)
def disentangle_path(edges, field, sample_idx, substep, reanchor, guard,
                     out_u, out_state, out_frame):
    """RK4 on the disentangling equations with breakpoints at every edge.

    When ``|alpha|`` or ``|gamma|`` exceeds ``reanchor`` the current chart
    is folded into ``frame`` and the coordinates restart from zero; pass
    ``np.inf`` to integrate a single chart. Returns ``(status, t)`` where
    ``t`` is the time reached when a non-OK status stopped the integration.
    """
    alpha = 0j
    beta = 0j
    gamma = 0j
    frame = np.eye(2, dtype=np.complex128)
    local = np.empty((2, 2), dtype=np.complex128)
    tmp = np.empty((2, 2), dtype=np.complex128)
    n_samples = sample_idx.shape[0]
    si = 0
    while si < n_samples and sample_idx[si] == 0:
        out_u[si] = frame
        out_state[si, 0] = alpha
        out_state[si, 1] = beta
        out_state[si, 2] = gamma
        out_frame[si] = frame
        si += 1

    for j in range(edges.shape[0] - 1):
        span = edges[j + 1] - edges[j]
        h_plus = 0.5 * complex(field[j, 0], -field[j, 1])
        h_minus = 0.5 * complex(field[j, 0], field[j, 1])
        h_z = complex(field[j, 2], 0.0)
        n_steps = max(1, int(np.ceil(span / substep)))
        h = span / n_steps
        for step in range(n_steps):
            a1, b1, g1 = riccati_rhs(alpha, beta, gamma, h_plus, h_minus, h_z)
            a2, b2, g2 = riccati_rhs(alpha + 0.5 * h * a1, beta + 0.5 * h * b1,
                                     gamma + 0.5 * h * g1, h_plus, h_minus, h_z)
            a3, b3, g3 = riccati_rhs(alpha + 0.5 * h * a2, beta + 0.5 * h * b2,
                                     gamma + 0.5 * h * g2, h_plus, h_minus, h_z)
            a4, b4, g4 = riccati_rhs(alpha + h * a3, beta + h * b3,
                                     gamma + h * g3, h_plus, h_minus, h_z)
            alpha += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            beta += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            gamma += h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
            t_now = edges[j] + (step + 1) * h
            if not (np.isfinite(alpha.real) and np.isfinite(alpha.imag)
                    and np.isfinite(beta.real) and np.isfinite(beta.imag)
                    and np.isfinite(gamma.real) and np.isfinite(gamma.imag)):
                return NONFINITE, t_now
            if abs(beta.real) > guard:
                return OVERFLOW, t_now
            if abs(alpha) > reanchor or abs(gamma) > reanchor:
                chart_into(alpha, beta, gamma, local)
                _left_multiply(local, frame, tmp)
                alpha = 0j
                beta = 0j
                gamma = 0j
        while si < n_samples and sample_idx[si] == j + 1:
            chart_into(alpha, beta, gamma, local)
            out_state[si, 0] = alpha
            out_state[si, 1] = beta
            out_state[si, 2] = gamma
            out_frame[si] = frame
            for r in range(2):
                for c in range(2):
                    out_u[si, r, c] = local[r, 0] * frame[0, c] + local[r, 1] * frame[1, c]
            si += 1
    return OK, edges[-1]
