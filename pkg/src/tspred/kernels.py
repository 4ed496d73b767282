"""Hot numerical kernels: classical swing-equation RK4 integration.

The inner loop is compiled with numba when available. Set the environment
variable ``TSPRED_NO_NUMBA=1`` to force the pure-Python/numpy fallback
(same code, interpreted); both paths execute identical floating-point
operations and produce identical results.
"""

import os

import numpy as np

STATUS_OK = 0
STATUS_OVERFLOW = 1

NUMBA_ENABLED = os.environ.get("TSPRED_NO_NUMBA", "0").lower() not in (
    "1", "true", "yes")

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _jit(func):
        return _njit(cache=True)(func)
else:
    def _jit(func):
        return func


def _swing_rhs(delta, omega, H, D, E, Pm, G, B, w0, dd, dw):
    """Right-hand side of dδ/dt = Δω, (2H/ω0)·dΔω/dt = Pm − Pe − D·Δω.

    Angles in radians, speeds in rad/s. Writes into dd/dw.
    """
    ng = delta.shape[0]
    for i in range(ng):
        pe = E[i] * E[i] * G[i, i]
        for j in range(ng):
            if j != i:
                a = delta[i] - delta[j]
                pe += E[i] * E[j] * (G[i, j] * np.cos(a) + B[i, j] * np.sin(a))
        dd[i] = omega[i]
        dw[i] = (w0 / (2.0 * H[i])) * (Pm[i] - pe - D[i] * omega[i])


swing_rhs = _jit(_swing_rhs)


def _electrical_power_into(delta, E, G, B, pe):
    ng = delta.shape[0]
    for i in range(ng):
        p = E[i] * E[i] * G[i, i]
        for j in range(ng):
            if j != i:
                a = delta[i] - delta[j]
                p += E[i] * E[j] * (G[i, j] * np.cos(a) + B[i, j] * np.sin(a))
        pe[i] = p


electrical_power_into = _jit(_electrical_power_into)


def _rk4_span(delta, omega, dt, nsteps, H, D, E, Pm, G, B, w0, limit,
              out_d, out_w):
    """Advance `nsteps` fixed RK4 steps under one admittance matrix.

    Writes the state after each step into out_d/out_w rows. Returns
    STATUS_OVERFLOW as soon as any |δ| exceeds `limit` (radians).
    """
    ng = delta.shape[0]
    d = delta.copy()
    w = omega.copy()
    k1d = np.empty(ng)
    k1w = np.empty(ng)
    k2d = np.empty(ng)
    k2w = np.empty(ng)
    k3d = np.empty(ng)
    k3w = np.empty(ng)
    k4d = np.empty(ng)
    k4w = np.empty(ng)
    tmp_d = np.empty(ng)
    tmp_w = np.empty(ng)
    for s in range(nsteps):
        swing_rhs(d, w, H, D, E, Pm, G, B, w0, k1d, k1w)
        for i in range(ng):
            tmp_d[i] = d[i] + 0.5 * dt * k1d[i]
            tmp_w[i] = w[i] + 0.5 * dt * k1w[i]
        swing_rhs(tmp_d, tmp_w, H, D, E, Pm, G, B, w0, k2d, k2w)
        for i in range(ng):
            tmp_d[i] = d[i] + 0.5 * dt * k2d[i]
            tmp_w[i] = w[i] + 0.5 * dt * k2w[i]
        swing_rhs(tmp_d, tmp_w, H, D, E, Pm, G, B, w0, k3d, k3w)
        for i in range(ng):
            tmp_d[i] = d[i] + dt * k3d[i]
            tmp_w[i] = w[i] + dt * k3w[i]
        swing_rhs(tmp_d, tmp_w, H, D, E, Pm, G, B, w0, k4d, k4w)
        for i in range(ng):
            d[i] = d[i] + (dt / 6.0) * (k1d[i] + 2.0 * k2d[i]
                                        + 2.0 * k3d[i] + k4d[i])
            w[i] = w[i] + (dt / 6.0) * (k1w[i] + 2.0 * k2w[i]
                                        + 2.0 * k3w[i] + k4w[i])
        for i in range(ng):
            out_d[s, i] = d[i]
            out_w[s, i] = w[i]
            if np.abs(d[i]) > limit:
                return STATUS_OVERFLOW
    return STATUS_OK


rk4_span = _jit(_rk4_span)


def electrical_power(delta, E, G, B):
    """Per-generator electrical power at rotor angles `delta` (radians)."""
    pe = np.empty(delta.shape[0])
    electrical_power_into(np.ascontiguousarray(delta, dtype=np.float64),
                          E, G, B, pe)
    return pe
