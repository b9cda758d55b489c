"""Compiled right-hand side and fixed-step RK4 loop.

The circuit is flattened into plain arrays (see ``CompiledCircuit`` in
``simulate``) so the inner loop runs under numba without Python objects.
"""

import math

import numpy as np
from numba import njit

# gate kinds
RATES = 0
SIGMOID = 1
# rate-function forms
EXP = 0
LOGISTIC = 1
LINEXP = 2

_EXP_CLAMP = 300.0


@njit(cache=True)
def _exp(x):
    if x > _EXP_CLAMP:
        x = _EXP_CLAMP
    elif x < -_EXP_CLAMP:
        x = -_EXP_CLAMP
    return math.exp(x)


@njit(cache=True)
def _rate(form, scale, v_half, slope, v):
    x = (v - v_half) / slope
    if form == EXP:
        return scale * _exp(x)
    if form == LOGISTIC:
        return scale / (1.0 + _exp(x))
    if abs(x) < 1e-7:
        return scale * slope * (1.0 + 0.5 * x)
    return scale * slope * x / (1.0 - _exp(-x))


@njit(cache=True)
def _gate_deriv(kind, par, x, v):
    if kind == RATES:
        a = _rate(int(par[0]), par[1], par[2], par[3], v)
        b = _rate(int(par[4]), par[5], par[6], par[7], v)
        return a * (1.0 - x) - b * x
    x_inf = 1.0 / (1.0 + _exp(-(v - par[0]) / par[1]))
    tau = par[2] + par[3] / (_exp((v - par[4]) / par[5]) + _exp(-(v - par[4]) / par[6]))
    return (x_inf - x) / tau


@njit(cache=True)
def rhs(y, i_inj, dy, n_cap, n_gl, n_el, n_vidx,
        g_kind, g_par, g_idx, g_neuron,
        c_neuron, c_gmax, c_erev, c_p, c_q, c_act, c_inact,
        s_pre, s_post, s_g, s_e, s_vh, s_slope, s_tr, s_td, s_idx):
    n_neurons = n_cap.shape[0]
    # membrane currents, accumulated as (sum of inward current) per neuron
    for k in range(n_neurons):
        v = y[n_vidx[k]]
        dy[n_vidx[k]] = i_inj[k] + n_gl[k] * (n_el[k] - v)
    for c in range(c_gmax.shape[0]):
        k = c_neuron[c]
        v = y[n_vidx[k]]
        g = c_gmax[c]
        if c_act[c] >= 0:
            g *= y[g_idx[c_act[c]]] ** c_p[c]
        if c_inact[c] >= 0:
            g *= y[g_idx[c_inact[c]]] ** c_q[c]
        dy[n_vidx[k]] += g * (c_erev[c] - v)
    for s in range(s_g.shape[0]):
        v_post = y[n_vidx[s_post[s]]]
        dy[n_vidx[s_post[s]]] += s_g[s] * y[s_idx[s]] * (s_e[s] - v_post)
    for k in range(n_neurons):
        dy[n_vidx[k]] /= n_cap[k]
    for gi in range(g_kind.shape[0]):
        j = g_idx[gi]
        v = y[n_vidx[g_neuron[gi]]]
        dy[j] = _gate_deriv(g_kind[gi], g_par[gi], y[j], v)
    for s in range(s_g.shape[0]):
        j = s_idx[s]
        v_pre = y[n_vidx[s_pre[s]]]
        target = 1.0 / (1.0 + _exp(-(v_pre - s_vh[s]) / s_slope[s]))
        a = y[j]
        if target >= a:
            dy[j] = (target - a) / s_tr[s]
        else:
            dy[j] = (target - a) / s_td[s]


@njit(cache=True)
def integrate(y0, dt, i_inj, n_cap, n_gl, n_el, n_vidx,
              g_kind, g_par, g_idx, g_neuron,
              c_neuron, c_gmax, c_erev, c_p, c_q, c_act, c_inact,
              s_pre, s_post, s_g, s_e, s_vh, s_slope, s_tr, s_td, s_idx):
    """Classical RK4 with the injected current held constant over each step.

    Returns the trajectory (n_steps + 1, dim) and the index of the first
    step whose result was non-finite (-1 when the run completed).
    """
    n_steps = i_inj.shape[0]
    dim = y0.shape[0]
    out = np.empty((n_steps + 1, dim))
    out[0] = y0
    y = y0.copy()
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    for n in range(n_steps):
        cur = i_inj[n]
        rhs(y, cur, k1, n_cap, n_gl, n_el, n_vidx, g_kind, g_par, g_idx, g_neuron,
            c_neuron, c_gmax, c_erev, c_p, c_q, c_act, c_inact,
            s_pre, s_post, s_g, s_e, s_vh, s_slope, s_tr, s_td, s_idx)
        for j in range(dim):
            tmp[j] = y[j] + 0.5 * dt * k1[j]
        rhs(tmp, cur, k2, n_cap, n_gl, n_el, n_vidx, g_kind, g_par, g_idx, g_neuron,
            c_neuron, c_gmax, c_erev, c_p, c_q, c_act, c_inact,
            s_pre, s_post, s_g, s_e, s_vh, s_slope, s_tr, s_td, s_idx)
        for j in range(dim):
            tmp[j] = y[j] + 0.5 * dt * k2[j]
        rhs(tmp, cur, k3, n_cap, n_gl, n_el, n_vidx, g_kind, g_par, g_idx, g_neuron,
            c_neuron, c_gmax, c_erev, c_p, c_q, c_act, c_inact,
            s_pre, s_post, s_g, s_e, s_vh, s_slope, s_tr, s_td, s_idx)
        for j in range(dim):
            tmp[j] = y[j] + dt * k3[j]
        rhs(tmp, cur, k4, n_cap, n_gl, n_el, n_vidx, g_kind, g_par, g_idx, g_neuron,
            c_neuron, c_gmax, c_erev, c_p, c_q, c_act, c_inact,
            s_pre, s_post, s_g, s_e, s_vh, s_slope, s_tr, s_td, s_idx)
        ok = True
        for j in range(dim):
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not math.isfinite(y[j]):
                ok = False
        out[n + 1] = y
        if not ok:
            return out[: n + 2], n
    return out, -1


@njit(cache=True)
def lif_integrate(x0, alpha, theta, dt, u):
    """RK4 on dx/dt = -alpha*x + u with reset to 0 once x exceeds theta."""
    n_steps = u.shape[0]
    out = np.empty(n_steps + 1)
    resets = np.zeros(n_steps, dtype=np.bool_)
    out[0] = x0
    x = x0
    for n in range(n_steps):
        un = u[n]
        k1 = -alpha * x + un
        k2 = -alpha * (x + 0.5 * dt * k1) + un
        k3 = -alpha * (x + 0.5 * dt * k2) + un
        k4 = -alpha * (x + dt * k3) + un
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if x > theta:
            x = 0.0
            resets[n] = True
        out[n + 1] = x
    return out, resets
