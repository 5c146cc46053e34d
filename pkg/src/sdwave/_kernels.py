"""Compiled inner loops. Arrays are (N, B): one column per sample."""
import numpy as np
from numba import njit

_XI = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_W = np.array([5.0, 8.0, 5.0]) / 18.0


@njit(cache=True, nogil=True)
def ldl_factor(diag, off):
    n = diag.size
    d = np.empty(n)
    l = np.empty(max(n - 1, 0))
    d[0] = diag[0]
    if not d[0] > 0.0:
        return d, l, 0
    for i in range(n - 1):
        l[i] = off[i] / d[i]
        d[i + 1] = diag[i + 1] - l[i] * off[i]
        if not d[i + 1] > 0.0:
            return d, l, i + 1
    return d, l, -1


@njit(cache=True, nogil=True)
def ldl_solve(d, l, b):
    # overwrites b (n, m) with the solution
    n, m = b.shape
    for i in range(1, n):
        for j in range(m):
            b[i, j] -= l[i - 1] * b[i - 1, j]
    for j in range(m):
        b[n - 1, j] /= d[n - 1]
    for i in range(n - 2, -1, -1):
        for j in range(m):
            b[i, j] = b[i, j] / d[i] - l[i] * b[i + 1, j]
    return b


@njit(cache=True, nogil=True)
def add_sine_load(u, h, scale, out):
    """out += scale * (loads of -sin(u_h)), 3-point Gauss per cell."""
    n, m = u.shape
    for c in range(n + 1):
        for j in range(m):
            left = u[c - 1, j] if c > 0 else 0.0
            right = u[c, j] if c < n else 0.0
            rise = 0.0
            fall = 0.0
            for q in range(3):
                g = -np.sin((1.0 - _XI[q]) * left + _XI[q] * right) * _W[q]
                rise += _XI[q] * g
                fall += (1.0 - _XI[q]) * g
            if c < n:
                out[c, j] += scale * h * rise
            if c > 0:
                out[c - 1, j] += scale * h * fall


@njit(cache=True, nogil=True)
def implicit_step(u, v, md, mo, sd, so, k, h, d, l, sine, load):
    """One linear implicit Euler step; ``load`` may be an empty array."""
    n, m = u.shape
    rhs = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            r = md[i] * v[i, j] - k * sd[i] * u[i, j]
            if i > 0:
                r += mo[i - 1] * v[i - 1, j] - k * so[i - 1] * u[i - 1, j]
            if i < n - 1:
                r += mo[i] * v[i + 1, j] - k * so[i] * u[i + 1, j]
            rhs[i, j] = r
    if sine:
        add_sine_load(u, h, k, rhs)
    if load.size:
        for i in range(n):
            for j in range(m):
                rhs[i, j] += load[i, j]
    ldl_solve(d, l, rhs)
    u_new = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            u_new[i, j] = u[i, j] + k * rhs[i, j]
    return u_new, rhs
