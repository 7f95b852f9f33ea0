# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled stepping kernel: exponential linear factor with 2-point
Gauss-Legendre coefficient averaging, implicit odd-cubic reaction by
safeguarded Newton, backward-Euler tridiagonal diffusion with principal-mode
rescaling. Mirrors qprd.kernels.pyref; see that module for the contract."""

import numpy as np

from libc.math cimport sin, exp, log, fabs, copysign, sqrt, M_PI

IMPL_NAME = "compiled"

cdef double TWO_PI = 2.0 * M_PI
cdef double GL_LO = 0.5 - sqrt(3.0) / 6.0
cdef double GL_HI = 0.5 + sqrt(3.0) / 6.0


cdef class State:
    cdef double dt, om1, om2, lin0, r0, st0, kappa
    cdef Py_ssize_t n, nh, ns
    cdef int h_xdep, s_xdep, has_g
    cdef int[::1] h_m1, h_m2, s_m1, s_m2
    cdef double[::1] h_amp, h_ph, s_amp, s_ph
    cdef double[:, ::1] h_prof, s_prof
    cdef double[::1] low, invd, cp
    cdef double[::1] zbuf, hfac, sfac


def prepare(dict tables):
    cdef State s = State()
    cdef Py_ssize_t n = tables["n_nodes"]
    cdef Py_ssize_t i
    s.n = n
    s.dt = tables["dt"]
    s.om1 = tables["om1"]
    s.om2 = tables["om2"]
    s.lin0 = tables["lin0"]
    s.kappa = tables["kappa"]

    s.h_m1 = np.ascontiguousarray(tables["h_m1"], dtype=np.intc)
    s.h_m2 = np.ascontiguousarray(tables["h_m2"], dtype=np.intc)
    s.h_amp = np.ascontiguousarray(tables["h_amp"], dtype=np.float64)
    s.h_ph = np.ascontiguousarray(tables["h_ph"], dtype=np.float64)
    s.nh = s.h_amp.shape[0]
    h_prof = tables["h_prof"]
    s.h_xdep = 0 if h_prof is None else 1
    s.h_prof = np.ascontiguousarray(
        np.zeros((0, n)) if h_prof is None else h_prof, dtype=np.float64)

    s.has_g = 1 if tables["has_g"] else 0
    s.r0 = tables["r0"]
    s.st0 = tables["st0"]
    s.s_m1 = np.ascontiguousarray(tables["s_m1"], dtype=np.intc)
    s.s_m2 = np.ascontiguousarray(tables["s_m2"], dtype=np.intc)
    s.s_amp = np.ascontiguousarray(tables["s_amp"], dtype=np.float64)
    s.s_ph = np.ascontiguousarray(tables["s_ph"], dtype=np.float64)
    s.ns = s.s_amp.shape[0]
    s_prof = tables["s_prof"]
    s.s_xdep = 0 if s_prof is None else 1
    s.s_prof = np.ascontiguousarray(
        np.zeros((0, n)) if s_prof is None else s_prof, dtype=np.float64)

    low = np.ascontiguousarray(tables["low"], dtype=np.float64)
    diag = np.asarray(tables["diag"], dtype=np.float64)
    up = np.asarray(tables["up"], dtype=np.float64)
    invd = np.empty(n)
    cp = np.empty(n)
    den = diag[0]
    invd[0] = 1.0 / den
    cp[0] = up[0] / den
    for i in range(1, n):
        den = diag[i] - low[i] * cp[i - 1]
        invd[i] = 1.0 / den
        cp[i] = up[i] / den
    s.low = low
    s.invd = invd
    s.cp = cp

    s.zbuf = np.empty(n)
    s.hfac = np.empty(max(s.nh, 1))
    s.sfac = np.empty(max(s.ns, 1))
    return s


cdef inline double _cubic_root(double a, double c, double r0) nogil:
    """Root of w*exp(c*(w-r0)^3/w) = a on [r0, a]; Newton with a bisection
    safeguard, bracket maintained by the sign of the residual."""
    cdef double lo = r0, hi = a, w = a
    cdef double f = c * (a - r0) * (a - r0) * (a - r0) / a
    cdef double fp, wn, delta
    cdef int it
    for it in range(100):
        fp = 1.0 / w + c * (w - r0) * (w - r0) * (2.0 * w + r0) / (w * w)
        wn = w - f / fp
        if wn <= lo or wn >= hi:
            wn = 0.5 * (lo + hi)
        delta = fabs(w - wn)
        w = wn
        f = log(w / a) + c * (w - r0) * (w - r0) * (w - r0) / w
        if f > 0.0:
            hi = w
        else:
            lo = w
        if delta <= 1e-15 * w + 1e-300:
            break
    return w


def step_chunk(State s, double[::1] y, double th1, double th2, Py_ssize_t nsteps):
    cdef Py_ssize_t k, i, j
    cdef Py_ssize_t n = s.n
    cdef double dt = s.dt
    cdef double ta, tb, tm, acc, fct, a, c, w, kk
    with nogil:
        for k in range(nsteps):
            ta = (<double> k + GL_LO) * dt
            tb = (<double> k + GL_HI) * dt

            if s.nh == 0:
                fct = exp(dt * s.lin0)
                for i in range(n):
                    y[i] *= fct
            elif s.h_xdep:
                for j in range(s.nh):
                    s.hfac[j] = 0.5 * s.h_amp[j] * (
                        sin(TWO_PI * (s.h_m1[j] * (th1 + s.om1 * ta)
                                      + s.h_m2[j] * (th2 + s.om2 * ta)) + s.h_ph[j])
                        + sin(TWO_PI * (s.h_m1[j] * (th1 + s.om1 * tb)
                                        + s.h_m2[j] * (th2 + s.om2 * tb)) + s.h_ph[j]))
                for i in range(n):
                    acc = s.lin0
                    for j in range(s.nh):
                        acc += s.hfac[j] * s.h_prof[j, i]
                    y[i] *= exp(dt * acc)
            else:
                acc = s.lin0
                for j in range(s.nh):
                    acc += 0.5 * s.h_amp[j] * (
                        sin(TWO_PI * (s.h_m1[j] * (th1 + s.om1 * ta)
                                      + s.h_m2[j] * (th2 + s.om2 * ta)) + s.h_ph[j])
                        + sin(TWO_PI * (s.h_m1[j] * (th1 + s.om1 * tb)
                                        + s.h_m2[j] * (th2 + s.om2 * tb)) + s.h_ph[j]))
                fct = exp(dt * acc)
                for i in range(n):
                    y[i] *= fct

            if s.has_g:
                tm = (<double> k + 0.5) * dt
                for j in range(s.ns):
                    s.sfac[j] = s.s_amp[j] * sin(
                        TWO_PI * (s.s_m1[j] * (th1 + s.om1 * tm)
                                  + s.s_m2[j] * (th2 + s.om2 * tm)) + s.s_ph[j])
                if s.s_xdep:
                    for i in range(n):
                        a = fabs(y[i])
                        if a > s.r0:
                            kk = s.st0
                            for j in range(s.ns):
                                kk += s.sfac[j] * s.s_prof[j, i]
                            w = _cubic_root(a, dt * kk, s.r0)
                            y[i] = copysign(w, y[i])
                else:
                    kk = s.st0
                    for j in range(s.ns):
                        kk += s.sfac[j]
                    c = dt * kk
                    for i in range(n):
                        a = fabs(y[i])
                        if a > s.r0:
                            y[i] = copysign(_cubic_root(a, c, s.r0), y[i])

            s.zbuf[0] = y[0] * s.invd[0]
            for i in range(1, n):
                s.zbuf[i] = (y[i] - s.low[i] * s.zbuf[i - 1]) * s.invd[i]
            y[n - 1] = s.zbuf[n - 1]
            for i in range(n - 2, -1, -1):
                y[i] = s.zbuf[i] - s.cp[i] * y[i + 1]
            for i in range(n):
                y[i] *= s.kappa
