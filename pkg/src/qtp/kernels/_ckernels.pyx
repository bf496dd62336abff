# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels; same contract and arithmetic as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

cdef double HALF_PI = 1.5707963267948966


cdef inline void _rot(double* hr, double* hi, double* vr, double* vi, double phi) noexcept nogil:
    cdef double c = cos(phi)
    cdef double s = sin(phi)
    cdef double nhr = c * hr[0] - s * vr[0]
    cdef double nhi = c * hi[0] - s * vi[0]
    cdef double nvr = s * hr[0] + c * vr[0]
    cdef double nvi = s * hi[0] + c * vi[0]
    hr[0] = nhr
    hi[0] = nhi
    vr[0] = nvr
    vi[0] = nvi


cdef inline signed char _measure(double* hr, double* hi, double* vr, double* vi,
                                 double basis, double u) noexcept nogil:
    cdef double cb = cos(basis)
    cdef double sb = sin(basis)
    cdef double ar = cb * hr[0] + sb * vr[0]
    cdef double ai = cb * hi[0] + sb * vi[0]
    cdef double p0 = ar * ar + ai * ai
    cdef double theta = basis
    cdef signed char out = 0
    if not (u < p0):
        out = 1
        theta = basis + HALF_PI
    hr[0] = cos(theta)
    hi[0] = 0.0
    vr[0] = sin(theta)
    vi[0] = 0.0
    return out


def measure(h, v, basis, u):
    cdef const double[:, ::1] hv = np.ascontiguousarray(h, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    cdef const double[:, ::1] vv = np.ascontiguousarray(v, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    cdef const double[::1] bb = np.ascontiguousarray(basis, dtype=np.float64)
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = hv.shape[0], i
    out_h = np.empty(n, dtype=np.complex128)
    out_v = np.empty(n, dtype=np.complex128)
    outcomes = np.empty(n, dtype=np.int8)
    cdef double[:, ::1] oh = out_h.view(np.float64).reshape(-1, 2)
    cdef double[:, ::1] ov = out_v.view(np.float64).reshape(-1, 2)
    cdef signed char[::1] oc = outcomes
    cdef double hr, hi, vr, vi
    with nogil:
        for i in range(n):
            hr = hv[i, 0]; hi = hv[i, 1]; vr = vv[i, 0]; vi = vv[i, 1]
            oc[i] = _measure(&hr, &hi, &vr, &vi, bb[i], uu[i])
            oh[i, 0] = hr; oh[i, 1] = hi; ov[i, 0] = vr; ov[i, 1] = vi
    return outcomes, out_h, out_v


def three_pass(psi_h, psi_v, rot, taps, tap_basis, tap_u):
    cdef const double[:, ::1] hv = np.ascontiguousarray(psi_h, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    cdef const double[:, ::1] vv = np.ascontiguousarray(psi_v, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    cdef const double[:, ::1] rr = np.ascontiguousarray(rot, dtype=np.float64)
    cdef const double[:, ::1] tb = np.ascontiguousarray(tap_basis, dtype=np.float64)
    cdef const double[:, ::1] tu = np.ascontiguousarray(tap_u, dtype=np.float64)
    cdef Py_ssize_t n = hv.shape[0], i
    cdef int p
    cdef bint t0 = bool(taps[0]), t1 = bool(taps[1]), t2 = bool(taps[2])
    cdef bint tap[3]
    tap[0] = t0; tap[1] = t1; tap[2] = t2
    out_h = np.empty(n, dtype=np.complex128)
    out_v = np.empty(n, dtype=np.complex128)
    outcomes = np.full((n, 3), -1, dtype=np.int8)
    cdef double[:, ::1] oh = out_h.view(np.float64).reshape(-1, 2)
    cdef double[:, ::1] ov = out_v.view(np.float64).reshape(-1, 2)
    cdef signed char[:, ::1] oc = outcomes
    cdef double hr, hi, vr, vi
    with nogil:
        for i in range(n):
            hr = hv[i, 0]; hi = hv[i, 1]; vr = vv[i, 0]; vi = vv[i, 1]
            for p in range(3):
                _rot(&hr, &hi, &vr, &vi, rr[i, p])
                if tap[p]:
                    oc[i, p] = _measure(&hr, &hi, &vr, &vi, tb[i, p], tu[i, p])
            _rot(&hr, &hi, &vr, &vi, rr[i, 3])
            oh[i, 0] = hr; oh[i, 1] = hi; ov[i, 0] = vr; ov[i, 1] = vi
    return out_h, out_v, outcomes


def fidelity(ah, av, bh, bv):
    cdef const double[:, ::1] a0 = np.ascontiguousarray(ah, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    cdef const double[:, ::1] a1 = np.ascontiguousarray(av, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    cdef const double[:, ::1] b0 = np.ascontiguousarray(bh, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    cdef const double[:, ::1] b1 = np.ascontiguousarray(bv, dtype=np.complex128).view(np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = a0.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double zr, zi, f
    with nogil:
        for i in range(n):
            zr = (a0[i, 0] * b0[i, 0] + a0[i, 1] * b0[i, 1]) + (a1[i, 0] * b1[i, 0] + a1[i, 1] * b1[i, 1])
            zi = (a0[i, 0] * b0[i, 1] - a0[i, 1] * b0[i, 0]) + (a1[i, 0] * b1[i, 1] - a1[i, 1] * b1[i, 0])
            f = zr * zr + zi * zi
            if f > 1.0:
                f = 1.0
            elif f < 0.0:
                f = 0.0
            o[i] = f
    return out
