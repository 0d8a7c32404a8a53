# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Behaviour mirrors ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, M_PI, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


def overlap_add(const double[:, :, ::1] frames, Py_ssize_t hop, Py_ssize_t out_len):
    cdef Py_ssize_t nb = frames.shape[0], nt = frames.shape[1], fl = frames.shape[2]
    cdef Py_ssize_t b, t, j, pos
    out = np.zeros((nb, out_len))
    cdef double[:, ::1] o = out
    with nogil:
        for b in range(nb):
            for t in range(nt):
                pos = t * hop
                for j in range(fl):
                    if pos + j >= out_len:
                        break
                    o[b, pos + j] += frames[b, t, j]
    return out


# ---- radix-2 FFT on split real/imag buffers -------------------------------

cdef struct FFTPlan:
    Py_ssize_t n          # complex length (half of the real length)
    double *cos_t
    double *sin_t
    Py_ssize_t *rev


cdef int plan_init(FFTPlan *p, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, k, bits = 0, m = n
    p.n = n
    p.cos_t = <double *> malloc(sizeof(double) * (2 * n + 1))
    p.sin_t = <double *> malloc(sizeof(double) * (2 * n + 1))
    p.rev = <Py_ssize_t *> malloc(sizeof(Py_ssize_t) * n)
    if p.cos_t == NULL or p.sin_t == NULL or p.rev == NULL:
        return -1
    # twiddles for the real length 2n; the half-length FFT uses every other one
    for i in range(2 * n + 1):
        p.cos_t[i] = cos(M_PI * i / n)
        p.sin_t[i] = sin(M_PI * i / n)
    while m > 1:
        m >>= 1
        bits += 1
    for i in range(n):
        j = 0
        m = i
        for k in range(bits):
            j = (j << 1) | (m & 1)
            m >>= 1
        p.rev[i] = j
    return 0


cdef void plan_free(FFTPlan *p) noexcept nogil:
    free(p.cos_t)
    free(p.sin_t)
    free(p.rev)


cdef void cfft(FFTPlan *p, double *re, double *im, int inverse) noexcept nogil:
    cdef Py_ssize_t n = p.n, i, j, size, half, step, k, tw
    cdef double tr, ti, wr, wi, sgn = 1.0 if inverse else -1.0
    for i in range(n):
        j = p.rev[i]
        if j > i:
            tr = re[i]; re[i] = re[j]; re[j] = tr
            ti = im[i]; im[i] = im[j]; im[j] = ti
    size = 2
    while size <= n:
        half = size >> 1
        step = 2 * n // size   # stride into the length-2n twiddle table
        i = 0
        while i < n:
            for k in range(half):
                tw = k * step
                wr = p.cos_t[tw]
                wi = sgn * p.sin_t[tw]
                j = i + k + half
                tr = re[j] * wr - im[j] * wi
                ti = re[j] * wi + im[j] * wr
                re[j] = re[i + k] - tr
                im[j] = im[i + k] - ti
                re[i + k] += tr
                im[i + k] += ti
            i += size
        size <<= 1


cdef void rfft(FFTPlan *p, const double *x, Py_ssize_t nx, double scale,
               double *zr, double *zi, double *outr, double *outi) noexcept nogil:
    """One-sided DFT of ``x`` zero-padded to 2n; writes n + 1 bins."""
    cdef Py_ssize_t h = p.n, k, m
    cdef double er, ei, orr, oi, ar, ai, br, bi, wr, wi
    for m in range(h):
        zr[m] = x[2 * m] if 2 * m < nx else 0.0
        zi[m] = x[2 * m + 1] if 2 * m + 1 < nx else 0.0
    cfft(p, zr, zi, 0)
    for k in range(h + 1):
        ar = zr[k % h]; ai = zi[k % h]
        br = zr[(h - k) % h]; bi = -zi[(h - k) % h]
        er = 0.5 * (ar + br); ei = 0.5 * (ai + bi)
        # (a - b) / 2i
        orr = 0.5 * (ai - bi); oi = -0.5 * (ar - br)
        wr = p.cos_t[k]; wi = -p.sin_t[k]
        outr[k] = scale * (er + wr * orr - wi * oi)
        outi[k] = scale * (ei + wr * oi + wi * orr)


cdef void irfft(FFTPlan *p, double *cr, double *ci, double scale,
                double *zr, double *zi, double *x, Py_ssize_t nx) noexcept nogil:
    """Inverse of ``rfft`` (Hermitian extension), first ``nx`` samples times ``scale``."""
    cdef Py_ssize_t h = p.n, k, m
    cdef double ar, ai, br, bi, er, ei, dr, di, wr, wi, orr, oi
    ci[0] = 0.0
    ci[h] = 0.0
    for k in range(h):
        ar = cr[k]; ai = ci[k]
        br = cr[h - k]; bi = -ci[h - k]
        er = 0.5 * (ar + br); ei = 0.5 * (ai + bi)
        dr = 0.5 * (ar - br); di = 0.5 * (ai - bi)
        wr = p.cos_t[k]; wi = p.sin_t[k]     # W^{-k}
        orr = dr * wr - di * wi
        oi = dr * wi + di * wr
        zr[k] = er - oi
        zi[k] = ei + orr
    cfft(p, zr, zi, 1)
    for m in range(h):
        if 2 * m < nx:
            x[2 * m] = zr[m] * scale / h
        if 2 * m + 1 < nx:
            x[2 * m + 1] = zi[m] * scale / h


cdef double kth_largest(double *v, Py_ssize_t n, Py_ssize_t k) noexcept nogil:
    """Value of the k-th largest element (1-based); reorders ``v``."""
    cdef Py_ssize_t lo = 0, hi = n - 1, target = k - 1, i, j
    cdef double pivot, tmp
    while lo < hi:
        pivot = v[(lo + hi) >> 1]
        i = lo
        j = hi
        while i <= j:
            while v[i] > pivot:
                i += 1
            while v[j] < pivot:
                j -= 1
            if i <= j:
                tmp = v[i]; v[i] = v[j]; v[j] = tmp
                i += 1
                j -= 1
        if target <= j:
            hi = j
        elif target >= i:
            lo = i
        else:
            break
    return v[target]


cdef inline double clamp(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef double full_norm(double *r_re, double *r_im, Py_ssize_t nb) noexcept nogil:
    cdef Py_ssize_t k
    cdef double e = 0.0
    for k in range(nb):
        e += 2.0 * (r_re[k] * r_re[k] + r_im[k] * r_im[k])
    e -= r_re[0] * r_re[0] + r_im[0] * r_im[0]
    e -= r_re[nb - 1] * r_re[nb - 1] + r_im[nb - 1] * r_im[nb - 1]
    return sqrt(e) if e > 0.0 else 0.0


def aspade_frame(const double[::1] y, const double[::1] lower, const double[::1] upper,
                 Py_ssize_t n_coef, Py_ssize_t k0, Py_ssize_t step,
                 Py_ssize_t max_iters, double tol):
    cdef Py_ssize_t L = y.shape[0], h = n_coef // 2, nb = n_coef // 2 + 1
    cdef Py_ssize_t i, kk, it = 0, k = k0, kept
    cdef double scale = 1.0 / sqrt(<double> n_coef), syn = sqrt(<double> n_coef)
    cdef double res = 0.0, best_res = INFINITY, first_res = INFINITY, thr
    cdef bint converged = False
    cdef FFTPlan plan

    x_arr = np.empty(L)
    best_arr = np.empty(L)
    cdef double[::1] x = x_arr, best = best_arr
    cdef double *zr = <double *> malloc(sizeof(double) * h)
    cdef double *zi = <double *> malloc(sizeof(double) * h)
    cdef double *a_re = <double *> malloc(sizeof(double) * nb)
    cdef double *a_im = <double *> malloc(sizeof(double) * nb)
    cdef double *u_re = <double *> malloc(sizeof(double) * nb)
    cdef double *u_im = <double *> malloc(sizeof(double) * nb)
    cdef double *z_re = <double *> malloc(sizeof(double) * nb)
    cdef double *z_im = <double *> malloc(sizeof(double) * nb)
    cdef double *mag = <double *> malloc(sizeof(double) * nb)
    if plan_init(&plan, h) != 0 or zr == NULL or mag == NULL:
        raise MemoryError()

    with nogil:
        for i in range(L):
            x[i] = clamp(y[i], lower[i], upper[i])
            best[i] = x[i]
        for i in range(nb):
            u_re[i] = 0.0
            u_im[i] = 0.0
        for it in range(1, max_iters + 1):
            rfft(&plan, &x[0], L, scale, zr, zi, a_re, a_im)
            for i in range(nb):
                a_re[i] += u_re[i]
                a_im[i] += u_im[i]
                mag[i] = a_re[i] * a_re[i] + a_im[i] * a_im[i]
            if k >= nb:
                for i in range(nb):
                    z_re[i] = a_re[i]
                    z_im[i] = a_im[i]
            else:
                thr = kth_largest(mag, nb, k)
                kept = 0
                for i in range(nb):
                    if a_re[i] * a_re[i] + a_im[i] * a_im[i] > thr:
                        z_re[i] = a_re[i]; z_im[i] = a_im[i]
                        kept += 1
                    else:
                        z_re[i] = 0.0; z_im[i] = 0.0
                for i in range(nb):
                    if kept >= k:
                        break
                    if a_re[i] * a_re[i] + a_im[i] * a_im[i] == thr:
                        z_re[i] = a_re[i]; z_im[i] = a_im[i]
                        kept += 1
            # x = proj(A^H (z - u)); reuse a_* as scratch
            for i in range(nb):
                a_re[i] = z_re[i] - u_re[i]
                a_im[i] = z_im[i] - u_im[i]
            irfft(&plan, a_re, a_im, syn, zr, zi, &x[0], L)
            for i in range(L):
                x[i] = clamp(x[i], lower[i], upper[i])
            rfft(&plan, &x[0], L, scale, zr, zi, a_re, a_im)
            for i in range(nb):
                a_re[i] -= z_re[i]
                a_im[i] -= z_im[i]
            res = full_norm(a_re, a_im, nb)
            if it == 1:
                first_res = res
            if res < best_res:
                best_res = res
                for i in range(L):
                    best[i] = x[i]
            if res <= tol:
                converged = True
                break
            for i in range(nb):
                u_re[i] += a_re[i]
                u_im[i] += a_im[i]
            k += step

    plan_free(&plan)
    free(zr); free(zi); free(a_re); free(a_im); free(u_re); free(u_im)
    free(z_re); free(z_im); free(mag)
    return best_arr, it, first_res, best_res, bool(converged)
