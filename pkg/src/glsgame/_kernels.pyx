# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernel for the weighted game objective.

Mirrors glsgame._kernels_py.WeightedObjective but takes pre-encoded cost and
scalarization descriptions, so the hot loop never touches Python objects.
Small dense symmetric inverses go through LAPACK (dpotrf/dpotri).
"""

import numpy as np

from libc.math cimport INFINITY, cosh, pow, sinh
from scipy.linalg.cython_lapack cimport dpotrf, dpotri

BACKEND_NAME = "cython"

# kind tags; keep in sync with glsgame.model
cdef enum:
    COST_NONE = 0
    COST_LINEAR = 1
    COST_MONOMIAL = 2
    COST_POLYNOMIAL = 3
    COST_COSH = 4

cdef enum:
    F_TRACE = 0
    F_POW_TRACE = 1
    F_SQ_FROBENIUS = 2
    F_LINEAR_MAP = 3

cdef double EIG_FLOOR = 1e-10


cdef inline double _cost_value(int kind, const double* par, int npar, double x) noexcept nogil:
    cdef double acc
    cdef int k
    if kind == COST_LINEAR:
        return par[0] * x
    if kind == COST_MONOMIAL:
        return pow(x, par[0])
    if kind == COST_POLYNOMIAL:
        acc = 0.0
        for k in range(0, npar, 2):
            acc += par[k] * pow(x, par[k + 1])
        return acc
    if kind == COST_COSH:
        return cosh(x) - 1.0
    return 0.0


cdef inline double _cost_deriv(int kind, const double* par, int npar, double x) noexcept nogil:
    cdef double acc
    cdef int k
    if kind == COST_LINEAR:
        return par[0]
    if kind == COST_MONOMIAL:
        return par[0] * pow(x, par[0] - 1.0)
    if kind == COST_POLYNOMIAL:
        acc = 0.0
        for k in range(0, npar, 2):
            acc += par[k] * par[k + 1] * pow(x, par[k + 1] - 1.0)
        return acc
    if kind == COST_COSH:
        return sinh(x)
    return 0.0


cdef void _matmul(const double[:, ::1] a, const double[:, ::1] b,
                  double[:, ::1] out, int d) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


cdef int _spd_inverse(double[:, ::1] a, int d) noexcept nogil:
    """In-place inverse of an SPD matrix; nonzero return means not PD.

    The C-ordered buffer is handed to LAPACK as its own transpose, which is
    harmless for symmetric input; the valid output triangle is mirrored back.
    """
    cdef int n = d, lda = d, info = 0
    cdef int i, j
    dpotrf('L', &n, &a[0, 0], &lda, &info)
    if info != 0:
        return info
    dpotri('L', &n, &a[0, 0], &lda, &info)
    if info != 0:
        return info
    for i in range(d):
        for j in range(i + 1, d):
            a[j, i] = a[i, j]
    return 0


cdef class WeightedObjective:
    """Phi(lam) = sum W[t,x] c_t(lam[t,x]) + kappa * F(M(lam)^-1)."""

    cdef double[:, ::1] points
    cdef double[:, ::1] weights
    cdef double kappa
    cdef int T, m, d
    cdef int[::1] ckind
    cdef double[::1] cpar
    cdef int[::1] coff
    cdef int fkind
    cdef double fq
    cdef double[:, ::1] fweight
    cdef double[::1] wx
    cdef double[::1] svec
    cdef double[:, ::1] mbuf
    cdef double[:, ::1] vbuf
    cdef double[:, ::1] bbuf
    cdef double[:, ::1] tbuf

    def __init__(self, points, weights, kappa, cost_kinds, cost_params,
                 cost_offsets, f_kind, f_q, f_weight):
        # np.array copies keep us independent of (possibly read-only) inputs
        self.points = np.array(points, dtype=np.float64, order="C")
        self.weights = np.array(weights, dtype=np.float64, order="C")
        self.kappa = float(kappa)
        self.T = self.weights.shape[0]
        self.m = self.points.shape[0]
        self.d = self.points.shape[1]
        self.ckind = np.array(cost_kinds, dtype=np.intc)
        # trailing sentinel keeps &cpar[offset] valid for parameterless costs
        cpar = list(cost_params) + [0.0]
        self.cpar = np.array(cpar, dtype=np.float64)
        self.coff = np.array(cost_offsets, dtype=np.intc)
        self.fkind = int(f_kind)
        self.fq = float(f_q)
        if f_weight is None:
            f_weight = np.zeros((self.d, self.d))
        self.fweight = np.array(f_weight, dtype=np.float64, order="C")
        self.wx = np.empty(self.m)
        self.svec = np.empty(self.m)
        self.mbuf = np.empty((self.d, self.d))
        self.vbuf = np.empty((self.d, self.d))
        self.bbuf = np.empty((self.d, self.d))
        self.tbuf = np.empty((self.d, self.d))

    cdef int _invert_moment(self, const double[:, ::1] lam) noexcept nogil:
        """Build M(lam), test PD above EIG_FLOOR, leave M^-1 in vbuf."""
        cdef int i, j, t, x
        cdef double acc
        cdef int n = self.d, lda = self.d, info = 0
        for x in range(self.m):
            acc = 0.0
            for t in range(self.T):
                acc += self.weights[t, x] * lam[t, x]
            self.wx[x] = acc
        for i in range(self.d):
            for j in range(self.d):
                acc = 0.0
                for x in range(self.m):
                    acc += self.wx[x] * self.points[x, i] * self.points[x, j]
                self.mbuf[i, j] = acc
        # PD-above-floor test: M - floor*I must admit a Cholesky factorization
        for i in range(self.d):
            for j in range(self.d):
                self.vbuf[i, j] = self.mbuf[i, j]
            self.vbuf[i, i] -= EIG_FLOOR
        dpotrf('L', &n, &self.vbuf[0, 0], &lda, &info)
        if info != 0:
            return info
        for i in range(self.d):
            for j in range(self.d):
                self.vbuf[i, j] = self.mbuf[i, j]
        return _spd_inverse(self.vbuf, self.d)

    cdef double _f_value(self) noexcept nogil:
        cdef double tr = 0.0, acc = 0.0
        cdef int i, j
        if self.fkind == F_TRACE or self.fkind == F_POW_TRACE:
            for i in range(self.d):
                tr += self.vbuf[i, i]
            if self.fkind == F_TRACE:
                return tr
            return pow(tr, self.fq)
        if self.fkind == F_SQ_FROBENIUS:
            for i in range(self.d):
                for j in range(self.d):
                    acc += self.vbuf[i, j] * self.vbuf[i, j]
            return acc
        for i in range(self.d):
            for j in range(self.d):
                acc += self.fweight[i, j] * self.vbuf[i, j]
        return acc

    cdef void _sandwich(self) noexcept nogil:
        """bbuf <- V * grad_F(V) * V for the current vbuf."""
        cdef double tr = 0.0, scale
        cdef int i, j
        if self.fkind == F_TRACE or self.fkind == F_POW_TRACE:
            _matmul(self.vbuf, self.vbuf, self.bbuf, self.d)
            if self.fkind == F_POW_TRACE:
                for i in range(self.d):
                    tr += self.vbuf[i, i]
                scale = self.fq * pow(tr, self.fq - 1.0)
                for i in range(self.d):
                    for j in range(self.d):
                        self.bbuf[i, j] *= scale
        elif self.fkind == F_SQ_FROBENIUS:
            _matmul(self.vbuf, self.vbuf, self.tbuf, self.d)
            _matmul(self.tbuf, self.vbuf, self.bbuf, self.d)
            for i in range(self.d):
                for j in range(self.d):
                    self.bbuf[i, j] *= 2.0
        else:
            _matmul(self.vbuf, self.fweight, self.tbuf, self.d)
            _matmul(self.tbuf, self.vbuf, self.bbuf, self.d)

    cdef double _provision(self, const double[:, ::1] lam) noexcept nogil:
        cdef double total = 0.0
        cdef int t, x, off, npar
        for t in range(self.T):
            if self.ckind[t] == COST_NONE:
                continue
            off = self.coff[t]
            npar = self.coff[t + 1] - off
            for x in range(self.m):
                total += self.weights[t, x] * _cost_value(
                    self.ckind[t], &self.cpar[off], npar, lam[t, x])
        return total

    def value(self, const double[:, ::1] lam):
        if self._invert_moment(lam) != 0:
            return INFINITY
        return self._provision(lam) + self.kappa * self._f_value()

    def value_and_grad(self, const double[:, ::1] lam, double[:, ::1] grad):
        cdef int t, x, i, j, off, npar
        cdef double deriv, acc
        if self._invert_moment(lam) != 0:
            return INFINITY
        self._sandwich()
        for x in range(self.m):
            acc = 0.0
            for i in range(self.d):
                for j in range(self.d):
                    acc += self.points[x, i] * self.bbuf[i, j] * self.points[x, j]
            self.svec[x] = acc
        for t in range(self.T):
            off = self.coff[t]
            npar = self.coff[t + 1] - off
            for x in range(self.m):
                if self.ckind[t] == COST_NONE:
                    deriv = 0.0
                else:
                    deriv = _cost_deriv(self.ckind[t], &self.cpar[off], npar, lam[t, x])
                grad[t, x] = self.weights[t, x] * (deriv - self.kappa * self.svec[x])
        return self._provision(lam) + self.kappa * self._f_value()
