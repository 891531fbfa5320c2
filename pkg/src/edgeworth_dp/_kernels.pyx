# cython: language_level=3
"""Compiled Monte Carlo kernel: streaming Kahan sums of privacy-loss draws.

Consumes the numpy bit generator in exactly the order used by
``_kernels_py.pllr_partial_sums`` so both backends see identical draws. The
losses themselves can differ in the last bit because numpy's vectorised
log1p/expm1 are not the C library's.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, expm1, log, log1p
from libc.stdlib cimport free, malloc
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (random_standard_normal,
                                           random_standard_uniform)

cnp.import_array()

cdef double LARGE_EXPONENT = 30.0


cdef inline double _pllr(double t, double q, double two_s2,
                         double log_q, double ratio) noexcept nogil:
    # Same operation order as the numpy path.
    cdef double a = (2.0 * t - 1.0) / two_s2
    if q == 1.0:
        return a
    if q == 0.0:
        return 0.0
    if a > LARGE_EXPONENT:
        return log_q + a + log1p(ratio * exp(-a))
    cdef double u = q * expm1(a)
    if u < -0.5:
        return log((1.0 - q) + q * exp(a))
    return log1p(u)


def pllr_partial_sums(bit_generator, double q, double sigma, long m,
                      long[::1] checkpoints, bint under_q, double[:, ::1] out,
                      long chunk):
    """Fill ``out[i, c]`` with the sum of the first ``checkpoints[c]`` losses of sample i."""
    cdef bitgen_t *rng
    cdef long n = out.shape[0]
    cdef long n_chk = checkpoints.shape[0]
    cdef long start, rows, i, j, c, k
    cdef double s, comp, y, tmp, t
    cdef double two_s2 = 2.0 * sigma * sigma
    cdef double log_q = log(q) if q > 0.0 else 0.0
    cdef double ratio = (1.0 - q) / q if q > 0.0 else 0.0
    cdef double *normals
    cdef double *uniforms

    capsule = bit_generator.capsule
    rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
    normals = <double *> malloc(chunk * m * sizeof(double))
    uniforms = <double *> malloc(chunk * m * sizeof(double))
    if normals == NULL or uniforms == NULL:
        free(normals)
        free(uniforms)
        raise MemoryError()
    try:
        with bit_generator.lock, nogil:
            start = 0
            while start < n:
                rows = chunk if n - start > chunk else n - start
                for k in range(rows * m):
                    normals[k] = random_standard_normal(rng)
                if under_q:
                    for k in range(rows * m):
                        uniforms[k] = random_standard_uniform(rng)
                for i in range(rows):
                    s = 0.0
                    comp = 0.0
                    c = 0
                    for j in range(m):
                        k = i * m + j
                        t = sigma * normals[k]
                        if under_q and uniforms[k] < q:
                            t = t + 1.0
                        y = _pllr(t, q, two_s2, log_q, ratio) - comp
                        tmp = s + y
                        comp = (tmp - s) - y
                        s = tmp
                        if c < n_chk and j + 1 == checkpoints[c]:
                            out[start + i, c] = s
                            c = c + 1
                start = start + rows
    finally:
        free(normals)
        free(uniforms)
