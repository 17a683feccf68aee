#cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo kernel for sequential-test trial simulation.

Draws uniforms straight from numpy bit generators through the C interface so
the stream is bit-identical to the pure-Python twin in ``_kernels_py``; the
selected implementation therefore never changes results, only speed.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t

import numpy as np


def simulate_trials(
    double t_o1, double t_u1, double t_o2, double t_u2, double t_m,
    double c_o1, double c_u1, double c_o2, double c_u2, double c_zero,
    double q1, double q2,
    double c_m1, double c_m2, double c_m3,
    double log_alpha, long max_draws,
    list bit_generators,
):
    """Number of draws until the running log-risk crosses log_alpha, per trial.

    Category cuts are cumulative probabilities; each marginal draw consumes a
    second uniform for its sub-branch.  One bit generator per trial.
    """
    cdef Py_ssize_t n_trials = len(bit_generators)
    out = np.empty(n_trials, dtype=np.int64)
    cdef long[::1] out_view = out
    cdef bitgen_t *rng
    cdef Py_ssize_t i
    cdef long n
    cdef double lr, u, v, c
    cdef object capsule

    for i in range(n_trials):
        capsule = bit_generators[i].capsule
        if not PyCapsule_IsValid(capsule, "BitGenerator"):
            raise ValueError("expected a numpy BitGenerator")
        rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
        lr = 0.0
        n = 0
        while True:
            n += 1
            u = rng.next_double(rng.state)
            if u < t_o1:
                c = c_o1
            elif u < t_u1:
                c = c_u1
            elif u < t_o2:
                c = c_o2
            elif u < t_u2:
                c = c_u2
            elif u < t_m:
                v = rng.next_double(rng.state)
                if v < q1:
                    c = c_m1
                elif v < q2:
                    c = c_m2
                else:
                    c = c_m3
            else:
                c = c_zero
            lr += c
            if lr <= log_alpha or n >= max_draws:
                break
        out_view[i] = n
    return out
