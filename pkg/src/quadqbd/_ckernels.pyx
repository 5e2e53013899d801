# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels; see ``_pykernels`` for the algorithm."""

from libc.math cimport log1p
from libc.stdint cimport int64_t, int8_t, uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0

cdef enum:
    OK = 0
    ABSORBED = 1
    ESCAPED = 2
    FULL = 3


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double next_uniform(uint64_t* state) noexcept nogil:
    state[0] += GOLDEN
    return <double>(mix64(state[0]) >> 11) * TWO_M53


cdef int path(const int64_t[:] indptr, const int64_t[:] dest, const double[:] cum,
              int64_t init, double horizon, uint64_t state,
              int64_t* final, int64_t* njumps,
              double* times, int64_t* states, int64_t cap, int64_t* count) noexcept nogil:
    cdef double t = 0.0, rate, target
    cdef int64_t s = init, lo, hi, k, nxt, jumps = 0
    cdef bint rec = count != NULL
    while True:
        lo = indptr[s]
        hi = indptr[s + 1]
        if hi == lo:
            final[0] = s; njumps[0] = jumps
            return ABSORBED
        rate = cum[hi - 1]
        t += -log1p(-next_uniform(&state)) / rate
        if t > horizon:
            final[0] = s; njumps[0] = jumps
            return OK
        target = next_uniform(&state) * rate
        k = lo
        while k < hi - 1 and not target < cum[k]:
            k += 1
        nxt = dest[k]
        if nxt < 0:
            final[0] = s; njumps[0] = jumps
            return ESCAPED
        s = nxt
        jumps += 1
        if rec:
            if count[0] >= cap:
                final[0] = s; njumps[0] = jumps
                return FULL
            times[count[0]] = t
            states[count[0]] = s
            count[0] += 1


def stream_start(uint64_t seed, uint64_t p):
    return mix64(seed + GOLDEN * (p + 1))


def run_paths(const int64_t[:] indptr, const int64_t[:] dest, const double[:] cum,
              int64_t init, double horizon, uint64_t seed, int64_t path_start,
              int64_t[:] out_state, int64_t[:] out_jumps, int8_t[:] out_status):
    cdef Py_ssize_t p, n = out_state.shape[0]
    cdef int64_t final = 0, jumps = 0
    cdef uint64_t start
    with nogil:
        for p in range(n):
            start = mix64(seed + GOLDEN * <uint64_t>(path_start + p + 1))
            out_status[p] = path(indptr, dest, cum, init, horizon, start,
                                 &final, &jumps, NULL, NULL, 0, NULL)
            out_state[p] = final
            out_jumps[p] = jumps


def run_path_record(const int64_t[:] indptr, const int64_t[:] dest, const double[:] cum,
                    int64_t init, double horizon, uint64_t seed, int64_t p,
                    double[:] times, int64_t[:] states):
    cdef int64_t final = 0, jumps = 0, count = 1
    cdef int status
    cdef uint64_t start = mix64(seed + GOLDEN * <uint64_t>(p + 1))
    times[0] = 0.0
    states[0] = init
    status = path(indptr, dest, cum, init, horizon, start, &final, &jumps,
                  &times[0], &states[0], times.shape[0], &count)
    return count, status
