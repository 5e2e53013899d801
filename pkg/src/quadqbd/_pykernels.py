"""Pure-Python simulation kernels.

Reference implementation of the compiled kernels in ``_ckernels.pyx``;
both produce bit-identical results.

Random numbers: path ``p`` of a run with seed ``s`` uses a SplitMix64
stream whose state starts at ``mix64(s + GOLDEN * (p + 1))``. Each draw
advances the state by ``GOLDEN`` and returns ``mix64(state)``; uniforms
are ``(z >> 11) * 2**-53``. Holding times are ``-log1p(-u) / rate``; the
next transition is the first table entry whose cumulative rate exceeds
``u * rate``.
"""

import math

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TWO_M53 = 2.0**-53

OK, ABSORBED, ESCAPED, FULL = 0, 1, 2, 3


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def stream_start(seed, path):
    return mix64((seed + GOLDEN * (path + 1)) & MASK)


def _path(indptr, dest, cum, init, horizon, state, record):
    t = 0.0
    s = init
    jumps = 0
    while True:
        lo = indptr[s]
        hi = indptr[s + 1]
        if hi == lo:
            return s, jumps, ABSORBED, state
        rate = cum[hi - 1]
        state = (state + GOLDEN) & MASK
        u = (mix64(state) >> 11) * TWO_M53
        t += -math.log1p(-u) / rate
        if t > horizon:
            return s, jumps, OK, state
        state = (state + GOLDEN) & MASK
        target = ((mix64(state) >> 11) * TWO_M53) * rate
        k = lo
        while k < hi - 1 and not target < cum[k]:
            k += 1
        nxt = dest[k]
        if nxt < 0:
            return s, jumps, ESCAPED, state
        s = nxt
        jumps += 1
        if record is not None:
            if not record(t, s):
                return s, jumps, FULL, state


def run_paths(indptr, dest, cum, init, horizon, seed, path_start, out_state, out_jumps, out_status):
    indptr = indptr.tolist()
    dest = dest.tolist()
    cum = cum.tolist()
    for p in range(out_state.shape[0]):
        s, jumps, status, _ = _path(
            indptr, dest, cum, int(init), float(horizon), stream_start(int(seed), path_start + p), None
        )
        out_state[p] = s
        out_jumps[p] = jumps
        out_status[p] = status


def run_path_record(indptr, dest, cum, init, horizon, seed, path, times, states):
    cap = times.shape[0]
    times[0] = 0.0
    states[0] = init
    count = [1]

    def record(t, s):
        if count[0] >= cap:
            return False
        times[count[0]] = t
        states[count[0]] = s
        count[0] += 1
        return True

    _, _, status, _ = _path(
        indptr.tolist(), dest.tolist(), cum.tolist(), int(init), float(horizon),
        stream_start(int(seed), int(path)), record,
    )
    return count[0], status
