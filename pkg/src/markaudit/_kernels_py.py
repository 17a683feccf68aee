"""Pure-Python twin of the compiled Monte Carlo kernel.

Consumes uniforms from each trial's bit generator in exactly the same order
as the compiled version (one per draw, plus one per marginal branch), so the
two produce bit-identical draw counts.  Uniforms are pulled in blocks for
speed; block boundaries do not affect the stream.
"""
from __future__ import annotations

import numpy as np

_BLOCK = 4096


class _UniformSource:
    """Buffered view of Generator.random(), preserving draw order."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, bit_generator):
        self._gen = np.random.Generator(bit_generator)
        self._buf = ()
        self._pos = 0

    def next(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def simulate_trials(
    t_o1: float, t_u1: float, t_o2: float, t_u2: float, t_m: float,
    c_o1: float, c_u1: float, c_o2: float, c_u2: float, c_zero: float,
    q1: float, q2: float,
    c_m1: float, c_m2: float, c_m3: float,
    log_alpha: float, max_draws: int,
    bit_generators: list,
):
    out = np.empty(len(bit_generators), dtype=np.int64)
    for i, bg in enumerate(bit_generators):
        uniforms = _UniformSource(bg)
        nxt = uniforms.next
        lr = 0.0
        n = 0
        while True:
            n += 1
            u = nxt()
            if u < t_o1:
                c = c_o1
            elif u < t_u1:
                c = c_u1
            elif u < t_o2:
                c = c_o2
            elif u < t_u2:
                c = c_u2
            elif u < t_m:
                v = nxt()
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
        out[i] = n
    return out
