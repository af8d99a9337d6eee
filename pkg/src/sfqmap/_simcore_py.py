"""Reference (numpy) implementation of the bit-parallel program runner.

A program is an ``int32`` array with one instruction per row::

    op, out, in0, in1, in2, flags, g0, g1, g2

``flags`` bit ``k`` complements input ``k``; bit ``3 + k`` marks input ``k``
as missed (it reads as 0 before the complement).  ``g0..g2`` are the release
groups of T1 inputs: inputs sharing a group arrive in one stage and merge.
A T1 writes six rows starting at ``out``: S, C, Q, not C, not Q, hazard.
"""
import numpy as np

OP_CONST0, OP_AND, OP_OR, OP_XOR, OP_NOT, OP_COPY, OP_MAJ, OP_T1 = range(8)
ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


def _read(val, ins, flags, k):
    if flags >> (3 + k) & 1:
        x = np.zeros(val.shape[1], dtype=np.uint64)
    else:
        x = val[ins[k]].copy()
    if flags >> k & 1:
        x ^= ALL
    return x


def run_program(prog, val):
    for row in prog:
        op, out, i0, i1, i2, flags, g0, g1, g2 = (int(x) for x in row)
        ins = (i0, i1, i2)
        if op == OP_CONST0:
            val[out] = 0
        elif op == OP_NOT:
            val[out] = _read(val, ins, flags, 0) ^ ALL
        elif op == OP_COPY:
            val[out] = _read(val, ins, flags, 0)
        elif op in (OP_AND, OP_OR, OP_XOR):
            a = _read(val, ins, flags, 0)
            b = _read(val, ins, flags, 1)
            val[out] = a & b if op == OP_AND else a | b if op == OP_OR else a ^ b
        elif op == OP_MAJ:
            a, b, c = (_read(val, ins, flags, k) for k in range(3))
            val[out] = (a & b) | (a & c) | (b & c)
        elif op == OP_T1:
            p = [_read(val, ins, flags, k) for k in range(3)]
            groups = (g0, g1, g2)
            q = [np.zeros(val.shape[1], dtype=np.uint64) for _ in range(3)]
            haz = np.zeros(val.shape[1], dtype=np.uint64)
            for k in range(3):
                haz |= q[groups[k]] & p[k]
                q[groups[k]] |= p[k]
            a, b, c = q
            maj = (a & b) | (a & c) | (b & c)
            orq = a | b | c
            val[out] = a ^ b ^ c
            val[out + 1] = maj
            val[out + 2] = orq
            val[out + 3] = maj ^ ALL
            val[out + 4] = orq ^ ALL
            val[out + 5] = haz
        else:
            raise ValueError(f"bad opcode {op}")
