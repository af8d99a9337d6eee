# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled bit-parallel program runner; see _simcore_py for the format."""
from libc.stdint cimport uint64_t, int32_t

cdef enum:
    OP_CONST0 = 0
    OP_AND = 1
    OP_OR = 2
    OP_XOR = 3
    OP_NOT = 4
    OP_COPY = 5
    OP_MAJ = 6
    OP_T1 = 7

cdef uint64_t ALL = 0xFFFFFFFFFFFFFFFF


cdef inline uint64_t rd(uint64_t[:, ::1] val, int row, int flags, int k, Py_ssize_t w) nogil:
    cdef uint64_t x = 0
    if not (flags >> (3 + k)) & 1:
        x = val[row, w]
    if (flags >> k) & 1:
        x = ~x
    return x


def run_program(const int32_t[:, ::1] prog, uint64_t[:, ::1] val):
    cdef Py_ssize_t i, w, width = val.shape[1]
    cdef int op, out, flags, k
    cdef int ins[3]
    cdef int g[3]
    cdef uint64_t a, b, c, p0, p1, p2, haz
    cdef uint64_t q[3]
    cdef uint64_t p[3]
    with nogil:
        for i in range(prog.shape[0]):
            op = prog[i, 0]
            out = prog[i, 1]
            ins[0] = prog[i, 2]
            ins[1] = prog[i, 3]
            ins[2] = prog[i, 4]
            flags = prog[i, 5]
            g[0] = prog[i, 6]
            g[1] = prog[i, 7]
            g[2] = prog[i, 8]
            for w in range(width):
                if op == OP_CONST0:
                    val[out, w] = 0
                elif op == OP_NOT:
                    val[out, w] = ~rd(val, ins[0], flags, 0, w)
                elif op == OP_COPY:
                    val[out, w] = rd(val, ins[0], flags, 0, w)
                elif op == OP_AND:
                    val[out, w] = rd(val, ins[0], flags, 0, w) & rd(val, ins[1], flags, 1, w)
                elif op == OP_OR:
                    val[out, w] = rd(val, ins[0], flags, 0, w) | rd(val, ins[1], flags, 1, w)
                elif op == OP_XOR:
                    val[out, w] = rd(val, ins[0], flags, 0, w) ^ rd(val, ins[1], flags, 1, w)
                elif op == OP_MAJ:
                    a = rd(val, ins[0], flags, 0, w)
                    b = rd(val, ins[1], flags, 1, w)
                    c = rd(val, ins[2], flags, 2, w)
                    val[out, w] = (a & b) | (a & c) | (b & c)
                elif op == OP_T1:
                    q[0] = 0
                    q[1] = 0
                    q[2] = 0
                    haz = 0
                    for k in range(3):
                        p[k] = rd(val, ins[k], flags, k, w)
                        haz |= q[g[k]] & p[k]
                        q[g[k]] |= p[k]
                    a = q[0]
                    b = q[1]
                    c = q[2]
                    val[out, w] = a ^ b ^ c
                    val[out + 1, w] = (a & b) | (a & c) | (b & c)
                    val[out + 2, w] = a | b | c
                    val[out + 3, w] = ~((a & b) | (a & c) | (b & c))
                    val[out + 4, w] = ~(a | b | c)
                    val[out + 5, w] = haz
