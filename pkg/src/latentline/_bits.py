"""Bitset helpers for numba kernels."""
import numpy as np
import numba as nb
from numba import types
from numba.extending import intrinsic


@intrinsic
def popcount64(typingctx, x):
    sig = types.uint64(types.uint64)

    def codegen(context, builder, signature, args):
        return builder.ctpop(args[0])

    return sig, codegen


def n_words(m):
    return (m + 63) // 64


@nb.njit(cache=True)
def set_bit(row, k):
    row[k >> 6] |= np.uint64(1) << np.uint64(k & 63)


@nb.njit(cache=True)
def test_bit(row, k):
    return (row[k >> 6] >> np.uint64(k & 63)) & np.uint64(1) != np.uint64(0)


@nb.njit(cache=True)
def popcount_row(row):
    s = 0
    for w in range(row.shape[0]):
        s += popcount64(row[w])
    return s
