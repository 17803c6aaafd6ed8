# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled exhaustive cut-norm scan.

Walks all subsets of the enumerated dimension in Gray-code order, keeping
column partial sums incrementally (one +/- row update per step), so each
subset costs O(m).  Tie-breaking matches the pure-python fallback: among
maximizers, minimize (|rows|, |cols|, rows, cols) in the caller's original
orientation; a maximum of 0 yields the empty witness.
"""

from libc.stdlib cimport free, malloc

cdef extern from *:
    """
    static inline int ctzll_(unsigned long long x) { return __builtin_ctzll(x); }
    """
    int ctzll_(unsigned long long x) nogil


cdef inline int _mask_lex_cmp(unsigned long long a, unsigned long long b) nogil:
    # For equal popcounts: the index sequence of a precedes b's iff the lowest
    # differing bit belongs to a.
    if a == b:
        return 0
    if (a >> ctzll_(a ^ b)) & 1:
        return -1
    return 1


def cutnorm_scan(double[:, ::1] G, bint swap):
    """Scan all subsets of G's rows; `swap` marks G as the transpose of the
    caller's matrix (witness components are reported swapped back)."""
    cdef Py_ssize_t k = G.shape[0]
    cdef Py_ssize_t m = G.shape[1]
    if k > 62:
        raise ValueError("enumerated dimension too large for the scan")

    cdef double* colsum = <double*> malloc(m * sizeof(double))
    cdef unsigned char* best_t = <unsigned char*> malloc(m if m else 1)
    if colsum == NULL or best_t == NULL:
        free(colsum)
        free(best_t)
        raise MemoryError()

    cdef unsigned long long full = (<unsigned long long> 1) << k
    cdef unsigned long long i, mask = 0, best_smask = 0
    cdef double best_val = 0.0, pos, neg, c
    cdef int b, sign, pc_s = 0, pcp, pcn
    cdef int best_pc_s = 0, best_pc_t = 0, best_sign = 1
    cdef int cand_sign, cand_pc_t, cmp, j_
    cdef double cand_val
    cdef Py_ssize_t j
    cdef bint cand_member, best_member

    with nogil:
        for j in range(m):
            colsum[j] = 0.0
        i = 1
        while i < full:
            b = ctzll_(i)
            mask ^= (<unsigned long long> 1) << b
            if (mask >> b) & 1:
                sign = 1
                pc_s += 1
            else:
                sign = -1
                pc_s -= 1
            pos = 0.0
            neg = 0.0
            pcp = 0
            pcn = 0
            if sign > 0:
                for j in range(m):
                    c = colsum[j] + G[b, j]
                    colsum[j] = c
                    if c > 0:
                        pos += c
                        pcp += 1
                    elif c < 0:
                        neg -= c
                        pcn += 1
            else:
                for j in range(m):
                    c = colsum[j] - G[b, j]
                    colsum[j] = c
                    if c > 0:
                        pos += c
                        pcp += 1
                    elif c < 0:
                        neg -= c
                        pcn += 1

            # fold the two signs for this subset into one candidate
            if pos > neg:
                cand_val = pos
                cand_sign = 1
                cand_pc_t = pcp
            elif neg > pos:
                cand_val = neg
                cand_sign = -1
                cand_pc_t = pcn
            else:
                cand_val = pos
                # same subset, equal values: smaller (|T|, T) wins
                if pcp < pcn:
                    cand_sign = 1
                    cand_pc_t = pcp
                elif pcn < pcp:
                    cand_sign = -1
                    cand_pc_t = pcn
                else:
                    cand_sign = 1
                    cand_pc_t = pcp
                    for j in range(m):
                        if colsum[j] > 0:
                            break  # positive side holds the smaller index
                        if colsum[j] < 0:
                            cand_sign = -1
                            cand_pc_t = pcn
                            break

            if cand_val == 0.0:
                i += 1
                continue

            cmp = 0
            if cand_val > best_val:
                cmp = -1
            elif cand_val == best_val:
                # full key comparison, candidate vs incumbent
                if not swap:
                    if pc_s != best_pc_s:
                        cmp = -1 if pc_s < best_pc_s else 1
                    elif cand_pc_t != best_pc_t:
                        cmp = -1 if cand_pc_t < best_pc_t else 1
                    else:
                        cmp = _mask_lex_cmp(mask, best_smask)
                else:
                    if cand_pc_t != best_pc_t:
                        cmp = -1 if cand_pc_t < best_pc_t else 1
                    elif pc_s != best_pc_s:
                        cmp = -1 if pc_s < best_pc_s else 1
                if cmp == 0:
                    # compare T sequences elementwise, then S as tiebreaker
                    for j in range(m):
                        if cand_sign > 0:
                            cand_member = colsum[j] > 0
                        else:
                            cand_member = colsum[j] < 0
                        best_member = best_t[j] != 0
                        if cand_member != best_member:
                            cmp = -1 if cand_member else 1
                            break
                    if cmp == 0 and swap:
                        cmp = _mask_lex_cmp(mask, best_smask)
            else:
                cmp = 1

            if cmp < 0:
                best_val = cand_val
                best_smask = mask
                best_pc_s = pc_s
                best_sign = cand_sign
                best_pc_t = cand_pc_t
                if cand_sign > 0:
                    for j in range(m):
                        best_t[j] = 1 if colsum[j] > 0 else 0
                else:
                    for j in range(m):
                        best_t[j] = 1 if colsum[j] < 0 else 0
            i += 1

    try:
        if best_val == 0.0:
            return 0.0, (), ()
        s_idx = tuple(j_ for j_ in range(k) if (best_smask >> j_) & 1)
        t_idx = tuple(j_ for j_ in range(m) if best_t[j_])
        if swap:
            return best_val, t_idx, s_idx
        return best_val, s_idx, t_idx
    finally:
        free(colsum)
        free(best_t)
