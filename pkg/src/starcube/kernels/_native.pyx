# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled group-by reduction kernels: single pass, dense or hashed accumulation."""

from cython.operator cimport dereference as deref
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

import numpy as np

cimport numpy as cnp

cnp.import_array()

# Dense accumulators above this key space would waste memory; hash instead.
DEF DENSE_LIMIT = 4194304


cdef void _dense_sum(cnp.int64_t[::1] k, cnp.int64_t[::1] v,
                     cnp.int64_t[::1] sums, cnp.int64_t[::1] counts) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(k.shape[0]):
        sums[k[i]] += v[i]
        counts[k[i]] += 1


cdef void _dense_sum2(cnp.int64_t[::1] k, cnp.int64_t[::1] va, cnp.int64_t[::1] vb,
                      cnp.int64_t[::1] sums_a, cnp.int64_t[::1] sums_b,
                      cnp.uint8_t[::1] seen) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(k.shape[0]):
        sums_a[k[i]] += va[i]
        sums_b[k[i]] += vb[i]
        seen[k[i]] = 1


cdef _collect(vector[long long]& uk, vector[long long]& ua, vector[long long]& ub):
    # Move hash-accumulated groups to arrays sorted by key (matches the numpy path).
    cdef Py_ssize_t m = uk.size()
    keys_arr = np.empty(m, dtype=np.int64)
    a_arr = np.empty(m, dtype=np.int64)
    b_arr = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] kv = keys_arr
    cdef cnp.int64_t[::1] av = a_arr
    cdef cnp.int64_t[::1] bv = b_arr
    cdef Py_ssize_t i
    for i in range(m):
        kv[i] = uk[i]
        av[i] = ua[i]
        bv[i] = ub[i]
    order = np.argsort(keys_arr, kind="stable")
    return keys_arr[order], a_arr[order], b_arr[order]


def sum_by_key(keys, values, key_bound):
    """Aggregate ``values`` by int64 ``keys``; returns (unique keys asc, sums, counts)."""
    cdef cnp.int64_t[::1] k = np.ascontiguousarray(keys, dtype=np.int64)
    cdef cnp.int64_t[::1] v = np.ascontiguousarray(values, dtype=np.int64)
    cdef Py_ssize_t n = k.shape[0]
    cdef long long bound = key_bound
    cdef Py_ssize_t i, pos
    cdef long long key
    cdef unordered_map[long long, Py_ssize_t] slot
    cdef unordered_map[long long, Py_ssize_t].iterator it
    cdef vector[long long] uk, us, uc

    if n == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()

    if 0 < bound <= DENSE_LIMIT:
        sums_d = np.zeros(bound, dtype=np.int64)
        counts_d = np.zeros(bound, dtype=np.int64)
        _dense_sum(k, v, sums_d, counts_d)
        present = np.flatnonzero(counts_d)
        return present.astype(np.int64), sums_d[present], counts_d[present]

    slot.reserve(1024)
    for i in range(n):
        key = k[i]
        it = slot.find(key)
        if it == slot.end():
            pos = <Py_ssize_t>uk.size()
            slot[key] = pos
            uk.push_back(key)
            us.push_back(v[i])
            uc.push_back(1)
        else:
            pos = deref(it).second
            us[pos] += v[i]
            uc[pos] += 1

    return _collect(uk, us, uc)


def sum2_by_key(keys, values_a, values_b, key_bound):
    """Aggregate two int64 value columns by the same keys (cell re-aggregation)."""
    cdef cnp.int64_t[::1] k = np.ascontiguousarray(keys, dtype=np.int64)
    cdef cnp.int64_t[::1] va = np.ascontiguousarray(values_a, dtype=np.int64)
    cdef cnp.int64_t[::1] vb = np.ascontiguousarray(values_b, dtype=np.int64)
    cdef Py_ssize_t n = k.shape[0]
    cdef long long bound = key_bound
    cdef Py_ssize_t i, pos
    cdef long long key
    cdef unordered_map[long long, Py_ssize_t] slot
    cdef unordered_map[long long, Py_ssize_t].iterator it
    cdef vector[long long] uk, ua, ub

    if n == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()

    if 0 < bound <= DENSE_LIMIT:
        sums_a = np.zeros(bound, dtype=np.int64)
        sums_b = np.zeros(bound, dtype=np.int64)
        seen = np.zeros(bound, dtype=np.uint8)
        _dense_sum2(k, va, vb, sums_a, sums_b, seen)
        present = np.flatnonzero(seen)
        return present.astype(np.int64), sums_a[present], sums_b[present]

    slot.reserve(1024)
    for i in range(n):
        key = k[i]
        it = slot.find(key)
        if it == slot.end():
            pos = <Py_ssize_t>uk.size()
            slot[key] = pos
            uk.push_back(key)
            ua.push_back(va[i])
            ub.push_back(vb[i])
        else:
            pos = deref(it).second
            ua[pos] += va[i]
            ub[pos] += vb[i]

    return _collect(uk, ua, ub)
