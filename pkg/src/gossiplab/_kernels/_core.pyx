# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled gossip step kernels.

Same contract as the pure-Python reference module: identical inputs must give
bit-identical outputs. Float state updates run as C doubles; the exact dyadic
path keeps Python ints for the numerators (they grow to thousands of bits) and
compiles away the loop and indexing overhead around them.
"""

from ..errors import DyadicOverflowError

COMPILED = True


def run_events_float(double[::1] x, long long[::1] pu, long long[::1] pv,
                     const unsigned char[::1] ep, const unsigned char[::1] em,
                     long long[::1] evt, long long k_base, long long chunk_len,
                     double[::1] thr, long long[::1] crossings, Py_ssize_t thr_ptr,
                     long long[::1] grid_ks, double[::1] grid_max,
                     double[::1] grid_min, Py_ssize_t grid_ptr,
                     double hmax, double hmin, bint asym_unequal):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_thr = thr.shape[0]
    cdef Py_ssize_t n_grid = grid_ks.shape[0]
    cdef Py_ssize_t n_evt = evt.shape[0]
    cdef Py_ssize_t e, t
    cdef long long off, k_slot, u, v, end_slot
    cdef double a, b, mid, h, xv
    cdef bint both

    for e in range(n_evt):
        off = evt[e]
        k_slot = k_base + off + 1
        while grid_ptr < n_grid and grid_ks[grid_ptr] < k_slot:
            grid_max[grid_ptr] = hmax
            grid_min[grid_ptr] = hmin
            grid_ptr += 1
        u = pu[off]
        v = pv[off]
        a = x[u]
        b = x[v]
        both = ep[off] and em[off]
        if (not both) and a != b:
            asym_unequal = True
        mid = 0.5 * (a + b)
        if both:
            x[u] = mid
            x[v] = mid
        elif ep[off]:
            x[u] = mid
        else:
            x[v] = mid
        hmax = x[0]
        hmin = x[0]
        for t in range(1, n):
            xv = x[t]
            if xv > hmax:
                hmax = xv
            elif xv < hmin:
                hmin = xv
        h = hmax - hmin
        while thr_ptr < n_thr and h < thr[thr_ptr]:
            crossings[thr_ptr] = k_slot
            thr_ptr += 1
    end_slot = k_base + chunk_len
    while grid_ptr < n_grid and grid_ks[grid_ptr] <= end_slot:
        grid_max[grid_ptr] = hmax
        grid_min[grid_ptr] = hmin
        grid_ptr += 1
    return thr_ptr, grid_ptr, hmax, hmin, asym_unequal


def run_events_dyadic(list nums, object exp, object exp0, object expected_scaled,
                      double[::1] xs,
                      long long[::1] pu, long long[::1] pv,
                      const unsigned char[::1] ep, const unsigned char[::1] em,
                      long long[::1] evt, long long k_base, long long chunk_len,
                      double[::1] thr, long long[::1] crossings, Py_ssize_t thr_ptr,
                      long long[::1] grid_ks, double[::1] grid_max,
                      double[::1] grid_min, signed char[::1] grid_sum,
                      Py_ssize_t grid_ptr,
                      double hmax, double hmin, bint sum_ok, bint asym_unequal,
                      long long exp_cap):
    cdef Py_ssize_t n = len(nums)
    cdef Py_ssize_t n_thr = thr.shape[0]
    cdef Py_ssize_t n_grid = grid_ks.shape[0]
    cdef Py_ssize_t n_evt = evt.shape[0]
    cdef Py_ssize_t e, t
    cdef long long off, k_slot, u, v, end_slot
    cdef long e_cur = exp, e_floor = exp0, shift
    cdef double fa, fb, fmid, h, xv
    cdef bint both
    cdef object a, b, mid, acc, total
    cdef object expected = expected_scaled

    for e in range(n_evt):
        off = evt[e]
        k_slot = k_base + off + 1
        while grid_ptr < n_grid and grid_ks[grid_ptr] < k_slot:
            grid_max[grid_ptr] = hmax
            grid_min[grid_ptr] = hmin
            grid_sum[grid_ptr] = 1 if sum_ok else 0
            grid_ptr += 1
        u = pu[off]
        v = pv[off]
        a = nums[u]
        b = nums[v]
        both = ep[off] and em[off]
        if (not both) and a != b:
            asym_unequal = True
        mid = a + b
        for t in range(n):
            nums[t] = nums[t] << 1
        e_cur += 1
        expected = expected << 1
        if both:
            nums[u] = mid
            nums[v] = mid
        elif ep[off]:
            nums[u] = mid
        else:
            nums[v] = mid
        acc = 0
        for t in range(n):
            acc = acc | nums[t]
        if acc and not (acc & 1) and e_cur > e_floor:
            shift = (acc & -acc).bit_length() - 1
            if shift > e_cur - e_floor:
                shift = e_cur - e_floor
            for t in range(n):
                nums[t] = nums[t] >> shift
            e_cur -= shift
            expected = expected >> shift
        if e_cur > exp_cap:
            raise DyadicOverflowError(
                f"state denominator exponent {e_cur} exceeds cap {exp_cap}; use float mode")
        if sum_ok:
            total = 0
            for t in range(n):
                total = total + nums[t]
            if total != expected:
                sum_ok = False
        fa = xs[u]
        fb = xs[v]
        fmid = 0.5 * (fa + fb)
        if both:
            xs[u] = fmid
            xs[v] = fmid
        elif ep[off]:
            xs[u] = fmid
        else:
            xs[v] = fmid
        hmax = xs[0]
        hmin = xs[0]
        for t in range(1, n):
            xv = xs[t]
            if xv > hmax:
                hmax = xv
            elif xv < hmin:
                hmin = xv
        h = hmax - hmin
        while thr_ptr < n_thr and h < thr[thr_ptr]:
            crossings[thr_ptr] = k_slot
            thr_ptr += 1
    end_slot = k_base + chunk_len
    while grid_ptr < n_grid and grid_ks[grid_ptr] <= end_slot:
        grid_max[grid_ptr] = hmax
        grid_min[grid_ptr] = hmin
        grid_sum[grid_ptr] = 1 if sum_ok else 0
        grid_ptr += 1
    return (e_cur, expected, thr_ptr, grid_ptr,
            hmax, hmin, sum_ok, asym_unequal)
