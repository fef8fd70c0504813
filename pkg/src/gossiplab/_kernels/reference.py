"""Pure-Python gossip step kernels.

Semantics reference for the compiled kernel: both consume the same pre-drawn
pair/flag arrays and must produce bit-identical results. The driver hands the
kernel only the step offsets where something can happen (valid pair, at least
one direction succeeded); spread bookkeeping between events is constant, so
grid points and threshold crossings are flushed lazily.

Crossings are strict: slot k is recorded for threshold t the first time
spread(k) < t. Thresholds must be strictly descending.
"""

from ..errors import DyadicOverflowError

COMPILED = False


def run_events_float(x, pu, pv, ep, em, evt, k_base, chunk_len,
                     thr, crossings, thr_ptr,
                     grid_ks, grid_max, grid_min, grid_ptr,
                     hmax, hmin, asym_unequal):
    n = len(x)
    n_thr = len(thr)
    n_grid = len(grid_ks)
    for off in evt.tolist():
        k_slot = k_base + off + 1
        while grid_ptr < n_grid and grid_ks[grid_ptr] < k_slot:
            grid_max[grid_ptr] = hmax
            grid_min[grid_ptr] = hmin
            grid_ptr += 1
        u = pu[off]
        v = pv[off]
        a = x[u]
        b = x[v]
        both = bool(ep[off]) and bool(em[off])
        if not both and a != b:
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


def run_events_dyadic(nums, exp, exp0, expected_scaled, xs,
                      pu, pv, ep, em, evt, k_base, chunk_len,
                      thr, crossings, thr_ptr,
                      grid_ks, grid_max, grid_min, grid_sum, grid_ptr,
                      hmax, hmin, sum_ok, asym_unequal, exp_cap):
    # nums: list of Python ints over shared denominator 2^exp, mutated in place.
    # xs: float shadow of the state, used only for spread bookkeeping.
    # expected_scaled: initial numerator sum rescaled to the current exponent;
    # the exponent never drops below exp0 so the rescaling stays integral.
    n = len(nums)
    n_thr = len(thr)
    n_grid = len(grid_ks)
    for off in evt.tolist():
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
        both = bool(ep[off]) and bool(em[off])
        if not both and a != b:
            asym_unequal = True
        mid = a + b
        for t in range(n):
            nums[t] <<= 1
        exp += 1
        expected_scaled <<= 1
        if both:
            nums[u] = mid
            nums[v] = mid
        elif ep[off]:
            nums[u] = mid
        else:
            nums[v] = mid
        acc = 0
        for t in range(n):
            acc |= nums[t]
        if acc and not (acc & 1) and exp > exp0:
            shift = ((acc & -acc).bit_length() - 1)
            if shift > exp - exp0:
                shift = exp - exp0
            for t in range(n):
                nums[t] >>= shift
            exp -= shift
            expected_scaled >>= shift
        if exp > exp_cap:
            raise DyadicOverflowError(
                f"state denominator exponent {exp} exceeds cap {exp_cap}; use float mode")
        if sum_ok:
            total = 0
            for t in range(n):
                total += nums[t]
            if total != expected_scaled:
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
    return (exp, expected_scaled, thr_ptr, grid_ptr,
            hmax, hmin, sum_ok, asym_unequal)
