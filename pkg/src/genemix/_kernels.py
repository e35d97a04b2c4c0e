"""Compiled inner loops for the parallel Gibbs sweep.

Every (triplet, iteration) pair owns its own counter-based RNG stream
derived by hashing (seed, tag, iteration, k, j, i) with the splitmix64
finalizer, so sweep results are independent of worker scheduling.  The
njit kernels release the GIL, letting thread workers overlap.

All kernels carry explicit signatures: stream states are uint64 and must
never fall into signed or float paths (lazy dispatch on a python int
would silently promote uint64 arithmetic to float64).

The sweep kernel mirrors the reference updates in ``mixture.py``: the
genotype record weighs only the slot it is allocated to; all other slots
follow the bare urn dynamics.  Frequencies are clamped to
[1e-12, 1 - 1e-12] after sampling.
"""

import math

import numpy as np
from numba import njit, types

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_EPS = 1e-12
_MASK64 = (1 << 64) - 1

# stream namespaces
TAG_INIT = 1
TAG_SWEEP = 2
TAG_REDRAW = 3

_u64 = types.uint64
_i64 = types.int64
_f64 = types.float64
_state_f = types.UniTuple(_u64, 1)


@njit(_u64(_u64), cache=True, nogil=True)
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


@njit(_u64(_u64, _u64, _u64, _u64, _u64, _u64), cache=True, nogil=True)
def _derive_key_nb(seed, tag, t, k, j, i):
    h = _mix64(seed ^ _GOLDEN)
    h = _mix64(h ^ tag)
    h = _mix64(h ^ t)
    h = _mix64(h ^ k)
    h = _mix64(h ^ j)
    return _mix64(h ^ i)


def derive_key(seed: int, tag: int, t: int, k: int, j: int, i: int) -> np.uint64:
    """Collision-resistant 64-bit stream key from the triplet coordinates."""
    return _derive_key_nb(
        U64(int(seed) & _MASK64), U64(int(tag) & _MASK64), U64(int(t) & _MASK64),
        U64(int(k) & _MASK64), U64(int(j) & _MASK64), U64(int(i) & _MASK64),
    )


@njit(types.Tuple((_u64, _f64))(_u64), cache=True, nogil=True)
def _u01(s):
    s = s + _GOLDEN
    u = float(_mix64(s) >> U64(11)) * (0.5 ** 53)
    if u <= 0.0:
        u = 0.5 ** 53
    return s, u


@njit(types.Tuple((_u64, _f64))(_u64), cache=True, nogil=True)
def _normal(s):
    s, u1 = _u01(s)
    s, u2 = _u01(s)
    return s, math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@njit(types.Tuple((_u64, _f64))(_u64, _f64), cache=True, nogil=True)
def _log_gamma_draw(s, a):
    """Log of a Gamma(a, 1) draw (Marsaglia-Tsang; log-space boost for a<1)."""
    boost = 0.0
    if a < 1.0:
        s, u = _u01(s)
        boost = math.log(u) / a
        a = a + 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = 0.0
        v = 0.0
        while True:
            s, x = _normal(s)
            v = 1.0 + c * x
            if v > 0.0:
                break
        v = v * v * v
        s, u = _u01(s)
        if u < 1.0 - 0.0331 * (x * x) * (x * x):
            break
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            break
    return s, math.log(d * v) + boost


@njit(types.Tuple((_u64, _f64))(_u64, _f64, _f64), cache=True, nogil=True)
def _beta_draw(s, a, b):
    """Beta(a, b) draw via two log-space gamma draws, clamped to (0, 1)."""
    s, lg1 = _log_gamma_draw(s, a)
    s, lg2 = _log_gamma_draw(s, b)
    d = lg1 - lg2
    if d >= 0.0:
        x = 1.0 / (1.0 + math.exp(-d))
    else:
        e = math.exp(d)
        x = e / (1.0 + e)
    if x < _EPS:
        x = _EPS
    elif x > 1.0 - _EPS:
        x = 1.0 - _EPS
    return s, x


@njit(_f64(_f64, _f64), cache=True, nogil=True)
def _lbeta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@njit(types.Tuple((_u64, _i64))(_u64, _f64[::1], _i64), cache=True, nogil=True)
def _categorical(s, w, n):
    """Draw an index from n log-weights in w (w is used as scratch)."""
    mx = w[0]
    for i in range(1, n):
        if w[i] > mx:
            mx = w[i]
    tot = 0.0
    for i in range(n):
        w[i] = math.exp(w[i] - mx)
        tot += w[i]
    s, u = _u01(s)
    target = u * tot
    acc = 0.0
    for i in range(n):
        acc += w[i]
        if target <= acc:
            return s, i
    return s, n - 1


@njit(types.void(_f64[::1], _f64[::1], _u64, _f64[::1]), cache=True, nogil=True)
def draw_base_vector(nu1, nu2, key, out):
    """Fill ``out`` with one product-Beta base-measure draw."""
    s = key
    for r in range(out.shape[0]):
        s, x = _beta_draw(s, nu1[r], nu2[r])
        out[r] = x


@njit(
    types.Tuple((_i64, _i64))(
        _f64[::1], _f64[::1], _f64[::1], _f64, _i64,
        _i64[::1], _f64[:, ::1], _i64[::1], _i64, _u64,
    ),
    cache=True,
    nogil=True,
)
def sweep_triplet(n1, nu1, nu2, alpha, z, c, pstar, occ, tau, key):
    """One Gibbs cycle (allocation, M configuration slots, frequencies).

    ``n1`` holds the record's per-locus minor-allele counts as float64.
    ``c``, ``pstar`` and ``occ`` are mutated in place; the updated
    (z, tau) pair is returned.
    """
    M = c.shape[0]
    L = n1.shape[0]
    s = key

    # allocation: record log-likelihood under each distinct vector
    ll = np.empty(tau)
    for l in range(tau):
        acc = 0.0
        for r in range(L):
            p = pstar[l, r]
            acc += n1[r] * math.log(p) + (2.0 - n1[r]) * math.log1p(-p)
        ll[l] = acc
    w = np.empty(M + 1)
    for m in range(M):
        w[m] = ll[c[m]]
    s, z = _categorical(s, w, M)

    # configuration: predictive weight of a fresh label for the data slot
    logq0_data = math.log(alpha)
    for r in range(L):
        logq0_data += _lbeta(n1[r] + nu1[r], 2.0 - n1[r] + nu2[r]) - _lbeta(nu1[r], nu2[r])

    for m in range(M):
        # detach slot m, compacting labels if its label empties
        label = c[m]
        occ[label] -= 1
        if occ[label] == 0:
            last = tau - 1
            if label != last:
                for r in range(L):
                    pstar[label, r] = pstar[last, r]
                occ[label] = occ[last]
                for mm in range(M):
                    if c[mm] == last:
                        c[mm] = label
            occ[last] = 0
            tau = last

        occupied = m == z
        if occupied:
            for l in range(tau):
                acc = math.log(float(occ[l]))
                for r in range(L):
                    p = pstar[l, r]
                    acc += n1[r] * math.log(p) + (2.0 - n1[r]) * math.log1p(-p)
                w[l] = acc
            w[tau] = logq0_data
        else:
            for l in range(tau):
                w[l] = math.log(float(occ[l]))
            w[tau] = math.log(alpha)
        s, choice = _categorical(s, w, tau + 1)

        if choice == tau:
            if occupied:
                for r in range(L):
                    s, x = _beta_draw(s, n1[r] + nu1[r], 2.0 - n1[r] + nu2[r])
                    pstar[tau, r] = x
            else:
                for r in range(L):
                    s, x = _beta_draw(s, nu1[r], nu2[r])
                    pstar[tau, r] = x
            occ[tau] = 1
            tau += 1
        else:
            occ[choice] += 1
        c[m] = choice

    # frequencies: only the allocated slot's label carries data counts
    dl = c[z]
    for l in range(tau):
        for r in range(L):
            a = nu1[r]
            b = nu2[r]
            if l == dl:
                a += n1[r]
                b += 2.0 - n1[r]
            s, x = _beta_draw(s, a, b)
            pstar[l, r] = x

    return z, tau


@njit(
    types.void(
        _f64[:, ::1], _f64[:, ::1], _f64[:, ::1], _f64,
        _i64[::1], _i64[:, ::1], _f64[:, :, ::1], _i64[:, ::1], _i64[::1],
        _i64[::1], _i64, _i64, _i64, _u64,
        _f64[:, ::1], _f64[:, ::1],
    ),
    cache=True,
    nogil=True,
)
def sweep_gene_rows(dosage, nu1, nu2, alpha, z, c, pstar, occ, tau,
                    rows, n0, j, t, seed, s1_out, s2_out):
    """Gibbs cycles for the given rows of one gene, refreshing the G0
    sufficient statistics (sums of log p* and log(1-p*)) in place."""
    L = dosage.shape[1]
    for ridx in range(rows.shape[0]):
        n = rows[ridx]
        if n < n0:
            k = 0
            i = n
        else:
            k = 1
            i = n - n0
        key = _derive_key_nb(seed, U64(TAG_SWEEP), U64(t), U64(k), U64(j), U64(i))
        zz, tt = sweep_triplet(dosage[n], nu1[n], nu2[n], alpha,
                               z[n], c[n], pstar[n], occ[n], tau[n], key)
        z[n] = zz
        tau[n] = tt
        for r in range(L):
            a1 = 0.0
            a2 = 0.0
            for l in range(tt):
                a1 += math.log(pstar[n, l, r])
                a2 += math.log1p(-pstar[n, l, r])
            s1_out[n, r] = a1
            s2_out[n, r] = a2


@njit(types.void(_i64, _i64[::1], _f64[:, ::1], _u64, _f64[::1]), cache=True, nogil=True)
def redraw_record(z, c, pstar, key, n1_out):
    """Redraw the genotype record from its allocated component (Geweke)."""
    s = key
    row = c[z]
    for r in range(n1_out.shape[0]):
        p = pstar[row, r]
        s, u1 = _u01(s)
        s, u2 = _u01(s)
        n1_out[r] = (1.0 if u1 < p else 0.0) + (1.0 if u2 < p else 0.0)


@njit(_f64(_i64[::1], _i64[::1], _i64, _i64), cache=True, nogil=True)
def dhat_labels(l1, l2, k1, k2):
    """Partition divergence max(dbar(C1,C2), dbar(C2,C1)) from label vectors."""
    M = l1.shape[0]
    ct = np.zeros((k1, k2), dtype=np.int64)
    for m in range(M):
        ct[l1[m], l2[m]] += 1
    s12 = 0
    for a in range(k1):
        mx = 0
        for b in range(k2):
            if ct[a, b] > mx:
                mx = ct[a, b]
        s12 += mx
    s21 = 0
    for b in range(k2):
        mx = 0
        for a in range(k1):
            if ct[a, b] > mx:
                mx = ct[a, b]
        s21 += mx
    d12 = 1.0 - s12 / M
    d21 = 1.0 - s21 / M
    return d12 if d12 > d21 else d21


@njit(_i64(_i64[:, ::1], _i64[::1], _f64), cache=True, nogil=True)
def central_index_from_labels(labels, n_blocks, radius):
    """Index of the approximately-central partition in a label matrix.

    ``radius <= 0`` selects the median pairwise divergence as the
    neighborhood radius.  Ties resolve to the smallest index.
    """
    n = labels.shape[0]
    dm = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            d = dhat_labels(labels[a], labels[b], n_blocks[a], n_blocks[b])
            dm[a, b] = d
            dm[b, a] = d
    eps = radius
    if eps <= 0.0:
        n_pairs = n * (n - 1) // 2
        if n_pairs == 0:
            eps = 0.0
        else:
            buf = np.empty(n_pairs)
            idx = 0
            for a in range(n):
                for b in range(a + 1, n):
                    buf[idx] = dm[a, b]
                    idx += 1
            eps = np.median(buf)
    best = 0
    best_count = -1
    for a in range(n):
        count = 0
        for b in range(n):
            if dm[a, b] < eps:
                count += 1
        if count > best_count:
            best_count = count
            best = a
    return best
