"""The fifteen SP 800-22 statistical tests.

Each test takes a BitStream (or a plain 0/1 array) and returns a
:class:`TestResult`.  Multi-p-value tests (Cumulative Sums, Serial,
Non Overlapping Template Matching, Random Excursions and its Variant)
report every p-value; the scalar ``p_value`` used for pass/fail is the
familywise-combined minimum 1 - (1 - min p)^k, which keeps the per-test
false-fail rate at the threshold, and a KS aggregate over the set is
attached to ``params`` for reference.

Class probabilities that the reference document tabulates in rounded form
(longest-run bins, overlapping-template bins, rank distribution) are
computed exactly here for the actual block lengths in use; the tests
validate them against brute-force enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .special import erfc, igamc, kolmogorov_sf, normal_cdf


@dataclass(frozen=True)
class TestResult:
    name: str
    p_values: tuple
    p_value: float
    passed: bool
    params: dict = field(default_factory=dict)
    note: str = ""
    applicable: bool = True


def _bits_of(bits) -> np.ndarray:
    if hasattr(bits, "to_bits"):
        return bits.to_bits()
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValueError("bit values must be 0 or 1")
    return arr


def _require_length(n: int, minimum: int, name: str):
    if n < minimum:
        raise ValueError(f"{name} requires at least {minimum} bits, got {n}")


def _ks_p(p_values) -> float:
    """One-sample KS against Uniform[0,1], asymptotic distribution."""
    x = np.sort(np.asarray(p_values, dtype=float))
    n = x.size
    if n == 0:
        return 1.0
    grid = np.arange(1, n + 1) / n
    d = max(float(np.max(grid - x)), float(np.max(x - (grid - 1.0 / n))))
    return kolmogorov_sf(math.sqrt(n) * d)


def _finish(name, p_values, threshold, params, note="", applicable=True):
    p_values = tuple(float(p) for p in p_values)
    if len(p_values) == 1:
        scalar = p_values[0]
    else:
        p_min = min(p_values)
        # Familywise p of the minimum under independence; conservative
        # under the positive dependence these sub-statistics exhibit.
        scalar = -math.expm1(len(p_values) * math.log1p(-min(p_min, 1.0 - 1e-16)))
        params = dict(params)
        params["ks_p"] = _ks_p(p_values)
        params["min_p"] = p_min
    scalar = min(max(scalar, 0.0), 1.0)
    return TestResult(
        name=name,
        p_values=p_values,
        p_value=scalar,
        passed=bool(scalar >= threshold),
        params=params,
        note=note,
        applicable=applicable,
    )


def _not_applicable(name, params, note, threshold, fails=False):
    return TestResult(
        name=name,
        p_values=(0.0,) if fails else (),
        p_value=0.0 if fails else float("nan"),
        passed=not fails,
        params=params,
        note=note,
        applicable=False,
    )


def _rolling_values(bits: np.ndarray, m: int, cyclic: bool = False) -> np.ndarray:
    """Overlapping m-bit window values (MSB first) as unsigned integers."""
    ext = np.concatenate([bits, bits[: m - 1]]) if cyclic else bits
    n_out = ext.size - m + 1
    v = np.zeros(n_out, dtype=np.uint32 if m <= 32 else np.uint64)
    for i in range(m):
        v = (v << 1) | ext[i : i + n_out]
    return v


# ---------------------------------------------------------------------------
# 1. Frequency (monobit)
# ---------------------------------------------------------------------------

def frequency_test(bits, threshold: float = 0.01, min_n: int = 100) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, min_n, "Frequency")
    s_obs = abs(2.0 * int(b.sum()) - n) / math.sqrt(n)
    p = erfc(s_obs / math.sqrt(2.0))
    return _finish("Frequency", [p], threshold, {"n": n, "s_obs": s_obs})


# ---------------------------------------------------------------------------
# 2. Block Frequency
# ---------------------------------------------------------------------------

def block_frequency_test(bits, block_m: int = 128, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, 100, "Block Frequency")
    n_blocks = n // block_m
    if n_blocks < 1:
        raise ValueError(f"Block Frequency requires at least {block_m} bits, got {n}")
    pi = b[: n_blocks * block_m].reshape(n_blocks, block_m).mean(axis=1)
    chi2 = 4.0 * block_m * float(np.sum((pi - 0.5) ** 2))
    p = igamc(n_blocks / 2.0, chi2 / 2.0)
    return _finish(
        "Block Frequency", [p], threshold, {"M": block_m, "N": n_blocks, "chi2": chi2}
    )


# ---------------------------------------------------------------------------
# 3. Runs
# ---------------------------------------------------------------------------

def runs_test(bits, threshold: float = 0.01, min_n: int = 100) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, min_n, "Runs")
    pi = float(b.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return _not_applicable(
            "Runs",
            {"pi": pi, "n": n},
            "not applicable: frequency pre-test failed",
            threshold,
            fails=True,
        )
    v_obs = 1 + int(np.count_nonzero(np.diff(b)))
    num = abs(v_obs - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    p = erfc(num / den)
    return _finish("Runs", [p], threshold, {"pi": pi, "V_obs": v_obs, "n": n})


# ---------------------------------------------------------------------------
# 4. Longest Runs of ones
# ---------------------------------------------------------------------------

def _no_run_probability(n: int, run: int) -> float:
    """P(no run of `run` consecutive ones in n fair bits), exact recurrence."""
    if run <= 0:
        return 0.0
    q = [1.0] * min(run, n + 1)
    if n < run:
        return 1.0
    weights = [2.0 ** -(i + 1) for i in range(run)]
    history = list(q)
    for _ in range(run, n + 1):
        value = sum(w * history[-1 - i] for i, w in enumerate(weights))
        history.append(value)
        if len(history) > run + 1:
            history.pop(0)
    return history[-1]


def _longest_run_bin_probs(block_m: int, lo: int, hi: int) -> np.ndarray:
    probs = []
    cdf_prev = 0.0
    for length in range(lo, hi):
        cdf = _no_run_probability(block_m, length + 1)  # P(longest <= length)
        probs.append(cdf - cdf_prev if probs else cdf)
        cdf_prev = cdf
    probs.append(1.0 - cdf_prev)
    return np.array(probs)


def longest_runs_test(bits, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, 128, "Longest Runs")
    if n >= 750_000:
        block_m, lo, hi = 10_000, 10, 16
    elif n >= 6272:
        block_m, lo, hi = 128, 4, 9
    else:
        block_m, lo, hi = 8, 1, 4
    n_blocks = n // block_m
    blocks = b[: n_blocks * block_m].reshape(n_blocks, block_m)
    padded = np.zeros((n_blocks, block_m + 2), dtype=np.int8)
    padded[:, 1:-1] = blocks
    flat = padded.ravel()
    delta = np.diff(flat)
    starts = np.flatnonzero(delta == 1)
    ends = np.flatnonzero(delta == -1)
    longest = np.zeros(n_blocks, dtype=np.int64)
    np.maximum.at(longest, starts // (block_m + 2), ends - starts)
    classes = np.clip(longest, lo, hi) - lo
    nu = np.bincount(classes, minlength=hi - lo + 1)
    pi = _longest_run_bin_probs(block_m, lo, hi)
    expected = n_blocks * pi
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    k = hi - lo  # degrees of freedom
    p = igamc(k / 2.0, chi2 / 2.0)
    return _finish(
        "Longest Runs",
        [p],
        threshold,
        {"M": block_m, "N": n_blocks, "chi2": chi2, "classes": f"{lo}..{hi}"},
    )


# ---------------------------------------------------------------------------
# 5. Rank of binary matrices
# ---------------------------------------------------------------------------

def gf2_rank_batch(rows: np.ndarray) -> np.ndarray:
    """Ranks over GF(2) of many bit-packed square matrices at once.

    rows: (n_matrices, n_rows) unsigned ints, row r of matrix k packed
    LSB-first in rows[k, r].
    """
    rows = rows.astype(np.uint64).copy()
    n_mat, n_rows = rows.shape
    rank = np.zeros(n_mat, dtype=np.int64)
    row_index = np.arange(n_rows)
    for col in range(n_rows):
        has_bit = ((rows >> np.uint64(col)) & np.uint64(1)).astype(bool)
        eligible = has_bit & (row_index[np.newaxis, :] >= rank[:, np.newaxis])
        found = eligible.any(axis=1)
        mats = np.flatnonzero(found)
        if mats.size == 0:
            continue
        pivot = np.argmax(eligible[mats], axis=1)
        r = rank[mats]
        tmp = rows[mats, r].copy()
        rows[mats, r] = rows[mats, pivot]
        rows[mats, pivot] = tmp
        pivot_rows = rows[mats, r]
        has = ((rows[mats] >> np.uint64(col)) & np.uint64(1)).astype(bool)
        has[np.arange(mats.size), r] = False
        rows[mats] ^= has * pivot_rows[:, np.newaxis]
        rank[mats] += 1
    return rank


def gf2_rank_reference(matrix: np.ndarray) -> int:
    """Plain row-reduction rank of one 0/1 matrix (test oracle companion)."""
    m = matrix.astype(np.uint8).copy()
    n_rows, n_cols = m.shape
    rank = 0
    for col in range(n_cols):
        pivot = None
        for r in range(rank, n_rows):
            if m[r, col]:
                pivot = r
                break
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(n_rows):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def full_rank_probability(m: int, q: int, r: int) -> float:
    """P(rank = r) for a random m x q matrix over GF(2)."""
    log_p = (r * (q + m - r) - m * q) * math.log(2.0)
    for i in range(r):
        log_p += math.log1p(-(2.0 ** (i - q)))
        log_p += math.log1p(-(2.0 ** (i - m)))
        log_p -= math.log1p(-(2.0 ** (i - r)))
    return math.exp(log_p)


def rank_test(bits, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, 38 * 1024, "Rank")
    n_mat = n // 1024
    mats = b[: n_mat * 1024].reshape(n_mat, 32, 32)
    packed = np.packbits(mats, axis=2, bitorder="little")
    rows = np.ascontiguousarray(packed).view("<u4").reshape(n_mat, 32)
    ranks = gf2_rank_batch(rows)
    p_full = full_rank_probability(32, 32, 32)
    p_minus1 = full_rank_probability(32, 32, 31)
    pi = np.array([p_full, p_minus1, 1.0 - p_full - p_minus1])
    nu = np.array(
        [
            int(np.count_nonzero(ranks == 32)),
            int(np.count_nonzero(ranks == 31)),
            int(np.count_nonzero(ranks <= 30)),
        ]
    )
    expected = n_mat * pi
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    p = igamc(1.0, chi2 / 2.0)
    return _finish("Rank", [p], threshold, {"N": n_mat, "chi2": chi2})


# ---------------------------------------------------------------------------
# 6. Discrete Fourier Transform (spectral)
# ---------------------------------------------------------------------------

def fft_test(bits, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, 1000, "FFT")
    x = 2.0 * b.astype(np.float64) - 1.0
    moduli = np.abs(np.fft.rfft(x))[: n // 2]
    t_threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    n0 = 0.95 * n / 2.0
    n1 = int(np.count_nonzero(moduli < t_threshold))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    p = erfc(abs(d) / math.sqrt(2.0))
    return _finish(
        "FFT", [p], threshold, {"N0": n0, "N1": n1, "T": t_threshold, "d": d}
    )


# ---------------------------------------------------------------------------
# 7. Non-overlapping Template Matching
# ---------------------------------------------------------------------------

def aperiodic_templates(m: int) -> list:
    """All length-m binary templates with no self-overlap (unbordered)."""
    out = []
    for value in range(2**m):
        tpl = [(value >> (m - 1 - i)) & 1 for i in range(m)]
        if all(tpl[: m - s] != tpl[s:] for s in range(1, m)):
            out.append(tuple(tpl))
    return out


def _greedy_nonoverlap_count(positions: np.ndarray, m: int) -> int:
    if positions.size == 0:
        return 0
    if positions.size == 1 or np.all(np.diff(positions) >= m):
        return int(positions.size)
    count = 0
    cursor = -m
    for pos in positions:
        if pos >= cursor + m:
            count += 1
            cursor = int(pos)
    return count


def non_overlapping_template_test(
    bits, m: int = 9, n_blocks: int = 8, threshold: float = 0.01
) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    block_m = n // n_blocks
    if block_m - m + 1 < 2**m:
        raise ValueError(
            "Non Overlapping Template Matching requires at least "
            f"{n_blocks * (2**m + m - 1)} bits, got {n}"
        )
    used = n_blocks * block_m
    v = _rolling_values(b[:used], m)
    k_pos = np.arange(used - m + 1)
    valid = (k_pos % block_m) <= (block_m - m)
    positions = k_pos[valid]
    values = v[valid]
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    sorted_pos = positions[order]

    mu = (block_m - m + 1) / 2.0**m
    sigma2 = block_m * (2.0**-m - (2.0 * m - 1.0) * 2.0 ** (-2.0 * m))
    templates = aperiodic_templates(m)
    template_values = [
        sum(bit << (m - 1 - i) for i, bit in enumerate(tpl)) for tpl in templates
    ]
    block_edges = np.arange(n_blocks + 1) * block_m
    p_values = []
    for t_val in template_values:
        lo = np.searchsorted(sorted_vals, t_val, side="left")
        hi = np.searchsorted(sorted_vals, t_val, side="right")
        pos = sorted_pos[lo:hi]  # ascending within equal values (stable sort)
        cuts = np.searchsorted(pos, block_edges)
        chi2 = 0.0
        for blk in range(n_blocks):
            w = _greedy_nonoverlap_count(pos[cuts[blk] : cuts[blk + 1]], m)
            chi2 += (w - mu) ** 2 / sigma2
        p_values.append(igamc(n_blocks / 2.0, chi2 / 2.0))
    return _finish(
        "Non Overlapping Template Matching",
        p_values,
        threshold,
        {"m": m, "N": n_blocks, "M": block_m, "mu": mu, "sigma2": sigma2},
    )


# ---------------------------------------------------------------------------
# 8. Overlapping Template Matching
# ---------------------------------------------------------------------------

def overlapping_count_probs(block_m: int, m: int, k_max: int) -> np.ndarray:
    """Exact distribution of the overlapping all-ones count in a block.

    Transfer-matrix DP over (trailing-ones run capped at m, count capped at
    k_max); returns P(count = 0), .., P(count >= k_max).
    """
    state = np.zeros((m + 1, k_max + 1))
    state[0, 0] = 1.0
    for _ in range(block_m):
        nxt = np.zeros_like(state)
        nxt[0] += 0.5 * state.sum(axis=0)  # next bit is 0
        nxt[1 : m] += 0.5 * state[0 : m - 1]  # extend a short run
        occurred = 0.5 * (state[m - 1] + state[m])  # run reaches/stays at m
        nxt[m, 1:] += occurred[:-1]
        nxt[m, k_max] += occurred[k_max]
        state = nxt
    return state.sum(axis=0)


def overlapping_template_test(
    bits, m: int = 9, block_m: int = 1032, threshold: float = 0.01
) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    if n < block_m:
        raise ValueError(
            f"Overlapping Template Matching requires at least {block_m} bits, got {n}"
        )
    k_max = 5
    n_blocks = n // block_m
    blocks = b[: n_blocks * block_m].reshape(n_blocks, block_m)
    csum = np.zeros((n_blocks, block_m + 1), dtype=np.int64)
    np.cumsum(blocks, axis=1, out=csum[:, 1:])
    window_sums = csum[:, m:] - csum[:, :-m]
    counts = np.minimum((window_sums == m).sum(axis=1), k_max)
    nu = np.bincount(counts, minlength=k_max + 1)
    pi = overlapping_count_probs(block_m, m, k_max)
    expected = n_blocks * pi
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    p = igamc(k_max / 2.0, chi2 / 2.0)
    return _finish(
        "Overlapping Template Matching",
        [p],
        threshold,
        {"m": m, "M": block_m, "N": n_blocks, "chi2": chi2},
    )


# ---------------------------------------------------------------------------
# 9. Maurer's Universal
# ---------------------------------------------------------------------------

_UNIVERSAL_TABLE = {
    6: (5.2177052, 2.954),
    7: (6.1962507, 3.125),
    8: (7.1836656, 3.238),
    9: (8.1764248, 3.311),
    10: (9.1723243, 3.356),
    11: (10.170032, 3.384),
    12: (11.168765, 3.401),
    13: (12.168070, 3.410),
    14: (13.167693, 3.416),
    15: (14.167488, 3.419),
    16: (15.167379, 3.421),
}

_UNIVERSAL_THRESHOLDS = [
    (1_059_061_760, 16),
    (496_435_200, 15),
    (231_669_760, 14),
    (107_560_960, 13),
    (49_643_520, 12),
    (22_753_280, 11),
    (10_342_400, 10),
    (4_654_080, 9),
    (2_068_480, 8),
    (904_960, 7),
    (387_840, 6),
]


def universal_test(bits, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, 387_840, "Universal")
    length = next(l for bound, l in _UNIVERSAL_THRESHOLDS if n >= bound)
    q = 10 * 2**length
    k = n // length - q
    blocks = b[: (q + k) * length].reshape(q + k, length)
    weights = (1 << np.arange(length - 1, -1, -1)).astype(np.int64)
    vals = blocks @ weights
    total = 0.0
    order = np.argsort(vals, kind="stable")
    sorted_vals = vals[order]
    boundaries = np.searchsorted(sorted_vals, np.arange(2**length + 1))
    for value in range(2**length):
        pos = order[boundaries[value] : boundaries[value + 1]]
        if pos.size == 0:
            continue
        pos1 = pos + 1  # 1-based block indices, virtual previous at 0
        gaps = np.diff(np.concatenate([[0], pos1]))
        in_test = pos1 > q
        if np.any(in_test):
            total += float(np.sum(np.log2(gaps[in_test])))
    fn = total / k
    expected, variance = _UNIVERSAL_TABLE[length]
    c = 0.7 - 0.8 / length + (4.0 + 32.0 / length) * k ** (-3.0 / length) / 15.0
    sigma = c * math.sqrt(variance / k)
    p = erfc(abs(fn - expected) / (math.sqrt(2.0) * sigma))
    return _finish(
        "Universal", [p], threshold, {"L": length, "Q": q, "K": k, "fn": fn}
    )


# ---------------------------------------------------------------------------
# 10. Linear Complexity
# ---------------------------------------------------------------------------

def berlekamp_massey(bits) -> int:
    """Linear complexity of a bit sequence (reference implementation)."""
    s = [int(x) & 1 for x in _bits_of(bits)]
    n = len(s)
    c = [0] * n
    b = [0] * n
    if n == 0:
        return 0
    c[0] = b[0] = 1
    length = 0
    m = -1
    for i in range(n):
        d = s[i]
        for j in range(1, length + 1):
            d ^= c[j] & s[i - j]
        if d:
            t = c.copy()
            shift = i - m
            for j in range(n - shift):
                c[j + shift] ^= b[j]
            if 2 * length <= i:
                length = i + 1 - length
                b = t
                m = i
    return length


def linear_complexity_batch(blocks: np.ndarray) -> np.ndarray:
    """Berlekamp-Massey linear complexity of many equal-length blocks.

    Word-packed and vectorized across blocks: the connection polynomial C
    and the pre-shifted correction polynomial B << (n - m) live in uint64
    words; the per-step discrepancy is a masked parity against a shared
    right-shifted window of the reversed sequence.
    """
    blocks = np.asarray(blocks, dtype=np.uint8)
    n_blocks, m_len = blocks.shape
    n_words = m_len // 64 + 1
    rev = np.packbits(blocks[:, ::-1], axis=1, bitorder="little")
    padded = np.zeros((n_blocks, (2 * n_words + 2) * 8), dtype=np.uint8)
    padded[:, : rev.shape[1]] = rev
    r_words = np.ascontiguousarray(padded).view("<u8")

    c_poly = np.zeros((n_blocks, n_words), dtype=np.uint64)
    bs_poly = np.zeros((n_blocks, n_words), dtype=np.uint64)
    c_poly[:, 0] = 1
    bs_poly[:, 0] = 1
    lengths = np.zeros(n_blocks, dtype=np.int64)
    one = np.uint64(1)
    s63 = np.uint64(63)
    for n in range(m_len):
        # bs_poly tracks B << (n - m); m starts at -1 so shift first.
        carry = bs_poly[:, :-1] >> s63
        bs_poly[:, 1:] = (bs_poly[:, 1:] << one) | carry
        bs_poly[:, 0] <<= one
        shift = m_len - 1 - n
        q, r = divmod(shift, 64)
        if r == 0:
            window = r_words[:, q : q + n_words]
        else:
            window = (r_words[:, q : q + n_words] >> np.uint64(r)) | (
                r_words[:, q + 1 : q + 1 + n_words] << np.uint64(64 - r)
            )
        d = (np.bitwise_count(c_poly & window).sum(axis=1) & 1).astype(bool)
        promote = d & (2 * lengths <= n)
        if promote.any():
            stash = c_poly[promote].copy()
        c_poly[d] ^= bs_poly[d]
        if promote.any():
            bs_poly[promote] = stash
            lengths[promote] = n + 1 - lengths[promote]
    return lengths


_LINEAR_COMPLEXITY_PI = np.array(
    [0.010417, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833]
)


def linear_complexity_test(bits, block_m: int = 500, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    if n < block_m:
        raise ValueError(
            f"Linear Complexity requires at least {block_m} bits, got {n}"
        )
    n_blocks = n // block_m
    blocks = b[: n_blocks * block_m].reshape(n_blocks, block_m)
    complexities = linear_complexity_batch(blocks)
    mu = (
        block_m / 2.0
        + (9.0 + (-1.0) ** (block_m + 1)) / 36.0
        - (block_m / 3.0 + 2.0 / 9.0) / 2.0**block_m
    )
    t_stat = ((-1.0) ** block_m) * (complexities - mu) + 2.0 / 9.0
    edges = np.array([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5])
    nu = np.bincount(np.searchsorted(edges, t_stat, side="left"), minlength=7)
    expected = n_blocks * _LINEAR_COMPLEXITY_PI
    chi2 = float(np.sum((nu - expected) ** 2 / expected))
    p = igamc(3.0, chi2 / 2.0)
    return _finish(
        "Linear Complexity",
        [p],
        threshold,
        {"M": block_m, "N": n_blocks, "chi2": chi2, "mean_L": float(complexities.mean())},
    )


# ---------------------------------------------------------------------------
# 11. Serial
# ---------------------------------------------------------------------------

def _psi_squared(b: np.ndarray, m: int) -> float:
    if m == 0:
        return 0.0
    n = b.size
    counts = np.bincount(_rolling_values(b, m, cyclic=True), minlength=2**m)
    return float(2.0**m / n * np.sum(counts.astype(np.float64) ** 2) - n)


def serial_test(bits, m: int = 16, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    if m < 2:
        raise ValueError("Serial needs m >= 2")
    _require_length(n, 2**m, "Serial")
    psi_m = _psi_squared(b, m)
    psi_m1 = _psi_squared(b, m - 1)
    psi_m2 = _psi_squared(b, m - 2)
    delta1 = psi_m - psi_m1
    delta2 = psi_m - 2.0 * psi_m1 + psi_m2
    p1 = igamc(2.0 ** (m - 2), delta1 / 2.0)
    p2 = igamc(2.0 ** (m - 3), delta2 / 2.0)
    return _finish(
        "Serial", [p1, p2], threshold, {"m": m, "del1": delta1, "del2": delta2}
    )


# ---------------------------------------------------------------------------
# 12. Approximate Entropy
# ---------------------------------------------------------------------------

def _phi(b: np.ndarray, m: int) -> float:
    if m == 0:
        return 0.0
    n = b.size
    counts = np.bincount(_rolling_values(b, m, cyclic=True), minlength=2**m)
    nz = counts[counts > 0].astype(np.float64)
    return float(np.sum(nz / n * np.log(nz / n)))


def approximate_entropy_test(bits, m: int = 10, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, 2**m, "Approximate Entropy")
    ap_en = _phi(b, m) - _phi(b, m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - ap_en)
    p = igamc(2.0 ** (m - 1), chi2 / 2.0)
    return _finish(
        "Approximate Entropy", [p], threshold, {"m": m, "ApEn": ap_en, "chi2": chi2}
    )


# ---------------------------------------------------------------------------
# 13. Cumulative Sums
# ---------------------------------------------------------------------------

def _cusum_p(n: int, z: float) -> float:
    # Summation bounds follow the reference convention exactly (integer
    # truncation toward zero); the boundary terms matter for small n.
    if z <= 0.0:
        return 1.0
    sqrt_n = math.sqrt(n)
    ratio = n / z
    total = 1.0
    k_hi = int((ratio - 1.0) / 4.0)
    for k in range(int((-ratio + 1.0) / 4.0), k_hi + 1):
        total -= normal_cdf((4.0 * k + 1.0) * z / sqrt_n) - normal_cdf(
            (4.0 * k - 1.0) * z / sqrt_n
        )
    for k in range(int((-ratio - 3.0) / 4.0), k_hi + 1):
        total += normal_cdf((4.0 * k + 3.0) * z / sqrt_n) - normal_cdf(
            (4.0 * k + 1.0) * z / sqrt_n
        )
    return min(max(total, 0.0), 1.0)


def cumulative_sums_test(bits, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    n = b.size
    _require_length(n, 100, "Cumulative Sums")
    x = 2.0 * b.astype(np.int64) - 1
    p_values = []
    for direction in ("forward", "backward"):
        series = x if direction == "forward" else x[::-1]
        z = float(np.max(np.abs(np.cumsum(series))))
        p_values.append(_cusum_p(n, z))
    return _finish("Cumulative Sums", p_values, threshold, {"n": n})


# ---------------------------------------------------------------------------
# 14/15. Random Excursions and Variant
# ---------------------------------------------------------------------------

def _random_walk(b: np.ndarray):
    s = np.cumsum(2 * b.astype(np.int64) - 1)
    if s[-1] != 0:
        walk = np.concatenate([[0], s, [0]])
    else:
        walk = np.concatenate([[0], s])
    zero_pos = np.flatnonzero(walk == 0)
    return walk, zero_pos, int(zero_pos.size - 1)


def _excursion_state_pi(x: int) -> np.ndarray:
    a = 1.0 / (2.0 * abs(x))
    b = 1.0 - a
    pi = [b]
    for k in range(1, 5):
        pi.append(a * a * b ** (k - 1))
    pi.append(a * b**4)
    return np.array(pi)


def random_excursions_test(bits, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    _require_length(b.size, 100, "Random Excursions")
    walk, zero_pos, j_cycles = _random_walk(b)
    if j_cycles < 500:
        return _not_applicable(
            "Random Excursions",
            {"J": j_cycles},
            f"not applicable: only {j_cycles} cycles (< 500)",
            threshold,
        )
    p_values = []
    states = [-4, -3, -2, -1, 1, 2, 3, 4]
    for x in states:
        hits = np.flatnonzero(walk == x)
        cycle_of_hit = np.searchsorted(zero_pos, hits, side="right") - 1
        per_cycle = np.bincount(cycle_of_hit, minlength=j_cycles)
        nu = np.bincount(np.minimum(per_cycle, 5), minlength=6)
        expected = j_cycles * _excursion_state_pi(x)
        chi2 = float(np.sum((nu - expected) ** 2 / expected))
        p_values.append(igamc(2.5, chi2 / 2.0))
    return _finish(
        "Random Excursions", p_values, threshold, {"J": j_cycles, "states": states}
    )


def random_excursions_variant_test(bits, threshold: float = 0.01) -> TestResult:
    b = _bits_of(bits)
    _require_length(b.size, 100, "Random Excursions Variant")
    walk, _, j_cycles = _random_walk(b)
    if j_cycles < 500:
        return _not_applicable(
            "Random Excursions Variant",
            {"J": j_cycles},
            f"not applicable: only {j_cycles} cycles (< 500)",
            threshold,
        )
    states = [x for x in range(-9, 10) if x != 0]
    p_values = []
    for x in states:
        xi = int(np.count_nonzero(walk == x))
        p_values.append(
            erfc(abs(xi - j_cycles) / math.sqrt(2.0 * j_cycles * (4.0 * abs(x) - 2.0)))
        )
    return _finish(
        "Random Excursions Variant",
        p_values,
        threshold,
        {"J": j_cycles, "states": states},
    )
