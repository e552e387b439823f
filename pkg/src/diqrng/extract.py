"""Toeplitz-hash randomness extraction over GF(2), block-wise and word-packed.

Bit convention: streams are packed little-endian into 64-bit words, i.e. bit
``i`` of the stream lives in word ``i // 64`` at bit position ``i % 64``
(LSB first).  File payloads are the same bytes in little-endian word order,
so a stream of ``n`` bits occupies ``ceil(n / 8)`` bytes.

Toeplitz indexing: with a seed of length n + m - 1, the hash matrix is
``T[i, j] = seed[i - j + n - 1]`` for i in [0, m) and j in [0, n).  Worked
3x2 example: n=3, m=2, seed=(1,0,1,1), x=(1,1,0) gives y=(1,0).
The same seed (one matrix) is reused across all blocks of a run.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

#: Global output/input ratio of the reference pipeline (1.2 M out of 4.5 M).
PAPER_RATIO_M = 1200
PAPER_RATIO_N = 4500

_WORD_BITS = 64


def _bits_to_words(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 array into little-endian uint64 words (padded with zeros)."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    packed = np.packbits(bits, bitorder="little")
    n_words = (packed.size + 7) // 8
    buf = np.zeros(n_words * 8, dtype=np.uint8)
    buf[: packed.size] = packed
    return buf.view("<u8").copy()


def _words_to_bits(words: np.ndarray, n_bits: int) -> np.ndarray:
    data = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(data, bitorder="little", count=n_bits)


@dataclass(frozen=True)
class BitStream:
    """Packed bit stream with provenance metadata.

    ``provenance`` carries at least a ``stage`` key ("raw" or "extracted");
    the pipeline adds config hashes and seeds.
    """

    words: np.ndarray
    n_bits: int
    provenance: dict = field(default_factory=lambda: {"stage": "raw"})

    def __post_init__(self):
        w = np.ascontiguousarray(self.words, dtype="<u8")
        expected_words = (self.n_bits + _WORD_BITS - 1) // _WORD_BITS
        if self.n_bits < 0 or w.size != expected_words:
            raise ValueError(
                f"{w.size} words inconsistent with n_bits={self.n_bits}"
            )
        if self.n_bits % _WORD_BITS and w.size:
            pad = np.uint64(
                (1 << _WORD_BITS) - (1 << (self.n_bits % _WORD_BITS))
            )
            if w[-1] & pad:
                raise ValueError("trailing pad bits must be zero")
        w.flags.writeable = False
        object.__setattr__(self, "words", w)

    @property
    def stage(self) -> str:
        return self.provenance.get("stage", "raw")

    @classmethod
    def from_bits(cls, bits, provenance=None) -> "BitStream":
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if bits.size and bits.max() > 1:
            raise ValueError("bit values must be 0 or 1")
        return cls(
            _bits_to_words(bits),
            int(bits.size),
            dict(provenance or {"stage": "raw"}),
        )

    @classmethod
    def from_bytes(cls, data: bytes, n_bits: int, provenance=None) -> "BitStream":
        if len(data) != (n_bits + 7) // 8:
            raise ValueError("byte payload inconsistent with n_bits")
        buf = np.zeros(((n_bits + _WORD_BITS - 1) // _WORD_BITS) * 8, dtype=np.uint8)
        buf[: len(data)] = np.frombuffer(data, dtype=np.uint8)
        return cls(buf.view("<u8").copy(), n_bits, dict(provenance or {"stage": "raw"}))

    def to_bits(self) -> np.ndarray:
        return _words_to_bits(self.words, self.n_bits)

    def to_bytes(self) -> bytes:
        return self.words.view(np.uint8)[: (self.n_bits + 7) // 8].tobytes()

    def ones(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    # -- file I/O: raw payload plus a JSON sidecar ---------------------

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.to_bytes())
        sidecar = {
            "n_bits": self.n_bits,
            "stage": self.stage,
            "sha256": self.sha256(),
        }
        for key, value in self.provenance.items():
            if key != "stage":
                sidecar[key] = value
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))
        return path

    @classmethod
    def load(cls, path) -> "BitStream":
        path = Path(path)
        sidecar = json.loads(Path(str(path) + ".json").read_text())
        data = path.read_bytes()
        stream = cls.from_bytes(
            data,
            int(sidecar["n_bits"]),
            {k: v for k, v in sidecar.items() if k not in ("n_bits", "sha256")},
        )
        if stream.sha256() != sidecar["sha256"]:
            raise ValueError(f"checksum mismatch for {path}")
        return stream


@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed bits defining one n -> m Toeplitz matrix (length n + m - 1)."""

    bits: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8).ravel()
        if self.m < 1 or self.n < 1 or self.m >= self.n:
            raise ValueError("Toeplitz seed needs 1 <= m < n")
        if b.size != self.n + self.m - 1:
            raise ValueError(
                f"seed length {b.size} != n + m - 1 = {self.n + self.m - 1}"
            )
        if b.size and b.max() > 1:
            raise ValueError("seed bits must be 0 or 1")
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @classmethod
    def from_rng(cls, n: int, m: int, rng_seed: int) -> "ToeplitzSeed":
        rng = np.random.default_rng([int(rng_seed), 0x70E7])
        return cls(rng.integers(0, 2, size=n + m - 1, dtype=np.uint8), n, m)

    def hex(self) -> str:
        return np.packbits(self.bits, bitorder="little").tobytes().hex()

    def packed_rows(self) -> np.ndarray:
        """(m, ceil(n/64)) uint64 matrix; row i is T[i, :] packed LSB-first.

        Row i over j is seed[i+n-1], seed[i+n-2], ..., seed[i]: a reversed
        sliding window of the seed.
        """
        rev = self.bits[::-1]
        windows = np.lib.stride_tricks.sliding_window_view(rev, self.n)
        rows = windows[::-1][: self.m]  # row i == reversed seed[i : i + n]
        packed = np.packbits(rows, axis=1, bitorder="little")
        n_words = (self.n + _WORD_BITS - 1) // _WORD_BITS
        buf = np.zeros((self.m, n_words * 8), dtype=np.uint8)
        buf[:, : packed.shape[1]] = packed
        return np.ascontiguousarray(buf).view("<u8")


@dataclass(frozen=True)
class ExtractorConfig:
    """Block extraction settings.

    mode "paper_ratio" keeps the reference 4500 -> 1200 block shape (or the
    same ratio for another n); mode "leftover_hash" sizes m from a measured
    min-entropy via :func:`choose_output_length`.
    """

    n: int = PAPER_RATIO_N
    m: int | None = None
    mode: str = "paper_ratio"
    h_inf: float | None = None
    epsilon: float = 2.0 ** -100
    rng_seed: int = 0
    seed_bits: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("paper_ratio", "leftover_hash"):
            raise ValueError(f"unknown extractor mode {self.mode!r}")
        if self.n < 2:
            raise ValueError("block input length must be at least 2")

    def resolve_m(self) -> int:
        if self.m is not None:
            return int(self.m)
        if self.mode == "paper_ratio":
            return max(1, round(self.n * PAPER_RATIO_M / PAPER_RATIO_N))
        if self.h_inf is None:
            raise ValueError("leftover_hash mode needs h_inf")
        return choose_output_length(self.n, self.h_inf, self.epsilon)

    def build_seed(self) -> ToeplitzSeed:
        m = self.resolve_m()
        if self.seed_bits is not None:
            return ToeplitzSeed(np.asarray(self.seed_bits, dtype=np.uint8), self.n, m)
        return ToeplitzSeed.from_rng(self.n, m, self.rng_seed)


def choose_output_length(n: int, h_inf: float, epsilon: float) -> int:
    """Leftover-hash sizing: m = floor(n * h_inf - 2 log2(1/epsilon)).

    epsilon = 1 is allowed as the degenerate no-security limit (m = n at
    full entropy); real runs use something like 2**-100.
    """
    if not 0.0 < h_inf <= 1.0:
        raise ValueError("h_inf must be in (0, 1]")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must be in (0, 1]")
    m = math.floor(n * h_inf - 2.0 * math.log2(1.0 / epsilon))
    if m < 1:
        raise ValueError(
            f"parameters yield m={m} < 1 (n={n}, h_inf={h_inf}, epsilon={epsilon})"
        )
    return m


def _hash_packed_blocks(blocks: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """GF(2) mat-vec for many blocks at once.

    blocks: (B, W) uint64, rows: (m, W) uint64.  Output bit (b, i) is the
    parity of popcount(blocks[b] & rows[i]); the XOR fold first preserves the
    parity, so a single popcount per (b, i) pair suffices.
    """
    n_blocks = blocks.shape[0]
    m, n_words = rows.shape
    acc = np.zeros((n_blocks, m), dtype=np.uint64)
    for w in range(n_words):
        acc ^= blocks[:, w : w + 1] & rows[:, w][np.newaxis, :]
    return (np.bitwise_count(acc) & np.uint64(1)).astype(np.uint8)


def toeplitz_hash(x, seed: ToeplitzSeed) -> np.ndarray:
    """Hash one n-bit block to m bits: y_i = XOR_j T[i,j] x_j over GF(2)."""
    bits = np.asarray(x, dtype=np.uint8).ravel()
    if bits.size != seed.n:
        raise ValueError(f"block length {bits.size} != seed n = {seed.n}")
    block = _bits_to_words(bits)[np.newaxis, :]
    return _hash_packed_blocks(block, seed.packed_rows())[0]


def extract_stream(raw: BitStream, cfg: ExtractorConfig) -> BitStream:
    """Split into n-bit blocks, hash each with one shared seed, concatenate.

    A trailing partial block is discarded.  Block-parallel by construction:
    every block sees the same matrix and its output lands at a fixed offset.
    """
    if raw.n_bits < cfg.n:
        raise ValueError(
            f"input has {raw.n_bits} bits, shorter than one {cfg.n}-bit block"
        )
    seed = cfg.build_seed()
    rows = seed.packed_rows()
    m = seed.m
    n_blocks = raw.n_bits // cfg.n

    bits = raw.to_bits()[: n_blocks * cfg.n].reshape(n_blocks, cfg.n)
    packed = np.packbits(bits, axis=1, bitorder="little")
    n_words = rows.shape[1]
    buf = np.zeros((n_blocks, n_words * 8), dtype=np.uint8)
    buf[:, : packed.shape[1]] = packed
    blocks = np.ascontiguousarray(buf).view("<u8")

    out = np.empty((n_blocks, m), dtype=np.uint8)
    chunk = max(1, (1 << 22) // max(1, m * n_words))  # ~32 MB working set
    for start in range(0, n_blocks, chunk):
        stop = min(start + chunk, n_blocks)
        out[start:stop] = _hash_packed_blocks(blocks[start:stop], rows)

    provenance = {
        "stage": "extracted",
        "block_n": cfg.n,
        "block_m": m,
        "n_blocks": n_blocks,
        "seed_sha256": hashlib.sha256(seed.bits.tobytes()).hexdigest(),
        "seed_hex": seed.hex(),
        "parent_sha256": raw.sha256(),
    }
    return BitStream.from_bits(out.reshape(-1), provenance)
