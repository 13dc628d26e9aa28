"""Datasets over a finite alphabet, method-of-types utilities, quantum
encodings, and classical-quantum state assembly.

Classical registers are always diagonal here, so a classical-quantum state
is stored as labelled blocks instead of one big matrix; `cq_flatten` gives
the explicit block-diagonal matrix for cross-checks at small dimension.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Hashable, Iterator, Mapping, Sequence

import numpy as np

from .linalg import (
    LinalgError,
    as_square,
    hermitian,
    identity,
    min_eig,
    partial_trace,
    permute_factors,
    tensor,
)

MAX_N = 8
MAX_ALPHABET_SIZE = 3
MAX_SYMBOL_DIM = 4
MAX_FLAT_DIM = 64
MAX_ENCODED_DIM = 4096

TRACE_TOL = 1e-10
PSD_TOL = 1e-10
PROB_TOL = 1e-10


class DeskScaleError(ValueError):
    """Instance exceeds the configured desk-scale limits."""


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if len(self.symbols) > MAX_ALPHABET_SIZE:
            raise DeskScaleError(
                f"alphabet size {len(self.symbols)} exceeds desk-scale cap {MAX_ALPHABET_SIZE}"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValueError(f"symbol {symbol!r} not in alphabet {self.symbols}") from None


def alphabet(symbols: Sequence[str]) -> Alphabet:
    return Alphabet(tuple(symbols))


@dataclass(frozen=True)
class Dataset:
    entries: tuple[str, ...]
    alphabet: Alphabet

    def __post_init__(self):
        if len(self.entries) < 1:
            raise ValueError("dataset must be nonempty")
        for z in self.entries:
            self.alphabet.index(z)

    @property
    def n(self) -> int:
        return len(self.entries)


def dataset(entries: Sequence[str], alph: Alphabet) -> Dataset:
    return Dataset(tuple(entries), alph)


@dataclass(frozen=True)
class TypeVector:
    counts: tuple[int, ...]
    alphabet: Alphabet

    def __post_init__(self):
        if len(self.counts) != self.alphabet.size:
            raise ValueError("type vector length must match alphabet size")
        if any(c < 0 for c in self.counts):
            raise ValueError("type counts must be nonnegative")

    @property
    def n(self) -> int:
        return sum(self.counts)


def dataset_type(s: Dataset) -> TypeVector:
    counts = [0] * s.alphabet.size
    for z in s.entries:
        counts[s.alphabet.index(z)] += 1
    return TypeVector(tuple(counts), s.alphabet)


def all_types(n: int, alph: Alphabet) -> list[TypeVector]:
    """All frequency vectors of length-n sequences, in lexicographic order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    for combo in itertools.combinations(range(n + alph.size - 1), alph.size - 1):
        counts, prev = [], -1
        for c in combo:
            counts.append(c - prev - 1)
            prev = c
        counts.append(n + alph.size - 2 - combo[-1] if alph.size > 1 else n)
        out.append(TypeVector(tuple(counts), alph))
    return sorted(out, key=lambda f: f.counts)


def type_count_bound(n: int, alphabet_size: int) -> int:
    """(n+1)^(|Z|-1), an upper bound on the number of distinct types."""
    return (n + 1) ** (alphabet_size - 1)


def type_class_size(f: TypeVector) -> int:
    """Number of sequences sharing the type: the multinomial coefficient."""
    size = math.factorial(f.n)
    for c in f.counts:
        size //= math.factorial(c)
    return size


def type_distance(f: TypeVector, g: TypeVector) -> int:
    """Half the l1 distance between frequency vectors (always integral)."""
    if f.alphabet != g.alphabet or f.n != g.n:
        raise ValueError("type distance needs matching alphabet and length")
    total = sum(abs(a - b) for a, b in zip(f.counts, g.counts))
    return total // 2


def k_distance(s: Dataset, s2: Dataset) -> int:
    if s.alphabet != s2.alphabet:
        raise ValueError("datasets live on different alphabets")
    if s.n != s2.n:
        raise ValueError("datasets have different lengths")
    return type_distance(dataset_type(s), dataset_type(s2))


def representative(f: TypeVector) -> Dataset:
    """Canonical member of the type class: symbols in alphabet order."""
    entries = []
    for sym, c in zip(f.alphabet.symbols, f.counts):
        entries.extend([sym] * c)
    return Dataset(tuple(entries), f.alphabet)


def sequences_of_type(f: TypeVector) -> Iterator[Dataset]:
    """All distinct sequences in the type class (desk scale only)."""
    if f.n > MAX_N:
        raise DeskScaleError(f"type class enumeration capped at n <= {MAX_N}")
    seen = set()
    for perm in itertools.permutations(representative(f).entries):
        if perm not in seen:
            seen.add(perm)
            yield Dataset(perm, f.alphabet)


def all_datasets(n: int, alph: Alphabet) -> list[Dataset]:
    if n > MAX_N:
        raise DeskScaleError(f"dataset enumeration capped at n <= {MAX_N}")
    return [Dataset(entries, alph) for entries in itertools.product(alph.symbols, repeat=n)]


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace positive-semidefinite Hermitian operator."""

    mat: np.ndarray

    def __post_init__(self):
        m = hermitian(self.mat).mat
        object.__setattr__(self, "mat", m)
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"density matrix trace {tr} is not 1")
        if min_eig(m) < -PSD_TOL:
            raise ValueError(f"density matrix has eigenvalue {min_eig(m):.3e} < -{PSD_TOL}")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


def density(mat) -> DensityMatrix:
    return DensityMatrix(np.asarray(mat, dtype=np.complex128))


def pure(ket: Sequence[complex]) -> DensityMatrix:
    v = np.asarray(ket, dtype=np.complex128).reshape(-1, 1)
    v = v / np.linalg.norm(v)
    return DensityMatrix(v @ v.conj().T)


@dataclass(frozen=True)
class Encoding:
    """Per-symbol quantum states on a fixed test ⊗ train factor split."""

    states: Mapping[str, DensityMatrix]
    te_dim: int
    tr_dim: int

    def __post_init__(self):
        if self.te_dim < 1 or self.tr_dim < 1:
            raise ValueError("factor dims must be >= 1")
        if self.te_dim * self.tr_dim > MAX_SYMBOL_DIM:
            raise DeskScaleError(
                f"per-symbol dim {self.te_dim * self.tr_dim} exceeds {MAX_SYMBOL_DIM}"
            )
        for sym, rho in self.states.items():
            if rho.dim != self.te_dim * self.tr_dim:
                raise ValueError(f"state for {sym!r} has dim {rho.dim}, expected "
                                 f"{self.te_dim * self.tr_dim}")

    def state(self, symbol: str) -> DensityMatrix:
        if symbol not in self.states:
            raise ValueError(f"encoding has no state for symbol {symbol!r}")
        return self.states[symbol]


def trivial_encoding(alph: Alphabet) -> Encoding:
    """Dimension-1 factors: the instrument sees only the classical index."""
    one = DensityMatrix(np.ones((1, 1), dtype=np.complex128))
    return Encoding({sym: one for sym in alph.symbols}, te_dim=1, tr_dim=1)


def _check_encoded_dim(s: Dataset, enc: Encoding) -> int:
    d = (enc.te_dim * enc.tr_dim) ** s.n
    if d > MAX_ENCODED_DIM:
        raise DeskScaleError(f"encoded dimension {d} exceeds {MAX_ENCODED_DIM}")
    return d


def encode_dataset(s: Dataset, enc: Encoding) -> DensityMatrix:
    """Product encoding in sequence order: factor i is (te_i ⊗ tr_i)."""
    _check_encoded_dim(s, enc)
    mats = [enc.state(z).mat for z in s.entries]
    return DensityMatrix(reduce(np.kron, mats))


def encode_dataset_grouped(s: Dataset, enc: Encoding) -> np.ndarray:
    """Product encoding with factors regrouped to (te_1..te_n, tr_1..tr_n)."""
    rho = encode_dataset(s, enc).mat
    n = s.n
    dims = []
    for _ in range(n):
        dims.extend([enc.te_dim, enc.tr_dim])
    order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    return permute_factors(rho, dims, order)


def te_marginal(s: Dataset, enc: Encoding) -> np.ndarray:
    """Test-side marginal of the encoded state: ⊗_i Tr_tr[rho_{z_i}]."""
    parts = [
        partial_trace(enc.state(z).mat, [enc.te_dim, enc.tr_dim], keep=[0])
        for z in s.entries
    ]
    return reduce(np.kron, parts)


@dataclass(frozen=True)
class CQState:
    """Labelled block-diagonal classical-quantum state.

    Each label carries a probability and a normalized density block on the
    common quantum factors `dims`. Blocks may be None only at zero
    probability (they never enter any expectation).
    """

    labels: tuple[Hashable, ...]
    probs: np.ndarray
    blocks: tuple[np.ndarray | None, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if len(self.labels) != len(p) or len(self.blocks) != len(p):
            raise ValueError("labels, probs and blocks must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in CQState")
        if np.any(p < -PROB_TOL):
            raise ValueError("negative probability in CQState")
        if abs(float(p.sum()) - 1.0) > PROB_TOL * max(1, len(p)):
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        d = math.prod(self.dims)
        for lab, prob, blk in zip(self.labels, p, self.blocks):
            if blk is None:
                if prob > PROB_TOL:
                    raise ValueError(f"missing block at positive-probability label {lab!r}")
                continue
            b = as_square(blk)
            if b.shape[0] != d:
                raise ValueError(f"block at {lab!r} has dim {b.shape[0]}, expected {d}")
            if prob > PROB_TOL and abs(float(np.trace(b).real) - 1.0) > 1e-8:
                raise ValueError(f"block at {lab!r} is not normalized")

    @property
    def quantum_dim(self) -> int:
        return math.prod(self.dims)

    def block(self, label) -> np.ndarray | None:
        return self.blocks[self.labels.index(label)]

    def prob(self, label) -> float:
        return float(self.probs[self.labels.index(label)])


def build_cq_state(
    prior: Sequence[float],
    blocks: Sequence[tuple[Hashable, np.ndarray | DensityMatrix | None]],
    dims: Sequence[int] | None = None,
) -> CQState:
    """Assemble a CQState from a probability vector and per-label blocks."""
    if len(prior) != len(blocks):
        raise ValueError(f"prior has {len(prior)} entries for {len(blocks)} blocks")
    labels = tuple(lab for lab, _ in blocks)
    mats: list[np.ndarray | None] = []
    for _, blk in blocks:
        if blk is None:
            mats.append(None)
        else:
            mats.append(as_square(getattr(blk, "mat", blk)))
    if dims is None:
        ref = next((m for m in mats if m is not None), None)
        if ref is None:
            raise ValueError("cannot infer quantum dims: all blocks missing")
        dims = (ref.shape[0],)
    return CQState(labels, np.asarray(prior, dtype=float), tuple(mats), tuple(int(d) for d in dims))


def cq_quantum_marginal(state: CQState) -> DensityMatrix:
    """Probability-weighted average block."""
    d = state.quantum_dim
    avg = np.zeros((d, d), dtype=np.complex128)
    for p, blk in zip(state.probs, state.blocks):
        if p > 0 and blk is not None:
            avg += p * blk
    return DensityMatrix(avg)


def cq_marginals(state: CQState) -> tuple[np.ndarray, DensityMatrix, CQState]:
    """Classical marginal, quantum marginal, and their product CQState."""
    marg = cq_quantum_marginal(state)
    prod = CQState(
        state.labels,
        state.probs.copy(),
        tuple(marg.mat for _ in state.labels),
        state.dims,
    )
    return state.probs.copy(), marg, prod


def cq_flatten(state: CQState) -> np.ndarray:
    """Explicit block-diagonal matrix with the classical register diagonal.

    Cross-check representation only; capped at total dimension 64.
    """
    d = state.quantum_dim
    total = len(state.labels) * d
    if total > MAX_FLAT_DIM:
        raise DeskScaleError(f"flattened dimension {total} exceeds {MAX_FLAT_DIM}")
    out = np.zeros((total, total), dtype=np.complex128)
    for i, (p, blk) in enumerate(zip(state.probs, state.blocks)):
        if p > 0 and blk is not None:
            out[i * d : (i + 1) * d, i * d : (i + 1) * d] = p * blk
    return out


# --- JSON ingestion -------------------------------------------------------
#
# Matrices are nested arrays of [re, im] pairs; symbols are strings. The
# same conventions feed the instrument/loss ingestion in `learning`.


def matrix_from_json(data) -> np.ndarray:
    rows = []
    for row in data:
        rows.append([complex(float(re), float(im)) for re, im in row])
    return np.asarray(rows, dtype=np.complex128)


def matrix_to_json(m) -> list:
    a = np.asarray(getattr(m, "mat", m), dtype=np.complex128)
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def alphabet_from_json(data) -> Alphabet:
    return Alphabet(tuple(str(s) for s in data))


def dataset_from_json(data, alph: Alphabet) -> Dataset:
    return Dataset(tuple(str(z) for z in data), alph)


def encoding_from_json(data) -> Encoding:
    states = {
        str(sym): DensityMatrix(matrix_from_json(mat))
        for sym, mat in data["states"].items()
    }
    return Encoding(states, te_dim=int(data["te_dim"]), tr_dim=int(data["tr_dim"]))
