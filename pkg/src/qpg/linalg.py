"""Dense complex/Hermitian matrix kernel.

Everything downstream (divergences, instruments, bounds) is built on the
handful of primitives here: validated Hermitian construction, spectral
decomposition, matrix functions with explicit kernel handling, positive
parts, Schatten norms, tensor products, factor permutations and partial
traces. All matrix functions go through a full eigendecomposition; at the
desk scales this artifact targets, exact spectral calculus beats any
approximation scheme and keeps the invariants checkable.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

HERMITICITY_RTOL = 1e-10
SUPPORT_RTOL = 1e-10  # eigenvalues <= SUPPORT_RTOL * max|eig| count as kernel
EIG_RECONSTRUCTION_RTOL = 1e-9
UNITARITY_TOL = 1e-10
MAX_DIM = 4096

_AXIS_LETTERS = string.ascii_letters


class LinalgError(ValueError):
    """Malformed matrix input: shape, finiteness, hermiticity or dimension."""


def as_square(a) -> np.ndarray:
    """Coerce to a square complex128 array with finite entries."""
    m = np.asarray(getattr(a, "mat", a), dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise LinalgError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise LinalgError("matrix has non-finite entries")
    return m


def dagger(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).conj().T


def hermiticity_defect(a) -> float:
    """Max entrywise |M - M†|."""
    m = as_square(a)
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


def hermitian_part(a) -> np.ndarray:
    m = as_square(a)
    return (m + dagger(m)) / 2


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix with its construction-time hermiticity witness.

    The stored matrix is the symmetrized (M+M†)/2; `hermiticity_defect`
    records how far the raw input was from Hermitian.
    """

    mat: np.ndarray
    hermiticity_defect: float

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


def hermitian(a, rtol: float = HERMITICITY_RTOL) -> HermitianOperator:
    """Validate and symmetrize a matrix into a HermitianOperator.

    Rejects inputs whose hermiticity defect exceeds rtol * max|entry|.
    """
    m = as_square(a)
    defect = hermiticity_defect(m)
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if defect > rtol * max(scale, 1e-300):
        raise LinalgError(
            f"hermiticity defect {defect:.3e} exceeds {rtol:.1e} * max entry {scale:.3e}"
        )
    return HermitianOperator(mat=hermitian_part(m), hermiticity_defect=defect)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in ascending order with unitary eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


def eig_hermitian(h) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix, validated.

    Checks the reconstruction error ||M - VΛV†||_F <= 1e-9 ||M||_F and
    V†V = I within 1e-10.
    """
    m = hermitian_part(h)
    if m.shape[0] > MAX_DIM:
        raise LinalgError(f"dimension {m.shape[0]} exceeds configured max {MAX_DIM}")
    w, v = np.linalg.eigh(m)
    dec = SpectralDecomposition(eigenvalues=w, eigenvectors=v)
    norm = np.linalg.norm(m)
    if np.linalg.norm(dec.reconstruct() - m) > EIG_RECONSTRUCTION_RTOL * max(norm, 1e-300):
        raise LinalgError("eigendecomposition failed the reconstruction bound")
    if np.max(np.abs(dagger(v) @ v - identity(m.shape[0]))) > 10 * UNITARITY_TOL:
        raise LinalgError("eigenvector matrix is not unitary within tolerance")
    return dec


def _kernel_value(f: Callable[[float], float]) -> float:
    """Value assigned to kernel eigenvalues: f(0) when finite, else 0."""
    try:
        v = float(f(0.0))
    except (ValueError, ZeroDivisionError, OverflowError, FloatingPointError):
        return 0.0
    return v if math.isfinite(v) else 0.0


def matrix_fn(
    h,
    f: Callable[[float], float],
    support_cutoff: float | None = SUPPORT_RTOL,
) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum.

    Eigenvalues at or below support_cutoff * max|eig| are treated as kernel:
    they map to f(0) when that is finite (sqrt, powers >= 0, exp, ...) and to
    0 otherwise (log, negative powers), which is the pseudo-inverse
    convention. Pass support_cutoff=None to apply f to the full spectrum.
    Raises if f is undefined (non-finite) at a retained eigenvalue.
    """
    dec = eig_hermitian(h)
    w = dec.eigenvalues
    if support_cutoff is None:
        cutoff = -math.inf
    else:
        cutoff = support_cutoff * float(np.max(np.abs(w))) if w.size else 0.0
    kernel_value = _kernel_value(f) if support_cutoff is not None else None
    out = np.empty_like(w)
    with np.errstate(all="ignore"):
        for i, lam in enumerate(w):
            if support_cutoff is not None and lam <= cutoff:
                out[i] = kernel_value
                continue
            try:
                val = float(f(float(lam)))
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise LinalgError(f"function undefined at retained eigenvalue {lam!r}") from exc
            if not math.isfinite(val):
                raise LinalgError(f"function non-finite at retained eigenvalue {lam!r}")
            out[i] = val
    v = dec.eigenvectors
    return hermitian_part((v * out) @ dagger(v))


def support_projector(h, support_cutoff: float = SUPPORT_RTOL) -> np.ndarray:
    """Projector onto the span of eigenvectors above the relative cutoff."""
    dec = eig_hermitian(h)
    w = dec.eigenvalues
    cutoff = support_cutoff * float(np.max(np.abs(w))) if w.size else 0.0
    keep = w > cutoff
    v = dec.eigenvectors[:, keep]
    return v @ dagger(v)


def positive_part_trace(h) -> float:
    """Sum of positive eigenvalues: max of Tr[Λh] over 0 ⪯ Λ ⪯ I."""
    w = np.linalg.eigvalsh(hermitian_part(h))
    return float(np.sum(w[w > 0]))


def trace_norm(h) -> float:
    return schatten_norm(h, 1)


def operator_norm(h) -> float:
    return schatten_norm(h, math.inf)


def schatten_norm(m, p: float) -> float:
    """Schatten p-norm via singular values; p >= 1 or inf."""
    a = as_square(m)
    if p != math.inf and p < 1:
        raise LinalgError(f"Schatten norm needs p >= 1 or inf, got {p}")
    s = np.linalg.svd(a, compute_uv=False)
    if p == math.inf:
        return float(s[0]) if s.size else 0.0
    if p == 1:
        return float(np.sum(s))
    return float(np.sum(s**p) ** (1.0 / p))


def tensor(*ops) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    if not ops:
        raise LinalgError("tensor of zero factors")
    out = np.asarray(getattr(ops[0], "mat", ops[0]), dtype=np.complex128)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(getattr(op, "mat", op), dtype=np.complex128))
    return out


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> list[int]:
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise LinalgError(f"factor dims must be >= 1, got {dims}")
    if math.prod(dims) != m.shape[0]:
        raise LinalgError(f"dims {dims} do not multiply to matrix dimension {m.shape[0]}")
    if 2 * len(dims) > len(_AXIS_LETTERS):
        raise LinalgError("too many tensor factors")
    return dims


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out all factors not in `keep`; kept factors stay in order."""
    a = as_square(m)
    dims = _check_dims(a, dims)
    k = len(dims)
    keep = sorted(set(int(i) for i in keep))
    if not keep:
        raise LinalgError("keep set must be nonempty")
    if any(i < 0 or i >= k for i in keep):
        raise LinalgError(f"keep indices {keep} out of range for {k} factors")
    t = a.reshape(dims + dims)
    row = list(_AXIS_LETTERS[:k])
    col = [_AXIS_LETTERS[i] if i not in keep else _AXIS_LETTERS[k + i] for i in range(k)]
    out = "".join(row[i] for i in keep) + "".join(_AXIS_LETTERS[k + i] for i in keep)
    sub = "".join(row) + "".join(col) + "->" + out
    d_keep = math.prod(dims[i] for i in keep)
    return np.einsum(sub, t).reshape(d_keep, d_keep)


def permute_factors(m, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that new factor j is old factor order[j]."""
    a = as_square(m)
    dims = _check_dims(a, dims)
    k = len(dims)
    order = [int(i) for i in order]
    if sorted(order) != list(range(k)):
        raise LinalgError(f"order {order} is not a permutation of 0..{k - 1}")
    t = a.reshape(dims + dims)
    t = t.transpose(order + [k + i for i in order])
    return t.reshape(a.shape)


def frobenius(m) -> float:
    return float(np.linalg.norm(np.asarray(getattr(m, "mat", m))))


def min_eig(h) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(h))[0])


def is_psd(h, tol: float = 1e-10) -> bool:
    return min_eig(h) >= -tol
