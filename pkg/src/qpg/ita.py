"""Untrusted-processor constructions: the Hamming-weight measurement
example, Helstrom distinguishability, the classical collapse demonstration,
and numerical informativeness-ordering checks.

The admissibility property itself is universally quantified and not
decidable here; reports only ever say "not refuted", "not admissible", or
"inconclusive".
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .linalg import (
    LinalgError,
    as_square,
    dagger,
    eig_hermitian,
    hermitian_part,
    identity,
    partial_trace,
    schatten_norm,
)
from .privacy import DPReport, PairCheck, PrivacyParams
from .states import CQState

COMMUTE_TOL = 1e-10
RECON_RESIDUAL_TOL = 1e-6
FEASIBLE_TOL = 1e-6


@dataclass(frozen=True)
class PureEncoding:
    """Single-qubit kets sqrt(1-p)|0> + (-1)^z sqrt(p)|1> for z in {0,1}."""

    p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("p must lie strictly inside (0, 1)")

    def ket(self, z: int) -> np.ndarray:
        sign = -1.0 if z % 2 else 1.0
        return np.array([math.sqrt(1.0 - self.p), sign * math.sqrt(self.p)])

    @property
    def overlap(self) -> float:
        return 1.0 - 2.0 * self.p


def _bitstrings(n: int):
    return list(itertools.product((0, 1), repeat=n))


def encoded_ket(bits: Sequence[int], p: float) -> np.ndarray:
    enc = PureEncoding(p)
    return reduce(np.kron, [enc.ket(z) for z in bits])


@dataclass(eq=False)
class HammingExample:
    """Hamming-weight projective measurement on n product-encoded qubits.

    The projectors are built from the orthogonal p = 1/2 encoding; the
    measurement channel keeps the classical weight register.
    """

    n: int
    p: float
    projectors: tuple[np.ndarray, ...]

    def kets(self, p: float | None = None) -> dict[tuple[int, ...], np.ndarray]:
        return {bits: encoded_ket(bits, self.p if p is None else p) for bits in _bitstrings(self.n)}

    def pinch(self, rho: np.ndarray) -> np.ndarray:
        """sum_k P_k rho P_k (no weight register)."""
        rho = as_square(rho)
        return sum(pk @ rho @ pk for pk in self.projectors)

    def channel_output(self, rho: np.ndarray) -> CQState:
        """sum_k P_k rho P_k ⊗ |k><k| as a CQ state over the weight label."""
        rho = as_square(rho)
        labels, probs, blocks = [], [], []
        for k, pk in enumerate(self.projectors):
            blk = pk @ rho @ pk
            pr = float(np.trace(blk).real)
            labels.append((k,))
            probs.append(max(pr, 0.0))
            blocks.append(blk / pr if pr > 1e-12 else None)
        total = sum(probs)
        return CQState(tuple(labels), np.asarray(probs) / total, tuple(blocks), (2**self.n,))


def build_example(n: int, p: float) -> HammingExample:
    """Weight-subspace projectors from the p = 1/2 encoding, plus the
    encoded states at the requested p."""
    if n > 8:
        raise ValueError("Hamming example capped at n <= 8")
    basis = {bits: encoded_ket(bits, 0.5) for bits in _bitstrings(n)}
    d = 2**n
    projectors = []
    for k in range(n + 1):
        pk = np.zeros((d, d), dtype=np.complex128)
        for bits, ket in basis.items():
            if sum(bits) == k:
                pk += np.outer(ket, ket.conj())
        projectors.append(hermitian_part(pk))
    return HammingExample(n=n, p=p, projectors=tuple(projectors))


def qnd_check(n: int, p: float = 0.5) -> float:
    """Max over encoded states of ||pinch(rho) - rho||_F: zero exactly when
    the encoding is the orthogonal p = 1/2 one."""
    ex = build_example(n, p)
    worst = 0.0
    for bits, ket in ex.kets().items():
        rho = np.outer(ket, ket.conj())
        worst = max(worst, float(np.linalg.norm(ex.pinch(rho) - rho)))
    return worst


def helstrom_error(rho_a, rho_b, prior: float = 0.5) -> float:
    """Minimal discrimination error (1 - ||q rho_a - (1-q) rho_b||_1) / 2."""
    if not 0 < prior < 1:
        raise ValueError("prior must lie strictly inside (0, 1)")
    a, b = as_square(rho_a), as_square(rho_b)
    return 0.5 * (1.0 - schatten_norm(prior * a - (1.0 - prior) * b, 1))


def untrusted_dp_verify(ex: HammingExample, params: PrivacyParams) -> DPReport:
    """DP report for the dataset-independent Hamming channel.

    Privacy is checked on N(rho_s) vs N(rho_s') for every 1-neighbor
    sequence pair (types over {0,1} differ by one flip); permutation
    invariance compares outputs within each type class.
    """
    outputs = {
        bits: ex.channel_output(np.outer(ket, ket.conj()))
        for bits, ket in ex.kets().items()
    }

    perm_ok = True
    by_weight: dict[int, list] = {}
    for bits in _bitstrings(ex.n):
        by_weight.setdefault(sum(bits), []).append(bits)
    for _, members in sorted(by_weight.items()):
        ref = outputs[members[0]]
        for bits in members[1:]:
            other = outputs[bits]
            dist = 0.0
            for pa, ba, pb, bb in zip(ref.probs, ref.blocks, other.probs, other.blocks):
                x = (pa * ba if ba is not None else 0.0) - (pb * bb if bb is not None else 0.0)
                if not isinstance(x, float):
                    dist += float(np.linalg.norm(x)) ** 2
            if math.sqrt(dist) > 1e-9:
                perm_ok = False

    from .divergences import cq_hockey_stick
    from .linalg import operator_norm, support_projector

    pairs: list[PairCheck] = []
    tightest = 0.0
    support_ok = True
    strings = _bitstrings(ex.n)
    for i, s in enumerate(strings):
        for s2 in strings[i + 1 :]:
            if abs(sum(s) - sum(s2)) != 1:
                continue
            a, b = outputs[s], outputs[s2]
            for direction, x, y in (("forward", a, b), ("reverse", b, a)):
                hs = cq_hockey_stick(x, y, params.epsilon)
                tightest = max(tightest, hs)
                pairs.append(
                    PairCheck(
                        (ex.n - sum(s), sum(s)),
                        (ex.n - sum(s2), sum(s2)),
                        direction,
                        hs,
                        params.delta,
                    )
                )
            d = a.quantum_dim
            for pa, ba, pb, bb in zip(a.probs, a.blocks, b.probs, b.blocks):
                proj_a = support_projector(pa * ba) if ba is not None and pa > 1e-12 else np.zeros((d, d))
                proj_b = support_projector(pb * bb) if bb is not None and pb > 1e-12 else np.zeros((d, d))
                if operator_norm(proj_a - proj_b) > 1e-8:
                    support_ok = False
    return DPReport(
        params=params,
        pairs=pairs,
        permutation_invariance_pass=perm_ok,
        support_consistency_pass=support_ok,
        tightest_delta=tightest,
    )


# --- Classical collapse -----------------------------------------------------


@dataclass
class ClassicalItaReport:
    more_informative_defect: float
    recovery_defect: float
    reconstruction_residual: float
    admissible_refuted: bool

    @property
    def verdict(self) -> str:
        return "not admissible" if self.admissible_refuted else "admissibility not refuted"


def _common_eigenbasis(states: Sequence[np.ndarray]) -> np.ndarray:
    """Eigenbasis shared by pairwise-commuting Hermitian matrices."""
    mats = [hermitian_part(s) for s in states]
    for a, b in itertools.combinations(mats, 2):
        if np.max(np.abs(a @ b - b @ a)) > COMMUTE_TOL:
            raise LinalgError("encodings do not commute; the classical demo does not apply")
    # A generic combination splits shared eigenspaces.
    rng = np.random.default_rng(7)
    weights = rng.normal(size=len(mats))
    combo = sum(w * m for w, m in zip(weights, mats))
    basis = eig_hermitian(combo).eigenvectors
    for m in mats:
        off = dagger(basis) @ m @ basis
        off = off - np.diag(np.diag(off))
        if np.max(np.abs(off)) > 1e-8:
            raise LinalgError("failed to find a joint eigenbasis")
    return basis


def classical_ita_demo(
    encodings: Sequence[np.ndarray],
    branches: Sequence[Sequence[np.ndarray]],
) -> ClassicalItaReport:
    """The collapse construction for commuting encodings.

    Builds the side-channel algorithm N'_w(|x><x|) = |x><x| ⊗ N_w(|x><x|)
    in the common eigenbasis, verifies it is exactly more informative and
    recovers each encoding, then tests whether a linear reconstruction from
    the original outputs exists: if not, the original algorithm is not
    admissible.
    """
    basis = _common_eigenbasis(encodings)
    d = basis.shape[0]
    basis_cols = [basis[:, x].reshape(-1, 1) for x in range(d)]
    proj = [c @ dagger(c) for c in basis_cols]

    def apply_branch(kraus_list, rho):
        return sum(np.asarray(k) @ rho @ dagger(np.asarray(k)) for k in kraus_list)

    def n_output(rho):
        return [apply_branch(kraus_list, rho) for kraus_list in branches]

    def n_prime_output(rho):
        out = []
        for kraus_list in branches:
            blocks = []
            for x in range(d):
                px = float((dagger(basis_cols[x]) @ rho @ basis_cols[x]).real.item())
                blocks.append(np.kron(proj[x], px * apply_branch(kraus_list, proj[x])))
            out.append(sum(blocks))
        return out

    b_dim = as_square(branches[0][0]).shape[0]
    more_informative_defect = 0.0
    recovery_defect = 0.0
    for rho in encodings:
        rho = as_square(rho)
        orig = n_output(rho)
        side = n_prime_output(rho)
        for o, s in zip(orig, side):
            marg = partial_trace(s, [d, b_dim], keep=[1])
            more_informative_defect = max(more_informative_defect, float(np.linalg.norm(marg - o)))
        recovered = sum(partial_trace(s, [d, b_dim], keep=[0]) for s in side)
        recovery_defect = max(recovery_defect, float(np.linalg.norm(recovered - rho)))

    # Does a linear map send each N(rho_s) back to rho_s consistently? The
    # best linear reconstruction is B A^+; its residual is zero exactly when
    # the assignment extends consistently to the span of the outputs.
    a = np.stack(
        [np.concatenate([o.ravel() for o in n_output(as_square(r))]) for r in encodings],
        axis=1,
    )
    b = np.stack([as_square(r).ravel() for r in encodings], axis=1)
    residual = float(np.linalg.norm(b @ np.linalg.pinv(a) @ a - b))
    return ClassicalItaReport(
        more_informative_defect=more_informative_defect,
        recovery_defect=recovery_defect,
        reconstruction_residual=residual,
        admissible_refuted=residual > RECON_RESIDUAL_TOL,
    )


# --- Informativeness ordering as a Choi feasibility problem -------------------


@dataclass
class InformativenessResult:
    feasible: bool | None          # None = inconclusive (iteration cap)
    residual: float
    iterations: int

    @property
    def verdict(self) -> str:
        if self.feasible is True:
            return "simulable"
        if self.feasible is False:
            return "not simulable within tolerance"
        return "inconclusive"


def _choi_apply(choi: np.ndarray, x: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    """Gamma(X) = Tr_in[(I_out ⊗ X^T) J], J on out ⊗ in."""
    j = choi.reshape(d_out, d_in, d_out, d_in)
    return np.einsum("aibj,ij->ab", j, x.T)


def informativeness_check(
    candidate_outputs: Sequence[np.ndarray],
    target_outputs: Sequence[np.ndarray],
    max_iterations: int = 20000,
    tol: float = FEASIBLE_TOL,
) -> InformativenessResult:
    """Decide whether a single CP-TP map sends each candidate output to the
    matching target output, by alternating projections on the Choi matrix
    between the PSD cone and the affine set {data match + trace preserving}
    (in the reflected Douglas-Rachford form, which keeps its speed when the
    two sets meet tangentially, as they do at rank-deficient solutions).

    A residual below tol certifies feasibility (the candidate channel is at
    least as informative); a residual stuck well above tol after the
    iteration cap is reported as "not simulable within tolerance" — a
    numerical one-sided certificate, not a proof. Residuals in between are
    inconclusive.
    """
    xs = [as_square(x) for x in candidate_outputs]
    ys = [as_square(y) for y in target_outputs]
    if len(xs) != len(ys) or not xs:
        raise ValueError("need matching nonempty output lists")
    d_in = xs[0].shape[0]
    d_out = ys[0].shape[0]
    d = d_in * d_out

    # Real-linear constraint system A vec_real(J) = b.
    a_rows: list[np.ndarray] = []
    b_vals: list[float] = []

    def add_constraint(coeff: np.ndarray, value: complex):
        a_rows.append(np.concatenate([coeff.real, -coeff.imag]))
        b_vals.append(value.real)
        a_rows.append(np.concatenate([coeff.imag, coeff.real]))
        b_vals.append(value.imag)

    # Data-matching: Tr_in[(I ⊗ X^T) J][a,b] = Y[a,b].
    for x, y in zip(xs, ys):
        for a in range(d_out):
            for b in range(d_out):
                coeff = np.zeros((d_out, d_in, d_out, d_in), dtype=np.complex128)
                coeff[a, :, b, :] = x.T
                add_constraint(coeff.reshape(-1), complex(y[a, b]))
    # Trace preservation: Tr_out[J] = I_in.
    eye = identity(d_in)
    for i in range(d_in):
        for jdx in range(d_in):
            coeff = np.zeros((d_out, d_in, d_out, d_in), dtype=np.complex128)
            for a in range(d_out):
                coeff[a, i, a, jdx] = 1.0
            add_constraint(coeff.reshape(-1), complex(eye[i, jdx]))

    a_mat = np.stack(a_rows)
    b_vec = np.asarray(b_vals)
    pinv = np.linalg.pinv(a_mat, rcond=1e-12)

    def project_affine(j: np.ndarray) -> np.ndarray:
        v = j.reshape(-1)
        x = np.concatenate([v.real, v.imag])
        x = x - pinv @ (a_mat @ x - b_vec)
        return (x[: d * d] + 1j * x[d * d :]).reshape(d, d)

    def project_psd(j: np.ndarray) -> np.ndarray:
        h = hermitian_part(j)
        w, v = np.linalg.eigh(h)
        w = np.clip(w, 0.0, None)
        return (v * w) @ dagger(v)

    def violation(j: np.ndarray) -> float:
        worst = max(0.0, -float(np.linalg.eigvalsh(hermitian_part(j))[0]))
        tp = partial_trace(j, [d_out, d_in], keep=[1])
        worst = max(worst, float(np.max(np.abs(tp - eye))))
        for x, y in zip(xs, ys):
            worst = max(worst, float(np.max(np.abs(_choi_apply(j, x, d_in, d_out) - y))))
        return worst

    # Governing sequence z; the candidate Choi matrix is its PSD projection.
    z = np.kron(identity(d_out) / d_out, identity(d_in))
    best = violation(project_psd(z))
    it = 0
    for it in range(1, max_iterations + 1):
        p = project_psd(z)
        z = z + project_affine(2.0 * p - z) - p
        if it % 25 == 0 or it == max_iterations:
            res = violation(project_psd(z))
            best = min(best, res)
            if res < tol:
                return InformativenessResult(feasible=True, residual=res, iterations=it)
    if best < tol:
        return InformativenessResult(feasible=True, residual=best, iterations=it)
    if best > 100 * tol:
        return InformativenessResult(feasible=False, residual=best, iterations=it)
    return InformativenessResult(feasible=None, residual=best, iterations=it)


def channel_outputs(kraus_list: Sequence[np.ndarray], states: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Apply a Kraus channel to each state."""
    out = []
    for rho in states:
        rho = as_square(rho)
        out.append(sum(np.asarray(k) @ rho @ dagger(np.asarray(k)) for k in kraus_list))
    return out
