"""Verification of 1-neighbor (eps, delta)-DP support-consistent learning
algorithms, group privacy, and the noise condition gating the stability
bound.

Failures are report entries, never exceptions: an algorithm that leaks is
a finding, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Sequence

import numpy as np

from .linalg import identity, operator_norm, support_projector
from .states import (
    Alphabet,
    CQState,
    Dataset,
    DeskScaleError,
    Encoding,
    MAX_ALPHABET_SIZE,
    MAX_N,
    TypeVector,
    all_types,
    dataset_type,
    representative,
    sequences_of_type,
    trivial_encoding,
    type_distance,
)
from .divergences import cq_hockey_stick

HS_SLACK = 1e-9
PERM_TOL = 1e-9
SUPPORT_PROJ_TOL = 1e-8


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class PairCheck:
    type_a: tuple[int, ...]
    type_b: tuple[int, ...]
    direction: str
    hockey_stick: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.hockey_stick <= self.threshold + HS_SLACK


@dataclass
class DPReport:
    params: PrivacyParams
    pairs: list[PairCheck]
    permutation_invariance_pass: bool
    support_consistency_pass: bool
    tightest_delta: float

    @property
    def privacy_pass(self) -> bool:
        return all(p.passed for p in self.pairs)

    @property
    def passed(self) -> bool:
        return (
            self.privacy_pass
            and self.permutation_invariance_pass
            and self.support_consistency_pass
        )

    def to_json(self) -> dict:
        return {
            "epsilon": self.params.epsilon,
            "delta": self.params.delta,
            "pairs": [
                {
                    "type_a": list(p.type_a),
                    "type_b": list(p.type_b),
                    "direction": p.direction,
                    "hockey_stick": p.hockey_stick,
                    "threshold": p.threshold,
                    "pass": p.passed,
                }
                for p in self.pairs
            ],
            "permutation_invariance_pass": self.permutation_invariance_pass,
            "support_consistency_pass": self.support_consistency_pass,
            "tightest_delta": self.tightest_delta,
            "pass": self.passed,
        }


def neighbor_pairs(n: int, alph: Alphabet, k: int) -> list[tuple[TypeVector, TypeVector]]:
    """All unordered type pairs at type distance exactly k."""
    if n > MAX_N or alph.size > MAX_ALPHABET_SIZE:
        raise DeskScaleError(f"neighbor enumeration capped at n <= {MAX_N}, |Z| <= {MAX_ALPHABET_SIZE}")
    if k > n:
        raise ValueError(f"type distance {k} cannot exceed n = {n}")
    types = all_types(n, alph)
    out = []
    for i, f in enumerate(types):
        for g in types[i + 1 :]:
            if type_distance(f, g) == k:
                out.append((f, g))
    return out


def _weighted_output(alg, s: Dataset, enc: Encoding) -> CQState:
    """Full instrument output as a CQ state over the outcome register."""
    branches = alg.branch_outputs(s, enc)
    labels = tuple((w,) for w, _, _ in branches)
    probs = np.array([p for _, p, _ in branches])
    blocks = tuple(blk for _, _, blk in branches)
    d = next(b.shape[0] for b in blocks if b is not None)
    return CQState(labels, probs, blocks, (d,))


def _output_distance(a: CQState, b: CQState) -> float:
    """Frobenius distance between weighted block-diagonal outputs."""
    total = 0.0
    for pa, ba, pb, bb in zip(a.probs, a.blocks, b.probs, b.blocks):
        x = (pa * ba if ba is not None and pa > 0 else 0.0) - (
            pb * bb if bb is not None and pb > 0 else 0.0
        )
        if isinstance(x, float):
            continue
        total += float(np.linalg.norm(x)) ** 2
    return math.sqrt(total)


def _support_projectors(state: CQState) -> list[np.ndarray | None]:
    out = []
    for p, blk in zip(state.probs, state.blocks):
        out.append(support_projector(p * blk) if blk is not None and p > 1e-12 else None)
    return out


def _supports_equal(a: CQState, b: CQState) -> bool:
    d = a.quantum_dim
    for pa, pb in zip(_support_projectors(a), _support_projectors(b)):
        pa = pa if pa is not None else np.zeros((d, d))
        pb = pb if pb is not None else np.zeros((d, d))
        if operator_norm(pa - pb) > SUPPORT_PROJ_TOL:
            return False
    return True


def _resolve_scope(alg, n, alph):
    n = n if n is not None else getattr(alg, "n", None)
    alph = alph if alph is not None else getattr(alg, "alphabet", None)
    if n is None or alph is None:
        raise ValueError("pass n and alphabet explicitly for this algorithm")
    return n, alph


def dp_verify(
    alg,
    enc: Encoding,
    params: PrivacyParams,
    n: int | None = None,
    alph: Alphabet | None = None,
    strict: bool = False,
) -> DPReport:
    """Check permutation invariance, the two-sided hockey-stick privacy
    condition on every 1-neighbor type pair, and support consistency.

    With strict=True the privacy condition is additionally checked on all
    sequence pairs (not just type representatives) for n <= 4.
    """
    n, alph = _resolve_scope(alg, n, alph)
    types = all_types(n, alph)
    outputs = {f.counts: _weighted_output(alg, representative(f), enc) for f in types}

    perm_ok = True
    for f in types:
        ref = outputs[f.counts]
        for s in sequences_of_type(f):
            if _output_distance(_weighted_output(alg, s, enc), ref) > PERM_TOL:
                perm_ok = False
                break
        if not perm_ok:
            break

    pairs: list[PairCheck] = []
    tightest = 0.0
    for f, g in sorted(neighbor_pairs(n, alph, 1), key=lambda fg: (fg[0].counts, fg[1].counts)):
        a, b = outputs[f.counts], outputs[g.counts]
        for direction, x, y in (("forward", a, b), ("reverse", b, a)):
            hs = cq_hockey_stick(x, y, params.epsilon)
            tightest = max(tightest, hs)
            pairs.append(
                PairCheck(f.counts, g.counts, direction, hs, params.delta)
            )

    if strict and n <= 4:
        from .states import all_datasets

        seqs = all_datasets(n, alph)
        for i, s in enumerate(seqs):
            for s2 in seqs[i + 1 :]:
                if type_distance(dataset_type(s), dataset_type(s2)) != 1:
                    continue
                a = _weighted_output(alg, s, enc)
                b = _weighted_output(alg, s2, enc)
                for direction, x, y in (("forward", a, b), ("reverse", b, a)):
                    hs = cq_hockey_stick(x, y, params.epsilon)
                    tightest = max(tightest, hs)
                    pairs.append(
                        PairCheck(
                            dataset_type(s).counts,
                            dataset_type(s2).counts,
                            f"strict-{direction}",
                            hs,
                            params.delta,
                        )
                    )

    # Support consistency is automatic at delta = 0 but checked uniformly.
    support_ok = True
    for f, g in neighbor_pairs(n, alph, 1):
        if not _supports_equal(outputs[f.counts], outputs[g.counts]):
            support_ok = False
            break

    return DPReport(
        params=params,
        pairs=pairs,
        permutation_invariance_pass=perm_ok,
        support_consistency_pass=support_ok,
        tightest_delta=tightest,
    )


def group_privacy_g(k: int, params: PrivacyParams) -> float:
    """g_k(eps, delta) = (e^(k eps) - 1) / (e^eps - 1) * delta."""
    if k < 1:
        raise ValueError(f"group size must be >= 1, got {k}")
    if params.epsilon == 0.0:
        return k * params.delta
    return (math.expm1(k * params.epsilon) / math.expm1(params.epsilon)) * params.delta


def group_privacy_check(
    alg,
    enc: Encoding,
    params: PrivacyParams,
    k: int,
    n: int | None = None,
    alph: Alphabet | None = None,
) -> float:
    """Min over k-neighbor pairs of g_k - hockey-stick at level k*eps."""
    if k < 1:
        raise ValueError(f"group size must be >= 1, got {k}")
    n, alph = _resolve_scope(alg, n, alph)
    level = k * params.epsilon
    bound = group_privacy_g(k, params)
    outputs = {
        f.counts: _weighted_output(alg, representative(f), enc)
        for f in all_types(n, alph)
    }
    margin = math.inf
    for f, g in neighbor_pairs(n, alph, k):
        a, b = outputs[f.counts], outputs[g.counts]
        margin = min(margin, bound - cq_hockey_stick(a, b, level))
        margin = min(margin, bound - cq_hockey_stick(b, a, level))
    return margin


def check_ass1(n: int, alph: Alphabet, params: PrivacyParams) -> bool:
    """Noise condition: g_{n(|Z|-1)}(eps, delta) < 1."""
    return group_privacy_g(n * (alph.size - 1), params) < 1.0


# --- Reference mechanism ------------------------------------------------------


@dataclass(eq=False)
class TypeRandomizedResponse:
    """Release the dataset type through symmetric randomized response.

    The hypothesis register W is the released type index; the quantum
    residue is (1 - eta)|w><w| + eta I/d on a qudit indexed by types.
    Permutation invariant by construction; its privacy frontier equals that
    of classical randomized response on the type set.
    """

    n: int
    alphabet: Alphabet
    flip_mass: float
    eta: float = 0.4

    def __post_init__(self):
        if not 0 <= self.flip_mass < 1:
            raise ValueError("flip mass must lie in [0, 1)")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")

    @cached_property
    def types(self) -> tuple[TypeVector, ...]:
        return tuple(all_types(self.n, self.alphabet))

    @property
    def num_types(self) -> int:
        return len(self.types)

    @property
    def outcomes(self) -> tuple:
        return tuple(range(self.num_types))

    @property
    def b_dim(self) -> int:
        return max(2, self.num_types)

    @cached_property
    def channel(self) -> np.ndarray:
        """channel[t, w] = P(w | type t): symmetric randomized response."""
        m = self.num_types
        stay = 1.0 - self.flip_mass
        move = self.flip_mass / (m - 1) if m > 1 else 0.0
        c = np.full((m, m), move)
        np.fill_diagonal(c, stay)
        return c

    @cached_property
    def residues(self) -> tuple[np.ndarray, ...]:
        d = self.b_dim
        out = []
        for w in range(self.num_types):
            proj = np.zeros((d, d), dtype=np.complex128)
            proj[w, w] = 1.0
            out.append((1.0 - self.eta) * proj + self.eta * identity(d) / d)
        return tuple(out)

    def type_index(self, s: Dataset) -> int:
        t = dataset_type(s).counts
        return next(i for i, f in enumerate(self.types) if f.counts == t)

    def branch_outputs(self, s: Dataset, enc: Encoding):
        if enc.te_dim != 1 or enc.tr_dim != 1:
            raise ValueError("the reference mechanism uses the trivial encoding")
        row = self.channel[self.type_index(s)]
        return [(w, float(row[w]), self.residues[w]) for w in self.outcomes]

    def encoding(self) -> Encoding:
        return trivial_encoding(self.alphabet)

    def mutual_information_typed(self, p_type: np.ndarray) -> float:
        """I[S; W,residue] for a prior inducing the given type distribution.

        The conditional output depends on s only through its type and the
        residue is a function of W, so the mutual information collapses to
        the classical I(T; W) of the randomized-response channel.
        """
        p_type = np.asarray(p_type, dtype=float)
        joint = p_type[:, None] * self.channel
        p_w = joint.sum(axis=0)
        total = 0.0
        for t in range(self.num_types):
            for w in range(self.num_types):
                if joint[t, w] > 1e-15:
                    total += joint[t, w] * math.log(
                        joint[t, w] / (p_type[t] * p_w[w])
                    )
        return total

    def type_distribution(self, datasets: Sequence[Dataset], p_s: np.ndarray) -> np.ndarray:
        p_type = np.zeros(self.num_types)
        for s, p in zip(datasets, p_s):
            p_type[self.type_index(s)] += p
        return p_type


def rr_flip_mass_for(epsilon: float, delta: float, num_types: int) -> float:
    """Flip mass giving the randomized-response mechanism a tightest
    hockey-stick value of exactly delta at level epsilon.

    Stay mass a = 1 - q, per-symbol move mass b = q/(M-1); the tightest
    delta at epsilon is (a - e^eps b)_+, so solve a - e^eps b = delta.
    """
    m = num_types
    if m < 2:
        raise ValueError("need at least two types")
    q = (m - 1) * (1.0 - delta) / (m - 1 + math.exp(epsilon))
    if not 0 <= q < 1:
        raise ValueError(f"no valid flip mass for eps={epsilon}, delta={delta}, M={m}")
    return q


def rr_tightest_delta(flip_mass: float, num_types: int, epsilon: float) -> float:
    """Closed-form tightest delta of classical randomized response."""
    a = 1.0 - flip_mass
    b = flip_mass / (num_types - 1)
    return max(0.0, a - math.exp(epsilon) * b)
