"""Learning algorithms as per-dataset quantum instruments, loss observables,
empirical/true loss, generalization error, and sub-Gaussian estimation.

An algorithm only has to provide `outcomes` and
`branch_outputs(s, enc) -> [(w, prob, normalized block on te ⊗ out)]`;
`KrausInstrument` is the generic realization, `IIDAlgorithm` the tensor
product one, and the privacy module adds a closed-form mechanism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Hashable, Mapping, Protocol, Sequence

import numpy as np

from .linalg import (
    LinalgError,
    as_square,
    dagger,
    eig_hermitian,
    hermitian_part,
    identity,
    min_eig,
    partial_trace,
    permute_factors,
    tensor,
)
from .states import (
    Alphabet,
    CQState,
    Dataset,
    Encoding,
    all_datasets,
    encode_dataset_grouped,
)
from .divergences import cq_product_split

COMPLETENESS_TOL = 1e-9
ZERO_PROB = 1e-12
MGF_EXP_CAP = 700.0
DEFAULT_LAMBDA_GRID = tuple(
    s * 0.01 * 2**k for s in (-1.0, 1.0) for k in range(13)
)


def _key(s: Dataset) -> tuple[str, ...]:
    return s.entries


class Algorithm(Protocol):
    outcomes: tuple

    def branch_outputs(
        self, s: Dataset, enc: Encoding
    ) -> list[tuple[Hashable, float, np.ndarray | None]]: ...


@dataclass
class KrausInstrument:
    """Per-dataset instrument given as Kraus-operator lists per outcome.

    Each Kraus operator maps the train factor (dimension tr_dim) into the
    output factor (dimension b_dim); the instrument acts as identity on the
    test factor. Completeness sum_{w,j} K†K = I is enforced per dataset.
    """

    branches: Mapping[tuple[str, ...], Mapping[Hashable, Sequence[np.ndarray]]]
    tr_dim: int
    b_dim: int
    outcomes: tuple

    def __post_init__(self):
        for skey, per_w in self.branches.items():
            total = np.zeros((self.tr_dim, self.tr_dim), dtype=np.complex128)
            for w, kraus_list in per_w.items():
                if w not in self.outcomes:
                    raise ValueError(f"unknown outcome {w!r} for dataset {skey}")
                for k in kraus_list:
                    k = np.asarray(k, dtype=np.complex128)
                    if k.shape != (self.b_dim, self.tr_dim):
                        raise ValueError(
                            f"Kraus shape {k.shape} != ({self.b_dim}, {self.tr_dim})"
                        )
                    total += dagger(k) @ k
            if np.max(np.abs(total - identity(self.tr_dim))) > COMPLETENESS_TOL:
                raise ValueError(f"instrument for {skey} is not trace preserving")

    def branch_outputs(self, s: Dataset, enc: Encoding):
        skey = _key(s)
        if skey not in self.branches:
            raise ValueError(f"instrument not defined on dataset {skey}")
        te_dim = enc.te_dim**s.n
        tr_dim = enc.tr_dim**s.n
        if tr_dim != self.tr_dim:
            raise ValueError(f"encoding train dim {tr_dim} != instrument dim {self.tr_dim}")
        rho = encode_dataset_grouped(s, enc)
        i_te = identity(te_dim)
        out = []
        for w in self.outcomes:
            kraus_list = self.branches[skey].get(w, ())
            blk = np.zeros((te_dim * self.b_dim,) * 2, dtype=np.complex128)
            for k in kraus_list:
                lifted = np.kron(i_te, np.asarray(k, dtype=np.complex128))
                blk += lifted @ rho @ dagger(lifted)
            p = float(np.trace(blk).real)
            out.append((w, p, blk / p if p > ZERO_PROB else None))
        return out


@dataclass
class LossFamily:
    """PSD loss observables on test ⊗ output, keyed by (dataset, outcome)."""

    ops: Mapping[tuple[tuple[str, ...], Hashable], np.ndarray]
    bounded: bool = False

    def __post_init__(self):
        for key, op in self.ops.items():
            m = as_square(op)
            lo = min_eig(m)
            if lo < -1e-10:
                raise ValueError(f"loss at {key} has eigenvalue {lo:.3e} < -1e-10")
            if self.bounded:
                hi = float(np.linalg.eigvalsh(hermitian_part(m))[-1])
                if hi > 1 + 1e-10:
                    raise ValueError(f"bounded loss at {key} has eigenvalue {hi} > 1")

    def op(self, s: Dataset, w) -> np.ndarray:
        key = (_key(s), w)
        if key not in self.ops:
            raise KeyError(f"no loss operator for {key}")
        return np.asarray(self.ops[key], dtype=np.complex128)


@dataclass
class JointOutputState:
    """The joint classical-quantum state of (dataset, outcome, test, output)."""

    datasets: tuple[Dataset, ...]
    p_s: np.ndarray
    outcomes: tuple
    p_w_given_s: np.ndarray
    blocks: tuple[tuple[np.ndarray | None, ...], ...]
    te_dim: int
    b_dim: int

    def __post_init__(self):
        rows = np.asarray(self.p_w_given_s, dtype=float)
        if rows.shape != (len(self.datasets), len(self.outcomes)):
            raise ValueError("p_w_given_s has wrong shape")
        bad = np.abs(rows.sum(axis=1) - 1.0) > 1e-9
        if np.any(bad):
            raise ValueError("conditional outcome probabilities do not sum to 1")
        if abs(float(np.sum(self.p_s)) - 1.0) > 1e-9:
            raise ValueError("dataset prior does not sum to 1")

    @cached_property
    def p_w(self) -> np.ndarray:
        return self.p_s @ self.p_w_given_s

    @cached_property
    def joint_cq(self) -> CQState:
        labels, probs, blks = [], [], []
        for i, _ in enumerate(self.datasets):
            for j, _ in enumerate(self.outcomes):
                labels.append((i, j))
                probs.append(self.p_s[i] * self.p_w_given_s[i, j])
                blks.append(self.blocks[i][j])
        return CQState(tuple(labels), np.asarray(probs), tuple(blks), (self.te_dim, self.b_dim))

    @cached_property
    def product_cq(self) -> CQState:
        """sigma^{S,te} ⊗ sigma^{W,out}: product of the bipartition marginals."""
        return cq_product_split(self.joint_cq, label_axes_a=(0,), factor_axes_a=(0,))

    @cached_property
    def rho_te(self) -> tuple[np.ndarray | None, ...]:
        """Test-side marginal per dataset (from the product state blocks)."""
        out: list[np.ndarray | None] = []
        for i, _ in enumerate(self.datasets):
            blk = next(
                (
                    self.product_cq.blocks[self.product_cq.labels.index((i, j))]
                    for j, _ in enumerate(self.outcomes)
                    if self.product_cq.blocks[self.product_cq.labels.index((i, j))] is not None
                ),
                None,
            )
            out.append(
                partial_trace(blk, [self.te_dim, self.b_dim], keep=[0]) if blk is not None else None
            )
        return tuple(out)

    @cached_property
    def sigma_w(self) -> tuple[np.ndarray | None, ...]:
        """Output-side marginal per outcome, skipping zero-probability w."""
        out: list[np.ndarray | None] = []
        for j, _ in enumerate(self.outcomes):
            if self.p_w[j] <= ZERO_PROB:
                out.append(None)
                continue
            acc = np.zeros((self.b_dim, self.b_dim), dtype=np.complex128)
            for i, _ in enumerate(self.datasets):
                p = self.p_s[i] * self.p_w_given_s[i, j]
                blk = self.blocks[i][j]
                if p > ZERO_PROB and blk is not None:
                    acc += p * partial_trace(blk, [self.te_dim, self.b_dim], keep=[1])
            out.append(acc / self.p_w[j])
        return tuple(out)

    def mutual_information(self) -> float:
        """I[dataset+test ; outcome+output] on the joint state."""
        from .divergences import mutual_information

        return mutual_information(self.joint_cq, label_axes_a=(0,), factor_axes_a=(0,))


def apply_algorithm(
    alg: Algorithm,
    datasets: Sequence[Dataset],
    p_s: Sequence[float],
    enc: Encoding,
) -> JointOutputState:
    """Run the instrument on every dataset and assemble the joint state."""
    if len(datasets) != len(p_s):
        raise ValueError("prior length does not match dataset list")
    p = np.asarray(p_s, dtype=float)
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("prior is not a probability vector")
    outcomes = tuple(alg.outcomes)
    cond = np.zeros((len(datasets), len(outcomes)))
    blocks: list[tuple[np.ndarray | None, ...]] = []
    te_dim = b_dim = None
    for i, s in enumerate(datasets):
        row: list[np.ndarray | None] = [None] * len(outcomes)
        for w, prob, blk in alg.branch_outputs(s, enc):
            j = outcomes.index(w)
            cond[i, j] = prob
            row[j] = blk
            if blk is not None:
                d_te = enc.te_dim**s.n
                te_dim, b_dim = d_te, blk.shape[0] // d_te
        blocks.append(tuple(row))
    if te_dim is None:
        raise ValueError("algorithm produced no output blocks")
    return JointOutputState(
        datasets=tuple(datasets),
        p_s=p,
        outcomes=outcomes,
        p_w_given_s=cond,
        blocks=tuple(blocks),
        te_dim=te_dim,
        b_dim=b_dim,
    )


# --- Losses ----------------------------------------------------------------


def empirical_loss(j: JointOutputState, loss: LossFamily) -> float:
    """Expected loss under the joint output state."""
    total = 0.0
    for i, s in enumerate(j.datasets):
        for k, w in enumerate(j.outcomes):
            weight = j.p_s[i] * j.p_w_given_s[i, k]
            if weight <= ZERO_PROB:
                continue
            blk = j.blocks[i][k]
            total += weight * float(np.trace(loss.op(s, w) @ blk).real)
    return total


def true_loss(j: JointOutputState, loss: LossFamily) -> float:
    """Expected loss against fresh data: evaluated on the product of marginals."""
    total = 0.0
    prod = j.product_cq
    for idx, (i, k) in enumerate(prod.labels):
        weight = prod.probs[idx]
        if weight <= ZERO_PROB or prod.blocks[idx] is None:
            continue
        total += weight * float(np.trace(loss.op(j.datasets[i], j.outcomes[k]) @ prod.blocks[idx]).real)
    return total


def gen_error_expected(j: JointOutputState, loss: LossFamily) -> float:
    return abs(empirical_loss(j, loss) - true_loss(j, loss))


def conditional_true_loss(j: JointOutputState, loss: LossFamily, k: int) -> float:
    """True loss of hypothesis w_k alone: E_S Tr[L(S, w_k) (rho_te ⊗ sigma_w)]."""
    if j.p_w[k] <= ZERO_PROB:
        raise ValueError(f"outcome {j.outcomes[k]!r} has zero probability")
    sig = j.sigma_w[k]
    total = 0.0
    for i, s in enumerate(j.datasets):
        if j.p_s[i] <= ZERO_PROB or j.rho_te[i] is None:
            continue
        block = np.kron(j.rho_te[i], sig)
        total += j.p_s[i] * float(np.trace(loss.op(s, j.outcomes[k]) @ block).real)
    return total


def gen_error_pointwise(j: JointOutputState, loss: LossFamily, i: int, k: int) -> float:
    """|empirical loss at (s_i, w_k) - true loss of w_k|."""
    weight = j.p_s[i] * j.p_w_given_s[i, k]
    if weight <= ZERO_PROB:
        raise ValueError("pointwise generalization error needs positive weight")
    emp = float(np.trace(loss.op(j.datasets[i], j.outcomes[k]) @ j.blocks[i][k]).real)
    return abs(emp - conditional_true_loss(j, loss, k))


# --- Sub-Gaussian parameter estimation --------------------------------------
#
# Every mode reduces the centered moment generating function to a scalar
# spectral mixture: the loss operator is diagonalized once per label and the
# reference product state contributes nonnegative weights on its spectrum,
# after which the whole lambda grid costs nothing.


@dataclass(eq=False)
class SpectralMixture:
    values: np.ndarray
    weights: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.values))

    def centered_log_mgf(self, lam: float) -> float | None:
        """ln E[e^(lam (X - mean))], or None when the exponent overflows."""
        dev = self.values - self.mean
        if np.max(np.abs(lam * dev)) > MGF_EXP_CAP:
            return None
        return float(np.log(np.dot(self.weights, np.exp(lam * dev))))


def _mixture(entries: list[tuple[float, np.ndarray, np.ndarray]]) -> SpectralMixture:
    """Spectral mixture of (weight, loss op, reference block) triples."""
    vals, wts = [], []
    for weight, op, ref in entries:
        if weight <= ZERO_PROB:
            continue
        dec = eig_hermitian(op)
        diag = np.einsum("ij,jk,ki->i", dagger(dec.eigenvectors), ref, dec.eigenvectors).real
        vals.append(dec.eigenvalues)
        wts.append(weight * np.clip(diag, 0.0, None))
    values = np.concatenate(vals)
    weights = np.concatenate(wts)
    total = weights.sum()
    return SpectralMixture(values=values, weights=weights / total)


@dataclass(eq=False)
class SubGaussianEstimate:
    """Grid estimate of the sub-Gaussian variance proxy.

    alpha_hat is the sup over the grid of sqrt(2 ln MGF(lam)) / |lam|; it
    under-estimates the true infimal alpha, so consumers multiply by a
    safety factor before asserting any bound.
    """

    alpha_hat: float
    lambda_grid: tuple[float, ...]
    worst_lambda: float
    mode: str
    skipped: tuple[float, ...]
    mixtures: tuple[SpectralMixture, ...]

    def log_mgf_margins(self) -> list[float]:
        """lam^2 alpha^2 / 2 - ln MGF(lam) over the grid (should be >= -tol)."""
        out = []
        for mix in self.mixtures:
            for lam in self.lambda_grid:
                v = mix.centered_log_mgf(lam)
                if v is not None:
                    out.append(0.5 * lam**2 * self.alpha_hat**2 - v)
        return out


def _estimate_from_mixtures(
    mixtures: list[SpectralMixture], grid: Sequence[float], mode: str
) -> SubGaussianEstimate:
    grid = tuple(float(l) for l in grid)
    if any(abs(l) < 1e-6 for l in grid):
        raise ValueError("lambda grid must exclude |lambda| < 1e-6")
    alpha, worst, skipped = 0.0, grid[0], []
    for mix in mixtures:
        for lam in grid:
            v = mix.centered_log_mgf(lam)
            if v is None:
                skipped.append(lam)
                continue
            ratio = math.sqrt(2.0 * max(v, 0.0)) / abs(lam)
            if ratio > alpha:
                alpha, worst = ratio, lam
    return SubGaussianEstimate(
        alpha_hat=alpha,
        lambda_grid=grid,
        worst_lambda=worst,
        mode=mode,
        skipped=tuple(sorted(set(skipped))),
        mixtures=tuple(mixtures),
    )


def estimate_alpha(
    system,
    loss: LossFamily | None = None,
    mode: str = "global",
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
) -> SubGaussianEstimate:
    """Estimate the sub-Gaussian parameter of a loss family.

    mode="global": `system` is a JointOutputState, the MGF runs on the
    product state with the full loss operator. mode="local" and
    mode="conditional-local": `system` is an IIDInstance, the MGF runs on
    the local product ensemble (jointly over (z, w), or per w with the max
    taken over w).
    """
    if mode == "global":
        if loss is None:
            raise ValueError("global mode needs the loss family")
        j: JointOutputState = system
        entries = []
        prod = j.product_cq
        for idx, (i, k) in enumerate(prod.labels):
            if prod.probs[idx] <= ZERO_PROB or prod.blocks[idx] is None:
                continue
            entries.append(
                (prod.probs[idx], loss.op(j.datasets[i], j.outcomes[k]), prod.blocks[idx])
            )
        return _estimate_from_mixtures([_mixture(entries)], lambda_grid, mode)
    if mode == "local":
        inst: IIDInstance = system
        entries = []
        for zi, z in enumerate(inst.alphabet.symbols):
            for k, w in enumerate(inst.outcomes):
                weight = inst.p_z[zi] * inst.p_w[k]
                if weight <= ZERO_PROB or inst.sigma_w_local[k] is None:
                    continue
                ref = np.kron(inst.rho_te_local[zi], inst.sigma_w_local[k])
                entries.append((weight, inst.local_loss(w, z), ref))
        return _estimate_from_mixtures([_mixture(entries)], lambda_grid, mode)
    if mode == "conditional-local":
        inst = system
        mixtures = []
        for k, w in enumerate(inst.outcomes):
            if inst.p_w[k] <= ZERO_PROB or inst.sigma_w_local[k] is None:
                continue
            entries = []
            for zi, z in enumerate(inst.alphabet.symbols):
                if inst.p_z[zi] <= ZERO_PROB:
                    continue
                ref = np.kron(inst.rho_te_local[zi], inst.sigma_w_local[k])
                entries.append((inst.p_z[zi], inst.local_loss(w, z), ref))
            mixtures.append(_mixture(entries))
        return _estimate_from_mixtures(mixtures, lambda_grid, mode)
    raise ValueError(f"unknown mode {mode!r}")


# --- I.I.D. structure --------------------------------------------------------


@dataclass
class LocalInstrument:
    """Per-symbol branch maps K^{(z)}_{w,j}: one Kraus list per (z, outcome).

    Individual branches are CP trace non-increasing; global completeness of
    the n-fold tensor (with a shared outcome label) is validated when the
    tensor algorithm is built.
    """

    branches: Mapping[tuple[str, Hashable], Sequence[np.ndarray]]
    tr_dim: int
    b_dim: int
    outcomes: tuple

    def kraus(self, z: str, w) -> Sequence[np.ndarray]:
        return self.branches.get((z, w), ())

    def branch_map_norm(self, z: str, w) -> np.ndarray:
        """sum_j K†K for the (z, w) branch."""
        total = np.zeros((self.tr_dim, self.tr_dim), dtype=np.complex128)
        for k in self.kraus(z, w):
            k = np.asarray(k, dtype=np.complex128)
            total += dagger(k) @ k
        return total


def scaled_branch_instrument(
    channels: Mapping[tuple[str, Hashable], Sequence[np.ndarray]],
    outcome_probs: Mapping[Hashable, float],
    n: int,
    tr_dim: int,
    b_dim: int,
) -> LocalInstrument:
    """Local branches q_w^(1/n) * channel(z, w) from trace-preserving channels.

    The n-fold tensor with a shared outcome label is trace preserving
    exactly when the per-branch traces multiply to a distribution, which
    this construction guarantees with outcome probabilities q_w.
    """
    outcomes = tuple(outcome_probs)
    total = sum(outcome_probs.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError("outcome probabilities must sum to 1")
    scaled = {}
    for (z, w), kraus_list in channels.items():
        factor = outcome_probs[w] ** (1.0 / (2.0 * n))
        scaled[(z, w)] = tuple(factor * np.asarray(k, dtype=np.complex128) for k in kraus_list)
    return LocalInstrument(scaled, tr_dim=tr_dim, b_dim=b_dim, outcomes=outcomes)


@dataclass
class IIDAlgorithm:
    """n-fold tensor of a local instrument with a shared outcome label."""

    local: LocalInstrument
    n: int
    alphabet: Alphabet

    def __post_init__(self):
        # Global completeness on every input sequence.
        norms = {
            (z, w): self.local.branch_map_norm(z, w)
            for z in self.alphabet.symbols
            for w in self.local.outcomes
        }
        for s in all_datasets(self.n, self.alphabet):
            total = np.zeros((self.local.tr_dim**self.n,) * 2, dtype=np.complex128)
            for w in self.local.outcomes:
                total += reduce(np.kron, [norms[(z, w)] for z in s.entries])
            if np.max(np.abs(total - identity(total.shape[0]))) > COMPLETENESS_TOL:
                raise ValueError(
                    f"tensor instrument is not trace preserving on {s.entries}"
                )

    @property
    def outcomes(self) -> tuple:
        return self.local.outcomes

    def branch_outputs(self, s: Dataset, enc: Encoding):
        if s.n != self.n:
            raise ValueError(f"dataset length {s.n} != {self.n}")
        if enc.tr_dim != self.local.tr_dim:
            raise ValueError("encoding train dim does not match local instrument")
        te, b = enc.te_dim, self.local.b_dim
        i_te = identity(te)
        out = []
        for w in self.outcomes:
            factors = []
            for z in s.entries:
                a = np.zeros((te * b, te * b), dtype=np.complex128)
                for k in self.local.kraus(z, w):
                    lifted = np.kron(i_te, np.asarray(k, dtype=np.complex128))
                    a += lifted @ enc.state(z).mat @ dagger(lifted)
                factors.append(a)
            blk = reduce(np.kron, factors)
            p = float(np.trace(blk).real)
            if p <= ZERO_PROB:
                out.append((w, max(p, 0.0), None))
                continue
            dims = [te, b] * self.n
            order = [2 * i for i in range(self.n)] + [2 * i + 1 for i in range(self.n)]
            out.append((w, p, permute_factors(blk / p, dims, order)))
        return out

    def to_kraus_instrument(self, max_n: int = 2) -> KrausInstrument:
        """Materialized Kraus form for small-n cross-checks."""
        if self.n > max_n:
            raise ValueError("materializing the tensor Kraus form is capped at small n")
        import itertools

        branches = {}
        for s in all_datasets(self.n, self.alphabet):
            per_w = {}
            for w in self.outcomes:
                lists = [self.local.kraus(z, w) for z in s.entries]
                ops = [
                    reduce(np.kron, combo) for combo in itertools.product(*lists)
                ] if all(lists) else []
                per_w[w] = ops
            branches[s.entries] = per_w
        return KrausInstrument(
            branches,
            tr_dim=self.local.tr_dim**self.n,
            b_dim=self.local.b_dim**self.n,
            outcomes=self.outcomes,
        )


def build_iid_algorithm(local: LocalInstrument, n: int, alph: Alphabet) -> IIDAlgorithm:
    return IIDAlgorithm(local=local, n=n, alphabet=alph)


def embed_local_op(op: np.ndarray, i: int, n: int, te_dim: int, b_dim: int) -> np.ndarray:
    """Embed an operator on (te_i, b_i) into the grouped (te^n, b^n) layout."""
    op = as_square(op)
    pair = te_dim * b_dim
    parts = [identity(pair)] * n
    parts[i] = op
    interleaved = reduce(np.kron, parts)
    dims = [te_dim, b_dim] * n
    order = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    return permute_factors(interleaved, dims, order)


def build_avg_loss(
    local_losses: Mapping[tuple[Hashable, str], np.ndarray],
    n: int,
    alph: Alphabet,
    te_dim: int,
    b_dim: int,
    outcomes: Sequence[Hashable],
    bounded: bool = False,
) -> LossFamily:
    """Average-of-local-losses family: L(s,w) = (1/n) sum_i embed(L̂(w, z_i))."""
    ops = {}
    for s in all_datasets(n, alph):
        for w in outcomes:
            total = None
            for i, z in enumerate(s.entries):
                emb = embed_local_op(
                    np.asarray(local_losses[(w, z)], dtype=np.complex128), i, n, te_dim, b_dim
                )
                total = emb if total is None else total + emb
            ops[(s.entries, w)] = total / n
    return LossFamily(ops, bounded=bounded)


@dataclass(eq=False)
class IIDInstance:
    """A complete iid learning instance: data law, encoding, tensor
    algorithm, and the average loss built from local loss observables."""

    alphabet: Alphabet
    p_z: np.ndarray
    local_enc: Encoding
    algorithm: IIDAlgorithm
    local_losses: Mapping[tuple[Hashable, str], np.ndarray]
    bounded: bool = False

    @property
    def n(self) -> int:
        return self.algorithm.n

    @property
    def outcomes(self) -> tuple:
        return self.algorithm.outcomes

    def local_loss(self, w, z: str) -> np.ndarray:
        return np.asarray(self.local_losses[(w, z)], dtype=np.complex128)

    @cached_property
    def joint(self) -> JointOutputState:
        datasets = all_datasets(self.n, self.alphabet)
        p = np.array(
            [math.prod(self.p_z[self.alphabet.index(z)] for z in s.entries) for s in datasets]
        )
        return apply_algorithm(self.algorithm, datasets, p, self.local_enc)

    @cached_property
    def loss(self) -> LossFamily:
        return build_avg_loss(
            self.local_losses,
            self.n,
            self.alphabet,
            self.local_enc.te_dim,
            self.algorithm.local.b_dim,
            self.outcomes,
            bounded=self.bounded,
        )

    @cached_property
    def p_w(self) -> np.ndarray:
        return self.joint.p_w

    @cached_property
    def rho_te_local(self) -> tuple[np.ndarray, ...]:
        return tuple(
            partial_trace(
                self.local_enc.state(z).mat,
                [self.local_enc.te_dim, self.local_enc.tr_dim],
                keep=[0],
            )
            for z in self.alphabet.symbols
        )

    @cached_property
    def sigma_w_local(self) -> tuple[np.ndarray | None, ...]:
        """Single-copy output marginal: first b factor of the global sigma_w."""
        b = self.algorithm.local.b_dim
        out = []
        for k, _ in enumerate(self.outcomes):
            sig = self.joint.sigma_w[k]
            out.append(
                partial_trace(sig, [b] * self.n, keep=[0]) if sig is not None else None
            )
        return tuple(out)


# --- JSON ingestion ----------------------------------------------------------


def instrument_from_json(data) -> KrausInstrument:
    """Kraus arrays per (dataset, outcome); datasets keyed "z1,z2,...";
    matrices as nested [re, im] arrays."""
    from .states import matrix_from_json

    outcomes = tuple(data["outcomes"])
    branches = {}
    for skey, per_w in data["kraus"].items():
        entries = tuple(skey.split(","))
        branches[entries] = {
            _parse_outcome(w, outcomes): [matrix_from_json(k) for k in kraus_list]
            for w, kraus_list in per_w.items()
        }
    return KrausInstrument(
        branches,
        tr_dim=int(data["tr_dim"]),
        b_dim=int(data["b_dim"]),
        outcomes=outcomes,
    )


def local_instrument_from_json(data) -> LocalInstrument:
    """Kraus arrays per (symbol, outcome) for the iid mode."""
    from .states import matrix_from_json

    outcomes = tuple(data["outcomes"])
    branches = {}
    for key, kraus_list in data["kraus"].items():
        z, w = key.split(",")
        branches[(z, _parse_outcome(w, outcomes))] = [matrix_from_json(k) for k in kraus_list]
    return LocalInstrument(
        branches,
        tr_dim=int(data["tr_dim"]),
        b_dim=int(data["b_dim"]),
        outcomes=outcomes,
    )


def losses_from_json(data, bounded: bool = False) -> LossFamily:
    from .states import matrix_from_json

    ops = {}
    for key, mat in data.items():
        *entries, w = key.split(",")
        ops[(tuple(entries), w)] = matrix_from_json(mat)
    return LossFamily(ops, bounded=bounded)


def _parse_outcome(w, outcomes):
    if w in outcomes:
        return w
    for cand in outcomes:
        if str(cand) == w:
            return cand
    raise ValueError(f"outcome {w!r} not in {outcomes}")
