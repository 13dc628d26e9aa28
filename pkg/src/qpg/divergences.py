"""Information measures on density matrices and classical-quantum states.

All logarithms are natural. Infinite divergences are represented explicitly
through a support_violation flag rather than a large float, and propagate
through every bound that consumes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (
    LinalgError,
    as_square,
    eig_hermitian,
    hermitian_part,
    identity,
    matrix_fn,
    operator_norm,
    partial_trace,
    permute_factors,
    positive_part_trace,
    support_projector,
    SUPPORT_RTOL,
    tensor,
)
from .states import CQState

SUPPORT_VIOLATION_TOL = 1e-9
ZERO_PROB = 1e-15


@dataclass(frozen=True)
class DivergenceValue:
    """A divergence in nats, +inf exactly when the support check fails."""

    value: float
    support_violation: bool = False

    def __post_init__(self):
        if self.support_violation and not math.isinf(self.value):
            raise ValueError("support violation must carry an infinite value")

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


_INF = DivergenceValue(math.inf, support_violation=True)


def _mat(x) -> np.ndarray:
    return as_square(getattr(x, "mat", x))


def _support_violated(rho: np.ndarray, sigma: np.ndarray, cutoff: float) -> bool:
    """True when rho puts more than SUPPORT_VIOLATION_TOL mass on ker(sigma)."""
    kernel = identity(sigma.shape[0]) - support_projector(sigma, cutoff)
    mass = float(np.trace(kernel @ rho).real)
    return mass > SUPPORT_VIOLATION_TOL


def relative_entropy(rho, sigma, cutoff: float = SUPPORT_RTOL) -> DivergenceValue:
    """Umegaki relative entropy Tr[rho(ln rho - ln sigma)]."""
    r, s = _mat(rho), _mat(sigma)
    if r.shape != s.shape:
        raise LinalgError(f"dimension mismatch {r.shape} vs {s.shape}")
    if _support_violated(r, s, cutoff):
        return _INF
    w = np.linalg.eigvalsh(hermitian_part(r))
    scale = cutoff * float(np.max(np.abs(w))) if w.size else 0.0
    ent = float(np.sum(w[w > scale] * np.log(w[w > scale])))
    log_sigma = matrix_fn(s, math.log, cutoff)
    cross = float(np.trace(r @ log_sigma).real)
    return DivergenceValue(ent - cross)


def d_max(rho, sigma, cutoff: float = SUPPORT_RTOL) -> DivergenceValue:
    """Max-relative entropy: least ln(t) with rho ⪯ t * sigma."""
    r, s = _mat(rho), _mat(sigma)
    if r.shape != s.shape:
        raise LinalgError(f"dimension mismatch {r.shape} vs {s.shape}")
    if _support_violated(r, s, cutoff):
        return _INF
    inv_sqrt = matrix_fn(s, lambda x: x ** -0.5, cutoff)
    t = inv_sqrt @ r @ inv_sqrt
    top = float(np.linalg.eigvalsh(hermitian_part(t))[-1])
    return DivergenceValue(math.log(max(top, ZERO_PROB)))


def sandwiched_renyi(rho, sigma, gamma: float, cutoff: float = SUPPORT_RTOL) -> DivergenceValue:
    """Sandwiched Rényi divergence of order gamma > 1."""
    if gamma <= 1:
        raise ValueError(f"order must exceed 1, got {gamma}")
    r, s = _mat(rho), _mat(sigma)
    if r.shape != s.shape:
        raise LinalgError(f"dimension mismatch {r.shape} vs {s.shape}")
    if _support_violated(r, s, cutoff):
        return _INF
    term = _sandwich_power_trace(r, s, gamma, cutoff)
    return DivergenceValue(math.log(max(term, ZERO_PROB)) / (gamma - 1.0))


def _sandwich_power_trace(r: np.ndarray, s: np.ndarray, gamma: float, cutoff: float) -> float:
    """Tr[(s^e r s^e)^gamma] with e = (1-gamma)/(2 gamma), pseudo powers."""
    e = (1.0 - gamma) / (2.0 * gamma)
    s_pow = matrix_fn(s, lambda x: x**e, cutoff)
    core = hermitian_part(s_pow @ r @ s_pow)
    w = np.linalg.eigvalsh(core)
    w = np.clip(w, 0.0, None)
    return float(np.sum(w**gamma))


def hockey_stick(rho, sigma, eps: float) -> float:
    """E_{e^eps}(rho || sigma) = Tr[(rho - e^eps sigma)_+]."""
    if eps < 0:
        raise ValueError(f"epsilon must be >= 0, got {eps}")
    r, s = _mat(rho), _mat(sigma)
    if r.shape != s.shape:
        raise LinalgError(f"dimension mismatch {r.shape} vs {s.shape}")
    return positive_part_trace(r - math.exp(eps) * s)


# --- Classical-quantum (labelled block) versions --------------------------


def _aligned(a: CQState, b: CQState) -> None:
    if a.labels != b.labels:
        raise ValueError("CQ states must share the same ordered label set")
    if a.dims != b.dims:
        raise ValueError(f"CQ states have different quantum dims {a.dims} vs {b.dims}")


def cq_relative_entropy(a: CQState, b: CQState, cutoff: float = SUPPORT_RTOL) -> DivergenceValue:
    """Blockwise relative entropy between two aligned CQ states."""
    _aligned(a, b)
    total = 0.0
    for p, blk_a, q, blk_b in zip(a.probs, a.blocks, b.probs, b.blocks):
        if p <= ZERO_PROB:
            continue
        if q <= ZERO_PROB or blk_b is None:
            return _INF
        d = relative_entropy(blk_a, blk_b, cutoff)
        if not d.finite:
            return _INF
        total += p * (math.log(p) - math.log(q)) + p * d.value
    return DivergenceValue(total)


def cq_sandwiched_renyi(a: CQState, b: CQState, gamma: float, cutoff: float = SUPPORT_RTOL) -> DivergenceValue:
    """Blockwise sandwiched Rényi divergence between aligned CQ states."""
    if gamma <= 1:
        raise ValueError(f"order must exceed 1, got {gamma}")
    _aligned(a, b)
    total = 0.0
    for p, blk_a, q, blk_b in zip(a.probs, a.blocks, b.probs, b.blocks):
        if p <= ZERO_PROB:
            continue
        if q <= ZERO_PROB or blk_b is None:
            return _INF
        if _support_violated(p * blk_a, q * blk_b, cutoff):
            return _INF
        total += _sandwich_power_trace(p * blk_a, q * blk_b, gamma, cutoff)
    return DivergenceValue(math.log(max(total, ZERO_PROB)) / (gamma - 1.0))


def cq_hockey_stick(a: CQState, b: CQState, eps: float) -> float:
    """Blockwise hockey-stick divergence between aligned CQ states."""
    if eps < 0:
        raise ValueError(f"epsilon must be >= 0, got {eps}")
    _aligned(a, b)
    scale = math.exp(eps)
    d = a.quantum_dim
    total = 0.0
    for p, blk_a, q, blk_b in zip(a.probs, a.blocks, b.probs, b.blocks):
        x = np.zeros((d, d), dtype=np.complex128)
        if p > ZERO_PROB and blk_a is not None:
            x = x + p * blk_a
        if q > ZERO_PROB and blk_b is not None:
            x = x - scale * q * blk_b
        total += positive_part_trace(x)
    return total


def _project_label(label, axes: tuple[int, ...]):
    return tuple(label[i] for i in axes)


def cq_product_split(
    state: CQState,
    label_axes_a: Sequence[int],
    factor_axes_a: Sequence[int],
) -> CQState:
    """Product of the two marginal CQ states across the given bipartition.

    Labels must be tuples; side A keeps the label components in
    label_axes_a and the quantum factors in factor_axes_a, side B keeps the
    complement. The result has the original labels, factor order and block
    layout, with each block replaced by (A marginal) ⊗ (B marginal),
    permuted back to the original factor interleaving.
    """
    la = tuple(sorted(set(int(i) for i in label_axes_a)))
    fa = tuple(sorted(set(int(i) for i in factor_axes_a)))
    arity = len(state.labels[0]) if state.labels else 0
    k = len(state.dims)
    lb = tuple(i for i in range(arity) if i not in la)
    fb = tuple(i for i in range(k) if i not in fa)
    if any(i < 0 or i >= arity for i in la) or any(i < 0 or i >= k for i in fa):
        raise ValueError("bipartition axes out of range")

    def marginal(axes_lab, axes_fac):
        probs: dict = {}
        blocks: dict = {}
        d = math.prod(state.dims[i] for i in axes_fac) if axes_fac else 1
        for lab, p, blk in zip(state.labels, state.probs, state.blocks):
            if p <= ZERO_PROB or blk is None:
                continue
            key = _project_label(lab, axes_lab)
            part = (
                partial_trace(blk, state.dims, keep=axes_fac)
                if axes_fac
                else np.array([[np.trace(blk)]], dtype=np.complex128)
            )
            probs[key] = probs.get(key, 0.0) + p
            blocks[key] = blocks.get(key, np.zeros((d, d), dtype=np.complex128)) + p * part
        return {key: blocks[key] / probs[key] for key in probs}, probs

    blocks_a, probs_a = marginal(la, fa)
    blocks_b, probs_b = marginal(lb, fb)

    # Factor order of A ⊗ B, then the permutation back to the original order.
    combined = list(fa) + list(fb)
    order = [combined.index(i) for i in range(k)]
    dims_combined = [state.dims[i] for i in combined]

    out_blocks: list[np.ndarray | None] = []
    out_probs = []
    for lab, p in zip(state.labels, state.probs):
        ka, kb = _project_label(lab, la), _project_label(lab, lb)
        if ka not in blocks_a or kb not in blocks_b:
            out_probs.append(0.0)
            out_blocks.append(None)
            continue
        out_probs.append(probs_a[ka] * probs_b[kb])
        prod = np.kron(blocks_a[ka], blocks_b[kb])
        out_blocks.append(permute_factors(prod, dims_combined, order))
    return CQState(state.labels, np.asarray(out_probs), tuple(out_blocks), state.dims)


def mutual_information(
    state: CQState,
    label_axes_a: Sequence[int],
    factor_axes_a: Sequence[int],
) -> float:
    """Mutual information across a bipartition of label components/factors.

    Equals the relative entropy between the CQ state and the product of its
    two marginals; for fully classical (diagonal single-dim) states this is
    the Shannon mutual information, and for a single classical label against
    the whole quantum factor it is the Holevo quantity.
    """
    prod = cq_product_split(state, label_axes_a, factor_axes_a)
    val = cq_relative_entropy(state, prod)
    if not val.finite:
        raise LinalgError("mutual information came out infinite; state is inconsistent")
    if val.value < -1e-9:
        raise LinalgError(f"mutual information {val.value} is negative beyond tolerance")
    return max(val.value, 0.0)


def holevo_information(state: CQState) -> float:
    """I[label; quantum factor] = sum_l P(l) D(block_l || marginal)."""
    from .states import cq_quantum_marginal

    marg = cq_quantum_marginal(state).mat
    total = 0.0
    for p, blk in zip(state.probs, state.blocks):
        if p <= ZERO_PROB or blk is None:
            continue
        d = relative_entropy(blk, marg)
        if not d.finite:
            raise LinalgError("Holevo term infinite; blocks exceed marginal support")
        total += p * d.value
    return total


def sibson_mi(joint: np.ndarray, gamma: float) -> float:
    """Sibson mutual information of order gamma for a classical joint.

    joint[s, w] is a probability table. Closed form:
    (gamma/(gamma-1)) ln sum_w ( sum_s P(s) P(w|s)^gamma )^(1/gamma).
    """
    if gamma <= 1:
        raise ValueError(f"order must exceed 1, got {gamma}")
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2 or np.any(p < -1e-12):
        raise ValueError("joint must be a nonnegative 2-d table")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"joint sums to {p.sum()}, not 1")
    ps = p.sum(axis=1)
    total = 0.0
    for w in range(p.shape[1]):
        inner = 0.0
        for s in range(p.shape[0]):
            if ps[s] <= ZERO_PROB:
                continue
            inner += ps[s] * (p[s, w] / ps[s]) ** gamma
        total += inner ** (1.0 / gamma)
    return gamma / (gamma - 1.0) * math.log(max(total, ZERO_PROB))


def sibson_optimal_marginal(joint: np.ndarray, gamma: float) -> np.ndarray:
    """The free marginal achieving the Sibson minimum, Q*(w) ∝ inner^(1/gamma)."""
    p = np.asarray(joint, dtype=float)
    ps = p.sum(axis=1)
    weights = []
    for w in range(p.shape[1]):
        inner = sum(
            ps[s] * (p[s, w] / ps[s]) ** gamma for s in range(p.shape[0]) if ps[s] > ZERO_PROB
        )
        weights.append(inner ** (1.0 / gamma))
    q = np.asarray(weights)
    return q / q.sum()


# --- Auxiliary inequalities as margin checks -------------------------------


def check_claim_dmax(rho, rho_prime, sigma) -> float:
    """Margin of D(rho||sigma) <= D(rho||rho') + D_max(rho'||sigma)."""
    lhs = relative_entropy(rho, sigma)
    t1 = relative_entropy(rho, rho_prime)
    t2 = d_max(rho_prime, sigma)
    if not (t1.finite and t2.finite) or not lhs.finite:
        return math.inf
    return t1.value + t2.value - lhs.value


def check_claim_mixture(rho, components: Sequence[tuple[float, np.ndarray]]) -> float:
    """Margin of D(rho||sigma) <= min_b { D(rho||sigma_b) - ln P(b) } for
    sigma = sum_b P(b) sigma_b; components with support violation are skipped."""
    weights = np.asarray([w for w, _ in components], dtype=float)
    if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("component weights must form a probability vector")
    d = _mat(components[0][1]).shape[0]
    sigma = np.zeros((d, d), dtype=np.complex128)
    for w, s in components:
        sigma += w * _mat(s)
    best = math.inf
    for w, s in components:
        if w <= ZERO_PROB:
            continue
        dv = relative_entropy(rho, s)
        if not dv.finite:
            continue
        best = min(best, dv.value - math.log(w))
    lhs = relative_entropy(rho, sigma)
    if not lhs.finite or math.isinf(best):
        return math.inf
    return best - lhs.value


def variational_lb_check(rho, sigma, loss_op, lam: float) -> float:
    """Margin of D(rho||sigma) >= Tr[lam L rho] - ln Tr[e^(lam L) sigma]."""
    dv = relative_entropy(rho, sigma)
    if not dv.finite:
        raise LinalgError("variational check needs finite relative entropy")
    r, s, l = _mat(rho), _mat(sigma), _mat(loss_op)
    first = lam * float(np.trace(l @ r).real)
    exp_l = matrix_fn(lam * l, math.exp, support_cutoff=None)
    second = math.log(float(np.trace(exp_l @ s).real))
    return dv.value - (first - second)
