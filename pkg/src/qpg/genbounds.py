"""Evaluators and certifiers for the generalization bounds: the expected
bound from mutual information, the high-probability bound from the
sandwiched Rényi divergence, the true-loss lower bounds, the composed
privacy-to-generalization bound, and the two-bound comparison sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .divergences import cq_sandwiched_renyi, mutual_information, relative_entropy
from .learning import (
    IIDInstance,
    JointOutputState,
    LossFamily,
    ZERO_PROB,
    empirical_loss,
    estimate_alpha,
    gen_error_expected,
    gen_error_pointwise,
    true_loss,
)
from .privacy import dp_verify
from .reports import BoundReport
from .stability import REGIME_MAIN, StabilityBoundParams, stability_bound, stability_regime
from .states import CQState, Dataset, Encoding, build_cq_state

DEFAULT_SAFETY = 1.05


def resolve_alpha(
    system, loss: LossFamily | None, alpha: float | None, mode: str, safety: float
) -> float:
    if alpha is not None:
        return alpha
    est = estimate_alpha(system, loss, mode=mode)
    return est.alpha_hat * safety


def bound_expected(
    j: JointOutputState,
    loss: LossFamily,
    alpha: float | None = None,
    iid: IIDInstance | None = None,
    safety: float = DEFAULT_SAFETY,
) -> BoundReport:
    """Expected generalization error <= sqrt(2 alpha^2 I), with the extra
    1/n factor when the instance is iid-structured."""
    if iid is not None:
        a = resolve_alpha(iid, None, alpha, "local", safety)
        scale = iid.n
    else:
        a = resolve_alpha(j, loss, alpha, "global", safety)
        scale = 1
    from .divergences import cq_relative_entropy

    div = cq_relative_entropy(j.joint_cq, j.product_cq)
    info = max(div.value, 0.0) if div.finite else math.inf
    bound = math.sqrt(2.0 * a**2 * info / scale) if div.finite else math.inf
    emp = gen_error_expected(j, loss)
    return BoundReport(
        name="expected-generalization-bound" + ("-iid" if iid is not None else ""),
        inputs={"n_datasets": len(j.datasets), "n_outcomes": len(j.outcomes), "iid_n": scale},
        info_value=info,
        alpha=a,
        bound=bound,
        empirical=emp,
        flagged_infinite=math.isinf(info),
    )


def bound_probabilistic(
    inst: IIDInstance,
    gamma: float,
    conf_delta: float,
    alpha: float | None = None,
    safety: float = DEFAULT_SAFETY,
) -> BoundReport:
    """High-probability bound: the pointwise generalization error stays below
    sqrt((2 alpha^2 / n)(D_gamma + gamma/(gamma-1) ln(2/delta))) except on an
    event of probability at most delta. Coverage is checked by exact
    enumeration over every positive-weight (dataset, outcome) pair."""
    if gamma <= 1:
        raise ValueError(f"order must exceed 1, got {gamma}")
    if not 0 < conf_delta < 1:
        raise ValueError(f"confidence delta must lie in (0, 1), got {conf_delta}")
    a = resolve_alpha(inst, None, alpha, "conditional-local", safety)
    j = inst.joint
    div = cq_sandwiched_renyi(j.joint_cq, j.product_cq, gamma)
    if div.finite:
        threshold = math.sqrt(
            (2.0 * a**2 / inst.n)
            * (max(div.value, 0.0) + gamma / (gamma - 1.0) * math.log(2.0 / conf_delta))
        )
    else:
        threshold = math.inf
    covered = 0.0
    for i, _ in enumerate(j.datasets):
        for k, _ in enumerate(j.outcomes):
            weight = j.p_s[i] * j.p_w_given_s[i, k]
            if weight <= ZERO_PROB:
                continue
            if gen_error_pointwise(j, inst.loss, i, k) <= threshold:
                covered += weight
    return BoundReport(
        name="probabilistic-generalization-bound",
        inputs={"gamma": gamma, "confidence_delta": conf_delta, "n": inst.n,
                "threshold": threshold},
        info_value=div.value,
        alpha=a,
        bound=covered,
        empirical=1.0 - conf_delta,
        flagged_infinite=not div.finite,
    )


def bound_true_loss_lower(
    j: JointOutputState,
    loss: LossFamily,
    alpha: float | None = None,
    gamma: float = 2.0,
    mode: str = "both",
    safety: float = DEFAULT_SAFETY,
) -> list[BoundReport]:
    """Lower bounds on the true loss from the empirical loss.

    exponential:     exp(true) >= emp * exp(-(gamma a^2 / 2(gamma-1)
                     + (gamma-1)/gamma * D_gamma))
    multiplicative:  true >= emp^(gamma/(gamma-1)) * exp(-D_gamma), needs
                     losses bounded into [0, 1].
    """
    if gamma <= 1:
        raise ValueError(f"order must exceed 1, got {gamma}")
    if mode not in ("exponential", "multiplicative", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    div = cq_sandwiched_renyi(j.joint_cq, j.product_cq, gamma)
    emp = empirical_loss(j, loss)
    tru = true_loss(j, loss)
    reports = []
    if mode in ("exponential", "both"):
        a = resolve_alpha(j, loss, alpha, "global", safety)
        rhs = (
            emp * math.exp(-(gamma * a**2 / (2.0 * (gamma - 1.0))
                             + (gamma - 1.0) / gamma * div.value))
            if div.finite
            else 0.0
        )
        reports.append(
            BoundReport(
                name="true-loss-lower-bound-exponential",
                inputs={"gamma": gamma, "empirical_loss": emp},
                info_value=div.value,
                alpha=a,
                bound=math.exp(tru),
                empirical=rhs,
                flagged_infinite=not div.finite,
            )
        )
    if mode in ("multiplicative", "both"):
        if not loss.bounded:
            if mode == "multiplicative":
                raise ValueError("multiplicative mode needs a bounded loss family")
        else:
            rhs = emp ** (gamma / (gamma - 1.0)) * math.exp(-div.value) if div.finite else 0.0
            reports.append(
                BoundReport(
                    name="true-loss-lower-bound-multiplicative",
                    inputs={"gamma": gamma, "empirical_loss": emp},
                    info_value=div.value,
                    alpha=None,
                    bound=tru,
                    empirical=rhs,
                    flagged_infinite=not div.finite,
                )
            )
    return reports


def dp_to_gen(
    alg,
    enc: Encoding,
    datasets: Sequence[Dataset],
    p_s: np.ndarray,
    loss: LossFamily,
    p: StabilityBoundParams,
    alpha: float | None = None,
    safety: float = DEFAULT_SAFETY,
) -> BoundReport:
    """Privacy-to-generalization composition: the stability bound on mutual
    information plugged into the expected generalization bound."""
    if stability_regime(p.n, p.params.epsilon) != REGIME_MAIN:
        raise ValueError("composition is stated for epsilon in [1/n, 1]")
    report = dp_verify(alg, enc, p.params)
    if not report.passed:
        raise ValueError("algorithm failed dp_verify; the composed bound does not apply")
    from .learning import apply_algorithm

    joint = apply_algorithm(alg, datasets, p_s, enc)
    i_bound, _ = stability_bound(p)
    a = resolve_alpha(joint, loss, alpha, "global", safety)
    bound = math.sqrt(2.0 * a**2 * i_bound)
    emp = gen_error_expected(joint, loss)
    return BoundReport(
        name="privacy-generalization-bound",
        inputs={"epsilon": p.params.epsilon, "delta": p.params.delta, "n": p.n,
                "alphabet_size": p.alphabet_size},
        info_value=i_bound,
        alpha=a,
        bound=bound,
        empirical=emp,
    )


# --- Two-bound comparison sweep ------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    sweep_var: str
    value: float
    b_mi: float
    b_sep: float

    def __post_init__(self):
        if self.b_mi < 0 or self.b_sep < 0:
            raise ValueError("bounds must be nonnegative")


@dataclass(frozen=True)
class ToyConfig:
    """Binary source with prior (p, 1-p), hypothesis flipped with mass q,
    and a residue qubit (1-eta)|z><z| + eta I/2 conditionally independent
    of the hypothesis given the source."""

    p: float
    flip_q: float = 0.15
    eta: float = 0.4

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("prior must lie strictly inside (0, 1)")


def toy_joint(cfg: ToyConfig) -> CQState:
    """CQ state over labels (z, w) with residue blocks depending on z only."""
    pz = np.array([cfg.p, 1.0 - cfg.p])
    flip = np.array([[1.0 - cfg.flip_q, cfg.flip_q], [cfg.flip_q, 1.0 - cfg.flip_q]])
    beta = [
        np.diag([1.0 - cfg.eta / 2.0, cfg.eta / 2.0]).astype(np.complex128),
        np.diag([cfg.eta / 2.0, 1.0 - cfg.eta / 2.0]).astype(np.complex128),
    ]
    labels, probs, blocks = [], [], []
    for z in range(2):
        for w in range(2):
            labels.append((z, w))
            probs.append(pz[z] * flip[z, w])
            blocks.append(beta[z])
    return build_cq_state(probs, list(zip(labels, blocks)), dims=(2,))


def _toy_terms(state: CQState) -> tuple[float, float, float]:
    """(I(Z;W,B'), I(Z;W), E_{Z,W} sqrt-divergence base terms)."""
    i_total = mutual_information(state, label_axes_a=(0,), factor_axes_a=())
    # Classical I(Z;W): collapse the blocks.
    probs = {}
    for lab, p in zip(state.labels, state.probs):
        probs[lab] = p
    pz = {z: sum(p for (zz, _), p in probs.items() if zz == z) for z in (0, 1)}
    pw = {w: sum(p for (_, ww), p in probs.items() if ww == w) for w in (0, 1)}
    i_zw = sum(
        p * math.log(p / (pz[z] * pw[w]))
        for (z, w), p in probs.items()
        if p > 1e-15
    )
    # E_{Z,W}[sqrt(2 a^2 D(block_(z,w) || sigma_w))] needs the per-(z,w)
    # divergences to the w-conditional residue marginal.
    sigma_w = {}
    for w in (0, 1):
        acc = np.zeros((2, 2), dtype=np.complex128)
        for (z, ww), p in probs.items():
            if ww == w:
                acc += p * state.block((z, ww))
        sigma_w[w] = acc / pw[w]
    exp_sqrt_d = sum(
        p * math.sqrt(max(relative_entropy(state.block((z, w)), sigma_w[w]).value, 0.0))
        for (z, w), p in probs.items()
        if p > 1e-15
    )
    return i_total, i_zw, exp_sqrt_d


def b_mi(state: CQState, alpha: float) -> float:
    i_total, _, _ = _toy_terms(state)
    return math.sqrt(2.0 * alpha**2 * i_total)


def b_sep(state: CQState, alpha: float) -> float:
    _, i_zw, exp_sqrt_d = _toy_terms(state)
    return math.sqrt(2.0 * alpha**2) * exp_sqrt_d + math.sqrt(2.0 * alpha**2 * i_zw)


def sweep_comparison(
    sweep_var: str,
    lo: float,
    hi: float,
    steps: int,
    alpha: float = 1.0,
    p_fixed: float = 0.4,
    flip_q: float = 0.15,
    eta: float = 0.4,
) -> list[SweepRow]:
    """Evaluate both bounds along a sweep of the prior p or of alpha."""
    if steps < 2:
        raise ValueError("a sweep needs at least 2 steps")
    if sweep_var not in ("p", "alpha"):
        raise ValueError(f"unknown sweep variable {sweep_var!r}")
    rows = []
    for i in range(steps):
        x = lo + (hi - lo) * i / (steps - 1)
        if sweep_var == "p":
            cfg = ToyConfig(p=x, flip_q=flip_q, eta=eta)
            state = toy_joint(cfg)
            rows.append(SweepRow("p", x, b_mi(state, alpha), b_sep(state, alpha)))
        else:
            cfg = ToyConfig(p=p_fixed, flip_q=flip_q, eta=eta)
            state = toy_joint(cfg)
            rows.append(SweepRow("alpha", x, b_mi(state, x), b_sep(state, x)))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    """CSV with mandatory header and 12 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sweep_var,value,B_MI,B_SEP\n")
        for r in rows:
            fh.write(f"{r.sweep_var},{r.value:.11e},{r.b_mi:.11e},{r.b_sep:.11e}\n")
