"""Randomized desk-scale instances shared by the selftest suites, the CLI
subcommands, and the acceptance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..learning import (
    IIDInstance,
    KrausInstrument,
    LossFamily,
    apply_algorithm,
    build_iid_algorithm,
    scaled_branch_instrument,
)
from ..privacy import TypeRandomizedResponse, rr_flip_mass_for
from ..states import Alphabet, DensityMatrix, Encoding, alphabet, all_datasets, all_types
from .randoms import (
    ginibre_state,
    random_channel_kraus,
    random_instrument_branches,
    random_prior,
    random_psd,
    rng_for,
)


@dataclass(eq=False)
class LearningInstance:
    joint: "JointOutputState"
    loss: LossFamily
    meta: dict


def random_learning_instance(seed: int, index: int, bounded: bool = False) -> LearningInstance:
    """Random instrument + encoding + prior + PSD loss at desk scale."""
    rng = rng_for(seed, index)
    n_symbols = int(rng.integers(2, 4))
    alph = alphabet([chr(ord("a") + i) for i in range(n_symbols)])
    te_dim = int(rng.integers(1, 3))
    tr_dim = 2
    enc = Encoding(
        {z: DensityMatrix(ginibre_state(te_dim * tr_dim, rng)) for z in alph.symbols},
        te_dim=te_dim,
        tr_dim=tr_dim,
    )
    datasets = all_datasets(1, alph)
    outcomes = tuple(range(int(rng.integers(2, 4))))
    b_dim = 2
    branches = {
        s.entries: random_instrument_branches(tr_dim, b_dim, outcomes, rng)
        for s in datasets
    }
    alg = KrausInstrument(branches, tr_dim=tr_dim, b_dim=b_dim, outcomes=outcomes)
    p_s = random_prior(len(datasets), rng)
    joint = apply_algorithm(alg, datasets, p_s, enc)
    loss = LossFamily(
        {
            (s.entries, w): random_psd(te_dim * b_dim, rng, bounded=bounded)
            for s in datasets
            for w in outcomes
        },
        bounded=bounded,
    )
    return LearningInstance(
        joint=joint,
        loss=loss,
        meta={"seed": seed, "index": index, "te_dim": te_dim, "outcomes": len(outcomes),
              "datasets": len(datasets), "bounded": bounded},
    )


def random_iid_instance(seed: int, index: int, n: int, te_dim: int = 1) -> IIDInstance:
    """Random iid-structured instance: scaled trace-preserving local branches
    (data-independent outcome law, data-dependent residue) and bounded local
    losses averaged over positions."""
    rng = rng_for(seed, 10_000 + 100 * n + index)
    alph = alphabet(["a", "b"])
    tr_dim = 2
    b_dim = 2
    enc = Encoding(
        {z: DensityMatrix(ginibre_state(te_dim * tr_dim, rng)) for z in alph.symbols},
        te_dim=te_dim,
        tr_dim=tr_dim,
    )
    outcomes = (0, 1)
    q_raw = random_prior(len(outcomes), rng) * 0.8 + 0.1
    q = {w: float(q_raw[k] / q_raw.sum()) for k, w in enumerate(outcomes)}
    channels = {
        (z, w): random_channel_kraus(tr_dim, b_dim, 2, rng)
        for z in alph.symbols
        for w in outcomes
    }
    local = scaled_branch_instrument(channels, q, n, tr_dim=tr_dim, b_dim=b_dim)
    alg = build_iid_algorithm(local, n, alph)
    p_z = random_prior(alph.size, rng) * 0.8 + 0.1
    p_z = p_z / p_z.sum()
    losses = {
        (w, z): random_psd(te_dim * b_dim, rng, bounded=True)
        for w in outcomes
        for z in alph.symbols
    }
    return IIDInstance(
        alphabet=alph,
        p_z=p_z,
        local_enc=enc,
        algorithm=alg,
        local_losses=losses,
        bounded=True,
    )


def reference_mechanism(
    n: int, alph: Alphabet, epsilon: float, delta: float = 0.0, eta: float = 0.4
) -> TypeRandomizedResponse:
    """Type-randomized-response mechanism tuned so its tightest hockey-stick
    value at `epsilon` is exactly `delta`."""
    num_types = len(all_types(n, alph))
    return TypeRandomizedResponse(
        n=n,
        alphabet=alph,
        flip_mass=rr_flip_mass_for(epsilon, delta, num_types),
        eta=eta,
    )


def mechanism_loss(mech: TypeRandomizedResponse) -> LossFamily:
    """Bounded misclassification loss on the residue register: penalize the
    residue for not encoding the true type of the dataset."""
    d = mech.b_dim
    ops = {}
    for s in all_datasets(mech.n, mech.alphabet):
        t = mech.type_index(s)
        proj = np.zeros((d, d), dtype=np.complex128)
        proj[t, t] = 1.0
        op = np.eye(d, dtype=np.complex128) - proj
        for w in mech.outcomes:
            ops[(s.entries, w)] = op
    return LossFamily(ops, bounded=True)


def ass1_safe_delta(n: int, alphabet_size: int, epsilon: float, target: float = 0.3) -> float:
    """Largest delta with group value `target`: keeps the noise condition
    satisfied at every point of the acceptance sweep."""
    k = n * (alphabet_size - 1)
    coeff = math.expm1(k * epsilon) / math.expm1(epsilon) if epsilon > 0 else k
    return target / coeff
