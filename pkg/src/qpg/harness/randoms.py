"""Deterministic random ensembles of states, channels and instruments.

The i-th item of an ensemble depends only on (seed, i), never on how many
other items were drawn or in what order, so parallel schedules cannot
change results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from ..linalg import dagger, hermitian_part
from ..states import DensityMatrix

GENERATOR_KINDS = ("haar-pure", "ginibre-mixed", "diagonal-classical")
MAX_RANDOM_DIM = 64


@dataclass(frozen=True)
class RandomEnsembleSpec:
    kind: str
    dim: int
    count: int

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not 1 <= self.dim <= MAX_RANDOM_DIM:
            raise ValueError(f"dim must lie in [1, {MAX_RANDOM_DIM}]")
        if self.count < 1:
            raise ValueError("count must be >= 1")


def rng_for(seed: int, index: int) -> np.random.Generator:
    """Generator for the index-th item: depends only on (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(index,)))


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))


def haar_ket(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = _ginibre(rng, dim, 1).ravel()
    return v / np.linalg.norm(v)


def haar_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = haar_ket(dim, rng)
    return np.outer(v, v.conj())


def ginibre_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = _ginibre(rng, dim, rank or dim)
    rho = g @ dagger(g)
    return hermitian_part(rho / np.trace(rho).real)


def diagonal_classical_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    p = rng.dirichlet(np.ones(dim))
    return np.diag(p).astype(np.complex128)


def generate_random(spec: RandomEnsembleSpec, seed: int) -> list[np.ndarray]:
    out = []
    for i in range(spec.count):
        rng = rng_for(seed, i)
        if spec.kind == "haar-pure":
            out.append(haar_pure_state(spec.dim, rng))
        elif spec.kind == "ginibre-mixed":
            out.append(ginibre_state(spec.dim, rng))
        else:
            out.append(diagonal_classical_state(spec.dim, rng))
    return out


def random_isometry(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random isometry with d_out >= d_in (columns orthonormal)."""
    if d_out < d_in:
        raise ValueError("isometry needs d_out >= d_in")
    q, r = np.linalg.qr(_ginibre(rng, d_out, d_in))
    return q * np.sign(np.diag(r).real + (np.diag(r).real == 0))


def random_channel_kraus(
    d_in: int, d_out: int, env_dim: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Random trace-preserving channel via a Stinespring isometry."""
    v = random_isometry(d_in, d_out * env_dim, rng)
    # K_e[o, i] = <o, e| V |i>
    v = v.reshape(d_out, env_dim, d_in)
    return [np.ascontiguousarray(v[:, e, :]) for e in range(env_dim)]


def random_instrument_branches(
    d_in: int,
    d_out: int,
    outcomes: Sequence[Hashable],
    rng: np.random.Generator,
    env_dim: int = 2,
) -> dict:
    """Complete instrument: branches indexed by outcome, jointly trace
    preserving (a Stinespring isometry into outcome x environment)."""
    n_w = len(outcomes)
    v = random_isometry(d_in, d_out * n_w * env_dim, rng)
    v = v.reshape(d_out, n_w, env_dim, d_in)
    return {
        w: [np.ascontiguousarray(v[:, k, e, :]) for e in range(env_dim)]
        for k, w in enumerate(outcomes)
    }


def random_psd(dim: int, rng: np.random.Generator, bounded: bool = False) -> np.ndarray:
    g = _ginibre(rng, dim, dim)
    m = hermitian_part(g @ dagger(g)) / dim
    if bounded:
        top = float(np.linalg.eigvalsh(m)[-1])
        m = m / (top * (1.0 + 0.1 * rng.random()))
    return m


def random_prior(k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(k))


def random_density(dim: int, rng: np.random.Generator) -> DensityMatrix:
    return DensityMatrix(ginibre_state(dim, rng))
