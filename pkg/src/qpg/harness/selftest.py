"""Every module's invariants-and-properties suite, runnable as one command.

Each suite returns its worst margin (how far the tightest inequality sat
from its tolerance); run_selftest aggregates them into a machine-readable
summary and an exit code.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import divergences as dv
from .. import genbounds as gb
from .. import ita
from .. import learning as ln
from .. import linalg as la
from .. import privacy as pv
from .. import stability as sb
from .. import states as st
from . import instances, randoms


@dataclass
class RunConfig:
    seed: int = 20250809
    n_max: int = 8
    alphabet_max: int = 3
    dim_max: int = 16
    output_dir: str | None = None
    tolerances: dict = field(default_factory=dict)
    fault: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_max > st.MAX_N or self.alphabet_max > st.MAX_ALPHABET_SIZE:
            raise ValueError("limits exceed the module-enforced maxima")

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    @staticmethod
    def from_json(data: dict) -> "RunConfig":
        return RunConfig(
            seed=int(data.get("seed", 20250809)),
            n_max=int(data.get("n_max", 8)),
            alphabet_max=int(data.get("alphabet_max", 3)),
            dim_max=int(data.get("dim_max", 16)),
            output_dir=data.get("output_dir"),
            tolerances=data.get("tolerances", {}),
            fault=data.get("fault", {}),
        )


def worker_count() -> int:
    raw = os.environ.get("QPG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class SuiteResult:
    name: str
    passed: bool
    margin: float
    seconds: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "suite": self.name,
            "pass": self.passed,
            "margin": self.margin,
            "seconds": round(self.seconds, 3),
            "details": self.details,
        }


def _result(name, t0, margin, tol, **details) -> SuiteResult:
    return SuiteResult(
        name=name,
        passed=margin >= -tol,
        margin=float(margin),
        seconds=time.perf_counter() - t0,
        details=details,
    )


# --- linalg ------------------------------------------------------------------


def suite_linalg_kernel(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    count = 0
    for dim in (2, 3, 4, 8, 16):
        for i in range(200):
            rng = randoms.rng_for(cfg.seed, 1000 * dim + i)
            m = la.hermitian_part(
                rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            )
            dec = la.eig_hermitian(m)
            recon = np.linalg.norm(dec.reconstruct() - m) / max(np.linalg.norm(m), 1e-300)
            unit = np.max(
                np.abs(la.dagger(dec.eigenvectors) @ dec.eigenvectors - la.identity(dim))
            )
            margin = min(margin, 1e-9 - recon, 1e-10 - unit)
            # trace-norm split identity
            split = la.positive_part_trace(m) + la.positive_part_trace(-m)
            margin = min(margin, 1e-9 - abs(split - la.trace_norm(m)))
            count += 1
    # Araki-Lieb-Thirring: Tr[(BAB)^r] <= Tr[A^r B^2r], r = 2, 3 on PSD pairs
    for i in range(100):
        rng = randoms.rng_for(cfg.seed, 50_000 + i)
        a = randoms.random_psd(4, rng)
        b = randoms.random_psd(4, rng)
        for r in (2, 3):
            lhs = float(np.trace(np.linalg.matrix_power(b @ a @ b, r)).real)
            rhs = float(
                np.trace(
                    np.linalg.matrix_power(a, r) @ np.linalg.matrix_power(b, 2 * r)
                ).real
            )
            margin = min(margin, rhs - lhs + 1e-10)
    # Hoelder duality |Tr[AB]| <= ||A||_p ||B||_q at (2, 2)
    for i in range(100):
        rng = randoms.rng_for(cfg.seed, 60_000 + i)
        a = randoms.random_psd(4, rng)
        b = randoms.random_psd(4, rng)
        margin = min(
            margin,
            la.schatten_norm(a, 2) * la.schatten_norm(b, 2)
            - abs(float(np.trace(a @ b).real))
            + 1e-10,
        )
    # positive part against the random-measurement oracle
    rng = randoms.rng_for(cfg.seed, 70_000)
    h = la.hermitian_part(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    exact = la.positive_part_trace(h)
    for _ in range(10_000):
        u = randoms.random_isometry(4, 4, rng)
        lam = (u * rng.random(4)) @ la.dagger(u)
        margin = min(margin, exact - float(np.trace(lam @ h).real) + 1e-9)
    return _result("linalg-kernel", t0, margin, 0.0, matrices=count)


# --- states ------------------------------------------------------------------


def suite_states_types(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    ok = True
    alph2 = st.alphabet(["a", "b"])
    alph3 = st.alphabet(["a", "b", "c"])
    rng = randoms.rng_for(cfg.seed, 80_000)
    # permutation invariance of the type map
    for _ in range(100):
        n = int(rng.integers(1, 7))
        entries = [alph3.symbols[int(rng.integers(0, 3))] for _ in range(n)]
        s = st.dataset(entries, alph3)
        perm = list(rng.permutation(n))
        s2 = st.dataset([entries[i] for i in perm], alph3)
        ok &= st.dataset_type(s) == st.dataset_type(s2)
    # triangle inequality on type space, exhaustively for n <= 4, |Z| <= 3
    for alph in (alph2, alph3):
        for n in range(1, 5):
            types = st.all_types(n, alph)
            for f, g, h in itertools.product(types, repeat=3):
                ok &= st.type_distance(f, h) <= st.type_distance(f, g) + st.type_distance(g, h)
    # type counts
    for n in range(1, 6):
        for alph in (alph2, alph3):
            types = st.all_types(n, alph)
            ok &= len(types) <= st.type_count_bound(n, alph.size)
            ok &= sum(st.type_class_size(f) for f in types) == alph.size**n
    # encoding permutation covariance: spectra agree under reordering
    enc = st.Encoding(
        {z: st.DensityMatrix(randoms.ginibre_state(2, rng)) for z in alph2.symbols},
        te_dim=1,
        tr_dim=2,
    )
    for _ in range(20):
        entries = [alph2.symbols[int(rng.integers(0, 2))] for _ in range(3)]
        s = st.dataset(entries, alph2)
        perm = list(rng.permutation(3))
        s2 = st.dataset([entries[i] for i in perm], alph2)
        w1 = np.linalg.eigvalsh(st.encode_dataset(s, enc).mat)
        w2 = np.linalg.eigvalsh(st.encode_dataset(s2, enc).mat)
        ok &= bool(np.allclose(w1, w2, atol=1e-10))
    return _result("states-types", t0, 0.0 if ok else -1.0, 0.0)


# --- divergences ---------------------------------------------------------------


def suite_divergence_axioms(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    for i in range(50):
        rng = randoms.rng_for(cfg.seed, 90_000 + i)
        dim = int(rng.integers(2, 5))
        rho = randoms.ginibre_state(dim, rng)
        sig = randoms.ginibre_state(dim, rng)
        # vanish on equal arguments, nonnegativity
        margin = min(margin, 1e-9 - abs(dv.relative_entropy(rho, rho).value))
        margin = min(margin, 1e-9 - abs(dv.d_max(rho, rho).value))
        margin = min(margin, 1e-9 - abs(dv.sandwiched_renyi(rho, rho, 2.0).value))
        margin = min(margin, 1e-12 - dv.hockey_stick(rho, rho, 0.5))
        margin = min(margin, dv.relative_entropy(rho, sig).value + 1e-9)
        # ordering D <= D_1.5 <= D_2 and the limit toward the relative entropy
        d = dv.relative_entropy(rho, sig).value
        d15 = dv.sandwiched_renyi(rho, sig, 1.5).value
        d2 = dv.sandwiched_renyi(rho, sig, 2.0).value
        dlim = dv.sandwiched_renyi(rho, sig, 1.0 + 1e-4).value
        margin = min(margin, d15 - d + 1e-9, d2 - d15 + 1e-9, 1e-3 - abs(dlim - d))
        # hockey-stick nonincreasing and convex in e^eps
        hs = [dv.hockey_stick(rho, sig, e) for e in (0.0, 0.5, 1.0)]
        margin = min(margin, hs[0] - hs[1] + 1e-10, hs[1] - hs[2] + 1e-10)
        e0, e1, e2 = (math.exp(e) for e in (0.0, 0.5, 1.0))
        lam = (e1 - e0) / (e2 - e0)
        margin = min(margin, (1 - lam) * hs[0] + lam * hs[2] - hs[1] + 1e-10)
        # d_max certificate: rho <= e^dmax sigma
        dval = dv.d_max(rho, sig)
        if dval.finite:
            gap = la.min_eig(math.exp(dval.value) * sig - rho)
            margin = min(margin, gap + 1e-9)
    return _result("divergence-axioms", t0, margin, 0.0)


def suite_divergence_dpi(cfg: RunConfig) -> SuiteResult:
    """Data processing for D, the Rényi family, and the hockey stick."""
    t0 = time.perf_counter()
    tol = cfg.tol("dpi", 1e-8)
    margin = math.inf
    for i in range(200):
        rng = randoms.rng_for(cfg.seed, 100_000 + i)
        d_in = int(rng.integers(2, 5))
        d_out = int(rng.integers(2, 5))
        rho = randoms.ginibre_state(d_in, rng)
        sig = randoms.ginibre_state(d_in, rng)
        kraus = randoms.random_channel_kraus(d_in, d_out, 2, rng)
        rho2 = sum(k @ rho @ la.dagger(k) for k in kraus)
        sig2 = sum(k @ sig @ la.dagger(k) for k in kraus)
        margin = min(
            margin,
            dv.relative_entropy(rho, sig).value - dv.relative_entropy(rho2, sig2).value + tol,
        )
        for gamma in (1.5, 2.0, 3.0):
            margin = min(
                margin,
                dv.sandwiched_renyi(rho, sig, gamma).value
                - dv.sandwiched_renyi(rho2, sig2, gamma).value
                + tol,
            )
        for eps in (0.0, 0.1, 1.0):
            margin = min(
                margin,
                dv.hockey_stick(rho, sig, eps) - dv.hockey_stick(rho2, sig2, eps) + tol,
            )
    return _result("divergence-dpi", t0, margin, 0.0, channels=200, tolerance=tol)


def suite_auxiliary_inequalities(cfg: RunConfig) -> SuiteResult:
    """The two auxiliary divergence inequalities on random instance pools."""
    t0 = time.perf_counter()
    margin = math.inf
    for i in range(1000):
        rng = randoms.rng_for(cfg.seed, 200_000 + i)
        dim = 2 if i % 2 == 0 else 3
        rho = randoms.ginibre_state(dim, rng)
        rho_p = randoms.ginibre_state(dim, rng)
        sig = randoms.ginibre_state(dim, rng)
        margin = min(margin, dv.check_claim_dmax(rho, rho_p, sig) + 1e-8)
        weights = randoms.random_prior(3, rng)
        comps = [(float(weights[b]), randoms.ginibre_state(dim, rng)) for b in range(3)]
        margin = min(margin, dv.check_claim_mixture(rho, comps) + 1e-8)
    # degenerate spot values
    rng = randoms.rng_for(cfg.seed, 201_000)
    rho = randoms.ginibre_state(2, rng)
    margin = min(margin, 1e-9 - abs(dv.check_claim_dmax(rho, rho, rho)))
    margin = min(margin, 1e-9 - abs(dv.check_claim_mixture(rho, [(1.0, rho)])))
    return _result("auxiliary-inequalities", t0, margin, 0.0, instances=2000)


def suite_variational_bound(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    for i in range(100):
        rng = randoms.rng_for(cfg.seed, 210_000 + i)
        dim = int(rng.integers(2, 5))
        rho = randoms.ginibre_state(dim, rng)
        sig = randoms.ginibre_state(dim, rng)
        loss_op = la.hermitian_part(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
        for lam in (-10.0, -1.0, -0.1, 0.1, 1.0, 10.0):
            margin = min(margin, dv.variational_lb_check(rho, sig, loss_op, lam) + 1e-8)
        margin = min(
            margin,
            dv.variational_lb_check(rho, sig, loss_op, 0.0)
            - dv.relative_entropy(rho, sig).value
            + 1e-10,
        )
    return _result("variational-bound", t0, margin, 0.0)


# --- learning / genbounds -------------------------------------------------------


def suite_expected_gen_certificate(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    failures = 0
    for i in range(50):
        inst = instances.random_learning_instance(cfg.seed, i)
        rep = gb.bound_expected(inst.joint, inst.loss)
        margin = min(margin, rep.margin + 1e-8)
        failures += 0 if rep.passed else 1
    return _result("expected-gen-certificate", t0, margin, 0.0, instances=50, failures=failures)


def suite_probabilistic_gen_certificate(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    failures = 0
    cases = 0
    for n in (2, 3, 4):
        for idx in range(2):
            inst = instances.random_iid_instance(cfg.seed, idx, n, te_dim=1 if n == 4 else 2)
            for gamma in (1.5, 2.0, 4.0):
                for delta in (0.05, 0.1, 0.3):
                    rep = gb.bound_probabilistic(inst, gamma, delta)
                    margin = min(margin, rep.margin + 1e-12)
                    failures += 0 if rep.passed else 1
                    cases += 1
    return _result(
        "probabilistic-gen-certificate", t0, margin, 0.0, cases=cases, failures=failures
    )


def suite_trueloss_certificate(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    failures = 0
    for i in range(30):
        inst = instances.random_learning_instance(cfg.seed, 500 + i, bounded=True)
        for gamma in (1.5, 2.0, 4.0):
            for rep in gb.bound_true_loss_lower(inst.joint, inst.loss, gamma=gamma):
                margin = min(margin, rep.margin + 1e-8)
                failures += 0 if rep.passed else 1
    return _result("trueloss-certificate", t0, margin, 0.0, instances=30, failures=failures)


def suite_gen_identities(cfg: RunConfig) -> SuiteResult:
    """Structural identities: zero error on product states, flattening
    agreement, bounded losses staying in [0, 1], grid-monotone alpha."""
    t0 = time.perf_counter()
    margin = math.inf
    ok = True
    for i in range(10):
        inst = instances.random_learning_instance(cfg.seed, 700 + i, bounded=True)
        j = inst.joint
        emp, tru = ln.empirical_loss(j, inst.loss), ln.true_loss(j, inst.loss)
        ok &= -1e-12 <= emp <= 1 + 1e-9 and -1e-12 <= tru <= 1 + 1e-9
        # flattening cross-check of losses and mutual information
        if j.joint_cq.quantum_dim * len(j.joint_cq.labels) <= st.MAX_FLAT_DIM:
            flat_j = st.cq_flatten(j.joint_cq)
            flat_p = st.cq_flatten(j.product_cq)
            d = j.joint_cq.quantum_dim
            big = np.zeros_like(flat_j)
            for idx, (a, b) in enumerate(j.joint_cq.labels):
                big[idx * d : (idx + 1) * d, idx * d : (idx + 1) * d] = inst.loss.op(
                    j.datasets[a], j.outcomes[b]
                )
            margin = min(margin, 1e-8 - abs(float(np.trace(big @ flat_j).real) - emp))
            margin = min(margin, 1e-8 - abs(float(np.trace(big @ flat_p).real) - tru))
            mi_flat = dv.relative_entropy(flat_j, flat_p).value
            margin = min(margin, 1e-8 - abs(mi_flat - j.mutual_information()))
        # product joint has zero generalization error
        prod = ln.JointOutputState(
            datasets=j.datasets,
            p_s=j.p_s,
            outcomes=j.outcomes,
            p_w_given_s=np.tile(j.p_w, (len(j.datasets), 1)),
            blocks=tuple(
                tuple(
                    np.kron(j.rho_te[a], j.sigma_w[b]) if j.sigma_w[b] is not None else None
                    for b in range(len(j.outcomes))
                )
                for a in range(len(j.datasets))
            ),
            te_dim=j.te_dim,
            b_dim=j.b_dim,
        )
        margin = min(margin, 1e-10 - ln.gen_error_expected(prod, inst.loss))
        # alpha monotone under grid refinement
        coarse = ln.estimate_alpha(j, inst.loss, lambda_grid=[0.1, 1.0, -0.1, -1.0])
        fine = ln.estimate_alpha(
            j, inst.loss, lambda_grid=[0.1, 0.5, 1.0, 2.0, -0.1, -0.5, -1.0, -2.0]
        )
        margin = min(margin, fine.alpha_hat - coarse.alpha_hat + 1e-12)
        # estimate satisfies its own certificate on the grid
        margin = min(margin, min(fine.log_mgf_margins()) + 1e-9)
        # pointwise deviations integrate to the signed expected error
        signed = 0.0
        for a, _ in enumerate(j.datasets):
            for b, _ in enumerate(j.outcomes):
                weight = j.p_s[a] * j.p_w_given_s[a, b]
                if weight <= 1e-12:
                    continue
                emp_ab = float(np.trace(inst.loss.op(j.datasets[a], j.outcomes[b]) @ j.blocks[a][b]).real)
                signed += weight * (emp_ab - ln.conditional_true_loss(j, inst.loss, b))
        margin = min(margin, 1e-8 - abs(signed - (emp - tru)))
    return _result("gen-identities", t0, margin if ok else -1.0, 0.0)


# --- privacy / stability ----------------------------------------------------


def suite_dp_mechanism(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    ok = True
    alph = st.alphabet(["a", "b"])
    gap = float(cfg.fault.get("dp_delta_gap", 1.0))
    for n, eps, delta in ((2, 0.5, 0.0), (4, 0.5, 0.01), (4, 0.25, 0.0), (3, 0.9, 0.02)):
        mech = instances.reference_mechanism(n, alph, eps, delta)
        enc = mech.encoding()
        report = pv.dp_verify(mech, enc, pv.PrivacyParams(eps, delta * gap))
        ok &= report.passed
        # scalar randomized-response oracle agrees with the quantum check
        oracle = pv.rr_tightest_delta(mech.flip_mass, mech.num_types, eps)
        margin = min(margin, 1e-9 - abs(report.tightest_delta - oracle))
        # group privacy margins for k <= n
        for k in range(1, n + 1):
            margin = min(
                margin, pv.group_privacy_check(mech, enc, pv.PrivacyParams(eps, delta), k) + 1e-9
            )
        # tightest delta is monotone nonincreasing in epsilon
        deltas = [
            pv.dp_verify(mech, enc, pv.PrivacyParams(e, delta)).tightest_delta
            for e in (eps, eps + 0.2, eps + 0.5)
        ]
        margin = min(margin, deltas[0] - deltas[1] + 1e-12, deltas[1] - deltas[2] + 1e-12)
    # classical diagonal mechanism: blockwise check equals event enumeration
    rng = randoms.rng_for(cfg.seed, 300_000)
    p = randoms.random_prior(4, rng)
    q = randoms.random_prior(4, rng)
    eps = 0.3
    blocks_p = st.build_cq_state([1.0], [((0,), np.diag(p).astype(complex))], dims=(4,))
    blocks_q = st.build_cq_state([1.0], [((0,), np.diag(q).astype(complex))], dims=(4,))
    quantum = dv.cq_hockey_stick(blocks_p, blocks_q, eps)
    scalar = max(
        sum(p[i] - math.exp(eps) * q[i] for i in event) if event else 0.0
        for r in range(5)
        for event in itertools.combinations(range(4), r)
    )
    margin = min(margin, 1e-9 - abs(quantum - scalar))
    return _result("dp-mechanism", t0, margin if ok else -1.0, 0.0, fault_gap=gap)


def suite_stability_pipeline(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    points = 0
    for z in (2, 3):
        alph = st.alphabet(["a", "b", "c"][:z])
        for n in (2, 4, 6):
            datasets = st.all_datasets(n, alph)
            priors = sb.default_priors(len(datasets), randoms.rng_for(cfg.seed, 310_000 + n * z))
            for eps in (1.0 / n, 0.25, 0.5, 0.9):
                for delta in (0.0, instances.ass1_safe_delta(n, z, eps)):
                    mech = instances.reference_mechanism(n, alph, eps, delta)
                    p = sb.StabilityBoundParams(n, z, pv.PrivacyParams(eps, delta))
                    chk = sb.empirical_stability_check(mech, mech.encoding(), datasets, priors, p)
                    margin = min(margin, chk.bound + 1e-9 - chk.worst_mi)
                    points += 1
    # formula spot values
    spot = sb.stability_bound(sb.StabilityBoundParams(100, 2, pv.PrivacyParams(0.1, 0.0)))[0]
    margin = min(margin, 1e-12 - abs(spot - (1.0 + math.log(10.0))))
    spot = sb.stability_bound(sb.StabilityBoundParams(100, 2, pv.PrivacyParams(0.001, 0.0)))[0]
    margin = min(margin, 1e-12 - abs(spot - 0.1))
    spot = sb.stability_bound(sb.StabilityBoundParams(100, 2, pv.PrivacyParams(2.0, 0.0)))[0]
    margin = min(margin, 1e-12 - abs(spot - math.log(101.0)))
    return _result("stability-pipeline", t0, margin, 0.0, points=points)


def suite_dp_to_gen(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    alph = st.alphabet(["a", "b"])
    n, eps = 4, 0.5
    mech = instances.reference_mechanism(n, alph, eps, 0.0)
    datasets = st.all_datasets(n, alph)
    rng = randoms.rng_for(cfg.seed, 320_000)
    loss = instances.mechanism_loss(mech)
    p = sb.StabilityBoundParams(n, 2, pv.PrivacyParams(eps, 0.0))
    for _ in range(3):
        prior = randoms.random_prior(len(datasets), rng)
        rep = gb.dp_to_gen(mech, mech.encoding(), datasets, prior, loss, p)
        margin = min(margin, rep.margin + 1e-8)
    # formula spot value: alpha = 1, |Z| = 2, n = 100, eps = 0.1
    bound = math.sqrt(2.0 * (1.0 + math.log(10.0)))
    p100 = sb.StabilityBoundParams(100, 2, pv.PrivacyParams(0.1, 0.0))
    margin = min(margin, 1e-12 - abs(math.sqrt(2.0 * sb.stability_bound(p100)[0]) - bound))
    return _result("dp-to-generalization", t0, margin, 0.0)


def suite_grid_covering(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    alph2 = st.alphabet(["a", "b"])
    alph3 = st.alphabet(["a", "b", "c"])
    for n in range(1, 101):
        for t in range(1, n + 1):
            cover = sb.grid_cover(n, alph2, t)
            for f in st.all_types(n, alph2):
                d = st.type_distance(f, cover.center_of(f))
                margin = min(margin, cover.distance_bound - d)
    for n in range(1, 21):
        for t in range(1, n + 1):
            cover = sb.grid_cover(n, alph3, t)
            for f in st.all_types(n, alph3):
                d = st.type_distance(f, cover.center_of(f))
                margin = min(margin, cover.distance_bound - d)
    ok = sb.optimal_t(100, 0.1) == 10 and sb.optimal_t(2, 0.9) == 2 and sb.optimal_t(5, 1e-9) == 1
    return _result("grid-covering", t0, margin if ok else -1.0, 0.0)


# --- ita -----------------------------------------------------------------------


def suite_ita_example(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    ok = True
    for n in range(1, 6):
        margin = min(margin, 1e-9 - ita.qnd_check(n))
    ex = build = ita.build_example(3, 0.5)
    d = 2**3
    # projector algebra: idempotent, orthogonal, complete, binomial ranks
    total = np.zeros((d, d), dtype=complex)
    for k, pk in enumerate(ex.projectors):
        margin = min(margin, 1e-10 - float(np.max(np.abs(pk @ pk - pk))))
        ok &= int(round(np.trace(pk).real)) == math.comb(3, k)
        total += pk
        for k2 in range(k + 1, len(ex.projectors)):
            margin = min(margin, 1e-10 - float(np.max(np.abs(pk @ ex.projectors[k2]))))
    margin = min(margin, 1e-10 - float(np.max(np.abs(total - np.eye(d)))))
    # Helstrom spot value and monotonicity in the overlap
    ka, kb = ita.encoded_ket([0], 0.25), ita.encoded_ket([1], 0.25)
    err = ita.helstrom_error(np.outer(ka, ka.conj()), np.outer(kb, kb.conj()))
    margin = min(margin, 1e-10 - abs(err - (1.0 - math.sqrt(0.75)) / 2.0))
    prev = 0.5
    for p in (0.05, 0.15, 0.3, 0.5):
        ka, kb = ita.encoded_ket([0], p), ita.encoded_ket([1], p)
        err = ita.helstrom_error(np.outer(ka, ka.conj()), np.outer(kb, kb.conj()))
        ok &= err <= prev + 1e-12
        prev = err
    # untrusted DP report at p = 0.1: strictly sub-unit hockey-stick values
    rep = ita.untrusted_dp_verify(ita.build_example(2, 0.1), pv.PrivacyParams(0.0, 1.0))
    margin = min(margin, (1.0 - 1e-9) - rep.tightest_delta)
    # p = 1/2: distinct weights are perfectly distinguishable
    rep_half = ita.untrusted_dp_verify(ita.build_example(2, 0.5), pv.PrivacyParams(1.0, 0.0))
    ok &= abs(rep_half.tightest_delta - 1.0) < 1e-9
    return _result("ita-example", t0, margin if ok else -1.0, 0.0)


def suite_informativeness(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    ok = True
    details = {}
    rng = randoms.rng_for(cfg.seed, 400_000)
    states = [
        np.outer(ita.encoded_ket([z], 0.25), ita.encoded_ket([z], 0.25).conj()) for z in (0, 1)
    ]
    nprime = randoms.random_channel_kraus(2, 2, 2, rng)
    outs = ita.channel_outputs(nprime, states)
    res = ita.informativeness_check(outs, outs)
    ok &= res.feasible is True
    details["identity_residual"] = res.residual
    phi = randoms.random_channel_kraus(2, 2, 2, rng)
    res = ita.informativeness_check(outs, ita.channel_outputs(phi, outs))
    ok &= res.feasible is True
    details["planted_residual"] = res.residual
    dephase = [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
    res = ita.informativeness_check(ita.channel_outputs(dephase, states), states, max_iterations=3000)
    ok &= res.feasible is False and res.residual > 1e-3
    details["negative_residual"] = res.residual
    # classical collapse demonstration
    enc1 = np.diag([0.8, 0.2]).astype(complex)
    enc2 = np.diag([0.3, 0.7]).astype(complex)
    replace = [
        math.sqrt(0.5) * np.outer(np.eye(2)[j], np.eye(2)[x]) for j in range(2) for x in range(2)
    ]
    rep = ita.classical_ita_demo([enc1, enc2], [replace])
    ok &= rep.admissible_refuted and rep.more_informative_defect < 1e-10
    ok &= rep.recovery_defect < 1e-10
    rep_id = ita.classical_ita_demo([enc1, enc2], [[np.eye(2, dtype=complex)]])
    ok &= not rep_id.admissible_refuted
    rep_single = ita.classical_ita_demo([enc1], [replace])
    ok &= not rep_single.admissible_refuted
    return _result("informativeness", t0, 0.0 if ok else -1.0, 0.0, **details)


# --- sweep ----------------------------------------------------------------------


def suite_sweep_ordering(cfg: RunConfig) -> SuiteResult:
    t0 = time.perf_counter()
    margin = math.inf
    rows_p = gb.sweep_comparison("p", 0.25, 0.75, 26)
    for r in rows_p:
        margin = min(margin, r.b_sep - r.b_mi)
    rows_a = gb.sweep_comparison("alpha", 0.1, 1.0, 19, p_fixed=0.4)
    ratios = [r.b_sep / r.b_mi for r in rows_a]
    for r in rows_a:
        margin = min(margin, r.b_sep - r.b_mi)
    margin = min(margin, 1e-9 - (max(ratios) - min(ratios)))
    return _result("sweep-ordering", t0, margin, 0.0, points=len(rows_p) + len(rows_a))


SUITES = (
    suite_linalg_kernel,
    suite_states_types,
    suite_divergence_axioms,
    suite_divergence_dpi,
    suite_auxiliary_inequalities,
    suite_variational_bound,
    suite_expected_gen_certificate,
    suite_probabilistic_gen_certificate,
    suite_trueloss_certificate,
    suite_gen_identities,
    suite_dp_mechanism,
    suite_stability_pipeline,
    suite_dp_to_gen,
    suite_grid_covering,
    suite_ita_example,
    suite_informativeness,
    suite_sweep_ordering,
)


def run_selftest(cfg: RunConfig | None = None) -> tuple[int, dict]:
    """Run every suite; exit code 0 iff all pass."""
    cfg = cfg or RunConfig()
    t0 = time.perf_counter()
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: s(cfg), SUITES))
    else:
        results = [suite(cfg) for suite in SUITES]
    results.sort(key=lambda r: r.name)
    summary = {
        "schema_version": 1,
        "seed": cfg.seed,
        "suites": [r.to_json() for r in results],
        "failures": [r.name for r in results if not r.passed],
        "total_seconds": round(time.perf_counter() - t0, 3),
        "pass": all(r.passed for r in results),
    }
    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
        path = os.path.join(cfg.output_dir, "selftest_summary.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return (0 if summary["pass"] else 1), summary
