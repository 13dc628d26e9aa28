import math

import numpy as np
import pytest

from qpg import learning as ln
from qpg import states as st
from qpg.harness.instances import random_iid_instance, random_learning_instance
from qpg.harness.randoms import (
    ginibre_state,
    random_channel_kraus,
    random_instrument_branches,
    random_prior,
    random_psd,
    rng_for,
)

from conftest import rng_at

AB = st.alphabet(["a", "b"])


def make_simple_setup(rng, te_dim=2, outcomes=(0, 1)):
    enc = st.Encoding(
        {z: st.DensityMatrix(ginibre_state(te_dim * 2, rng)) for z in AB.symbols},
        te_dim=te_dim,
        tr_dim=2,
    )
    datasets = st.all_datasets(1, AB)
    branches = {
        s.entries: random_instrument_branches(2, 2, outcomes, rng) for s in datasets
    }
    alg = ln.KrausInstrument(branches, tr_dim=2, b_dim=2, outcomes=outcomes)
    p_s = random_prior(len(datasets), rng)
    return enc, datasets, alg, p_s


class TestInstrument:
    def test_completeness_enforced(self):
        bad = {("a",): {0: [np.eye(2) * 0.5]}}
        with pytest.raises(ValueError):
            ln.KrausInstrument(bad, tr_dim=2, b_dim=2, outcomes=(0,))

    def test_conditional_probabilities_normalize(self, rng):
        enc, datasets, alg, p_s = make_simple_setup(rng)
        joint = ln.apply_algorithm(alg, datasets, p_s, enc)
        assert np.allclose(joint.p_w_given_s.sum(axis=1), 1.0, atol=1e-9)
        assert joint.p_w.sum() == pytest.approx(1.0)

    def test_discarding_algorithm_constant_output(self, rng):
        # trace-and-replace with a fixed state: blocks are te-marginal x fixed
        fixed = ginibre_state(2, rng)
        w, v = np.linalg.eigh(fixed)
        kraus = [
            math.sqrt(max(w[j], 0.0)) * np.outer(v[:, j], np.eye(2)[x])
            for j in range(2)
            for x in range(2)
        ]
        alg = ln.KrausInstrument(
            {s.entries: {0: kraus} for s in st.all_datasets(1, AB)},
            tr_dim=2,
            b_dim=2,
            outcomes=(0,),
        )
        enc = st.Encoding(
            {z: st.DensityMatrix(ginibre_state(4, rng_at(40))) for z in AB.symbols},
            te_dim=2,
            tr_dim=2,
        )
        datasets = st.all_datasets(1, AB)
        joint = ln.apply_algorithm(alg, datasets, [0.5, 0.5], enc)
        assert np.allclose(joint.p_w_given_s, 1.0)
        for i, s in enumerate(datasets):
            expected = np.kron(st.te_marginal(s, enc), fixed)
            assert np.allclose(joint.blocks[i][0], expected, atol=1e-10)

    def test_measure_and_forward_deterministic(self):
        # orthogonal encodings + computational measurement: deterministic w
        zero, one = st.pure([1.0, 0.0]), st.pure([0.0, 1.0])
        enc = st.Encoding({"a": zero, "b": one}, te_dim=1, tr_dim=2)
        branches = {}
        for s in st.all_datasets(1, AB):
            per_w = {
                w: [np.outer(np.eye(2)[w], np.eye(2)[w])] for w in (0, 1)
            }
            branches[s.entries] = per_w
        alg = ln.KrausInstrument(branches, tr_dim=2, b_dim=2, outcomes=(0, 1))
        joint = ln.apply_algorithm(alg, st.all_datasets(1, AB), [0.5, 0.5], enc)
        assert np.allclose(joint.p_w_given_s, np.eye(2), atol=1e-12)
        # surviving blocks are pure
        for i in range(2):
            blk = joint.blocks[i][i]
            assert np.linalg.matrix_rank(blk, tol=1e-9) == 1


class TestLosses:
    def test_constant_loss_zero_gen_error(self, rng):
        enc, datasets, alg, p_s = make_simple_setup(rng)
        joint = ln.apply_algorithm(alg, datasets, p_s, enc)
        c = 0.37
        dim = joint.te_dim * joint.b_dim
        loss = ln.LossFamily(
            {(s.entries, w): c * np.eye(dim) for s in datasets for w in alg.outcomes}
        )
        assert ln.empirical_loss(joint, loss) == pytest.approx(c, abs=1e-10)
        assert ln.true_loss(joint, loss) == pytest.approx(c, abs=1e-10)
        assert ln.gen_error_expected(joint, loss) == pytest.approx(0.0, abs=1e-10)

    def test_product_state_zero_gen_error(self, rng):
        enc, datasets, alg, p_s = make_simple_setup(rng)
        j = ln.apply_algorithm(alg, datasets, p_s, enc)
        loss = ln.LossFamily(
            {
                (s.entries, w): random_psd(j.te_dim * j.b_dim, rng)
                for s in datasets
                for w in alg.outcomes
            }
        )
        prod = ln.JointOutputState(
            datasets=j.datasets,
            p_s=j.p_s,
            outcomes=j.outcomes,
            p_w_given_s=np.tile(j.p_w, (len(j.datasets), 1)),
            blocks=tuple(
                tuple(np.kron(j.rho_te[i], j.sigma_w[k]) for k in range(len(j.outcomes)))
                for i in range(len(j.datasets))
            ),
            te_dim=j.te_dim,
            b_dim=j.b_dim,
        )
        assert ln.gen_error_expected(prod, loss) == pytest.approx(0.0, abs=1e-10)

    def test_flattening_oracle(self, rng):
        enc, datasets, alg, p_s = make_simple_setup(rng)
        j = ln.apply_algorithm(alg, datasets, p_s, enc)
        loss = ln.LossFamily(
            {
                (s.entries, w): random_psd(j.te_dim * j.b_dim, rng)
                for s in datasets
                for w in alg.outcomes
            }
        )
        flat_j = st.cq_flatten(j.joint_cq)
        flat_p = st.cq_flatten(j.product_cq)
        d = j.joint_cq.quantum_dim
        big = np.zeros_like(flat_j)
        for idx, (a, b) in enumerate(j.joint_cq.labels):
            big[idx * d : (idx + 1) * d, idx * d : (idx + 1) * d] = loss.op(
                j.datasets[a], j.outcomes[b]
            )
        assert ln.empirical_loss(j, loss) == pytest.approx(
            float(np.trace(big @ flat_j).real), abs=1e-10
        )
        assert ln.true_loss(j, loss) == pytest.approx(
            float(np.trace(big @ flat_p).real), abs=1e-10
        )

    def test_missing_loss_entry(self, rng):
        enc, datasets, alg, p_s = make_simple_setup(rng)
        joint = ln.apply_algorithm(alg, datasets, p_s, enc)
        loss = ln.LossFamily({(datasets[0].entries, alg.outcomes[0]): np.eye(4)})
        with pytest.raises(KeyError):
            ln.empirical_loss(joint, loss)

    def test_psd_validation(self):
        with pytest.raises(ValueError):
            ln.LossFamily({(("a",), 0): np.diag([-0.1, 1.0])})
        with pytest.raises(ValueError):
            ln.LossFamily({(("a",), 0): np.diag([0.5, 1.5])}, bounded=True)


class TestPointwise:
    def test_constant_loss_vanishes(self, rng):
        enc, datasets, alg, p_s = make_simple_setup(rng)
        j = ln.apply_algorithm(alg, datasets, p_s, enc)
        dim = j.te_dim * j.b_dim
        loss = ln.LossFamily(
            {(s.entries, w): 0.4 * np.eye(dim) for s in datasets for w in alg.outcomes}
        )
        for i in range(len(datasets)):
            for k in range(len(alg.outcomes)):
                if j.p_s[i] * j.p_w_given_s[i, k] > 1e-12:
                    assert ln.gen_error_pointwise(j, loss, i, k) == pytest.approx(0.0, abs=1e-10)

    def test_signed_deviations_integrate_to_gap(self, rng):
        enc, datasets, alg, p_s = make_simple_setup(rng)
        j = ln.apply_algorithm(alg, datasets, p_s, enc)
        loss = ln.LossFamily(
            {
                (s.entries, w): random_psd(j.te_dim * j.b_dim, rng)
                for s in datasets
                for w in alg.outcomes
            }
        )
        signed = 0.0
        for i in range(len(datasets)):
            for k in range(len(alg.outcomes)):
                weight = j.p_s[i] * j.p_w_given_s[i, k]
                if weight <= 1e-12:
                    continue
                emp = float(np.trace(loss.op(datasets[i], alg.outcomes[k]) @ j.blocks[i][k]).real)
                signed += weight * (emp - ln.conditional_true_loss(j, loss, k))
        gap = ln.empirical_loss(j, loss) - ln.true_loss(j, loss)
        assert signed == pytest.approx(gap, abs=1e-10)

    def test_zero_weight_rejected(self):
        zero, one = st.pure([1.0, 0.0]), st.pure([0.0, 1.0])
        enc = st.Encoding({"a": zero, "b": one}, te_dim=1, tr_dim=2)
        branches = {
            s.entries: {w: [np.outer(np.eye(2)[w], np.eye(2)[w])] for w in (0, 1)}
            for s in st.all_datasets(1, AB)
        }
        alg = ln.KrausInstrument(branches, tr_dim=2, b_dim=2, outcomes=(0, 1))
        j = ln.apply_algorithm(alg, st.all_datasets(1, AB), [0.5, 0.5], enc)
        loss = ln.LossFamily(
            {(s.entries, w): np.eye(2) * 0.5 for s in st.all_datasets(1, AB) for w in (0, 1)}
        )
        with pytest.raises(ValueError):
            ln.gen_error_pointwise(j, loss, 0, 1)


class TestAlphaEstimation:
    def test_constant_loss_gives_zero(self, rng):
        enc, datasets, alg, p_s = make_simple_setup(rng)
        j = ln.apply_algorithm(alg, datasets, p_s, enc)
        dim = j.te_dim * j.b_dim
        loss = ln.LossFamily(
            {(s.entries, w): 0.8 * np.eye(dim) for s in datasets for w in alg.outcomes}
        )
        est = ln.estimate_alpha(j, loss)
        assert est.alpha_hat == pytest.approx(0.0, abs=1e-9)

    def test_bernoulli_hoeffding(self):
        # classical Bernoulli(1/2) loss in {0, 1} on trivial quantum factors
        one = np.ones((1, 1), dtype=complex)
        enc = st.Encoding({z: st.DensityMatrix(one) for z in AB.symbols}, te_dim=1, tr_dim=1)
        branches = {s.entries: {0: [one.copy()]} for s in st.all_datasets(1, AB)}
        alg = ln.KrausInstrument(branches, tr_dim=1, b_dim=1, outcomes=(0,))
        j = ln.apply_algorithm(alg, st.all_datasets(1, AB), [0.5, 0.5], enc)
        loss = ln.LossFamily({(("a",), 0): np.zeros((1, 1)), (("b",), 0): np.ones((1, 1))})
        grid = [s * 2.0**k * 0.01 for s in (-1, 1) for k in range(10)]  # up to 5.12
        grid += [-8.0, 8.0]
        est = ln.estimate_alpha(j, loss, lambda_grid=grid)
        assert est.alpha_hat <= 0.5 + 1e-3
        # scalar oracle: ln cosh(lam/2) at each grid point
        for lam in grid:
            assert math.log(math.cosh(lam / 2)) <= lam**2 * (0.5 + 1e-3) ** 2 / 2 + 1e-9

    def test_bounded_loss_hoeffding(self, rng):
        inst = random_learning_instance(4242, 0, bounded=True)
        est = ln.estimate_alpha(inst.joint, inst.loss)
        assert est.alpha_hat <= 0.5 + 1e-3

    def test_monotone_under_refinement(self, rng):
        inst = random_learning_instance(4242, 1)
        coarse = ln.estimate_alpha(inst.joint, inst.loss, lambda_grid=[-1.0, 1.0])
        fine = ln.estimate_alpha(inst.joint, inst.loss, lambda_grid=[-1.0, -0.5, 0.5, 1.0])
        assert fine.alpha_hat >= coarse.alpha_hat - 1e-12

    def test_certificate_on_grid(self):
        inst = random_learning_instance(4242, 2)
        est = ln.estimate_alpha(inst.joint, inst.loss)
        assert min(est.log_mgf_margins()) >= -1e-9

    def test_grid_near_zero_rejected(self):
        inst = random_learning_instance(4242, 3)
        with pytest.raises(ValueError):
            ln.estimate_alpha(inst.joint, inst.loss, lambda_grid=[1e-9, 1.0])

    def test_overflow_points_skipped(self):
        inst = random_learning_instance(4242, 4)
        est = ln.estimate_alpha(inst.joint, inst.loss, lambda_grid=[1.0, 1e6])
        assert est.skipped == (1e6,)


class TestIIDStructure:
    def test_n1_matches_local(self, rng):
        inst = random_iid_instance(77, 0, 1)
        j = inst.joint
        # at n = 1 the tensor algorithm is the local instrument itself
        kraus = inst.algorithm.to_kraus_instrument(max_n=1)
        j2 = ln.apply_algorithm(kraus, list(j.datasets), j.p_s, inst.local_enc)
        assert np.allclose(j.p_w_given_s, j2.p_w_given_s, atol=1e-10)

    def test_global_completeness_validated(self):
        rng = rng_at(41)
        # local branches that are each TP: the shared-label tensor is not
        chans = {(z, w): random_channel_kraus(2, 2, 2, rng) for z in "ab" for w in (0, 1)}
        local = ln.LocalInstrument(chans, tr_dim=2, b_dim=2, outcomes=(0, 1))
        with pytest.raises(ValueError):
            ln.build_iid_algorithm(local, 2, AB)

    def test_diagonal_mgf_product_rule(self):
        # commuting diagonal local losses: global MGF = product of locals at lam/n
        n = 2
        one = np.ones((1, 1), dtype=complex)
        enc = st.Encoding({z: st.DensityMatrix(one) for z in AB.symbols}, te_dim=1, tr_dim=1)
        chans = {(z, w): [one.copy()] for z in "ab" for w in (0, 1)}
        local = ln.scaled_branch_instrument(chans, {0: 0.5, 1: 0.5}, n, tr_dim=1, b_dim=1)
        alg = ln.build_iid_algorithm(local, n, AB)
        losses = {(w, z): np.array([[0.3 if z == "a" else 0.9]]) for w in (0, 1) for z in "ab"}
        inst = ln.IIDInstance(
            alphabet=AB, p_z=np.array([0.4, 0.6]), local_enc=enc, algorithm=alg,
            local_losses=losses, bounded=True,
        )
        est_global = ln.estimate_alpha(inst.joint, inst.loss, mode="global",
                                       lambda_grid=[0.7, -0.7])
        # scalar check: global MGF(lam) = (local MGF(lam/n))^n
        vals = np.array([0.3, 0.9])
        pz = np.array([0.4, 0.6])
        mu = float(pz @ vals)
        for lam in (0.7, -0.7):
            local_mgf = float(pz @ np.exp((lam / n) * (vals - mu)))
            global_mgf = math.exp(
                [m.centered_log_mgf(lam) for m in est_global.mixtures][0]
            )
            assert global_mgf == pytest.approx(local_mgf**n, abs=1e-12)

    def test_global_alpha_scales_inverse_sqrt_n(self):
        inst1 = random_iid_instance(88, 0, 1)
        # rebuild the same local pieces at n = 2 via matching channels
        rng = rng_at(42)
        chans = {(z, w): random_channel_kraus(2, 2, 2, rng) for z in "ab" for w in (0, 1)}
        q = {0: 0.5, 1: 0.5}
        enc = st.Encoding(
            {z: st.DensityMatrix(ginibre_state(2, rng)) for z in AB.symbols}, te_dim=1, tr_dim=2
        )
        losses = {(w, z): random_psd(2, rng, bounded=True) for w in (0, 1) for z in "ab"}
        grid = [s * 2.0**k * 0.01 for s in (-1, 1) for k in range(13)]
        alphas = {}
        for n in (1, 2, 3):
            local = ln.scaled_branch_instrument(chans, q, n, tr_dim=2, b_dim=2)
            alg = ln.build_iid_algorithm(local, n, AB)
            inst = ln.IIDInstance(
                alphabet=AB, p_z=np.array([0.5, 0.5]), local_enc=enc, algorithm=alg,
                local_losses=losses, bounded=True,
            )
            scaled = [lam for lam in grid]
            alphas[n] = ln.estimate_alpha(inst.joint, inst.loss, mode="global",
                                          lambda_grid=scaled).alpha_hat
        local_alpha = alphas[1]
        for n in (2, 3):
            assert alphas[n] <= local_alpha / math.sqrt(n) + 1e-3

    def test_conditional_local_equals_global_per_w_form(self):
        # the two stated forms of the conditional condition agree numerically
        inst = random_iid_instance(99, 0, 2)
        grid = [0.25, 0.5, 1.0, -0.25, -0.5, -1.0]
        est = ln.estimate_alpha(inst, mode="conditional-local", lambda_grid=grid)
        j = inst.joint
        n = inst.n
        for k, w in enumerate(inst.outcomes):
            # global per-w MGF on sigma^{S,te} x sigma_w with the averaged loss
            mu_w = ln.conditional_true_loss(j, inst.loss, k)
            for lam in grid:
                total = 0.0
                for i, s in enumerate(j.datasets):
                    ref = np.kron(j.rho_te[i], j.sigma_w[k])
                    op = inst.loss.op(s, w)
                    wdec, vdec = np.linalg.eigh(op)
                    diag = np.einsum("ij,jk,ki->i", vdec.conj().T, ref, vdec).real
                    total += j.p_s[i] * float(diag @ np.exp(n * lam * (wdec - mu_w)))
                log_mgf_global = math.log(total)
                # local certificate alpha also certifies the global form at
                # scaled lambda with the 1/n variance proxy
                assert log_mgf_global <= (n * lam) ** 2 * (est.alpha_hat + 1e-9) ** 2 / (
                    2 * n
                ) + 1e-7

    def test_local_instrument_json_roundtrip(self):
        from qpg.states import matrix_to_json

        rng = rng_at(43)
        chans = {(z, w): random_channel_kraus(2, 2, 2, rng) for z in "ab" for w in (0, 1)}
        local = ln.scaled_branch_instrument(chans, {0: 0.5, 1: 0.5}, 2, tr_dim=2, b_dim=2)
        data = {
            "tr_dim": 2,
            "b_dim": 2,
            "outcomes": [0, 1],
            "kraus": {
                f"{z},{w}": [matrix_to_json(k) for k in local.kraus(z, w)]
                for z in "ab"
                for w in (0, 1)
            },
        }
        local2 = ln.local_instrument_from_json(data)
        for z in "ab":
            for w in (0, 1):
                assert np.allclose(local2.branch_map_norm(z, w), local.branch_map_norm(z, w))

    def test_avg_loss_structure(self):
        inst = random_iid_instance(104, 0, 2)
        loss = inst.loss
        s = inst.joint.datasets[0]
        w = inst.outcomes[0]
        op = loss.op(s, w)
        # the averaged loss operator has the same trace as the mean of locals
        te, b = inst.local_enc.te_dim, inst.algorithm.local.b_dim
        locals_mean = sum(
            float(np.trace(inst.local_loss(w, z)).real) for z in s.entries
        ) / len(s.entries)
        pair = te * b
        assert float(np.trace(op).real) == pytest.approx(locals_mean * pair ** (inst.n - 1), abs=1e-9)
