import csv
import math

import numpy as np
import pytest

from qpg import genbounds as gb
from qpg import states as st
from qpg.harness.instances import (
    ass1_safe_delta,
    mechanism_loss,
    random_iid_instance,
    random_learning_instance,
    reference_mechanism,
)
from qpg.harness.randoms import random_prior, rng_for
from qpg.learning import JointOutputState, estimate_alpha
from qpg.privacy import PrivacyParams
from qpg.stability import StabilityBoundParams, stability_bound

from conftest import rng_at

AB = st.alphabet(["a", "b"])


class TestBoundExpected:
    def test_formula_with_fixed_inputs(self):
        inst = random_learning_instance(11, 0)
        rep = gb.bound_expected(inst.joint, inst.loss, alpha=1.0)
        assert rep.bound == pytest.approx(
            math.sqrt(2.0 * inst.joint.mutual_information()), abs=1e-12
        )

    def test_product_state_trivial(self):
        inst = random_learning_instance(11, 1)
        j = inst.joint
        prod = JointOutputState(
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
        rep = gb.bound_expected(prod, inst.loss, alpha=1.0)
        assert rep.info_value == pytest.approx(0.0, abs=1e-10)
        assert rep.empirical == pytest.approx(0.0, abs=1e-10)
        assert rep.passed

    @pytest.mark.parametrize("index", range(50))
    def test_certificate_pool(self, index):
        inst = random_learning_instance(12, index)
        rep = gb.bound_expected(inst.joint, inst.loss)
        assert rep.margin >= -1e-8

    def test_iid_variant_uses_sample_scaling(self):
        inst = random_iid_instance(13, 0, 2)
        rep = gb.bound_expected(inst.joint, inst.loss, alpha=1.0, iid=inst)
        expected = math.sqrt(2.0 * inst.joint.mutual_information() / inst.n)
        assert rep.bound == pytest.approx(expected, abs=1e-12)
        assert rep.passed

    def test_certificate_detects_violations(self):
        # negative control: a fake tiny alpha must produce a failing report
        failed_somewhere = False
        for idx in range(10):
            inst = random_learning_instance(12, idx)
            rep = gb.bound_expected(inst.joint, inst.loss, alpha=1e-6)
            failed_somewhere |= not rep.passed
        assert failed_somewhere


class TestBoundProbabilistic:
    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("gamma", [1.5, 2.0, 4.0])
    @pytest.mark.parametrize("delta", [0.05, 0.1, 0.3])
    def test_coverage(self, n, gamma, delta):
        inst = random_iid_instance(14, 0, n, te_dim=2 if n == 2 else 1)
        rep = gb.bound_probabilistic(inst, gamma, delta)
        assert rep.bound >= 1.0 - delta - 1e-12
        assert rep.passed

    def test_delta_near_one_trivial(self):
        inst = random_iid_instance(14, 1, 2)
        rep = gb.bound_probabilistic(inst, 2.0, 0.999)
        assert rep.passed  # coverage requirement approaches zero

    def test_threshold_shrinks_with_delta(self):
        inst = random_iid_instance(14, 2, 2)
        t_loose = gb.bound_probabilistic(inst, 2.0, 0.3).inputs["threshold"]
        t_tight = gb.bound_probabilistic(inst, 2.0, 0.05).inputs["threshold"]
        assert t_tight > t_loose

    def test_validation(self):
        inst = random_iid_instance(14, 3, 2)
        with pytest.raises(ValueError):
            gb.bound_probabilistic(inst, 1.0, 0.1)
        with pytest.raises(ValueError):
            gb.bound_probabilistic(inst, 2.0, 1.5)

    def test_enumeration_detects_violations(self):
        # negative control: an absurdly small alpha shrinks the threshold
        # below real pointwise deviations and the coverage check must fail
        failed_somewhere = False
        for idx in range(5):
            inst = random_iid_instance(14, 10 + idx, 2)
            rep = gb.bound_probabilistic(inst, 2.0, 0.3, alpha=1e-4)
            failed_somewhere |= not rep.passed
        assert failed_somewhere


class TestTrueLossLower:
    def test_zero_empirical_trivial(self):
        inst = random_learning_instance(15, 0, bounded=True)
        j = inst.joint
        zero_loss = __import__("qpg.learning", fromlist=["LossFamily"]).LossFamily(
            {
                (s.entries, w): np.zeros((j.te_dim * j.b_dim,) * 2)
                for s in j.datasets
                for w in j.outcomes
            },
            bounded=True,
        )
        for rep in gb.bound_true_loss_lower(j, zero_loss, gamma=2.0):
            assert rep.passed

    @pytest.mark.parametrize("gamma", [1.5, 2.0, 4.0, 100.0])
    def test_bounded_pool(self, gamma):
        for index in range(10):
            inst = random_learning_instance(16, index, bounded=True)
            reports = gb.bound_true_loss_lower(inst.joint, inst.loss, gamma=gamma)
            assert len(reports) == 2
            for rep in reports:
                assert rep.margin >= -1e-8

    def test_multiplicative_requires_bounded(self):
        inst = random_learning_instance(16, 50)  # unbounded pool
        with pytest.raises(ValueError):
            gb.bound_true_loss_lower(inst.joint, inst.loss, gamma=2.0, mode="multiplicative")
        reports = gb.bound_true_loss_lower(inst.joint, inst.loss, gamma=2.0, mode="both")
        assert [r.name for r in reports] == ["true-loss-lower-bound-exponential"]


class TestDpToGen:
    def test_formula_spot_value(self):
        p = StabilityBoundParams(100, 2, PrivacyParams(0.1, 0.0))
        bound_value = math.sqrt(2.0 * stability_bound(p)[0])
        assert bound_value == pytest.approx(math.sqrt(2 * (1 + math.log(10))), abs=1e-12)
        assert bound_value == pytest.approx(2.5700525648297723, abs=1e-10)

    def test_seam_value(self):
        n = 8
        p = StabilityBoundParams(n, 2, PrivacyParams(1.0 / n, 0.0))
        assert math.sqrt(2.0 * stability_bound(p)[0]) == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_full_pipeline_on_reference_mechanism(self):
        n, eps = 4, 0.5
        mech = reference_mechanism(n, AB, eps, 0.0)
        datasets = st.all_datasets(n, AB)
        loss = mechanism_loss(mech)
        p = StabilityBoundParams(n, 2, PrivacyParams(eps, 0.0))
        for i in range(3):
            prior = random_prior(len(datasets), rng_for(17, i))
            rep = gb.dp_to_gen(mech, mech.encoding(), datasets, prior, loss, p)
            assert rep.passed

    def test_regime_gate(self):
        n = 4
        mech = reference_mechanism(n, AB, 0.5, 0.0)
        datasets = st.all_datasets(n, AB)
        loss = mechanism_loss(mech)
        p = StabilityBoundParams(n, 2, PrivacyParams(2.0, 0.0))
        with pytest.raises(ValueError):
            gb.dp_to_gen(
                mech, mech.encoding(), datasets,
                np.full(len(datasets), 1 / len(datasets)), loss, p,
            )


class TestSweep:
    def test_degenerate_toy_both_zero(self):
        # flip mass 1/2 makes W independent of Z; eta = 1 kills the residue
        state = gb.toy_joint(gb.ToyConfig(p=0.5, flip_q=0.5, eta=1.0))
        assert gb.b_mi(state, 1.0) == pytest.approx(0.0, abs=1e-7)
        assert gb.b_sep(state, 1.0) == pytest.approx(0.0, abs=1e-7)

    def test_trivial_residue_collapses_to_common_value(self):
        # eta = 1: the residue carries nothing, the conditional divergence
        # term vanishes, and both bounds reduce to the same classical value
        state = gb.toy_joint(gb.ToyConfig(p=0.35, flip_q=0.15, eta=1.0))
        assert gb.b_mi(state, 0.7) == pytest.approx(gb.b_sep(state, 0.7), abs=1e-7)
        assert gb.b_mi(state, 0.7) > 0.1

    def test_p_sweep_ordering(self):
        rows = gb.sweep_comparison("p", 0.25, 0.75, 26)
        assert len(rows) == 26
        assert rows[0].value == pytest.approx(0.25) and rows[-1].value == pytest.approx(0.75)
        for r in rows:
            assert r.b_mi <= r.b_sep

    def test_alpha_sweep_ordering_and_linearity(self):
        rows = gb.sweep_comparison("alpha", 0.1, 1.0, 19, p_fixed=0.4)
        assert len(rows) == 19
        ratios = [r.b_sep / r.b_mi for r in rows]
        assert max(ratios) - min(ratios) <= 1e-9
        for r in rows:
            assert r.b_mi <= r.b_sep
            assert r.b_mi / r.value == pytest.approx(rows[0].b_mi / rows[0].value, abs=1e-9)

    def test_csv_format(self, tmp_path):
        rows = gb.sweep_comparison("p", 0.25, 0.75, 3)
        path = tmp_path / "sweep.csv"
        gb.write_sweep_csv(rows, path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            assert header == ["sweep_var", "value", "B_MI", "B_SEP"]
            body = list(reader)
        assert len(body) == 3
        for row in body:
            assert row[0] == "p"
            # 12 significant digits in scientific notation
            assert len(row[1].split("e")[0].replace(".", "").replace("-", "")) == 12
            assert float(row[2]) <= float(row[3])

    def test_csv_deterministic(self, tmp_path):
        rows = gb.sweep_comparison("alpha", 0.1, 1.0, 19)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        gb.write_sweep_csv(rows, p1)
        gb.write_sweep_csv(gb.sweep_comparison("alpha", 0.1, 1.0, 19), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_validation(self):
        with pytest.raises(ValueError):
            gb.sweep_comparison("p", 0.25, 0.75, 1)
        with pytest.raises(ValueError):
            gb.sweep_comparison("q", 0.25, 0.75, 5)
        with pytest.raises(ValueError):
            gb.ToyConfig(p=0.0)


class TestReportShape:
    def test_margin_and_pass(self):
        inst = random_learning_instance(18, 0)
        rep = gb.bound_expected(inst.joint, inst.loss)
        payload = rep.to_json()
        assert payload["pass"] == (payload["margin"] >= -1e-8)
        assert payload["certifies"] == "expected-generalization-bound"
