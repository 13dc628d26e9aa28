import math

import numpy as np
import pytest

from qpg import ita
from qpg.harness.randoms import ginibre_state, random_channel_kraus, rng_for
from qpg.linalg import LinalgError, dagger
from qpg.privacy import PrivacyParams

from conftest import rng_at


def pure(ket):
    return np.outer(ket, ket.conj())


class TestEncodingAndProjectors:
    def test_overlap(self):
        enc = ita.PureEncoding(0.25)
        assert enc.ket(0) @ enc.ket(1) == pytest.approx(0.5)
        assert enc.overlap == pytest.approx(0.5)
        for z in (0, 1):
            assert np.linalg.norm(enc.ket(z)) == pytest.approx(1.0)

    def test_n1_projectors_are_hadamard_pair(self):
        ex = ita.build_example(1, 0.5)
        plus = np.array([1.0, 1.0]) / math.sqrt(2)
        minus = np.array([1.0, -1.0]) / math.sqrt(2)
        assert np.allclose(ex.projectors[0], pure(plus), atol=1e-12)
        assert np.allclose(ex.projectors[1], pure(minus), atol=1e-12)

    def test_rank_is_binomial(self):
        ex = ita.build_example(2, 0.5)
        assert [int(round(np.trace(p).real)) for p in ex.projectors] == [1, 2, 1]

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_projector_algebra(self, n):
        ex = ita.build_example(n, 0.3)
        total = sum(ex.projectors)
        assert np.allclose(total, np.eye(2**n), atol=1e-10)
        for k, pk in enumerate(ex.projectors):
            assert np.max(np.abs(pk @ pk - pk)) <= 1e-10
            for k2 in range(k + 1, n + 1):
                assert np.max(np.abs(pk @ ex.projectors[k2])) <= 1e-10
        assert sum(int(round(np.trace(p).real)) for p in ex.projectors) == 2**n

    def test_n_cap(self):
        with pytest.raises(ValueError):
            ita.build_example(9, 0.5)


class TestQND:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_orthogonal_encoding_undisturbed(self, n):
        assert ita.qnd_check(n) <= 1e-9

    def test_nonorthogonal_encoding_disturbed(self):
        dev = ita.qnd_check(2, 0.3)
        assert dev > 1e-3  # reported, not an error

    def test_channel_trace_preserving(self):
        ex = ita.build_example(3, 0.2)
        rho = ginibre_state(8, rng_at(70))
        out = ex.channel_output(rho)
        assert float(np.sum(out.probs)) == pytest.approx(1.0, abs=1e-10)


class TestHelstrom:
    def test_identical_states(self):
        rho = ginibre_state(2, rng_at(71))
        assert ita.helstrom_error(rho, rho) == pytest.approx(0.5)

    def test_orthogonal_pure(self):
        assert ita.helstrom_error(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(0.0)

    def test_closed_form_p25(self):
        a, b = ita.encoded_ket([0], 0.25), ita.encoded_ket([1], 0.25)
        err = ita.helstrom_error(pure(a), pure(b))
        assert err == pytest.approx((1.0 - math.sqrt(0.75)) / 2.0, abs=1e-10)

    def test_symmetric_at_even_prior(self):
        rng = rng_at(72)
        a, b = ginibre_state(3, rng), ginibre_state(3, rng)
        assert ita.helstrom_error(a, b) == pytest.approx(ita.helstrom_error(b, a), abs=1e-12)

    def test_decreases_with_overlap(self):
        prev = 0.5
        for p in (0.05, 0.15, 0.3, 0.5):
            a, b = ita.encoded_ket([0], p), ita.encoded_ket([1], p)
            err = ita.helstrom_error(pure(a), pure(b))
            assert err <= prev + 1e-12
            prev = err

    def test_prior_validation(self):
        with pytest.raises(ValueError):
            ita.helstrom_error(np.eye(2) / 2, np.eye(2) / 2, prior=0.0)


class TestUntrustedDP:
    def test_orthogonal_case_distinct_weights_fully_visible(self):
        rep = ita.untrusted_dp_verify(ita.build_example(2, 0.5), PrivacyParams(1.0, 0.0))
        assert rep.tightest_delta == pytest.approx(1.0, abs=1e-9)
        assert not rep.privacy_pass

    def test_nonorthogonal_strictly_subunit(self):
        rep = ita.untrusted_dp_verify(ita.build_example(2, 0.1), PrivacyParams(0.0, 1.0))
        assert rep.pairs
        for pair in rep.pairs:
            assert pair.hockey_stick < 1.0 - 1e-9

    def test_depolarizing_channel_passes(self):
        # fully depolarizing variant: replace projector outputs by the
        # maximally mixed state; every pair coincides
        ex = ita.build_example(2, 0.3)
        mixed = np.eye(4) / 4

        class Depolarizing:
            n = ex.n
            p = ex.p

            def kets(self, p=None):
                return ex.kets(p)

            def channel_output(self, rho):
                from qpg.states import CQState

                return CQState(((0,),), np.array([1.0]), (mixed,), (4,))

        rep = ita.untrusted_dp_verify(Depolarizing(), PrivacyParams(0.0, 0.0))
        assert rep.passed
        assert rep.tightest_delta <= 1e-12


class TestClassicalDemo:
    def setup_method(self):
        self.enc = [np.diag([0.8, 0.2]).astype(complex), np.diag([0.3, 0.7]).astype(complex)]
        self.replace = [
            math.sqrt(0.5) * np.outer(np.eye(2)[j], np.eye(2)[x])
            for j in range(2)
            for x in range(2)
        ]

    def test_identity_channel_not_refuted(self):
        rep = ita.classical_ita_demo(self.enc, [[np.eye(2, dtype=complex)]])
        assert not rep.admissible_refuted
        assert rep.verdict == "admissibility not refuted"
        assert rep.reconstruction_residual <= 1e-10

    def test_trace_and_replace_refuted(self):
        rep = ita.classical_ita_demo(self.enc, [self.replace])
        assert rep.admissible_refuted
        assert rep.more_informative_defect <= 1e-10
        assert rep.recovery_defect <= 1e-10
        assert rep.reconstruction_residual > 1e-6

    def test_single_encoding_always_reconstructable(self):
        rep = ita.classical_ita_demo([self.enc[0]], [self.replace])
        assert not rep.admissible_refuted

    def test_noncommuting_rejected(self):
        x = np.array([[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(LinalgError):
            ita.classical_ita_demo([np.diag([0.8, 0.2]).astype(complex), x.astype(complex)],
                                   [[np.eye(2, dtype=complex)]])


class TestInformativeness:
    def test_identity_simulation(self):
        rng = rng_at(73)
        states = [pure(ita.encoded_ket([z], 0.25)) for z in (0, 1)]
        outs = ita.channel_outputs(random_channel_kraus(2, 2, 2, rng), states)
        res = ita.informativeness_check(outs, outs)
        assert res.feasible is True
        assert res.residual < 1e-6

    def test_planted_postprocessing_recovered(self):
        rng = rng_at(74)
        states = [ginibre_state(2, rng) for _ in range(3)]
        nprime = random_channel_kraus(2, 2, 2, rng)
        phi = random_channel_kraus(2, 2, 2, rng)
        outs = ita.channel_outputs(nprime, states)
        targets = ita.channel_outputs(phi, outs)
        res = ita.informativeness_check(outs, targets)
        assert res.feasible is True and res.residual < 1e-6

    def test_planted_negative_instance(self):
        states = [pure(ita.encoded_ket([z], 0.25)) for z in (0, 1)]
        dephase = [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
        deph_outs = ita.channel_outputs(dephase, states)
        res = ita.informativeness_check(deph_outs, states, max_iterations=3000)
        assert res.feasible is False
        assert res.residual > 1e-3
        assert res.verdict == "not simulable within tolerance"

    def test_input_validation(self):
        with pytest.raises(ValueError):
            ita.informativeness_check([], [])
