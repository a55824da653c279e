"""Tests for the exact tree engine, its oracles and the exit decomposition."""
import math

import numpy as np
import pytest

from tests.conftest import all_model_kinds, seeds
from treepin.core.closedform import f_det, mean_g, second_moment_hd, u_c_det
from treepin.core.disorder import log_mgf
from treepin.core.exceptions import (
    ContinuousDisorderError,
    DepthTooLargeError,
    IndexOutOfRangeError,
    InvalidParameterError,
    SupportTooLargeError,
    WrongModelKindError,
)
from treepin.core.models import (
    BernoulliDisorder,
    ConstantDisorder,
    ModelSpec,
    NodeAddress,
    NoDefect,
    Realization,
    ShiftedDisorder,
    SubtreeConstant,
    SubtreeShift,
)
from treepin.core.treesim import (
    brute_force_log_partition,
    dominant_k,
    exact_expectation_oracle,
    gibbs_pinned_fraction,
    in_defect_mask,
    log_partition,
    log_partition_det,
    node_values,
    st_decomposition,
)

ORACLE_CASES = [(2, 6), (3, 4)]


class TestRecursiveEngine:
    """log_partition against the brute-force enumerator."""

    @pytest.mark.parametrize("d, depth", ORACLE_CASES)
    @pytest.mark.parametrize("bulk", [None, BernoulliDisorder(p=0.3, lo=-1.0, hi=2.0)])
    def test_matches_brute_force(self, d, depth, bulk):
        """Recursion and path enumeration agree for every model kind."""
        for model in all_model_kinds(d, bulk):
            for seed in seeds(5):
                for beta in (0.3, 1.0, 2.5):
                    real = Realization(model, seed, depth)
                    exact = brute_force_log_partition(real, beta)
                    assert abs(log_partition(real, beta) - exact) <= 1e-9, model

    @pytest.mark.slow
    @pytest.mark.parametrize("depth", range(1, 9))
    @pytest.mark.parametrize("d", [2, 3])
    def test_matches_brute_force_many_seeds(self, d, depth):
        """Every model kind at every depth up to 8, 100 seeds each."""
        for model in all_model_kinds(d, u=-0.4):
            for seed in seeds(100, master=7):
                real = Realization(model, seed, depth)
                assert abs(log_partition(real, 1.3) - brute_force_log_partition(real, 1.3)) <= 1e-9, model

    def test_depth_one(self, hd_model):
        """A single generation is one logaddexp."""
        real = Realization(hd_model, 5, 1)
        values = node_values(hd_model, 5, 1, np.array([1, 2]))
        assert log_partition(real, 0.8) == pytest.approx(float(np.logaddexp(*(0.8 * values))), rel=1e-14)

    def test_beta_zero_counts_paths(self, subtree_model):
        """At beta = 0 log Z is n log d."""
        real = Realization(subtree_model, 9, 5)
        assert log_partition(real, 0.0) == pytest.approx(5 * math.log(3), rel=1e-13)

    def test_block_size_does_not_change_result(self, subtree_model, monkeypatch):
        """Splitting into smaller blocks gives the same value."""
        real = Realization(subtree_model, 123, 7)
        whole = log_partition(real, 1.1)
        monkeypatch.setenv("TREEPIN_BLOCK_SIZE", "9")
        assert log_partition(real, 1.1) == pytest.approx(whole, rel=1e-13, abs=1e-13)

    def test_thread_count_is_bit_identical(self, hd_model, monkeypatch):
        """Thread count never changes the result bits."""
        monkeypatch.setenv("TREEPIN_BLOCK_SIZE", "64")
        real = Realization(hd_model, 77, 12)
        single = log_partition(real, 1.7, threads=1)
        for threads in (2, 4, 7):
            assert log_partition(real, 1.7, threads=threads) == single

    def test_same_seed_same_answer(self, branch_model):
        """Seeds alone determine the realization."""
        a = log_partition(Realization(branch_model, 31, 8), 1.2)
        b = log_partition(Realization(branch_model, 31, 8), 1.2)
        c = log_partition(Realization(branch_model, 32, 8), 1.2)
        assert a == b
        assert a != c

    def test_translation_covariance(self, gaussian):
        """Shifting every node by c adds beta n c."""
        beta, n, c = 0.9, 6, 0.75
        plain = ModelSpec(d=2, d1=1, bulk=gaussian)
        moved = ModelSpec(d=2, d1=1, bulk=ShiftedDisorder(base=gaussian, shift=c))
        for seed in seeds(5):
            lhs = log_partition(Realization(moved, seed, n), beta)
            rhs = log_partition(Realization(plain, seed, n), beta) + beta * n * c
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_monotone_in_potential(self, subtree_model):
        """log Z is nondecreasing in u."""
        for seed in seeds(3):
            values = [log_partition(Realization(subtree_model.with_potential(u), seed, 6), 1.0)
                      for u in np.linspace(-2.0, 3.0, 11)]
            assert all(b >= a for a, b in zip(values, values[1:]))

    def test_convex_in_beta(self, subtree_model):
        """log Z is convex in beta."""
        real = Realization(subtree_model, 4242, 6)
        grid = np.linspace(0.0, 3.0, 31)
        values = np.array([log_partition(real, b) for b in grid])
        assert np.all(np.diff(values, 2) >= -1e-9)

    def test_deterministic_model_matches_closed_sum(self, det_model):
        """Recursion on the non-disordered tree matches the closed sum."""
        for n in (1, 3, 6):
            for beta in (0.5, 2.0):
                real = Realization(det_model, 1, n)
                assert log_partition(real, beta) == pytest.approx(
                    log_partition_det(beta, det_model.u, 3, 2, n), rel=1e-12)

    def test_invalid_arguments(self, hd_model):
        """Depth 0 and infinite beta are rejected."""
        with pytest.raises(InvalidParameterError):
            log_partition(Realization(hd_model, 1, 0), 1.0)
        with pytest.raises(InvalidParameterError):
            log_partition(Realization(hd_model, 1, 3), math.inf)

    def test_node_budget(self, hd_model, monkeypatch):
        """The node budget caps d^n."""
        monkeypatch.setenv("TREEPIN_NODE_BUDGET", "1000")
        log_partition(Realization(hd_model, 1, 9), 1.0)
        with pytest.raises(DepthTooLargeError):
            log_partition(Realization(hd_model, 1, 10), 1.0)

    def test_brute_force_limit(self, hd_model, monkeypatch):
        """The enumerator refuses trees past its limit."""
        monkeypatch.setenv("TREEPIN_BRUTE_FORCE_LIMIT", "100")
        with pytest.raises(DepthTooLargeError):
            brute_force_log_partition(Realization(hd_model, 1, 7), 1.0)


class TestNodeValues:
    """Defect membership and per-node potentials."""

    def test_mask_matches_addresses(self):
        """Vectorized mask agrees with NodeAddress membership."""
        d, d1, generation = 3, 2, 3
        indices = np.arange(1, d ** generation + 1)
        mask = in_defect_mask(d, d1, generation, indices)
        expected = [NodeAddress(generation, int(j)).in_defect_subtree(d, d1) for j in indices]
        assert mask.tolist() == expected
        assert mask.sum() == d1 ** generation

    def test_root_is_in_defect(self):
        assert in_defect_mask(2, 1, 0, np.array([1])).tolist() == [True]

    def test_constant_defect_values(self, subtree_model):
        """Constant defect nodes carry u."""
        values = node_values(subtree_model, 3, 2, np.arange(1, 10))
        inside = in_defect_mask(3, 2, 2, np.arange(1, 10))
        assert np.all(values[inside] == 0.5)

    def test_shift_defect_values(self, gaussian):
        """Shift defect nodes carry V + u, others V."""
        plain = ModelSpec(d=3, d1=2, bulk=gaussian)
        shifted = ModelSpec(d=3, d1=2, bulk=gaussian, defect=SubtreeShift(u=1.5))
        idx = np.arange(1, 10)
        inside = in_defect_mask(3, 2, 2, idx)
        diff = node_values(shifted, 8, 2, idx) - node_values(plain, 8, 2, idx)
        assert np.allclose(diff[inside], 1.5)
        assert np.all(diff[~inside] == 0.0)


class TestDeterministicTree:
    """Closed sum for the non-disordered tree."""

    def test_no_potential_counts_paths(self):
        """u = 0 gives n log d."""
        for d, d1, n in ((2, 1, 5), (3, 2, 4), (5, 3, 7)):
            assert log_partition_det(1.3, 0.0, d, d1, n) == pytest.approx(n * math.log(d))

    def test_single_generation(self):
        # one bulk child plus d1 defect children carrying e^{βu}
        assert log_partition_det(1.0, 2.0, 3, 2, 1) == pytest.approx(math.log(1 + 2 * math.exp(2.0)))

    @pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 2.0, 3.0])
    @pytest.mark.parametrize("offset", [-1.0, -0.5, 0.5, 1.0, 2.0])
    def test_converges_to_closed_form(self, beta, offset):
        """(1/n) log Z at n = 2000 is within 1e-3 of f_det on both sides of u_c."""
        d, d1, n = 3, 2, 2000
        u = u_c_det(beta, d, d1) + offset
        assert abs(log_partition_det(beta, u, d, d1, n) / n - f_det(beta, u, d, d1)) <= 1e-3

    @pytest.mark.parametrize("n", [1, 4, 7, 10])
    def test_closed_sum_matches_brute_force(self, det_model, n):
        """The closed sum equals path enumeration up to n = 10."""
        real = Realization(det_model, 1, n)
        for beta in (0.5, 2.0):
            exact = brute_force_log_partition(real, beta)
            assert abs(log_partition_det(beta, det_model.u, 3, 2, n) - exact) <= 1e-9

    def test_rejects_zero_depth(self):
        """n must be >= 1."""
        with pytest.raises(InvalidParameterError):
            log_partition_det(1.0, 0.0, 2, 1, 0)


class TestDecomposition:
    """Exit-generation decomposition and the observables built on it."""

    @pytest.mark.parametrize("d, depth", ORACLE_CASES)
    def test_recombines_to_partition_function(self, d, depth):
        """Exit terms add back up to log Z."""
        for model in all_model_kinds(d)[1:]:
            for seed in seeds(4):
                real = Realization(model, seed, depth)
                for beta in (0.4, 1.8):
                    decomp = st_decomposition(real, beta)
                    assert abs(decomp.recombine() - log_partition(real, beta)) <= 1e-9, model

    def test_bernoulli_recombination(self):
        """Recombination against brute force for a shift defect."""
        model = ModelSpec(d=3, d1=1, bulk=BernoulliDisorder(p=0.2), defect=SubtreeShift(u=0.6))
        real = Realization(model, 55, 5)
        assert abs(st_decomposition(real, 1.4).recombine() - brute_force_log_partition(real, 1.4)) <= 1e-9

    def test_thread_count_is_bit_identical(self, subtree_model, monkeypatch):
        """Thread count never changes the result bits."""
        monkeypatch.setenv("TREEPIN_BLOCK_SIZE", "27")
        real = Realization(subtree_model, 3, 7)
        one = st_decomposition(real, 1.0, threads=1)
        four = st_decomposition(real, 1.0, threads=4)
        assert one.log_g.tolist() == four.log_g.tolist()
        assert one.log_pinned_term == four.log_pinned_term

    def test_constant_pinned_term(self, subtree_model):
        """The all-defect term is n (beta u + log d1)."""
        decomp = st_decomposition(Realization(subtree_model, 2, 4), 1.5)
        assert decomp.log_pinned_term == pytest.approx(4 * (1.5 * 0.5 + math.log(2)))
        assert decomp.log_terms().shape == (5,)

    def test_requires_defect(self, hd_model):
        """The homogeneous model has no decomposition."""
        real = Realization(hd_model, 1, 3)
        with pytest.raises(WrongModelKindError):
            st_decomposition(real, 1.0)
        with pytest.raises(WrongModelKindError):
            gibbs_pinned_fraction(real, 1.0)
        with pytest.raises(WrongModelKindError):
            dominant_k(real, 1.0)

    def test_pinned_fraction_limits(self, subtree_model):
        """Huge |u| pins or frees every path."""
        n = 6
        high = Realization(subtree_model.with_potential(40.0), 11, n)
        low = Realization(subtree_model.with_potential(-40.0), 11, n)
        assert gibbs_pinned_fraction(high, 1.0) == pytest.approx(1.0, abs=1e-9)
        assert gibbs_pinned_fraction(low, 1.0) == pytest.approx(0.0, abs=1e-9)
        assert dominant_k(high, 1.0) == n
        assert dominant_k(low, 1.0) == 0

    def test_pinned_fraction_monotone_in_potential(self, subtree_model):
        """The pinned fraction grows with u."""
        for seed in seeds(3):
            fractions = [gibbs_pinned_fraction(Realization(subtree_model.with_potential(u), seed, 6), 2.0)
                         for u in np.linspace(-1.0, 3.0, 17)]
            assert all(0.0 <= f <= 1.0 for f in fractions)
            assert all(b >= a - 1e-12 for a, b in zip(fractions, fractions[1:]))

    def test_precomputed_decomposition_is_reused(self, subtree_model):
        """Passing a decomposition gives the same observables."""
        real = Realization(subtree_model, 4, 5)
        decomp = st_decomposition(real, 1.2)
        assert gibbs_pinned_fraction(real, 1.2, decomp) == gibbs_pinned_fraction(real, 1.2)
        assert dominant_k(real, 1.2, decomp) == int(np.argmax(decomp.log_terms()))


class TestExpectationOracle:
    """Exact disorder averages by enumeration."""

    def test_first_moment_single_generation(self, fair_coin):
        """E Z_1 for the fair coin."""
        model = ModelSpec(d=2, d1=1, bulk=fair_coin)
        assert exact_expectation_oracle(model, 1.0, 0.0, 1) == pytest.approx(math.log(2 * math.cosh(1.0)))

    def test_first_moment_homogeneous(self):
        """E Z_n = (d e^lambda)^n."""
        bulk = BernoulliDisorder(p=0.3, lo=-1.0, hi=2.0)
        model = ModelSpec(d=2, d1=1, bulk=bulk)
        expected = 3 * (log_mgf(bulk, 0.7) + math.log(2))
        assert exact_expectation_oracle(model, 0.7, 0.0, 3) == pytest.approx(expected, rel=1e-12)

    def test_second_moment_homogeneous(self, fair_coin):
        """E Z² matches the closed form."""
        model = ModelSpec(d=2, d1=1, bulk=fair_coin)
        for beta in (0.5, 1.0):
            assert exact_expectation_oracle(model, beta, 0.0, 2, power=2) == pytest.approx(
                second_moment_hd(fair_coin, 2, beta, 2), rel=1e-12)

    def test_first_moment_constant_subtree(self, fair_coin):
        """E Z for the constant subtree from the exit means."""
        d, d1, n, beta, u = 3, 2, 2, 0.8, 0.4
        model = ModelSpec(d=d, d1=d1, bulk=fair_coin, defect=SubtreeConstant())
        terms = [beta * k * u + mean_g(fair_coin, d, d1, beta, k, n) for k in range(n)]
        terms.append(n * (beta * u + math.log(d1)))
        expected = float(np.logaddexp.reduce(terms))
        assert exact_expectation_oracle(model, beta, u, n) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("k", [0, 1])
    def test_exit_generation_means(self, fair_coin, k):
        """E G_k for constant and shift defects."""
        d, d1, n, beta = 3, 2, 2, 1.1
        constant = ModelSpec(d=d, d1=d1, bulk=fair_coin, defect=SubtreeConstant(u=0.3))
        shifted = ModelSpec(d=d, d1=d1, bulk=fair_coin, defect=SubtreeShift(u=0.3))
        expected = mean_g(fair_coin, d, d1, beta, k, n)
        assert exact_expectation_oracle(constant, beta, 0.3, n, target="g", k=k) == pytest.approx(
            expected, rel=1e-12)
        # the shift decomposition keeps the bulk prefix inside G_k
        assert exact_expectation_oracle(shifted, beta, 0.3, n, target="g", k=k) == pytest.approx(
            expected + k * log_mgf(fair_coin, beta), rel=1e-12)

    @pytest.mark.parametrize("beta", [0.3, 1.0, 2.0])
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_moment_formulas_on_binary_tree(self, n, beta):
        """E Z, E Z² and every E[G_k] against their closed forms."""
        bulk = BernoulliDisorder(p=0.3, lo=-1.0, hi=2.0)
        homogeneous = ModelSpec(d=2, d1=1, bulk=bulk)
        assert exact_expectation_oracle(homogeneous, beta, 0.0, n) == pytest.approx(
            n * (log_mgf(bulk, beta) + math.log(2)), rel=1e-12)
        assert exact_expectation_oracle(homogeneous, beta, 0.0, n, power=2) == pytest.approx(
            second_moment_hd(bulk, 2, beta, n), rel=1e-12)
        subtree = ModelSpec(d=2, d1=1, bulk=bulk, defect=SubtreeConstant(u=0.4))
        for k in range(n):
            assert exact_expectation_oracle(subtree, beta, 0.4, n, target="g", k=k) == pytest.approx(
                mean_g(bulk, 2, 1, beta, k, n), rel=1e-12)

    def test_constant_bulk(self):
        """Constant bulk disorder gives n (beta c + log d)."""
        model = ModelSpec(d=2, d1=1, bulk=ConstantDisorder(c=0.5))
        assert exact_expectation_oracle(model, 2.0, 0.0, 3) == pytest.approx(3 * (1.0 + math.log(2)))

    def test_rejections(self, gaussian, fair_coin):
        """Continuous laws, oversize trees and bad arguments are rejected."""
        with pytest.raises(ContinuousDisorderError):
            exact_expectation_oracle(ModelSpec(d=2, d1=1, bulk=gaussian), 1.0, 0.0, 2)
        coin = ModelSpec(d=3, d1=2, bulk=fair_coin, defect=SubtreeConstant())
        with pytest.raises(SupportTooLargeError):
            exact_expectation_oracle(coin, 1.0, 0.0, 3)
        with pytest.raises(InvalidParameterError):
            exact_expectation_oracle(coin, 1.0, 0.0, 2, power=3)
        with pytest.raises(IndexOutOfRangeError):
            exact_expectation_oracle(coin, 1.0, 0.0, 2, target="g", k=2)
        with pytest.raises(WrongModelKindError):
            exact_expectation_oracle(ModelSpec(d=2, d1=1, bulk=fair_coin, defect=NoDefect()), 1.0, 0.0, 2,
                                     target="g", k=0)
