import math

import numpy as np
import pytest

from noveltydetect.analysis import (
    VoteRates,
    chernoff_upper_bounds,
    requirement_diagnostics,
    simulate_vote_distribution,
    two_sample_ks,
)
from noveltydetect.benchmark import BENCHMARK_TRAIN, benchmark_config, benchmark_dataset
from noveltydetect.dataset import SplitSpec, split_per_class
from noveltydetect.ensemble import train_ensemble
from noveltydetect.evaluate import _fold_layout
from noveltydetect._seeds import child_seed


class TestChernoffBounds:
    def test_vanishing_delta_limit(self):
        upper, lower = chernoff_upper_bounds(mu=10.0, delta=1e-9)
        assert upper == pytest.approx(1.0, abs=1e-6)
        assert lower == pytest.approx(1.0, abs=1e-6)

    def test_reference_values(self):
        # direct numeric evaluation of (e^0.5 / 1.5^1.5)^10 and (e^-0.5 / 0.5^0.5)^10
        upper, lower = chernoff_upper_bounds(mu=10.0, delta=0.5)
        expect_upper = (math.exp(0.5) / 1.5**1.5) ** 10
        expect_lower = (math.exp(-0.5) / 0.5**0.5) ** 10
        assert upper == pytest.approx(expect_upper, rel=1e-12)
        assert lower == pytest.approx(expect_lower, rel=1e-12)
        assert upper == pytest.approx(0.339, abs=1e-3)
        assert lower == pytest.approx(0.216, abs=1e-3)

    def test_bounds_never_exceed_one(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            upper, lower = chernoff_upper_bounds(float(rng.uniform(0.1, 50)), float(rng.uniform(1e-6, 1 - 1e-6)))
            assert 0.0 < upper <= 1.0
            assert 0.0 < lower <= 1.0

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            chernoff_upper_bounds(1.0, 1.5)
        with pytest.raises(ValueError):
            chernoff_upper_bounds(1.0, 0.0)


class TestVoteRatesType:
    def test_mu_values(self):
        rates = VoteRates(p=np.array([0.8, 0.6]), q=np.array([0.1, 0.2]))
        assert rates.mu_novel == pytest.approx(1.4)
        assert rates.mu_known == pytest.approx(0.3)

    def test_novel_assignment_switches_rate(self):
        rates = VoteRates(
            p=np.array([0.8, 0.6]), q=np.array([0.1, 0.2]), novel_assignment=np.array([True, False])
        )
        assert rates.mu_known == pytest.approx(0.8 + 0.2)

    def test_known_mean_below_novel_mean_when_q_below_p(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            L = int(rng.integers(1, 40))
            p = rng.uniform(0.3, 1.0, size=L)
            q = p * rng.uniform(0.0, 1.0, size=L)
            flags = rng.random(L) < 0.2
            rates = VoteRates(p=p, q=np.minimum(q, 0.999 * p), novel_assignment=flags)
            assert rates.mu_known <= rates.mu_novel + 1e-12

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            VoteRates(p=np.array([0.0]), q=np.array([0.1]))
        with pytest.raises(ValueError):
            VoteRates(p=np.array([0.5]), q=np.array([1.0]))


class TestSimulation:
    def test_perfect_classifiers(self):
        rates = VoteRates(p=np.ones(8), q=np.zeros(8))
        sim = simulate_vote_distribution(rates, trials=2000, seed=0)
        assert sim.novel_counts[8] == 2000
        assert sim.known_counts[0] == 2000
        assert sim.total_error == 0.0

    def test_symmetric_rates_give_equal_means(self):
        L = 10
        rates = VoteRates(p=np.full(L, 0.5), q=np.full(L, 0.5))
        sim = simulate_vote_distribution(rates, trials=100_000, seed=1)
        mean_novel = (np.arange(L + 1) * sim.novel_counts).sum() / sim.novel_counts.sum()
        mean_known = (np.arange(L + 1) * sim.known_counts).sum() / sim.known_counts.sum()
        # both means estimate L/2; allow 4 sigma of the Monte-Carlo error
        sigma = math.sqrt(L * 0.25 / 100_000)
        assert abs(mean_novel - mean_known) < 4 * math.sqrt(2) * sigma

    def test_tails_below_chernoff_bounds(self):
        rates = VoteRates(p=np.full(50, 0.7), q=np.full(50, 0.3))
        sim = simulate_vote_distribution(rates, trials=100_000, seed=2)
        delta = (sim.mu_novel - sim.mu_known) / (sim.mu_novel + sim.mu_known)
        bound_upper, _ = chernoff_upper_bounds(sim.mu_known, delta)
        _, bound_lower = chernoff_upper_bounds(sim.mu_novel, delta)
        noise = 3 * math.sqrt(0.25 / 100_000)
        assert sim.false_rate <= bound_upper + noise
        assert sim.miss_rate <= bound_lower + noise

    def test_random_rate_vectors_respect_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            L = int(rng.integers(10, 60))
            p = rng.uniform(0.55, 0.9, size=L)
            q = rng.uniform(0.1, 0.45, size=L)
            rates = VoteRates(p=p, q=q)
            sim = simulate_vote_distribution(rates, trials=100_000, seed=int(rng.integers(1 << 30)))
            delta = (sim.mu_novel - sim.mu_known) / (sim.mu_novel + sim.mu_known)
            bound_upper, _ = chernoff_upper_bounds(sim.mu_known, delta)
            _, bound_lower = chernoff_upper_bounds(sim.mu_novel, delta)
            noise = 3 * math.sqrt(0.25 / 100_000)
            assert sim.false_rate <= bound_upper + noise
            assert sim.miss_rate <= bound_lower + noise

    def test_error_decays_with_ensemble_size(self):
        errors = []
        for L in (10, 25, 50, 100):
            rates = VoteRates(p=np.full(L, 0.7), q=np.full(L, 0.3))
            sim = simulate_vote_distribution(rates, trials=100_000, seed=4)
            errors.append(sim.total_error)
        for previous, current in zip(errors, errors[1:]):
            assert current <= previous + 0.003

    def test_determinism(self):
        rates = VoteRates(p=np.full(5, 0.6), q=np.full(5, 0.2))
        a = simulate_vote_distribution(rates, trials=1000, seed=7)
        b = simulate_vote_distribution(rates, trials=1000, seed=7)
        assert np.array_equal(a.novel_counts, b.novel_counts)
        assert np.array_equal(a.known_counts, b.known_counts)


class TestKs:
    def test_identical_samples(self):
        x = np.array([1.0, 2.0, 3.0])
        assert two_sample_ks(x, x) == 0.0

    def test_disjoint_samples(self):
        assert two_sample_ks(np.array([0.0, 1.0]), np.array([5.0, 6.0])) == 1.0

    def test_hand_value(self):
        # ECDFs differ most at 1.5: 2/3 vs 0/2
        assert two_sample_ks(np.array([1.0, 1.5, 4.0]), np.array([2.0, 3.0])) == pytest.approx(2 / 3)


@pytest.fixture(scope="module")
def fold_artifacts():
    ds = benchmark_dataset()
    heldout = set(_fold_layout(ds, benchmark_config(), 0)[0])
    known = ds.restrict_to_classes(set(ds.class_index) - heldout)
    novel = ds.restrict_to_classes(heldout)
    mc, bi, te = split_per_class(known, SplitSpec(0.6, 0.1, seed=child_seed(1234, 11, 0, 0)))
    ensemble = train_ensemble(
        mc, bi, num_partitions=10, novel_fraction=0.1, set_size=1,
        cfg=BENCHMARK_TRAIN, svm_c=100.0, seed=99,
    )
    return ensemble, bi, te, novel


class TestDiagnostics:
    def test_direction_holds_on_benchmark_fold(self, fold_artifacts):
        ensemble, bi, te, novel = fold_artifacts
        record = requirement_diagnostics(ensemble, bi, te, novel, s=1, seed=5)
        assert record.r1_auc > 0.6
        assert 0.0 <= record.r2_ks <= 1.0
        assert record.vote_gap > 0

    def test_scatter_covers_all_sets(self, fold_artifacts):
        ensemble, bi, te, novel = fold_artifacts
        record = requirement_diagnostics(ensemble, bi, te, novel, s=1, seed=5)
        clf = ensemble.classifiers[0]
        expected = bi.n + novel.n  # s=1: one set per example either way
        assert len(record.scatter) == expected
        categories = {c for _, _, c in record.scatter}
        assert categories == {"known", "presumed_novel", "truly_novel"}

    def test_bad_partition_index(self, fold_artifacts):
        ensemble, bi, te, novel = fold_artifacts
        with pytest.raises(ValueError):
            requirement_diagnostics(ensemble, bi, te, novel, partition_index=99)
