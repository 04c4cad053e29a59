import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

import corpus
from srdetail.degrade import translate
from srdetail.stats import (
    BradleyTerryError,
    ComparisonRecord,
    FeatureMatrix,
    average_ranks,
    bt_fit,
    global_shift_psnr,
    kmedoids,
    pairwise_distances,
    plcc,
    psnr,
    shift_distribution,
    srcc,
    ssim,
    ssim_window,
    standardize,
)


# ---------------------------------------------------------------- oracles


def pearson_def(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = math.sqrt(sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y))
    return num / den


def ranks_def(x):
    """Rank = count below + half the ties (self included), 1-based."""
    return [sum(v < a for v in x) + (sum(v == a for v in x) + 1) / 2 for a in x]


def spearman_def(x, y):
    return pearson_def(ranks_def(x), ranks_def(y))


def ssim_oracle(a, b):
    g = ssim_window()
    w = np.outer(g, g)
    c1, c2 = 0.01**2, 0.03**2
    h, wd = a.shape
    vals = []
    for y in range(h - 10):
        for x in range(wd - 10):
            pa, pb = a[y : y + 11, x : x + 11], b[y : y + 11, x : x + 11]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def bt_mle_oracle(records, items):
    """Direct numerical maximization of the log-likelihood."""
    idx = {k: i for i, k in enumerate(items)}

    def nll(theta):
        t = np.concatenate([[0.0], theta])
        total = 0.0
        for r in records:
            i, j = idx[r.item_a], idx[r.item_b]
            total -= r.wins_a * (t[i] - np.logaddexp(t[i], t[j]))
            total -= r.wins_b * (t[j] - np.logaddexp(t[i], t[j]))
        return total

    res = optimize.minimize(nll, np.zeros(len(items) - 1), method="BFGS", options={"gtol": 1e-10})
    p = np.exp(np.concatenate([[0.0], res.x]))
    return p / p.sum()


# ---------------------------------------------------------------- Bradley-Terry


class TestBradleyTerry:
    def test_two_items(self):
        fit = bt_fit([ComparisonRecord("A", "B", 3, 1)])
        assert fit.abilities["A"] == pytest.approx(0.75, abs=1e-6)
        assert fit.abilities["B"] == pytest.approx(0.25, abs=1e-6)
        assert fit.converged

    def test_symmetric_round_robin(self):
        recs = [ComparisonRecord(a, b, 5, 5) for a, b in itertools.combinations("ABCD", 2)]
        fit = bt_fit(recs)
        for v in fit.abilities.values():
            assert v == pytest.approx(0.25, abs=1e-12)

    def test_matches_numerical_mle(self):
        rng = np.random.default_rng(4)
        items = list("ABCDE")
        recs = [
            ComparisonRecord(a, b, int(rng.integers(1, 20)), int(rng.integers(1, 20)))
            for a, b in itertools.combinations(items, 2)
        ]
        fit = bt_fit(recs, tol=1e-13)
        oracle = bt_mle_oracle(recs, items)
        np.testing.assert_allclose([fit.abilities[k] for k in items], oracle, atol=1e-6)

    def test_recovers_ranking(self):
        true = {"a": 0.5, "b": 0.3, "c": 0.2}
        rng = np.random.default_rng(7)
        recs = []
        for x, y in itertools.combinations(true, 2):
            wins = int(rng.binomial(1000, true[x] / (true[x] + true[y])))
            recs.append(ComparisonRecord(x, y, wins, 1000 - wins))
        assert bt_fit(recs).ranking() == ["a", "b", "c"]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_loglik_monotone_and_normalized(self, seed):
        rng = np.random.default_rng(seed)
        items = [f"m{i}" for i in range(rng.integers(2, 7))]
        recs = [
            ComparisonRecord(a, b, int(rng.integers(1, 30)), int(rng.integers(1, 30)))
            for a, b in itertools.combinations(items, 2)
        ]
        fit = bt_fit(recs)
        trace = np.array(fit.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-9 * np.abs(trace[:-1]))
        assert sum(fit.abilities.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(v > 0 for v in fit.abilities.values())

    def test_ranking_scale_invariant(self):
        fit = bt_fit([ComparisonRecord("x", "y", 7, 3), ComparisonRecord("y", "z", 6, 4),
                      ComparisonRecord("x", "z", 2, 2)])
        scaled = {k: 10 * v for k, v in fit.abilities.items()}
        assert sorted(scaled, key=lambda k: -scaled[k]) == fit.ranking()

    def test_display_scores(self):
        fit = bt_fit([ComparisonRecord("A", "B", 3, 1)])
        d = fit.display_scores()
        assert d["B"] == 0.0 and d["A"] == pytest.approx(math.log(3), abs=1e-6)

    def test_disconnected(self):
        recs = [ComparisonRecord("A", "B", 2, 1), ComparisonRecord("C", "D", 1, 2)]
        with pytest.raises(BradleyTerryError, match=r"\{A, B\}.*\{C, D\}"):
            bt_fit(recs)

    def test_never_wins(self):
        with pytest.raises(BradleyTerryError, match="zero wins: B"):
            bt_fit([ComparisonRecord("A", "B", 3, 0)])

    def test_smoothing(self):
        fit = bt_fit([ComparisonRecord("A", "B", 3, 0)], alpha=1.0)
        assert fit.abilities["A"] == pytest.approx(0.8, abs=1e-6)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            ComparisonRecord("A", "A", 1, 1)
        with pytest.raises(ValueError):
            ComparisonRecord("A", "B", 0, 0)


# ---------------------------------------------------------------- correlation


class TestCorrelation:
    def test_affine(self):
        x = [0.1, 0.5, 0.2, 0.9]
        assert plcc(x, [2 * v + 1 for v in x]) == pytest.approx(1.0, abs=1e-15)
        assert plcc(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-15)

    def test_four_point(self):
        assert plcc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)
        assert srcc([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)

    def test_monotone(self):
        x = np.array([0.3, 1.2, -2.0, 5.0, 0.0])
        assert srcc(x, np.exp(x)) == 1.0
        assert srcc(x, -(x**3)) == -1.0

    def test_average_ranks(self):
        np.testing.assert_array_equal(average_ranks([10, 20, 20, 5]), [2, 3.5, 3.5, 1])

    def test_errors(self):
        with pytest.raises(ValueError):
            plcc([1, 1, 1], [1, 2, 3])
        with pytest.raises(ValueError):
            plcc([1, 2, 3], [1, 2])
        with pytest.raises(ValueError):
            srcc([1, 2], [2, 1])

    @settings(max_examples=60)
    @given(st.integers(3, 30), st.integers(0, 2**32 - 1), st.booleans())
    def test_against_definitions(self, n, seed, ties):
        rng = np.random.default_rng(seed)
        if ties:
            x, y = rng.integers(0, 4, n).astype(float), rng.integers(0, 4, n).astype(float)
        else:
            x, y = rng.normal(size=n), rng.normal(size=n)
        if x.std() == 0 or y.std() == 0:
            return
        assert plcc(x, y) == pytest.approx(pearson_def(list(x), list(y)), abs=1e-12)
        assert srcc(x, y) == pytest.approx(spearman_def(list(x), list(y)), abs=1e-12)
        assert plcc(x, y) == pytest.approx(plcc(y, x), abs=1e-15)
        assert srcc(x, y) == pytest.approx(srcc(y, x), abs=1e-15)
        assert plcc(3 * x + 2, y) == pytest.approx(plcc(x, y), abs=1e-12)
        assert srcc(np.exp(x), y) == pytest.approx(srcc(x, y), abs=1e-12)


# ---------------------------------------------------------------- k-medoids


def exhaustive_medoids(x, k):
    d = pairwise_distances(x)
    best = min(itertools.combinations(range(len(x)), k), key=lambda m: d[list(m)].min(axis=0).sum())
    return set(best), d[list(best)].min(axis=0).sum()


class TestKMedoids:
    def fm(self, values):
        values = np.asarray(values, float)
        return FeatureMatrix([f"r{i}" for i in range(len(values))], [f"c{j}" for j in range(values.shape[1])], values)

    def test_k_equals_n(self):
        res = kmedoids(self.fm(np.random.default_rng(0).normal(size=(5, 3))), k=5)
        assert sorted(res.medoids) == [f"r{i}" for i in range(5)] and res.cost == 0.0

    def test_triplets(self):
        pts = np.array([[0, 0], [0.3, 0.1], [0.1, 0.35], [10, 10], [10.2, 9.9], [9.7, 10.1],
                        [0, 20], [0.3, 20.2], [-0.2, 19.8]])
        fm = self.fm(pts)
        res = kmedoids(fm, k=3)
        z, _ = standardize(pts)
        best, cost = exhaustive_medoids(z, 3)
        assert set(res.medoid_index) == best
        assert res.cost == pytest.approx(cost, abs=1e-12)
        for group in ([0, 1, 2], [3, 4, 5], [6, 7, 8]):
            assert len({res.assignment[f"r{i}"] for i in group}) == 1

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 9))
    def test_k1_exhaustive(self, seed, n):
        x = np.random.default_rng(seed).normal(size=(n, 3))
        res = kmedoids(self.fm(x), k=1, seed=seed)
        z, _ = standardize(x)
        best, cost = exhaustive_medoids(z, 1)
        assert res.cost == pytest.approx(cost, abs=1e-12)
        assert res.cost <= res.build_cost

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_swap_never_worse_and_nearest(self, seed, k):
        x = np.random.default_rng(seed).normal(size=(12, 4))
        res = kmedoids(self.fm(x), k=k, seed=seed)
        assert res.cost <= res.build_cost + 1e-12
        z, _ = standardize(x)
        d = pairwise_distances(z)
        own = d[np.array(res.medoid_index)[res.labels], np.arange(12)]
        assert np.allclose(own, d[res.medoid_index].min(axis=0))

    def test_constant_column_dropped(self, caplog):
        x = np.c_[np.random.default_rng(1).normal(size=(6, 2)), np.ones(6)]
        res = kmedoids(self.fm(x), k=2)
        assert res.dropped_columns == ["c2"]
        assert "dropping constant" in caplog.text

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            kmedoids(self.fm(np.zeros((3, 2)) + np.arange(3)[:, None]), k=4)
        with pytest.raises(ValueError):
            kmedoids(self.fm(np.arange(6.0).reshape(3, 2)), k=0)

    def test_feature_matrix_validation(self):
        with pytest.raises(ValueError):
            FeatureMatrix(["a"], ["x", "y"], [[1.0, np.nan]])
        with pytest.raises(ValueError):
            FeatureMatrix(["a", "b"], ["x"], [[1.0]])


# ---------------------------------------------------------------- PSNR / SSIM


class TestPsnr:
    def test_identical(self):
        assert psnr(corpus.disc(), corpus.disc()) == math.inf

    def test_constant_offset(self):
        gt = np.full((8, 8), 0.2)
        assert psnr(gt, gt + 16 / 255) == pytest.approx(20 * math.log10(255 / 16), abs=1e-9)
        assert 20 * math.log10(255 / 16) == pytest.approx(24.05, abs=0.005)

    def test_inverted_checkerboard(self):
        c = corpus.checkerboard()
        assert psnr(c, 1 - c) == 0.0

    def test_monotone_in_mse(self):
        gt = np.full((4, 4), 0.5)
        values = [psnr(gt, gt + e) for e in (0.01, 0.02, 0.05, 0.1)]
        assert values == sorted(values, reverse=True)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))


class TestSsim:
    def test_identity(self):
        for f in list(corpus.synthetic_corpus().values())[:6]:
            assert ssim(f, f) == pytest.approx(1.0, abs=1e-12)

    def test_inverted_oracle(self):
        gt = corpus.textured_patch(1)[:30, :34]
        assert ssim(gt, 1 - gt) == pytest.approx(ssim_oracle(gt, 1 - gt), abs=1e-9)

    def test_random_oracle(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(size=(20, 25))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-9)

    @pytest.mark.parametrize("c1,c2", [(0.2, 0.7), (0.5, 0.5), (0.0, 1.0)])
    def test_constant_closed_form(self, c1, c2):
        k = 0.01**2
        expected = (2 * c1 * c2 + k) / (c1**2 + c2**2 + k)
        assert ssim(np.full((16, 16), c1), np.full((16, 16), c2)) == pytest.approx(expected, abs=1e-12)

    def test_too_small(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((10, 20)), np.zeros((10, 20)))


# ---------------------------------------------------------------- shifts


class TestGlobalShift:
    def test_identity(self):
        assert global_shift_psnr(corpus.blocks(0), corpus.blocks(0))[:2] == (0, 0)

    def test_translation(self):
        gt = corpus.textured_patch(3)
        dx, dy, value = global_shift_psnr(gt, translate(gt, 2, -1))
        assert (dx, dy) == (2, -1) and value == math.inf

    def test_constant_tie(self):
        assert global_shift_psnr(np.full((9, 9), 0.3), np.full((9, 9), 0.3))[:2] == (0, 0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(-5, 5), st.integers(-5, 5), st.integers(0, 5))
    def test_recovers_any_disk_shift(self, dx, dy, seed):
        if dx * dx + dy * dy > 25:
            return
        gt = corpus.textured_patch(seed)
        assert global_shift_psnr(gt, translate(gt, dx, dy))[:2] == (dx, dy)


class TestShiftDistribution:
    def test_identical(self):
        frames = [corpus.blocks(i) for i in range(4)]
        h = shift_distribution(frames, frames, 3)
        assert h.count(0, 0) == 4 and h.grid.sum() == 4 and h.grid.shape == (7, 7)

    def test_alternating(self):
        gt = [corpus.textured_patch(i) for i in range(4)]
        dist = [translate(g, *((1, 0) if i % 2 == 0 else (0, 1))) for i, g in enumerate(gt)]
        h = shift_distribution(gt, dist)
        assert h.count(1, 0) == 2 and h.count(0, 1) == 2 and h.grid.sum() == 4

    def test_single(self):
        assert shift_distribution([corpus.disc()], [corpus.disc()]).grid.sum() == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            shift_distribution([corpus.disc()], [])
