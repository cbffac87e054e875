import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from phdkit.data import Dataset
from phdkit.discrepancy import (
    ExplicitClass,
    StumpClass,
    dh_adv,
    dh_exact,
    disc_exact,
    l1_hist,
    phd,
    sdisc_adv,
    sdisc_exact,
    stump_erm,
    w1_exact,
)
from phdkit.errors import CapacityError, ContractError, DegenerateInputError
from phdkit.models import (
    TrainConfig,
    constant_hypothesis,
    linear_arch,
    predict,
    stump_hypothesis,
)
from phdkit.numkit import rng_from


def d1(*vals):
    return Dataset(np.asarray(vals, float).reshape(-1, 1))


def random_instance(rng, n=16, d=2, spread=2.0):
    S = Dataset(spread * rng.standard_normal((n, d)))
    T = Dataset(spread * rng.standard_normal((n, d)) + 0.3 * rng.standard_normal(d))
    return S, T


# --- paired hypotheses discrepancy -------------------------------------------


def test_phd_identical_hypotheses_zero():
    T = d1(0.0, 1.0, 2.0)
    h = stump_hypothesis(0, 0.5, 1, 1)
    assert phd(h, h, T).value == 0.0


def test_phd_opposite_constants_one():
    T = d1(0.0, 1.0, 2.0)
    assert phd(constant_hypothesis(1, 1), constant_hypothesis(1, 0), T).value == 1.0


def test_phd_half_disagreement():
    T = d1(1.0, 2.0, 3.0, 4.0)
    h1 = stump_hypothesis(0, 2.5, -1, 1)  # 1,1,0,0
    h2 = stump_hypothesis(0, 1.5, -1, 1)  # 1,0,0,0 -> differs on x=2 only
    assert phd(h1, h2, T).value == 0.25
    h3 = stump_hypothesis(0, 3.5, 1, 1)   # 0,0,0,1
    assert phd(h1, h3, T).value == 0.75


def test_phd_symmetric_and_triangle():
    rng = rng_from(0)
    T = Dataset(rng.standard_normal((40, 2)))
    hs = [stump_hypothesis(int(rng.integers(0, 2)), float(rng.normal()), int(rng.choice([-1, 1])), 2)
          for _ in range(6)]
    for a in hs:
        for b in hs:
            assert phd(a, b, T).value == phd(b, a, T).value
            for c in hs:
                assert phd(a, c, T).value <= phd(a, b, T).value + phd(b, c, T).value + 1e-12


def test_phd_excludes_consumed_rows():
    T = d1(1.0, 2.0, 3.0, 4.0).with_consumed([True, True, False, False])
    h1 = stump_hypothesis(0, 2.5, -1, 1)
    h2 = constant_hypothesis(1, 1)
    rep = phd(h1, h2, T)
    assert rep.n_target == 2
    assert rep.value == 1.0  # rows 3,4 predicted 0 by h1
    with pytest.raises(DegenerateInputError):
        phd(h1, h2, T, exclude=[2, 3])


# --- exact suprema ------------------------------------------------------------


def brute_sup_vs_reference(S, T, cls, ref_fn):
    best = 0.0
    for h in cls.hypotheses():
        rs = float(np.mean(predict(h, S.X) != ref_fn(S)))
        rt = float(np.mean(predict(h, T.X) != ref_fn(T)))
        best = max(best, abs(rt - rs))
    return best


def test_same_sample_all_measures_zero():
    S = d1(0.0, 1.0, 2.0, 5.0)
    cls = StumpClass.from_data(S, S)
    hS = stump_erm(cls, Dataset(S.X, np.array([0, 0, 1, 1]), 2))
    assert dh_exact(S, S, cls).value == 0.0
    assert sdisc_exact(S, S, hS, cls).value == 0.0
    assert disc_exact(S, S, cls).value == 0.0


def test_separated_1d_dh_is_one():
    S, T = d1(0.0, 1.0), d1(10.0, 11.0)
    cls = StumpClass.from_data(S, T)
    assert dh_exact(S, T, cls).value == 1.0
    assert disc_exact(S, T, cls).value == 1.0


def test_dh_exact_matches_brute_force():
    rng = rng_from(1)
    for _ in range(10):
        S, T = random_instance(rng, n=14, d=2)
        cls = StumpClass.from_data(S, T)
        assert dh_exact(S, T, cls).value == pytest.approx(
            brute_sup_vs_reference(S, T, cls, lambda D: np.ones(D.n, dtype=int)), abs=1e-12)


def test_sdisc_exact_matches_brute_force():
    rng = rng_from(2)
    for _ in range(10):
        S, T = random_instance(rng, n=12, d=2)
        hS = stump_hypothesis(0, float(rng.normal()), 1, 2)
        cls = StumpClass.from_data(S, T)
        assert sdisc_exact(S, T, hS, cls).value == pytest.approx(
            brute_sup_vs_reference(S, T, cls, lambda D: predict(hS, D.X)), abs=1e-12)


def brute_disc(S, T, cls):
    hs = cls.hypotheses()
    best = 0.0
    for h in hs:
        ps, pt = predict(h, S.X), predict(h, T.X)
        for g in hs:
            qs, qt = predict(g, S.X), predict(g, T.X)
            best = max(best, abs(float(np.mean(pt != qt)) - float(np.mean(ps != qs))))
    return best


def test_disc_exact_matches_double_loop_oracle():
    rng = rng_from(3)
    for _ in range(4):
        S, T = random_instance(rng, n=8, d=2)
        cls = StumpClass.from_data(S, T)
        assert disc_exact(S, T, cls).value == pytest.approx(brute_disc(S, T, cls), abs=1e-6)


def test_disc_exact_1d_closed_form_matches_oracle():
    rng = rng_from(4)
    for _ in range(6):
        S, T = random_instance(rng, n=10, d=1)
        cls = StumpClass.from_data(S, T)
        assert disc_exact(S, T, cls).value == pytest.approx(brute_disc(S, T, cls), abs=1e-12)


def test_supremum_orderings_hold_on_random_instances():
    rng = rng_from(5)
    for _ in range(100):
        S, T = random_instance(rng, n=10, d=2)
        cls = StumpClass.from_data(S, T)
        y = (rng.random(10) > 0.5).astype(int)
        hS = stump_erm(cls, Dataset(S.X, y, 2))
        dh = dh_exact(S, T, cls).value
        sd = sdisc_exact(S, T, hS, cls).value
        dc = disc_exact(S, T, cls).value
        assert dc + 1e-9 >= sd >= 0.0
        assert dc + 1e-9 >= dh


def test_stump_erm_matches_enumeration():
    rng = rng_from(6)
    for _ in range(8):
        X = rng.standard_normal((15, 2))
        y = (rng.random(15) > 0.4).astype(int)
        D = Dataset(X, y, 2)
        cls = StumpClass.from_data(D)
        h = stump_erm(cls, D)
        best = min(float(np.mean(predict(g, X) != y)) for g in cls.hypotheses())
        assert float(np.mean(predict(h, X) != y)) == pytest.approx(best, abs=1e-12)


def test_prediction_matrix_consistent_with_hypotheses():
    rng = rng_from(7)
    S = Dataset(rng.standard_normal((9, 2)))
    cls = StumpClass.from_data(S)
    P = cls.prediction_matrix(S.X)
    for row, h in zip(P, cls.hypotheses()):
        signed = np.where(predict(h, S.X) == 1, 1, -1)
        assert np.array_equal(row, signed)


# --- adversarial estimators ---------------------------------------------------


def _adv_cfg(seed=0):
    return TrainConfig(epochs=60, batch_size=32, lr=1e-2, seed=seed)


def test_adv_identical_sample_is_tiny():
    S = Dataset(rng_from(8).standard_normal((60, 1)))
    rep = dh_adv(S, S, linear_arch(1), _adv_cfg())
    assert rep.value <= 0.05


def test_adv_matches_exact_on_separable_instance():
    S, T = d1(*rng_from(9).normal(0, 1, 30)), d1(*rng_from(10).normal(10, 1, 30))
    cls = StumpClass.from_data(S, T)
    exact = dh_exact(S, T, cls).value
    est = dh_adv(S, T, linear_arch(1), _adv_cfg()).value
    assert exact == 1.0
    assert abs(est - exact) <= 0.05


def test_adv_statistic_never_exceeds_exact_supremum_same_split():
    rng = rng_from(11)
    for seed in range(6):
        S = Dataset(rng.standard_normal((40, 1)))
        T = Dataset(rng.standard_normal((40, 1)) + rng.normal(0, 1.5))
        cls = StumpClass.from_data(S, T)
        est = dh_adv(S, T, linear_arch(1), _adv_cfg(seed)).value
        assert est <= dh_exact(S, T, cls).value + 1e-12


def test_sdisc_adv_identical_sample_small_and_separable_close_to_exact():
    rng = rng_from(12)
    S = Dataset(rng.standard_normal((60, 1)))
    hS = stump_hypothesis(0, 0.0, 1, 1)
    assert sdisc_adv(S, S, hS, linear_arch(1), _adv_cfg()).value <= 0.05
    A, B = d1(*rng.normal(0, 1, 30)), d1(*rng.normal(8, 1, 30))
    cls = StumpClass.from_data(A, B)
    exact = sdisc_exact(A, B, hS, cls).value
    est = sdisc_adv(A, B, hS, linear_arch(1), _adv_cfg()).value
    assert abs(est - exact) <= 0.05


# --- transport and histogram distances ---------------------------------------


def test_w1_identical_zero():
    S = d1(0.0, 1.0, 2.0)
    assert w1_exact(S, S).value == 0.0


def test_w1_single_mass():
    assert w1_exact(d1(0.0), d1(3.0)).value == 3.0


def test_w1_sorted_matching_oracle():
    assert w1_exact(d1(0.0, 2.0), d1(1.0, 3.0)).value == pytest.approx(1.0, abs=1e-15)


def test_w1_1d_equals_mean_sorted_difference():
    rng = rng_from(13)
    a, b = rng.normal(0, 1, 33), rng.normal(0.5, 2, 33)
    expect = float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    assert w1_exact(d1(*a), d1(*b)).value == pytest.approx(expect, abs=1e-12)


def test_w1_assignment_matches_brute_matching():
    rng = rng_from(14)
    A = Dataset(rng.standard_normal((7, 3)))
    B = Dataset(rng.standard_normal((7, 3)))
    cost = cdist(A.X, B.X)
    r, c = linear_sum_assignment(cost)
    assert w1_exact(A, B).value == pytest.approx(cost[r, c].sum() / 7, abs=1e-12)


def test_w1_metric_axioms_on_random_triples():
    rng = rng_from(15)
    for _ in range(100):
        A = Dataset(rng.standard_normal((12, 3)))
        B = Dataset(rng.standard_normal((12, 3)))
        C = Dataset(rng.standard_normal((12, 3)))
        ab = w1_exact(A, B).value
        ba = w1_exact(B, A).value
        assert abs(ab - ba) <= 1e-9
        assert w1_exact(A, A).value <= 1e-9
        assert ab <= w1_exact(A, C).value + w1_exact(C, B).value + 1e-9


def test_w1_capacity_error():
    rng = rng_from(16)
    A = Dataset(rng.standard_normal((600, 2)))
    with pytest.raises(CapacityError):
        w1_exact(A, A, cap=512)


def test_w1_dim_mismatch():
    with pytest.raises(ContractError):
        w1_exact(d1(0.0), Dataset(np.zeros((1, 2))))


def brute_l1_hist(S, T, bins):
    pooled = np.vstack([S.X, T.X])
    edges = []
    for j in range(S.d):
        lo, hi = pooled[:, j].min(), pooled[:, j].max()
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges.append(np.linspace(lo, hi, bins + 1))

    def cell_of(x):
        idx = []
        for j, e in enumerate(edges):
            c = int(np.searchsorted(e, x[j], side="right")) - 1
            idx.append(min(max(c, 0), bins - 1))
        return tuple(idx)

    from collections import Counter

    ps, pt = Counter(map(cell_of, S.X)), Counter(map(cell_of, T.X))
    cells = set(ps) | set(pt)
    return sum(abs(ps[c] / S.n - pt[c] / T.n) for c in cells)


def test_l1_hist_identical_and_disjoint():
    S = d1(0.0, 1.0, 2.0)
    assert l1_hist(S, S, bins=4) == 0.0
    assert l1_hist(d1(0.0, 0.5), d1(10.0, 10.5), bins=4) == 2.0


def test_l1_hist_matches_frequency_oracle():
    rng = rng_from(17)
    S = Dataset(rng.standard_normal((40, 2)))
    T = Dataset(rng.standard_normal((40, 2)) + 0.5)
    assert l1_hist(S, T, bins=5) == pytest.approx(brute_l1_hist(S, T, 5), abs=1e-12)


def test_chain_pointwise_gap_below_disc():
    # any pair's cross-domain risk gap is below the worst-pair supremum
    rng = rng_from(18)
    S, T = random_instance(rng, n=12, d=2)
    cls = StumpClass.from_data(S, T)
    dc = disc_exact(S, T, cls).value
    hyps = cls.hypotheses()
    for i in range(0, len(hyps), 7):
        for j in range(0, len(hyps), 7):
            h, g = hyps[i], hyps[j]
            gap = abs(
                float(np.mean(predict(h, T.X) != predict(g, T.X)))
                - float(np.mean(predict(h, S.X) != predict(g, S.X)))
            )
            assert gap <= dc + 1e-12


def test_chain_disc_below_l1_on_discrete_support():
    # with bins fine enough to isolate every support point, the binned L1
    # equals the exact frequency L1 and dominates the worst-pair supremum
    rng = rng_from(19)
    for _ in range(10):
        S = Dataset(rng.integers(0, 5, size=(20, 1)).astype(float))
        T = Dataset(rng.integers(0, 5, size=(20, 1)).astype(float))
        cls = StumpClass.from_data(S, T)
        dc = disc_exact(S, T, cls).value
        l1 = l1_hist(S, T, bins=50)
        assert dc <= l1 + 1e-12


def test_explicit_class_matrix():
    S = d1(0.0, 1.0, 2.0)
    ec = ExplicitClass(hypotheses=[constant_hypothesis(1, 1), constant_hypothesis(1, 0)])
    P = ec.prediction_matrix(S.X)
    assert np.array_equal(P, [[1, 1, 1], [-1, -1, -1]])
