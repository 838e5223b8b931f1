import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scrauth.errors import ParameterError
from scrauth.evalharness import (
    attack_eval, confusion, cross_validate, gaussian_kde, pairwise_auc, roc, silverman_bandwidth,
)
from scrauth.evalharness.latency import measure_latency
from scrauth.evalharness.study import attack_row, fold_assignment
from scrauth.oneclass import enroll

scores = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=40)


def recount(g, i, t):
    ta = sum(1 for s in g if s >= t)
    fa = sum(1 for s in i if s >= t)
    return ta, len(i) - fa, fa, len(g) - ta


# -- confusion ----------------------------------------------------------------------

def test_confusion_trivial_cases():
    assert confusion([1, 1], [-1, -1]).bac == 1.0
    assert confusion([1, -1], [1, -1]).bac == 0.5


def test_confusion_empty_rejected():
    with pytest.raises(ParameterError):
        confusion([], [1.0])


@settings(max_examples=60, deadline=None)
@given(g=scores, i=scores, t=st.floats(-6, 6))
def test_confusion_matches_recount_and_identities(g, i, t):
    c = confusion(g, i, t)
    assert (c.ta, c.tr, c.fa, c.fr) == recount(g, i, t)
    assert c.tar == c.ta / (c.ta + c.fr) and c.frr == c.fr / (c.fr + c.ta)
    assert c.far == c.fa / (c.fa + c.tr) and c.trr == c.tr / (c.tr + c.fa)
    assert c.bac == (c.tar + c.trr) / 2
    assert c.tar + c.frr == pytest.approx(1) and c.far + c.trr == pytest.approx(1)


# -- ROC ------------------------------------------------------------------------------

def test_roc_perfect_separation():
    r = roc([2.0, 3.0], [-1.0, 0.0])
    assert r.auc == 1.0 and r.eer == 0.0


def test_roc_endpoints_and_monotone():
    rng = np.random.default_rng(0)
    r = roc(rng.normal(1, size=50), rng.normal(size=60))
    assert r.points[0] == (0.0, 0.0) and r.points[-1] == (1.0, 1.0)
    assert np.all(np.diff(r.far) >= 0) and np.all(np.diff(r.tar) >= 0)


def test_identical_distributions_auc_near_half():
    rng = np.random.default_rng(1)
    aucs = [roc(rng.normal(size=30), rng.normal(size=30)).auc for _ in range(1000)]
    assert abs(np.mean(aucs) - 0.5) < 0.05


@settings(max_examples=60, deadline=None)
@given(g=scores, i=scores)
def test_sweep_auc_equals_pairwise_auc(g, i):
    assert abs(roc(g, i).auc - pairwise_auc(g, i)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(pool=st.lists(st.floats(-10, 10), min_size=2, max_size=60, unique=True), cut=st.integers(1, 59))
def test_eer_crossing_within_one_step(pool, cut):
    # without ties each threshold step moves exactly one sample
    cut = min(cut, len(pool) - 1)
    g, i = pool[:cut], pool[cut:]
    r = roc(g, i)
    step = max(1 / len(g), 1 / len(i))
    c = confusion(g, i, r.eer_threshold)
    assert abs(c.far - c.frr) <= step + 1e-12
    assert 0 <= r.eer <= 1


def test_eer_symmetric_example():
    # (threshold, FAR, FRR): (3, 0.25, 0.5) then (2, 0.5, 0.25); lines cross at 0.375
    r = roc([1, 2, 3, 4], [0, 1, 2, 3])
    assert r.eer == pytest.approx(0.375)
    assert r.eer_threshold == pytest.approx(2.5)


# -- KDE ---------------------------------------------------------------------------------

def test_kde_integrates_to_one():
    rng = np.random.default_rng(2)
    for x in (rng.normal(size=200), rng.exponential(size=50), np.array([0.3])):
        assert gaussian_kde(x).integral() == pytest.approx(1.0, abs=1e-3)


def test_silverman_rule():
    x = np.random.default_rng(3).normal(size=400)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    assert silverman_bandwidth(x) == pytest.approx(0.9 * min(x.std(ddof=1), iqr / 1.34) * 400 ** -0.2)
    assert silverman_bandwidth(np.full(10, 2.0)) > 0


def test_kde_empty_rejected():
    with pytest.raises(ParameterError):
        gaussian_kde([])


# -- cross-validation ---------------------------------------------------------------------

def clustered(n_users=4, n_trials=30, d=6, spread=0.3, seed=0):
    rng = np.random.default_rng(seed)
    centres = rng.normal(scale=3, size=(n_users, d))
    return {f"u{u}": centres[u] + spread * rng.normal(size=(n_trials, d)) for u in range(n_users)}


def test_fold_assignment_balanced():
    f = fold_assignment(23, 5, np.random.default_rng(0))
    counts = np.bincount(f)
    assert counts.sum() == 23 and counts.max() - counts.min() <= 1


def test_cross_validate_separable_users():
    rep = cross_validate(clustered(), k=5)
    assert len(rep["per_user"]) == 4
    assert rep["summary"]["bac"]["mean"] > 0.9
    assert rep["summary"]["eer"]["mean"] < 0.1
    bacs = [r["bac"] for r in rep["per_user"]]
    assert rep["summary"]["bac"]["mean"] == pytest.approx(np.mean(bacs))
    assert rep["summary"]["bac"]["std"] == pytest.approx(np.std(bacs))


def test_cross_validate_deterministic_and_segmented():
    data = {u: x.reshape(15, 2, -1) for u, x in clustered().items()}
    a = cross_validate(data, 3, seed=4)
    b = cross_validate(data, 3, seed=4)
    assert a["per_user"] == b["per_user"]


def test_cross_validate_lof():
    rep = cross_validate(clustered(), k=5, classifier="lof")
    assert rep["summary"]["bac"]["mean"] > 0.8


def test_cross_validate_preconditions():
    with pytest.raises(ParameterError):
        cross_validate(clustered(), k=1)
    with pytest.raises(ParameterError):
        cross_validate(clustered(n_trials=3), k=5)


# -- attacks ----------------------------------------------------------------------------------

def test_attack_row_all_rejected():
    row = attack_row("zero_effort", [-0.5, -0.2, -0.1], 0.0)
    assert row["bypassed"] == 0 and row["far"] == 0.0 and row["mean_score"] < 0
    assert row["attempts"] == 3


def test_attack_eval_relative_scores():
    data = clustered()
    models = {u: enroll(x, user=u) for u, x in data.items()}
    far_away = np.full((10, 6), 50.0)
    rows = attack_eval(models, {"zero_effort": [(u, far_away) for u in models],
                                "mimicry": [("u0", data["u0"][:5])]})
    ze, mi = rows
    assert ze["attack"] == "zero_effort" and ze["attempts"] == 40 and ze["bypassed"] == 0
    assert mi["far"] > 0.5
    assert ze["kde"]["bandwidth"] > 0


# -- latency -------------------------------------------------------------------------------------

class FakePipeline:
    def tensors(self, rec):
        return np.sort(rec)

    def features(self, x):
        return x[:4]

    def classify(self, f):
        return float(f.sum())

    def authenticate(self, rec):
        return self.classify(self.features(self.tensors(rec)))


def test_latency_structure():
    rep = measure_latency(FakePipeline(), np.random.default_rng(0).normal(size=20000), runs=50)
    d = rep.to_dict()
    assert d["runs"] == 50
    for k in ("preprocess", "feature_extraction", "classification"):
        assert d[k] >= 0
    assert d["stage_sum"] == pytest.approx(rep.preprocess + rep.feature_extraction + rep.classification)


def test_latency_fake_clock_exact():
    ticks = iter(range(10_000))
    rep = measure_latency(FakePipeline(), np.zeros(10), runs=5, clock=lambda: next(ticks))
    assert (rep.preprocess, rep.feature_extraction, rep.classification, rep.end_to_end) == (1, 1, 1, 1)
    assert rep.stage_sum == pytest.approx(rep.end_to_end * 3)


def test_latency_needs_runs():
    with pytest.raises(ParameterError):
        measure_latency(FakePipeline(), np.zeros(3), runs=0)
