import csv
import json
import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import gammaln

from somno import baselines as bl
from somno import evaluation as ev
from somno import model as mdl
from somno.data import SynthSpec, synth_generate
from somno.errors import DataError


@pytest.fixture(scope="module")
def tiny():
    return synth_generate(SynthSpec(n_subjects=3, samples_per_class=10, seed=3))


FAST = mdl.TrainConfig(batch_size=10, epochs=2)


def t_density_tail(t, df):
    """Two-sided tail by integrating the Student-t density numerically."""
    logc = gammaln((df + 1) / 2) - gammaln(df / 2) - 0.5 * math.log(df * math.pi)
    dens = lambda u: math.exp(logc - (df + 1) / 2 * math.log1p(u * u / df))
    body, _ = integrate.quad(dens, 0, abs(t), epsabs=1e-13, epsrel=1e-13, limit=200)
    return 1.0 - 2.0 * body


def brute_t(a, b):
    d = [x - y for x, y in zip(a, b)]
    n = len(d)
    mean = sum(d) / n
    sd = math.sqrt(sum((x - mean) ** 2 for x in d) / (n - 1))
    return mean / (sd / math.sqrt(n)), n - 1


class TestSplits:
    def test_one_fold_per_subject_and_repeat(self):
        folds = ev.loso_split([3, 1, 2, 1], repeats=2, master_seed=5)
        assert [(f.repeat_index, f.test_subject) for f in folds] == [(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3)]
        for f in folds:
            assert f.test_subject not in f.train_subjects
            assert len(f.train_subjects) == 2

    def test_hundred_ten_folds(self):
        assert len(ev.loso_split(range(1, 12), repeats=10)) == 110

    def test_seeds_depend_on_fold_identity(self):
        a = {(f.repeat_index, f.test_subject): f.seed for f in ev.loso_split([1, 2, 3], 2, 9)}
        b = {(f.repeat_index, f.test_subject): f.seed for f in ev.loso_split([3, 2, 1, 4], 2, 9)}
        assert all(a[k] == b[k] for k in a)
        assert len(set(a.values())) == 6
        c = ev.loso_split([1, 2, 3], 1, 10)
        assert c[0].seed != a[(0, 1)]
        f = c[0]
        assert f.init_seed != f.shuffle_seed

    def test_too_few_subjects(self):
        with pytest.raises(DataError):
            ev.loso_split([1])

    def test_split_is_disjoint(self, tiny):
        for f in ev.loso_split(tiny):
            tr, te = ev._split(tiny, f)
            assert set(tiny.subjects[te]) == {f.test_subject}
            assert f.test_subject not in set(tiny.subjects[tr])
            assert len(tr) + len(te) == len(tiny)


class TestCnnExperiment:
    def test_shape_and_reproducibility(self, tiny):
        a = ev.run_cnn_experiment(tiny, mdl.ModelConfig(), FAST, repeats=2, master_seed=1)
        b = ev.run_cnn_experiment(tiny, mdl.ModelConfig(), FAST, repeats=2, master_seed=1)
        assert a.accuracy.shape == (3, 2, 2)
        np.testing.assert_array_equal(a.accuracy, b.accuracy)
        assert a.n_folds == 6 and a.variant == "Full"

    def test_parallel_matches_serial(self, tiny):
        a = ev.run_cnn_experiment(tiny, mdl.ModelConfig(), FAST, repeats=1, master_seed=2)
        b = ev.run_cnn_experiment(tiny, mdl.ModelConfig(), FAST, repeats=1, master_seed=2, jobs=2)
        np.testing.assert_array_equal(a.accuracy, b.accuracy)

    def test_run_fold_matches_manual_training(self, tiny):
        fold = ev.loso_split(tiny, 1, 4)[1]
        curve = ev.run_fold(tiny, fold, mdl.ModelConfig(), FAST)
        tr = tiny.subjects != fold.test_subject
        cfg = mdl.ModelConfig(rng_seed=fold.init_seed)
        res = mdl.train(tiny.values[tr], tiny.labels[tr], mdl.TrainConfig(10, 2, shuffle_seed=fold.shuffle_seed), cfg)
        pred, _ = mdl.predict_bundle(tiny.values[~tr], res.params, cfg)
        y = tiny.labels[~tr]
        confusion = np.zeros((2, 2), int)
        for p_, t_ in zip(pred, y):
            confusion[t_, p_] += 1
        assert curve[-1] == np.trace(confusion) / confusion.sum()

    def test_ablations_keyed_by_name(self, tiny):
        out = ev.run_ablations(tiny, ["Full", "NoActiv"], mdl.TrainConfig(batch_size=10, epochs=1), repeats=1)
        assert list(out) == ["Full", "NoActiv"]

    def test_report_statistics(self):
        acc = np.array([[[0.5, 1.0]], [[0.7, 0.9]], [[0.6, 1.0]]])
        r = ev.EvalReport("cnn", "Full", [1, 2, 3], acc)
        np.testing.assert_allclose(r.mean_per_epoch(), [0.6, 2.9 / 3])
        np.testing.assert_allclose(r.stderr_per_epoch()[0], np.std([0.5, 0.7, 0.6], ddof=1) / math.sqrt(3))
        assert r.peak_epoch() == 2
        np.testing.assert_array_equal(r.subject_means(1), [0.5, 0.7, 0.6])
        tie = ev.EvalReport("cnn", "Full", [1], np.array([[[0.8, 0.8]]]))
        assert tie.peak_epoch() == 1
        assert tie.stderr_per_epoch().tolist() == [0.0, 0.0]


class TestBaselineExperiment:
    def test_matches_manual_loso(self, tiny):
        rep = ev.run_baseline_experiment(tiny, "lda")
        F = bl.feature_matrix(tiny.values)
        for s, acc in zip(rep.subjects, rep.accuracy):
            m = tiny.subjects == s
            clf = bl.lda_fit(F[~m], tiny.labels[~m])
            assert acc == np.mean(clf.predict(F[m]) == tiny.labels[m])

    def test_unknown(self, tiny):
        with pytest.raises(ValueError):
            ev.run_baseline_experiment(tiny, "svm")


class TestTTest:
    def test_known_value(self):
        r = ev.paired_ttest([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
        assert r.t == pytest.approx(3.4641016, abs=1e-6) and r.df == 2

    def test_against_brute_force_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            n = int(rng.integers(3, 15))
            a = rng.normal(0.7, 0.05, n)
            b = a - rng.normal(rng.uniform(-0.05, 0.05), 0.03, n)
            r = ev.paired_ttest(a, b)
            t, df = brute_t(a, b)
            assert r.t == pytest.approx(t, rel=1e-10) and r.df == df
            assert abs(r.p - t_density_tail(t, df)) < 1e-6

    def test_matches_scipy_stats(self, rng):
        a, b = rng.normal(size=11), rng.normal(size=11)
        ref = stats.ttest_rel(a, b)
        r = ev.paired_ttest(a, b)
        assert r.t == pytest.approx(ref.statistic) and r.p == pytest.approx(ref.pvalue)

    def test_zero_variance(self):
        assert ev.paired_ttest([1, 1], [1, 1]).p == 1.0
        r = ev.paired_ttest([2, 2], [1, 1])
        assert r.t == math.inf and r.p == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ev.paired_ttest([1.0], [2.0])
        with pytest.raises(ValueError):
            ev.paired_ttest([1.0, 2.0], [2.0])


class TestReports:
    def test_csv_and_summary(self, tmp_path):
        acc = np.random.default_rng(0).uniform(0.5, 1, size=(3, 2, 4))
        cnn = ev.EvalReport("cnn", "Full", [1, 2, 3], acc)
        base = ev.BaselineReport("lda", [1, 2, 3], np.array([0.6, 0.7, 0.65]))
        ev.write_accuracy_csv([cnn, base], tmp_path / "a.csv")
        rows = list(csv.DictReader(open(tmp_path / "a.csv")))
        assert list(rows[0]) == ["method", "variant", "subject", "repeat", "epoch", "accuracy"]
        assert len(rows) == 3 * 2 * 4 + 3
        assert float(rows[5]["accuracy"]) == acc[0, 1, 1]
        summary = ev.build_summary([cnn], [base])
        (tt,) = summary["ttests"]
        assert tt["epoch"] == cnn.peak_epoch()
        assert tt["p"] == ev.paired_ttest(cnn.subject_means(tt["epoch"]), base.accuracy).p
        fixed = ev.build_summary([cnn], [base], compare_epoch=1)
        assert fixed["ttests"][0]["epoch"] == 1
        ev.write_summary_json(summary, tmp_path / "s.json")
        loaded = json.loads((tmp_path / "s.json").read_text())
        assert loaded["cnn"][0]["mean_accuracy"] == pytest.approx(cnn.mean_per_epoch().tolist())

    def test_non_finite_json(self, tmp_path):
        ev.write_summary_json({"t": math.inf}, tmp_path / "s.json")
        assert json.loads((tmp_path / "s.json").read_text()) == {"t": "inf"}


def test_keep_models_reproduces_final_epoch(tiny):
    rep = ev.run_cnn_experiment(tiny, mdl.ModelConfig(), FAST, repeats=1, master_seed=3, keep_models=True)
    assert set(rep.models) == {(1, 0), (2, 0), (3, 0)}
    for (s, r), (params, cfg) in rep.models.items():
        m = tiny.subjects == s
        pred, _ = mdl.predict_bundle(tiny.values[m], params, cfg)
        assert mdl.accuracy(pred, tiny.labels[m]) == rep.accuracy[rep.subjects.index(s), r, -1]
    assert ev.run_cnn_experiment(tiny, mdl.ModelConfig(), FAST, repeats=1).models == {}


def test_first_repeat_equals_single_repeat_run(tiny):
    two = ev.run_cnn_experiment(tiny, mdl.ModelConfig(), FAST, repeats=2, master_seed=8)
    one = ev.run_cnn_experiment(tiny, mdl.ModelConfig(), FAST, repeats=1, master_seed=8)
    np.testing.assert_array_equal(two.accuracy[:, :1], one.accuracy)
