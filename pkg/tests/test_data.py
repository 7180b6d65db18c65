import numpy as np
import pytest

from session_table import BALANCED, SESSIONS, build_session, sessions_by_subject
from somno.baselines import band_power_features
from somno.data import container, labeling, synth
from somno.data import LabeledSet, Session, Trial, TrialLabel
from somno.errors import DataError, FormatError, LabelError


def make_set(rng, n=5):
    return LabeledSet(rng.normal(size=(n, 384)).astype(np.float32), rng.integers(1, 30, n), rng.integers(0, 2, n))


class TestLabeledSet:
    def test_indexing_and_counts(self, rng):
        d = LabeledSet(rng.normal(size=(4, 384)), [2, 1, 2, 2], [0, 1, 1, 0])
        assert len(d) == 4
        assert d[1].subject_id == 1 and d[1].label == 1
        assert d.subject_ids == [1, 2]
        assert d.class_counts() == {1: (0, 1), 2: (2, 1)}
        np.testing.assert_array_equal(d.subject_index()[2], [0, 2, 3])

    def test_from_samples_round_trip(self, rng):
        d = make_set(rng)
        again = LabeledSet.from_samples(d[i] for i in range(len(d)))
        np.testing.assert_array_equal(again.values, d.values)
        assert len(LabeledSet.from_samples([])) == 0

    def test_subset_keeps_events(self, rng):
        d = LabeledSet(rng.normal(size=(3, 384)), [1, 1, 2], [0, 1, 0], [("a", 0, 1), ("b", 1, 2), ("c", 2, 3)])
        assert d.subset([2, 0]).events == [("c", 2, 3), ("a", 0, 1)]

    def test_validation(self, rng):
        with pytest.raises(LabelError):
            LabeledSet(rng.normal(size=(1, 384)), [1], [2])
        with pytest.raises(ValueError):
            LabeledSet(rng.normal(size=(2, 384)), [1], [0, 1])


class TestEdd:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        d = make_set(rng, 20)
        path = tmp_path / "d.edd"
        container.save_edd(d, path)
        back = container.load_edd(path)
        np.testing.assert_array_equal(back.values, d.values)
        np.testing.assert_array_equal(back.subjects, d.subjects)
        np.testing.assert_array_equal(back.labels, d.labels)
        assert container.edd_bytes(back) == path.read_bytes()

    def test_layout_against_struct_oracle(self):
        import struct

        vals = np.arange(384, dtype=np.float32) / 7
        d = LabeledSet(vals[None, :], [513], [1])
        blob = container.edd_bytes(d)
        expect = struct.pack("<4sIII", b"EDD1", 1, 384, 128) + struct.pack("<HB", 513, 1) + struct.pack("<384f", *vals)
        assert blob == expect

    def test_empty_is_header_only(self):
        blob = container.edd_bytes(LabeledSet.empty())
        assert len(blob) == 16
        assert len(container.parse_edd(blob)) == 0

    def test_special_floats(self):
        vals = np.zeros(384, dtype=np.float32)
        vals[:4] = [np.nan, np.inf, -0.0, 1e-40]
        back = container.parse_edd(container.edd_bytes(LabeledSet(vals[None], [1], [0])))
        assert back.values.astype(np.float32).tobytes() == vals.tobytes()

    def test_errors_carry_offsets(self, rng):
        blob = container.edd_bytes(make_set(rng, 2))
        with pytest.raises(FormatError, match="magic") as e:
            container.parse_edd(b"XXXX" + blob[4:])
        assert e.value.offset == 0
        with pytest.raises(FormatError, match="shorter"):
            container.parse_edd(blob[:10])
        bad_len = blob[:8] + (383).to_bytes(4, "little") + blob[12:]
        with pytest.raises(FormatError, match="n_points") as e:
            container.parse_edd(bad_len)
        assert e.value.offset == 8
        with pytest.raises(FormatError, match="truncated") as e:
            container.parse_edd(blob[:-5])
        assert e.value.offset == 16 + 1539
        with pytest.raises(FormatError, match="trailing"):
            container.parse_edd(blob + b"\0")
        bad_label = bytearray(blob)
        bad_label[16 + 2] = 7
        with pytest.raises(FormatError, match="label") as e:
            container.parse_edd(bytes(bad_label))
        assert e.value.offset == 18

    def test_subject_range(self):
        with pytest.raises(ValueError):
            container.edd_bytes(LabeledSet(np.zeros((1, 384)), [70000], [0]))


class TestCsv:
    def test_round_trip_through_edd(self, rng, tmp_path):
        d = make_set(rng, 6)
        container.export_csv(d, tmp_path / "a.csv")
        back = container.import_csv(tmp_path / "a.csv")
        np.testing.assert_array_equal(back.values, d.values)
        container.save_edd(back, tmp_path / "a.edd")
        assert container.edd_bytes(container.load_edd(tmp_path / "a.edd")) == container.edd_bytes(d)

    def test_one_row_without_header(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("3,1," + ",".join(["0.5"] * 384) + "\n")
        d = container.import_csv(p)
        assert len(d) == 1 and d[0].subject_id == 3 and d[0].values[0] == 0.5

    def test_short_row_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        good = "1,0," + ",".join(["1"] * 384)
        p.write_text(good + "\n" + "1,0," + ",".join(["1"] * 383) + "\n")
        with pytest.raises(FormatError, match="line 2"):
            container.import_csv(p)

    def test_parse_error_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("subject_id,label\n1,0," + ",".join(["x"] * 384) + "\n")
        with pytest.raises(FormatError, match="line 2"):
            container.import_csv(p)

    def test_bad_label(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,3," + ",".join(["1"] * 384) + "\n")
        with pytest.raises(FormatError, match="label"):
            container.import_csv(p)


class TestReactionTimes:
    def test_alert_rt_constant(self):
        s = Session(1, [Trial(float(i), 0.8) for i in range(10)])
        assert labeling.compute_alert_rt(s) == 0.8

    def test_alert_rt_percentile_oracle(self):
        s = Session(1, [Trial(float(i), float(i)) for i in range(1, 101)])
        # sorted position 0.05 * 99 = 4.95 -> 5 + 0.95 * (6 - 5)
        assert labeling.compute_alert_rt(s) == pytest.approx(5.95)

    def test_alert_rt_single_and_empty(self):
        assert labeling.compute_alert_rt(Session(1, [Trial(0.0, 2.5)])) == 2.5
        with pytest.raises(DataError):
            labeling.compute_alert_rt(Session(1, []))

    def test_global_rt(self):
        s = Session(1, [Trial(0.0, 9.0), Trial(10.0, 1.0), Trial(50.0, 3.0)])
        assert labeling.compute_global_rt(s, 0.0) == 9.0
        assert labeling.compute_global_rt(s, 50.0) == pytest.approx((9 + 1 + 3) / 3)

    def test_global_rt_window_is_half_open(self):
        s = Session(1, [Trial(0.0, 9.0), Trial(90.0, 1.0), Trial(179.9, 3.0)])
        assert labeling.compute_global_rt(s, 90.0) == 1.0  # trial exactly 90 s earlier excluded
        assert labeling.compute_global_rt(s, 179.9) == 2.0

    def test_trials_sorted(self):
        s = Session(1, [Trial(5.0, 1.0), Trial(1.0, 2.0)])
        assert [t.onset for t in s.trials] == [1.0, 5.0]

    @pytest.mark.parametrize(
        "local,glob,expect",
        [(1.0, 1.0, TrialLabel.ALERT), (3.0, 3.0, TrialLabel.DROWSY), (2.0, 1.0, TrialLabel.EXCLUDED),
         (1.0, 3.0, TrialLabel.EXCLUDED), (1.5, 1.0, TrialLabel.EXCLUDED), (2.5, 3.0, TrialLabel.EXCLUDED)],
    )
    def test_label_trial(self, local, glob, expect):
        assert labeling.label_trial(local, glob, 1.0) == expect

    def test_label_trial_rejects_non_positive(self):
        with pytest.raises(ValueError):
            labeling.label_trial(0.0, 1.0, 1.0)


class TestBalance:
    def test_builder_yields_requested_counts(self):
        for a, d in [(94, 96), (0, 304), (363, 66), (1, 155)]:
            assert labeling.summarize_session(build_session(1, a, d)).counts == (a, d)

    def test_example_sessions(self):
        res = labeling.filter_and_balance({1: [build_session(1, 94, 96)]})
        assert res.counts == {1: (94, 94)}
        assert len(res.dataset) == 188
        res = labeling.filter_and_balance({1: [build_session(1, 1, 155)]})
        assert res.counts == {} and len(res.dataset) == 0

    def test_only_eligible_session_survives(self):
        sessions = [build_session(4, a, d, name=str(i)) for i, (a, d) in enumerate([(0, 304), (37, 38), (0, 641), (363, 66)])]
        res = labeling.filter_and_balance({4: sessions})
        assert res.selected[4].session.name == "3"
        assert res.counts[4] == (66, 66)

    def test_all_subjects_reproduce_balanced_counts(self):
        res = labeling.filter_and_balance(sessions_by_subject())
        assert res.counts == {s: (n, n) for s, (_, n) in BALANCED.items()}
        assert {s: r.session.name for s, r in res.selected.items()} == {s: f for s, (f, _) in BALANCED.items()}
        assert len(res.dataset) == 2022
        assert res.dataset.labels.sum() == 1011

    def test_trim_keeps_extreme_rts(self):
        rng = np.random.default_rng(0)
        trials = [Trial(100.0 * i, rt, rng.normal(size=384)) for i, rt in enumerate([1.0] * 60 + [3.0, 4.0, 5.0] * 20 + [6.0] * 5)]
        res = labeling.filter_and_balance({1: [Session(1, trials)]})
        kept = res.selected[1].drowsy
        rts = sorted(lt.trial.local_rt for lt in kept)
        assert len(kept) == 60
        # the five shortest drowsy trials (3.0 s) are the ones dropped
        assert rts.count(3.0) == 15 and rts.count(6.0) == 5
        onsets = [lt.trial.onset for lt in kept]
        assert onsets == sorted(onsets)

    def test_missing_eeg(self):
        s = build_session(1, 60, 60)
        for t in s.trials:
            t.eeg = None
        with pytest.raises(DataError):
            labeling.filter_and_balance({1: [s]})


class TestSynth:
    def test_deterministic(self):
        spec = synth.SynthSpec(n_subjects=2, samples_per_class=5, seed=4)
        a, b = synth.synth_generate(spec), synth.synth_generate(spec)
        assert container.edd_bytes(a) == container.edd_bytes(b) and a.events == b.events
        c = synth.synth_generate(synth.SynthSpec(n_subjects=2, samples_per_class=5, seed=5))
        assert not np.array_equal(a.values, c.values)

    def test_balanced_and_annotated(self):
        d = synth.synth_generate(synth.SynthSpec(n_subjects=3, samples_per_class=20))
        assert d.class_counts() == {1: (20, 20), 2: (20, 20), 3: (20, 20)}
        for (kind, start, end), lab in zip(d.events, d.labels):
            assert 0 <= start < end <= 384
            assert kind in (synth.DROWSY_EVENTS if lab == 1 else synth.ALERT_EVENTS)

    def test_event_confined_to_window(self):
        for kind in ("spindle", "theta", "emg", "drift"):
            wave, start, end = synth.inject_event(np.random.default_rng(1), kind)
            assert np.all(wave[:start] == 0) and np.all(wave[end:] == 0)
            assert np.any(wave[start:end] != 0)

    def test_spindle_raises_alpha(self):
        rng = np.random.default_rng(2)
        gains = []
        for _ in range(20):
            bg = synth.pink_noise(rng, 1.2)
            ev, _, _ = synth.inject_event(rng, "spindle")
            gains.append(band_power_features(bg + ev)["alpha"] - band_power_features(bg)["alpha"])
        assert min(gains) > 0

    def test_emg_raises_beta(self):
        rng = np.random.default_rng(3)
        bg = synth.pink_noise(rng, 1.2)
        ev, _, _ = synth.inject_event(rng, "emg")
        assert band_power_features(bg + ev)["beta"] > band_power_features(bg)["beta"]

    def test_pink_noise_unit_variance(self):
        assert synth.pink_noise(np.random.default_rng(0), 1.0).std() == pytest.approx(1.0)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            synth.SynthSpec(drowsy_events=("emg",))
        with pytest.raises(ValueError):
            synth.SynthSpec(alert_events=())
        with pytest.raises(ValueError):
            synth.inject_event(np.random.default_rng(0), "blink")

    def test_annotation_round_trip(self, tmp_path):
        d = synth.synth_generate(synth.SynthSpec(n_subjects=2, samples_per_class=3))
        synth.write_annotations(d, tmp_path / "ev.csv")
        assert synth.read_annotations(tmp_path / "ev.csv") == d.events
