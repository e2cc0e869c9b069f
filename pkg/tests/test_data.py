import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsign.data import (
    HALF_HOUR,
    LoadSeries,
    Scaler,
    SupervisedSet,
    SynthConfig,
    fit_pooled_scaler,
    load_csv,
    make_windows,
    partition_clients,
    split_train_test,
    synth_generate,
)
from fedsign.errors import (
    DegenerateSplit,
    EmptyResult,
    MalformedRow,
    NonMonotonicTimestamps,
    SeriesTooShort,
    TooFewSamples,
    ZeroVariance,
)

IDENTITY = Scaler(0.0, 1.0)


def make_series(values, customer="c0"):
    start = np.datetime64("2012-07-01T00:00", "m")
    ts = start + np.arange(len(values)) * HALF_HOUR
    return LoadSeries(customer, ts, np.asarray(values, dtype=float))


def write_csv(tmp_path, rows, header="customer_id,category,timestamp,kwh"):
    path = tmp_path / "load.csv"
    path.write_text("\n".join([header] + rows) + "\n")
    return str(path)


class TestLoadCsv:
    def test_category_filter_drops_other_customers(self, tmp_path):
        rows = [
            "a,GC,2012-07-01 00:00,1.0",
            "a,GC,2012-07-01 00:30,1.1",
            "b,CL,2012-07-01 00:00,2.0",
        ]
        series = load_csv(write_csv(tmp_path, rows), "GC")
        assert len(series) == 1
        assert series[0].customer_id == "a"

    def test_many_customers(self, tmp_path):
        rows = [
            f"cust{i:03d},GC,2012-07-01 00:{m:02d},1.0"
            for i in range(300)
            for m in (0, 30)
        ]
        series = load_csv(write_csv(tmp_path, rows), "GC")
        assert len(series) == 300

    def test_duplicate_timestamp_rejected(self, tmp_path):
        rows = [
            "a,GC,2012-07-01 00:00,1.0",
            "a,GC,2012-07-01 00:30,1.1",
            "a,GC,2012-07-01 00:30,1.2",
            "a,GC,2012-07-01 01:00,1.3",
        ]
        with pytest.raises(NonMonotonicTimestamps):
            load_csv(write_csv(tmp_path, rows), "GC")

    def test_unsorted_rows_are_sorted(self, tmp_path):
        rows = [
            "a,GC,2012-07-01 00:30,1.1",
            "a,GC,2012-07-01 00:00,1.0",
        ]
        (series,) = load_csv(write_csv(tmp_path, rows), "GC")
        assert list(series.values) == [1.0, 1.1]

    def test_no_match_raises(self, tmp_path):
        rows = ["a,CL,2012-07-01 00:00,1.0"]
        with pytest.raises(EmptyResult):
            load_csv(write_csv(tmp_path, rows), "GC")

    @pytest.mark.parametrize("bad", ["a,GC,notadate,1.0", "a,GC,2012-07-01 00:00,xyz", "a,GC,1.0"])
    def test_malformed_rows(self, tmp_path, bad):
        with pytest.raises(MalformedRow) as exc:
            load_csv(write_csv(tmp_path, ["a,GC,2012-07-01 00:00,1.0", bad]), "GC")
        assert exc.value.line_no == 3


class TestSynthGenerate:
    def test_constant_signal(self):
        cfg = SynthConfig(n_customers=2, days=1, base_kw=1.0, daily_amp=0.0,
                          weekly_amp=0.0, noise_std=0.0, seed=1)
        for s in synth_generate(cfg):
            assert np.all(s.values == 1.0)

    def test_point_count(self):
        cfg = SynthConfig(n_customers=3, days=2, seed=1)
        for s in synth_generate(cfg):
            assert len(s) == 96

    def test_seeded_determinism(self):
        cfg = SynthConfig(n_customers=2, days=3, seed=42)
        a, b = synth_generate(cfg), synth_generate(cfg)
        for sa, sb in zip(a, b):
            assert sa.values.tobytes() == sb.values.tobytes()

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            SynthConfig(n_customers=1, days=0)
        with pytest.raises(ValueError):
            SynthConfig(n_customers=1, days=1, noise_std=-1.0)


class TestMakeWindows:
    def test_hand_enumerated_windows(self):
        s = make_series([1, 2, 3, 4])
        sup = make_windows(s, 2, IDENTITY)
        assert sup.inputs.tolist() == [[1, 2], [2, 3]]
        assert sup.targets.tolist() == [3, 4]

    def test_boundary_single_sample(self):
        s = make_series([1, 2, 3])
        sup = make_windows(s, 2, IDENTITY)
        assert len(sup) == 1

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            make_windows(make_series([1, 2]), 2, IDENTITY)

    def test_constant_series_zero_variance(self):
        with pytest.raises(ZeroVariance):
            make_windows(make_series([5.0] * 10), 2)

    @given(
        values=st.lists(st.floats(0.1, 100.0), min_size=4, max_size=30),
        window=st.integers(1, 3),
    )
    @settings(max_examples=50, deadline=None)
    def test_matches_brute_force_enumeration(self, values, window):
        s = make_series(values)
        try:
            sup = make_windows(s, window, IDENTITY)
        except SeriesTooShort:
            assert len(values) <= window
            return
        expected = [
            (values[i : i + window], values[i + window])
            for i in range(len(values) - window)
        ]
        assert len(sup) == len(expected)
        for (inp, tgt), got_in, got_t in zip(expected, sup.inputs, sup.targets):
            assert np.allclose(got_in, inp)
            assert got_t == tgt

    def test_normalization_round_trip(self):
        s = make_series(np.linspace(0.5, 3.0, 20))
        sup = make_windows(s, 4)
        back = sup.scaler.denormalize(sup.scaler.normalize(s.values))
        assert np.allclose(back, s.values, rtol=1e-9)


class TestSplit:
    def sup(self, n):
        return SupervisedSet(np.arange(2 * n, dtype=float).reshape(n, 2),
                             np.arange(n, dtype=float), IDENTITY)

    def test_70_30(self):
        tr, te = split_train_test(self.sup(10), 0.7)
        assert len(tr) == 7 and len(te) == 3

    def test_degenerate(self):
        with pytest.raises(DegenerateSplit):
            split_train_test(self.sup(2), 0.7)

    def test_chronological_order(self):
        tr, _ = split_train_test(self.sup(100), 0.7)
        assert tr.targets.tolist() == list(range(70))


class TestPartition:
    def sets(self, counts, scaler=IDENTITY, offset=0):
        out = []
        for i, n in enumerate(counts):
            tgt = offset + np.arange(n, dtype=float) + 1000.0 * i
            out.append(SupervisedSet(np.stack([tgt, tgt], axis=1), tgt, scaler))
        return out

    def test_equal_shares(self):
        shards = partition_clients(self.sets([50, 50]), self.sets([10, 10], offset=0.5), 10, 3)
        assert all(len(s.train) == 10 for s in shards)

    def test_round_robin_remainder(self):
        shards = partition_clients(self.sets([7]), self.sets([3], offset=0.5), 3, 3)
        assert sorted(len(s.train) for s in shards) == [2, 2, 3]

    def test_seeded_determinism(self):
        a = partition_clients(self.sets([20]), self.sets([5], offset=0.5), 4, 9)
        b = partition_clients(self.sets([20]), self.sets([5], offset=0.5), 4, 9)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.train.targets, sb.train.targets)
            assert np.array_equal(sa.test.targets, sb.test.targets)

    def test_partition_is_a_bijection(self):
        train_sets = self.sets([13, 8])
        shards = partition_clients(train_sets, self.sets([4, 4], offset=0.5), 5, 11)
        pooled = sorted(np.concatenate([s.targets for s in train_sets]).tolist())
        dealt = sorted(np.concatenate([s.train.targets for s in shards]).tolist())
        assert pooled == dealt

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            partition_clients(self.sets([2]), self.sets([2], offset=0.5), 3, 0)

    def test_mixed_scalers_rejected(self):
        with pytest.raises(ValueError):
            partition_clients(self.sets([5]), self.sets([5], scaler=Scaler(1.0, 2.0)), 2, 0)


def test_pooled_scaler_uses_train_side_only():
    a = make_series([1, 2, 3, 4, 5, 6, 7, 100, 100, 100])
    scaler = fit_pooled_scaler([a], 0.7)
    # the trailing spike sits in the test portion and must not leak in
    assert scaler.mean == 4.0
