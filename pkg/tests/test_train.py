import numpy as np
import pytest

from eegmi import optim, train
from eegmi.dataset import Epoch
from eegmi.errors import ConfigError, DataError, DivergenceError
from eegmi.nn import model as M


def adam(lr=0.01, **kw):
    return optim.OptimizerConfig(kind="adam", learning_rate=lr, **kw)


class TestSplits:
    def test_round_half_up_sizes(self):
        # 15% of 100 -> 15; 15% of 4905 -> 735.75 -> 736
        tr, val = train.split_train_val(list(range(100)), 0.15, seed=0)
        assert (len(tr), len(val)) == (85, 15)
        tr, val = train.split_train_val(list(range(4905)), 0.15, seed=0)
        assert (len(tr), len(val)) == (4169, 736)

    def test_split_is_a_partition(self):
        items = list(range(40))
        tr, val = train.split_train_val(items, 0.15, seed=3)
        assert sorted(tr + val) == items

    def test_deterministic_per_seed(self):
        a = train.split_train_val(list(range(30)), 0.2, seed=5)
        b = train.split_train_val(list(range(30)), 0.2, seed=5)
        c = train.split_train_val(list(range(30)), 0.2, seed=6)
        assert a == b
        assert a != c

    def test_both_sides_nonempty_at_extremes(self):
        tr, val = train.split_train_val([1, 2, 3], 0.01, seed=0)
        assert len(val) == 1 and len(tr) == 2
        tr, val = train.split_train_val([1, 2, 3], 0.99, seed=0)
        assert len(tr) >= 1 and len(val) >= 1

    def test_too_few_items(self):
        with pytest.raises(DataError):
            train.split_train_val([1], 0.5)


class TestSubjectHoldout:
    def _epochs(self, subjects, per_subject=3):
        eps = []
        for s in subjects:
            for k in range(per_subject):
                eps.append(Epoch(data=np.zeros((2, 4)), label="Left",
                                 subject_id=s, run_id=4, onset_sample=k))
        return eps

    def test_no_subject_on_both_sides(self):
        eps = self._epochs(range(1, 11))
        tr, te = train.split_subject_holdout(eps, 0.2, seed=0)
        assert {e.subject_id for e in tr} & {e.subject_id for e in te} == set()
        assert len(tr) + len(te) == len(eps)

    def test_catalogue_sized_split(self):
        eps = self._epochs(range(1, 110), per_subject=1)
        tr, te = train.split_subject_holdout(eps, 0.2, seed=0)
        assert len({e.subject_id for e in te}) == 22  # round(0.2 * 109)

    def test_deterministic(self):
        eps = self._epochs(range(1, 11))
        a = train.split_subject_holdout(eps, 0.2, seed=1)
        b = train.split_subject_holdout(eps, 0.2, seed=1)
        assert [e.subject_id for e in a[1]] == [e.subject_id for e in b[1]]

    def test_needs_two_subjects(self):
        with pytest.raises(ConfigError):
            train.split_subject_holdout(self._epochs([1]), 0.2)


class TestStandardize:
    def test_train_stats_only(self):
        rng = np.random.default_rng(0)
        tr = rng.standard_normal((50, 3)) * 4.0 + 10.0
        te = rng.standard_normal((20, 3))
        (ztr, zte), mean, std = train.standardize_features(tr, te)
        assert np.allclose(ztr.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(ztr.std(axis=0), 1.0, atol=1e-12)
        # the test set uses the train statistics, not its own
        assert np.allclose(zte, (te - tr.mean(axis=0)) / tr.std(axis=0))
        assert np.allclose(mean, tr.mean(axis=0))

    def test_constant_feature_survives(self):
        tr = np.ones((10, 2))
        (ztr,), _, std = train.standardize_features(tr)
        assert np.all(np.isfinite(ztr))
        assert np.all(std >= train.STD_FLOOR)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            train.standardize_features(np.empty((0, 3)))


class TestTargets:
    def test_plus_minus_one_coding(self):
        t = train.mse_targets(np.array([0, 1, 0]))
        assert np.array_equal(t, [[1, -1], [-1, 1], [1, -1]])


class TestEarlyStopper:
    def test_strict_improvement_required(self):
        s = train.EarlyStopper(patience=3)
        assert s.update(0, 1.0, {"p": 1})
        assert not s.update(1, 1.0, {"p": 2})   # tie is not an improvement
        assert s.update(2, 0.9, {"p": 3})
        assert s.best_epoch == 2

    def test_stops_after_patience(self):
        s = train.EarlyStopper(patience=15)
        s.update(0, 1.0, {})
        for epoch in range(1, 16):
            assert not s.should_stop
            s.update(epoch, 2.0, {})
        assert s.should_stop
        assert s.best_epoch == 0

    def test_counter_resets_on_improvement(self):
        s = train.EarlyStopper(patience=2)
        s.update(0, 1.0, {})
        s.update(1, 2.0, {})
        s.update(2, 0.5, {})
        assert not s.should_stop
        assert s.since_best == 0

    def test_best_params_is_a_snapshot(self):
        s = train.EarlyStopper(patience=2)
        live = [{"w": np.array([1.0])}]
        s.update(0, 1.0, live)
        live[0]["w"][0] = 99.0
        assert s.best_params[0]["w"][0] == 1.0


class TestTrainLoop:
    def _toy_data(self, n=60, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, 4))
        y = (x[:, 0] + 0.3 * x[:, 1] > 0).astype(np.int64)
        return x, y

    def _toy_spec(self):
        from eegmi.nn import layers as L
        return M.ModelSpec(
            layers=[L.Dense(4, 8), L.Activation("tanh"), L.Dense(8, 2)],
            input_shape=(4,))

    def test_learns_linear_problem(self):
        x, y = self._toy_data()
        spec = self._toy_spec()
        params = M.init_parameters(spec, 0)
        config = train.TrainConfig(optimizer=adam(0.05), max_epochs=60,
                                   batch_size=16, seed=0)
        best, history = train.train(spec, params, x, y, config)
        preds = train.predict(spec, best, x)
        assert (preds == y).mean() > 0.9
        assert history.best_epoch >= 0
        assert history.stop_reason in ("patience", "max_epochs")

    def test_history_lengths_consistent(self):
        x, y = self._toy_data(40)
        spec = self._toy_spec()
        config = train.TrainConfig(optimizer=adam(0.01), max_epochs=5,
                                   patience=50, batch_size=8, seed=1)
        _, history = train.train(spec, M.init_parameters(spec, 1), x, y,
                                 config)
        assert len(history.train_loss) == len(history.val_loss) == 5
        assert len(history.lr) == 5
        assert history.stop_reason == "max_epochs"

    def test_deterministic_given_seed(self):
        x, y = self._toy_data(40)
        spec = self._toy_spec()
        results = []
        for _ in range(2):
            config = train.TrainConfig(optimizer=adam(0.02), max_epochs=8,
                                       patience=50, batch_size=8, seed=7)
            best, hist = train.train(spec, M.init_parameters(spec, 7),
                                     x, y, config)
            results.append((best, hist))
        a, b = results
        assert a[1].train_loss == b[1].train_loss
        assert np.array_equal(a[0][0]["w"], b[0][0]["w"])

    def test_best_params_frozen_after_best_epoch(self):
        x, y = self._toy_data(40)
        spec = self._toy_spec()
        config = train.TrainConfig(optimizer=adam(0.05), max_epochs=30,
                                   patience=50, batch_size=8, seed=3)
        best, history = train.train(spec, M.init_parameters(spec, 3), x, y,
                                    config)
        assert history.best_val_loss == min(history.val_loss)
        assert history.val_loss[history.best_epoch] == history.best_val_loss

    def test_patience_stop_with_stuck_validation(self):
        # a huge learning rate makes validation bounce without improving
        x, y = self._toy_data(40)
        spec = self._toy_spec()
        config = train.TrainConfig(optimizer=optim.OptimizerConfig(
            kind="sgd", learning_rate=50.0), max_epochs=100, patience=5,
            batch_size=8, seed=2)
        try:
            _, history = train.train(spec, M.init_parameters(spec, 2), x, y,
                                     config)
        except DivergenceError:
            return  # equally acceptable at this rate
        if history.stop_reason == "patience":
            assert len(history.val_loss) < 100

    def test_divergence_reported_with_location(self):
        x, y = self._toy_data(20)
        spec = self._toy_spec()
        params = M.init_parameters(spec, 0)
        params[0]["w"] *= np.inf
        config = train.TrainConfig(optimizer=adam(0.01), max_epochs=3,
                                   batch_size=4, seed=0)
        with pytest.raises(DivergenceError) as exc:
            train.train(spec, params, x, y, config)
        assert exc.value.epoch == 0

    def test_standardization_stats_recorded(self):
        x, y = self._toy_data(40)
        x = x * 7.0 + 3.0
        spec = self._toy_spec()
        config = train.TrainConfig(optimizer=adam(0.01), max_epochs=2,
                                   patience=50, batch_size=8, seed=0,
                                   standardize_features=True)
        _, history = train.train(spec, M.init_parameters(spec, 0), x, y,
                                 config)
        assert history.feature_mean is not None
        assert history.feature_mean.shape == (4,)
        assert np.all(history.feature_std > 0)

    def test_mse_loss_path(self):
        x, y = self._toy_data(40)
        spec = M.mlp_spec(n_features=4, hidden=(6,))
        config = train.TrainConfig(optimizer=optim.OptimizerConfig(
            kind="sgd", learning_rate=0.01), max_epochs=10, patience=50,
            batch_size=1, loss="mse", seed=0)
        best, history = train.train(spec, M.init_parameters(spec, 0), x, y,
                                    config)
        assert history.train_loss[-1] < history.train_loss[0]

    def test_empty_dataset_rejected(self):
        spec = self._toy_spec()
        config = train.TrainConfig(optimizer=adam(), max_epochs=1)
        with pytest.raises(DataError):
            train.train(spec, M.init_parameters(spec, 0),
                        np.empty((0, 4)), np.empty(0), config)


class TestEvaluate:
    def test_confusion_counts(self):
        spec = M.mlp_spec(n_features=3, hidden=(4,))
        params = M.init_parameters(spec, 0)
        x = np.random.default_rng(0).standard_normal((10, 3))
        labels = np.array([0, 1] * 5)
        cm = train.evaluate(spec, params, x, labels)
        assert cm.total == 10

    def test_empty_test_set_rejected(self):
        spec = M.mlp_spec(n_features=3, hidden=(4,))
        with pytest.raises(DataError):
            train.evaluate(spec, M.init_parameters(spec, 0),
                           np.empty((0, 3)), np.empty(0))


class TestHistoryCsv:
    def test_csv_round_trip(self, tmp_path):
        h = train.TrainHistory(train_loss=[0.5, 0.25], val_loss=[0.6, 0.3],
                               lr=[0.01, 0.01], best_epoch=1)
        path = tmp_path / "history.csv"
        train.history_to_csv(h, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,lr"
        assert lines[1].split(",") == ["0", "0.5", "0.6", "0.01"]
        assert len(lines) == 3
