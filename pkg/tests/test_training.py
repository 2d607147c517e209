import math
from collections import Counter, OrderedDict

import numpy as np
import pytest

from longtail.errors import ArgumentError, DataError, NumericError, ShapeError
from longtail.models import ModelConfig, build_model
from longtail.numeric import RngStream
from longtail.preprocess import ProcessedTweet
from longtail.training import (AdamState, adam_step, cross_entropy, cross_validate,
                               kfold_split, predict_labels, train)
from longtail.vocab import EmbeddingMatrix, EmbeddingTable


class TestCrossEntropy:
    def test_uniform_is_log_n(self):
        for n in (2, 3, 7):
            pred = np.full((1, n), 1.0 / n)
            target = np.zeros((1, n))
            target[0, 0] = 1.0
            assert cross_entropy(pred, target) == pytest.approx(math.log(n), abs=1e-12)

    def test_perfect_prediction_zero(self):
        pred = np.array([[0.0, 1.0]])
        target = np.array([[0.0, 1.0]])
        assert cross_entropy(pred, target) == pytest.approx(0.0, abs=1e-12)

    def test_closed_form(self):
        pred = np.array([[0.25, 0.75]])
        target = np.array([[0.0, 1.0]])
        assert cross_entropy(pred, target) == pytest.approx(-math.log(0.75), abs=1e-9)
        assert cross_entropy(pred, target) == pytest.approx(0.287682, abs=1e-6)

    def test_confident_wrong_is_finite(self):
        pred = np.array([[1.0, 0.0]])
        target = np.array([[0.0, 1.0]])
        loss = cross_entropy(pred, target)
        assert math.isfinite(loss)
        assert loss == pytest.approx(-math.log(1e-12))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            cross_entropy(np.ones((2, 3)) / 3, np.ones((2, 2)))


class TestAdam:
    def scalar_params(self, *values):
        return OrderedDict((f"p{i}", np.array([float(v)])) for i, v in enumerate(values))

    def test_first_step_magnitude(self):
        params = self.scalar_params(0.0)
        grads = {"p0": np.array([0.5])}
        state = AdamState.for_params(params)
        adam_step(params, grads, state)
        # first-step update is -alpha * g / (|g| + eps), magnitude ~ alpha
        assert params["p0"][0] == pytest.approx(-0.001 * 0.5 / (0.5 + 1e-8), abs=1e-15)

    def test_zero_gradient_no_motion(self):
        params = self.scalar_params(1.5)
        state = AdamState.for_params(params)
        for _ in range(25):
            adam_step(params, {"p0": np.zeros(1)}, state)
        assert params["p0"][0] == 1.5

    def test_first_step_scale_invariance(self):
        params = self.scalar_params(0.0, 0.0)
        grads = {"p0": np.array([1.0]), "p1": np.array([1000.0])}
        state = AdamState.for_params(params)
        adam_step(params, grads, state)
        assert abs(params["p0"][0] - params["p1"][0]) <= 1e-9

    def test_step_opposes_gradient_sign(self):
        params = self.scalar_params(0.0, 0.0)
        grads = {"p0": np.array([0.3]), "p1": np.array([-2.0])}
        state = AdamState.for_params(params)
        adam_step(params, grads, state)
        assert params["p0"][0] < 0
        assert params["p1"][0] > 0

    def test_timestep_increments(self):
        params = self.scalar_params(0.0)
        state = AdamState.for_params(params)
        for expected in (1, 2, 3):
            adam_step(params, {"p0": np.ones(1)}, state)
            assert state.t == expected

    def test_name_mismatch(self):
        params = self.scalar_params(0.0)
        state = AdamState.for_params(params)
        with pytest.raises(ArgumentError):
            adam_step(params, {"other": np.ones(1)}, state)


def tiny_model(seed=5, n_classes=2, seq_len=10, vocab_size=14):
    rng = np.random.default_rng(seed)
    matrix = rng.normal(0, 0.3, size=(vocab_size, 4))
    matrix[0] = 0.0
    emb = EmbeddingMatrix(matrix=matrix, dim=4)
    cfg = ModelConfig(kind="base_cnn", n_classes=n_classes, seq_len=seq_len,
                      emb_dim=4, filters=3, dropout=0.2, seed=seed)
    return build_model(cfg, emb), vocab_size


class TestTrain:
    def data(self, n, vocab_size, seq_len=10, seed=1):
        rng = np.random.default_rng(seed)
        inputs = rng.integers(1, vocab_size, size=(n, seq_len))
        targets = np.zeros((n, 2))
        targets[np.arange(n), rng.integers(0, 2, n)] = 1.0
        return inputs, targets

    def test_same_seed_identical_weights_and_losses(self):
        runs = []
        for _ in range(2):
            model, vocab_size = tiny_model()
            inputs, targets = self.data(30, vocab_size)
            record = train(model, inputs, targets, epochs=3, batch=8, seed=99)
            runs.append((record.epoch_losses, {k: v.copy() for k, v in model.params().items()}))
        assert runs[0][0] == runs[1][0]
        for name in runs[0][1]:
            assert np.array_equal(runs[0][1][name], runs[1][1][name])

    def test_batch_partition(self, monkeypatch):
        model, vocab_size = tiny_model()
        inputs, targets = self.data(250, vocab_size)
        sizes = []
        original = model.forward

        def spy(batch, mode="eval", rng=None):
            sizes.append(len(batch))
            return original(batch, mode=mode, rng=rng)

        monkeypatch.setattr(model, "forward", spy)
        train(model, inputs, targets, epochs=1, batch=100, seed=0)
        assert sizes == [100, 100, 50]

    def test_descent_on_separable_toy(self):
        # two classes keyed by disjoint token ranges
        model, vocab_size = tiny_model(seed=11)
        rng = np.random.default_rng(2)
        n = 60
        inputs = np.zeros((n, 10), dtype=np.int64)
        targets = np.zeros((n, 2))
        for i in range(n):
            cls = i % 2
            lo, hi = (1, 7) if cls == 0 else (7, 13)
            inputs[i] = rng.integers(lo, hi, size=10)
            targets[i, cls] = 1.0
        record = train(model, inputs, targets, epochs=10, batch=10, seed=3)
        assert record.epoch_losses[-1] < record.epoch_losses[0]

    def test_empty_fold_rejected(self):
        model, _ = tiny_model()
        with pytest.raises(ArgumentError):
            train(model, np.zeros((0, 10), dtype=np.int64), np.zeros((0, 2)), seed=0)

    def test_nan_loss_raises_numeric_error(self):
        model, vocab_size = tiny_model()
        inputs, targets = self.data(10, vocab_size)
        model.dense.weights[:] = np.inf
        with np.errstate(invalid="ignore"), pytest.raises(NumericError):
            train(model, inputs, targets, epochs=1, batch=10, seed=0)

    def test_record_contents(self):
        model, vocab_size = tiny_model()
        inputs, targets = self.data(20, vocab_size)
        record = train(model, inputs, targets, epochs=2, batch=10, seed=42)
        assert len(record.epoch_losses) == 2
        assert all(math.isfinite(x) for x in record.epoch_losses)
        assert record.seed == 42
        assert record.config["kind"] == "base_cnn"
        assert record.wall_seconds >= 0.0


class TestShuffling:
    def test_permutation_is_multiset_preserving(self):
        rng = RngStream(17)
        for n in (1, 5, 100):
            perm = rng.permutation(n)
            assert sorted(perm) == list(range(n))


class TestKFold:
    def labels(self, spec):
        out = []
        for label, count in spec.items():
            out.extend([label] * count)
        return out

    def test_balanced_example(self):
        labels = self.labels({"a": 50, "b": 50})
        split = kfold_split(labels, k=5, seed=0)
        for fold in split.folds:
            assert len(fold) == 20
            counts = Counter(labels[i] for i in fold)
            assert counts == {"a": 10, "b": 10}

    def test_disjoint_and_complete(self):
        labels = self.labels({"a": 23, "b": 11, "c": 9})
        split = kfold_split(labels, k=5, seed=3)
        combined = sorted(int(i) for fold in split.folds for i in fold)
        assert combined == list(range(len(labels)))

    def test_seven_members_round_robin(self):
        labels = self.labels({"a": 7, "b": 5})
        split = kfold_split(labels, k=5, seed=1)
        counts = sorted(sum(1 for i in fold if labels[i] == "a") for fold in split.folds)
        assert counts == [1, 1, 1, 2, 2]

    def test_small_class_rejected(self):
        labels = self.labels({"a": 10, "tiny": 3})
        with pytest.raises(DataError, match="tiny"):
            kfold_split(labels, k=5, seed=0)

    def test_unstratified_allows_small_classes(self):
        labels = self.labels({"a": 10, "tiny": 3})
        split = kfold_split(labels, k=5, seed=0, stratified=False)
        combined = sorted(int(i) for fold in split.folds for i in fold)
        assert combined == list(range(13))

    def test_deterministic(self):
        labels = self.labels({"a": 30, "b": 12})
        one = kfold_split(labels, k=4, seed=9)
        two = kfold_split(labels, k=4, seed=9)
        for f1, f2 in zip(one.folds, two.folds):
            assert np.array_equal(f1, f2)


def synth_tweets(n_per_class=15, seed=0):
    rng = np.random.default_rng(seed)
    tweets = []
    vocab = {"x": [f"x{i}" for i in range(6)], "y": [f"y{i}" for i in range(6)]}
    shared = [f"s{i}" for i in range(8)]
    for label in ("x", "y"):
        for i in range(n_per_class):
            tokens = list(rng.choice(shared, 4)) + list(rng.choice(vocab[label], 3))
            tweets.append(ProcessedTweet(f"{label}{i}", label, tuple(tokens)))
    return tweets


class TestCrossValidate:
    def table_for(self, tweets, dim=4, seed=1):
        rng = np.random.default_rng(seed)
        words = sorted({tok for t in tweets for tok in t.tokens})
        return EmbeddingTable(vectors={w: rng.uniform(-0.3, 0.3, dim) for w in words},
                              dim=dim)

    def config(self):
        return ModelConfig(kind="base_cnn", n_classes=2, seq_len=12, emb_dim=4,
                           filters=3, dropout=0.1, seed=2)

    def test_five_fold_reports_and_average(self):
        tweets = synth_tweets()
        result = cross_validate(self.config(), tweets, self.table_for(tweets),
                                non_hate_label="x", k=5, seed=4, epochs=2, batch=8)
        assert len(result.fold_reports) == 5
        mean_macro = sum(r.macro.f1 for r in result.fold_reports) / 5
        assert result.averaged.macro.f1 == pytest.approx(mean_macro, abs=1e-12)
        mean_micro = sum(r.micro.f1 for r in result.fold_reports) / 5
        assert result.averaged.micro.f1 == pytest.approx(mean_micro, abs=1e-12)

    def test_deterministic_given_seed(self):
        tweets = synth_tweets()
        table = self.table_for(tweets)
        a = cross_validate(self.config(), tweets, table, non_hate_label="x",
                           k=5, seed=4, epochs=2, batch=8)
        b = cross_validate(self.config(), tweets, table, non_hate_label="x",
                           k=5, seed=4, epochs=2, batch=8)
        assert a.averaged == b.averaged
        assert a.predictions == b.predictions

    def test_unknown_non_hate_label(self):
        tweets = synth_tweets()
        with pytest.raises(DataError):
            cross_validate(self.config(), tweets, self.table_for(tweets),
                           non_hate_label="zzz", k=5, seed=4, epochs=1, batch=8)

    def test_class_count_mismatch(self):
        tweets = synth_tweets()
        cfg = ModelConfig(kind="base_cnn", n_classes=3, seq_len=8, emb_dim=4,
                          filters=3, seed=2)
        with pytest.raises(ArgumentError):
            cross_validate(cfg, tweets, self.table_for(tweets), non_hate_label="x",
                           k=5, seed=4, epochs=1, batch=8)


def test_predict_labels_chunking_matches_full_batch():
    model, vocab_size = tiny_model()
    rng = np.random.default_rng(8)
    inputs = rng.integers(0, vocab_size, size=(23, 10))
    chunked = predict_labels(model, inputs, ["a", "b"], batch=7)
    whole = predict_labels(model, inputs, ["a", "b"], batch=1000)
    assert chunked == whole
