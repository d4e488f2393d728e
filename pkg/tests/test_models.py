import numpy as np
import pytest

from fusedetect.corpus import BinaryLabel
from fusedetect.errors import (
    ConfigError,
    DimensionMismatch,
    DuplicateName,
    InsufficientData,
    NonFiniteLoss,
    NotRegistered,
)
from fusedetect.features import Modality, assemble_fusion
from fusedetect.models import (
    ExperimentSpec,
    HyperParams,
    LinearFusionClassifier,
    MLPFusionClassifier,
    TrainedModel,
    load_model,
    modality_column_mask,
    predict,
    register_backend,
    registered_backends,
    resolve_backend,
    save_model,
    train,
)

TRI = frozenset({Modality.TEXT, Modality.IMAGE, Modality.SOCIAL})
TEXT_ONLY = frozenset({Modality.TEXT})


def perceptron_converges(X, y_signs, max_epochs=500):
    """Independent linear-separability oracle: classic perceptron convergence."""
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    w = np.zeros(Xb.shape[1])
    for _ in range(max_epochs):
        errors = 0
        for xi, yi in zip(Xb, y_signs):
            if yi * (w @ xi) <= 0:
                w += yi * xi
                errors += 1
        if errors == 0:
            return True
    return False


def separable_set(n_per_class=20, dim=6, seed=0):
    """Two Gaussian blobs with a wide margin along the first axis."""
    rng = np.random.default_rng(seed)
    pos = rng.normal(0, 0.5, size=(n_per_class, dim)) + np.r_[4.0, np.zeros(dim - 1)]
    neg = rng.normal(0, 0.5, size=(n_per_class, dim)) - np.r_[4.0, np.zeros(dim - 1)]
    X = np.vstack([pos, neg])
    y = np.array([1] * n_per_class + [0] * n_per_class)
    return X, y


def bundles_from_matrix(X, y, dims):
    d_t, d_i, d_s = dims
    pairs = []
    for i, (row, label) in enumerate(zip(X, y)):
        bundle = assemble_fusion(row[:d_t], row[d_t : d_t + d_i], row[d_t + d_i :], dims, tweet_id=f"t{i}")
        pairs.append((bundle, BinaryLabel.MISINFORMATION if label == 1 else BinaryLabel.OTHER))
    return pairs


class TestRegistry:
    def test_bundled_backends_present(self):
        assert {"linear", "mlp"} <= set(registered_backends())

    def test_register_then_resolve(self):
        factory = lambda hp, seed: LinearFusionClassifier(seed=seed)
        register_backend("throwaway-backend", factory)
        assert resolve_backend("throwaway-backend") is factory

    def test_duplicate_name_rejected(self):
        with pytest.raises(DuplicateName):
            register_backend("linear", lambda hp, seed: None)

    def test_unknown_name_rejected(self):
        with pytest.raises(NotRegistered):
            resolve_backend("xyz")


class TestHyperParams:
    def test_defaults_match_training_contract(self):
        hp = HyperParams()
        assert hp.batch_size == 32
        assert hp.optimizer == "adam"
        assert hp.learning_rate == 0.1
        assert hp.loss == "categorical_cross_entropy"

    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            HyperParams(batch_size=0)
        with pytest.raises(ValueError):
            HyperParams(learning_rate=-0.1)

    def test_unsupported_optimizer_rejected_at_factory(self):
        with pytest.raises(ConfigError):
            resolve_backend("linear")(HyperParams(optimizer="sgd"), 0)


class TestTraining:
    DIMS = (2, 2, 2)

    def test_separable_set_reaches_perfect_training_accuracy(self):
        X, y = separable_set()
        assert perceptron_converges(X, np.where(y == 1, 1, -1))
        pairs = bundles_from_matrix(X, y, self.DIMS)
        spec = ExperimentSpec("sep", TRI, ("linear",), HyperParams(), seed=5)
        model = train(spec, pairs)
        hits = sum(1 for bundle, label in pairs if predict(model, bundle)[1] is label)
        assert hits == len(pairs)

    def test_training_examples_recover_their_labels(self):
        X, y = separable_set(seed=3)
        pairs = bundles_from_matrix(X, y, self.DIMS)
        model = train(ExperimentSpec("sep", TRI, ("linear",), HyperParams(), seed=1), pairs)
        for bundle, label in pairs[:10]:
            assert predict(model, bundle)[1] is label

    def test_same_spec_and_seed_byte_identical_blobs(self):
        X, y = separable_set(seed=2)
        pairs = bundles_from_matrix(X, y, self.DIMS)
        spec = ExperimentSpec("det", TRI, ("mlp",), HyperParams(epochs=5), seed=9)
        blob_a = train(spec, pairs).parameters
        blob_b = train(spec, pairs).parameters
        assert blob_a == blob_b

    def test_different_seed_changes_blob(self):
        X, y = separable_set(seed=2)
        pairs = bundles_from_matrix(X, y, self.DIMS)
        a = train(ExperimentSpec("s", TRI, ("linear",), HyperParams(epochs=3), seed=1), pairs).parameters
        b = train(ExperimentSpec("s", TRI, ("linear",), HyperParams(epochs=3), seed=2), pairs).parameters
        assert a != b

    def test_single_class_is_insufficient_data(self):
        X, y = separable_set()
        pairs = [(b, BinaryLabel.MISINFORMATION) for b, _ in bundles_from_matrix(X, y, self.DIMS)]
        with pytest.raises(InsufficientData):
            train(ExperimentSpec("one", TRI, ("linear",), HyperParams(), seed=0), pairs)

    def test_one_example_per_class_is_insufficient(self):
        X, y = separable_set(n_per_class=1)
        pairs = bundles_from_matrix(X, y, self.DIMS)
        with pytest.raises(InsufficientData):
            train(ExperimentSpec("tiny", TRI, ("linear",), HyperParams(), seed=0), pairs)

    def test_unknown_backend_surfaces_at_train(self):
        X, y = separable_set()
        pairs = bundles_from_matrix(X, y, self.DIMS)
        with pytest.raises(NotRegistered):
            train(ExperimentSpec("bad", TRI, ("nonexistent",), HyperParams(), seed=0), pairs)

    def test_training_history_recorded_and_bounded(self):
        X, y = separable_set()
        pairs = bundles_from_matrix(X, y, self.DIMS)
        model = train(ExperimentSpec("h", TRI, ("linear",), HyperParams(epochs=20), seed=0), pairs)
        assert 1 <= len(model.training_history) <= 20
        assert model.training_history[-1] <= model.training_history[0]

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_offending_epoch(self):
        X, y = separable_set(n_per_class=8, dim=6)
        pairs = bundles_from_matrix(X * 1e3, y, self.DIMS)
        hp = HyperParams(learning_rate=1e307, epochs=10, early_stop_patience=None)
        with pytest.raises(NonFiniteLoss) as exc:
            train(ExperimentSpec("div", TRI, ("linear",), hp, seed=0), pairs)
        assert isinstance(exc.value.epoch, int)

    def test_zeroing_unselected_blocks_commutes_with_training(self):
        rng = np.random.default_rng(11)
        X, y = separable_set(seed=4)
        noisy = X.copy()
        noisy[:, 2:] = rng.normal(size=(X.shape[0], 4))  # image/social blocks differ
        clean = X.copy()
        clean[:, 2:] = 0.0
        spec = ExperimentSpec("txt", TEXT_ONLY, ("linear",), HyperParams(epochs=8), seed=3)
        blob_noisy = train(spec, bundles_from_matrix(noisy, y, self.DIMS)).parameters
        blob_clean = train(spec, bundles_from_matrix(clean, y, self.DIMS)).parameters
        assert blob_noisy == blob_clean

    def test_modality_column_mask_layout(self):
        mask = modality_column_mask(TEXT_ONLY, (2, 3, 4))
        assert mask.tolist() == [True, True, False, False, False, False, False, False, False]


class TestPredict:
    def _zero_weight_model(self):
        X, y = separable_set(n_per_class=2)
        pairs = bundles_from_matrix(X, y, (2, 2, 2))
        model = train(ExperimentSpec("z", TRI, ("linear",), HyperParams(epochs=1), seed=0), pairs)
        model.estimator.params_ = {"W": np.zeros((6, 2)), "b": np.zeros(2)}
        return model, pairs[0][0]

    def test_boundary_probability_labels_misinformation(self):
        model, bundle = self._zero_weight_model()
        probability, label = predict(model, bundle)
        assert probability == 0.5
        assert label is BinaryLabel.MISINFORMATION

    def test_below_boundary_labels_other(self):
        model, bundle = self._zero_weight_model()
        model.estimator.params_["b"] = np.array([0.1, 0.0])  # tilt toward class 0
        probability, label = predict(model, bundle)
        assert probability < 0.5
        assert label is BinaryLabel.OTHER

    def test_probability_in_unit_interval_and_margin_consistent(self):
        X, y = separable_set(seed=7)
        pairs = bundles_from_matrix(X, y, (2, 2, 2))
        model = train(ExperimentSpec("p", TRI, ("mlp",), HyperParams(epochs=5), seed=2), pairs)
        for bundle, _ in pairs:
            probability, label = predict(model, bundle)
            assert 0.0 <= probability <= 1.0
            # the label equals the sign of the logit margin, a strictly
            # monotone rescaling of the probability
            x = bundle.fusion_vec.reshape(1, -1)
            logits, _ = model.estimator._forward(x, model.estimator.params_)
            margin_label = BinaryLabel.MISINFORMATION if logits[0, 1] >= logits[0, 0] else BinaryLabel.OTHER
            assert label is margin_label

    def test_dim_mismatch_rejected(self):
        model, _ = self._zero_weight_model()
        other = assemble_fusion(np.zeros(3), np.zeros(3), np.zeros(3), (3, 3, 3))
        with pytest.raises(DimensionMismatch):
            predict(model, other)


class TestSerialization:
    def test_save_load_round_trip_predictions(self, tmp_path):
        X, y = separable_set(n_per_class=50, seed=12)
        pairs = bundles_from_matrix(X, y, (2, 2, 2))
        spec = ExperimentSpec("rt", TRI, ("mlp",), HyperParams(epochs=6), seed=4)
        model = train(spec, pairs)
        path = tmp_path / "model.json"
        save_model(model, path)
        restored = load_model(path)
        assert restored.parameters == model.parameters
        assert restored.spec == model.spec
        for bundle, _ in pairs:
            assert predict(restored, bundle) == predict(model, bundle)

    def test_normalizer_travels_with_model(self, tmp_path):
        from fusedetect.features import SocialVectorSchema, fit_normalizer

        schema = SocialVectorSchema.default()
        normalizer = fit_normalizer([np.arange(17, dtype=float), np.ones(17)], schema)
        X, y = separable_set(n_per_class=3)
        pairs = bundles_from_matrix(X, y, (2, 2, 2))
        model = train(ExperimentSpec("n", TRI, ("linear",), HyperParams(epochs=2), seed=0), pairs, normalizer=normalizer)
        save_model(model, tmp_path / "m.json")
        restored = load_model(tmp_path / "m.json")
        assert restored.normalizer is not None
        assert np.array_equal(restored.normalizer.min_, normalizer.min_)


class TestEstimatorSklearnSurface:
    def test_get_set_params(self):
        clf = MLPFusionClassifier(hidden_dim=16, seed=3)
        params = clf.get_params()
        assert params["hidden_dim"] == 16 and params["seed"] == 3
        clf.set_params(hidden_dim=8)
        assert clf.hidden_dim == 8

    def test_fit_predict_shapes(self):
        X, y = separable_set(dim=4)
        clf = LinearFusionClassifier(epochs=5, seed=0).fit(X, y)
        assert clf.predict(X).shape == (X.shape[0],)
        proba = clf.predict_proba(X)
        assert proba.shape == (X.shape[0], 2)
        assert np.allclose(proba.sum(axis=1), 1.0)

    def test_labels_must_be_binary(self):
        X, _ = separable_set(dim=4)
        with pytest.raises(ValueError):
            LinearFusionClassifier(epochs=1).fit(X, np.zeros(X.shape[0]))
