import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from fourier_gpc.data import TransformSpec, fit_preprocessing
from fourier_gpc.errors import CorruptModelError, DomainError, UnsupportedVersionError
from fourier_gpc.features import BasisMode, FrequencyBasis, sample_frequencies
from fourier_gpc.model import TrainedModel, load, predict_label, predict_proba, save

PSI_SQRT2 = 0.804429682506956905  # expit(sqrt(2))


def make_model(mu, Sigma, W, sigma=1.0, preprocessing=None, mode="rff"):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    return TrainedModel(
        mode=mode,
        basis=FrequencyBasis(W, BasisMode.FIXED_RANDOM, None),
        sigma=sigma,
        gamma=1.0,
        mu=np.asarray(mu, dtype=float),
        Sigma=np.asarray(Sigma, dtype=float),
        preprocessing=preprocessing or TransformSpec.identity(W.shape[1]),
        train_meta={"n": 10, "seed": 0},
        n_train=10,
    )


def random_model(rng, D=4, d=3, preprocessing=None):
    A = rng.normal(size=(2 * D, 2 * D))
    return make_model(
        rng.normal(size=2 * D),
        A @ A.T / (2 * D) + 0.1 * np.eye(2 * D),
        sample_frequencies(D, d, 1).W,
        sigma=0.7,
        preprocessing=preprocessing,
    )


class TestPredictProba:
    def test_zero_mean_gives_half(self, rng):
        m = make_model(np.zeros(8), np.eye(8), sample_frequencies(4, 2, 0).W)
        np.testing.assert_array_equal(m.predict_proba(rng.normal(size=(20, 2))), 0.5)

    def test_zero_covariance_is_plain_sigmoid(self, rng):
        mu = rng.normal(size=8)
        m = make_model(mu, np.zeros((8, 8)), sample_frequencies(4, 2, 0).W)
        X = rng.normal(size=(20, 2))
        np.testing.assert_array_equal(predict_proba(m, X), expit(m.features(X) @ mu))

    def test_hand_case(self):
        # z = (1, 0) at x = 0 with a zero frequency
        m = make_model([2.0, 0.0], np.diag([8 / math.pi, 0.0]), [[0.0]])
        np.testing.assert_array_equal(m.features([[0.0]]), [[1.0, 0.0]])
        assert predict_proba(m, [[0.0]])[0] == pytest.approx(PSI_SQRT2, rel=1e-15)

    def test_dimension_mismatch(self, rng):
        m = random_model(rng)
        with pytest.raises(DomainError):
            m.predict_proba(np.zeros((2, 2)))

    def test_range_and_complement(self, rng):
        m = random_model(rng)
        p = m.predict_proba(rng.normal(scale=3.0, size=(500, 3)))
        assert np.all((p > 0) & (p < 1))
        np.testing.assert_array_equal(p + (1.0 - p), 1.0)

    def test_extreme_mean_stays_open(self):
        for s in (1e4, -1e4):
            m = make_model([s, 0.0], np.zeros((2, 2)), [[0.0]])
            p = m.predict_proba([[0.0]])[0]
            assert 0.0 < p < 1.0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-20, 20), st.floats(0.01, 5))
    def test_monotone_in_mean(self, a, delta):
        rng = np.random.default_rng(3)
        base = random_model(rng)
        x = np.array([[0.3, -0.2, 1.0]])
        z = base.features(x)[0]
        u = z / (z @ z)
        lo = make_model(a * u, base.Sigma, base.basis.W, base.sigma)
        hi = make_model((a + delta) * u, base.Sigma, base.basis.W, base.sigma)
        assert hi.predict_proba(x)[0] >= lo.predict_proba(x)[0]
        # strictly while away from saturation
        if abs(a) < 5:
            assert hi.predict_proba(x)[0] > lo.predict_proba(x)[0]

    def test_variance_dampening(self, rng):
        mu = rng.normal(size=8)
        W = sample_frequencies(4, 2, 0).W
        X = rng.normal(size=(30, 2))
        prev = None
        for s in (0.0, 0.1, 1.0, 10.0, 1e3):
            p = make_model(mu, s * np.eye(8), W).predict_proba(X)
            if prev is not None:
                assert np.all(np.abs(p - 0.5) <= np.abs(prev - 0.5))
                assert np.all(np.sign(p - 0.5) == np.sign(prev - 0.5))
            prev = p

    def test_preprocessing_applied(self, rng):
        X = rng.normal(5.0, 2.0, size=(40, 3))
        pre = fit_preprocessing(X, "standardize_pca", k=2)
        m = random_model(rng, d=2, preprocessing=pre)
        assert m.input_dim == 3 and m.d == 2
        assert m.predict_proba(X).shape == (40,)


class TestPredictLabel:
    def half_model(self):
        return make_model(np.zeros(2), np.eye(2), [[1.0]])

    def test_tie_goes_to_one(self):
        assert predict_label(self.half_model(), [[0.3]], 0.5)[0] == 1

    def test_extreme_thresholds(self, rng):
        m = random_model(rng)
        X = rng.normal(size=(50, 3))
        assert np.all(m.predict(X, 1e-12) == 1)
        assert np.all(m.predict(X, 1 - 1e-12) == 0)

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_bad_threshold(self, t):
        with pytest.raises(DomainError):
            predict_label(self.half_model(), [[0.0]], t)


class TestSerialization:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        X = rng.normal(size=(30, 5))
        m = random_model(rng, d=3, preprocessing=fit_preprocessing(X, "standardize_pca", k=3))
        save(m, tmp_path / "m.json")
        back = load(tmp_path / "m.json")
        for name in ("mode", "sigma", "gamma", "n_train", "format_version", "train_meta"):
            assert getattr(back, name) == getattr(m, name)
        for a, b in [(back.mu, m.mu), (back.Sigma, m.Sigma), (back.basis.W, m.basis.W),
                     (back.preprocessing.means, m.preprocessing.means),
                     (back.preprocessing.stds, m.preprocessing.stds),
                     (back.preprocessing.pca_components, m.preprocessing.pca_components)]:
            assert a.tobytes() == b.tobytes()
        np.testing.assert_array_equal(back.predict_proba(X), m.predict_proba(X))

    def test_document_keys(self, rng, tmp_path):
        save(random_model(rng), tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text(encoding="utf-8"))
        for key in ("format_version", "mode", "dims", "basis", "sigma", "gamma", "mu",
                    "sigma_matrix", "preprocessing", "train_meta"):
            assert key in doc
        assert doc["dims"] == {"n_train": 10, "d": 3, "D": 4}

    def _edit(self, rng, tmp_path, change):
        save(random_model(rng), tmp_path / "m.json")
        doc = json.loads((tmp_path / "m.json").read_text(encoding="utf-8"))
        change(doc)
        (tmp_path / "m.json").write_text(json.dumps(doc), encoding="utf-8")
        return tmp_path / "m.json"

    def test_unsupported_version(self, rng, tmp_path):
        p = self._edit(rng, tmp_path, lambda doc: doc.update(format_version=999))
        with pytest.raises(UnsupportedVersionError):
            load(p)

    def test_negated_diagonal(self, rng, tmp_path):
        def negate(doc):
            doc["sigma_matrix"][0] = -doc["sigma_matrix"][0]

        with pytest.raises(CorruptModelError):
            load(self._edit(rng, tmp_path, negate))

    @pytest.mark.parametrize(
        "change",
        [
            lambda doc: doc["mu"].pop(),
            lambda doc: doc["dims"].update(D=5),
            lambda doc: doc.pop("gamma"),
            lambda doc: doc.update(sigma=-1.0),
            lambda doc: doc["sigma_matrix"].__setitem__(1, doc["sigma_matrix"][1] + 1e-3),
            lambda doc: doc["preprocessing"].update(means=[0.0] * 5, stds=[1.0] * 5),
        ],
    )
    def test_structural_corruption(self, rng, tmp_path, change):
        with pytest.raises(CorruptModelError):
            load(self._edit(rng, tmp_path, change))

    def test_not_json(self, tmp_path):
        (tmp_path / "m.json").write_text("not a model", encoding="utf-8")
        with pytest.raises(CorruptModelError):
            load(tmp_path / "m.json")
