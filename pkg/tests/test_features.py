import numpy as np
import pytest

from tune_probe.features import (
    DecayConfig,
    PcaModel,
    aggregate,
    decay_weights,
    fit_pca,
    frames_for_interval,
    load_pca,
    pool_frames,
    project,
    reconstruct,
    save_pca,
)
from tune_probe.latent_store import LatentSequence
from tune_probe.textgrid import WordInterval


def make_seq(n, d=2, rate=12.5, fill=None):
    frames = np.zeros((n, d), dtype=np.float32) if fill is None else fill
    return LatentSequence(np.asarray(frames, dtype=np.float32), frame_rate=rate)


class TestFramesForInterval:
    def test_centers_inside_interval(self):
        # centers at 0.04, 0.12, 0.20, 0.28, 0.36 ...
        got = frames_for_interval(make_seq(10), WordInterval("w", 0.0, 0.32))
        assert list(got) == [0, 1, 2, 3]

    def test_interval_shorter_than_frame_falls_back_to_nearest(self):
        got = frames_for_interval(make_seq(10), (0.0, 0.05))
        assert list(got) == [0]

    def test_no_overlap_is_an_error(self):
        with pytest.raises(ValueError, match="does not overlap"):
            frames_for_interval(make_seq(10), (-1.0, -0.5))

    def test_word_aligned_to_frame_boundaries_selects_exactly(self):
        rate = 12.5
        lead, n_word = 3, 7
        got = frames_for_interval(
            make_seq(15, rate=rate), (lead / rate, (lead + n_word) / rate)
        )
        assert list(got) == list(range(lead, lead + n_word))

    def test_interval_past_the_end_clamps_to_last_frame(self):
        got = frames_for_interval(make_seq(5), (0.38, 1.4))
        assert got.stop <= 5 and len(got) >= 1


class TestDecayWeights:
    def test_zero_rates_recover_plain_average(self):
        assert np.allclose(decay_weights(2, DecayConfig(0, 0)), [1 / 3] * 3, atol=1e-15)

    def test_forward_decay_closed_form(self):
        got = decay_weights(2, DecayConfig(np.log(2), 0))
        assert np.allclose(got, [4 / 7, 2 / 7, 1 / 7], atol=1e-12)

    def test_backward_decay_closed_form(self):
        got = decay_weights(2, DecayConfig(0, np.log(2)))
        assert np.allclose(got, [1 / 7, 2 / 7, 4 / 7], atol=1e-12)

    def test_normalization_and_reversal_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            n = int(rng.integers(0, 40))
            a, b = rng.uniform(0, 5, size=2)
            w = decay_weights(n, DecayConfig(a, b))
            assert w.shape == (n + 1,)
            assert (w > 0).all()
            assert abs(w.sum() - 1.0) < 1e-12
            assert np.allclose(w, decay_weights(n, DecayConfig(b, a))[::-1], atol=1e-15)

    def test_monotone_when_only_forward_decay(self):
        w = decay_weights(10, DecayConfig(0.7, 0.0))
        assert (np.diff(w) < 0).all()

    def test_large_backward_decay_concentrates_on_last_frame(self):
        w = decay_weights(12, DecayConfig(0.0, 50.0))
        assert w[-1] > 1 - 1e-12

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            DecayConfig(-0.1, 0.0)


class TestAggregate:
    def test_single_frame_unchanged(self):
        seq = make_seq(3, fill=[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        got = aggregate(seq, range(1, 2), DecayConfig(1.0, 2.0))
        assert np.allclose(got, [3.0, 4.0])

    def test_equal_frames_any_config(self):
        seq = make_seq(2, fill=[[2.5, -1.0], [2.5, -1.0]])
        got = aggregate(seq, range(0, 2), DecayConfig(3.0, 0.2))
        assert np.allclose(got, [2.5, -1.0])

    def test_backward_weighted_two_frames(self):
        seq = make_seq(2, d=1, fill=[[0.0], [3.0]])
        got = aggregate(seq, range(0, 2), DecayConfig(0.0, np.log(2)))
        assert np.allclose(got, [2.0], atol=1e-12)

    def test_empty_selection_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            aggregate(make_seq(3), range(0, 0))

    def test_pool_frames_matches_aggregate(self):
        frames = np.arange(8.0).reshape(4, 2)
        seq = make_seq(4, fill=frames)
        cfg = DecayConfig(0.3, 0.1)
        assert np.allclose(pool_frames(frames, cfg), aggregate(seq, range(4), cfg))


class TestPca:
    def test_analytic_line(self):
        model = fit_pca(np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]]))
        assert np.allclose(np.abs(model.basis[:, 0]), [1.0, 0.0], atol=1e-12)
        assert model.eigenvalues[1] / model.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)

    def test_identical_vectors_zero_variance(self):
        Y = np.tile([1.5, -2.0, 3.0], (5, 1))
        model = fit_pca(Y)
        assert np.allclose(model.eigenvalues, 0.0, atol=1e-9)
        assert np.allclose(project(model, Y[0], 3), 0.0, atol=1e-9)

    def test_isotropic_cloud_eigenvalue_ratio(self):
        Y = np.random.default_rng(42).standard_normal((10_000, 2))
        model = fit_pca(Y)
        assert model.eigenvalues[0] / model.eigenvalues[1] == pytest.approx(1.0, abs=0.2)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError, match="at least 2"):
            fit_pca(np.ones((1, 3)))

    def test_orthonormal_descending(self):
        Y = np.random.default_rng(1).standard_normal((40, 7))
        model = fit_pca(Y)
        gram = model.basis.T @ model.basis
        assert np.abs(gram - np.eye(7)).max() < 1e-8
        assert (np.diff(model.eigenvalues) <= 1e-9).all()

    def test_full_dim_projection_is_invertible(self):
        rng = np.random.default_rng(2)
        Y = rng.standard_normal((30, 6))
        model = fit_pca(Y)
        y = rng.standard_normal(6)
        assert np.abs(reconstruct(model, project(model, y, 6)) - y).max() < 1e-8

    def test_mean_projects_to_zero(self):
        Y = np.random.default_rng(3).standard_normal((25, 4))
        model = fit_pca(Y)
        assert np.allclose(project(model, model.mean, 4), 0.0, atol=1e-12)

    def test_hand_computed_two_dim_fixture(self):
        # data on the line through (0,0),(2,1),(4,2): mean (2,1),
        # scatter [[8,4],[4,2]], eigenvalues (10, 0), b1 = (2,1)/sqrt(5)
        Y = np.array([[0.0, 0.0], [2.0, 1.0], [4.0, 2.0]])
        model = fit_pca(Y)
        assert np.allclose(model.eigenvalues, [10.0, 0.0], atol=1e-10)
        assert np.allclose(model.basis[:, 0], np.array([2.0, 1.0]) / np.sqrt(5), atol=1e-10)
        coords = project(model, np.array([4.0, 2.0]), 1)
        assert coords[0] == pytest.approx(np.sqrt(5.0), abs=1e-10)

    def test_d_pca_out_of_range(self):
        model = fit_pca(np.random.default_rng(0).standard_normal((10, 3)))
        with pytest.raises(ValueError):
            project(model, np.zeros(3), 0)
        with pytest.raises(ValueError):
            project(model, np.zeros(3), 4)

    def test_projection_variance_matches_eigenvalues(self):
        Y = np.random.default_rng(5).standard_normal((60, 5)) * [3, 1, 1, 0.5, 0.1]
        model = fit_pca(Y)
        proj = project(model, Y, 5)
        # sum of squared projections onto b_k is exactly lambda_k
        assert np.allclose((proj**2).sum(axis=0), model.eigenvalues, rtol=1e-10)
        corr = np.corrcoef(proj[:, :4], rowvar=False)
        off_diag = corr - np.diag(np.diag(corr))
        assert np.abs(off_diag).max() < 1e-6

    def test_projection_is_affine_linear(self):
        rng = np.random.default_rng(6)
        Y = rng.standard_normal((20, 4))
        model = fit_pca(Y)
        y1, y2 = rng.standard_normal(4), rng.standard_normal(4)
        a, b = 0.3, -1.7
        lhs = project(model, a * y1 + b * y2 + (1 - a - b) * model.mean, 3)
        rhs = a * project(model, y1, 3) + b * project(model, y2, 3)
        assert np.allclose(lhs, rhs, atol=1e-10)

    def test_uncentered_variant(self):
        Y = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        model = fit_pca(Y, center=False)
        assert np.allclose(model.mean, 0.0)
        assert model.eigenvalues[0] == pytest.approx(14.0, abs=1e-10)  # 1+4+9

    def test_save_load_roundtrip(self, tmp_path):
        model = fit_pca(np.random.default_rng(7).standard_normal((12, 4)))
        save_pca(model, tmp_path / "pca")
        back = load_pca(tmp_path / "pca")
        assert np.allclose(back.basis, model.basis, atol=1e-6)
        assert np.allclose(back.mean, model.mean, atol=1e-6)
        assert isinstance(back, PcaModel)
