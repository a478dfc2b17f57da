import numpy as np
import pytest

from noveltydetect.dataset import (
    CsvFormatError,
    LabeledDataset,
    SplitSpec,
    SynthSpec,
    apply_pca,
    fit_pca,
    generate_synthetic,
    load_csv,
    merge_datasets,
    save_csv,
    split_per_class,
)
from noveltydetect.softlabel import TrainConfig, train_softmax, training_accuracy


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadCsv:
    def test_well_formed(self, tmp_path):
        ds = load_csv(write(tmp_path, "label,f0,f1\na,1.0,2.0\nb,3.5,-1.0\na,0.0,0.25\n"))
        assert ds.n == 3 and ds.dim == 2
        assert ds.labels == ("a", "b", "a")
        np.testing.assert_allclose(ds.features[1], [3.5, -1.0])

    def test_first_appearance_indexing(self, tmp_path):
        ds = load_csv(write(tmp_path, "label,f0\na,1\nb,2\na,3\n"))
        assert ds.class_index == {"a": 0, "b": 1}

    def test_ragged_row_names_line(self, tmp_path):
        path = write(tmp_path, "label,f0,f1\na,1.0,2.0\nb,3.5\n")
        with pytest.raises(CsvFormatError, match="line 3"):
            load_csv(path)

    def test_non_numeric_cell_names_line(self, tmp_path):
        path = write(tmp_path, "label,f0\na,1.0\nb,oops\n")
        with pytest.raises(CsvFormatError, match="line 3"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CsvFormatError, match="no such file"):
            load_csv(str(tmp_path / "nope.csv"))

    def test_empty_body(self, tmp_path):
        with pytest.raises(CsvFormatError, match="empty body"):
            load_csv(write(tmp_path, "label,f0\n"))

    def test_bad_header(self, tmp_path):
        with pytest.raises(CsvFormatError, match="line 1"):
            load_csv(write(tmp_path, "label,x0\na,1\n"))

    def test_round_trip_identity(self, tmp_path):
        rng = np.random.default_rng(3)
        ds = LabeledDataset(
            rng.normal(size=(7, 3)) * 1e3,
            tuple("ababcab"),
            {"a": 0, "b": 1, "c": 2},
        )
        path = str(tmp_path / "rt.csv")
        save_csv(ds, path)
        back = load_csv(path)
        assert back.labels == ds.labels
        assert back.class_index == ds.class_index
        np.testing.assert_array_equal(back.features, ds.features)


class TestInvariants:
    def test_rejects_label_missing_from_index(self):
        with pytest.raises(ValueError, match="not in class_index"):
            LabeledDataset(np.ones((2, 1)), ("a", "b"), {"a": 0})

    def test_rejects_empty_class(self):
        with pytest.raises(ValueError, match="no examples"):
            LabeledDataset(np.ones((1, 1)), ("a",), {"a": 0, "b": 1})

    def test_rejects_non_bijection(self):
        with pytest.raises(ValueError, match="bijection"):
            LabeledDataset(np.ones((2, 1)), ("a", "b"), {"a": 0, "b": 2})

    def test_features_read_only(self):
        ds = LabeledDataset(np.ones((2, 2)), ("a", "b"), {"a": 0, "b": 1})
        with pytest.raises(ValueError):
            ds.features[0, 0] = 5.0


class TestSplit:
    def make(self, per_class=10, classes=("a", "b")):
        rows = []
        labels = []
        for c, lab in enumerate(classes):
            for i in range(per_class):
                rows.append([c * 10.0 + i])
                labels.append(lab)
        return LabeledDataset(np.array(rows), tuple(labels), {lab: i for i, lab in enumerate(classes)})

    def test_direct_arithmetic(self):
        mc, bi, te = split_per_class(self.make(10), SplitSpec(0.6, 0.1, seed=1))
        for part, expect in ((mc, 6), (bi, 1), (te, 3)):
            assert part.rows_of_class("a").size == expect
            assert part.rows_of_class("b").size == expect

    def test_determinism(self):
        ds = self.make(9)
        spec = SplitSpec(0.5, 0.2, seed=42)
        first = split_per_class(ds, spec)
        second = split_per_class(ds, spec)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.features, b.features)
            assert a.labels == b.labels

    def test_class_too_small(self):
        with pytest.raises(ValueError, match="leaves a part empty"):
            split_per_class(self.make(2), SplitSpec(0.6, 0.1, seed=0))

    def test_disjoint_union(self):
        ds = self.make(11, classes=("a", "b", "c"))
        parts = split_per_class(ds, SplitSpec(0.5, 0.25, seed=9))
        seen = np.concatenate([p.features[:, 0] for p in parts])
        assert sorted(seen.tolist()) == sorted(ds.features[:, 0].tolist())
        sizes = [set(p.features[:, 0].tolist()) for p in parts]
        assert not (sizes[0] & sizes[1]) and not (sizes[0] & sizes[2]) and not (sizes[1] & sizes[2])

    def test_parts_keep_class_index(self):
        ds = self.make(8, classes=("x", "y"))
        for part in split_per_class(ds, SplitSpec(0.4, 0.3, seed=2)):
            assert part.class_index == ds.class_index


class TestSynthetic:
    def test_counts(self):
        ds = generate_synthetic(SynthSpec(3, 4, 5, 1.0, 0.5, seed=0))
        assert ds.n == 15 and ds.num_classes == 3 and ds.dim == 4

    def test_degenerate_within_std(self):
        ds = generate_synthetic(SynthSpec(3, 4, 6, 1.0, 1e-12, seed=0))
        for lab in ds.classes():
            rows = ds.features[ds.rows_of_class(lab)]
            assert np.abs(rows - rows[0]).max() < 1e-9

    def test_determinism(self):
        spec = SynthSpec(4, 3, 7, 2.0, 0.3, seed=123)
        np.testing.assert_array_equal(
            generate_synthetic(spec).features, generate_synthetic(spec).features
        )

    def test_wide_spread_is_learnable(self):
        # spread/within ratio 10: a softmax model must fit the training set
        spec = SynthSpec(20, 8, 20, 1.0, 0.1, seed=77)
        ds = generate_synthetic(spec)
        model = train_softmax(ds, TrainConfig(learning_rate=0.5, l2_penalty=1e-4, max_epochs=300, tolerance=1e-8))
        assert training_accuracy(model, ds) >= 0.95

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            SynthSpec(1, 4, 5, 1.0, 0.5, seed=0)
        with pytest.raises(ValueError):
            SynthSpec(3, 4, 5, 1.0, 0.0, seed=0)


class TestPca:
    def test_rank_one_data(self):
        t = np.linspace(-2, 2, 12)
        direction = np.array([1.0, -2.0, 0.5])
        feats = np.outer(t, direction) + np.array([3.0, 1.0, -1.0])
        ds = LabeledDataset(feats, ("a",) * 12, {"a": 0})
        model = fit_pca(ds, 1)
        projected = apply_pca(model, ds)
        restored = projected.features @ model.components.T + model.mean
        assert np.abs(restored - feats).max() < 1e-10

    def test_full_basis_preserves_distances(self):
        rng = np.random.default_rng(5)
        feats = rng.normal(size=(20, 4))
        ds = LabeledDataset(feats, ("a",) * 20, {"a": 0})
        proj = apply_pca(fit_pca(ds, 4), ds).features
        orig_d = np.linalg.norm(feats[:, None] - feats[None, :], axis=2)
        proj_d = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
        assert np.abs(orig_d - proj_d).max() < 1e-8

    def test_projected_variance_matches_eigenvalues(self):
        rng = np.random.default_rng(11)
        feats = rng.normal(size=(50, 5)) @ np.diag([3.0, 2.0, 1.0, 0.5, 0.1])
        ds = LabeledDataset(feats, ("a",) * 50, {"a": 0})
        proj = apply_pca(fit_pca(ds, 2), ds).features
        # oracle: dense eigendecomposition of the sample covariance
        eigvals = np.linalg.eigvalsh(np.cov(feats, rowvar=False))
        expected = eigvals[-1] + eigvals[-2]
        got = proj.var(axis=0, ddof=1).sum()
        assert abs(got - expected) < 1e-8

    def test_orthonormal_components(self):
        rng = np.random.default_rng(2)
        ds = LabeledDataset(rng.normal(size=(30, 6)), ("a",) * 30, {"a": 0})
        comps = fit_pca(ds, 4).components
        gram = comps.T @ comps
        assert np.abs(gram - np.eye(4)).max() < 1e-8

    def test_projected_covariance_diagonal(self):
        rng = np.random.default_rng(8)
        ds = LabeledDataset(rng.normal(size=(40, 5)), ("a",) * 40, {"a": 0})
        proj = apply_pca(fit_pca(ds, 3), ds).features
        cov = np.cov(proj, rowvar=False)
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 1e-6

    def test_sign_convention(self):
        rng = np.random.default_rng(4)
        ds = LabeledDataset(rng.normal(size=(25, 4)), ("a",) * 25, {"a": 0})
        comps = fit_pca(ds, 3).components
        for j in range(3):
            assert comps[np.argmax(np.abs(comps[:, j])), j] > 0

    def test_m_too_large(self):
        ds = LabeledDataset(np.eye(3), ("a", "b", "c"), {"a": 0, "b": 1, "c": 2})
        with pytest.raises(ValueError):
            fit_pca(ds, 4)


def test_merge_datasets():
    a = LabeledDataset(np.zeros((2, 1)), ("x", "x"), {"x": 0})
    b = LabeledDataset(np.ones((3, 1)), ("y", "z", "y"), {"y": 0, "z": 1})
    merged = merge_datasets(a, b)
    assert merged.n == 5
    assert merged.class_index == {"x": 0, "y": 1, "z": 2}
