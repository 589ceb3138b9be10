import numpy as np
import pytest

from rgbdseg.container import DataError
from rgbdseg.metrics import (
    ClassMap,
    ConfusionMatrix,
    EvalReport,
    classwise_accuracy,
    per_class_accuracy,
    pixelwise_accuracy,
    remap_distributions,
    remap_labels,
)

IGNORE = 65535


class TestClassMap:
    def test_from_tsv(self, tmp_path):
        path = tmp_path / "map.tsv"
        path.write_text("# comment\n0\t0\tground\n1\t1\tstructure\n2\t0\tground\n3\t-1\tunknown\n")
        cmap = ClassMap.from_tsv(path)
        assert cmap.n_source == 4
        assert cmap.n_target == 2
        assert cmap.target_names == ["ground", "structure"]
        assert cmap.mapping.tolist() == [0, 1, 0, -1]

    def test_identity(self):
        cmap = ClassMap.identity(3, names=["a", "b", "c"])
        assert cmap.mapping.tolist() == [0, 1, 2]

    def test_duplicate_source_rejected(self, tmp_path):
        path = tmp_path / "map.tsv"
        path.write_text("0\t0\tx\n0\t1\ty\n")
        with pytest.raises(DataError):
            ClassMap.from_tsv(path)

    def test_gap_in_sources_rejected(self, tmp_path):
        path = tmp_path / "map.tsv"
        path.write_text("0\t0\tx\n2\t1\ty\n")
        with pytest.raises(DataError):
            ClassMap.from_tsv(path)

    def test_conflicting_target_names_rejected(self, tmp_path):
        path = tmp_path / "map.tsv"
        path.write_text("0\t0\tx\n1\t0\ty\n")
        with pytest.raises(DataError):
            ClassMap.from_tsv(path)

    def test_noncontiguous_targets_rejected(self):
        with pytest.raises(DataError):
            ClassMap(mapping=np.array([0, 2]), target_names=["a", "b"])

    def test_packaged_synth_map_loads(self):
        from rgbdseg.render import packaged_data_path
        cmap = ClassMap.from_tsv(packaged_data_path("synth_classmap.tsv"))
        assert cmap.n_source == 4
        assert cmap.target_names == ["floor", "ceiling", "wall", "prop"]


class TestRemap:
    def test_identity_map_unchanged(self):
        cmap = ClassMap.identity(5)
        labels = np.array([[0, 4], [2, 1]])
        assert np.array_equal(remap_labels(labels, cmap, IGNORE), labels)
        dist = np.random.default_rng(0).dirichlet(np.ones(5), size=(2, 3)).transpose(2, 0, 1)
        assert np.array_equal(remap_distributions(dist, cmap), dist)

    def test_onehot_many_to_few(self):
        n_src = 894
        mapping = np.arange(n_src) % 4
        cmap = ClassMap(mapping=mapping, target_names=["g", "f", "p", "s"])
        onehot = np.zeros((n_src, 1, 1))
        onehot[123] = 1.0
        out = remap_distributions(onehot, cmap)
        assert out.shape == (4, 1, 1)
        assert out[123 % 4, 0, 0] == 1.0
        assert out.sum() == 1.0

    def test_normalization_preserved_without_ignores(self):
        rng = np.random.default_rng(1)
        mapping = rng.integers(0, 3, size=20)
        mapping[:3] = [0, 1, 2]  # keep targets contiguous
        cmap = ClassMap(mapping=mapping, target_names=["a", "b", "c"])
        dist = rng.dirichlet(np.ones(20), size=(4, 5)).transpose(2, 0, 1)
        out = remap_distributions(dist, cmap)
        assert np.abs(out.sum(axis=0) - 1.0).max() < 1e-12

    def test_ignored_sources_become_ignore_label(self):
        cmap = ClassMap(mapping=np.array([0, -1, 1]), target_names=["a", "b"])
        labels = np.array([[0, 1], [2, 1]])
        out = remap_labels(labels, cmap, IGNORE)
        assert out.tolist() == [[0, IGNORE], [1, IGNORE]]

    def test_ignore_label_passes_through(self):
        cmap = ClassMap.identity(3)
        labels = np.array([[0, IGNORE]])
        out = remap_labels(labels, cmap, IGNORE)
        assert out.tolist() == [[0, IGNORE]]

    def test_out_of_range_label_rejected(self):
        cmap = ClassMap.identity(3)
        with pytest.raises(DataError):
            remap_labels(np.array([[5]]), cmap, IGNORE)


class TestConfusion:
    def test_hand_matrix(self):
        cm = ConfusionMatrix(counts=np.array([[8, 2], [4, 6]], dtype=np.int64))
        assert classwise_accuracy(cm) == pytest.approx(0.7, abs=1e-15)

    def test_perfect_predictions(self):
        cm = ConfusionMatrix.empty(3)
        labels = np.random.default_rng(2).integers(0, 3, size=(10, 10))
        cm.add(labels, labels)
        assert classwise_accuracy(cm) == 1.0

    def test_ignored_pixels_never_counted(self):
        cm = ConfusionMatrix.empty(2)
        truth = np.array([[0, IGNORE], [1, IGNORE]])
        pred = np.array([[0, 1], [1, 0]])
        cm.add(truth, pred, ignore_label=IGNORE)
        assert cm.total == 2
        assert cm.counts.tolist() == [[1, 0], [0, 1]]

    def test_absent_class_skipped(self):
        cm = ConfusionMatrix(counts=np.array([[5, 0, 0], [0, 3, 0], [0, 0, 0]], dtype=np.int64))
        acc = per_class_accuracy(cm)
        assert np.isnan(acc[2])
        assert classwise_accuracy(cm) == 1.0

    def test_scale_invariance(self):
        counts = np.random.default_rng(3).integers(1, 50, size=(4, 4)).astype(np.int64)
        a = classwise_accuracy(ConfusionMatrix(counts=counts))
        b = classwise_accuracy(ConfusionMatrix(counts=counts * 7))
        assert a == pytest.approx(b, abs=1e-12)

    def test_accumulation_associative(self):
        rng = np.random.default_rng(4)
        global_cm = ConfusionMatrix.empty(3)
        merged = ConfusionMatrix.empty(3)
        all_truth, all_pred = [], []
        for _ in range(5):
            truth = rng.integers(0, 3, size=(6, 6))
            pred = rng.integers(0, 3, size=(6, 6))
            per_image = ConfusionMatrix.empty(3)
            per_image.add(truth, pred)
            merged = merged.merge(per_image)
            all_truth.append(truth)
            all_pred.append(pred)
        global_cm.add(np.stack(all_truth), np.stack(all_pred))
        assert np.array_equal(global_cm.counts, merged.counts)

    def test_remap_then_confuse_equals_confuse_then_fold(self):
        rng = np.random.default_rng(5)
        mapping = np.array([0, 1, 0, 2, 1, 2])
        cmap = ClassMap(mapping=mapping, target_names=["a", "b", "c"])
        truth = rng.integers(0, 6, size=(12, 12))
        pred = rng.integers(0, 6, size=(12, 12))

        cm_remapped = ConfusionMatrix.empty(3)
        cm_remapped.add(remap_labels(truth, cmap, IGNORE), remap_labels(pred, cmap, IGNORE),
                        ignore_label=IGNORE)

        cm_source = ConfusionMatrix.empty(6)
        cm_source.add(truth, pred)
        folded = np.zeros((3, 3), dtype=np.int64)
        for i in range(6):
            for j in range(6):
                folded[mapping[i], mapping[j]] += cm_source.counts[i, j]
        assert np.array_equal(cm_remapped.counts, folded)


class TestPixelwise:
    def test_all_perfect(self):
        acc = pixelwise_accuracy([(10, 10), (25, 25)])
        assert (acc.mean, acc.median, acc.stddev, acc.pooled) == (1.0, 1.0, 0.0, 1.0)

    def test_two_images(self):
        acc = pixelwise_accuracy([(40, 100), (60, 100)])
        assert acc.mean == pytest.approx(0.5)
        assert acc.median == pytest.approx(0.5)
        assert acc.pooled == pytest.approx(0.5)

    def test_ten_image_fixture(self):
        per_image = [(int(round(a * 100)), 100)
                     for a in (0.5, 0.6, 0.7, 0.8, 0.9, 0.4, 0.3, 0.95, 0.55, 0.65)]
        acc = pixelwise_accuracy(per_image)
        vals = np.array([c / t for c, t in per_image])
        assert acc.mean == pytest.approx(vals.mean(), abs=1e-15)
        assert acc.median == pytest.approx(np.median(vals), abs=1e-15)
        assert acc.stddev == pytest.approx(vals.std(), abs=1e-15)  # population std
        assert acc.pooled == pytest.approx(vals.mean(), abs=1e-15)  # equal sizes

    def test_empty_images_skipped(self):
        acc = pixelwise_accuracy([(5, 10), (0, 0)])
        assert acc.mean == 0.5

    def test_no_pixels_rejected(self):
        with pytest.raises(ValueError):
            pixelwise_accuracy([(0, 0)])


class TestReport:
    def test_text_and_key_values(self):
        cm = ConfusionMatrix(counts=np.array([[8, 2], [4, 6]], dtype=np.int64))
        report = EvalReport(name="convnet", confusion=cm, class_names=["ground", "wall"],
                            pixel=pixelwise_accuracy([(14, 20)]))
        text = report.as_text()
        assert "ground" in text and "wall" in text
        assert "Avg. Class Acc." in text
        assert "convnet.classwise_accuracy=0.7" in text
        kv = report.key_values()
        assert kv["convnet.class.ground"] == pytest.approx(0.8)
        assert kv["convnet.pixel_accuracy_pooled"] == pytest.approx(0.7)
