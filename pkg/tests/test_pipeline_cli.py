import subprocess
import sys

import numpy as np
import pytest

from rgbdseg.classifier import ClassifierParams
from rgbdseg.cli import main
from rgbdseg.config import RunConfig
from rgbdseg.container import read_tensor
from rgbdseg.convnet import FeatureExtractorParams
from rgbdseg.dataset import load_split
from rgbdseg.pipeline import evaluate_dataset, label_frame, label_video
from rgbdseg.preprocess import RgbdFrame
from rgbdseg.synth import SynthConfig, generate_dataset, generate_scene


SMALL = dict(height=48, width=64, prop_extent=(6, 16))


def small_config(**overrides):
    base = dict(n_classes=4, stage_channels=(2, 3, 4), kernel_size=3,
                input_h=48, input_w=64, hidden_size=8,
                superpixel_k=150.0, superpixel_min_size=8)
    base.update(overrides)
    return RunConfig(**base)


def small_params(seed, config):
    rng = np.random.default_rng(seed)
    net_cfg = config.network_config()
    return (FeatureExtractorParams.initialize(rng, net_cfg),
            ClassifierParams.initialize(rng, net_cfg))


def small_frame(seed):
    rgb, depth, _ = generate_scene(np.random.default_rng(seed), SynthConfig(**SMALL))
    return RgbdFrame(rgb=rgb, depth=depth)


class TestLabelFrame:
    def test_routes_and_timings(self):
        config = small_config()
        net, clf = small_params(0, config)
        result = label_frame(small_frame(1), net, clf, config)
        assert result.dist_full.shape == (4, 48, 64)
        assert np.abs(result.dist_full.sum(axis=0) - 1.0).max() < 1e-9
        assert result.labels_convnet.shape == (48, 64)
        assert result.labels_superpixel.shape == (48, 64)
        assert {"pyramid", "features", "classifier", "superpixels", "total"} <= set(result.timings)

    def test_no_superpixels(self):
        config = small_config()
        net, clf = small_params(2, config)
        result = label_frame(small_frame(3), net, clf, config, with_superpixels=False)
        assert result.labels_superpixel is None
        assert result.segmentation is None

    def test_f32_inference_mode(self):
        config = small_config(inference_dtype="f32")
        net, clf = small_params(4, config)
        result = label_frame(small_frame(5), net, clf, config)
        assert np.abs(result.dist_full.sum(axis=0) - 1.0).max() < 1e-6
        # f32 route stays close to the f64 one
        config64 = small_config()
        result64 = label_frame(small_frame(5), net, clf, config64)
        assert np.abs(result.dist_full - result64.dist_full).max() < 1e-3


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    generate_dataset(root, 2, seed=6, split="test", config=SynthConfig(**SMALL))
    return root


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def config_file(workdir):
    path = workdir / "run.cfg"
    path.write_text(
        "n_classes=4\nstage_channels=2,3,4\nkernel_size=3\nhidden_size=8\n"
        "learning_rate=0.05\nepochs=2\nseed=5\nsuperpixel_min_size=8\n")
    return path


@pytest.fixture(scope="module")
def dataset_dir(workdir):
    assert main(["synth", str(workdir / "data"), "--scenes", "2", "--seed", "3"]) == 0
    assert main(["synth", str(workdir / "data"), "--scenes", "1", "--seed", "4",
                 "--split", "test"]) == 0
    return workdir / "data"


@pytest.fixture(scope="module")
def checkpoint(workdir, config_file, dataset_dir):
    out = workdir / "model.rgdt"
    code = main(["train", "--config", str(config_file), str(dataset_dir), str(out)])
    assert code == 0
    assert out.exists()
    assert (workdir / "model.rgdt.log").exists()
    return out


class TestEvaluate:
    def test_deterministic(self, tiny_dataset):
        config = small_config()
        net, clf = small_params(7, config)
        ds = load_split(tiny_dataset, "test")
        r1 = evaluate_dataset(ds, net, clf, config)
        r2 = evaluate_dataset(ds, net, clf, config)
        assert np.array_equal(r1[0].confusion.counts, r2[0].confusion.counts)
        assert np.array_equal(r1[1].confusion.counts, r2[1].confusion.counts)
        assert r1[1].pixel == r2[1].pixel

    def test_workers_match_serial(self, tiny_dataset):
        config = small_config()
        net, clf = small_params(8, config)
        ds = load_split(tiny_dataset, "test")
        serial = evaluate_dataset(ds, net, clf, config)
        config.workers = 2
        parallel = evaluate_dataset(ds, net, clf, config)
        assert np.array_equal(serial[0].confusion.counts, parallel[0].confusion.counts)
        assert np.array_equal(serial[1].confusion.counts, parallel[1].confusion.counts)


class TestLabelVideo:
    def test_temporal_off_equals_frame_by_frame(self):
        config = small_config()
        net, clf = small_params(9, config)
        frames = [small_frame(s) for s in (10, 11, 12)]
        video = label_video(frames, net, clf, config, temporal=False)
        for frame, res in zip(frames, video):
            single = label_frame(frame, net, clf, config)
            assert np.array_equal(res.labels, single.labels_superpixel)

    def test_alpha_zero_equals_temporal_off(self):
        config = small_config(temporal_alpha=0.0)
        net, clf = small_params(13, config)
        frames = [small_frame(s) for s in (14, 15)]
        on = label_video(frames, net, clf, config, temporal=True)
        off = label_video(frames, net, clf, config, temporal=False)
        for a, b in zip(on, off):
            assert np.array_equal(a.labels, b.labels)

    def test_temporal_timings_reported(self):
        config = small_config()
        net, clf = small_params(16, config)
        video = label_video([small_frame(17), small_frame(18)], net, clf, config, temporal=True)
        assert all("temporal" in r.timings for r in video)


class TestCli:
    def test_train_log_contents(self, checkpoint, workdir):
        log = (workdir / "model.rgdt.log").read_text()
        assert "# n_classes=4" in log        # config echoed
        assert "epoch=0 loss=" in log
        assert "epoch=1 loss=" in log

    def test_eval(self, checkpoint, dataset_dir, capsys):
        assert main(["eval", str(checkpoint), str(dataset_dir)]) == 0
        out = capsys.readouterr().out
        assert "== convnet ==" in out
        assert "== superpixels ==" in out
        assert "superpixels.classwise_accuracy=" in out

    def test_eval_deterministic(self, checkpoint, dataset_dir, capsys):
        assert main(["eval", str(checkpoint), str(dataset_dir)]) == 0
        first = capsys.readouterr().out
        assert main(["eval", str(checkpoint), str(dataset_dir)]) == 0
        second = capsys.readouterr().out
        assert first == second

    def test_label_writes_png(self, checkpoint, dataset_dir, workdir, capsys):
        png = workdir / "frame.png"
        code = main(["label", str(checkpoint), str(dataset_dir / "test" / "0000"), str(png)])
        assert code == 0
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_label_video_and_containers(self, checkpoint, dataset_dir, workdir, capsys):
        out_dir = workdir / "video"
        code = main(["label-video", str(checkpoint), str(dataset_dir / "test"), str(out_dir),
                     "--temporal", "on"])
        assert code == 0
        labels = read_tensor(out_dir / "0000.labels.rgdt")
        assert labels.shape == (240, 320)
        assert labels.dtype == np.uint16
        stdout = capsys.readouterr().out
        assert "temporal=" in stdout

    def test_resume_matches_straight_run(self, workdir, config_file, dataset_dir):
        four = workdir / "four.cfg"
        four.write_text(config_file.read_text().replace("epochs=2", "epochs=4"))
        straight = workdir / "straight.rgdt"
        assert main(["train", "--config", str(four), str(dataset_dir), str(straight)]) == 0

        half = workdir / "half.rgdt"
        assert main(["train", "--config", str(config_file), str(dataset_dir), str(half)]) == 0
        # resume from the 2-epoch checkpoint out to 4 epochs
        resumed = workdir / "resumed.rgdt"
        assert main(["train", "--config", str(four), str(dataset_dir), str(resumed),
                     "--resume", str(half)]) == 0
        assert straight.read_bytes() == resumed.read_bytes()

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["train"])  # missing positionals
        assert exc.value.code == 1

    def test_data_error_exit_code(self, checkpoint, tmp_path):
        assert main(["eval", str(checkpoint), str(tmp_path)]) == 2

    def test_bad_checkpoint_exit_code(self, tmp_path, dataset_dir):
        bad = tmp_path / "bad.rgdt"
        bad.write_bytes(b"garbage")
        assert main(["eval", str(bad), str(dataset_dir)]) == 2

    def test_console_script_installed(self):
        out = subprocess.run([sys.executable, "-m", "rgbdseg.cli", "--help"],
                             capture_output=True, text=True)
        assert out.returncode == 0
        assert "label-video" in out.stdout
