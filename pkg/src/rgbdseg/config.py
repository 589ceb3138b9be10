"""Run configuration: one flat key=value text file covering every module.

Unknown keys are rejected; every effective value is echoed back into the
run log via as_text().
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .classifier import TrainConfig
from .container import DataError
from .convnet import NetworkConfig
from .superpixels import SuperpixelConfig
from .temporal import TemporalConfig


@dataclass
class RunConfig:
    n_classes: int = 4
    seed: int = 0
    ignore_label: int = 65535
    use_depth: bool = True
    # architecture
    stage_channels: tuple[int, int, int] = (16, 64, 256)
    kernel_size: int = 7
    n_scales: int = 3
    input_h: int = 240
    input_w: int = 320
    hidden_size: int = 1024
    # preprocessing
    lcn_window: int = 15
    lcn_eps: float = 1e-4
    # training
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_pixels: int = 1
    # superpixels
    superpixel_k: float = 300.0
    superpixel_min_size: int = 20
    superpixel_sigma: float = 0.8
    # temporal smoothing
    temporal_alpha: float = 0.7
    temporal_min_overlap: float = 0.3
    # evaluation / runtime
    class_map: str = "identity"
    palette: str = "default"
    workers: int = 1
    inference_dtype: str = "f64"

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(
            n_classes=self.n_classes,
            in_channels=4 if self.use_depth else 3,
            stage_channels=tuple(self.stage_channels),
            kernel_size=self.kernel_size,
            n_scales=self.n_scales,
            input_hw=(self.input_h, self.input_w),
            hidden_size=self.hidden_size,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(n_classes=self.n_classes, learning_rate=self.learning_rate,
                           epochs=self.epochs, seed=self.seed, ignore_label=self.ignore_label,
                           batch_pixels=self.batch_pixels)

    def superpixel_config(self) -> SuperpixelConfig:
        return SuperpixelConfig(k=self.superpixel_k, min_size=self.superpixel_min_size,
                                sigma=self.superpixel_sigma)

    def temporal_config(self) -> TemporalConfig:
        return TemporalConfig(alpha=self.temporal_alpha, min_overlap=self.temporal_min_overlap)

    def as_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, raw: str, default) -> object:
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.split(","))
        return raw
    except ValueError as exc:
        raise DataError(f"config key {name}: cannot parse {raw!r}") from exc


def parse_run_config_text(text: str, where: str = "<config>") -> RunConfig:
    """Parse key=value lines; blank lines and # comments are allowed."""
    config = RunConfig()
    known = {f.name: getattr(config, f.name) for f in fields(config)}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{where}:{lineno}: expected key=value")
        name, raw = line.split("=", 1)
        name, raw = name.strip(), raw.strip()
        if name not in known:
            raise DataError(f"{where}:{lineno}: unknown config key {name!r}")
        if name in seen:
            raise DataError(f"{where}:{lineno}: duplicate config key {name!r}")
        seen.add(name)
        setattr(config, name, _coerce(name, raw, known[name]))
    return config


def parse_run_config(path: str | Path) -> RunConfig:
    return parse_run_config_text(Path(path).read_text(), where=str(path))
