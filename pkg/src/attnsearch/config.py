"""Experiment configuration.

One JSON file per experiment. Files are merged over pinned defaults,
validated up front, and hashed (sha256 of the canonical resolved form,
output directory excluded) into a digest that tags every output file so
cross-file joins can be checked. The environment variable ATTNSEARCH_SEED
may override the seed, and only the seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

from .controller import ControllerState
from .data import Dataset, load_csv, make_blob_dataset, make_digits_dataset, split_train_val
from .nncore import OptimizerConfig
from .rewards import RewardConfig, RNDPair
from .rngstreams import named_rng
from .supernet import BackboneConfig, SupernetState
from .search import PeakedLandscape, SyntheticLandscape

ENV_SEED = "ATTNSEARCH_SEED"


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "blobs"  # "blobs" | "digits" | "csv"
    classes: int = 4
    per_class: int = 80
    shape: tuple = (1, 8, 8)
    noise: float = 0.12
    val_fraction: float = 0.2
    blobs_per_class: int = 2
    csv_path: str | None = None


@dataclass(frozen=True)
class SupernetSpec:
    beta: float = 0.5
    steps: int = 400
    batch_size: int = 16
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_drop_step: int | None = 300
    lr_drop_factor: float = 0.1


@dataclass(frozen=True)
class ControllerSpec:
    hidden: int = 64
    learning_rate: float = 5e-2
    momentum: float = 0.9
    ppo_period: int = 10
    buffer_capacity: int = 100
    clip_ratios: bool = True


@dataclass(frozen=True)
class RewardSpec:
    lambda_spa: float = 0.5
    lambda_val: float = 1.0
    lambda_rnd: float = 0.1
    normalize_rnd: bool = False


@dataclass(frozen=True)
class SearchSpec:
    iterations: int = 300
    evaluations: int | None = None
    wallclock_seconds: float | None = None


@dataclass(frozen=True)
class StudySpec:
    ratios: tuple = (0.25, 0.5, 0.75)
    samples_per_ratio: int = 20


@dataclass(frozen=True)
class TheorySpec:
    d: int = 8
    epsilon: float = 0.5
    delta: float = 0.1
    trials: int = 2000
    probes: int = 100
    dof_convention: str = "corrected"  # "literal" | "corrected" | "both"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "runs/default"
    backbone: BackboneConfig = field(default_factory=lambda: BackboneConfig(
        stages=((3, 8), (3, 16), (2, 32)), input_shape=(1, 8, 8), classes=4))
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    supernet: SupernetSpec = field(default_factory=SupernetSpec)
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    rewards: RewardSpec = field(default_factory=RewardSpec)
    search: SearchSpec = field(default_factory=SearchSpec)
    study: StudySpec = field(default_factory=StudySpec)
    theory: TheorySpec = field(default_factory=TheorySpec)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in raw:
                continue
            value = raw[f.name]
            if f.name == "backbone":
                value = _backbone_from_dict(value)
            elif f.name in _SECTION_TYPES:
                value = _section_from_dict(_SECTION_TYPES[f.name], value, f.name)
            kwargs[f.name] = value
        cfg = cls(**kwargs)
        env_seed = os.environ.get(ENV_SEED)
        if env_seed is not None:
            cfg = dataclasses.replace(cfg, seed=int(env_seed))
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    # -- identity -----------------------------------------------------------

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["backbone"] = dataclasses.asdict(self.backbone)
        return _listify(out)

    def digest(self) -> str:
        payload = self.to_dict()
        payload.pop("output_dir")  # relocating outputs keeps the identity
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    # -- builders -----------------------------------------------------------

    def rng(self, stream: str):
        return named_rng(self.seed, stream)

    def build_dataset(self) -> tuple[Dataset, Dataset]:
        spec = self.dataset
        rng = self.rng("dataset")
        if spec.kind == "blobs":
            full = make_blob_dataset(spec.classes, spec.per_class, tuple(spec.shape),
                                     spec.noise, rng, spec.blobs_per_class)
        elif spec.kind == "digits":
            full = make_digits_dataset(spec.classes, spec.per_class, spec.noise, rng)
        elif spec.kind == "csv":
            if not spec.csv_path:
                raise ValueError("dataset.kind 'csv' needs dataset.csv_path")
            full = load_csv(spec.csv_path, tuple(spec.shape))
        else:
            raise ValueError(f"unknown dataset kind {spec.kind!r}")
        if full.sample_shape != tuple(self.backbone.input_shape):
            raise ValueError(
                f"dataset shape {full.sample_shape} does not match backbone "
                f"input {tuple(self.backbone.input_shape)}")
        return split_train_val(full, spec.val_fraction, rng)

    def build_supernet(self) -> SupernetState:
        return SupernetState(self.backbone, self.seed)

    def supernet_optimizer(self) -> OptimizerConfig:
        s = self.supernet
        return OptimizerConfig(s.learning_rate, s.momentum, s.weight_decay)

    def build_controller(self) -> ControllerState:
        c = self.controller
        return ControllerState(self.backbone.total_blocks, hidden=c.hidden,
                               lr=c.learning_rate, momentum=c.momentum,
                               ppo_period=c.ppo_period,
                               buffer_capacity=c.buffer_capacity,
                               clip_ratios=c.clip_ratios,
                               rng=self.rng("controller-init"))

    def build_rnd_pair(self) -> RNDPair | None:
        if self.rewards.lambda_rnd <= 0:
            return None
        return RNDPair(self.backbone.total_blocks, self.rng("rnd-init"))

    def reward_config(self) -> RewardConfig:
        r = self.rewards
        return RewardConfig(r.lambda_spa, r.lambda_val, r.lambda_rnd, r.normalize_rnd)

    def build_landscape(self, peaked: bool = False):
        m = self.backbone.total_blocks
        if peaked:
            return PeakedLandscape(m, self.seed)
        return SyntheticLandscape(m, self.seed)


_SECTION_TYPES = {
    "dataset": DatasetSpec,
    "supernet": SupernetSpec,
    "controller": ControllerSpec,
    "rewards": RewardSpec,
    "search": SearchSpec,
    "study": StudySpec,
    "theory": TheorySpec,
}


def _section_from_dict(cls, raw: dict, section: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown keys in config section {section!r}: {sorted(unknown)}")
    fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    return cls(**fixed)


def _backbone_from_dict(raw: dict) -> BackboneConfig:
    known = {f.name for f in dataclasses.fields(BackboneConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown keys in config section 'backbone': {sorted(unknown)}")
    fixed = dict(raw)
    if "stages" in fixed:
        fixed["stages"] = tuple(tuple(s) for s in fixed["stages"])
    if "input_shape" in fixed:
        fixed["input_shape"] = tuple(fixed["input_shape"])
    return BackboneConfig(**fixed)


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, tuple):
        return [_listify(v) for v in obj]
    return obj
