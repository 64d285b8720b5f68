"""Scheme-gated residual backbone with weight sharing.

A single set of backbone weights plus per-block (or per-stage shared)
attention parameters is trained once under random gating masks; any
connection scheme can then be evaluated as a subnetwork without retraining.
Also provides parameter/FLOP accounting and wall-clock timing increments.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .attention import (SEModule, SEParams, SGEModule, SGEParams,
                        se_param_count, sge_param_count)
from .data import Dataset
from .nncore import (Conv2d, Dense, GlobalAvgPool, OptimizerConfig, ReLU,
                     Sequential, sgd_momentum_step, softmax_cross_entropy_batch)
from .rngstreams import named_rng


class ConnectionScheme:
    """Binary gate vector over the backbone's blocks.

    Serializes to/from a plain digit string ("0110..."); spaces in the input
    string are ignored so per-stage groupings parse too.
    """

    __slots__ = ("bits", "stage_blocks")

    def __init__(self, bits, stage_blocks=None) -> None:
        arr = np.asarray(bits, dtype=np.int64).copy()
        if arr.ndim != 1 or not np.isin(arr, (0, 1)).all():
            raise ValueError("scheme bits must form a flat 0/1 vector")
        if stage_blocks is not None:
            stage_blocks = tuple(int(b) for b in stage_blocks)
            if sum(stage_blocks) != arr.size:
                raise ValueError(
                    f"stage blocks {stage_blocks} do not sum to {arr.size} bits"
                )
        arr.setflags(write=False)
        self.bits = arr
        self.stage_blocks = stage_blocks

    @classmethod
    def from_string(cls, text: str, stage_blocks=None) -> "ConnectionScheme":
        digits = text.replace(" ", "")
        if not digits or set(digits) - {"0", "1"}:
            raise ValueError(f"not a 0/1 digit string: {text!r}")
        return cls([int(ch) for ch in digits], stage_blocks)

    @classmethod
    def zeros(cls, m: int, stage_blocks=None) -> "ConnectionScheme":
        return cls(np.zeros(m, dtype=np.int64), stage_blocks)

    @classmethod
    def ones(cls, m: int, stage_blocks=None) -> "ConnectionScheme":
        return cls(np.ones(m, dtype=np.int64), stage_blocks)

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @property
    def ones_count(self) -> int:
        return int(self.bits.sum())

    @property
    def ratio(self) -> float:
        return self.ones_count / len(self)

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other) -> bool:
        return isinstance(other, ConnectionScheme) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __repr__(self) -> str:
        return f"ConnectionScheme({self.to_string()!r})"


@dataclass(frozen=True)
class BackboneConfig:
    """Stage layout plus attention kind and sharing mode."""

    stages: tuple  # ((blocks, channels), ...)
    input_shape: tuple  # (C, H, W)
    classes: int
    sam: str = "se"  # "se" | "sge"
    sharing: str = "per-block"  # "per-block" | "per-stage"
    reduction: int = 4
    groups: int = 2

    def __post_init__(self) -> None:
        if not self.stages or any(int(b) < 1 for b, _ in self.stages):
            raise ValueError("every stage needs at least one block")
        if self.sam not in ("se", "sge"):
            raise ValueError(f"unknown attention kind {self.sam!r}")
        if self.sharing not in ("per-block", "per-stage"):
            raise ValueError(f"unknown sharing mode {self.sharing!r}")
        if self.classes < 2:
            raise ValueError("need at least two classes")

    @property
    def total_blocks(self) -> int:
        return sum(int(b) for b, _ in self.stages)

    @property
    def stage_blocks(self) -> tuple:
        return tuple(int(b) for b, _ in self.stages)

    @property
    def stage_channels(self) -> tuple:
        return tuple(int(c) for _, c in self.stages)

    def stage_spatial(self) -> list:
        """Spatial size per stage: the stem preserves it, each stride-2
        transition between stages halves it (ceil)."""
        _, h, w = self.input_shape
        sizes = [(h, w)]
        for _ in range(len(self.stages) - 1):
            h = (h - 1) // 2 + 1
            w = (w - 1) // 2 + 1
            sizes.append((h, w))
        return sizes

    def sam_param_count(self, channels: int) -> int:
        if self.sam == "se":
            return se_param_count(channels, self.reduction)
        return sge_param_count(channels, self.groups)


class ResidualBlock:
    """x + f(x) with f = conv(relu(conv(x))); optional gated attention mask."""

    def __init__(self, channels: int, rng: np.random.Generator) -> None:
        self.conv1 = Conv2d(channels, channels, 3, 1, 1, rng)
        self.relu = ReLU()
        self.conv2 = Conv2d(channels, channels, 3, 1, 1, rng)
        self.sam = None  # attached by the supernet (may be shared)
        self._cache = None

    def forward(self, x, connected: int, train: bool = False):
        f = self.conv2.forward(self.relu.forward(self.conv1.forward(x, train), train), train)
        if connected:
            mask = self.sam.forward(f, train)
            mfull = mask[:, :, None, None] if mask.ndim == 2 else mask
            out = x + mfull * f
        else:
            mask = None
            out = x + f
        if train:
            self._cache = (f, mask)
        return out

    def backward(self, dout):
        f, mask = self._cache
        if mask is not None:
            mfull = mask[:, :, None, None] if mask.ndim == 2 else mask
            dmask_full = dout * f
            dmask = dmask_full.sum(axis=(2, 3)) if mask.ndim == 2 else dmask_full
            df = mfull * dout + self.sam.backward(dmask)
        else:
            df = dout
        dx = self.conv1.backward(self.relu.backward(self.conv2.backward(df)))
        return dout + dx

    def conv_parameters(self):
        return self.conv1.parameters() + self.conv2.parameters()


class SupernetState:
    """Backbone plus attention storage for every block, trained under masks."""

    def __init__(self, config: BackboneConfig, seed: int) -> None:
        self.config = config
        self.seed = seed
        init_rng = named_rng(seed, "supernet-init")
        self.mask_rng = named_rng(seed, "supernet-mask")
        self.data_rng = named_rng(seed, "supernet-data")
        c_in = config.input_shape[0]
        channels = config.stage_channels
        self.stem = Sequential(Conv2d(c_in, channels[0], 3, 1, 1, init_rng), ReLU())
        self.transitions = []
        self.blocks = []
        self.block_stage = []
        for si, (nblocks, ch) in enumerate(config.stages):
            if si > 0:
                self.transitions.append(
                    Sequential(Conv2d(channels[si - 1], ch, 3, 2, 1, init_rng), ReLU()))
            for _ in range(int(nblocks)):
                self.blocks.append(ResidualBlock(ch, init_rng))
                self.block_stage.append(si)
        if config.sharing == "per-stage":
            stage_sams = [self._make_sam(ch, init_rng) for ch in channels]
            for b, block in enumerate(self.blocks):
                block.sam = stage_sams[self.block_stage[b]]
            self.stage_sams = stage_sams
        else:
            for b, block in enumerate(self.blocks):
                block.sam = self._make_sam(config.stage_channels[self.block_stage[b]], init_rng)
            self.stage_sams = None
        self.pool = GlobalAvgPool()
        self.fc = Dense(channels[-1], config.classes, init_rng)
        self.step_count = 0
        self.pretrained = False

    def _make_sam(self, channels: int, rng: np.random.Generator):
        if self.config.sam == "se":
            return SEModule(SEParams.init(channels, self.config.reduction, rng))
        return SGEModule(channels, SGEParams.init(channels, self.config.groups))

    # -- forward / backward ------------------------------------------------

    @property
    def total_blocks(self) -> int:
        return len(self.blocks)

    def _check_scheme(self, scheme: ConnectionScheme) -> None:
        if len(scheme) != self.total_blocks:
            raise ValueError(
                f"scheme length {len(scheme)} does not match {self.total_blocks} blocks")

    def forward(self, x, scheme: ConnectionScheme, train: bool = False):
        self._check_scheme(scheme)
        h = self.stem.forward(x, train)
        bi = 0
        for si, (nblocks, _) in enumerate(self.config.stages):
            if si > 0:
                h = self.transitions[si - 1].forward(h, train)
            for _ in range(int(nblocks)):
                h = self.blocks[bi].forward(h, int(scheme.bits[bi]), train)
                bi += 1
        return self.fc.forward(self.pool.forward(h, train), train)

    def backward(self, dlogits):
        d = self.pool.backward(self.fc.backward(dlogits))
        bi = self.total_blocks
        for si in range(len(self.config.stages) - 1, -1, -1):
            nblocks = int(self.config.stages[si][0])
            for _ in range(nblocks):
                bi -= 1
                d = self.blocks[bi].backward(d)
            if si > 0:
                d = self.transitions[si - 1].backward(d)
        return self.stem.backward(d)

    def loss_and_grads(self, x, y, scheme: ConnectionScheme) -> float:
        logits = self.forward(x, scheme, train=True)
        loss, dlogits = softmax_cross_entropy_batch(logits, y)
        self.backward(dlogits)
        return loss

    def train_step(self, x, y, scheme: ConnectionScheme, opt: OptimizerConfig,
                   clip_norm: float | None = 10.0) -> float:
        # bounded loss gradients still amplify through a deep no-norm residual
        # tower; the global-norm clip keeps rare confident-wrong batches from
        # blowing up training
        loss = self.loss_and_grads(x, y, scheme)
        active = self.active_parameters(scheme)
        if clip_norm is not None:
            total = np.sqrt(sum(float((p.grad ** 2).sum()) for p in active))
            if total > clip_norm:
                scale = clip_norm / total
                for p in active:
                    p.grad *= scale
        sgd_momentum_step(active, opt)
        self.step_count += 1
        return loss

    # -- parameter access ----------------------------------------------------

    def backbone_parameters(self):
        out = list(self.stem.parameters())
        for t in self.transitions:
            out.extend(t.parameters())
        for b in self.blocks:
            out.extend(b.conv_parameters())
        out.extend(self.fc.parameters())
        return out

    def sam_modules(self):
        """Distinct attention modules, in block order (deduplicated if shared)."""
        seen, out = set(), []
        for b in self.blocks:
            if id(b.sam) not in seen:
                seen.add(id(b.sam))
                out.append(b.sam)
        return out

    def active_parameters(self, scheme: ConnectionScheme):
        out = self.backbone_parameters()
        seen = set()
        for b, block in enumerate(self.blocks):
            if scheme.bits[b] and id(block.sam) not in seen:
                seen.add(id(block.sam))
                out.extend(block.sam.parameters())
        return out

    def all_parameters(self):
        out = self.backbone_parameters()
        for sam in self.sam_modules():
            out.extend(sam.parameters())
        return out

    def named_parameters(self):
        """Stable (name, Parameter) pairs for checkpointing."""
        pairs = []
        stem_conv = self.stem.layers[0]
        pairs += [("stem.conv.kernel", stem_conv.kernel), ("stem.conv.bias", stem_conv.bias)]
        for ti, t in enumerate(self.transitions):
            conv = t.layers[0]
            pairs += [(f"transition{ti}.conv.kernel", conv.kernel),
                      (f"transition{ti}.conv.bias", conv.bias)]
        for bi, b in enumerate(self.blocks):
            pairs += [(f"block{bi}.conv1.kernel", b.conv1.kernel),
                      (f"block{bi}.conv1.bias", b.conv1.bias),
                      (f"block{bi}.conv2.kernel", b.conv2.kernel),
                      (f"block{bi}.conv2.bias", b.conv2.bias)]
        if self.config.sharing == "per-stage":
            for si, sam in enumerate(self.stage_sams):
                pairs += _sam_named(f"stage{si}.sam", sam)
        else:
            for bi, b in enumerate(self.blocks):
                pairs += _sam_named(f"block{bi}.sam", b.sam)
        pairs += [("fc.weight", self.fc.weight), ("fc.bias", self.fc.bias)]
        return pairs


def _sam_named(prefix: str, sam):
    if isinstance(sam, SEModule):
        p = sam.params
        return [(f"{prefix}.w1", p.w1), (f"{prefix}.b1", p.b1),
                (f"{prefix}.w2", p.w2), (f"{prefix}.b2", p.b2)]
    p = sam.params
    return [(f"{prefix}.gamma", p.gamma), (f"{prefix}.beta", p.beta)]


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def forward_with_scheme(net: SupernetState, x, scheme: ConnectionScheme):
    """Logits for a [C,H,W] sample or an [N,C,H,W] batch under a scheme."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return net.forward(x[None], scheme, train=False)[0]
    return net.forward(x, scheme, train=False)


def sample_bernoulli_scheme(beta: float, m: int, rng: np.random.Generator,
                            stage_blocks=None) -> ConnectionScheme:
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0,1]")
    bits = (rng.random(m) < beta).astype(np.int64)
    return ConnectionScheme(bits, stage_blocks)


def pretrain_supernet(net: SupernetState, train_set: Dataset, beta: float, steps: int,
                      batch_size: int = 16,
                      opt: OptimizerConfig | None = None,
                      lr_drop_step: int | None = None,
                      lr_drop_factor: float = 0.1) -> SupernetState:
    """Masked pre-training: every step gates a fresh random scheme.

    Attention parameters of blocks disconnected in a step are untouched by
    that step (no gradient, no momentum drift, no decay).
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    opt = opt or OptimizerConfig(0.1, 0.9, 1e-4)
    m = net.total_blocks
    n = len(train_set)
    for step in range(int(steps)):
        scheme = sample_bernoulli_scheme(beta, m, net.mask_rng, net.config.stage_blocks)
        idx = net.data_rng.integers(0, n, size=batch_size)
        lr = opt.learning_rate
        if lr_drop_step is not None and step >= lr_drop_step:
            lr = opt.learning_rate * lr_drop_factor
        net.train_step(train_set.images[idx], train_set.labels[idx], scheme,
                       OptimizerConfig(lr, opt.momentum, opt.weight_decay))
    if steps > 0:
        net.pretrained = True
    return net


def train_with_scheme(net: SupernetState, train_set: Dataset, scheme: ConnectionScheme,
                      steps: int, batch_size: int = 16,
                      opt: OptimizerConfig | None = None,
                      lr_drop_step: int | None = None,
                      lr_drop_factor: float = 0.1) -> SupernetState:
    """Train under one fixed scheme (standalone training of a subnetwork)."""
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    opt = opt or OptimizerConfig(0.1, 0.9, 1e-4)
    n = len(train_set)
    for step in range(int(steps)):
        idx = net.data_rng.integers(0, n, size=batch_size)
        lr = opt.learning_rate
        if lr_drop_step is not None and step >= lr_drop_step:
            lr = opt.learning_rate * lr_drop_factor
        net.train_step(train_set.images[idx], train_set.labels[idx], scheme,
                       OptimizerConfig(lr, opt.momentum, opt.weight_decay))
    return net


def evaluate_scheme(net: SupernetState, scheme: ConnectionScheme, val_set: Dataset) -> float:
    """Validation accuracy of the subnetwork gated by `scheme` (deterministic)."""
    if len(val_set) == 0:
        raise ValueError("validation set is empty")
    logits = net.forward(val_set.images, scheme, train=False)
    return float((logits.argmax(axis=1) == val_set.labels).mean())


def count_params(config: BackboneConfig, scheme: ConnectionScheme) -> tuple[int, int]:
    """(backbone parameter count, extra attention parameters under `scheme`)."""
    c_in = config.input_shape[0]
    channels = config.stage_channels
    backbone = channels[0] * c_in * 9 + channels[0]
    for si, (nblocks, ch) in enumerate(config.stages):
        if si > 0:
            backbone += ch * channels[si - 1] * 9 + ch
        backbone += int(nblocks) * 2 * (ch * ch * 9 + ch)
    backbone += config.classes * channels[-1] + config.classes
    extra = 0
    if config.sharing == "per-stage":
        bi = 0
        for si, (nblocks, ch) in enumerate(config.stages):
            bits = scheme.bits[bi:bi + int(nblocks)]
            if bits.any():
                extra += config.sam_param_count(ch)
            bi += int(nblocks)
    else:
        bi = 0
        for nblocks, ch in config.stages:
            for _ in range(int(nblocks)):
                if scheme.bits[bi]:
                    extra += config.sam_param_count(ch)
                bi += 1
    return backbone, extra


def base_flops(config: BackboneConfig) -> int:
    """Backbone multiply count (conv/dense MACs; pooling additions excluded)."""
    c_in, h, w = config.input_shape
    channels = config.stage_channels
    spatial = config.stage_spatial()
    total = h * w * channels[0] * c_in * 9
    for si, (nblocks, ch) in enumerate(config.stages):
        sh, sw = spatial[si]
        if si > 0:
            total += sh * sw * ch * channels[si - 1] * 9
        total += int(nblocks) * 2 * sh * sw * ch * ch * 9
    total += config.classes * channels[-1]
    return total


def extra_flops(config: BackboneConfig, scheme: ConnectionScheme) -> int:
    """Extra ops for connected attention modules.

    Channel-squeeze: 2*C*(C//r) + C//r + C MACs plus C*H*W recalibration
    multiplies per connected block. Group-wise: saliency dots C*H*W, scale
    ops 2*H*W per group, recalibration C*H*W.
    """
    total = 0
    spatial = config.stage_spatial()
    bi = 0
    for si, (nblocks, ch) in enumerate(config.stages):
        sh, sw = spatial[si]
        for _ in range(int(nblocks)):
            if scheme.bits[bi]:
                if config.sam == "se":
                    hidden = ch // config.reduction
                    total += 2 * ch * hidden + hidden + ch + ch * sh * sw
                else:
                    ngroups = sge_param_count(ch, config.groups) // 2
                    total += ch * sh * sw + 2 * sh * sw * ngroups + ch * sh * sw
            bi += 1
    return total


def flop_increment_pct(config: BackboneConfig, scheme: ConnectionScheme) -> float:
    return 100.0 * extra_flops(config, scheme) / base_flops(config)


def inference_time_increment(net: SupernetState, scheme: ConnectionScheme,
                             probe_batch, repetitions: int) -> float:
    """Wall-clock increment vs the gate-free backbone, medians over runs.

    Environment-dependent; the analytic FLOP increment is the
    contract-bearing number.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if scheme.ones_count == 0:
        return 0.0
    zeros = ConnectionScheme.zeros(net.total_blocks, net.config.stage_blocks)

    def _median_time(s):
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            net.forward(probe_batch, s, train=False)
            times.append(time.perf_counter() - t0)
        return float(np.median(times))

    t_scheme = _median_time(scheme)
    t_base = _median_time(zeros)
    return 100.0 * (t_scheme - t_base) / t_base
