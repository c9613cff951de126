"""Pyramid encoder, coarse-to-fine joint decoders and the context synthesis blend."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .warp import CropRecord, backward_warp, build_pyramid, crop_back, pad_to_multiple

ENCODER_WIDTHS = (48, 96, 144, 192)
PYRAMID_LEVELS = 4
PRELU_INIT = 0.25
# output heads start small so an untrained net is close to the linear blend
HEAD_INIT_GAIN = 0.01


@dataclass(frozen=True)
class ModelConfig:
    hidden_width: int = 288
    groups: int = 3
    ablate_pmr: bool = False
    ablate_pcr: bool = False
    ablate_csm: bool = False
    conv_bias: bool = True

    def __post_init__(self):
        if self.hidden_width < 1 or self.groups < 1 or self.hidden_width % self.groups:
            raise ValueError(
                f"hidden_width={self.hidden_width} must be a positive multiple of groups={self.groups}"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @property
    def output_channels(self) -> int:
        # flows (2+2) then mask+residual, or a direct 3-channel frame without the blend
        return 7 if self.ablate_csm else 8

    def step_input_channels(self, level: int) -> int:
        width = ENCODER_WIDTHS[level - 1]
        extra = 0
        if not self.ablate_pmr:
            extra += 4 if self.ablate_csm else 8
        if not self.ablate_pcr:
            extra += 3
        return 2 * width + extra


@dataclass
class LevelState:
    """Decoder outputs at one pyramid level (resolution 1/2^level)."""

    level: int
    flow_t0: Tensor
    flow_t1: Tensor
    mask: Tensor | None
    residual: Tensor | None
    frame: Tensor


@dataclass
class ForwardResult:
    frame: Tensor
    states: dict[int, LevelState]
    pyramid0: list[Tensor]
    pyramid1: list[Tensor]
    crop: CropRecord = field(repr=False)


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: float) -> np.ndarray:
    bound = np.sqrt(6.0 / ((1.0 + PRELU_INIT**2) * fan_in))
    return rng.uniform(-bound, bound, size=shape)


class Conv:
    def __init__(self, in_ch, out_ch, kernel=3, stride=1, padding=1, groups=1, bias=True, transposed=False,
                 gain=1.0):
        self.in_ch, self.out_ch = in_ch, out_ch
        self.gain = gain
        self.kernel, self.stride, self.padding, self.groups = kernel, stride, padding, groups
        self.transposed = transposed
        if transposed:
            self.weight_shape = (in_ch, out_ch // groups, kernel, kernel)
            self.fan_in = in_ch // groups * kernel * kernel / stride**2
        else:
            self.weight_shape = (out_ch, in_ch // groups, kernel, kernel)
            self.fan_in = in_ch // groups * kernel * kernel
        self.weight = Tensor(np.zeros(self.weight_shape), requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch), requires_grad=True) if bias else None

    def init(self, rng: np.random.Generator) -> None:
        self.weight.data[...] = self.gain * _kaiming_uniform(rng, self.weight_shape, self.fan_in)
        if self.bias is not None:
            self.bias.data[...] = 0.0

    def params(self) -> Iterator[tuple[str, Tensor]]:
        yield "weight", self.weight
        if self.bias is not None:
            yield "bias", self.bias

    def __call__(self, x: Tensor) -> Tensor:
        op = T.conv_transpose2d if self.transposed else T.conv2d
        return op(x, self.weight, self.bias, stride=self.stride, padding=self.padding, groups=self.groups)


class PReLU:
    def __init__(self, channels: int):
        self.slope = Tensor(np.full(channels, PRELU_INIT), requires_grad=True)

    def init(self, rng: np.random.Generator) -> None:
        self.slope.data[...] = PRELU_INIT

    def params(self) -> Iterator[tuple[str, Tensor]]:
        yield "slope", self.slope

    def __call__(self, x: Tensor) -> Tensor:
        return T.prelu(x, self.slope)


class Sequential:
    """Ordered named sub-layers; parameter names are ``<layer>.<param>``."""

    def __init__(self, layers: list[tuple[str, object]]):
        self.layers = layers

    def params(self) -> Iterator[tuple[str, Tensor]]:
        for name, layer in self.layers:
            for pname, p in layer.params():
                yield f"{name}.{pname}", p

    def init(self, rng: np.random.Generator) -> None:
        for _, layer in self.layers:
            layer.init(rng)


class EncoderBlock(Sequential):
    def __init__(self, in_ch: int, out_ch: int, bias: bool):
        super().__init__(
            [
                ("conv1", Conv(in_ch, out_ch, stride=2, bias=bias)),
                ("prelu1", PReLU(out_ch)),
                ("conv2", Conv(out_ch, out_ch, bias=bias)),
                ("prelu2", PReLU(out_ch)),
            ]
        )

    def __call__(self, x: Tensor) -> Tensor:
        for _, layer in self.layers:
            x = layer(x)
        return x


class Decoder(Sequential):
    """Dense conv, three grouped conv + shuffle, then a 2x transposed conv."""

    def __init__(self, in_ch: int, hidden: int, groups: int, out_ch: int, bias: bool):
        self.groups = groups
        layers: list[tuple[str, object]] = [("conv0", Conv(in_ch, hidden, bias=bias)), ("prelu0", PReLU(hidden))]
        for i in (1, 2, 3):
            layers.append((f"gconv{i}", Conv(hidden, hidden, groups=groups, bias=bias)))
            layers.append((f"prelu{i}", PReLU(hidden)))
        layers.append(("convt", Conv(hidden, out_ch, kernel=4, stride=2, padding=1, bias=bias, transposed=True,
                                           gain=HEAD_INIT_GAIN)))
        super().__init__(layers)
        self.in_ch = in_ch

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.in_ch:
            raise ValueError(f"decoder expects {self.in_ch} input channels, got {x.shape[1]}")
        for name, layer in self.layers:
            x = layer(x)
            if name.startswith("gconv"):
                x = T.channel_shuffle(x, self.groups)
        return x


def csm_apply(mask: Tensor, residual: Tensor, flow_t0: Tensor, flow_t1: Tensor,
              image0: Tensor, image1: Tensor) -> Tensor:
    """Blend the two backward-warped frames by ``mask`` and add ``residual``."""
    if mask.shape[1] != 1 or residual.shape != image0.shape or image0.shape != image1.shape:
        raise ValueError(
            f"csm_apply shape mismatch: mask {mask.shape}, residual {residual.shape}, "
            f"images {image0.shape} / {image1.shape}"
        )
    warped0 = backward_warp(image0, flow_t0)
    warped1 = backward_warp(image1, flow_t1)
    return T.add(T.blend(mask, warped0, warped1), residual)


class PMCRNet:
    """Frame interpolation network predicting the t=0.5 frame between two inputs."""

    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        self.config = config or ModelConfig()
        cfg = self.config
        widths = (3,) + ENCODER_WIDTHS
        self.encoder = [EncoderBlock(widths[i], widths[i + 1], cfg.conv_bias) for i in range(4)]
        self.decoders = {4: Decoder(2 * ENCODER_WIDTHS[3], cfg.hidden_width, cfg.groups, cfg.output_channels,
                                    cfg.conv_bias)}
        for level in (3, 2, 1):
            self.decoders[level] = Decoder(cfg.step_input_channels(level), cfg.hidden_width, cfg.groups,
                                           cfg.output_channels, cfg.conv_bias)
        self.initialize(seed)

    def _modules(self) -> Iterator[tuple[str, Sequential]]:
        for i, block in enumerate(self.encoder, start=1):
            yield f"encoder.block{i}", block
        for level in (4, 3, 2, 1):
            yield f"decoder{level}", self.decoders[level]

    def initialize(self, seed: int) -> None:
        rng = np.random.Generator(np.random.Philox(seed))
        for _, module in self._modules():
            module.init(rng)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.{name}", p) for prefix, module in self._modules() for name, p in module.params()]

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def param_count(self) -> int:
        return int(np.sum([p.size for p in self.parameters()]))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        for name, p in params:
            if name not in state:
                raise ValueError(f"missing tensor {name}")
            if state[name].shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: stored {state[name].shape}, model {p.shape}")
        for name, p in params:
            p.data = np.array(state[name], dtype=p.dtype)

    def set_parameters(self, tensors: list[Tensor]) -> None:
        """Rebind every parameter slot (named_parameters order) to the given tensors."""
        slots = [(layer, pname) for _, module in self._modules() for _, layer in module.layers
                 for pname, _ in layer.params()]
        if len(slots) != len(tensors):
            raise ValueError(f"expected {len(slots)} tensors, got {len(tensors)}")
        for (layer, pname), t in zip(slots, tensors):
            setattr(layer, pname, t)

    def astype(self, dtype) -> "PMCRNet":
        for _, p in self.named_parameters():
            p.data = p.data.astype(dtype)
        return self

    # -- forward pieces ---------------------------------------------------

    def encode(self, image: Tensor) -> list[Tensor]:
        h, w = image.shape[2:]
        if image.ndim != 4 or image.shape[1] != 3 or h % 16 or w % 16:
            raise ValueError(f"encode needs N x 3 x H x W with H, W multiples of 16, got {image.shape}")
        features, x = [], image
        for block in self.encoder:
            x = block(x)
            features.append(x)
        return features

    def _outputs(self, raw: Tensor, level: int, image0: Tensor, image1: Tensor) -> LevelState:
        if self.config.ablate_csm:
            flow_t0, flow_t1, frame = T.split(raw, (2, 2, 3))
            return LevelState(level, flow_t0, flow_t1, None, None, frame)
        flow_t0, flow_t1, logit, residual = T.split(raw, (2, 2, 1, 3))
        mask = T.sigmoid(logit)
        frame = csm_apply(mask, residual, flow_t0, flow_t1, image0, image1)
        return LevelState(level, flow_t0, flow_t1, mask, residual, frame)

    def decode_bottom(self, feat0: Tensor, feat1: Tensor, image0: Tensor, image1: Tensor) -> LevelState:
        """Level-4 features to the level-3 state; ``image*`` are the level-3 frames."""
        expected = ENCODER_WIDTHS[3]
        if feat0.shape != feat1.shape or feat0.shape[1] != expected:
            raise ValueError(f"decode_bottom expects two {expected}-channel maps, got {feat0.shape}, {feat1.shape}")
        raw = self.decoders[4](T.concat([feat0, feat1]))
        return self._outputs(raw, 3, image0, image1)

    def decode_step(self, level: int, state: LevelState, feat0: Tensor, feat1: Tensor,
                    image0: Tensor, image1: Tensor) -> LevelState:
        """Refine the level-``level`` state into the level-``level-1`` state."""
        if level not in (1, 2, 3) or state.level != level:
            raise ValueError(f"decode_step: invalid level {level} for state at level {state.level}")
        if feat0.shape[2:] != state.flow_t0.shape[2:] or feat0.shape != feat1.shape:
            raise ValueError(f"decode_step: features {feat0.shape} do not match state {state.flow_t0.shape}")
        cfg = self.config
        parts: list[Tensor]
        if cfg.ablate_pmr:
            parts = [feat0, feat1]
        else:
            parts = [backward_warp(feat0, state.flow_t0), backward_warp(feat1, state.flow_t1),
                     state.flow_t0, state.flow_t1]
            if not cfg.ablate_csm:
                parts += [state.mask, state.residual]
        if not cfg.ablate_pcr:
            parts.append(state.frame)
        raw = self.decoders[level](T.concat(parts))
        return self._outputs(raw, level - 1, image0, image1)

    def forward(self, frame0: Tensor, frame1: Tensor) -> ForwardResult:
        if frame0.shape != frame1.shape:
            raise ValueError(f"frame size mismatch: {frame0.shape} vs {frame1.shape}")
        if frame0.ndim != 4 or frame0.shape[1] != 3:
            raise ValueError(f"frames must be N x 3 x H x W, got {frame0.shape}")
        padded0, crop = pad_to_multiple(frame0, 16)
        padded1, _ = pad_to_multiple(frame1, 16)
        pyr0 = build_pyramid(padded0, PYRAMID_LEVELS)
        pyr1 = build_pyramid(padded1, PYRAMID_LEVELS)
        n = frame0.shape[0]
        both = self.encode(T.concat([padded0, padded1], axis=0))
        feats0 = [f[:n] for f in both]
        feats1 = [f[n:] for f in both]
        state = self.decode_bottom(feats0[3], feats1[3], pyr0[3], pyr1[3])
        states = {3: state}
        for level in (3, 2, 1):
            state = self.decode_step(level, state, feats0[level - 1], feats1[level - 1],
                                     pyr0[level - 1], pyr1[level - 1])
            states[level - 1] = state
        return ForwardResult(crop_back(state.frame, crop), states, pyr0, pyr1, crop)

    __call__ = forward


def conv_param_count(in_ch: int, out_ch: int, kernel: int, groups: int = 1, bias: bool = True) -> int:
    return in_ch // groups * out_ch * kernel * kernel + (out_ch if bias else 0)


def analytic_param_count(config: ModelConfig, encoder_only: bool = False) -> int:
    """Closed-form parameter total, independent of the layer objects."""
    b = config.conv_bias
    widths = (3,) + ENCODER_WIDTHS
    total = 0
    for cin, cout in zip(widths[:-1], widths[1:]):
        total += conv_param_count(cin, cout, 3, bias=b) + conv_param_count(cout, cout, 3, bias=b) + 2 * cout
    if encoder_only:
        return total
    hidden, g, out = config.hidden_width, config.groups, config.output_channels
    inputs = [2 * ENCODER_WIDTHS[3]] + [config.step_input_channels(level) for level in (3, 2, 1)]
    for cin in inputs:
        total += conv_param_count(cin, hidden, 3, bias=b) + hidden
        total += 3 * (conv_param_count(hidden, hidden, 3, groups=g, bias=b) + hidden)
        total += conv_param_count(hidden, out, 4, bias=b)
    return total
