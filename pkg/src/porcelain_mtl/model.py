"""Shared-backbone, four-head multi-task classifier.

ResNet50, MobileNetV2 and VGG16 keep their spatial feature map and every
task gets a conv -> BN -> ReLU -> global-pool -> linear head. InceptionV3 is
cut after global pooling and each task gets a single linear layer.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn as nn
import torchvision.models as tvm

from .errors import InvalidChannels, InvalidModelSpec, ShapeMismatch, UnknownArch, WeightsUnavailable
from .taxonomy import TaskTaxonomy, build_taxonomy

ARCHITECTURES = ("resnet50", "mobilenetv2", "vgg16", "inceptionv3")
DISPLAY_NAMES = {
    "resnet50": "ResNet50",
    "mobilenetv2": "MobileNetV2",
    "vgg16": "VGG16",
    "inceptionv3": "InceptionV3",
}
HEAD_STYLE = {"resnet50": "conv", "mobilenetv2": "conv", "vgg16": "conv", "inceptionv3": "fc"}
MIN_INPUT_SIDE = {"resnet50": 32, "mobilenetv2": 32, "vgg16": 32, "inceptionv3": 75}
HEAD_CHANNELS = 512

WEIGHTS_DIR_ENV = "PORCELAIN_WEIGHTS_DIR"
OFFLINE_ENV = "PORCELAIN_OFFLINE"

_WEIGHTS = {
    "resnet50": tvm.ResNet50_Weights.IMAGENET1K_V1,
    "mobilenetv2": tvm.MobileNet_V2_Weights.IMAGENET1K_V1,
    "vgg16": tvm.VGG16_Weights.IMAGENET1K_V1,
    "inceptionv3": tvm.Inception_V3_Weights.IMAGENET1K_V1,
}


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    pretrained: bool = True
    freeze_backbone: bool = True
    taxonomy: TaskTaxonomy = field(default_factory=build_taxonomy)
    input_side: int = 224

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise UnknownArch(f"unknown architecture {self.arch!r}; expected one of {', '.join(ARCHITECTURES)}")
        if self.freeze_backbone and not self.pretrained:
            raise InvalidModelSpec("freeze_backbone requires pretrained weights")
        if self.input_side < MIN_INPUT_SIDE[self.arch]:
            raise InvalidModelSpec(
                f"{self.arch} needs input_side >= {MIN_INPUT_SIDE[self.arch]}, got {self.input_side}"
            )


class LogitsBundle(dict):
    """Ordered mapping task name -> (batch, K) logits."""

    @property
    def batch_size(self) -> int:
        return next(iter(self.values())).shape[0]

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.values())

    def __getattr__(self, name):
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None


def _init_head(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            nn.init.zeros_(m.bias)
        elif isinstance(m, nn.Linear):
            nn.init.kaiming_uniform_(m.weight, nonlinearity="linear")
            nn.init.zeros_(m.bias)


def build_task_head(in_channels: int, num_categories: int, style: str = "conv") -> nn.Sequential:
    if in_channels < 1:
        raise InvalidChannels(f"in_channels must be >= 1, got {in_channels}")
    if num_categories < 2:
        raise ValueError(f"num_categories must be >= 2, got {num_categories}")
    if style == "conv":
        head = nn.Sequential(
            nn.Conv2d(in_channels, HEAD_CHANNELS, kernel_size=3, padding=1),
            nn.BatchNorm2d(HEAD_CHANNELS),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(HEAD_CHANNELS, num_categories),
        )
    elif style == "fc":
        head = nn.Sequential(nn.Linear(in_channels, num_categories))
    else:
        raise ValueError(f"unknown head style {style!r}")
    _init_head(head)
    return head


class InceptionFeatures(nn.Module):
    """InceptionV3 trunk up to and including global average pooling.

    The auxiliary classifier is dropped entirely.
    """

    _STAGES = (
        "Conv2d_1a_3x3", "Conv2d_2a_3x3", "Conv2d_2b_3x3", "maxpool1",
        "Conv2d_3b_1x1", "Conv2d_4a_3x3", "maxpool2",
        "Mixed_5b", "Mixed_5c", "Mixed_5d", "Mixed_6a", "Mixed_6b", "Mixed_6c",
        "Mixed_6d", "Mixed_6e", "Mixed_7a", "Mixed_7b", "Mixed_7c", "avgpool",
    )

    def __init__(self, net: tvm.Inception3):
        super().__init__()
        self.transform_input = net.transform_input
        for name in self._STAGES:
            self.add_module(name, getattr(net, name))

    def forward(self, x):
        if self.transform_input:
            # torchvision's remap from ImageNet normalisation to the [-1, 1]
            # range the original Inception weights were trained on
            x = torch.cat(
                [
                    x[:, 0:1] * (0.229 / 0.5) + (0.485 - 0.5) / 0.5,
                    x[:, 1:2] * (0.224 / 0.5) + (0.456 - 0.5) / 0.5,
                    x[:, 2:3] * (0.225 / 0.5) + (0.406 - 0.5) / 0.5,
                ],
                1,
            )
        for name in self._STAGES:
            x = getattr(self, name)(x)
        return torch.flatten(x, 1)


def weights_dir() -> Path:
    env = os.environ.get(WEIGHTS_DIR_ENV)
    if env:
        return Path(env)
    return Path(torch.hub.get_dir()) / "checkpoints"


def weights_filename(arch: str) -> str:
    return os.path.basename(_WEIGHTS[arch].url)


def fetch_pretrained_state(arch: str) -> dict:
    """Load the full torchvision ImageNet checkpoint for ``arch``.

    Looks in :func:`weights_dir` first and downloads there otherwise, unless
    ``PORCELAIN_OFFLINE`` is set.
    """
    path = weights_dir() / weights_filename(arch)
    if path.exists():
        try:
            return torch.load(path, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise WeightsUnavailable(f"{arch}: cannot read {path}: {exc}") from exc
    if os.environ.get(OFFLINE_ENV):
        raise WeightsUnavailable(f"{arch}: {path} not found and {OFFLINE_ENV} is set")
    try:
        return torch.hub.load_state_dict_from_url(
            _WEIGHTS[arch].url, model_dir=str(path.parent), progress=False, check_hash=True
        )
    except Exception as exc:
        raise WeightsUnavailable(
            f"{arch}: could not download {_WEIGHTS[arch].url} ({exc}); "
            f"place {path.name} in {path.parent} or set {WEIGHTS_DIR_ENV}"
        ) from exc


def _classifier_net(arch: str, pretrained: bool) -> nn.Module:
    if arch == "resnet50":
        net = tvm.resnet50(weights=None)
    elif arch == "mobilenetv2":
        net = tvm.mobilenet_v2(weights=None)
    elif arch == "vgg16":
        net = tvm.vgg16(weights=None)
    elif arch == "inceptionv3":
        net = tvm.inception_v3(
            weights=None, aux_logits=True, init_weights=not pretrained, transform_input=pretrained
        )
    else:
        raise UnknownArch(arch)
    if pretrained:
        net.load_state_dict(fetch_pretrained_state(arch))
    return net


def build_backbone(arch: str, pretrained: bool) -> tuple[nn.Module, int]:
    """Return the truncated feature extractor and its output channel count."""
    net = _classifier_net(arch, pretrained)
    if arch == "resnet50":
        trunk = nn.Sequential(
            net.conv1, net.bn1, net.relu, net.maxpool,
            net.layer1, net.layer2, net.layer3, net.layer4,
        )
        return trunk, 2048
    if arch == "mobilenetv2":
        return net.features, 1280
    if arch == "vgg16":
        return net.features, 512
    return InceptionFeatures(net), 2048


class MultiTaskModel(nn.Module):
    def __init__(self, spec: ModelSpec, backbone: nn.Module, feature_channels: int):
        super().__init__()
        self.spec = spec
        self.backbone = backbone
        self.feature_channels = feature_channels
        style = HEAD_STYLE[spec.arch]
        self.task_names = spec.taxonomy.task_names
        # "type" collides with nn.Module.type, hence the suffix
        self.heads = nn.ModuleDict(
            {f"{t.name}_head": build_task_head(feature_channels, t.num_categories, style)
             for t in spec.taxonomy.tasks}
        )
        if spec.freeze_backbone:
            for p in self.backbone.parameters():
                p.requires_grad_(False)

    @property
    def frozen(self) -> bool:
        return self.spec.freeze_backbone

    def train(self, mode: bool = True):
        super().train(mode)
        if self.frozen:
            # frozen trunk keeps its pretrained BN statistics
            self.backbone.eval()
        return self

    def features(self, x: torch.Tensor) -> torch.Tensor:
        side = self.spec.input_side
        if x.dim() != 4 or x.shape[1] != 3 or x.shape[2] != side or x.shape[3] != side:
            raise ShapeMismatch(f"expected batch of shape (B, 3, {side}, {side}), got {tuple(x.shape)}")
        return self.backbone(x)

    def heads_forward(self, feats: torch.Tensor) -> LogitsBundle:
        return LogitsBundle((name, self.heads[f"{name}_head"](feats)) for name in self.task_names)

    def head(self, task: str) -> nn.Module:
        return self.heads[f"{task}_head"]

    def forward(self, x: torch.Tensor) -> LogitsBundle:
        return self.heads_forward(self.features(x))

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]


def build_model(spec: ModelSpec) -> MultiTaskModel:
    backbone, channels = build_backbone(spec.arch, spec.pretrained)
    return MultiTaskModel(spec, backbone, channels)


def forward(model: MultiTaskModel, batch: torch.Tensor) -> LogitsBundle:
    return model(batch)


@dataclass(frozen=True)
class ComponentCount:
    trainable: int
    frozen: int

    @property
    def total(self) -> int:
        return self.trainable + self.frozen


@dataclass(frozen=True)
class ParameterReport:
    components: dict[str, ComponentCount]

    @property
    def trainable(self) -> int:
        return sum(c.trainable for c in self.components.values())

    @property
    def frozen(self) -> int:
        return sum(c.frozen for c in self.components.values())

    @property
    def total(self) -> int:
        return self.trainable + self.frozen

    def format(self) -> str:
        rows = [f"{'component':<12} {'trainable':>12} {'frozen':>12}"]
        for name, c in self.components.items():
            rows.append(f"{name:<12} {c.trainable:>12,} {c.frozen:>12,}")
        rows.append(f"{'total':<12} {self.trainable:>12,} {self.frozen:>12,}")
        return "\n".join(rows)


def _count(module: nn.Module) -> ComponentCount:
    tr = sum(p.numel() for p in module.parameters() if p.requires_grad)
    fr = sum(p.numel() for p in module.parameters() if not p.requires_grad)
    return ComponentCount(tr, fr)


def parameter_report(model: MultiTaskModel) -> ParameterReport:
    parts = {"backbone": _count(model.backbone)}
    for name in model.task_names:
        parts[name] = _count(model.head(name))
    return ParameterReport(parts)
