"""Encoder, decoder, and shared critic/classifier networks.

The editing model is a strided conv encoder and a transposed-conv decoder
with U-Net style symmetric skip concatenations. Target attributes are
rescaled to [-1, 1], tiled to the spatial size of the receiving decoder
layer, and concatenated along the channel axis; the number of injection
sites and of skip connections are both configurable, counted from the
bottleneck outward.

The critic (real/fake score, no output nonlinearity) and the attribute
classifier (per-attribute sigmoid) share their entire convolutional trunk
and differ only in their fully connected heads. When style manipulation is
enabled, a style-recovery head with per-attribute softmax outputs hangs
off the same trunk.

Layer-norm style normalization (GroupNorm over all channels) is the
default for the critic stack because its training uses a gradient penalty,
which cross-sample batch statistics would corrupt.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import torch
from torch import nn


@dataclass(frozen=True)
class LayerSpec:
    """One conv/deconv stage: output channels, kernel size, stride."""

    out_channels: int
    kernel: int
    stride: int


def _specs(raw: Sequence) -> tuple[LayerSpec, ...]:
    return tuple(
        s if isinstance(s, LayerSpec) else LayerSpec(*s) for s in raw
    )


@dataclass(frozen=True)
class ArchitectureConfig:
    resolution: int
    n_attrs: int
    encoder: tuple[LayerSpec, ...]
    decoder: tuple[LayerSpec, ...]  # final entry produces the 3-channel image
    trunk: tuple[LayerSpec, ...]
    head_dim: int = 1024
    skip_count: int = 1
    inject_count: int = 1
    gen_norm: str = "batch"
    critic_norm: str = "layer"
    style_counts: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "encoder", _specs(self.encoder))
        object.__setattr__(self, "decoder", _specs(self.decoder))
        object.__setattr__(self, "trunk", _specs(self.trunk))
        if self.style_counts is not None:
            object.__setattr__(self, "style_counts", tuple(self.style_counts))
        self.validate()

    # -- derived geometry ---------------------------------------------------

    def encoder_ladder(self) -> list[tuple[int, int]]:
        """(channels, spatial) after each encoder layer."""
        size = self.resolution
        ladder = []
        for spec in self.encoder:
            size = _conv_out(size, spec)
            ladder.append((spec.out_channels, size))
        return ladder

    def decoder_ladder(self) -> list[tuple[int, int]]:
        size = self.encoder_ladder()[-1][1]
        ladder = []
        for spec in self.decoder:
            size = size * spec.stride
            ladder.append((spec.out_channels, size))
        return ladder

    def trunk_ladder(self) -> list[tuple[int, int]]:
        size = self.resolution
        ladder = []
        for spec in self.trunk:
            size = _conv_out(size, spec)
            ladder.append((spec.out_channels, size))
        return ladder

    @property
    def bottleneck_channels(self) -> int:
        return self.encoder[-1].out_channels

    @property
    def bottleneck_size(self) -> int:
        return self.encoder_ladder()[-1][1]

    @property
    def style_total(self) -> int:
        return sum(self.style_counts) if self.style_counts else 0

    def condition_channels(self) -> int:
        return self.n_attrs + self.style_total

    def decoder_in_channels(self) -> list[int]:
        """Input channel count of every decoder layer after concatenations."""
        cond = self.condition_channels()
        enc = [spec.out_channels for spec in self.encoder]
        channels = [enc[-1] + cond]
        for i in range(2, len(self.decoder) + 1):
            width = self.decoder[i - 2].out_channels
            if (i - 1) <= self.skip_count:
                width += enc[len(enc) - i]  # symmetric encoder feature
            if i <= self.inject_count:
                width += cond
            channels.append(width)
        return channels

    def validate(self):
        if self.n_attrs < 1:
            raise ValueError("n_attrs must be at least 1")
        if not self.encoder or not self.decoder or not self.trunk:
            raise ValueError("encoder, decoder and trunk must be nonempty")
        if self.decoder[-1].out_channels != 3:
            raise ValueError("final decoder layer must produce 3 channels")
        if not 0 <= self.skip_count < len(self.encoder):
            raise ValueError(
                f"skip_count {self.skip_count} must lie in [0, {len(self.encoder) - 1}]"
            )
        if not 1 <= self.inject_count <= len(self.decoder):
            raise ValueError(
                f"inject_count {self.inject_count} must lie in [1, {len(self.decoder)}]"
            )
        if self.gen_norm not in ("batch", "none"):
            raise ValueError(f"unknown generator normalization {self.gen_norm!r}")
        if self.critic_norm not in ("layer", "instance", "none"):
            raise ValueError(f"unknown critic normalization {self.critic_norm!r}")
        if self.style_counts is not None:
            if len(self.style_counts) != self.n_attrs:
                raise ValueError("style_counts must have one entry per attribute")
            if any(c < 1 for c in self.style_counts):
                raise ValueError("every style count must be at least 1")

        size = self.resolution
        for spec in self.encoder:
            size = _conv_out(size, spec)
            if size < 1:
                raise ValueError("encoder strides exhaust the spatial extent")
        for i, spec in enumerate(self.decoder):
            if spec.stride == 1 and (spec.kernel % 2) == 0:
                raise ValueError("stride-1 deconv layers need an odd kernel")
            size = size * spec.stride
        if size != self.resolution:
            raise ValueError(
                f"decoder output size {size} does not recover resolution "
                f"{self.resolution}"
            )
        # Skip concatenations must pair layers of equal spatial size.
        enc_ladder = self.encoder_ladder()
        dec_in_size = self.bottleneck_size
        for i in range(2, len(self.decoder) + 1):
            dec_in_size = dec_in_size * self.decoder[i - 2].stride
            if (i - 1) <= self.skip_count:
                paired = enc_ladder[len(self.encoder) - i][1]
                if paired != dec_in_size:
                    raise ValueError(
                        f"skip {i - 1} pairs decoder input {dec_in_size} with "
                        f"encoder feature {paired}; sizes must match"
                    )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ArchitectureConfig":
        data = dict(data)
        for key in ("encoder", "decoder", "trunk"):
            data[key] = tuple(
                LayerSpec(**s) if isinstance(s, dict) else LayerSpec(*s)
                for s in data[key]
            )
        if data.get("style_counts") is not None:
            data["style_counts"] = tuple(data["style_counts"])
        return cls(**data)


def _conv_out(size: int, spec: LayerSpec) -> int:
    pad = (spec.kernel - 1) // 2
    return (size + 2 * pad - spec.kernel) // spec.stride + 1


def table_config(
    resolution: int,
    n_attrs: int = 13,
    *,
    skip_count: int = 1,
    inject_count: int = 1,
    critic_norm: str = "layer",
    style_counts: Sequence[int] | None = None,
) -> ArchitectureConfig:
    """Reference architectures for 64 and 128 pixel models."""
    if resolution == 128:
        encoder = [(64, 4, 2), (128, 4, 2), (256, 4, 2), (512, 4, 2), (1024, 4, 2)]
        decoder = [(1024, 4, 2), (512, 4, 2), (256, 4, 2), (128, 4, 2), (3, 4, 2)]
        trunk = [(64, 4, 2), (128, 4, 2), (256, 4, 2), (512, 4, 2), (1024, 4, 2)]
    elif resolution == 64:
        encoder = [(64, 5, 2), (128, 5, 2), (256, 5, 2), (512, 5, 2)]
        decoder = [(512, 5, 2), (256, 5, 2), (128, 5, 2), (64, 5, 2), (3, 5, 1)]
        trunk = [(64, 3, 1), (64, 5, 2), (128, 5, 2), (256, 5, 2), (512, 5, 2), (512, 3, 1)]
    else:
        raise ValueError(f"no reference architecture for resolution {resolution}")
    return ArchitectureConfig(
        resolution=resolution,
        n_attrs=n_attrs,
        encoder=_specs(encoder),
        decoder=_specs(decoder),
        trunk=_specs(trunk),
        skip_count=skip_count,
        inject_count=inject_count,
        critic_norm=critic_norm,
        style_counts=tuple(style_counts) if style_counts is not None else None,
    )


def compact_config(
    resolution: int,
    n_attrs: int,
    *,
    base: int = 64,
    head_dim: int | None = None,
    skip_count: int = 1,
    inject_count: int = 1,
    style_counts: Sequence[int] | None = None,
) -> ArchitectureConfig:
    """Scaled-down variant of the 64-pixel pattern for 32/48 pixel runs.

    One stride-2 stage is dropped per halving below 64 and the channel list
    is truncated from the top; ``base`` rescales the remaining widths.
    """
    if resolution not in (32, 48, 64):
        raise ValueError(f"compact configs support 32/48/64, got {resolution}")
    stages = 4 if resolution == 64 else 3
    widths = [base * (2**i) for i in range(stages)]
    encoder = [(w, 5, 2) for w in widths]
    decoder = [(w, 5, 2) for w in reversed(widths)] + [(3, 5, 1)]
    trunk = (
        [(widths[0], 3, 1)]
        + [(w, 5, 2) for w in widths]
        + [(widths[-1], 3, 1)]
    )
    return ArchitectureConfig(
        resolution=resolution,
        n_attrs=n_attrs,
        encoder=_specs(encoder),
        decoder=_specs(decoder),
        trunk=_specs(trunk),
        head_dim=head_dim if head_dim is not None else max(256, base * 16),
        skip_count=skip_count,
        inject_count=inject_count,
        style_counts=tuple(style_counts) if style_counts is not None else None,
    )


@dataclass
class LatentCode:
    """Bottleneck features plus the retained encoder maps for skips.

    ``skips`` is ordered from the bottleneck outward and holds exactly
    ``skip_count`` feature maps.
    """

    bottleneck: torch.Tensor
    skips: tuple[torch.Tensor, ...] = field(default_factory=tuple)


def _gen_norm(kind: str, channels: int) -> nn.Module:
    if kind == "batch":
        return nn.BatchNorm2d(channels)
    return nn.Identity()


def _critic_norm(kind: str, channels: int) -> nn.Module:
    if kind == "layer":
        return nn.GroupNorm(1, channels)
    if kind == "instance":
        return nn.InstanceNorm2d(channels, affine=True)
    return nn.Identity()


def _conv(in_ch: int, spec: LayerSpec) -> nn.Conv2d:
    return nn.Conv2d(in_ch, spec.out_channels, spec.kernel, spec.stride,
                     (spec.kernel - 1) // 2)


def _deconv(in_ch: int, spec: LayerSpec) -> nn.ConvTranspose2d:
    pad = (spec.kernel - 1) // 2
    out_pad = 0 if spec.stride == 1 else 2 - spec.kernel + 2 * pad
    return nn.ConvTranspose2d(in_ch, spec.out_channels, spec.kernel, spec.stride,
                              pad, output_padding=out_pad)


def tile_condition(values: torch.Tensor, size: int) -> torch.Tensor:
    """Tile per-sample condition values to constant spatial planes."""
    b, n = values.shape
    return values.view(b, n, 1, 1).expand(b, n, size, size)


class Encoder(nn.Module):
    def __init__(self, config: ArchitectureConfig):
        super().__init__()
        self.config = config
        layers = []
        in_ch = 3
        for spec in config.encoder:
            layers.append(
                nn.Sequential(
                    _conv(in_ch, spec),
                    _gen_norm(config.gen_norm, spec.out_channels),
                    nn.LeakyReLU(0.2, inplace=True),
                )
            )
            in_ch = spec.out_channels
        self.layers = nn.ModuleList(layers)

    def forward(self, x: torch.Tensor) -> LatentCode:
        if x.shape[-1] != self.config.resolution or x.shape[1] != 3:
            raise ValueError(
                f"expected input of shape (N, 3, {self.config.resolution}, "
                f"{self.config.resolution}), got {tuple(x.shape)}"
            )
        features = []
        h = x
        for layer in self.layers:
            h = layer(h)
            features.append(h)
        skips = tuple(reversed(features[:-1]))[: self.config.skip_count]
        return LatentCode(bottleneck=features[-1], skips=skips)


class Decoder(nn.Module):
    def __init__(self, config: ArchitectureConfig):
        super().__init__()
        self.config = config
        in_channels = config.decoder_in_channels()
        layers = []
        last = len(config.decoder) - 1
        for i, (in_ch, spec) in enumerate(zip(in_channels, config.decoder)):
            block: list[nn.Module] = [_deconv(in_ch, spec)]
            if i == last:
                block.append(nn.Tanh())
            else:
                block.append(_gen_norm(config.gen_norm, spec.out_channels))
                block.append(nn.ReLU(inplace=True))
            layers.append(nn.Sequential(*block))
        self.layers = nn.ModuleList(layers)

    def forward(
        self,
        z: LatentCode,
        attrs: torch.Tensor,
        styles: torch.Tensor | None = None,
    ) -> torch.Tensor:
        config = self.config
        if attrs.shape[1] != config.n_attrs:
            raise ValueError(
                f"expected {config.n_attrs} attributes, got {attrs.shape[1]}"
            )
        if z.bottleneck.shape[1] != config.bottleneck_channels:
            raise ValueError(
                f"latent has {z.bottleneck.shape[1]} channels but the "
                f"architecture expects {config.bottleneck_channels}"
            )
        if config.style_counts is not None:
            if styles is None:
                raise ValueError("this architecture requires style planes")
            if styles.shape[1] != config.style_total:
                raise ValueError(
                    f"expected {config.style_total} style channels, "
                    f"got {styles.shape[1]}"
                )
        elif styles is not None:
            raise ValueError("style planes passed to a style-free architecture")
        if len(z.skips) < config.skip_count:
            raise ValueError(
                f"latent retains {len(z.skips)} skip maps but the architecture "
                f"needs {config.skip_count}"
            )

        cond = attrs * 2.0 - 1.0
        if styles is not None:
            cond = torch.cat([cond, styles], dim=1)

        h = z.bottleneck
        for i, layer in enumerate(self.layers, start=1):
            parts = [h]
            if i >= 2 and (i - 1) <= config.skip_count:
                parts.append(z.skips[i - 2])
            if i <= config.inject_count:
                parts.append(tile_condition(cond, h.shape[-1]))
            h = layer(torch.cat(parts, dim=1) if len(parts) > 1 else h)
        return h


class CriticClassifier(nn.Module):
    """Shared conv trunk with critic, classifier, and optional style heads."""

    def __init__(self, config: ArchitectureConfig):
        super().__init__()
        self.config = config
        layers = []
        in_ch = 3
        for spec in config.trunk:
            layers.append(
                nn.Sequential(
                    _conv(in_ch, spec),
                    _critic_norm(config.critic_norm, spec.out_channels),
                    nn.LeakyReLU(0.2, inplace=True),
                )
            )
            in_ch = spec.out_channels
        self.trunk = nn.ModuleList(layers)
        channels, size = config.trunk_ladder()[-1]
        flat = channels * size * size

        def head(out_dim: int) -> nn.Sequential:
            return nn.Sequential(
                nn.Linear(flat, config.head_dim),
                nn.LayerNorm(config.head_dim),
                nn.LeakyReLU(0.2, inplace=True),
                nn.Linear(config.head_dim, out_dim),
            )

        self.critic_head = head(1)
        self.classifier_head = head(config.n_attrs)
        style_out = sum(c for c in (config.style_counts or ()) if c > 1)
        self.style_head = head(style_out) if style_out else None

    def features(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.config.resolution:
            raise ValueError(
                f"expected resolution {self.config.resolution}, got {x.shape[-1]}"
            )
        h = x
        for layer in self.trunk:
            h = layer(h)
        return h.flatten(1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.features(x)
        return self.critic_head(h).squeeze(1), torch.sigmoid(self.classifier_head(h))

    def discriminate(self, x: torch.Tensor) -> torch.Tensor:
        return self.critic_head(self.features(x)).squeeze(1)

    def classify(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.classifier_head(self.features(x)))

    def style_probs_from(self, features: torch.Tensor) -> list[torch.Tensor]:
        """Per-attribute style distributions from precomputed trunk features."""
        config = self.config
        if config.style_counts is None:
            raise ValueError("style prediction requires style_counts in the config")
        batch = features.shape[0]
        logits = self.style_head(features) if self.style_head is not None else None
        outputs = []
        offset = 0
        for count in config.style_counts:
            if count == 1:
                outputs.append(
                    torch.ones(batch, 1, dtype=features.dtype, device=features.device)
                )
            else:
                outputs.append(torch.softmax(logits[:, offset : offset + count], dim=1))
                offset += count
        return outputs

    def predict_style(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Per-attribute categorical distributions over style indices."""
        return self.style_probs_from(self.features(x))


class LatentAdversary(nn.Module):
    """Predicts source attributes from the bottleneck representation.

    Only used by the optional attribute-independence training regime, where
    the encoder is additionally pushed to hide attribute information.
    """

    def __init__(self, config: ArchitectureConfig, hidden: int = 64):
        super().__init__()
        channels, size = config.encoder_ladder()[-1]
        self.net = nn.Sequential(
            nn.Conv2d(channels, hidden, 3, 1, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Flatten(),
            nn.Linear(hidden * size * size, hidden),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Linear(hidden, config.n_attrs),
        )

    def forward(self, bottleneck: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.net(bottleneck))


def init_parameters(module: nn.Module, seed: int) -> None:
    """Gaussian (0, 0.02) conv/linear weights, zero biases, unit norm gains.

    Draws come from a dedicated generator so construction is reproducible
    regardless of global RNG state.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * 0.02)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, (nn.BatchNorm2d, nn.GroupNorm, nn.LayerNorm,
                                nn.InstanceNorm2d)):
                if getattr(m, "weight", None) is not None:
                    m.weight.fill_(1.0)
                if getattr(m, "bias", None) is not None:
                    m.bias.zero_()


class AttrEditModel(nn.Module):
    """The full editing model: encoder, decoder, critic/classifier."""

    def __init__(
        self,
        config: ArchitectureConfig,
        attr_names: Sequence[str],
        *,
        init_seed: int = 0,
        with_latent_adversary: bool = False,
    ):
        super().__init__()
        if len(attr_names) != config.n_attrs:
            raise ValueError(
                f"{len(attr_names)} attribute names for n_attrs={config.n_attrs}"
            )
        self.config = config
        self.attr_names = tuple(attr_names)
        self.encoder = Encoder(config)
        self.decoder = Decoder(config)
        self.critic = CriticClassifier(config)
        self.latent_adversary = (
            LatentAdversary(config) if with_latent_adversary else None
        )
        init_parameters(self, init_seed)

    # -- forward operations ---------------------------------------------------

    def encode(self, x: torch.Tensor) -> LatentCode:
        return self.encoder(x)

    def decode(
        self,
        z: LatentCode,
        attrs: torch.Tensor,
        styles: torch.Tensor | None = None,
    ) -> torch.Tensor:
        return self.decoder(z, attrs, styles)

    def edit(
        self,
        x: torch.Tensor,
        attrs: torch.Tensor,
        styles: torch.Tensor | None = None,
    ) -> torch.Tensor:
        return self.decode(self.encode(x), attrs, styles)

    def decode_with_style(self, z: LatentCode, controllers, attrs: torch.Tensor):
        """Decode with explicit style controllers (extension must be on)."""
        if self.config.style_counts is None:
            raise ValueError("style manipulation is disabled in this architecture")
        return self.decode(z, attrs, controllers.onehot(dtype=attrs.dtype))

    def discriminate(self, x: torch.Tensor) -> torch.Tensor:
        return self.critic.discriminate(x)

    def classify(self, x: torch.Tensor) -> torch.Tensor:
        return self.critic.classify(x)

    def predict_style(self, x: torch.Tensor) -> list[torch.Tensor]:
        return self.critic.predict_style(x)

    # -- parameter groups -------------------------------------------------------

    def generator_parameters(self):
        yield from self.encoder.parameters()
        yield from self.decoder.parameters()

    def critic_parameters(self):
        yield from self.critic.trunk.parameters()
        yield from self.critic.critic_head.parameters()
        yield from self.critic.classifier_head.parameters()

    def style_parameters(self):
        if self.critic.style_head is not None:
            yield from self.critic.style_head.parameters()

    def adversary_parameters(self):
        if self.latent_adversary is not None:
            yield from self.latent_adversary.parameters()
