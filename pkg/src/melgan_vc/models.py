"""Generator (u-net), PatchGAN discriminator and siamese encoder.

All networks take spectrogram batches shaped ``(batch, mel, frames)``.
Convolutions in G and D are spectrally normalized; G and S use batch
normalization, D does not.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

LEAKY_SLOPE = 0.2
INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    len_S: int = 128
    g_base_channels: int = 64
    g_depth: int = 3
    d_layers: int = 4
    d_base_channels: int = 64
    s_layers: int = 4
    s_base_channels: int = 32
    kernel_size: int = 3
    d_kernel_size: int = 4
    norm_power_iters: int = 1

    def __post_init__(self):
        for name in ("len_S", "g_base_channels", "g_depth", "d_layers", "d_base_channels",
                     "s_layers", "s_base_channels", "norm_power_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if self.d_kernel_size < 2:
            raise ValueError("d_kernel_size must be >= 2")

    def check_chunk_shape(self, mel: int, width: int) -> None:
        """G needs both dimensions divisible by 2**g_depth, S by 2**s_layers."""
        for name, depth in (("g_depth", self.g_depth), ("s_layers", self.s_layers)):
            f = 2 ** depth
            if mel % f or width % f:
                raise ValueError(f"chunk {mel}x{width} not divisible by 2**{name}={f}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ----------------------------------------------------------------------------
# spectral normalization


def _power_iteration(w2d: torch.Tensor, u: torch.Tensor, iters: int) -> Tuple[torch.Tensor, torch.Tensor]:
    v = None
    for _ in range(iters):
        v = F.normalize(w2d.t() @ u, dim=0, eps=1e-12)
        u = F.normalize(w2d @ v, dim=0, eps=1e-12)
    return u, v


def spectral_normalize(weight: torch.Tensor, u: torch.Tensor, iters: int = 1):
    """Divide ``weight`` by its top singular value, estimated by power iteration.

    ``weight`` is flattened to ``(out, -1)``; ``u`` is the persistent left
    singular vector estimate. Returns ``(normalized, u, v, sigma)``. A zero
    weight comes back unchanged. Gradients flow through ``sigma`` but not
    through the power iteration.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    w2d = weight.reshape(weight.shape[0], -1)
    with torch.no_grad():
        u, v = _power_iteration(w2d, u, iters)
    sigma = torch.dot(u, w2d @ v)
    safe = torch.where(sigma > 0, sigma, torch.ones_like(sigma))
    return weight / safe, u, v, sigma


class SNConv2d(nn.Conv2d):
    """Conv2d whose kernel is divided by its spectral norm on every call.

    In training mode each call advances the power iteration and stores the
    singular vectors; in eval mode the stored vectors are reused unchanged.
    """

    def __init__(self, *args, power_iters: int = 1, **kwargs):
        super().__init__(*args, **kwargs)
        self.power_iters = power_iters
        fan = self.weight[0].numel()
        self.register_buffer("sn_u", F.normalize(torch.ones(self.out_channels), dim=0))
        self.register_buffer("sn_v", F.normalize(torch.ones(fan), dim=0))

    def reset_sn_state(self, generator: Optional[torch.Generator] = None) -> None:
        with torch.no_grad():
            self.sn_u.copy_(F.normalize(torch.randn(self.sn_u.shape, generator=generator), dim=0))
            self.sn_v.copy_(F.normalize(torch.randn(self.sn_v.shape, generator=generator), dim=0))

    def normalized_weight(self) -> torch.Tensor:
        w = self.weight
        w2d = w.reshape(w.shape[0], -1)
        if self.training:
            with torch.no_grad():
                u, v = _power_iteration(w2d, self.sn_u, self.power_iters)
                if torch.any(u != 0):
                    self.sn_u.copy_(u)
                    self.sn_v.copy_(v)
        u, v = self.sn_u.clone(), self.sn_v.clone()
        sigma = torch.dot(u, w2d @ v)
        return w / torch.where(sigma > 0, sigma, torch.ones_like(sigma))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self._conv_forward(x, self.normalized_weight(), self.bias)


# ----------------------------------------------------------------------------
# sub-pixel upsampling


def subpixel_upsample(x: torch.Tensor, r: int) -> torch.Tensor:
    """Periodic shuffle ``(..., C*r*r, H, W) -> (..., C, H*r, W*r)``."""
    *lead, c, h, w = x.shape
    if c % (r * r):
        raise ValueError(f"channel count {c} not divisible by r^2={r * r}")
    oc = c // (r * r)
    y = x.reshape(*lead, oc, r, r, h, w)
    n = len(lead)
    y = y.permute(*range(n), n, n + 3, n + 1, n + 4, n + 2)
    return y.reshape(*lead, oc, h * r, w * r)


class SubPixelUp(nn.Module):
    """Spectrally normalized conv to ``out * 4`` channels, then a 2x periodic shuffle."""

    def __init__(self, cin: int, cout: int, kernel: int, power_iters: int):
        super().__init__()
        self.conv = SNConv2d(cin, cout * 4, kernel, padding=kernel // 2, power_iters=power_iters)

    def forward(self, x):
        return subpixel_upsample(self.conv(x), 2)


# ----------------------------------------------------------------------------
# networks


def _init_weights(module: nn.Module, generator: torch.Generator) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            with torch.no_grad():
                m.weight.normal_(0.0, INIT_STD, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
        if isinstance(m, SNConv2d):
            m.reset_sn_state(generator)


def _as_images(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 2:
        x = x.unsqueeze(0)
    if x.dim() != 3:
        raise ValueError(f"expected (batch, mel, frames), got shape {tuple(x.shape)}")
    return x.unsqueeze(1)


class Generator(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        k, it = cfg.kernel_size, cfg.norm_power_iters
        chans = [cfg.g_base_channels * 2 ** i for i in range(cfg.g_depth)]

        self.down = nn.ModuleList()
        cin = 1
        for c in chans:
            self.down.append(nn.Sequential(
                SNConv2d(cin, c, k, stride=2, padding=k // 2, power_iters=it),
                nn.BatchNorm2d(c),
                nn.LeakyReLU(LEAKY_SLOPE),
            ))
            cin = c

        # decoder stage j restores the resolution of encoder output j-1 (or of the input)
        skip_chans = [1] + chans[:-1]
        out_chans = [max(cfg.g_base_channels // 2, 1)] + chans[:-1]
        self.up = nn.ModuleList()
        self.up_norm = nn.ModuleList()
        h = chans[-1]
        for j in reversed(range(cfg.g_depth)):
            self.up.append(SubPixelUp(h, out_chans[j], k, it))
            self.up_norm.append(nn.Sequential(nn.BatchNorm2d(out_chans[j]), nn.LeakyReLU(LEAKY_SLOPE)))
            h = out_chans[j] + skip_chans[j]
        self.out = SNConv2d(h, 1, k, padding=k // 2, power_iters=it)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = _as_images(x)
        f = 2 ** self.cfg.g_depth
        if x.shape[-2] % f or x.shape[-1] % f:
            raise ValueError(f"input {tuple(x.shape[-2:])} not divisible by {f}")
        skips = [x]
        h = x
        for layer in self.down:
            h = layer(h)
            skips.append(h)
        skips.pop()
        for up, norm in zip(self.up, self.up_norm):
            h = torch.cat([norm(up(h)), skips.pop()], dim=1)
        # channels-last is much faster for the single-output conv on CPU
        h = h.contiguous(memory_format=torch.channels_last)
        return torch.tanh(self.out(h)).squeeze(1).contiguous()


class Discriminator(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        k, it = cfg.d_kernel_size, cfg.norm_power_iters
        layers = []
        cin = 1
        for i in range(cfg.d_layers):
            c = cfg.d_base_channels * 2 ** i
            # padding chosen so a stride-2 layer halves even sizes for k in {3, 4}
            layers += [SNConv2d(cin, c, k, stride=2, padding=(k - 1) // 2, power_iters=it),
                       nn.LeakyReLU(LEAKY_SLOPE)]
            cin = c
        self.body = nn.Sequential(*layers)
        self.out = SNConv2d(cin, 1, 3, padding=1, power_iters=it)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.out(self.body(_as_images(x))).squeeze(1)


class Siamese(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        k = cfg.kernel_size
        layers = []
        cin = 1
        for i in range(cfg.s_layers):
            c = cfg.s_base_channels * 2 ** i
            layers += [nn.Conv2d(cin, c, k, stride=2, padding=k // 2),
                       nn.BatchNorm2d(c),
                       nn.LeakyReLU(LEAKY_SLOPE)]
            cin = c
        self.body = nn.Sequential(*layers)
        self.head = nn.Linear(cin, cfg.len_S)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.body(_as_images(x))
        return self.head(h.mean(dim=(-2, -1)))


def _make_generator(seed) -> torch.Generator:
    if isinstance(seed, torch.Generator):
        return seed
    return torch.Generator().manual_seed(int(seed))


def build_generator(cfg: ModelConfig, seed=0) -> Generator:
    net = Generator(cfg)
    _init_weights(net, _make_generator(seed))
    return net


def build_discriminator(cfg: ModelConfig, seed=0) -> Discriminator:
    net = Discriminator(cfg)
    _init_weights(net, _make_generator(seed))
    return net


def build_siamese(cfg: ModelConfig, seed=0) -> Siamese:
    net = Siamese(cfg)
    _init_weights(net, _make_generator(seed))
    return net


def generator_forward(g: Generator, x: torch.Tensor) -> torch.Tensor:
    return g(x)


def discriminator_forward(d: Discriminator, x: torch.Tensor) -> torch.Tensor:
    return d(x)


def siamese_forward(s: Siamese, x: torch.Tensor) -> torch.Tensor:
    return s(x)


def g_composite(g: Generator, crops: torch.Tensor) -> torch.Tensor:
    """Translate each time-half of ``M x L`` crops separately and rejoin them.

    Both halves go through G as one batch. In eval mode the halves cannot
    influence each other; in training mode they share batch-norm statistics.
    """
    crops = crops if crops.dim() == 3 else crops.unsqueeze(0)
    width = crops.shape[-1]
    if width % 2:
        raise ValueError(f"cannot split odd width {width}")
    h = width // 2
    n = crops.shape[0]
    out = g(torch.cat([crops[..., :h], crops[..., h:]], dim=0))
    return torch.cat([out[:n], out[n:]], dim=-1)
