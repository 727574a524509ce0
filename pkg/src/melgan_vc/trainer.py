"""Alternating D / joint G+S training with two-timescale Adam."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import torch

from . import losses
from .chunker import ChunkConfig, random_crop
from .config import RunConfig, TrainConfig
from .dsp import MelSpectrogram, NormalizationStats
from .models import (Discriminator, Generator, Siamese, build_discriminator, build_generator,
                     build_siamese, g_composite)

log = logging.getLogger(__name__)

__all__ = [
    "Batch", "Dataset", "TrainConfig", "TrainState", "d_step", "gs_step",
    "new_train_state", "sample_training_batch", "train",
]


@dataclass
class Dataset:
    domain_a: List[np.ndarray]
    domain_b: List[np.ndarray]
    stats: NormalizationStats

    def __post_init__(self):
        if not self.domain_a or not self.domain_b:
            raise ValueError("both domains need at least one spectrogram")
        self.domain_a = [_matrix(x) for x in self.domain_a]
        self.domain_b = [_matrix(x) for x in self.domain_b]
        mel = {x.shape[0] for x in self.domain_a + self.domain_b}
        if len(mel) != 1:
            raise ValueError(f"mixed mel-channel counts in dataset: {sorted(mel)}")

    def check(self, chunk: ChunkConfig) -> None:
        for name, dom in (("A", self.domain_a), ("B", self.domain_b)):
            for i, x in enumerate(dom):
                if x.shape[1] < chunk.L:
                    raise ValueError(f"domain {name} item {i} has {x.shape[1]} frames < L={chunk.L}")

    @property
    def mel_channels(self) -> int:
        return self.domain_a[0].shape[0]


def _matrix(x) -> np.ndarray:
    values = x.values if isinstance(x, MelSpectrogram) else x
    return np.ascontiguousarray(values, dtype=np.float32)


@dataclass
class Batch:
    crops_a: torch.Tensor   # (B, M, L)
    crops_b: torch.Tensor   # (B, M, L)
    id_chunks: torch.Tensor  # (B, M, L/2)


@dataclass
class TrainState:
    config: RunConfig
    stats: NormalizationStats
    g: Generator
    d: Discriminator
    s: Siamese
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    opt_s: torch.optim.Adam
    rng: np.random.Generator
    step: int = 0
    last: Dict[str, float] = field(default_factory=dict)

    def networks(self) -> Dict[str, torch.nn.Module]:
        return {"g": self.g, "d": self.d, "s": self.s}

    def optimizers(self) -> Dict[str, torch.optim.Adam]:
        return {"g": self.opt_g, "d": self.opt_d, "s": self.opt_s}


def _adam(params, lr: float, tc: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=lr, betas=(tc.adam_beta1, tc.adam_beta2), eps=tc.adam_eps,
                            foreach=False)


def new_train_state(config: RunConfig, stats: NormalizationStats) -> TrainState:
    """Freshly initialized networks and optimizers, all seeded from ``train.seed``."""
    tc = config.train
    gen = torch.Generator().manual_seed(tc.seed)
    g = build_generator(config.model, gen)
    d = build_discriminator(config.model, gen)
    s = build_siamese(config.model, gen)
    return TrainState(
        config=config, stats=stats, g=g, d=d, s=s,
        opt_g=_adam(g.parameters(), tc.lr_gs, tc),
        opt_d=_adam(d.parameters(), tc.lr_d, tc),
        opt_s=_adam(s.parameters(), tc.lr_gs, tc),
        rng=np.random.default_rng(tc.seed),
    )


def sample_training_batch(ds: Dataset, cfg: TrainConfig, chunk_cfg: ChunkConfig,
                          rng: np.random.Generator) -> Batch:
    """``batch_size`` crops from each domain plus independent half-width B chunks."""
    def crops(domain):
        out = []
        for _ in range(cfg.batch_size):
            idx = int(rng.integers(len(domain)))
            out.append(random_crop(domain[idx], chunk_cfg, rng, idx).values)
        return np.stack(out)

    a = crops(ds.domain_a)
    b = crops(ds.domain_b)
    h = chunk_cfg.half
    ids = []
    for _ in range(cfg.batch_size):
        x = ds.domain_b[int(rng.integers(len(ds.domain_b)))]
        off = int(rng.integers(0, x.shape[1] - h + 1))
        ids.append(x[:, off:off + h])
    return Batch(torch.from_numpy(a), torch.from_numpy(b), torch.from_numpy(np.stack(ids)))


def _check_finite(name: str, value: torch.Tensor, step: int) -> None:
    if not torch.isfinite(value):
        raise FloatingPointError(f"non-finite {name} ({value.item()}) at step {step}")


def d_step(state: TrainState, batch: Batch) -> float:
    """One Adam update of D on real B crops versus composite translations of A crops."""
    state.g.eval()
    with torch.no_grad():
        fake = g_composite(state.g, batch.crops_a)
    state.d.train()
    scores = state.d(torch.cat([batch.crops_b, fake], dim=0))
    n = batch.crops_b.shape[0]
    loss = losses.total_d_loss(losses.d_hinge_loss(scores[:n], scores[n:]))
    _check_finite("D loss", loss, state.step)
    state.opt_d.zero_grad(set_to_none=True)
    loss.backward()
    state.opt_d.step()
    return loss.item()


def gs_step(state: TrainState, batch: Batch) -> Dict[str, float]:
    """Joint update: G on adv + alpha*id + beta*TraVeL, S on beta*TraVeL + gamma*margin.

    S encodes source and translated chunks in separate passes, so the margin
    term does not depend on G, and adversarial and identity terms do not depend
    on S. One backward pass of ``L_G + gamma * margin`` then yields exactly
    dL_G/dG for G and dL_S/dS for S. D is evaluated but never updated.
    """
    w = state.config.loss
    g, d, s = state.g, state.d, state.s
    g.train()
    s.train()
    d.eval()

    crops = batch.crops_a
    n = crops.shape[0]
    h = crops.shape[-1] // 2
    halves = torch.cat([crops[..., :h], crops[..., h:]], dim=0)
    if w.alpha != 0:
        out = g(torch.cat([halves, batch.id_chunks], dim=0))
        translated, id_out = out[:2 * n], out[2 * n:]
        identity = losses.identity_from_outputs(id_out, batch.id_chunks)
    else:
        translated = g(halves)
        identity = torch.zeros(())

    fake = torch.cat([translated[:n], translated[n:]], dim=-1)
    adv = losses.g_adv_loss(d(fake))

    src_enc = s(halves)
    tr_enc = s(translated)
    travel = losses.travel_from_encodings(src_enc, tr_enc)
    margin = losses.margin_loss(src_enc, w.delta)

    g_total = losses.total_g_loss(adv, identity, travel, w)
    s_total = losses.total_s_loss(travel, margin, w)
    _check_finite("G loss", g_total, state.step)
    _check_finite("S loss", s_total, state.step)

    for p in d.parameters():
        p.requires_grad_(False)
    try:
        state.opt_g.zero_grad(set_to_none=True)
        state.opt_s.zero_grad(set_to_none=True)
        (g_total + w.gamma * margin).backward()
    finally:
        for p in d.parameters():
            p.requires_grad_(True)
    state.opt_g.step()
    state.opt_s.step()

    return {
        "g_adv": adv.item(),
        "g_id": identity.item(),
        "travel": travel.item(),
        "margin": margin.item(),
        "g_total": g_total.item(),
        "s_total": s_total.item(),
    }


class ScalarLog:
    """Append-only ``step<TAB>name<TAB>value`` lines."""

    def __init__(self, path):
        self.path = Path(path)

    def write(self, step: int, values: Dict[str, float]) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            for name, value in values.items():
                fh.write(f"{step}\t{name}\t{value!r}\n")


def read_scalar_log(path) -> List[tuple]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        step, name, value = line.split("\t")
        rows.append((int(step), name, float(value)))
    return rows


def checkpoint_path(run_dir, step: int) -> Path:
    return Path(run_dir) / f"ckpt_{step:08d}.mgvc"


def train(ds: Dataset, config: RunConfig, run_dir=None, state: Optional[TrainState] = None,
          on_step: Optional[Callable[[TrainState, Dict[str, float]], None]] = None,
          on_checkpoint: Optional[Callable[[TrainState, Path], None]] = None,
          stop: Optional[Callable[[TrainState, Dict[str, float]], bool]] = None) -> TrainState:
    """Run until ``config.train.total_steps`` G+S updates have been made.

    Each step makes ``d_updates_per_gs`` D updates on fresh batches, then one
    joint G+S update. Passing ``state`` resumes from it. With ``run_dir`` set,
    checkpoints go to ``ckpt_<step>.mgvc`` (including one for the initial state
    of a fresh run) and scalars to ``scalars.log``. ``stop`` may end training
    early; it is called after every step.
    """
    from .checkpoint import save_checkpoint

    tc = config.train
    ds.check(config.chunk)
    if ds.mel_channels != config.dsp.mel_channels:
        raise ValueError(f"dataset has {ds.mel_channels} mel channels, config expects {config.dsp.mel_channels}")
    fresh = state is None
    if fresh:
        state = new_train_state(config, ds.stats)
    scalars = None
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        scalars = ScalarLog(run_dir / "scalars.log")

    def checkpoint():
        if run_dir is None:
            return
        path = checkpoint_path(run_dir, state.step)
        save_checkpoint(state, path)
        log.info("checkpoint %s", path)
        if on_checkpoint is not None:
            on_checkpoint(state, path)

    if fresh:
        checkpoint()
    while state.step < tc.total_steps:
        d_losses = [d_step(state, sample_training_batch(ds, tc, config.chunk, state.rng))
                    for _ in range(tc.d_updates_per_gs)]
        values = {"d_loss": d_losses[-1]}
        values.update(gs_step(state, sample_training_batch(ds, tc, config.chunk, state.rng)))
        state.step += 1
        state.last = values
        if on_step is not None:
            on_step(state, values)
        if scalars is not None and state.step % tc.log_every == 0:
            scalars.write(state.step, values)
        if state.step % tc.log_every == 0:
            log.info("step %d  %s", state.step, "  ".join(f"{k}={v:.4f}" for k, v in values.items()))
        halt = stop is not None and stop(state, values)
        if state.step % tc.checkpoint_every == 0 or state.step == tc.total_steps or halt:
            checkpoint()
        if halt:
            break
    return state
