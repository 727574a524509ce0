import numpy as np

from melgan_vc.config import RunConfig
from melgan_vc.dsp import NormalizationStats
from melgan_vc.trainer import Dataset

STATS = NormalizationStats(-100.0, 10.0)

TINY = dict(len_S=16, g_base_channels=4, d_base_channels=4, s_base_channels=4, batch_size=4,
            total_steps=3, checkpoint_every=1000, log_every=1)


def tiny_config(**overrides) -> RunConfig:
    return RunConfig().replace(**{**TINY, **overrides})


def random_dataset(n_items=4, mel=192, widths=(96, 110, 131, 150), seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    a = [rng.uniform(-1, 1, (mel, widths[i % len(widths)])).astype(np.float32) for i in range(n_items)]
    b = [rng.uniform(-1, 0, (mel, widths[(i + 1) % len(widths)])).astype(np.float32) for i in range(n_items)]
    return Dataset(a, b, STATS)
