"""Translate low-band noise into high-band noise.

Builds two synthetic domains (band-limited noise with a low or a high
spectral envelope), trains a small model for a few hundred steps with the
music loss weights, and reports how far the mean mel-band centroid of
translated held-out clips moved toward the target domain. The final
checkpoint can be used with ``melgan-vc convert``.

    python demos/toy_translation.py [steps]
"""
import sys
import time
from pathlib import Path

import numpy as np
import torch

from melgan_vc import losses
from melgan_vc.checkpoint import save_checkpoint
from melgan_vc.cli import _renormalize
from melgan_vc.config import RunConfig
from melgan_vc.inference import convert_with_state, generator_fn, translate_spectrogram
from melgan_vc.toy import LOW_BAND, band_noise, make_domains
from melgan_vc.dsp import save_audio
from melgan_vc.trainer import Dataset, train

OUT = Path(__file__).resolve().parent / "out"


def centroid(values):
    w = (np.clip(values, -1, 1) + 1) / 2
    bands = np.arange(values.shape[0])[:, None]
    return float(((w * bands).sum(0) / w.sum(0)).mean() / (values.shape[0] - 1))


def main(steps=300):
    torch.set_num_threads(1)
    (dom_a, dom_b), stats = make_domains(16, 2.0, seed=0)
    (held_out,), _ = make_domains(8, 2.0, seed=99, bands=[LOW_BAND])

    # g_depth 4 widens the frequency receptive field enough to move a whole band
    config = RunConfig().replace(total_steps=steps, g_depth=4, g_base_channels=8, d_base_channels=4,
                                 s_base_channels=4, log_every=50).replace(**vars(losses.MUSIC))
    t0 = time.time()

    def report(state, values):
        if state.step % 50 == 0:
            print(f"step {state.step:4d}  {time.time() - t0:5.0f}s  "
                  + "  ".join(f"{k}={v:.3f}" for k, v in values.items()))

    state = train(Dataset(dom_a, dom_b, stats), config, on_step=report)

    fn = generator_fn(state.g)
    c_a = np.mean([centroid(m.values) for m in dom_a])
    c_b = np.mean([centroid(m.values) for m in dom_b])
    c_ab = np.mean([centroid(translate_spectrogram(_renormalize(m.values, m.stats, stats), fn, config.chunk))
                    for m in held_out])
    print(f"centroid A {c_a:.3f}  B {c_b:.3f}  A->B {c_ab:.3f}  shift {(c_ab - c_a) / (c_b - c_a):.2f}")

    OUT.mkdir(exist_ok=True)
    save_checkpoint(state, OUT / "toy.mgvc")
    w = band_noise(3.0, LOW_BAND, np.random.default_rng(1))
    out, _, _ = convert_with_state(w, state)
    save_audio(OUT / "toy_source.wav", w)
    save_audio(OUT / "toy_translated.wav", out)
    print(f"wrote {OUT / 'toy.mgvc'} and example audio in {OUT}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 300)
