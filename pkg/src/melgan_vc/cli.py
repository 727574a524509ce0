"""``melgan-vc`` command line: prepare, train, convert, plot."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import dsp
from .chunker import ChunkConfig
from .config import RunConfig, format_config, parse_config_text
from .losses import PRESETS
from .trainer import Dataset, train

log = logging.getLogger("melgan_vc")

MANIFEST_SUFFIX = ".manifest.json"


class CliError(Exception):
    pass


@dataclass
class CorpusManifest:
    entries: list  # dicts with source, offset, frames
    stats: dsp.NormalizationStats
    config_digest: str
    dsp_config: dict
    skipped: list

    def to_json(self) -> str:
        return json.dumps({
            "config_digest": self.config_digest,
            "dsp": self.dsp_config,
            "stats": {"min_db": self.stats.min_db, "ref_db": self.stats.ref_db},
            "entries": self.entries,
            "skipped": self.skipped,
        }, indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, cache_path) -> "CorpusManifest":
        path = manifest_path(cache_path)
        if not path.is_file():
            raise CliError(f"missing manifest {path}")
        d = json.loads(path.read_text(encoding="utf-8"))
        stats = dsp.NormalizationStats(d["stats"]["min_db"], d["stats"]["ref_db"])
        return cls(d["entries"], stats, d["config_digest"], d["dsp"], d.get("skipped", []))


def manifest_path(cache_path) -> Path:
    cache_path = Path(cache_path)
    return cache_path.with_name(cache_path.name + MANIFEST_SUFFIX)


def _dsp_from(args) -> dsp.DspConfig:
    base = RunConfig()
    if args.config:
        base = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
    overrides = {}
    if args.hop_size is not None:
        overrides["hop_size"] = args.hop_size
    if args.sample_rate is not None:
        overrides["sample_rate"] = args.sample_rate
    return base.replace(**overrides).dsp if overrides else base.dsp


# ----------------------------------------------------------------------------
# prepare


def cmd_prepare(args) -> int:
    config = _dsp_from(args)
    chunk = ChunkConfig.from_hop_size(config.hop_size)
    in_dir = Path(args.input_dir)
    if not in_dir.is_dir():
        raise CliError(f"not a directory: {in_dir}")
    files = sorted(p for p in in_dir.rglob("*") if p.suffix.lower() in (".wav", ".wave") and p.is_file())

    # pass 1: corpus level, frame counts
    usable, skipped = [], []
    ref_db = -np.inf
    for path in files:
        rel = path.relative_to(in_dir).as_posix()
        try:
            w = dsp.load_audio(path, config)
        except (ValueError, OSError) as exc:
            log.warning("skipping %s: %s", rel, exc)
            skipped.append({"source": rel, "reason": str(exc)})
            continue
        frames = dsp.n_frames(len(w), config.hop_size)
        if frames < chunk.L or len(w) < config.window_size:
            log.warning("skipping %s: %d frames, fewer than L=%d", rel, frames, chunk.L)
            skipped.append({"source": rel, "reason": f"{frames} frames < L={chunk.L}"})
            continue
        ref_db = max(ref_db, float(dsp.amplitude_to_db(dsp.waveform_to_mel_linear(w, config), config).max()))
        usable.append((path, rel))
    if not usable:
        raise CliError(f"no usable audio files in {in_dir} ({len(skipped)} skipped)")
    if not ref_db > config.min_db:
        raise CliError("corpus is silent")
    stats = dsp.NormalizationStats(config.min_db, ref_db)

    # pass 2: records
    out = Path(args.output)
    entries = []
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "wb") as fh:
            offset = 0
            for path, rel in usable:
                m = dsp.waveform_to_spectrogram(dsp.load_audio(path, config), stats, config)
                entries.append({"source": rel, "offset": offset, "frames": m.frames})
                offset += dsp.write_cache_record(fh, m)
        manifest = CorpusManifest(entries, stats, config.digest(), config.to_dict(), skipped)
        manifest_path(out).write_text(manifest.to_json(), encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}") from exc
    if skipped:
        log.warning("%d file(s) skipped", len(skipped))
    print(out)
    print(manifest_path(out))
    return 0


# ----------------------------------------------------------------------------
# train


def _renormalize(values: np.ndarray, src: dsp.NormalizationStats, dst: dsp.NormalizationStats) -> np.ndarray:
    d = (values.astype(np.float64) + 1.0) * 0.5 * (src.ref_db - src.min_db) + src.min_db
    d = np.clip(d, dst.min_db, dst.ref_db)
    return (2.0 * (d - dst.min_db) / (dst.ref_db - dst.min_db) - 1.0).astype(np.float32)


def load_domain(cache_path) -> tuple:
    manifest = CorpusManifest.load(cache_path)
    specs = [dsp.read_cache_at(cache_path, e["offset"], manifest.config_digest) for e in manifest.entries]
    return manifest, specs


def cmd_train(args) -> int:
    man_a, specs_a = load_domain(args.domain_a)
    man_b, specs_b = load_domain(args.domain_b)
    if man_a.config_digest != man_b.config_digest:
        raise CliError(f"DSP config digest mismatch between domains: {man_a.config_digest} vs {man_b.config_digest}")

    weights = PRESETS[args.preset]
    base = RunConfig().replace(
        **{k: v for k, v in man_a.dsp_config.items()},
        alpha=weights.alpha, beta=weights.beta, gamma=weights.gamma,
    )
    try:
        config = base
        if args.config:
            config = parse_config_text(Path(args.config).read_text(encoding="utf-8"), base)
        if args.total_steps is not None:
            config = config.replace(total_steps=args.total_steps)
    except (ValueError, KeyError) as exc:
        raise CliError(f"invalid config: {exc}") from exc
    if config.dsp.digest() != man_a.config_digest:
        raise CliError("config DSP settings do not match the caches' DSP config digest")

    # one shared normalization: the louder reference wins so nothing clips
    stats = dsp.NormalizationStats(min(man_a.stats.min_db, man_b.stats.min_db),
                                   max(man_a.stats.ref_db, man_b.stats.ref_db))
    dom_a = [_renormalize(m.values, m.stats, stats) for m in specs_a]
    dom_b = [_renormalize(m.values, m.stats, stats) for m in specs_b]
    ds = Dataset(dom_a, dom_b, stats)

    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(format_config(config), encoding="utf-8")

    from .inference import generator_fn, translate_spectrogram

    def export_sample(state, ckpt_path):
        values = translate_spectrogram(dom_a[0], generator_fn(state.g), config.chunk)
        m = dsp.MelSpectrogram(np.clip(values, -1, 1), stats, config.dsp.digest())
        out = run_dir / f"sample_{state.step:08d}.wav"
        dsp.save_audio(out, dsp.spectrogram_to_waveform(m, config.dsp))
        print(ckpt_path)

    state = train(ds, config, run_dir=run_dir, on_checkpoint=export_sample)
    print(run_dir / "scalars.log")
    log.info("finished at step %d", state.step)
    return 0


# ----------------------------------------------------------------------------
# convert


def cmd_convert(args) -> int:
    from .checkpoint import CheckpointError, load_checkpoint
    from .inference import convert_with_state

    try:
        state = load_checkpoint(args.checkpoint)
    except (CheckpointError, OSError) as exc:
        raise CliError(f"cannot load checkpoint {args.checkpoint}: {exc}") from exc
    try:
        w = dsp.load_audio(args.input, state.config.dsp)
    except (ValueError, OSError) as exc:
        raise CliError(f"cannot read {args.input}: {exc}") from exc
    out_wave, _, _ = convert_with_state(w, state)
    dsp.save_audio(args.output, out_wave)
    print(args.output)
    return 0


# ----------------------------------------------------------------------------
# plot


def spectrogram_pgm(values: np.ndarray) -> bytes:
    """Binary PGM, one row per mel channel with the lowest channel at the bottom."""
    v = np.asarray(values, dtype=np.float64)
    pixels = np.clip(np.round((v + 1.0) * 127.5), 0, 255).astype(np.uint8)[::-1]
    rows, cols = pixels.shape
    return f"P5\n{cols} {rows}\n255\n".encode() + pixels.tobytes()


def cmd_plot(args) -> int:
    path = Path(args.cache)
    mpath = manifest_path(path)
    if mpath.is_file():
        entries = CorpusManifest.load(path).entries
        if not 0 <= args.index < len(entries):
            raise CliError(f"index {args.index} out of range (cache has {len(entries)} entries)")
        m = dsp.read_cache_at(path, entries[args.index]["offset"])
    else:
        records = list(dsp.iter_cache(path))
        if not 0 <= args.index < len(records):
            raise CliError(f"index {args.index} out of range (cache has {len(records)} entries)")
        m = records[args.index]
    Path(args.out).write_bytes(spectrogram_pgm(m.values))
    print(args.out)
    return 0


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="melgan-vc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prepare", help="compute a spectrogram cache from a directory of WAV files")
    sp.add_argument("--input-dir", required=True)
    sp.add_argument("--output", required=True, help="cache file; manifest is written next to it")
    sp.add_argument("--config", help="key = value file (DSP keys are used)")
    sp.add_argument("--hop-size", type=int)
    sp.add_argument("--sample-rate", type=int)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("train", help="train on two prepared caches")
    sp.add_argument("--domain-a", required=True)
    sp.add_argument("--domain-b", required=True)
    sp.add_argument("--config", help="key = value file")
    sp.add_argument("--out", required=True, help="run directory")
    sp.add_argument("--preset", choices=sorted(PRESETS), default="voice",
                    help="loss weights before config overrides (music drops the identity term)")
    sp.add_argument("--total-steps", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("convert", help="translate a WAV file of any length")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", dest="output", required=True)
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("plot", help="write one cached spectrogram as a PGM image")
    sp.add_argument("--cache", required=True)
    sp.add_argument("--index", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, FloatingPointError) as exc:
        print(f"melgan-vc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
