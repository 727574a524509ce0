"""Non-parallel audio domain translation on mel spectrograms (MelGAN-VC)."""
from .chunker import ChunkConfig
from .config import RunConfig, TrainConfig, load_config
from .dsp import DspConfig, MelSpectrogram, NormalizationStats, Waveform
from .losses import LossWeights
from .models import ModelConfig

__version__ = "0.1.0"

__all__ = [
    "ChunkConfig", "DspConfig", "LossWeights", "MelSpectrogram", "ModelConfig",
    "NormalizationStats", "RunConfig", "TrainConfig", "Waveform", "load_config",
]
