import numpy as np
import pytest
import torch

from melgan_vc.dsp import DspConfig
from melgan_vc.models import ModelConfig

torch.set_num_threads(1)

_ACCEPTANCE_LINES = []


def record_acceptance(number: int, name: str, passed: bool, detail: str = "") -> str:
    line = f"ACCEPTANCE {number} {name}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    _ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def dsp_config():
    return DspConfig()


@pytest.fixture
def tiny_model():
    """Small networks that still accept 192 x 48 chunks."""
    return ModelConfig(len_S=16, g_base_channels=4, g_depth=3, d_layers=4, d_base_channels=4,
                       s_layers=4, s_base_channels=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
