import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melgan_vc.chunker import (PAD_VALUE, ChunkConfig, ChunkSequence, chunk_sequence, concat, random_crop,
                               split_crop, unchunk)

CFG = ChunkConfig()


def spec(t, mel=8, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, (mel, t)).astype(np.float32)


def test_config_defaults():
    assert (CFG.L, CFG.half) == (96, 48)
    assert ChunkConfig.from_hop_size(192) == CFG
    with pytest.raises(ValueError):
        ChunkConfig(L=95)


def test_crop_of_exact_width_is_whole(rng):
    x = spec(96)
    c = random_crop(x, CFG, rng)
    assert c.offset == 0
    np.testing.assert_array_equal(c.values, x)


def test_crop_offsets_cover_both_positions():
    x = spec(97)
    rng = np.random.default_rng(0)
    seen = {random_crop(x, CFG, rng).offset for _ in range(1000)}
    assert seen == {0, 1}


def test_crop_is_plain_slice(rng):
    x = spec(300)
    c = random_crop(x, CFG, rng, source_id=5)
    assert c.source_id == 5
    np.testing.assert_array_equal(c.values, x[:, c.offset:c.offset + 96])


def test_crop_too_narrow(rng):
    with pytest.raises(ValueError):
        random_crop(spec(95), CFG, rng)


def test_split_halves():
    x = spec(96)
    left, right = split_crop(x)
    assert left.shape == right.shape == (8, 48)
    np.testing.assert_array_equal(concat([left, right]), x)
    const = np.full((4, 96), 0.25)
    a, b = split_crop(const)
    assert np.all(a == 0.25) and np.all(b == 0.25)
    with pytest.raises(ValueError):
        split_crop(spec(95))


def test_concat_cases():
    a = spec(48, mel=192)
    np.testing.assert_array_equal(concat([a]), a)
    assert concat([a, spec(48, mel=192, seed=1)]).shape == (192, 96)
    with pytest.raises(ValueError):
        concat([])
    with pytest.raises(ValueError):
        concat([spec(48, mel=192), spec(48, mel=80)])


@pytest.mark.parametrize("t,n,pad", [(96, 2, 0), (100, 3, 44), (1, 1, 47)])
def test_chunk_counts(t, n, pad):
    seq = chunk_sequence(spec(t), CFG)
    assert (len(seq.chunks), seq.pad_frames, seq.original_frames) == (n, pad, t)
    assert all(c.shape == (8, 48) for c in seq.chunks)


def test_padding_is_silence_and_trimmed():
    seq = chunk_sequence(np.zeros((8, 100)), CFG)
    assert np.all(seq.chunks[-1][:, 4:] == PAD_VALUE)
    out = unchunk(seq)
    assert out.shape == (8, 100) and np.all(out == 0)


def test_unchunk_rejects_inconsistent_metadata():
    seq = chunk_sequence(spec(100), CFG)
    with pytest.raises(ValueError):
        unchunk(ChunkSequence(seq.chunks, 100, 40))
    with pytest.raises(ValueError):
        unchunk(ChunkSequence(seq.chunks[:2], 100, 44))
    with pytest.raises(ValueError):
        unchunk(ChunkSequence([], 0, 0))


@given(t=st.integers(min_value=1, max_value=2000), seed=st.integers(0, 2 ** 31))
@settings(max_examples=200, deadline=None)
def test_chunk_roundtrip_bit_exact(t, seed):
    x = spec(t, mel=4, seed=seed)
    seq = chunk_sequence(x, CFG)
    assert len(seq.chunks) * CFG.half == t + seq.pad_frames
    assert 0 <= seq.pad_frames < CFG.half
    out = unchunk(seq)
    assert out.dtype == x.dtype
    np.testing.assert_array_equal(out, x)


@given(half=st.integers(min_value=1, max_value=200), seed=st.integers(0, 2 ** 31))
@settings(max_examples=100, deadline=None)
def test_split_concat_roundtrip_bit_exact(half, seed):
    x = spec(2 * half, mel=3, seed=seed)
    np.testing.assert_array_equal(concat(split_crop(x)), x)
