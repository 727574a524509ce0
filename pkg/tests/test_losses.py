"""Loss examples and invariants. Scalars are compared at <= 8 eps relative in float64."""
import itertools

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from melgan_vc import losses
from melgan_vc.losses import LossWeights

EPS = float(np.finfo(np.float64).eps)


def t64(x):
    return torch.tensor(x, dtype=torch.float64)


def close(a, b):
    a, b = float(torch.as_tensor(a).detach()), float(torch.as_tensor(b).detach())
    assert abs(a - b) <= 8 * EPS * max(abs(a), abs(b), 1.0), (a, b)


# ----------------------------------------------------------------------------
# hinge losses


@pytest.mark.parametrize("real,fake,expected", [(1.0, -1.0, 0.0), (0.0, 0.0, 2.0), (2.0, -3.0, 0.0)])
def test_d_hinge_examples(real, fake, expected):
    r = torch.full((4, 12, 6), real, dtype=torch.float64)
    f = torch.full((4, 12, 6), fake, dtype=torch.float64)
    close(losses.d_hinge_loss(r, f), expected)


def test_d_hinge_saturated_has_zero_gradient():
    r = torch.full((2, 3, 3), 2.0, dtype=torch.float64, requires_grad=True)
    f = torch.full((2, 3, 3), -3.0, dtype=torch.float64, requires_grad=True)
    losses.d_hinge_loss(r, f).backward()
    assert torch.all(r.grad == 0) and torch.all(f.grad == 0)


def test_d_hinge_matches_min_form():
    g = torch.Generator().manual_seed(0)
    r = torch.randn(3, 12, 6, generator=g, dtype=torch.float64) * 2
    f = torch.randn(3, 12, 6, generator=g, dtype=torch.float64) * 2
    zero = torch.zeros(())
    expected = -torch.minimum(zero, -1 + r).mean() - torch.minimum(zero, -1 - f).mean()
    close(losses.d_hinge_loss(r, f), expected)
    assert losses.d_hinge_loss(r, f) >= 0


def test_g_adv_examples():
    close(losses.g_adv_loss(torch.full((2, 4, 4), 0.75, dtype=torch.float64)), -0.75)
    close(losses.g_adv_loss(t64([1.0, -1.0])), 0.0)
    x = t64([0.5, -0.2, 1.5])
    y = x.clone()
    y[1] += 0.1
    assert losses.g_adv_loss(y) < losses.g_adv_loss(x)


def test_empty_batches_rejected():
    e = torch.zeros(0)
    with pytest.raises(ValueError):
        losses.d_hinge_loss(e, t64([1.0]))
    with pytest.raises(ValueError):
        losses.g_adv_loss(e)
    with pytest.raises(ValueError):
        losses.identity_from_outputs(e, e)


# ----------------------------------------------------------------------------
# transformation vectors


def test_transformation_vector_examples():
    x = t64([0.3, -2.0])
    assert torch.equal(losses.transformation_vector(x, x), torch.zeros(2, dtype=torch.float64))
    a, b = t64([1.0, 2.0]), t64([4.0, 6.0])
    assert torch.equal(losses.transformation_vector(a, b), t64([3.0, 4.0]))
    assert torch.equal(losses.transformation_vector(a, b), -losses.transformation_vector(b, a))
    with pytest.raises(ValueError):
        losses.transformation_vector(t64([1.0]), t64([1.0, 2.0]))


def test_pair_indices_order():
    i, j = losses.pair_indices(4)
    assert list(zip(i.tolist(), j.tolist())) == list(itertools.combinations(range(4), 2))
    with pytest.raises(ValueError):
        losses.pair_indices(1)


# ----------------------------------------------------------------------------
# TraVeL


def travel_oracle(src, tr):
    """Plain-python TraVeL: mean over i<j of (1 - cos) + squared distance."""
    total, count = 0.0, 0
    for i, j in itertools.combinations(range(len(src)), 2):
        t = [a - b for a, b in zip(src[i], src[j])]
        tp = [a - b for a, b in zip(tr[i], tr[j])]
        nt = sum(v * v for v in t) ** 0.5
        ntp = sum(v * v for v in tp) ** 0.5
        cos = sum(a * b for a, b in zip(t, tp)) / (nt * ntp) if nt > 0 and ntp > 0 else 0.0
        total += (1 - cos) + sum((a - b) ** 2 for a, b in zip(t, tp))
        count += 1
    return total / count


def test_travel_orthogonal_unit_vectors():
    close(losses.travel_from_encodings(t64([[1.0, 0.0], [0.0, 0.0]]), t64([[0.0, 1.0], [0.0, 0.0]])), 3.0)


def test_travel_collinear_magnitude_gap():
    close(losses.travel_from_encodings(t64([[2.0, 0.0], [0.0, 0.0]]), t64([[1.0, 0.0], [0.0, 0.0]])), 1.0)


def test_travel_zero_vector_fallback():
    # t = 0 for the single pair: cosine term counts as 1, distance term |t'|^2 = 1
    close(losses.travel_from_encodings(t64([[1.0, 1.0], [1.0, 1.0]]), t64([[1.0, 0.0], [0.0, 0.0]])), 2.0)


def test_travel_identity_translation_is_zero():
    s = torch.nn.Sequential(torch.nn.Flatten(), torch.nn.Linear(12, 5)).double()
    x = torch.randn(6, 3, 4, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    close(losses.travel_loss(s, x, x), 0.0)


@given(st.lists(st.lists(st.floats(-5, 5), min_size=3, max_size=3), min_size=4, max_size=4),
       st.lists(st.lists(st.floats(-5, 5), min_size=3, max_size=3), min_size=4, max_size=4))
@settings(max_examples=100, deadline=None)
def test_travel_matches_python_oracle(src, tr):
    got = float(losses.travel_from_encodings(t64(src), t64(tr)))
    assert got == pytest.approx(travel_oracle(src, tr), rel=1e-12, abs=1e-12)


def test_travel_and_margin_invariant_to_relabeling():
    g = torch.Generator().manual_seed(4)
    src = torch.randn(5, 7, generator=g, dtype=torch.float64)
    tr = torch.randn(5, 7, generator=g, dtype=torch.float64)
    perm = torch.tensor([3, 0, 4, 1, 2])
    a = losses.travel_from_encodings(src, tr)
    b = losses.travel_from_encodings(src[perm], tr[perm])
    assert float(a) == pytest.approx(float(b), rel=1e-12)
    assert float(losses.margin_loss(src, 3.0)) == pytest.approx(float(losses.margin_loss(src[perm], 3.0)), rel=1e-12)


def test_travel_needs_pairs():
    with pytest.raises(ValueError):
        losses.travel_from_encodings(t64([[1.0]]), t64([[1.0]]))
    with pytest.raises(ValueError):
        losses.travel_from_encodings(t64([[1.0], [2.0]]), t64([[1.0]]))


# ----------------------------------------------------------------------------
# margin


def test_margin_examples():
    close(losses.margin_loss(t64([[0.0, 0.0], [10.0, 0.0], [0.0, 20.0]]), 10.0), 0.0)
    close(losses.margin_loss(t64([[1.0, 2.0], [1.0, 2.0]]), 10.0), 10.0)
    close(losses.margin_loss(t64([[0.0, 0.0], [3.0, 4.0]]), 10.0), 5.0)
    with pytest.raises(ValueError):
        losses.margin_loss(t64([[1.0, 2.0]]), 1.0)


@given(st.lists(st.lists(st.floats(-5, 5), min_size=2, max_size=2), min_size=2, max_size=6),
       st.floats(0.1, 10))
@settings(max_examples=100, deadline=None)
def test_margin_zero_iff_all_distances_reach_delta(enc, delta):
    e = t64(enc)
    dist = torch.cdist(e, e)[tuple(losses.pair_indices(len(enc)))]
    loss = float(losses.margin_loss(e, delta))
    assert loss >= 0
    assert (loss == 0) == bool(torch.all(dist >= delta))


def test_margin_gradient_finite_at_coincident_points():
    e = t64([[1.0, 2.0], [1.0, 2.0]]).requires_grad_()
    losses.margin_loss(e, 1.0).backward()
    assert torch.all(torch.isfinite(e.grad))


# ----------------------------------------------------------------------------
# identity


def test_identity_examples():
    b = torch.randn(4, 6, 8, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    close(losses.identity_loss(lambda x: x, b), 0.0)
    close(losses.identity_loss(lambda x: x + 0.25, b), 0.0625)
    shift = lambda x: torch.tanh(x) * 0.5  # noqa: E731
    close(losses.identity_loss(shift, b), losses.identity_loss(shift, b.flip(0)))


# ----------------------------------------------------------------------------
# totals


def test_totals_zero_weights():
    w = LossWeights(alpha=0.0, beta=0.0, gamma=0.0)
    adv, idl, tv, mg = t64(1.5), t64(2.0), t64(3.0), t64(4.0)
    close(losses.total_g_loss(adv, idl, tv, w), 1.5)
    close(losses.total_s_loss(tv, mg, w), 0.0)


def test_totals_voice_weights():
    w = LossWeights(alpha=1.0, beta=10.0, gamma=10.0)
    adv, idl, tv, mg = t64(1.0), t64(2.0), t64(3.0), t64(4.0)
    close(losses.total_g_loss(adv, idl, tv, w), 33.0)
    close(losses.total_s_loss(tv, mg, w), 70.0)


def test_total_d_is_pass_through():
    x = t64(0.37)
    assert losses.total_d_loss(x) is x


def test_alpha_zero_ignores_identity_even_if_nonfinite():
    w = LossWeights(alpha=0.0)
    close(losses.total_g_loss(t64(1.0), t64(float("nan")), t64(0.5), w), 6.0)


def test_presets_and_validation():
    assert (losses.VOICE.alpha, losses.VOICE.beta, losses.VOICE.gamma) == (1.0, 10.0, 10.0)
    assert (losses.MUSIC.alpha, losses.MUSIC.beta, losses.MUSIC.gamma) == (0.0, 10.0, 10.0)
    assert losses.PRESETS == {"voice": losses.VOICE, "music": losses.MUSIC}
    with pytest.raises(ValueError):
        LossWeights(alpha=-1.0)
    with pytest.raises(ValueError):
        LossWeights(delta=0.0)
