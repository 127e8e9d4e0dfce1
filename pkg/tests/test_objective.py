import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from porcelain_mtl.errors import EmptyBatch, ShapeMismatch, TargetOutOfRange
from porcelain_mtl.objective import cross_entropy, total_loss

from oracles import mp_cross_entropy

WIDTHS = {"dynasty": 2, "ware": 10, "glaze": 8, "type": 12}


@pytest.mark.parametrize("k", [2, 8, 10, 12])
def test_uniform_logits_give_log_k(k):
    loss = cross_entropy(torch.zeros(3, k), torch.zeros(3, dtype=torch.long))
    assert abs(float(loss) - math.log(k)) < 1e-6


def test_confident_target_near_zero():
    logits = torch.zeros(1, 5, dtype=torch.float64)
    logits[0, 3] = 30.0
    assert float(cross_entropy(logits, torch.tensor([3]))) < 1e-9


def test_extreme_logits_stay_finite():
    logits = torch.tensor([[1000.0, 0.0]])
    loss = float(cross_entropy(logits, torch.tensor([1])))
    assert math.isfinite(loss)
    assert loss == pytest.approx(mp_cross_entropy([1000.0, 0.0], 1), rel=1e-6)


def test_errors():
    with pytest.raises(EmptyBatch):
        cross_entropy(torch.zeros(0, 3), torch.zeros(0, dtype=torch.long))
    with pytest.raises(TargetOutOfRange):
        cross_entropy(torch.zeros(2, 3), torch.tensor([0, 3]))
    with pytest.raises(TargetOutOfRange):
        cross_entropy(torch.zeros(2, 3), torch.tensor([-1, 0]))
    with pytest.raises(ShapeMismatch):
        cross_entropy(torch.zeros(2, 3), torch.tensor([0]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(2, 12), st.integers(0, 10_000))
def test_matches_extended_precision_oracle(n, k, seed):
    g = torch.Generator().manual_seed(seed)
    logits = torch.randn(n, k, generator=g, dtype=torch.float64) * 20
    targets = torch.randint(0, k, (n,), generator=g)
    ours = cross_entropy(logits, targets, reduction="none")
    for i in range(n):
        ref = mp_cross_entropy(logits[i].tolist(), int(targets[i]))
        assert float(ours[i]) == pytest.approx(ref, rel=1e-10, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(-50, 50))
def test_shift_invariance(seed, shift):
    g = torch.Generator().manual_seed(seed)
    logits = torch.randn(4, 7, generator=g, dtype=torch.float64)
    targets = torch.randint(0, 7, (4,), generator=g)
    a = cross_entropy(logits, targets, reduction="none")
    b = cross_entropy(logits + shift, targets, reduction="none")
    assert torch.allclose(a, b, atol=1e-6, rtol=0)
    assert bool((a >= 0).all())


def test_gradient_is_softmax_minus_onehot():
    g = torch.Generator().manual_seed(0)
    logits = torch.randn(5, 10, generator=g, requires_grad=True)
    targets = torch.randint(0, 10, (5,), generator=g)
    cross_entropy(logits, targets, reduction="sum").backward()
    expected = torch.softmax(logits.detach(), 1) - torch.nn.functional.one_hot(targets, 10)
    assert torch.allclose(logits.grad, expected, atol=1e-6)


def _bundle(n, fill=None, seed=0):
    g = torch.Generator().manual_seed(seed)
    return {k: (torch.full((n, w), fill) if fill is not None else torch.randn(n, w, generator=g))
            for k, w in WIDTHS.items()}


def test_total_uniform():
    out = total_loss(_bundle(4, 0.0), torch.zeros(4, 4, dtype=torch.long))
    assert float(out.l_total) == pytest.approx(math.log(2) + math.log(10) + math.log(8) + math.log(12), abs=1e-5)
    assert float(out.l_total) == pytest.approx(7.560081, abs=1e-5)


def test_total_perfect_predictions():
    bundle = {}
    targets = {}
    for k, w in WIDTHS.items():
        t = torch.arange(3) % w
        bundle[k] = torch.nn.functional.one_hot(t, w).double() * 60
        targets[k] = t
    assert float(total_loss(bundle, targets).l_total) < 1e-20


def test_total_accepts_mapping_and_stacked_targets():
    b = _bundle(6, seed=3)
    stacked = torch.stack([torch.randint(0, w, (6,)) for w in WIDTHS.values()], 1)
    as_map = {k: stacked[:, j] for j, k in enumerate(WIDTHS)}
    assert float(total_loss(b, stacked).l_total) == float(total_loss(b, as_map).l_total)


def test_total_shape_mismatch():
    b = _bundle(4)
    b["type"] = torch.zeros(3, 12)
    with pytest.raises(ShapeMismatch):
        total_loss(b, torch.zeros(4, 4, dtype=torch.long))
