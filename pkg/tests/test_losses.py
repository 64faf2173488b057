import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rnncap import losses as Ls

SOFTMAX_10 = 0.7310585786300049  # e / (1 + e)
CE_K3 = 0.5514447139320511  # log(1 + 2/e)

scores = st.integers(2, 10).flatmap(
    lambda k: arrays(np.float64, k, elements=st.floats(-50, 50, allow_nan=False)))


def test_softmax_examples():
    assert Ls.softmax([0.0, 0.0]).tolist() == [0.5, 0.5]
    assert Ls.softmax([7.0, 7.0, 7.0]) == pytest.approx([1 / 3] * 3, rel=1e-15)
    q = Ls.softmax([1.0, 0.0])
    assert q[0] == pytest.approx(SOFTMAX_10, rel=1e-15)
    assert q[1] == pytest.approx(1 - SOFTMAX_10, rel=1e-14)
    assert Ls.softmax([1000.0, 0.0]).tolist() == [1.0, 0.0]
    with pytest.raises(ValueError):
        Ls.softmax([1.0])


def test_cross_entropy_examples():
    v, g = Ls.cross_entropy([0.0, 0.0], 0)
    assert v == pytest.approx(math.log(2), rel=1e-15)
    assert g.tolist() == [-0.5, 0.5]
    v, _ = Ls.cross_entropy([1.0, 0.0, 0.0], 0)
    assert v == pytest.approx(CE_K3, rel=1e-14)
    v, _ = Ls.cross_entropy([60.0, 0.0], 0)
    assert v < 1e-20


def test_margin_examples():
    assert Ls.margin_operator([1.0, 0.0], 0) == -1.0
    assert Ls.margin_operator([0.0, 1.0], 0) == 1.0
    assert Ls.margin_operator([0.2, 0.5, 0.3], 2) == pytest.approx(0.2)


def test_hinge_examples():
    assert Ls.hinge([2.0, 0.0], 0)[0] == 0.0
    assert Ls.hinge([0.0, 0.0], 0)[0] == 1.0
    assert Ls.hinge([0.0, 1.0], 0)[0] == 2.0


def test_hinge_tie_breaks_to_lowest_rival():
    _, g = Ls.hinge([0.0, 1.0, 1.0], 0)
    assert g.tolist() == [-1.0, 1.0, 0.0]


def test_ramp_examples():
    for gamma in (0.5, 1.0, 3.0):
        f = lambda psi: [0.0, psi]  # noqa: E731  (psi = f_1 - f_0 for z = 0)
        assert Ls.ramp(f(-2 * gamma), 0, gamma)[0] == 0.0
        assert Ls.ramp(f(0.0), 0, gamma)[0] == 1.0
        assert Ls.ramp(f(-gamma / 2), 0, gamma)[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        Ls.ramp([0.0, 1.0], 0, 0.0)


def test_knot_subgradients_flat():
    assert not np.any(Ls.hinge([1.0, 0.0], 0)[1])  # 1 + psi = 0
    assert not np.any(Ls.ramp([0.0, 0.0], 0, 1.0)[1])  # psi = 0
    assert not np.any(Ls.ramp([1.0, 0.0], 0, 1.0)[1])  # psi = -gamma


def test_loss_constants():
    assert Ls.loss_constants(Ls.LossSpec("ramp", 1.0)) == (2.0, 1.0)
    rho, c = Ls.loss_constants(Ls.LossSpec("cross_entropy"), 1.0)
    assert (rho, c) == (math.sqrt(2), 2 * math.sqrt(2))
    rho, c = Ls.loss_constants(Ls.LossSpec("hinge"), 3.0)
    assert rho == math.sqrt(2) and c == pytest.approx(6 * math.sqrt(2), rel=1e-15)
    with pytest.raises(ValueError):
        Ls.loss_constants(Ls.LossSpec("hinge"))
    assert Ls.LossSpec("ramp", 0.25).rho == 8.0


def test_spec_validation():
    with pytest.raises(ValueError):
        Ls.LossSpec("squared")
    with pytest.raises(ValueError):
        Ls.LossSpec("ramp", -1.0)


def test_labels_validated():
    with pytest.raises(ValueError):
        Ls.cross_entropy([0.0, 0.0], 2)
    with pytest.raises(ValueError):
        Ls.hinge([0.0, 0.0], -1)


def test_batch_matches_rows():
    rng = np.random.default_rng(0)
    F = rng.normal(size=(7, 4))
    Z = rng.integers(0, 4, 7)
    for kind in Ls.LOSS_KINDS:
        spec = Ls.LossSpec(kind, 0.7)
        vals, grads = Ls.loss_value_and_grad(spec, F, Z)
        for i in range(7):
            v, g = Ls.loss_value_and_grad(spec, F[i], Z[i])
            assert vals[i] == v and np.array_equal(grads[i], g)


@settings(max_examples=300, deadline=None)
@given(scores, st.data())
def test_value_ranges_and_ce_gradient(f, data):
    z = data.draw(st.integers(0, f.size - 1))
    q = Ls.softmax(f)
    assert abs(q.sum() - 1.0) <= 1e-12
    v, g = Ls.cross_entropy(f, z)
    assert v >= 0 and float(g @ g) <= 2.0
    assert Ls.hinge(f, z)[0] >= 0
    assert 0.0 <= Ls.ramp(f, z, 0.5)[0] <= 1.0


@settings(max_examples=300, deadline=None)
@given(scores, st.data())
def test_margin_sqrt2_lipschitz(f, data):
    z = data.draw(st.integers(0, f.size - 1))
    d = data.draw(arrays(np.float64, f.size, elements=st.floats(-5, 5, allow_nan=False)))
    lhs = abs(Ls.margin_operator(f + d, z) - Ls.margin_operator(f, z))
    assert lhs <= math.sqrt(2) * np.linalg.norm(d) + 1e-9
