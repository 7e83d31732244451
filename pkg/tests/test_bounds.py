import math

import numpy as np
import pytest

import optembed as oe
from optembed import bounds as ob

from helpers import TRUTH_TREE, embed_fresh, random_pipeline, sample_box

UNIT2 = [oe.Interval(0, 1), oe.Interval(0, 1)]


def test_affine_difference_row():
    out = oe.propagate(oe.Affine([[1.0, -1.0]], [0.0]), UNIT2)
    assert out == [oe.Interval(-1.0, 1.0)]


def test_relu_interval():
    assert oe.propagate(oe.ReLU(), [oe.Interval(-1, 1)]) == [oe.Interval(0.0, 1.0)]


def test_truth_tree_hull():
    assert oe.propagate(TRUTH_TREE, UNIT2) == [oe.Interval(-2.0, 4.0)]


def test_tree_hull_prunes_unreachable_leaves():
    # box restricted to x1 <= 0.4 can only reach the -2 leaf
    out = oe.propagate(TRUTH_TREE, [oe.Interval(0.0, 0.4), oe.Interval(0, 1)])
    assert out == [oe.Interval(-2.0, -2.0)]
    # x1 >= 0.6 rules the -2 leaf out
    out = oe.propagate(TRUTH_TREE, [oe.Interval(0.6, 1.0), oe.Interval(0, 1)])
    assert out == [oe.Interval(3.0, 4.0)]


def test_monotone_activations_attain_endpoints():
    box = [oe.Interval(-2.0, 1.5)]
    for act in (oe.ReLU(), oe.Sigmoid(), oe.Tanh(), oe.SoftPlus(2.0)):
        (iv,) = oe.propagate(act, box)
        lo = oe.predict(act, [-2.0])[0]
        hi = oe.predict(act, [1.5])[0]
        assert iv.lo == pytest.approx(lo, abs=1e-12)
        assert iv.hi == pytest.approx(hi, abs=1e-12)


def test_affine_attains_endpoints_at_corners():
    rng = np.random.default_rng(3)
    A, b = rng.normal(size=(3, 4)), rng.normal(size=3)
    aff = oe.Affine(A, b)
    box = [oe.Interval(float(l), float(l) + float(w)) for l, w in
           zip(rng.uniform(-1, 0, 4), rng.uniform(0.5, 1.5, 4))]
    out = oe.propagate(aff, box)
    for i in range(3):
        lo_corner = [box[j].lo if A[i, j] > 0 else box[j].hi for j in range(4)]
        hi_corner = [box[j].hi if A[i, j] > 0 else box[j].lo for j in range(4)]
        assert oe.predict(aff, lo_corner)[i] == pytest.approx(out[i].lo, abs=1e-9)
        assert oe.predict(aff, hi_corner)[i] == pytest.approx(out[i].hi, abs=1e-9)


def test_softmax_refined_tighter_than_unit():
    box = [oe.Interval(1.0, 2.0), oe.Interval(-1.0, 0.0)]
    out = oe.propagate(oe.SoftMax(), box)
    # component 0 dominates: its lower bound is sigmoid(1-0)=e/(1+e)
    assert out[0].lo == pytest.approx(math.e / (1 + math.e))
    assert out[0].hi == pytest.approx(1 / (1 + math.exp(-3)))
    assert out[1].lo > 0.0 and out[1].hi < 1.0


def test_infinite_inputs_flow_through():
    out = oe.propagate(oe.Affine([[2.0]], [1.0]), [oe.Interval()])
    assert out == [oe.Interval(-math.inf, math.inf)]
    out = oe.propagate(oe.Sigmoid(), [oe.Interval()])
    assert out == [oe.Interval(0.0, 1.0)]


def test_dimension_error():
    with pytest.raises(oe.DimensionError):
        oe.propagate(oe.Affine([[1.0, 2.0]], [0.0]), [oe.Interval(0, 1)])


def test_soundness_sampling():
    rng = np.random.default_rng(11)
    for _ in range(25):
        p, box = random_pipeline(rng)
        out = oe.propagate(p, box)
        for _ in range(100):
            x0 = sample_box(rng, box)
            y = oe.predict(p, x0)
            for i, iv in enumerate(out):
                assert iv.lo - 1e-9 <= y[i] <= iv.hi + 1e-9


class TestAttachBounds:
    def test_sigmoid_output_tightened(self):
        box = [oe.Interval(-1.0, 2.0)]
        model, x, y, form = embed_fresh(oe.Sigmoid(), box)
        oe.attach_bounds(model, form, box)
        got = model.bounds(y[0])
        assert got.lo == pytest.approx(1 / (1 + math.e))
        assert got.hi == pytest.approx(1 / (1 + math.exp(-2)))

    def test_quadratic_relu_slack(self):
        box = [oe.Interval(-1.0, 2.0)]
        model, x, y, form = embed_fresh(
            oe.ReLU(), box, oe.FormulationConfig(relu_variant=oe.ReluVariant.QUADRATIC)
        )
        oe.attach_bounds(model, form, box)
        z = form.added_vars[1]
        assert model.bounds(z) == oe.Interval(0.0, 1.0)
        assert model.bounds(y[0]) == oe.Interval(0.0, 2.0)

    def test_never_loosens_existing_tighter_bound(self):
        box = [oe.Interval(-1.0, 1.0)]
        model, x, y, form = embed_fresh(oe.ReLU(), box)
        model.tighten_bounds(y[0], oe.Interval(0.0, 0.25))
        oe.attach_bounds(model, form, box)
        assert model.bounds(y[0]) == oe.Interval(0.0, 0.25)

    def test_idempotent_and_order_insensitive(self):
        rng = np.random.default_rng(5)
        p, box = random_pipeline(rng, n_in=3)
        model, x, y, form = embed_fresh(p, box)
        oe.attach_bounds(model, form, box)
        once = model.variable_bounds()
        oe.attach_bounds(model, form, box)
        oe.attach_bounds(model, form, box)
        assert model.variable_bounds() == once
