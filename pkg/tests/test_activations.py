import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zorbnet.activations import Activation, Correction, Kind, roundtrip_check
from zorbnet.errors import ActivationStateError

EPS = 1e-6


def _logit(p):
    return np.log(p / (1 - p))


def test_sigmoid_midpoint():
    assert Activation("sigmoid").activate(np.array([[0.0]]))[0, 0] == 0.5


def test_tanh_zero():
    assert Activation("tanh").activate(np.array([[0.0]]))[0, 0] == 0.0


def test_sigmoid_with_stored_correction():
    act = Activation("sigmoid", correction=Correction(-2.0, 4.0))
    out = act.activate(np.array([[0.0]]))[0, 0]
    # (high - low) * sigmoid(0) + low
    assert out == pytest.approx(6.0 * 0.5 - 2.0, abs=1e-12)


def test_linear_is_identity(rng):
    F = rng.normal(size=(3, 5))
    act = Activation("linear")
    np.testing.assert_array_equal(act.deactivate(F), F)
    np.testing.assert_array_equal(act.activate(F), F)
    assert roundtrip_check(act, F) == 0.0


def test_sigmoid_deactivate_matches_logit_of_squeezed_values():
    F = np.array([[0.25, 0.5, 0.75]])
    act = Activation("sigmoid", epsilon=EPS)
    out = act.deactivate(F)
    assert act.correction == Correction(0.25, 0.75)
    # min/max normalization sends 0.25 -> eps, 0.5 -> 0.5, 0.75 -> 1 - eps
    squeezed = np.array([[EPS, 0.5, 1 - EPS]])
    np.testing.assert_allclose(out, _logit(squeezed), atol=1e-4)


def test_tanh_deactivate_matches_artanh_of_squeezed_values():
    F = np.array([[-3.0, 1.0, 5.0]])
    act = Activation("tanh", epsilon=EPS)
    out = act.deactivate(F)
    squeezed = np.array([[-1 + EPS, 0.0, 1 - EPS]])
    np.testing.assert_allclose(out, 0.5 * np.log((1 + squeezed) / (1 - squeezed)), atol=1e-6)


def test_degenerate_feedback_maps_to_midpoint():
    act = Activation("sigmoid")
    out = act.deactivate(np.full((2, 3), 7.0))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)
    np.testing.assert_allclose(act.activate(out), 7.0)
    tanh = Activation("tanh")
    np.testing.assert_allclose(tanh.deactivate(np.full((1, 2), -1.0)), 0.0)


def test_relu_deactivate_reproducible():
    F = np.array([[-3.0, 2.0]])
    a = Activation("relu", rng_seed=11).deactivate(F)
    b = Activation("relu", rng_seed=11).deactivate(F)
    np.testing.assert_array_equal(a, b)
    assert -1.0 < a[0, 0] < 0.0
    assert a[0, 1] == 2.0


def test_relu_draws_resampled_each_call():
    act = Activation("relu", rng_seed=3)
    F = -np.ones((1, 4))
    assert not np.array_equal(act.deactivate(F), act.deactivate(F))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 7), elements=st.floats(0, 1e6)))
def test_relu_idempotent_on_nonnegative(F):
    act = Activation("relu")
    np.testing.assert_array_equal(act.deactivate(F), F)
    np.testing.assert_array_equal(act.deactivate(act.deactivate(F)), F)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 6), elements=st.floats(-1e6, -1e-300)), st.integers(0, 10**6))
def test_relu_negatives_land_in_open_interval(F, seed):
    out = Activation("relu", rng_seed=seed).deactivate(F)
    assert np.all(out > -1.0) and np.all(out < 0.0)


@pytest.mark.parametrize("kind", ["sigmoid", "tanh"])
def test_roundtrip_seeded(rng, kind):
    F = rng.normal(scale=3.0, size=(5, 20))
    assert roundtrip_check(Activation(kind), F) < 1e-4


@pytest.mark.parametrize("kind", ["sigmoid", "tanh"])
@settings(max_examples=80, deadline=None)
@given(
    F=arrays(np.float64, (3, 5), elements=st.floats(-1e3, 1e3)),
)
def test_roundtrip_property(kind, F):
    if F.max() - F.min() < 1e-6:
        return
    act = Activation(kind, epsilon=1e-6)
    back = act.activate(act.deactivate(F))
    interior = (F > F.min()) & (F < F.max())
    if interior.any():
        err = np.max(np.abs(back - F)[interior]) / (F.max() - F.min())
        assert err <= 1e-3


def test_roundtrip_does_not_touch_state(rng):
    act = Activation("sigmoid")
    roundtrip_check(act, rng.normal(size=(2, 3)))
    assert act.correction is None


def test_softmax_columns_stochastic(rng):
    X = rng.normal(scale=5.0, size=(4, 30))
    out = Activation("softmax").activate(X)
    np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(out > 0) and np.all(out < 1)


def test_softmax_large_logits_do_not_overflow():
    act = Activation("softmax")
    out = act.activate(np.array([[1000.0], [999.0]]))
    assert np.all(np.isfinite(out))
    assert np.isfinite(act.log_totals).all()


def test_softmax_records_totals(rng):
    X = rng.normal(size=(3, 4))
    act = Activation("softmax")
    act.activate(X)
    np.testing.assert_allclose(act.softmax_totals, np.exp(X).sum(axis=0))


def test_softmax_deactivate_needs_forward():
    with pytest.raises(ActivationStateError):
        Activation("softmax").deactivate(np.ones((2, 2)) / 2)


def test_softmax_deactivate_resets_totals(rng):
    act = Activation("softmax")
    act.activate(rng.normal(size=(3, 4)))
    act.deactivate(np.full((3, 4), 1 / 3))
    assert act.log_totals is None
    with pytest.raises(ActivationStateError):
        act.deactivate(np.full((3, 4), 1 / 3))


def test_softmax_deactivate_recovers_distribution(rng):
    act = Activation("softmax")
    X = rng.normal(size=(5, 8))
    P = act.activate(X)
    Z = act.deactivate(P)
    Q = np.exp(Z)
    Q /= Q.sum(axis=0)
    np.testing.assert_allclose(Q, P, atol=1e-8)
    # with fresh totals the log recovers the logits themselves
    np.testing.assert_allclose(Z, X, atol=1e-10)


def test_softmax_deactivate_clips_zero_targets(rng):
    act = Activation("softmax", epsilon=1e-6)
    act.activate(rng.normal(size=(3, 2)))
    Z = act.deactivate(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
    assert np.all(np.isfinite(Z))
    assert Z[2, 0] == pytest.approx(np.log(1e-6))


def test_softmax_roundtrip(rng):
    act = Activation("softmax")
    act.activate(rng.normal(size=(4, 6)))
    P = rng.dirichlet(np.ones(4), size=6).T
    assert roundtrip_check(act, P) < 1e-12


def test_kind_enum_accepts_strings():
    assert Activation("TANH".lower()).kind is Kind.TANH
    with pytest.raises(ValueError):
        Activation("swish")
