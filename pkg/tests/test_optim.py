import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgemlp.errors import OutOfOrderEpoch, ShapeMismatch
from edgemlp.optim import CONTINUE, STOP, Adam, EarlyStopping, ReduceLROnPlateau, adam_step


def scalar_step(g, lr=1e-3, dtype=np.float64):
    params = {"p": np.zeros(1, dtype=dtype)}
    state = adam_step(params, {"p": np.array([g], dtype=dtype)}, Adam(lr=lr))
    return params["p"][0], state


def test_zero_gradient_is_fixed_point():
    params = {"p": np.array([1.5, -2.0])}
    adam = Adam()
    adam.step(params, {"p": np.zeros(2)})
    np.testing.assert_array_equal(params["p"], [1.5, -2.0])
    assert adam.t == 1


def test_first_step_closed_form():
    p, _ = scalar_step(1.0)
    assert p == pytest.approx(-1e-3 / (1 + 1e-7), rel=1e-12)
    p, _ = scalar_step(-1.0)
    assert p == pytest.approx(1e-3 / (1 + 1e-7), rel=1e-12)


@pytest.mark.parametrize("g", [1e-3, 0.5, 3.0, -7.0, 1e4])
def test_first_step_magnitude(g):
    for dtype in (np.float32, np.float64):
        p, _ = scalar_step(g, dtype=dtype)
        assert abs(abs(p) - 1e-3 * abs(g) / (abs(g) + 1e-7)) < 1e-6


def test_step_counter_and_shapes():
    adam = Adam()
    params = {"a": np.zeros((2, 2))}
    for _ in range(3):
        adam.step(params, {"a": np.ones((2, 2))})
    assert adam.t == 3
    with pytest.raises(ShapeMismatch):
        adam.step(params, {"a": np.ones(3)})
    assert adam.t == 3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30))
def test_moments_stay_finite(gs):
    adam = Adam()
    params = {"p": np.zeros(1)}
    for g in gs:
        adam.step(params, {"p": np.array([g])})
        assert np.isfinite(adam.m["p"]).all() and (adam.v["p"] >= 0).all()
    assert np.isfinite(params["p"]).all()


def test_first_step_bounded_on_random_gradients():
    g = np.random.default_rng(0).normal(0, 5, 1000)
    params = {"p": np.zeros(1000)}
    Adam().step(params, {"p": g})
    assert np.all(np.abs(params["p"]) <= 1e-3 * (1 + 1e-3))


def run_early_stopping(accuracies):
    stopper = EarlyStopping(patience=4)
    for epoch, acc in enumerate(accuracies, start=1):
        if stopper.update(epoch, acc, {"epoch": epoch}) == STOP:
            return stopper, epoch
    return stopper, None


def test_early_stopping_trace():
    stopper, stopped = run_early_stopping([0.90, 0.91, 0.91, 0.91, 0.91, 0.91])
    assert stopped == 6
    assert stopper.best_epoch == 2 and stopper.best_weights == {"epoch": 2}


def test_early_stopping_never_fires_when_improving():
    _, stopped = run_early_stopping(list(np.linspace(0.5, 0.99, 50)))
    assert stopped is None


def test_early_stopping_tie_is_not_improvement():
    stopper = EarlyStopping(patience=4)
    stopper.update(1, 0.9)
    stopper.update(2, 0.9)
    assert stopper.best_epoch == 1 and stopper.epochs_since_improvement == 1


def test_early_stopping_snapshot_is_lazy():
    calls = []
    stopper = EarlyStopping()
    stopper.update(1, 0.5, lambda: calls.append(1) or "w1")
    stopper.update(2, 0.4, lambda: calls.append(2) or "w2")
    assert calls == [1] and stopper.best_weights == "w1"


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=50))
def test_early_stopping_bound(accuracies):
    stopper, stopped = run_early_stopping(accuracies)
    if stopped is not None:
        assert stopped == stopper.best_epoch + 4


def test_out_of_order_epochs():
    with pytest.raises(OutOfOrderEpoch):
        EarlyStopping().update(2, 0.5)
    plateau = ReduceLROnPlateau()
    plateau.update(1, 1.0, 1e-3)
    with pytest.raises(OutOfOrderEpoch):
        plateau.update(1, 1.0, 1e-3)


def replay(losses, lr=1e-3):
    plateau = ReduceLROnPlateau()
    lrs = []
    for epoch, loss in enumerate(losses, start=1):
        lr = plateau.update(epoch, loss, lr)
        lrs.append(lr)
    return lrs


def test_plateau_trace():
    lrs = replay([1.0, 0.99, 0.99, 0.99, 0.99])
    assert lrs == [1e-3, 1e-3, 1e-3, 1e-3, 5e-4]


def test_plateau_floor():
    plateau = ReduceLROnPlateau()
    lr = 1.5e-6
    for epoch, loss in enumerate([1.0, 1.0, 1.0, 1.0], start=1):
        lr = plateau.update(epoch, loss, lr)
    assert lr == 1e-6


def test_plateau_steady_improvement_keeps_lr():
    assert set(replay([1.0 - 1e-3 * k for k in range(50)])) == {1e-3}


def test_plateau_min_delta():
    # improvements smaller than 1e-4 do not count
    assert replay([1.0, 0.99995, 0.9999, 0.99985])[-1] == 5e-4


def test_plateau_reductions_spaced_by_patience():
    lrs = replay([1.0] * 10)
    assert lrs == [1e-3, 1e-3, 1e-3, 5e-4, 5e-4, 5e-4, 2.5e-4, 2.5e-4, 2.5e-4, 1.25e-4]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=60))
def test_plateau_lr_monotone_with_floor(losses):
    lrs = replay(losses, lr=1e-5)
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))
    assert min(lrs) >= 1e-6
