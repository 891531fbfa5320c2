import numpy as np
import pytest

from edgeworth_dp.calibration import make_evaluator
from edgeworth_dp.errors import DomainError, TargetUnreachable
from edgeworth_dp.results import Method
from edgeworth_dp.rgp import (TrainRunConfig, load_dataset, make_separable, save_dataset,
                              spent_budget, train_private)

SMALL = dict(n_samples=2000, batch_size=100, steps=40, epsilon_target=8.0, delta=1e-5)


@pytest.fixture(scope="module")
def data():
    return make_separable(2000, 10, seed=3)


# ---------------------------------------------------------------- config

def test_config_rate():
    assert TrainRunConfig(393000, 2000, 10).q == 2000 / 393000


@pytest.mark.parametrize("kwargs", [
    dict(n_samples=1, batch_size=1, steps=1),
    dict(n_samples=10, batch_size=0, steps=1),
    dict(n_samples=10, batch_size=11, steps=1),
    dict(n_samples=10, batch_size=5, steps=0),
    dict(n_samples=10, batch_size=5, steps=1, clip_norm=0.0),
    dict(n_samples=10, batch_size=5, steps=1, delta=1.0),
    dict(n_samples=10, batch_size=5, steps=1, rank=0),
])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(DomainError):
        TrainRunConfig(**kwargs)


def test_rate_never_zero():
    cfg = TrainRunConfig(n_samples=50_000, batch_size=1, steps=1)
    assert cfg.q == 1 / 50_000 > 0


# ---------------------------------------------------------------- training runs

def test_same_seed_same_run(data):
    cfg = TrainRunConfig(**SMALL, seed=5)
    a = train_private(cfg, *data, sigma_override=1.0)
    b = train_private(cfg, *data, sigma_override=1.0)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    assert a.batch_sizes == b.batch_sizes and a.update_norms == b.update_norms
    c = train_private(TrainRunConfig(**SMALL, seed=6), *data, sigma_override=1.0)
    assert not np.array_equal(a.weights[0], c.weights[0])


@pytest.mark.parametrize("hidden", [None, 8])
def test_zero_noise_equals_clipped_sgd(data, hidden):
    cfg = TrainRunConfig(**SMALL, hidden=hidden, rank=2)
    off = train_private(cfg, *data, sigma_override=0.0)
    plain = train_private(cfg, *data, sigma_override=0.0, add_noise=False)
    assert off.spent is None and plain.spent is None
    assert all(np.array_equal(x, y) for x, y in zip(off.weights, plain.weights))


def test_reported_budget_is_the_accountants(data):
    cfg = TrainRunConfig(**SMALL)
    run = train_private(cfg, *data, accountant="rdp")
    eps = make_evaluator("rdp")(cfg.q, run.sigma, cfg.steps, cfg.delta)
    assert run.spent.epsilon == eps
    assert run.spent.epsilon <= cfg.epsilon_target
    assert run.spent.method is Method.RDP
    assert (run.spent.delta, run.spent.m) == (cfg.delta, cfg.steps)


def test_budget_independent_of_data(data):
    cfg = TrainRunConfig(**SMALL)
    X, y = data
    a = train_private(cfg, X, y)
    b = train_private(cfg, X[::-1].copy(), y[::-1].copy())
    assert a.sigma == b.sigma and a.spent == b.spent
    assert a.spent == spent_budget(cfg, a.sigma)


def test_poisson_batches(data):
    cfg = TrainRunConfig(**SMALL)
    run = train_private(cfg, *data, sigma_override=1.0)
    sizes = np.array(run.batch_sizes)
    assert len(sizes) == cfg.steps
    assert len(set(sizes)) > 1  # not fixed-size batches
    assert abs(sizes.mean() - cfg.batch_size) < 4 * np.sqrt(cfg.batch_size / cfg.steps)


def test_learns_separable_task(data):
    X, y = data
    cfg = TrainRunConfig(n_samples=2000, batch_size=200, steps=100)
    run = train_private(cfg, X, y, sigma_override=0.0)
    assert run.model.accuracy(X, y) > 0.9


def test_unreachable_target_propagates(data):
    cfg = TrainRunConfig(n_samples=2000, batch_size=1000, steps=1000, epsilon_target=0.01)
    with pytest.raises(TargetUnreachable):
        train_private(cfg, *data, accountant="rdp")


def test_data_must_match_config(data):
    X, y = data
    with pytest.raises(DomainError):
        train_private(TrainRunConfig(**SMALL), X[:100], y[:100], sigma_override=1.0)
    with pytest.raises(DomainError):
        train_private(TrainRunConfig(**SMALL), X, y, sigma_override=-1.0)


def test_squared_loss_regression():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((500, 4))
    Y = X @ rng.standard_normal((4, 2)) * 0.1
    cfg = TrainRunConfig(n_samples=500, batch_size=50, steps=20, loss="squared", rank=2)
    run = train_private(cfg, X, Y, sigma_override=0.0)
    assert run.model.loss(X, Y) < 0.5 * np.mean(np.sum(Y ** 2, axis=1))


# ---------------------------------------------------------------- data

def test_separable_generator():
    X, y = make_separable(1000, 6, n_classes=3, seed=1)
    assert X.shape == (1000, 6) and set(np.unique(y)) == {0, 1, 2}
    X2, y2 = make_separable(1000, 6, n_classes=3, seed=1)
    assert np.array_equal(X, X2) and np.array_equal(y, y2)
    with pytest.raises(ValueError):
        make_separable(10, 1, n_classes=4)


def test_dataset_round_trip(tmp_path):
    X, y = make_separable(50, 3, seed=2)
    path = tmp_path / "data.txt"
    save_dataset(path, X, y)
    assert path.read_text().splitlines()[0] == "50 3 labels"
    X2, y2 = load_dataset(path)
    assert np.array_equal(X, X2) and np.array_equal(y, y2)


@pytest.mark.parametrize("text", [
    "3 2\n1 2 0\n",
    "2 2 labels\n1 2 0\n",
    "1 2 labels\n1 2 0.5\n",
    "1 2 labels\n1 2\n",
])
def test_dataset_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(ValueError):
        load_dataset(path)
