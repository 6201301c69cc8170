import numpy as np
import orjson
import pytest

from src.clustering.hdbscan import HdbscanConfig
from src.models.config import TransformerConfig
from src.models.params import load_checkpoint
from src.numerics.tensor import Tensor, tensor
from src.pdw.errors import CheckpointMismatchError, ShapeError, TrainingAbort, UsageError
from src.simulator.generator import simulate_trains
from src.simulator.scenario import ScenarioConfig
from src.training import trainer as trainer_mod
from src.training.adam import Adam, adam_step
from src.training.trainer import (
    LossReduction,
    TrainConfig,
    TripletLossConfig,
    batch_loss,
    epoch_order,
    read_train_log,
    train,
)
from src.training.triplet import triplet_terms

TINY = TransformerConfig(n_layers=1, n_heads=1, d_model=8, d_ff=8, d_embed=4)
CLUSTERING = HdbscanConfig(min_cluster_size=5)


@pytest.fixture(scope="module")
def tiny_sets():
    trains = [t for t, _ in simulate_trains(ScenarioConfig(n_trains=8, n_pulses_per_train=30, emitter_count_range=(2, 3), rng_seed=1))]
    return trains[:6], trains[6:]


# --- Adam ---

def test_first_adam_step_moves_by_learning_rate():
    x = {"x": np.array([1.0])}
    opt = Adam(lr=0.1)
    adam_step(x, {"x": 2.0 * x["x"]}, opt)
    assert x["x"][0] == pytest.approx(0.9, abs=1e-6)
    assert opt.t == 1


def test_zero_gradient_leaves_parameters():
    x = {"w": np.array([0.5, -1.5])}
    Adam(lr=0.1).step(x, {"w": np.zeros(2)})
    assert x["w"].tolist() == [0.5, -1.5]


def test_adam_trajectories_are_deterministic():
    def run():
        x = {"x": np.array([1.0, -2.0])}
        opt = Adam(lr=0.05)
        for _ in range(20):
            opt.step(x, {"x": 2.0 * x["x"]})
        return x["x"]

    assert np.array_equal(run(), run())


def test_adam_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        Adam().step({"x": np.zeros(2)}, {"x": np.zeros(3)})


def test_adam_state_round_trip():
    x = {"x": np.array([1.0])}
    a = Adam(lr=0.1)
    a.step(x, {"x": np.array([2.0])})
    b = Adam(lr=0.1)
    b.load_state_dict(a.state_dict())
    ya, yb = {"x": x["x"].copy()}, {"x": x["x"].copy()}
    a.step(ya, {"x": np.array([1.0])})
    b.step(yb, {"x": np.array([1.0])})
    assert ya["x"].tolist() == yb["x"].tolist()


# --- configs and batching ---

def test_loss_config_validation():
    assert TripletLossConfig().margin == 1.9
    with pytest.raises(ValueError):
        TripletLossConfig(margin=0.0)
    with pytest.raises(ValueError, match="reserved"):
        TripletLossConfig(mining="batch_hard")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    assert TrainConfig().batch_size == 8


def test_epoch_order_is_seeded():
    assert np.array_equal(epoch_order(0, 3, 10), epoch_order(0, 3, 10))
    assert not np.array_equal(epoch_order(0, 3, 10), epoch_order(0, 4, 10))


def test_single_emitter_train_adds_no_loss(f64):
    z = tensor(np.random.default_rng(0).normal(size=(6, 2)), requires_grad=True)
    assert triplet_terms(z, [0] * 6, 1.9) == (None, 0)
    t = (Tensor(3.0), 2)
    assert batch_loss([(None, 0), t], LossReduction.per_train).item() == pytest.approx(0.75)
    assert batch_loss([(None, 0), t, (Tensor(1.0), 2)], LossReduction.pooled).item() == pytest.approx(1.0)
    assert batch_loss([(None, 0)], LossReduction.per_train) is None


# --- training loop ---

def test_train_writes_log_and_checkpoints(tmp_path, tiny_sets):
    tr, va = tiny_sets
    res = train("transformer", TINY, tr, va, tmp_path, TrainConfig(epochs=2, batch_size=2, learning_rate=1e-3), TripletLossConfig(), CLUSTERING)
    log = read_train_log(res.log_path)
    assert [r.epoch for r in log] == [0, 1]
    assert [r.step for r in log] == [3, 6]
    assert all(-1.0 <= r.val_ami <= 1.0 and r.train_loss >= 0.0 for r in log)
    best = load_checkpoint(res.best_checkpoint)
    assert best.manifest["epoch"] == res.best_epoch
    assert best.manifest["model"]["d_model"] == 8
    assert load_checkpoint(res.last_checkpoint).optimizer_state is not None
    raw = [orjson.loads(line) for line in (tmp_path / "train_log.jsonl").read_bytes().splitlines()]
    assert {"epoch", "step", "train_loss", "val_ami", "wall_time"} <= set(raw[0])


def test_identity_model_cannot_train(tmp_path, tiny_sets):
    tr, va = tiny_sets
    with pytest.raises(UsageError, match="identity model has no parameters"):
        train("identity", None, tr, va, tmp_path, TrainConfig(), TripletLossConfig(), CLUSTERING)


def test_resume_continues_the_same_trajectory(tmp_path, tiny_sets):
    tr, va = tiny_sets
    cfg = dict(batch_size=2, learning_rate=1e-3, seed=3)
    full = train("transformer", TINY, tr, va, tmp_path / "a", TrainConfig(epochs=2, **cfg), TripletLossConfig(), CLUSTERING)
    train("transformer", TINY, tr, va, tmp_path / "b", TrainConfig(epochs=1, **cfg), TripletLossConfig(), CLUSTERING)
    resumed = train("transformer", TINY, tr, va, tmp_path / "b", TrainConfig(epochs=2, **cfg), TripletLossConfig(), CLUSTERING, resume=True)
    assert [r.epoch for r in resumed.history] == [0, 1]
    assert resumed.history[0].step == full.history[0].step
    assert resumed.history[0].train_loss == pytest.approx(full.history[0].train_loss, rel=1e-5)
    assert resumed.history[1].train_loss == pytest.approx(full.history[1].train_loss, rel=1e-5)
    assert [r.epoch for r in read_train_log(resumed.log_path)] == [0, 1]
    a = load_checkpoint(full.last_checkpoint).params
    b = load_checkpoint(resumed.last_checkpoint).params
    for k in a.names():
        np.testing.assert_allclose(a[k].data, b[k].data, rtol=1e-5, atol=1e-6)


def test_resume_with_different_model_config_fails(tmp_path, tiny_sets):
    tr, va = tiny_sets
    train("transformer", TINY, tr, va, tmp_path, TrainConfig(epochs=1, batch_size=3), TripletLossConfig(), CLUSTERING)
    other = TINY.model_copy(update={"d_ff": 16})
    with pytest.raises(CheckpointMismatchError) as exc:
        train("transformer", other, tr, va, tmp_path, TrainConfig(epochs=2, batch_size=3), TripletLossConfig(), CLUSTERING, resume=True)
    assert "d_ff" in exc.value.differences


def test_non_finite_loss_aborts_with_train_id(tmp_path, tiny_sets, monkeypatch):
    tr, va = tiny_sets

    def poisoned(z, labels, margin):
        return z.sum() * float("nan"), 1

    monkeypatch.setattr(trainer_mod, "triplet_terms", poisoned)
    with pytest.raises(TrainingAbort) as exc:
        train("transformer", TINY, tr, va, tmp_path, TrainConfig(epochs=1), TripletLossConfig(), CLUSTERING)
    assert exc.value.train_id is not None
    assert (tmp_path / f"abort_{exc.value.train_id}.json").exists()
