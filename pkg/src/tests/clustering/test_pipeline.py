import numpy as np
import pytest

from src.clustering.hdbscan import HdbscanConfig
from src.clustering.pipeline import predict_dataset
from src.metrics.evaluation import evaluate_dataset
from src.models.config import IdentityConfig
from src.models.identity import identity_model
from src.simulator.generator import simulate_trains
from src.simulator.scenario import FreqMode, ScenarioConfig


@pytest.fixture(scope="module")
def separable():
    """Emitters in disjoint frequency bands with tight feature noise and no drops."""
    config = ScenarioConfig(
        n_pulses_per_train=200,
        emitter_count_range=(2, 3),
        n_trains=20,
        rng_seed=5,
        disjoint_freq_bands=True,
        freq_mode_weights={FreqMode.fixed: 1.0},
        freq_center_range=(8e9, 12e9),
        freq_noise_std_range=(1e5, 5e5),
        pri_base_range=(4e-4, 6e-4),
        pw_jitter_frac_range=(0.0, 0.0),
        amplitude_std_range=(0.1, 0.3),
        aoa_std_range=(0.1, 0.3),
        drop_prob_range=(0.0, 0.0),
    )
    return [train for train, _ in simulate_trains(config)]


def test_identity_recovers_separable_emitters(separable):
    preds = predict_dataset(identity_model, IdentityConfig(), None, separable, HdbscanConfig(min_cluster_size=20))
    assert [p.shape[0] for p in preds] == [len(t) for t in separable]
    ev = evaluate_dataset(preds, [t.labels for t in separable], [t.train_id for t in separable])
    assert ev.aggregate.ami >= 0.99


def test_predictions_follow_train_order(separable):
    clustering = HdbscanConfig(min_cluster_size=20)
    preds = predict_dataset(identity_model, IdentityConfig(), None, separable, clustering)
    reversed_preds = predict_dataset(identity_model, IdentityConfig(), None, separable[::-1], clustering)
    for a, b in zip(preds, reversed_preds[::-1]):
        assert np.array_equal(a, b)
