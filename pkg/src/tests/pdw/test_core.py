import numpy as np
import orjson
import pytest

from src.pdw.dataset_io import load_dataset, parse_record, train_summary, write_dataset
from src.pdw.errors import DatasetFormatError, PartitionError
from src.pdw.normalize import ZSCORE_COLUMNS, normalize_train, zscore_column
from src.pdw.partitions import canonicalize_labels, labels_from_partition, partition_from_labels
from src.pdw.types import NOISE, Partition, PulseDescriptorWord, PulseTrain


def _train(rng, n=12, k=3, train_id="t0"):
    features = np.column_stack(
        [
            np.sort(rng.uniform(0, 1e-2, n)),
            rng.uniform(9e9, 9.4e9, n),
            rng.uniform(1e-6, 1e-5, n),
            rng.uniform(0, 360, n),
            rng.normal(-50, 3, n),
        ]
    )
    return PulseTrain(train_id=train_id, features=features, labels=rng.integers(0, k, n))


# --- normalization ---
def test_normalize_toa_endpoints_and_aoa():
    train = PulseTrain(
        train_id="x",
        features=[[10, 9e9, 1e-6, 180, 1.0], [20, 9.1e9, 2e-6, 90, 2.0], [30, 9.2e9, 3e-6, 0, 3.0]],
    )
    z = normalize_train(train).features
    assert z[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert z[0, 3] == 0.5
    assert np.all(np.isfinite(z))


def test_normalize_constant_column_is_zero():
    train = PulseTrain(
        train_id="x",
        features=[[0, 9e9, 1e-6, 10, 1.0], [1, 9e9, 2e-6, 20, 2.0], [2, 9e9, 3e-6, 30, 4.0]],
    )
    z = normalize_train(train).features
    assert z[:, 1].tolist() == [0.0, 0.0, 0.0]


def test_normalize_single_pulse():
    train = PulseTrain(train_id="x", features=[[5.0, 9e9, 1e-6, 45.0, -60.0]])
    z = normalize_train(train).features
    assert z[0, 0] == 0.0
    assert z[0, 3] == 0.125
    assert np.all(np.isfinite(z))


def test_normalize_zscore_columns():
    rng = np.random.default_rng(3)
    z = normalize_train(_train(rng, n=50)).features
    for c in (1, 2, 4):
        assert abs(z[:, c].mean()) < 1e-6
        assert abs(z[:, c].std() - 1.0) < 1e-6
    assert z[:, 0].min() == 0.0 and z[:, 0].max() == 1.0


@pytest.mark.parametrize("seed", range(20))
def test_normalize_is_idempotent_on_scaled_columns(seed):
    rng = np.random.default_rng(seed)
    z = normalize_train(_train(rng, n=int(rng.integers(2, 200)))).features
    for c in ZSCORE_COLUMNS:
        np.testing.assert_allclose(zscore_column(z[:, c]), z[:, c], rtol=0, atol=1e-9)
    toa = z[:, 0]
    np.testing.assert_allclose((toa - toa.min()) / (toa.max() - toa.min()), toa, rtol=0, atol=1e-9)
    assert np.all((z[:, 3] >= 0) & (z[:, 3] < 1))


def test_normalize_empty_train_rejected():
    with pytest.raises(ValueError):
        normalize_train(PulseTrain(train_id="e", features=np.empty((0, 5))))


# --- partitions ---
def test_partition_from_labels_examples():
    assert partition_from_labels([0, 0, 1, 1, 0]).blocks == ((0, 1, 4), (2, 3))
    assert partition_from_labels([7, 7, 7]).blocks == ((0, 1, 2),)
    assert partition_from_labels([0, NOISE, NOISE]).blocks == ((0,), (1,), (2,))


def test_labels_from_partition_canonical():
    assert labels_from_partition(Partition(blocks=[[0, 1], [2]])).tolist() == [0, 0, 1]
    assert labels_from_partition(Partition(blocks=[[2], [0, 1]])).tolist() == [0, 0, 1]
    p = partition_from_labels([0, 0, 1, 1, 0])
    assert partition_from_labels(labels_from_partition(p)) == p


@pytest.mark.parametrize(
    "blocks",
    [[[0, 1], [1, 2]], [[0], [2]], [[0, 1], []]],
)
def test_invalid_partitions(blocks):
    # pydantic reports validator failures as ValidationError, itself a ValueError
    with pytest.raises(ValueError):
        Partition(blocks=blocks)


def test_canonicalize_labels_keeps_noise():
    assert canonicalize_labels([5, 5, -1, 2, 5, 2]).tolist() == [0, 0, -1, 1, 0, 1]


def test_partition_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        labels = rng.integers(0, 5, size=rng.integers(1, 30))
        p = partition_from_labels(labels)
        assert partition_from_labels(labels_from_partition(p)) == p


# --- pulse train invariants ---
def test_pulse_train_rejects_bad_rows():
    with pytest.raises(ValueError):
        PulseTrain(train_id="x", features=[[1.0, 9e9, 1e-6, 10, 0.0], [0.5, 9e9, 1e-6, 10, 0.0]])
    with pytest.raises(ValueError):
        PulseTrain(train_id="x", features=[[0.0, 9e9, 1e-6, 360.0, 0.0]])
    with pytest.raises(ValueError):
        PulseTrain(train_id="x", features=[[0.0, 9e9, 1e-6, 10, 0.0]], labels=[0, 1])


def test_pdw_conversion():
    pdws = [
        PulseDescriptorWord(toa=2e-3, frequency=9e9, pulse_width=1e-6, aoa=10, amplitude=-50),
        PulseDescriptorWord(toa=1e-3, frequency=9.1e9, pulse_width=2e-6, aoa=20, amplitude=-51),
    ]
    train = PulseTrain.from_pdws(pdws, labels=[1, 0])
    assert train.features[:, 0].tolist() == [1e-3, 2e-3]
    assert train.labels.tolist() == [0, 1]
    assert train.pdws()[0] == pdws[1]
    again = PulseTrain.from_pdws(train.pdws(), labels=train.labels, train_id="again")
    assert np.array_equal(again.features, train.features)
    assert again.labels.tolist() == [0, 1]


# --- dataset io ---
def test_dataset_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(1)
    trains = [_train(rng, train_id=f"t{i}") for i in range(10)]
    path = tmp_path / "d.jsonl"
    assert write_dataset(trains, path) == 10
    back = load_dataset(path)
    assert [t.train_id for t in back] == [t.train_id for t in trains]
    for a, b in zip(trains, back):
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)


def test_bad_record_names_line(tmp_path):
    good = orjson.dumps({"train_id": "a", "pulses": [[0, 9e9, 1e-6, 10, 0]]})
    bad = orjson.dumps({"train_id": "b", "pulses": [[0, 9e9, 1e-6, 10]]})
    path = tmp_path / "d.jsonl"
    path.write_bytes(good + b"\n" + bad + b"\n")
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(path)
    assert exc.value.line == 2
    assert "4 fields" in str(exc.value)


def test_label_length_mismatch():
    line = orjson.dumps({"train_id": "a", "pulses": [[0, 9e9, 1e-6, 10, 0]], "labels": [0, 1]})
    with pytest.raises(DatasetFormatError):
        parse_record(line)



def test_non_numeric_pulse_field_names_line(tmp_path):
    good = orjson.dumps({"train_id": "a", "pulses": [[0, 9e9, 1e-6, 10, 0]]})
    bad = orjson.dumps({"train_id": "b", "pulses": [[0, "x", 1e-6, 10, 0]]})
    path = tmp_path / "d.jsonl"
    path.write_bytes(good + b"\n" + bad + b"\n")
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(path)
    assert exc.value.line == 2
    assert "non-numeric" in str(exc.value)


@pytest.mark.parametrize("labels", [5, "01", {"0": 1}])
def test_labels_must_be_a_list(labels):
    line = orjson.dumps({"train_id": "a", "pulses": [[0, 9e9, 1e-6, 10, 0]], "labels": labels})
    with pytest.raises(DatasetFormatError, match="must be a list"):
        parse_record(line)

def test_unsorted_records_are_sorted_on_read():
    rows = [[3e-3, 9e9, 1e-6, 1, 0], [1e-3, 9.1e9, 1e-6, 2, 0], [2e-3, 9.2e9, 1e-6, 3, 0]]
    train = parse_record(orjson.dumps({"train_id": "u", "pulses": rows, "labels": [2, 0, 1]}))
    order = np.argsort([r[0] for r in rows], kind="stable")
    assert np.array_equal(train.features, np.array(rows)[order])
    assert train.labels.tolist() == [0, 1, 2]


def test_missing_dataset():
    with pytest.raises(FileNotFoundError):
        load_dataset("does/not/exist.jsonl")


def test_train_summary():
    train = PulseTrain(
        train_id="s",
        features=[[i * 1e-3, 9e9, 1e-6, 10, 0] for i in range(5)],
        labels=[0, 1, 1, 0, 1],
    )
    assert train_summary(train) == {"train_id": "s", "n_pulses": 5, "n_emitters": 2, "cluster_sizes": [3, 2]}


def test_empty_label_vector_rejected():
    with pytest.raises(PartitionError):
        partition_from_labels([])
