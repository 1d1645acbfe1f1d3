import numpy as np
import pytest

from app.core.exceptions import ArgumentError, SchemaError, TrainingError
from app.models.config import OptimizerConfig
from app.models.pem import SALIENT_DIM, DetectionRecord, MlpSpec, encode_salient
from app.services.ais.proposal import ProposalModel
from app.services.pem import PemModel, fit, train_pem
from app.services.pem.metrics import bce
from app.services.pem.network import FeedForwardScorer
from app.services.pem.training import records_to_arrays, train_scorer

FAST = OptimizerConfig(learning_rate=1e-2, epochs=300)


def _records(n: int, rng: np.random.Generator, detected=None) -> list[DetectionRecord]:
    records = []
    for _ in range(n):
        salient = encode_salient(
            "car",
            "none",
            (rng.normal(), rng.normal(), rng.uniform(1, 60)),
            rng.normal(),
        )
        label = bool(rng.random() < 0.5) if detected is None else detected
        records.append(DetectionRecord(salient=salient, detected=label))
    return records


def test_zero_parameter_model_predicts_one_half():
    model = PemModel(MlpSpec(), SALIENT_DIM)
    salient = encode_salient("van", "partial", (1.0, 0.5, 20.0), 0.3)
    assert model.evaluate(salient) == 0.5


def test_dimension_mismatch_raises_schema_error():
    model = PemModel(MlpSpec(), SALIENT_DIM)
    with pytest.raises(SchemaError):
        model.evaluate(np.zeros(SALIENT_DIM + 1))


def test_predictions_stay_inside_clamp_band():
    model = PemModel(MlpSpec.logistic(), 1, params=np.array([1e3, 0.0]))
    p = model.predict(np.array([[-10.0], [0.0], [10.0]]))
    assert p.min() >= 1e-6
    assert p.max() <= 1.0 - 1e-6


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_bce_gradient_matches_finite_differences(activation):
    rng = np.random.default_rng(29)
    for trial in range(5):
        input_dim = int(rng.integers(1, 6))
        widths = tuple(int(w) for w in rng.integers(2, 9, size=2)) + (1,)
        spec = MlpSpec(widths=widths, activation=activation)
        scorer = FeedForwardScorer(spec, input_dim)
        params = scorer.init_params(rng) + rng.normal(scale=0.1, size=scorer.n_params)
        X = rng.normal(size=(12, input_dim))
        y = rng.random(12)
        weight = rng.uniform(0.5, 2.0, size=12)

        _, grad = scorer.loss_and_gradient(params, X, y, weight, reduction="mean")
        numeric = np.empty_like(params)
        h = 1e-6
        for i in range(len(params)):
            step = np.zeros_like(params)
            step[i] = h
            up, _ = scorer.loss_and_gradient(params + step, X, y, weight)
            down, _ = scorer.loss_and_gradient(params - step, X, y, weight)
            numeric[i] = (up - down) / (2 * h)

        error = np.linalg.norm(grad - numeric) / max(np.linalg.norm(numeric), 1e-12)
        assert error < 1e-4, f"trial {trial}: relative error {error:.2e}"


def test_training_never_ends_above_initial_loss():
    rng = np.random.default_rng(31)
    X, y = records_to_arrays(_records(200, rng))
    spec = MlpSpec(widths=(8, 1))
    _, result = train_scorer(PemModel, X, y, spec, OptimizerConfig(epochs=50), 0)
    assert result.final_loss <= result.initial_loss
    assert result.final_loss == min(result.losses)


def test_all_detected_labels_drive_output_up():
    rng = np.random.default_rng(37)
    records = _records(100, rng, detected=True)
    X, _ = records_to_arrays(records)
    model = train_pem(records, MlpSpec(widths=(8, 1)), FAST)
    assert model.predict(X).min() >= 0.99


def test_repeated_record_is_memorized():
    salient = encode_salient("tram", "mostly", (2.0, 0.0, 30.0), 1.0)
    record = DetectionRecord(salient, True)
    optimizer = OptimizerConfig(learning_rate=0.1, epochs=500)
    model = train_pem([record] * 20, MlpSpec(widths=(4, 1)), optimizer)
    X, y = records_to_arrays([record])
    assert bce(model.predict(X), y) < 1e-3


def test_training_is_deterministic_for_a_seed():
    rng = np.random.default_rng(41)
    records = _records(150, rng)
    spec = MlpSpec(widths=(6, 6, 1))
    first = train_pem(records, spec, OptimizerConfig(epochs=40), seed=3)
    second = train_pem(records, spec, OptimizerConfig(epochs=40), seed=3)
    assert np.array_equal(first.params, second.params)


def test_non_finite_inputs_raise_training_error():
    scorer = FeedForwardScorer(MlpSpec(widths=(1,)), 1)
    X = np.array([[np.nan], [1.0]])
    with pytest.raises(TrainingError) as excinfo:
        fit(scorer, X, np.array([1.0, 0.0]), OptimizerConfig(epochs=5))
    assert excinfo.value.epoch == 0


def test_empty_training_set_is_rejected():
    with pytest.raises(ArgumentError):
        records_to_arrays([])


def test_model_file_round_trip_preserves_predictions(tmp_path):
    rng = np.random.default_rng(43)
    model = PemModel(MlpSpec(widths=(5, 1), activation="tanh"), SALIENT_DIM)
    model = model.with_params(model.init_params(rng))
    path = model.save(tmp_path / "pem.json")

    loaded = PemModel.load(path)
    X = rng.normal(size=(10, SALIENT_DIM))
    assert np.array_equal(loaded.predict(X), model.predict(X))


def test_loading_a_proposal_file_as_pem_fails(tmp_path):
    path = ProposalModel.untrained().save(tmp_path / "proposal.json")
    with pytest.raises(SchemaError):
        PemModel.load(path)


def test_constant_model_ignores_input():
    model = PemModel.constant(0.9)
    X = np.random.default_rng(47).normal(size=(5, SALIENT_DIM))
    assert np.allclose(model.predict(X), 0.9)
