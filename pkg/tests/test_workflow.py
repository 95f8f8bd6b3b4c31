from dataclasses import replace

import pytest

from agents.ablation_agent import run_ablation, run_separation_experiment
from agents.evaluation_agent import group_labels, pair_predictions, run_evaluation
from agents.synth_agent import SynthConfig, gen_splits
from agents.training_agent import run_inference, run_training, variant_name
from tools.ligt_model_tool import ModelConfig, load_checkpoint
from tools.trainer_tool import TrainConfig
from utils.data_utils import Dataset, Prediction
from utils.errors import SchemaError
from workflow import initial_state, run_pipeline, run_variant

MODEL = ModelConfig(d_model=8, n_heads=2, d_ff=16, n_encoder_layers=1, n_decoder_layers=1,
                    max_input_len=48, max_answer_len=8)
QUICK = TrainConfig(steps=3, batch_size=4, show_progress=False)
GRID = SynthConfig(seed=3, rows=2, cols=2, vocab_size=8, duplicate_fraction=0.0, task="quadrant-lookup")


def test_variant_names():
    assert variant_name(MODEL) == "ligt"
    assert variant_name(replace(MODEL, ratio_mode="none")) == "no-ratio"
    assert variant_name(replace(MODEL, text_only=True)) == "text-only"


def test_pipeline_runs_end_to_end():
    state = initial_state(MODEL, QUICK, synth_config=GRID, n_train=16, n_test=8)
    final = run_pipeline(state)
    assert final["error_message"] is None
    assert final["synth_results"]["train_samples"] >= 16
    assert len(final["predictions"]) == len(final["test_set"].samples)
    assert 0.0 <= final["report"].accuracy <= 1.0
    assert final["evaluation_results"]["processed_count"] == final["report"].n


def test_pipeline_stops_without_data():
    final = run_pipeline(initial_state(MODEL, QUICK))
    assert final["error_message"] == "no datasets and no synth config given"
    assert final["train_result"] is None


def test_pipeline_stops_on_empty_training_set():
    final = run_pipeline(initial_state(MODEL, QUICK, train_set=Dataset(), test_set=Dataset()))
    assert final["error_message"] == "training set is empty"
    assert final["predictions"] is None


def test_run_variant_reuses_datasets():
    train_set, test_set = gen_splits(GRID, 8, 4)
    state = initial_state(MODEL, QUICK, train_set=train_set, test_set=test_set)
    final = run_variant(state, text_only=True)
    assert final["train_result"].model_config.text_only
    assert len(final["test_set"].samples) == len(test_set.samples)


def test_training_writes_checkpoint(tmp_path):
    train_set, test_set = gen_splits(GRID, 8, 4)
    path = str(tmp_path / "ligt.joblib")
    result, summary = run_training(train_set, MODEL, QUICK, checkpoint_path=path)
    assert summary['steps'] == 3 and summary['variant'] == "ligt"
    params, config, vocab = load_checkpoint(path)
    assert config == MODEL and vocab.tokens == result.vocab.tokens
    predictions, results = run_inference(test_set, params, config, vocab)
    assert results['processed_count'] == len(test_set.samples)
    assert [p.question for p in predictions] == [s.qa.question for s in test_set.samples]


def test_evaluation_pairs_by_position(grid_dataset):
    _, dataset = grid_dataset
    predictions = [Prediction(s.document_id, s.qa.question, s.qa.answer) for s in dataset.samples]
    report, groups, results = run_evaluation(predictions, dataset.samples, by="answer_type")
    assert report.accuracy == 1.0 and results['anls'] == 100.0
    assert set(groups) == {"Numeric"}


def test_evaluation_rejects_mismatched_predictions(grid_dataset):
    _, dataset = grid_dataset
    predictions = [Prediction(s.document_id, s.qa.question, s.qa.answer) for s in dataset.samples]
    with pytest.raises(SchemaError, match="predictions"):
        pair_predictions(predictions[:-1], dataset.samples)
    predictions[1] = Prediction("elsewhere", predictions[1].question, "x")
    with pytest.raises(SchemaError, match="line 2, field 'document_id'"):
        pair_predictions(predictions, dataset.samples)


def test_unknown_grouping(grid_dataset):
    _, dataset = grid_dataset
    with pytest.raises(ValueError):
        group_labels(dataset.samples, "length")


def test_ablation_table():
    train_set, test_set = gen_splits(GRID, 8, 4)
    table, results = run_ablation(train_set, test_set, MODEL, QUICK, levels=(2, 3))
    assert list(table[["levels", "ratio"]].itertuples(index=False, name=None)) == [
        (2, "ratio"), (2, "no-ratio"), (3, "ratio"), (3, "no-ratio")]
    assert results['processed_count'] == 4 and not results['failed_items']
    assert (table.loc[table["ratio"] == "no-ratio", "omega"] == 1.0).all()


def test_separation_experiment_reports_chance():
    synth = SynthConfig(seed=2, task="right-neighbor")
    table, results = run_separation_experiment(synth, 16, 8, MODEL, QUICK)
    assert list(table["variant"]) == ["ligt", "text-only"]
    assert 0.0 < results['chance_accuracy'] < 100.0
    assert table.loc[1, "omega"] == 0.0


@pytest.mark.slow
def test_layout_separates_duplicate_texts():
    synth = SynthConfig(seed=13, rows=2, cols=4, vocab_size=16, duplicate_fraction=1.0, task="right-neighbor",
                        shuffle=True, jitter=0.0)
    model = ModelConfig(d_model=32, n_heads=2, d_ff=64, n_encoder_layers=2, n_decoder_layers=2,
                        max_input_len=48, max_answer_len=8)
    train = TrainConfig(steps=6000, batch_size=32, warmup_steps=200, seed=13, show_progress=False)
    table, results = run_separation_experiment(synth, 20000, 500, model, train)
    accuracy = table.set_index("variant")["accuracy"]
    assert accuracy["ligt"] >= 90.0
    assert abs(accuracy["text-only"] - results['chance_accuracy']) <= 10.0
