# workflow.py
"""Experiment pipeline as a langgraph state graph: synth -> train -> infer -> evaluate."""
from __future__ import annotations

from dataclasses import replace
from typing import Any, Dict, List, TypedDict

from langgraph.graph import END, StateGraph

from agents.evaluation_agent import run_evaluation
from agents.synth_agent import SynthConfig, gen_splits, text_only_chance
from agents.training_agent import run_inference, run_training, variant_name
from tools.ligt_model_tool import ModelConfig
from tools.metrics_tool import EvalConfig, EvalReport
from tools.trainer_tool import TrainConfig, TrainResult
from utils.data_utils import Dataset, Prediction
from utils.log_utils import get_logger

logger = get_logger(__name__)


class ExperimentState(TypedDict):
    # Input/Control
    synth_config: SynthConfig | None
    n_train: int
    n_test: int
    model_config: ModelConfig
    train_config: TrainConfig
    eval_config: EvalConfig
    checkpoint_path: str | None

    # Step outputs
    train_set: Dataset | None
    test_set: Dataset | None
    synth_results: Dict | None
    train_result: TrainResult | None
    training_results: Dict | None
    predictions: List[Prediction] | None
    inference_results: Dict | None
    report: EvalReport | None
    evaluation_results: Dict | None

    # General Status
    error_message: str | None


def initial_state(model_config: ModelConfig, train_config: TrainConfig, eval_config: EvalConfig = EvalConfig(),
                  synth_config: SynthConfig | None = None, n_train: int = 0, n_test: int = 0,
                  train_set: Dataset | None = None, test_set: Dataset | None = None,
                  checkpoint_path: str | None = None) -> ExperimentState:
    return {
        "synth_config": synth_config, "n_train": n_train, "n_test": n_test,
        "model_config": model_config, "train_config": train_config, "eval_config": eval_config,
        "checkpoint_path": checkpoint_path,
        "train_set": train_set, "test_set": test_set, "synth_results": None,
        "train_result": None, "training_results": None,
        "predictions": None, "inference_results": None,
        "report": None, "evaluation_results": None,
        "error_message": None,
    }


def synth_node(state: ExperimentState) -> ExperimentState:
    """Generates train/test data unless both sets were supplied."""
    current_state = state.copy()
    if current_state.get("train_set") is not None and current_state.get("test_set") is not None:
        logger.info("Datasets supplied, skipping generation")
        return current_state
    config = current_state.get("synth_config")
    if config is None:
        current_state["error_message"] = "no datasets and no synth config given"
        return current_state
    train_set, test_set = gen_splits(config, current_state["n_train"], current_state["n_test"])
    current_state["train_set"], current_state["test_set"] = train_set, test_set
    results = {"train_samples": len(train_set.samples), "test_samples": len(test_set.samples)}
    if config.task == "right-neighbor":
        results["text_only_chance"] = text_only_chance(test_set, config)
    current_state["synth_results"] = results
    return current_state


def train_node(state: ExperimentState) -> ExperimentState:
    current_state = state.copy()
    train_set = current_state["train_set"]
    if not train_set.samples:
        current_state["error_message"] = "training set is empty"
        return current_state
    result, summary = run_training(train_set, current_state["model_config"], current_state["train_config"],
                                   checkpoint_path=current_state.get("checkpoint_path"))
    current_state["train_result"] = result
    current_state["training_results"] = summary
    return current_state


def infer_node(state: ExperimentState) -> ExperimentState:
    current_state = state.copy()
    result = current_state["train_result"]
    predictions, summary = run_inference(current_state["test_set"], result.params, result.model_config, result.vocab)
    current_state["predictions"] = predictions
    current_state["inference_results"] = summary
    return current_state


def evaluate_node(state: ExperimentState) -> ExperimentState:
    current_state = state.copy()
    report, _, summary = run_evaluation(current_state["predictions"], current_state["test_set"].samples,
                                        current_state["eval_config"])
    current_state["report"] = report
    current_state["evaluation_results"] = summary
    return current_state


def _continue_or_end(state: ExperimentState) -> str:
    return "stop" if state.get("error_message") else "continue"


def build_graph():
    workflow = StateGraph(ExperimentState)

    workflow.add_node("synth", synth_node)
    workflow.add_node("train", train_node)
    workflow.add_node("infer", infer_node)
    workflow.add_node("evaluate", evaluate_node)

    workflow.set_entry_point("synth")
    workflow.add_conditional_edges("synth", _continue_or_end, {"continue": "train", "stop": END})
    workflow.add_conditional_edges("train", _continue_or_end, {"continue": "infer", "stop": END})
    workflow.add_edge("infer", "evaluate")
    workflow.add_edge("evaluate", END)

    return workflow.compile()


def run_pipeline(state: ExperimentState) -> ExperimentState:
    """Streams the graph and returns the last state; LigtError raised by a step propagates."""
    app = build_graph()
    final_state: Dict[str, Any] = dict(state)
    for step_output in app.stream(state):
        step_name = list(step_output.keys())[0]
        final_state = step_output[step_name]
        logger.debug(f"Finished step '{step_name}'")
    if final_state.get("error_message"):
        logger.warning(f"Pipeline stopped: {final_state['error_message']}")
    return final_state


def run_variant(state: ExperimentState, **model_overrides) -> ExperimentState:
    """Runs the pipeline with a modified ModelConfig, reusing any datasets already in state."""
    variant = dict(state)
    variant["model_config"] = replace(state["model_config"], **model_overrides)
    logger.info(f"--- Running variant {variant_name(variant['model_config'])} ---")
    return run_pipeline(variant)
