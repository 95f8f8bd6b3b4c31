# agents/ablation_agent.py
"""
Variant sweeps over the experiment pipeline: hashing levels x ratio setting, and the
layout-vs-text-only separation run on the shuffled right-neighbor task.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np
import pandas as pd

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from agents.synth_agent import SynthConfig, gen_splits, text_only_chance
from tools.ligt_model_tool import ModelConfig
from tools.metrics_tool import EvalConfig
from tools.trainer_tool import TrainConfig
from utils.data_utils import Dataset
from utils.errors import LigtError
from utils.log_utils import get_logger
from workflow import initial_state, run_pipeline

logger = get_logger(__name__)

DEFAULT_LEVELS = (2, 3, 4, 5)
RATIO_SETTINGS = ("ratio", "no-ratio")


def _omega_value(omega) -> float:
    value = np.asarray(omega, dtype=float)
    return float(value) if value.ndim == 0 else float(value.mean())


def run_ablation(train_set: Dataset, test_set: Dataset, model_config: ModelConfig, train_config: TrainConfig,
                 eval_config: EvalConfig = EvalConfig(), levels: Sequence[int] = DEFAULT_LEVELS) -> tuple[pd.DataFrame, dict]:
    """One row per (levels, ratio setting) with ANLS/F1/Accuracy in percent and the trained omega."""
    logger.info(f"--- Running level sweep {list(levels)} x {list(RATIO_SETTINGS)} ---")
    results = {'processed_count': 0, 'failed_items': []}
    rows = []
    for level in levels:
        for setting in RATIO_SETTINGS:
            config = replace(model_config, hash_levels=level, text_only=False,
                             ratio_mode="learned" if setting == "ratio" else "none")
            state = initial_state(config, train_config, eval_config, train_set=train_set, test_set=test_set)
            final = run_pipeline(state)
            results['processed_count'] += 1
            if final.get("error_message"):
                results['failed_items'].append({"levels": level, "ratio": setting, "error": final["error_message"]})
                continue
            rows.append({
                "levels": level,
                "ratio": setting,
                **final["report"].as_percentages(),
                "omega": round(_omega_value(final["train_result"].omega), 4),
            })
    table = pd.DataFrame(rows, columns=["levels", "ratio", "anls", "f1", "accuracy", "omega"])
    logger.info(f"Level sweep finished: {len(rows)} cells, {len(results['failed_items'])} failed")
    return table, results


def run_separation_experiment(synth_config: SynthConfig, n_train: int, n_test: int, model_config: ModelConfig,
                              train_config: TrainConfig, eval_config: EvalConfig = EvalConfig()) -> tuple[pd.DataFrame, dict]:
    """
    Trains the layout-aware model and its text-only ablation on the same synthetic split and
    reports both accuracies next to the analytic text-only chance rate.
    """
    logger.info(f"--- Running separation experiment ({synth_config.task}, shuffle={synth_config.shuffle}) ---")
    train_set, test_set = gen_splits(synth_config, n_train, n_test)
    chance = text_only_chance(test_set, synth_config) if synth_config.task == "right-neighbor" else None
    rows = []
    for text_only in (False, True):
        config = replace(model_config, text_only=text_only)
        final = run_pipeline(initial_state(config, train_config, eval_config, train_set=train_set, test_set=test_set))
        if final.get("error_message"):
            raise LigtError(final["error_message"])
        rows.append({
            "variant": "text-only" if text_only else "ligt",
            "levels": config.hash_levels,
            **final["report"].as_percentages(),
            "omega": round(_omega_value(final["train_result"].omega), 4),
        })
    table = pd.DataFrame(rows, columns=["variant", "levels", "anls", "f1", "accuracy", "omega"])
    results = {
        'processed_count': len(rows),
        'train_samples': len(train_set.samples),
        'test_samples': len(test_set.samples),
        'chance_accuracy': round(100 * chance, 2) if chance is not None else None,
    }
    logger.info(f"Separation: ligt {rows[0]['accuracy']:.2f}%, text-only {rows[1]['accuracy']:.2f}%, "
                f"chance {results['chance_accuracy']}")
    return table, results
