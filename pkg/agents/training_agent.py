# agents/training_agent.py
"""Train and inference steps: fit a LiGT variant on a dataset, then decode answers for another."""
from __future__ import annotations

import numpy as np

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from config import settings
from tools.ligt_model_tool import ModelConfig, count_parameters, save_checkpoint
from tools.tokenizer_tool import Vocabulary
from tools.trainer_tool import TrainConfig, TrainResult, encode_sample, generate_batch, train
from utils.data_utils import Dataset, Prediction
from utils.log_utils import get_logger

logger = get_logger(__name__)


def variant_name(config: ModelConfig) -> str:
    if config.text_only:
        return "text-only"
    if config.ratio_mode == "none":
        return "no-ratio"
    return "ligt"


def run_training(dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig,
                 checkpoint_path: str | None = None, vocab: Vocabulary | None = None) -> tuple[TrainResult, dict]:
    logger.info(f"--- Running training ({variant_name(model_config)}, L={model_config.hash_levels}) ---")
    result = train(dataset, model_config, train_config, vocab=vocab)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, result.params, model_config, result.vocab)
    omega = np.asarray(result.omega, dtype=float)
    summary = {
        'processed_count': len(dataset.samples),
        'variant': variant_name(model_config),
        'levels': model_config.hash_levels,
        'steps': train_config.steps,
        'parameter_count': count_parameters(result.params),
        'final_loss': result.losses[-1],
        'omega': float(omega) if omega.ndim == 0 else omega.tolist(),
        'checkpoint': checkpoint_path,
    }
    logger.info(f"Training summary: {summary['processed_count']} samples, final loss {summary['final_loss']:.4f}")
    return result, summary


def run_inference(dataset: Dataset, params: dict[str, np.ndarray], model_config: ModelConfig, vocab: Vocabulary,
                  n_jobs: int = settings.N_JOBS) -> tuple[list[Prediction], dict]:
    logger.info(f"--- Running inference on {len(dataset.samples)} samples ---")
    inputs = [encode_sample(s, dataset, vocab, model_config) for s in dataset.samples]
    answers = generate_batch(params, model_config, vocab, inputs, n_jobs=n_jobs)
    predictions = [Prediction(s.document_id, s.qa.question, a) for s, a in zip(dataset.samples, answers)]
    results = {
        'processed_count': len(predictions),
        'empty_count': sum(not p.prediction for p in predictions),
    }
    logger.info(f"Inference summary: {results['processed_count']} answers, {results['empty_count']} empty")
    return predictions, results
