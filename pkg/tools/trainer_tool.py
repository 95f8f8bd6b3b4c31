# tools/trainer_tool.py
"""Adam training loop and greedy decoding for the toy LiGT model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from config import settings
from tools.ligt_model_tool import (Batch, ModelConfig, backward, forward, init_params, layout_ratio, loss,
                                   make_batch)
from tools.tokenizer_tool import TokenizedInput, Vocabulary, build_vocabulary, encode_answer, tokenize
from utils.data_utils import Dataset, Sample
from utils.errors import ConfigError, DivergenceError
from utils.log_utils import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 500
    batch_size: int = 16
    lr: float = 1e-3
    warmup_steps: int = 100
    clip_norm: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = settings.SEED
    log_every: int = 50
    show_progress: bool = True


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    vocab: Vocabulary
    model_config: ModelConfig
    losses: list[float] = field(default_factory=list)

    @property
    def omega(self):
        return layout_ratio(self.params, self.model_config)


class Adam:
    def __init__(self, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            update = lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)
            params[name] = params[name] - update


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Rescales grads in place when their global L2 norm exceeds max_norm; returns the norm before clipping."""
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for name in grads:
            grads[name] = grads[name] * scale
    return norm


def learning_rate(step: int, config: TrainConfig) -> float:
    if config.warmup_steps <= 0:
        return config.lr
    return config.lr * min(1.0, (step + 1) / config.warmup_steps)


def encode_sample(sample: Sample, dataset: Dataset, vocab: Vocabulary, config: ModelConfig) -> TokenizedInput:
    return tokenize(sample.qa.question, dataset.document_for(sample), vocab, config.hash_levels, config.max_input_len)


def encode_dataset(dataset: Dataset, vocab: Vocabulary, config: ModelConfig) -> tuple[list[TokenizedInput], list[np.ndarray]]:
    inputs = [encode_sample(s, dataset, vocab, config) for s in dataset.samples]
    targets = [encode_answer(s.qa.answer, vocab, config.max_answer_len) for s in dataset.samples]
    return inputs, targets


def vocabulary_for(dataset: Dataset) -> Vocabulary:
    return build_vocabulary(dataset.documents.values(),
                            (s.qa.question for s in dataset.samples),
                            (s.qa.answer for s in dataset.samples))


def train(dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig,
          vocab: Vocabulary | None = None) -> TrainResult:
    """Deterministic given train_config.seed: same data and seed give bitwise-identical params."""
    if not dataset.samples:
        raise ConfigError("cannot train on an empty dataset")
    vocab = vocab or vocabulary_for(dataset)
    inputs, targets = encode_dataset(dataset, vocab, model_config)
    params = init_params(model_config, len(vocab), seed=train_config.seed)
    optimizer = Adam(params, train_config.beta1, train_config.beta2, train_config.eps)
    rng = np.random.default_rng(train_config.seed + 1)
    n = len(inputs)
    batch_size = min(train_config.batch_size, n)
    result = TrainResult(params=params, vocab=vocab, model_config=model_config)

    logger.info(f"Training on {n} samples, vocab {len(vocab)}, {train_config.steps} steps "
                f"(L={model_config.hash_levels}, ratio={model_config.ratio_mode}, text_only={model_config.text_only})")
    progress = tqdm(range(train_config.steps), desc="train", disable=None if train_config.show_progress else True, leave=False)
    for step in progress:
        picked = rng.choice(n, size=batch_size, replace=False)
        batch = make_batch([inputs[i] for i in picked], [targets[i] for i in picked], vocab)
        logits, cache = forward(params, batch, model_config)
        try:
            value, dlogits = loss(logits, batch.dec_target, batch.dec_mask)
        except DivergenceError as e:
            raise DivergenceError(f"step {step}: {e}, omega={_format_omega(layout_ratio(params, model_config))}") from e
        grads = backward(params, batch, model_config, dlogits, cache)
        norm = clip_by_global_norm(grads, train_config.clip_norm)
        if not np.isfinite(norm):
            raise DivergenceError(f"step {step}: non-finite gradient norm, loss={value:.4f}, "
                                  f"omega={_format_omega(layout_ratio(params, model_config))}")
        optimizer.step(params, grads, learning_rate(step, train_config))
        result.losses.append(value)
        progress.set_postfix(loss=f"{value:.4f}")
        if train_config.log_every and (step + 1) % train_config.log_every == 0:
            logger.debug(f"step {step + 1}: loss {value:.4f}, omega {_format_omega(layout_ratio(params, model_config))}")
    progress.close()
    logger.info(f"Training finished: last loss {result.losses[-1]:.4f}, omega {_format_omega(result.omega)}")
    return result


def _format_omega(omega) -> str:
    value = np.asarray(omega, dtype=float)
    return f"{float(value):.4f}" if value.ndim == 0 else f"mean {value.mean():.4f}"


# --- Decoding ---

def _greedy(params, config: ModelConfig, vocab: Vocabulary, inputs: list[TokenizedInput], max_len: int) -> list[str]:
    batch = make_batch(inputs, None, vocab)
    B = batch.size
    max_len = min(max_len, config.max_answer_len)
    dec_in = np.full((B, 1), vocab.bos_id, dtype=np.int64)
    produced = np.zeros((B, 0), dtype=np.int64)
    finished = np.zeros(B, dtype=bool)
    for _ in range(max_len):
        step_batch = Batch(batch.enc_ids, batch.enc_letters, batch.enc_mask, dec_in,
                           np.zeros_like(dec_in), np.zeros(dec_in.shape, dtype=bool))
        logits, _ = forward(params, step_batch, config)
        last = logits[:, -1, :].copy()
        last[:, [vocab.pad_id, vocab.bos_id]] = -np.inf
        next_ids = np.where(finished, vocab.eos_id, last.argmax(axis=-1))
        produced = np.concatenate([produced, next_ids[:, None]], axis=1)
        finished |= next_ids == vocab.eos_id
        if finished.all() or dec_in.shape[1] >= config.max_answer_len:
            break
        dec_in = np.concatenate([dec_in, next_ids[:, None]], axis=1)
    return [vocab.detokenize(row) for row in produced]


def generate(params, config: ModelConfig, vocab: Vocabulary, tokenized: TokenizedInput,
             max_len: int | None = None) -> str:
    """Greedy decoding from BOS until EOS or max_len; tokens joined by single spaces."""
    return _greedy(params, config, vocab, [tokenized], max_len or config.max_answer_len)[0]


def generate_batch(params, config: ModelConfig, vocab: Vocabulary, inputs: list[TokenizedInput],
                   max_len: int | None = None, batch_size: int = 64, n_jobs: int = settings.N_JOBS) -> list[str]:
    if not inputs:
        return []
    max_len = max_len or config.max_answer_len
    chunks = [inputs[i:i + batch_size] for i in range(0, len(inputs), batch_size)]
    decoded = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_greedy)(params, config, vocab, chunk, max_len) for chunk in chunks
    )
    return [answer for chunk in decoded for answer in chunk]
