# tools/ligt_model_tool.py
"""
Toy LiGT: a post-LN encoder-decoder transformer in numpy (float64) whose encoder input
embedding is extended with LayoutHEI,

    omega     = sigmoid(rho)
    E_hash_t  = omega * mean_i E[letter_i,t]
    E_input_t = E_semantic_t + E_hash_t

where the layout letters are looked up in the same table as the words. Every forward
step keeps its cache; backward() returns analytic gradients for every tensor, rho included.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import joblib
import numpy as np

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from config import settings
from tools.tokenizer_tool import TokenizedInput, Vocabulary
from utils.errors import ConfigError, DatasetIOError, DivergenceError
from utils.log_utils import get_logger

logger = get_logger(__name__)

CHECKPOINT_VERSION = 1
MASK_VALUE = -1e9
LN_EPS = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 32
    n_heads: int = 2
    d_ff: int = 64
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    hash_levels: int = settings.HASH_LEVELS
    rho_init: float = settings.RHO_INIT
    ratio_mode: str = "learned"   # "learned": omega = sigmoid(rho); "none": omega fixed to 1
    text_only: bool = False       # sever the layout channel (E_hash = 0)
    vector_ratio: bool = False    # rho of shape (d_model,) instead of a scalar
    max_input_len: int = settings.MAX_INPUT_LEN
    max_answer_len: int = settings.MAX_ANSWER_LEN
    init_std: float = 0.02

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ConfigError("d_model must be divisible by n_heads")
        if self.ratio_mode not in ("learned", "none"):
            raise ConfigError(f"unknown ratio_mode '{self.ratio_mode}'")


@dataclass
class Batch:
    enc_ids: np.ndarray      # (B, T)
    enc_letters: np.ndarray  # (B, L, T)
    enc_mask: np.ndarray     # (B, T) True on real tokens
    dec_in: np.ndarray       # (B, S) BOS + answer
    dec_target: np.ndarray   # (B, S) answer + EOS
    dec_mask: np.ndarray     # (B, S)

    @property
    def size(self) -> int:
        return self.enc_ids.shape[0]


def make_batch(inputs: Sequence[TokenizedInput], targets: Sequence[np.ndarray] | None, vocab: Vocabulary) -> Batch:
    """Right-pads encoder inputs and shifted decoder sequences with PAD."""
    pad = vocab.pad_id
    B = len(inputs)
    T = max(1, max(x.length for x in inputs))
    L = inputs[0].letters.shape[0]
    enc_ids = np.full((B, T), pad, dtype=np.int64)
    enc_letters = np.full((B, L, T), pad, dtype=np.int64)
    enc_mask = np.zeros((B, T), dtype=bool)
    for b, x in enumerate(inputs):
        enc_ids[b, : x.length] = x.ids
        enc_letters[b, :, : x.length] = x.letters
        enc_mask[b, : x.length] = True

    if targets is None:
        targets = [np.array([], dtype=np.int64)] * B
    S = max(1, max(len(t) for t in targets))
    dec_in = np.full((B, S), pad, dtype=np.int64)
    dec_target = np.full((B, S), pad, dtype=np.int64)
    dec_mask = np.zeros((B, S), dtype=bool)
    for b, t in enumerate(targets):
        n = len(t)
        dec_in[b, 0] = vocab.bos_id
        if n:
            dec_in[b, 1:n] = t[: n - 1]
            dec_target[b, :n] = t
            dec_mask[b, :n] = True
    return Batch(enc_ids, enc_letters, enc_mask, dec_in, dec_target, dec_mask)


# --- Parameters ---

def _attention_names(prefix: str) -> list[str]:
    return [f"{prefix}.{w}" for w in ("wq", "wk", "wv", "wo")]


def init_params(config: ModelConfig, vocab_size: int, seed: int = 0) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    d, f = config.d_model, config.d_ff

    def normal(*shape):
        return rng.normal(0.0, config.init_std, size=shape)

    params: dict[str, np.ndarray] = {
        "embed": normal(vocab_size, d),
        "enc_pos": normal(config.max_input_len, d),
        "dec_pos": normal(config.max_answer_len, d),
    }
    rho_shape = (d,) if config.vector_ratio else ()
    params["rho"] = np.full(rho_shape, float(config.rho_init))

    def add_ffn(prefix):
        params[f"{prefix}.w1"] = normal(d, f)
        params[f"{prefix}.b1"] = np.zeros(f)
        params[f"{prefix}.w2"] = normal(f, d)
        params[f"{prefix}.b2"] = np.zeros(d)

    def add_ln(prefix):
        params[f"{prefix}.g"] = np.ones(d)
        params[f"{prefix}.b"] = np.zeros(d)

    for l in range(config.n_encoder_layers):
        for name in _attention_names(f"enc.{l}.attn"):
            params[name] = normal(d, d)
        add_ln(f"enc.{l}.ln1")
        add_ffn(f"enc.{l}.ffn")
        add_ln(f"enc.{l}.ln2")
    for l in range(config.n_decoder_layers):
        for name in _attention_names(f"dec.{l}.self"):
            params[name] = normal(d, d)
        add_ln(f"dec.{l}.ln1")
        for name in _attention_names(f"dec.{l}.cross"):
            params[name] = normal(d, d)
        add_ln(f"dec.{l}.ln2")
        add_ffn(f"dec.{l}.ffn")
        add_ln(f"dec.{l}.ln3")
    params["out.w"] = normal(d, vocab_size)
    params["out.b"] = np.zeros(vocab_size)
    return params


def count_parameters(params: dict[str, np.ndarray]) -> int:
    return int(sum(p.size for p in params.values()))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def layout_ratio(params: dict[str, np.ndarray], config: ModelConfig) -> np.ndarray | float:
    """The ratio omega the model currently applies (1.0 without a ratio, 0.0 when text-only)."""
    if config.text_only:
        return 0.0
    if config.ratio_mode == "none":
        return 1.0
    return sigmoid(params["rho"])


# --- Layers ---

def softmax(x, axis=-1):
    x = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(x)
    return e / np.sum(e, axis=axis, keepdims=True)


def layer_norm_forward(x, g, b):
    mean = x.mean(axis=-1, keepdims=True)
    std = np.sqrt(x.var(axis=-1, keepdims=True) + LN_EPS)
    xhat = (x - mean) / std
    return g * xhat + b, (xhat, std, g)


def layer_norm_backward(dout, cache):
    xhat, std, g = cache
    dg = np.sum(dout * xhat, axis=(0, 1))
    db = np.sum(dout, axis=(0, 1))
    dxhat = dout * g
    dx = (dxhat - dxhat.mean(axis=-1, keepdims=True)
          - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)) / std
    return dx, dg, db


def _split_heads(x, n_heads):
    B, T, d = x.shape
    return x.reshape(B, T, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, H, T, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, T, H * dh)


def attention_forward(xq, xkv, p, prefix, mask, n_heads):
    """Multi-head attention; mask is (B, Tq, Tk) with True where attending is allowed."""
    wq, wk, wv, wo = (p[n] for n in _attention_names(prefix))
    q = _split_heads(xq @ wq, n_heads)
    k = _split_heads(xkv @ wk, n_heads)
    v = _split_heads(xkv @ wv, n_heads)
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = np.where(mask[:, None, :, :], (q @ k.transpose(0, 1, 3, 2)) * scale, MASK_VALUE)
    a = softmax(scores)
    o = _merge_heads(a @ v)
    return o @ wo, (xq, xkv, q, k, v, a, o, scale)


def attention_backward(dout, cache, p, prefix, grads, n_heads):
    xq, xkv, q, k, v, a, o, scale = cache
    wq, wk, wv, wo = (p[n] for n in _attention_names(prefix))
    grads[f"{prefix}.wo"] += np.einsum("btd,bte->de", o, dout)
    do = _split_heads(dout @ wo.T, n_heads)
    da = do @ v.transpose(0, 1, 3, 2)
    dv = a.transpose(0, 1, 3, 2) @ do
    ds = a * (da - np.sum(da * a, axis=-1, keepdims=True)) * scale
    dq = _merge_heads(ds @ k)
    dk = _merge_heads(ds.transpose(0, 1, 3, 2) @ q)
    dv = _merge_heads(dv)
    grads[f"{prefix}.wq"] += np.einsum("btd,bte->de", xq, dq)
    grads[f"{prefix}.wk"] += np.einsum("btd,bte->de", xkv, dk)
    grads[f"{prefix}.wv"] += np.einsum("btd,bte->de", xkv, dv)
    dxq = dq @ wq.T
    dxkv = dk @ wk.T + dv @ wv.T
    return dxq, dxkv


def ffn_forward(x, p, prefix):
    h = x @ p[f"{prefix}.w1"] + p[f"{prefix}.b1"]
    r = np.maximum(h, 0.0)
    return r @ p[f"{prefix}.w2"] + p[f"{prefix}.b2"], (x, h, r)


def ffn_backward(dout, cache, p, prefix, grads):
    x, h, r = cache
    grads[f"{prefix}.w2"] += np.einsum("btf,btd->fd", r, dout)
    grads[f"{prefix}.b2"] += dout.sum(axis=(0, 1))
    dh = (dout @ p[f"{prefix}.w2"].T) * (h > 0)
    grads[f"{prefix}.w1"] += np.einsum("btd,btf->df", x, dh)
    grads[f"{prefix}.b1"] += dh.sum(axis=(0, 1))
    return dh @ p[f"{prefix}.w1"].T


# --- LayoutHEI ---

def layout_mean(table: np.ndarray, letters: np.ndarray) -> np.ndarray:
    """Mean letter embedding per position; letters is (..., L, T), result (..., T, d)."""
    return table[letters].mean(axis=-3)


def integrate_layout(e_semantic: np.ndarray, letters: np.ndarray, rho, table: np.ndarray,
                     ratio_mode: str = "learned", omega=None) -> np.ndarray:
    """E_input = E_semantic + omega * mean_i E[letter_i]; omega = sigmoid(rho) unless fixed."""
    if omega is None:
        omega = 1.0 if ratio_mode == "none" else sigmoid(rho)
    return e_semantic + omega * layout_mean(table, letters)


# --- Model ---

def forward(params: dict[str, np.ndarray], batch: Batch, config: ModelConfig, omega=None):
    """Returns decoder logits (B, S, V) and the cache needed by backward()."""
    p = params
    H = config.n_heads
    T = batch.enc_ids.shape[1]
    S = batch.dec_in.shape[1]
    if T > config.max_input_len or S > config.max_answer_len:
        raise ConfigError(f"batch ({T}, {S}) exceeds the model's position tables")
    cache: dict = {"omega_override": omega}

    e_semantic = p["embed"][batch.enc_ids]
    if config.text_only:
        x = e_semantic
    else:
        mean = layout_mean(p["embed"], batch.enc_letters)
        w = layout_ratio(p, config) if omega is None else omega
        x = e_semantic + w * mean
        cache["layout"] = (mean, w)
    cache["e_input"] = x
    x = x + p["enc_pos"][:T]

    enc_self_mask = np.broadcast_to(batch.enc_mask[:, None, :], (batch.size, T, T))
    cache["enc"] = []
    for l in range(config.n_encoder_layers):
        a, a_cache = attention_forward(x, x, p, f"enc.{l}.attn", enc_self_mask, H)
        x1, ln1 = layer_norm_forward(x + a, p[f"enc.{l}.ln1.g"], p[f"enc.{l}.ln1.b"])
        f, f_cache = ffn_forward(x1, p, f"enc.{l}.ffn")
        x, ln2 = layer_norm_forward(x1 + f, p[f"enc.{l}.ln2.g"], p[f"enc.{l}.ln2.b"])
        cache["enc"].append((a_cache, ln1, f_cache, ln2))
    memory = x

    # padding only trails the real tokens, so the causal mask already hides it
    causal = np.tril(np.ones((S, S), dtype=bool))
    dec_self_mask = np.broadcast_to(causal[None, :, :], (batch.size, S, S))
    cross_mask = np.broadcast_to(batch.enc_mask[:, None, :], (batch.size, S, T))
    y = p["embed"][batch.dec_in] + p["dec_pos"][:S]
    cache["dec"] = []
    for l in range(config.n_decoder_layers):
        a, sa_cache = attention_forward(y, y, p, f"dec.{l}.self", dec_self_mask, H)
        y1, ln1 = layer_norm_forward(y + a, p[f"dec.{l}.ln1.g"], p[f"dec.{l}.ln1.b"])
        c, ca_cache = attention_forward(y1, memory, p, f"dec.{l}.cross", cross_mask, H)
        y2, ln2 = layer_norm_forward(y1 + c, p[f"dec.{l}.ln2.g"], p[f"dec.{l}.ln2.b"])
        f, f_cache = ffn_forward(y2, p, f"dec.{l}.ffn")
        y, ln3 = layer_norm_forward(y2 + f, p[f"dec.{l}.ln3.g"], p[f"dec.{l}.ln3.b"])
        cache["dec"].append((sa_cache, ln1, ca_cache, ln2, f_cache, ln3))

    logits = y @ p["out.w"] + p["out.b"]
    cache["final"] = y
    return logits, cache


def loss(logits: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None):
    """Mean token cross entropy over real target positions; returns (loss, dlogits)."""
    if mask is None:
        mask = np.ones(target.shape, dtype=bool)
    n = max(int(mask.sum()), 1)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_z
    picked = np.take_along_axis(log_probs, target[..., None], axis=-1)[..., 0]
    value = float(-(picked * mask).sum() / n)
    if not np.isfinite(value):
        raise DivergenceError(f"non-finite loss {value}")
    dlogits = np.exp(log_probs)
    np.put_along_axis(dlogits, target[..., None], np.take_along_axis(dlogits, target[..., None], axis=-1) - 1.0, axis=-1)
    dlogits *= (mask / n)[..., None]
    return value, dlogits


def backward(params: dict[str, np.ndarray], batch: Batch, config: ModelConfig, dlogits: np.ndarray, cache) -> dict[str, np.ndarray]:
    p = params
    H = config.n_heads
    grads = {name: np.zeros_like(value) for name, value in p.items()}
    T = batch.enc_ids.shape[1]
    S = batch.dec_in.shape[1]

    y = cache["final"]
    grads["out.w"] += np.einsum("bsd,bsv->dv", y, dlogits)
    grads["out.b"] += dlogits.sum(axis=(0, 1))
    dy = dlogits @ p["out.w"].T

    dmemory = np.zeros_like(cache["e_input"])
    for l in reversed(range(config.n_decoder_layers)):
        sa_cache, ln1, ca_cache, ln2, f_cache, ln3 = cache["dec"][l]
        d_res3, grads[f"dec.{l}.ln3.g"], grads[f"dec.{l}.ln3.b"] = layer_norm_backward(dy, ln3)
        d_y2 = d_res3 + ffn_backward(d_res3, f_cache, p, f"dec.{l}.ffn", grads)
        d_res2, grads[f"dec.{l}.ln2.g"], grads[f"dec.{l}.ln2.b"] = layer_norm_backward(d_y2, ln2)
        d_y1, d_mem = attention_backward(d_res2, ca_cache, p, f"dec.{l}.cross", grads, H)
        d_y1 += d_res2
        dmemory += d_mem
        d_res1, grads[f"dec.{l}.ln1.g"], grads[f"dec.{l}.ln1.b"] = layer_norm_backward(d_y1, ln1)
        dq, dkv = attention_backward(d_res1, sa_cache, p, f"dec.{l}.self", grads, H)
        dy = d_res1 + dq + dkv

    np.add.at(grads["embed"], batch.dec_in, dy)
    grads["dec_pos"][:S] += dy.sum(axis=0)

    dx = dmemory
    for l in reversed(range(config.n_encoder_layers)):
        a_cache, ln1, f_cache, ln2 = cache["enc"][l]
        d_res2, grads[f"enc.{l}.ln2.g"], grads[f"enc.{l}.ln2.b"] = layer_norm_backward(dx, ln2)
        d_x1 = d_res2 + ffn_backward(d_res2, f_cache, p, f"enc.{l}.ffn", grads)
        d_res1, grads[f"enc.{l}.ln1.g"], grads[f"enc.{l}.ln1.b"] = layer_norm_backward(d_x1, ln1)
        dq, dkv = attention_backward(d_res1, a_cache, p, f"enc.{l}.attn", grads, H)
        dx = d_res1 + dq + dkv

    grads["enc_pos"][:T] += dx.sum(axis=0)
    d_input = dx
    np.add.at(grads["embed"], batch.enc_ids, d_input)

    if not config.text_only:
        mean, w = cache["layout"]
        levels = batch.enc_letters.shape[1]
        d_mean = w * d_input / levels
        for level in range(levels):
            np.add.at(grads["embed"], batch.enc_letters[:, level, :], d_mean)
        if config.ratio_mode == "learned" and cache["omega_override"] is None:
            omega = sigmoid(p["rho"])
            d_omega = (d_input * mean).sum(axis=(0, 1)) if config.vector_ratio else (d_input * mean).sum()
            grads["rho"] = np.asarray(d_omega * omega * (1.0 - omega)).reshape(p["rho"].shape)
    return grads


def loss_and_grads(params, batch: Batch, config: ModelConfig):
    logits, cache = forward(params, batch, config)
    value, dlogits = loss(logits, batch.dec_target, batch.dec_mask)
    return value, backward(params, batch, config, dlogits, cache)


def batch_loss(params, batch: Batch, config: ModelConfig) -> float:
    logits, _ = forward(params, batch, config)
    return loss(logits, batch.dec_target, batch.dec_mask)[0]


ENTRY_ERROR_FLOOR = 1e-6  # below this, entry errors are read as absolute


@dataclass(frozen=True)
class TensorCheck:
    """Finite-difference agreement of one parameter tensor over its checked entries."""
    norm_ratio: float  # ||a - n|| / (||a|| + ||n||), the pass/fail measure
    max_entry_error: float  # max |a - n| / max(|a| + |n|, ENTRY_ERROR_FLOOR); ReLU kinks in reach of h inflate it
    checked: int


def grad_check(params: dict[str, np.ndarray], batch: Batch, config: ModelConfig, h: float = 1e-5,
               entries_per_tensor: int | None = None, seed: int = 0) -> dict[str, TensorCheck]:
    """
    Compares analytic gradients with central finite differences, tensor by tensor. Every
    entry is checked unless entries_per_tensor is given, in which case the largest-magnitude
    entries plus as many random ones are.
    """
    rng = np.random.default_rng(seed)
    _, grads = loss_and_grads(params, batch, config)
    checks = {}
    for name, value in params.items():
        flat = value.reshape(-1)
        analytic = grads[name].reshape(-1)
        if entries_per_tensor is None or flat.size <= 2 * entries_per_tensor:
            indices = np.arange(flat.size)
        else:
            top = np.argsort(-np.abs(analytic), kind="stable")[:entries_per_tensor]
            sampled = rng.choice(flat.size, size=entries_per_tensor, replace=False)
            indices = np.unique(np.concatenate([top, sampled]))
        numeric = np.zeros(len(indices))
        for n, i in enumerate(indices):
            original = flat[i]
            flat[i] = original + h
            plus = batch_loss(params, batch, config)
            flat[i] = original - h
            minus = batch_loss(params, batch, config)
            flat[i] = original
            numeric[n] = (plus - minus) / (2 * h)
        a = analytic[indices]
        denominator = np.linalg.norm(a) + np.linalg.norm(numeric)
        norm_ratio = float(np.linalg.norm(a - numeric) / denominator) if denominator > 0 else 0.0
        entry = np.abs(a - numeric) / np.maximum(np.abs(a) + np.abs(numeric), ENTRY_ERROR_FLOOR)
        checks[name] = TensorCheck(norm_ratio, float(entry.max()) if entry.size else 0.0, len(indices))
    return checks


# --- Checkpoints ---

def save_checkpoint(path: str, params: dict[str, np.ndarray], config: ModelConfig, vocab: Vocabulary) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "vocab": list(vocab.tokens),
        "model_config": asdict(config),
        "params": {name: np.array(value, copy=True) for name, value in params.items()},
    }
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        joblib.dump(payload, path)
    except OSError as e:
        raise DatasetIOError(f"cannot write checkpoint {path}: {e}") from e
    logger.info(f"Saved checkpoint to {path}")


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], ModelConfig, Vocabulary]:
    if not os.path.exists(path):
        raise DatasetIOError(f"checkpoint not found: {path}")
    try:
        payload = joblib.load(path)
    except Exception as e:
        raise DatasetIOError(f"cannot load checkpoint {path}: {e}") from e
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise DatasetIOError(f"unsupported checkpoint version {version} in {path}")
    logger.info(f"Loaded checkpoint from {path}")
    return payload["params"], ModelConfig(**payload["model_config"]), Vocabulary(payload["vocab"])
