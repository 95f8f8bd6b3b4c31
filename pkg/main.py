# main.py
"""
Command-line entry point. Every subcommand prints a table, and writes line-delimited
JSON when --out is given. LigtError subclasses map to exit codes (IO 2, schema 3,
divergence 4, invalid settings 5).
"""
import argparse
import os
import sys
from dataclasses import asdict, replace

import numpy as np
import pandas as pd

from agents.ablation_agent import DEFAULT_LEVELS, run_ablation, run_separation_experiment
from agents.annotator_agent import dataset_statistics, run_alignment, run_classification
from agents.baseline_agent import AVG_CONTEXT_BOXES, BASELINES, run_baselines
from agents.evaluation_agent import GROUPINGS, run_evaluation
from agents.synth_agent import TASKS, SynthConfig, gen_splits, plant_deletions, run_synth
from agents.training_agent import run_inference, run_training
from config import settings
from tools.layout_hash_tool import layout_hash, layout_letters
from tools.ligt_model_tool import ModelConfig, count_parameters, grad_check, init_params, load_checkpoint, make_batch
from tools.metrics_tool import EvalConfig
from tools.trainer_tool import TrainConfig, encode_dataset, vocabulary_for
from utils.data_utils import (Dataset, load_dataset, load_documents, load_predictions, load_samples, sample_to_record,
                              save_dataset, save_predictions, split_dataset, write_records)
from utils.errors import LigtError
from utils.log_utils import get_logger, setup_logging
from utils.report_utils import format_table, generate_docx_report, records_table

logger = get_logger("main")

GRADCHECK_TOLERANCE = 1e-4


# --- Config builders ---

def model_config_from(args, **overrides) -> ModelConfig:
    values = dict(
        d_model=args.d_model, n_heads=args.heads, d_ff=args.d_ff,
        n_encoder_layers=args.layers, n_decoder_layers=args.layers,
        hash_levels=args.levels if isinstance(args.levels, int) else settings.HASH_LEVELS,
        rho_init=args.rho_init, ratio_mode="none" if args.no_ratio else "learned",
        text_only=args.text_only, vector_ratio=args.vector_ratio,
        max_input_len=args.max_input_len, max_answer_len=args.max_answer_len,
    )
    values.update(overrides)
    return ModelConfig(**values)


def train_config_from(args) -> TrainConfig:
    return TrainConfig(steps=args.steps, batch_size=args.batch_size, lr=args.lr, warmup_steps=args.warmup,
                       clip_norm=args.clip_norm, seed=args.seed, show_progress=not args.no_progress)


def synth_config_from(args) -> SynthConfig:
    return SynthConfig(seed=args.seed, rows=args.rows, cols=args.cols, vocab_size=args.vocab_size,
                       duplicate_fraction=args.duplicate_fraction, task=args.task, shuffle=not args.no_shuffle,
                       jitter=args.jitter)


def emit(records: list[dict], out: str | None, table: str | None = None) -> None:
    print(table if table is not None else records_table(records))
    if out:
        write_records(records, out)
        logger.info(f"Wrote {len(records)} records to {out}")


# --- Subcommands ---

def cmd_hash(args) -> int:
    documents = load_documents(args.docs)
    records = []
    for document in documents.values():
        if not document.tokens:
            records.append({"id": document.id, "letters": [], "codes": []})
            continue
        grid = layout_hash(document.boxes, args.levels)
        records.append({
            "id": document.id,
            "letters": layout_letters(grid),
            "codes": [list(code.quadrants) for code in grid.codes],
            "root_rect": list(grid.root_rect),
        })
    table = pd.DataFrame([{"id": r["id"], "tokens": len(r["codes"]),
                           "first_column": "".join(row[0] for row in r["letters"]) if r["codes"] else ""}
                          for r in records])
    emit(records, args.out, format_table(table))
    return 0


def cmd_classify(args) -> int:
    dataset = Dataset(samples=load_samples(args.samples))
    annotated, results = run_classification(dataset)
    counts = pd.Series(results['question_types'], name="count").rename_axis("question_type").reset_index()
    emit([sample_to_record(s) for s in annotated], args.out, format_table(counts))
    return 0


def cmd_align(args) -> int:
    dataset = load_dataset(args.docs, args.samples)
    aligned, results = run_alignment(dataset)
    table = pd.DataFrame([{"samples": results['processed_count'],
                           "fully_matched": 100 * results['fully_matched'],
                           "with_deletion": 100 * results['with_deletion']}])
    emit([sample_to_record(s) for s in aligned], args.out, format_table(table))
    return 0


def cmd_eval(args) -> int:
    samples = load_samples(args.samples)
    predictions = load_predictions(args.predictions)
    report, groups, _ = run_evaluation(predictions, samples, EvalConfig(tau=args.tau, normalize_text=not args.raw_text),
                                       by=args.by)
    records = [{"group": "all", **report.as_record()}]
    records += [{"group": name, **r.as_record()} for name, r in groups.items()]
    emit(records, args.out)
    return 0


def cmd_synth(args) -> int:
    dataset, results = run_synth(synth_config_from(args), args.n_docs)
    if args.plant_deletions:
        dataset = plant_deletions(dataset, args.plant_deletions, seed=args.seed)
        results['planted'] = round(args.plant_deletions * len(dataset.samples))
    save_dataset(dataset, os.path.join(args.out, "documents.jsonl"), os.path.join(args.out, "samples.jsonl"))
    print(records_table([results]))
    return 0


def cmd_split(args) -> int:
    dataset = load_dataset(args.docs, args.samples)
    records = []
    for name, part in zip(("train", "dev", "test"), split_dataset(dataset, args.ratios, seed=args.seed)):
        save_dataset(part, os.path.join(args.out, f"{name}_documents.jsonl"), os.path.join(args.out, f"{name}_samples.jsonl"))
        records.append({"split": name, "documents": len(part.documents), "samples": len(part.samples)})
    print(records_table(records))
    return 0


def cmd_stats(args) -> int:
    dataset = load_dataset(args.docs, args.samples)
    by_question, by_answer = dataset_statistics(dataset)
    print(format_table(by_answer))
    emit(by_question.to_dict(orient="records"), args.out, format_table(by_question))
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset(args.docs, args.samples)
    _, summary = run_training(dataset, model_config_from(args), train_config_from(args), checkpoint_path=args.checkpoint)
    emit([summary], args.out)
    return 0


def cmd_infer(args) -> int:
    params, config, vocab = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.docs, args.samples)
    predictions, results = run_inference(dataset, params, config, vocab)
    print(records_table([results]))
    if args.out:
        save_predictions(predictions, args.out)
    return 0


def cmd_gradcheck(args) -> int:
    synth = SynthConfig(seed=args.seed, rows=2, cols=2, vocab_size=4, duplicate_fraction=0.5, task="region-value")
    dataset, _ = run_synth(synth, 2)
    vocab = vocabulary_for(dataset)
    config = model_config_from(args, max_input_len=32, max_answer_len=8)
    params = init_params(config, len(vocab), seed=args.seed)
    # widen the init so every gradient sits well above finite-difference round-off
    rng = np.random.default_rng(args.seed)
    for name, value in params.items():
        if name != "rho":
            params[name] = value + rng.normal(0.0, 0.3, size=value.shape)
    inputs, targets = encode_dataset(dataset, vocab, config)
    batch = make_batch(inputs, targets, vocab)
    checks = grad_check(params, batch, config, h=args.h, entries_per_tensor=args.sample, seed=args.seed)
    records = [{"tensor": name, **asdict(check)} for name, check in checks.items()]
    table = pd.DataFrame(records)
    worst = float(table["norm_ratio"].max())
    print(table.to_string(index=False, float_format=lambda v: f"{v:.3e}"))
    status = "PASS" if worst < GRADCHECK_TOLERANCE else "FAIL"
    print(f"parameters: {count_parameters(params)}  checked entries: {int(table['checked'].sum())}  "
          f"max relative error (per-tensor norm ratio): {worst:.3e}  "
          f"max entry error: {table['max_entry_error'].max():.3e}  {status}")
    if args.out:
        write_records(records + [{"tensor": "max", "norm_ratio": worst, "status": status}], args.out)
    return 0 if status == "PASS" else 1


def _datasets_for_sweep(args) -> tuple[Dataset, Dataset]:
    if args.train_docs and args.train_samples and args.test_docs and args.test_samples:
        return load_dataset(args.train_docs, args.train_samples), load_dataset(args.test_docs, args.test_samples)
    return gen_splits(synth_config_from(args), args.n_train, args.n_test)


def cmd_ablate(args) -> int:
    train_set, test_set = _datasets_for_sweep(args)
    model_config = model_config_from(args, hash_levels=settings.HASH_LEVELS)
    table, results = run_ablation(train_set, test_set, model_config, train_config_from(args),
                                  EvalConfig(tau=args.tau), levels=args.levels)
    emit(table.to_dict(orient="records"), args.out, format_table(table))
    if args.report_docx:
        generate_docx_report(args.report_docx, "Hashing Level and Ratio Ablation",
                             {**asdict(model_config), **asdict(train_config_from(args)), "levels": list(args.levels)},
                             table, {k: v for k, v in results.items() if k != 'processed_count'})
    return 0


def cmd_baselines(args) -> int:
    train_set, test_set = _datasets_for_sweep(args)
    table, results = run_baselines(train_set, test_set, EvalConfig(tau=args.tau), tuple(args.names),
                                   seed=args.seed, max_boxes=args.max_boxes)
    emit(table.to_dict(orient="records"), args.out, format_table(table))
    for failure in results['failed_items']:
        print(f"skipped {failure['baseline']}: {failure['error']}", file=sys.stderr)
    return 0


def cmd_experiment(args) -> int:
    synth = replace(synth_config_from(args), task="right-neighbor", shuffle=True)
    model_config = model_config_from(args, text_only=False)
    table, results = run_separation_experiment(synth, args.n_train, args.n_test, model_config,
                                               train_config_from(args), EvalConfig(tau=args.tau))
    print(f"text-only chance accuracy: {results['chance_accuracy']}")
    emit(table.to_dict(orient="records"), args.out, format_table(table))
    if args.report_docx:
        generate_docx_report(args.report_docx, "Layout vs Text-only Separation",
                             {**asdict(synth), **asdict(model_config), "steps": args.steps}, table, results)
    return 0


# --- Parser ---

def _add_model_args(p, levels_default=settings.HASH_LEVELS):
    p.add_argument("--d-model", type=int, default=32)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--d-ff", type=int, default=64)
    p.add_argument("--layers", type=int, default=2, help="encoder and decoder layers each")
    p.add_argument("--rho-init", type=float, default=settings.RHO_INIT)
    p.add_argument("--max-input-len", type=int, default=settings.MAX_INPUT_LEN)
    p.add_argument("--max-answer-len", type=int, default=settings.MAX_ANSWER_LEN)
    p.add_argument("--text-only", action="store_true", help="sever the layout channel")
    p.add_argument("--no-ratio", action="store_true", help="fix omega to 1")
    p.add_argument("--vector-ratio", action="store_true", help="one rho per embedding dimension")


def _add_train_args(p, steps=500, batch_size=16, warmup=100):
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--batch-size", type=int, default=batch_size)
    p.add_argument("--lr", type=float, default=TrainConfig.lr)
    p.add_argument("--warmup", type=int, default=warmup)
    p.add_argument("--clip-norm", type=float, default=1.0)
    p.add_argument("--no-progress", action="store_true")


def _add_synth_args(p, task="right-neighbor", jitter=0.1):
    p.add_argument("--task", choices=TASKS, default=task)
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--vocab-size", type=int, default=16)
    p.add_argument("--duplicate-fraction", type=float, default=1.0)
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--jitter", type=float, default=jitter, help="max box offset as a fraction of a cell")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ligt", description="Layout hashing, annotation and toy LiGT experiments")
    parser.add_argument("--log-level", default=None, help="overrides LIGT_LOG_LEVEL")
    parser.add_argument("--seed", type=int, default=settings.SEED)
    parser.add_argument("--tau", type=float, default=settings.ANLS_TAU)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hash", help="layout letters per document")
    p.add_argument("--docs", required=True)
    p.add_argument("--levels", type=int, default=settings.HASH_LEVELS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_hash)

    p = sub.add_parser("classify", help="question and answer types")
    p.add_argument("--samples", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("align", help="extractive answer spans and coverage")
    p.add_argument("--docs", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="ANLS, F1 and accuracy")
    p.add_argument("--predictions", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--by", choices=GROUPINGS)
    p.add_argument("--raw-text", action="store_true", help="score without text normalization")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="synthetic receipts and questions")
    _add_synth_args(p)
    p.add_argument("--n-docs", type=int, default=100)
    p.add_argument("--plant-deletions", type=float, default=0.0, help="fraction of samples given an OCR deletion")
    p.add_argument("--out", default=settings.DATA_DIR, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="train/dev/test split by document")
    p.add_argument("--docs", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--ratios", type=int, nargs=3, default=[8, 1, 1])
    p.add_argument("--out", default=settings.DATA_DIR, help="output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="dataset statistics per question and answer type")
    p.add_argument("--docs", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model and save a checkpoint")
    p.add_argument("--docs", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--levels", type=int, default=settings.HASH_LEVELS)
    p.add_argument("--checkpoint", default=os.path.join(settings.MODEL_DIR, "ligt.joblib"))
    _add_model_args(p)
    _add_train_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="greedy answers from a checkpoint")
    p.add_argument("--docs", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--checkpoint", default=os.path.join(settings.MODEL_DIR, "ligt.joblib"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--levels", type=int, default=settings.HASH_LEVELS)
    _add_model_args(p)
    p.set_defaults(d_model=8, d_ff=16, layers=1)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--sample", type=int, help="check only the N largest and N random entries per tensor")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="hashing levels x ratio sweep")
    p.add_argument("--levels", type=int, nargs="+", default=list(DEFAULT_LEVELS))
    p.add_argument("--train-docs")
    p.add_argument("--train-samples")
    p.add_argument("--test-docs")
    p.add_argument("--test-samples")
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=200)
    _add_synth_args(p)
    _add_model_args(p)
    _add_train_args(p, steps=1500, batch_size=32)
    p.add_argument("--report-docx")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("baselines", help="OCR upper bounds and frequent-answer heuristics")
    p.add_argument("--names", nargs="+", choices=BASELINES, default=list(BASELINES))
    p.add_argument("--max-boxes", type=int, default=AVG_CONTEXT_BOXES, help="context cut for matched-ocr-avg")
    p.add_argument("--train-docs")
    p.add_argument("--train-samples")
    p.add_argument("--test-docs")
    p.add_argument("--test-samples")
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=200)
    _add_synth_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("experiment", help="layout-aware vs text-only on shuffled right-neighbor questions")
    p.add_argument("--levels", type=int, default=settings.HASH_LEVELS)
    p.add_argument("--n-train", type=int, default=20000)
    p.add_argument("--n-test", type=int, default=500)
    _add_synth_args(p, jitter=0.0)
    _add_model_args(p)
    _add_train_args(p, steps=6000, batch_size=32, warmup=200)
    p.add_argument("--report-docx")
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except LigtError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
