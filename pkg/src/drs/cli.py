"""Operator CLI: calibrate buckets, train and evaluate the baseline,
simulate gating policies, and score single diffs.

JSON reports go to stdout; human-readable progress goes to stderr, so
commands compose in pipelines.  Exit codes: 0 success, 1 evaluation-domain
failure, 2 usage or IO failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from drs.config import Settings
from drs.diffcore import Commit, DiffDocument, parse_unified_diff, structure_commit, truncate_to_budget
from drs.errors import (
    DegenerateTrainingSet,
    DrsError,
    InsufficientSamples,
    SingleClassInput,
)
from drs.evalgate import (
    Dataset,
    FixedThreshold,
    TopPercent,
    chronological_split,
    classification_metrics,
    load_dataset,
    metric_samples,
    recall_at_top_k,
    roc_auc,
    simulate_gate,
    sweep_threshold,
    undersample_majority,
)
from drs.metrics import (
    bucket_metrics,
    compute_diff_metrics,
    fit_bucket_thresholds,
    load_calibration,
    render_metric_tokens,
    save_calibration,
)
from drs.scoring import (
    BaselineModel,
    RiskScore,
    load_model,
    save_model,
    train_baseline,
)

_DOMAIN_FAILURES = (SingleClassInput, DegenerateTrainingSet, InsufficientSamples)


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    code = 1 if isinstance(exc, _DOMAIN_FAILURES) else 2
    sys.exit(code)


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        click.echo(f"report written to {out}", err=True)
    else:
        click.echo(text)


def _row_buckets(dataset: Dataset, thresholds) -> list[dict]:
    return [bucket_metrics(row.metrics, thresholds) for row in dataset.rows]


@click.group()
def main():
    """Diff risk scoring toolbox."""


@main.command("calibrate")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_calibrate(dataset: str, out: str):
    """Fit bucket thresholds on the chronological train split."""
    try:
        ds = load_dataset(dataset)
        train, _, _ = chronological_split(ds)
        thresholds = fit_bucket_thresholds(metric_samples(train))
        save_calibration(thresholds, out)
    except (DrsError, OSError, ValueError) as exc:
        _fail(exc)
    for name, cuts in thresholds.cuts.items():
        click.echo(
            f"{name}: q20={cuts.q20} q40={cuts.q40} q60={cuts.q60} q80={cuts.q80}",
            err=True,
        )
    click.echo(f"calibration written to {out}", err=True)


@main.command("train-baseline")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--calibration", type=click.Path(exists=True, dir_okay=False))
@click.option("--ratio", default=0.7, show_default=True, help="majority undersampling ratio")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_train_baseline(dataset: str, calibration: str | None, ratio: float, seed: int, out: str):
    """Train the builtin logistic baseline on the undersampled train split."""
    try:
        ds = load_dataset(dataset)
        train, _, _ = chronological_split(ds)
        sampled = undersample_majority(train, ratio, seed)
        thresholds = (
            load_calibration(calibration)
            if calibration
            else fit_bucket_thresholds(metric_samples(train))
        )
        examples = [
            (buckets, row.buggy)
            for buckets, row in zip(_row_buckets(sampled, thresholds), sampled.rows)
        ]
        model = train_baseline(examples)
        save_model(model, out)
        scores = [model.predict_proba(b) for b, _ in examples]
        accuracy = classification_metrics(scores, [r.buggy for r in sampled.rows], 0.5).accuracy
    except (DrsError, OSError, ValueError) as exc:
        _fail(exc)
    click.echo(
        f"trained on {len(sampled)} rows ({len(train)} before undersampling); "
        f"train accuracy at 0.5: {accuracy:.3f}",
        err=True,
    )
    click.echo(f"model written to {out}", err=True)


@main.command("evaluate")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--calibration", type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", type=click.Choice(["builtin"]), default="builtin", show_default=True)
@click.option("--ratio", default=0.7, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def cmd_evaluate(dataset, calibration, backend, ratio, seed, out):
    """Split, undersample, train, sweep the threshold on validation, and
    evaluate on test at the frozen threshold."""
    try:
        ds = load_dataset(dataset)
        train, valid, test = chronological_split(ds)
        if not valid.rows or not test.rows:
            raise SingleClassInput("validation/test splits are empty; dataset too small")
        sampled = undersample_majority(train, ratio, seed)
        thresholds = (
            load_calibration(calibration)
            if calibration
            else fit_bucket_thresholds(metric_samples(train))
        )
        model = train_baseline(
            [
                (buckets, row.buggy)
                for buckets, row in zip(_row_buckets(sampled, thresholds), sampled.rows)
            ]
        )

        valid_scores = [model.predict_proba(b) for b in _row_buckets(valid, thresholds)]
        valid_labels = [row.buggy for row in valid.rows]
        tau, valid_f1 = sweep_threshold(valid_scores, valid_labels)

        test_scores = [model.predict_proba(b) for b in _row_buckets(test, thresholds)]
        test_labels = [row.buggy for row in test.rows]
        report = classification_metrics(test_scores, test_labels, tau)
        report.roc_auc = roc_auc(test_scores, test_labels)
        recall_topk = {
            str(k): recall_at_top_k(test_scores, test_labels, k) for k in (5, 10, 30)
        }
    except (DrsError, OSError, ValueError) as exc:
        _fail(exc)

    payload = {
        "backend": backend,
        "split_sizes": {"train": len(train), "valid": len(valid), "test": len(test)},
        "undersample": {"ratio": ratio, "seed": seed, "train_rows_used": len(sampled)},
        "validation": {"threshold": tau, "f1": valid_f1},
        "test": report.to_dict(),
        "recall_at_top_percent": recall_topk,
        "test_threshold_equals_validation": report.threshold == tau,
    }
    click.echo(
        f"tau={tau:.4f} test F1={report.f1:.3f} AUC={report.roc_auc:.3f} "
        f"recall@30%={recall_topk['30']:.3f}",
        err=True,
    )
    _emit(payload, out)


@main.command("gate-sim")
@click.option("--scores", "scores_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON file with {scores: [...], labels: [...]}")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--calibration", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--top-percent", type=float, help="gate the top k percent by score")
@click.option("--tau", type=float, help="gate every score >= tau")
@click.option("--out", type=click.Path(dir_okay=False))
def cmd_gate_sim(scores_path, dataset, calibration, model_path, top_percent, tau, out):
    """Simulate a gating policy over a scored commit window."""
    if (top_percent is None) == (tau is None):
        raise click.UsageError("provide exactly one of --top-percent / --tau")
    try:
        if top_percent is not None:
            policy = TopPercent(top_percent)
        else:
            policy = FixedThreshold(tau)
    except ValueError as exc:
        raise click.UsageError(str(exc))

    try:
        if scores_path:
            body = json.loads(Path(scores_path).read_text(encoding="utf-8"))
            scores = [float(s) for s in body["scores"]]
            labels = [bool(b) for b in body["labels"]]
        elif dataset and model_path:
            ds = load_dataset(dataset)
            thresholds = load_calibration(calibration) if calibration else None
            model = load_model(model_path)
            scores = [model.predict_proba(b) for b in _row_buckets(ds, thresholds)]
            labels = [row.buggy for row in ds.rows]
        else:
            raise click.UsageError("provide --scores or --dataset with --model")
        report = simulate_gate(scores, labels, policy)
    except click.UsageError:
        raise
    except (DrsError, OSError, ValueError, KeyError) as exc:
        _fail(exc)

    click.echo(
        f"gated {report.gated_count}/{report.total}; captured "
        f"{report.buggy_gated}/{report.buggy_total} buggy "
        f"({report.captured_fraction:.3f})",
        err=True,
    )
    _emit(report.to_dict(), out)


@main.command("score-file")
@click.option("--diff", "diff_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--message", default="", help="commit message text")
@click.option("--calibration", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--gateway-url", help="score via a running gateway instead of in-process")
@click.option("--out", type=click.Path(dir_okay=False))
def cmd_score_file(diff_path, message, calibration, model_path, threshold, gateway_url, out):
    """Score one unified diff, locally or through a gateway."""
    try:
        diff_text = Path(diff_path).read_text(encoding="utf-8")
        if gateway_url:
            response = httpx.post(
                gateway_url.rstrip("/") + "/seq-cls/predict",
                json={"diff": diff_text, "commit_message": message},
                timeout=30.0,
            )
            if response.status_code != 200:
                raise DrsError(f"gateway answered {response.status_code}: {response.text}")
            _emit(response.json(), out)
            return

        doc = parse_unified_diff(diff_text) if diff_text.strip() else DiffDocument()
        thresholds = load_calibration(calibration) if calibration else None
        buckets = bucket_metrics(compute_diff_metrics(doc), thresholds)
        commit = Commit(repo="", sha="", author_timestamp=0.0, message=message, raw_diff=diff_text)
        structured = structure_commit(commit, render_metric_tokens(buckets), doc)
        structured = truncate_to_budget(structured, Settings().max_seq_units)
        model = load_model(model_path) if model_path else BaselineModel()
        risk = RiskScore.from_probability(
            model.predict_proba(buckets), threshold, "builtin-logistic"
        )
        _emit(
            {
                "probability": risk.probability,
                "label": risk.label,
                "confidence": risk.confidence,
                "threshold": risk.threshold,
                "scorer_id": risk.scorer_id,
                "truncated": structured.truncated,
            },
            out,
        )
    except (DrsError, OSError, ValueError) as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
