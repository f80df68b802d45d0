"""Baseline comparison and reporting.

Four clustering policies are scored on the same test channels:

    HC    rate of the dendrogram level picked by hierarchical clustering
    NN    rate of the partition the classifier predicts from the estimate
    UNI   one universal cluster
    SING  one singleton cluster per user (zero when infeasible)

Summaries use boxplot statistics (median, quartiles, 1st/99th percentiles by
linear interpolation, points outside the 1-99 band as outliers). Reports are
JSON-lines raw records, a CSV summary row per scenario, and an SVG boxplot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DatasetSplit, Sample
from .errors import ConfigurationError
from .hrs import evaluate_partition
from .channel import ChannelSet
from .mlp import MlpModel, evaluate_topk, predict_labels
from .partitions import Partition

METHODS = ("HC", "NN", "UNI", "SING")

CSV_COLUMNS = ("scenario", "val_top1", "test_top1", "test_top3", "test_top5", "relative_rate")


@dataclass(frozen=True)
class BoxplotSummary:
    p1: float
    p25: float
    median: float
    p75: float
    p99: float
    outliers: tuple[float, ...]


@dataclass
class MethodResult:
    method: str
    rates: list[float]
    summary: BoxplotSummary


@dataclass(frozen=True)
class RelativeRateMetric:
    """Mean NN-predicted rate over mean HC rate on the test set."""

    ratio: float
    exceeded_hc: bool  # prediction off the dendrogram can beat HC; flag, not error


def boxplot_stats(values) -> BoxplotSummary:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ConfigurationError("cannot summarize an empty value list")
    p1, p25, med, p75, p99 = np.percentile(arr, [1, 25, 50, 75, 99])
    outliers = tuple(float(v) for v in arr[(arr < p1) | (arr > p99)])
    return BoxplotSummary(float(p1), float(p25), float(med), float(p75), float(p99), outliers)


def _sample_channelset(sample: Sample, dataset: DatasetSplit) -> ChannelSet:
    # Rate evaluation only touches the stored matrices; innovations and
    # covariances are not needed downstream of generation.
    return ChannelSet(
        sample.H_true,
        sample.H_hat,
        sample.cov_assignment,
        dataset.config.tau,
        np.zeros_like(sample.H_true),
        (),
    )


def run_baselines(dataset: DatasetSplit, model: MlpModel, samples=None) -> list[MethodResult]:
    """Score the four policies per test sample."""
    if samples is None:
        samples = dataset.test
    if not samples:
        empty = BoxplotSummary(0.0, 0.0, 0.0, 0.0, 0.0, ())
        return [MethodResult(m, [], empty) for m in METHODS]
    cfg = dataset.config.hrs_config()
    n = dataset.config.users
    predicted = predict_labels(model, samples)
    rates = {m: [] for m in METHODS}
    for s, pred in zip(samples, predicted):
        channels = _sample_channelset(s, dataset)
        rates["HC"].append(s.label_rate)
        rates["NN"].append(evaluate_partition(channels, Partition.from_key(pred), cfg).R_total)
        rates["UNI"].append(evaluate_partition(channels, Partition.universal(n), cfg).R_total)
        rates["SING"].append(evaluate_partition(channels, Partition.singletons(n), cfg).R_total)
    return [MethodResult(m, rates[m], boxplot_stats(rates[m])) for m in METHODS]


def relative_rate(results: list[MethodResult]) -> RelativeRateMetric:
    by_method = {r.method: r for r in results}
    hc = np.mean(by_method["HC"].rates) if by_method["HC"].rates else float("nan")
    nn = np.mean(by_method["NN"].rates) if by_method["NN"].rates else float("nan")
    ratio = float(nn / hc) if hc else float("nan")
    return RelativeRateMetric(ratio, bool(ratio > 1.0 + 1e-9))


def accuracy_metrics(dataset: DatasetSplit, model: MlpModel) -> dict:
    """Validation top-1 plus test top-1/3/5 accuracies."""
    ks = tuple(k for k in (1, 3, 5) if k <= model.num_classes)
    val = evaluate_topk(model, dataset.validation, (1,)) if dataset.validation else {1: float("nan")}
    test = evaluate_topk(model, dataset.test, ks) if dataset.test else {k: float("nan") for k in ks}
    return {
        "val_top1": val[1],
        "test_top1": test.get(1, float("nan")),
        "test_top3": test.get(3, test.get(1, float("nan"))),
        "test_top5": test.get(5, test.get(3, test.get(1, float("nan")))),
    }


def write_records_jsonl(results: list[MethodResult], scenario: str, path) -> None:
    """One record per (sample, method)."""
    with open(path, "w") as fh:
        for res in results:
            for i, rate in enumerate(res.rates):
                fh.write(
                    json.dumps(
                        {"scenario": scenario, "method": res.method, "sample": i, "rate": rate}
                    )
                    + "\n"
                )


def write_summary_csv(rows: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(str(row.get(c, "")) for c in CSV_COLUMNS) + "\n")


def write_boxplot_svg(results: list[MethodResult], scenario: str, path) -> None:
    """Minimal standalone SVG: one box group per method, fixed order."""
    width, height = 480, 320
    margin, plot_h = 50, 230
    finite = [v for r in results for v in (r.summary.p1, r.summary.p99, *r.summary.outliers)]
    lo = min(finite, default=0.0)
    hi = max(finite, default=1.0)
    if hi <= lo:
        hi = lo + 1.0

    def y(v: float) -> float:
        return margin + plot_h * (1.0 - (v - lo) / (hi - lo))

    slot = (width - 2 * margin) / max(len(results), 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="13">{scenario}</text>',
        f'<line x1="{margin}" y1="{margin + plot_h}" x2="{width - margin}" y2="{margin + plot_h}" stroke="black"/>',
    ]
    for i, res in enumerate(results):
        cx = margin + slot * (i + 0.5)
        s = res.summary
        half = slot * 0.22
        parts.append(f'<g id="box-{res.method}">')
        parts.append(
            f'<line x1="{cx}" y1="{y(s.p99)}" x2="{cx}" y2="{y(s.p75)}" stroke="black" stroke-dasharray="4 3"/>'
        )
        parts.append(
            f'<line x1="{cx}" y1="{y(s.p25)}" x2="{cx}" y2="{y(s.p1)}" stroke="black" stroke-dasharray="4 3"/>'
        )
        parts.append(
            f'<rect x="{cx - half}" y="{y(s.p75)}" width="{2 * half}" height="{max(y(s.p25) - y(s.p75), 0.5)}" fill="none" stroke="blue"/>'
        )
        parts.append(
            f'<line x1="{cx - half}" y1="{y(s.median)}" x2="{cx + half}" y2="{y(s.median)}" stroke="red"/>'
        )
        for v in s.outliers:
            parts.append(
                f'<path d="M {cx - 3} {y(v)} h 6 M {cx} {y(v) - 3} v 6" stroke="red" fill="none"/>'
            )
        parts.append(
            f'<text x="{cx}" y="{margin + plot_h + 18}" text-anchor="middle" font-size="12">{res.method}</text>'
        )
        parts.append("</g>")
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def report(
    results: list[MethodResult],
    metrics: dict,
    scenario: str,
    out_dir,
) -> dict[str, Path]:
    """Emit the JSONL, CSV, and SVG artifacts for one scenario."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "jsonl": out / f"{scenario}_rates.jsonl",
        "csv": out / f"{scenario}_summary.csv",
        "svg": out / f"{scenario}_boxplot.svg",
    }
    write_records_jsonl(results, scenario, paths["jsonl"])
    rel = relative_rate(results) if any(r.rates for r in results) else RelativeRateMetric(float("nan"), False)
    row = {"scenario": scenario, "relative_rate": rel.ratio, **metrics}
    write_summary_csv([row], paths["csv"])
    write_boxplot_svg(results, scenario, paths["svg"])
    return paths
