# core/metrics.py
"""
VPR evaluation: precision-recall sweep, AUC, Extended Precision, top-1 accuracy, per-frame timing
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.exceptions import EvaluationError
from core.models import EvalReport, GroundTruth, MatchDecision, PRPoint, TimingStats
from utils.logger import logger


def _check_ground_truth(gt: GroundTruth, n_refs: Optional[int]) -> List[int]:
    labelled = gt.labelled_queries()
    if not labelled:
        raise EvaluationError("Ground truth has no labelled queries")
    if n_refs is not None:
        for q in labelled:
            c = gt.entries[q]
            if not 0 <= c < n_refs:
                raise EvaluationError(f"Ground truth for query {q} is {c}, outside [0, {n_refs})")
    return labelled


def pr_curve(decisions: Sequence[MatchDecision], gt: GroundTruth, n_refs: Optional[int] = None) -> List[PRPoint]:
    """
    Sweep the distinct confidences in descending order. At threshold t every decision with
    confidence >= t is accepted; recall is over all ground-truthed queries, so a query
    that was wrongly matched or not accepted counts as a false negative.
    """
    labelled = set(_check_ground_truth(gt, n_refs))
    scored = [d for d in decisions if d.query in labelled]
    if not scored:
        raise EvaluationError("No decisions overlap the ground-truthed queries")

    total = len(labelled)
    confidence = np.array([d.confidence for d in scored], dtype=np.float64)
    correct = np.array([gt.is_correct(d.query, d.match_index) for d in scored], dtype=bool)

    order = np.argsort(-confidence, kind='stable')
    confidence = confidence[order]
    tp_cum = np.cumsum(correct[order])
    fp_cum = np.cumsum(~correct[order])

    # last position of each run of equal confidences
    ends = np.flatnonzero(np.append(confidence[1:] != confidence[:-1], True))

    points = []
    for end in ends:
        tp = int(tp_cum[end])
        fp = int(fp_cum[end])
        points.append(PRPoint(
            threshold=float(confidence[end]),
            precision=tp / (tp + fp) if tp + fp > 0 else 1.0,
            recall=tp / total,
            tp=tp,
            fp=fp,
            fn=total - tp,
        ))
    return points


def auc(pr_points: Sequence[PRPoint]) -> float:
    """Trapezoidal area over recall, anchored at (recall 0, precision of the first point)"""
    if not pr_points:
        raise EvaluationError("AUC needs at least one PR point")
    ordered = sorted(pr_points, key=lambda p: p.recall)
    recall = np.array([0.0] + [p.recall for p in ordered])
    precision = np.array([ordered[0].precision] + [p.precision for p in ordered])
    area = np.sum(np.diff(recall) * (precision[1:] + precision[:-1]) / 2.0)
    return float(min(max(area, 0.0), 1.0))


def extended_precision(pr_points: Sequence[PRPoint]) -> Tuple[float, float, float]:
    """(EP, P_R0, R_P100) with EP = (P_R0 + R_P100) / 2"""
    if not pr_points:
        raise EvaluationError("Extended precision needs at least one PR point")
    min_recall = min(p.recall for p in pr_points)
    p_r0 = max(p.precision for p in pr_points if p.recall == min_recall)
    perfect = [p.recall for p in pr_points if p.precision == 1.0]
    r_p100 = max(perfect) if perfect else 0.0
    return (p_r0 + r_p100) / 2.0, p_r0, r_p100


def top1_accuracy(decisions: Sequence[MatchDecision], gt: GroundTruth) -> float:
    """Fraction of ground-truthed queries whose match lies within the allowance"""
    labelled = _check_ground_truth(gt, None)
    matches: Dict[int, int] = {d.query: d.match_index for d in decisions}
    hits = sum(1 for q in labelled if q in matches and gt.is_correct(q, matches[q]))
    return hits / len(labelled)


def timing_stats(ms_per_frame: Sequence[float]) -> Optional[TimingStats]:
    if len(ms_per_frame) == 0:
        return None
    ms = np.asarray(ms_per_frame, dtype=np.float64)
    return TimingStats(
        frames=int(ms.size),
        mean_ms=float(ms.mean()),
        median_ms=float(np.median(ms)),
        p95_ms=float(np.percentile(ms, 95)),
        max_ms=float(ms.max()),
    )


def evaluate(decisions: Sequence[MatchDecision], gt: GroundTruth, n_refs: Optional[int] = None,
             timings_ms: Optional[Sequence[float]] = None) -> EvalReport:
    """Full report for one decision set"""
    points = pr_curve(decisions, gt, n_refs)
    ep, p_r0, r_p100 = extended_precision(points)
    report = EvalReport(
        pr_points=points,
        auc=auc(points),
        ep=ep,
        p_r0=p_r0,
        r_p100=r_p100,
        top1_accuracy=top1_accuracy(decisions, gt),
        evaluated_queries=len(gt.labelled_queries()),
        allowance=gt.allowance,
        timing=timing_stats(timings_ms) if timings_ms is not None else None,
    )
    logger.info(
        f"Evaluated {report.evaluated_queries} queries - AUC {report.auc:.4f}, EP {report.ep:.4f}, "
        f"accuracy {report.top1_accuracy:.4f}",
        "METRICS"
    )
    return report


def pr_frame(pr_points: Sequence[PRPoint]) -> pd.DataFrame:
    return pd.DataFrame(
        [(p.threshold, p.precision, p.recall) for p in pr_points],
        columns=['threshold', 'precision', 'recall'],
    )


def _summary_values(report: EvalReport) -> Dict[str, float]:
    values = {
        'auc': report.auc,
        'ep': report.ep,
        'p_r0': report.p_r0,
        'r_p100': report.r_p100,
        'accuracy': report.top1_accuracy,
        'queries': report.evaluated_queries,
        'allowance': report.allowance,
    }
    if report.timing is not None:
        values.update({
            'ms_per_frame_mean': report.timing.mean_ms,
            'ms_per_frame_median': report.timing.median_ms,
            'ms_per_frame_p95': report.timing.p95_ms,
        })
    return values


def summary_lines(report: EvalReport) -> List[str]:
    """key=value lines"""
    return [f"{key}={value!r}" for key, value in _summary_values(report).items()]


def report_row(report: EvalReport) -> pd.DataFrame:
    """Single-row frame for cross-run aggregation"""
    return pd.DataFrame([_summary_values(report)])
