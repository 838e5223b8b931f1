"""Evaluation protocol: metrics, score densities, k-fold studies, attacks and latency."""

from .kde import KdeCurve, gaussian_kde, silverman_bandwidth
from .latency import LatencyReport, measure_latency
from .metrics import ConfusionCounts, RocCurve, confusion, pairwise_auc, roc, summarize
from .study import SyntheticWorld, attack_eval, cross_validate, run_study, write_report

__all__ = ["KdeCurve", "gaussian_kde", "silverman_bandwidth", "LatencyReport", "measure_latency",
           "ConfusionCounts", "RocCurve", "confusion", "pairwise_auc", "roc", "summarize",
           "SyntheticWorld", "attack_eval", "cross_validate", "run_study", "write_report"]
