"""Wall-clock cost of one authentication, split by stage."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ParameterError

STAGES = ("preprocess", "feature_extraction", "classification")


@dataclass
class LatencyReport:
    runs: int
    preprocess: float
    feature_extraction: float
    classification: float
    end_to_end: float

    @property
    def stage_sum(self) -> float:
        return self.preprocess + self.feature_extraction + self.classification

    def to_dict(self):
        d = asdict(self)
        d["stage_sum"] = self.stage_sum
        d["unit"] = "s"
        return d


def measure_latency(pipeline, recording, runs: int = 50, clock=time.perf_counter) -> LatencyReport:
    """Mean per-stage seconds over ``runs`` passes, plus a separate end-to-end timing."""
    if runs < 1:
        raise ParameterError("need at least one run")
    stage_times = np.zeros((runs, 3))
    total = np.zeros(runs)
    pipeline.authenticate(recording)  # warm caches (filter design, templates)
    for i in range(runs):
        t0 = clock()
        x = pipeline.tensors(recording)
        t1 = clock()
        f = pipeline.features(x)
        t2 = clock()
        pipeline.classify(f)
        t3 = clock()
        stage_times[i] = (t1 - t0, t2 - t1, t3 - t2)
        s0 = clock()
        pipeline.authenticate(recording)
        total[i] = clock() - s0
    means = stage_times.mean(axis=0)
    return LatencyReport(runs, *map(float, means), float(total.mean()))
