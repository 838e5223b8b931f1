"""Biometric verification metrics.

Every rate follows the accept rule ``score >= threshold``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ParameterError


def _rate(num, den):
    return num / den if den else 0.0


@dataclass(frozen=True)
class ConfusionCounts:
    ta: int
    tr: int
    fa: int
    fr: int

    @property
    def tar(self):
        return _rate(self.ta, self.ta + self.fr)

    @property
    def trr(self):
        return _rate(self.tr, self.tr + self.fa)

    @property
    def far(self):
        return _rate(self.fa, self.fa + self.tr)

    @property
    def frr(self):
        return _rate(self.fr, self.fr + self.ta)

    @property
    def bac(self):
        return (self.tar + self.trr) / 2

    def as_dict(self):
        d = asdict(self)
        d.update(tar=self.tar, trr=self.trr, far=self.far, frr=self.frr, bac=self.bac)
        return d


def _scores(x, name):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ParameterError(f"{name} score list is empty")
    return x


def confusion(scores_genuine, scores_impostor, threshold: float = 0.0) -> ConfusionCounts:
    g = _scores(scores_genuine, "genuine")
    i = _scores(scores_impostor, "impostor")
    ta = int(np.count_nonzero(g >= threshold))
    fa = int(np.count_nonzero(i >= threshold))
    return ConfusionCounts(ta=ta, tr=i.size - fa, fa=fa, fr=g.size - ta)


@dataclass
class RocCurve:
    far: np.ndarray
    tar: np.ndarray
    thresholds: np.ndarray
    auc: float
    eer: float
    eer_threshold: float

    @property
    def points(self):
        return list(zip(self.far.tolist(), self.tar.tolist()))

    @property
    def frr(self):
        return 1.0 - self.tar


def roc(scores_genuine, scores_impostor) -> RocCurve:
    """Sweep every distinct score as a threshold, from strictest to loosest.

    The first point (threshold +inf) is (0, 0) and the last is (1, 1). AUC is
    the trapezoidal area; EER interpolates linearly between the two sweep
    points that bracket FAR = FRR.
    """
    g = _scores(scores_genuine, "genuine")
    i = _scores(scores_impostor, "impostor")
    thr = np.unique(np.concatenate([g, i]))[::-1]
    # counts of scores >= t for each threshold, via sorted search
    gs, is_ = np.sort(g), np.sort(i)
    tar = (g.size - np.searchsorted(gs, thr, side="left")) / g.size
    far = (i.size - np.searchsorted(is_, thr, side="left")) / i.size
    tar = np.concatenate([[0.0], tar])
    far = np.concatenate([[0.0], far])
    thresholds = np.concatenate([[np.inf], thr])
    auc = float(np.sum(np.diff(far) * (tar[1:] + tar[:-1]) / 2))
    eer, eer_t = _eer(far, 1.0 - tar, thresholds)
    return RocCurve(far, tar, thresholds, auc, eer, eer_t)


def _eer(far, frr, thresholds):
    diff = far - frr  # increasing along the sweep: -1 at +inf, +1 at the end
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0 or k == 0:
        return float(far[k]), float(thresholds[k])
    # crossing lies between k-1 (diff < 0) and k (diff > 0)
    w = -diff[k - 1] / (diff[k] - diff[k - 1])
    eer = far[k - 1] + w * (far[k] - far[k - 1])
    t_lo, t_hi = thresholds[k - 1], thresholds[k]
    t = t_hi if not np.isfinite(t_lo) else t_lo + w * (t_hi - t_lo)
    return float(eer), float(t)


def pairwise_auc(scores_genuine, scores_impostor) -> float:
    """P(genuine > impostor) + 1/2 P(tie), over all pairs."""
    g = _scores(scores_genuine, "genuine")[:, None]
    i = _scores(scores_impostor, "impostor")[None, :]
    return float(np.mean((g > i) + 0.5 * (g == i)))


def summarize(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    return {"mean": float(v.mean()), "std": float(v.std())}
