"""Per-user enrollment models and their on-disk format.

File layout (little-endian)::

    b"SCRENR\\x00" + version byte
    uint32 header length, UTF-8 JSON header (sorted keys)
    float32[n_vectors * dim]   support vectors (OCSVM) or training points (LOF)

The header carries the classifier kind, hyperparameters, gamma, rho or the
LOF threshold, and OCSVM dual coefficients as JSON floats.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, ParameterError
from .lof import LofModel, lof_fit
from .ocsvm import OcsvmModel, ocsvm_fit

MAGIC = b"SCRENR\x00"
VERSION = 1
CLASSIFIERS = ("ocsvm", "lof")
DEFAULT_HYPERPARAMS = {
    "ocsvm": {"nu": 0.01, "gamma": "scale"},
    "lof": {"n_neighbors": 3, "threshold": 1.5},
}


@dataclass(frozen=True)
class AuthDecision:
    accepted: bool
    score: float


@dataclass
class EnrollmentModel:
    kind: str
    model: OcsvmModel | LofModel
    hyperparams: dict
    user: str | None = None
    extractor: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def threshold(self) -> float:
        """Score cutoff: accepted iff ``score >= threshold``."""
        return 0.0 if self.kind == "ocsvm" else -self.model.threshold

    def scores(self, features) -> np.ndarray:
        return self.model.decision(features)

    def decide(self, features, vote: bool = False):
        """Per-segment decisions, or one majority decision when ``vote``."""
        s = self.scores(features)
        if vote:
            accepted = np.count_nonzero(s >= self.threshold) * 2 > s.size
            return AuthDecision(bool(accepted), float(np.median(s)))
        return [AuthDecision(bool(v >= self.threshold), float(v)) for v in s]


def enroll(features, classifier_kind: str = "ocsvm", hyperparams=None, user=None) -> EnrollmentModel:
    x = np.asarray(features, dtype=np.float64)
    if x.size == 0 or x.ndim != 2:
        raise ParameterError("enrollment needs a nonempty 2-d feature array")
    if classifier_kind not in CLASSIFIERS:
        raise ParameterError(f"unknown classifier {classifier_kind!r}")
    hp = dict(DEFAULT_HYPERPARAMS[classifier_kind], **(hyperparams or {}))
    if len(x) < 10:
        warnings.warn(f"enrolling with only {len(x)} samples", stacklevel=2)
    if classifier_kind == "ocsvm":
        model = ocsvm_fit(x, hp["nu"], hp["gamma"])
    else:
        model = lof_fit(x, hp["n_neighbors"], hp["threshold"])
    return EnrollmentModel(classifier_kind, model, hp, user)


def to_bytes(em: EnrollmentModel) -> bytes:
    m = em.model
    header = {"kind": em.kind, "hyperparams": em.hyperparams, "user": em.user,
              "extractor": em.extractor, "meta": em.meta}
    if em.kind == "ocsvm":
        vectors = m.support_vectors
        header.update(gamma=m.gamma, rho=m.rho, nu=m.nu, n_train=m.n_train,
                      dual_coefficients=[float(a) for a in m.dual_coefficients])
    else:
        vectors = m.training_points
        header.update(n_neighbors=m.n_neighbors, threshold=m.threshold)
    header["shape"] = list(vectors.shape)
    head = json.dumps(header, sort_keys=True).encode()
    return (MAGIC + bytes([VERSION]) + struct.pack("<I", len(head)) + head
            + np.ascontiguousarray(vectors, dtype="<f4").tobytes())


def from_bytes(data: bytes) -> EnrollmentModel:
    if data[:7] != MAGIC or data[7] != VERSION:
        raise ConfigurationError("not an enrollment model file")
    (n,) = struct.unpack("<I", data[8:12])
    h = json.loads(data[12:12 + n])
    vectors = np.frombuffer(data[12 + n:], dtype="<f4").astype(np.float64).reshape(h["shape"])
    if h["kind"] == "ocsvm":
        model = OcsvmModel(vectors, np.array(h["dual_coefficients"]), h["rho"], h["gamma"],
                           h["nu"], h["n_train"])
    else:
        model = lof_fit(vectors, h["n_neighbors"], h["threshold"])
    return EnrollmentModel(h["kind"], model, h["hyperparams"], h["user"], h["extractor"], h["meta"])


def save(em: EnrollmentModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(em))
    return path


def load(path) -> EnrollmentModel:
    return from_bytes(Path(path).read_bytes())
