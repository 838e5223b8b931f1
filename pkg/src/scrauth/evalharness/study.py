"""Synthetic user study: data generation, k-fold evaluation and attack tables.

Every random draw comes from a seed derived from the config's global seed
and a stage tag, so a fixed config reproduces the report byte for byte.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..config import PipelineConfig
from ..earsim import (
    EarProfile, EnvironmentProfile, habitual_environment, make_population, render_mimicry_trial,
    render_trial,
)
from ..errors import ConfigurationError, ParameterError
from ..neuralnet import FeatureExtractor, accuracy, build_model, to_feature_extractor, train
from ..oneclass.enrollment import EnrollmentModel, enroll
from ..pipeline import make_preprocessor, recording_tensors
from ..signals import assemble_sensing_sequence
from .kde import gaussian_kde
from .metrics import confusion, roc, summarize

log = logging.getLogger(__name__)

REPORT_VERSION = 1
METRICS = ("bac", "eer", "auc", "tar", "trr", "far", "frr")


def trial_seed(stage_seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([stage_seed, *keys]).generate_state(1)[0])


@dataclass
class SyntheticWorld:
    """Enrolled subjects, unseen attackers and everyone's habitual placement."""

    config: PipelineConfig
    subjects: list
    attackers: list
    environments: dict

    @classmethod
    def build(cls, cfg: PipelineConfig) -> "SyntheticWorld":
        sim = cfg.sim
        people = make_population(sim.n_subjects + sim.n_attackers, cfg.stage_seed("population"),
                                 sim.population)
        subjects = people[:sim.n_subjects]
        attackers = [EarProfile(f"a{i:03d}", p.taps, p.absorption)
                     for i, p in enumerate(people[sim.n_subjects:])]
        habit_seed = cfg.stage_seed("habits")
        envs = {}
        for i, p in enumerate([*subjects, *attackers]):
            envs[p.subject_id] = habitual_environment(sim.environment, trial_seed(habit_seed, i),
                                                      sim.habit_shift, sim.habit_coupling_spread)
        return cls(cfg, subjects, attackers, envs)

    @property
    def user_ids(self):
        return [s.subject_id for s in self.subjects]


class TensorFactory:
    """Renders trials and turns them into CNN input tensors."""

    def __init__(self, world: SyntheticWorld):
        cfg = world.config
        self.world = world
        self.per_channel = cfg.preprocess.per_channel_norm
        self.tx = assemble_sensing_sequence(cfg.signal.layout())
        self.pre = make_preprocessor(cfg)
        self.jitter = cfg.sim.jitter

    def _tensors(self, rec):
        return recording_tensors(self.pre, rec.waveform, self.per_channel)

    def genuine(self, ear: EarProfile, n_trials: int, stage_seed: int, index: int) -> np.ndarray:
        env = self.world.environments[ear.subject_id]
        out = [self._tensors(render_trial(self.tx, ear, env, self.jitter, trial_seed(stage_seed, index, t)))
               for t in range(n_trials)]
        return np.stack(out)

    def zero_effort(self, attacker: EarProfile, n_trials: int, stage_seed: int, index: int) -> np.ndarray:
        env = self.world.environments[attacker.subject_id]
        out = [self._tensors(render_trial(self.tx, attacker, env, self.jitter,
                                          trial_seed(stage_seed, 0, index, t), trial_kind="zero_effort"))
               for t in range(n_trials)]
        return np.stack(out)

    def mimicry(self, attacker: EarProfile, victim_env: EnvironmentProfile, n_trials: int,
                stage_seed: int, index: int, victim: int) -> np.ndarray:
        out = [self._tensors(render_mimicry_trial(self.tx, victim_env, attacker,
                                                  trial_seed(stage_seed, 1, index, victim, t), self.jitter))
               for t in range(n_trials)]
        return np.stack(out)


def _flat(x):
    """(trials, segments, ...) -> (trials * segments, ...)."""
    return x.reshape(-1, *x.shape[2:])


def train_extractor(cfg: PipelineConfig, factory: TensorFactory):
    """Train the multi-class base model on trials disjoint from the study trials."""
    stage = cfg.stage_seed("extractor_trials")
    xs, ys = [], []
    for label, ear in enumerate(factory.world.subjects):
        t = _flat(factory.genuine(ear, cfg.sim.extractor_trials, stage, label))
        xs.append(t)
        ys.append(np.full(len(t), label))
    x, y = np.concatenate(xs), np.concatenate(ys)
    model = build_model(len(factory.world.subjects), seed=cfg.stage_seed("model_init"))
    model.class_labels = factory.world.user_ids
    model, history = train(model, x, y, replace(cfg.training, seed=cfg.stage_seed("training")))
    info = {"n_samples": int(len(y)), "loss_history": [float(h) for h in history],
            "train_accuracy": accuracy(model, x, y)}
    return model, info


# -- cross-validation ----------------------------------------------------------

def _as_trials(x):
    x = np.asarray(x, dtype=np.float64)
    return x[:, None, :] if x.ndim == 2 else x


def fold_assignment(n_trials: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index of every trial: a random permutation cut into k near-equal parts."""
    folds = np.empty(n_trials, dtype=np.int64)
    for f, idx in enumerate(np.array_split(rng.permutation(n_trials), k)):
        folds[idx] = f
    return folds



def cross_validate(user_data: dict, k: int = 5, classifier: str = "ocsvm", hyperparams=None,
                   seed: int = 0) -> dict:
    """k-fold protocol per user; impostors are every other user's same-fold samples.

    ``user_data`` maps a user id to features of shape ``(trials, dim)`` or
    ``(trials, segments, dim)``. Folds split trials, so all segments of one
    trial land in the same fold. Each user's metric is its mean over folds.
    """
    if k < 2:
        raise ParameterError("cross-validation needs k >= 2")
    users = list(user_data)
    if len(users) < 2:
        raise ParameterError("cross-validation needs at least 2 users")
    data = {u: _as_trials(user_data[u]) for u in users}
    for u, x in data.items():
        if len(x) < k:
            raise ParameterError(f"user {u} has {len(x)} trials; needs at least k = {k}")
    rng = np.random.default_rng(seed)
    folds = {u: fold_assignment(len(data[u]), k, rng) for u in users}

    per_user = []
    pooled_g, pooled_i = [], []
    for u in users:
        rows = []
        for f in range(k):
            train_x = _flat(data[u][folds[u] != f])
            test_g = _flat(data[u][folds[u] == f])
            test_i = np.concatenate([_flat(data[v][folds[v] == f]) for v in users if v != u])
            model = enroll(train_x, classifier, hyperparams, user=u)
            sg, si = model.scores(test_g), model.scores(test_i)
            pooled_g.append(sg - model.threshold)
            pooled_i.append(si - model.threshold)
            c = confusion(sg, si, model.threshold)
            r = roc(sg, si)
            rows.append({"bac": c.bac, "tar": c.tar, "trr": c.trr, "far": c.far, "frr": c.frr,
                         "eer": r.eer, "auc": r.auc})
        per_user.append({"user": u, **{m: float(np.mean([r[m] for r in rows])) for m in METRICS}})
    summary = {m: summarize([row[m] for row in per_user]) for m in METRICS}
    return {"k": k, "per_user": per_user, "summary": summary,
            "pooled_scores": (np.concatenate(pooled_g), np.concatenate(pooled_i))}


# -- attacks ---------------------------------------------------------------------

def attack_row(kind: str, scores, thresholds, kde_grid: int = 512) -> dict:
    """Bypassed count, FAR and mean decision score of one attack kind."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.broadcast_to(np.asarray(thresholds, dtype=np.float64), s.shape)
    margin = s - t
    bypassed = int(np.count_nonzero(margin >= 0))
    kde = gaussian_kde(margin, kde_grid) if s.size else None
    return {"attack": kind, "attempts": int(s.size), "bypassed": bypassed,
            "far": bypassed / s.size if s.size else 0.0,
            "mean_score": float(margin.mean()) if s.size else 0.0,
            "kde": kde.to_dict() if kde is not None else None}


def attack_eval(victim_models: dict, attack_trials: dict, kde_grid: int = 512) -> list:
    """Score tagged attack features against the victims' enrollment models.

    ``attack_trials`` maps ``"zero_effort"`` or ``"mimicry"`` to a list of
    ``(victim id, features)`` pairs. Scores are reported relative to each
    model's threshold, so negative means rejected.
    """
    rows = []
    for kind in ("zero_effort", "mimicry"):
        pairs = attack_trials.get(kind, [])
        scores, thresholds = [], []
        for victim, feats in pairs:
            m = victim_models[victim]
            s = m.scores(_flat(_as_trials(feats)))
            scores.append(s)
            thresholds.append(np.full(s.size, m.threshold))
        if pairs:
            rows.append(attack_row(kind, np.concatenate(scores), np.concatenate(thresholds), kde_grid))
    return rows


def _attack_features(cfg: PipelineConfig, factory: TensorFactory, extractor: FeatureExtractor):
    world = factory.world
    stage = cfg.stage_seed("attack_trials")
    victims_rng = np.random.default_rng(cfg.stage_seed("mimicry_victims"))
    users = world.user_ids
    zero, mimic = [], []
    for a, attacker in enumerate(world.attackers):
        own = extractor(_flat(factory.zero_effort(attacker, cfg.sim.attack_trials, stage, a)))
        zero.extend((u, own) for u in users)
        for v in sorted(victims_rng.choice(len(users), min(cfg.sim.mimicry_victims, len(users)), replace=False).tolist()):
            t = factory.mimicry(attacker, world.environments[users[v]], cfg.sim.attack_trials, stage, a, v)
            mimic.append((users[v], extractor(_flat(t))))
    return {"zero_effort": zero, "mimicry": mimic}


# -- the full study ------------------------------------------------------------------

@dataclass
class StudyResult:
    report: dict
    extractor: FeatureExtractor | None = None
    victim_models: dict = field(default_factory=dict)
    pooled_scores: tuple | None = None


def run_study(cfg: PipelineConfig, attacks: bool = True, extractor: FeatureExtractor | None = None) -> StudyResult:
    """Generate the synthetic study, run k-fold CV and (optionally) the attack tables."""
    cfg = cfg.with_seed().validate()
    if cfg.signal.n_frames < 2:
        raise ConfigurationError("a study needs a reference frame plus at least one sensing frame")
    world = SyntheticWorld.build(cfg)
    factory = TensorFactory(world)
    extractor_info = None
    if extractor is None:
        log.info("training feature extractor on %d subjects", len(world.subjects))
        model, extractor_info = train_extractor(cfg, factory)
        extractor = to_feature_extractor(model)

    stage = cfg.stage_seed("study_trials")
    log.info("rendering %d study trials per subject", cfg.sim.trials_per_subject)
    user_data = {}
    for i, ear in enumerate(world.subjects):
        t = factory.genuine(ear, cfg.sim.trials_per_subject, stage, i)
        feats = extractor(_flat(t))
        user_data[ear.subject_id] = feats.reshape(t.shape[0], t.shape[1], -1)

    cv = cross_validate(user_data, cfg.evaluation.folds, cfg.classifier.kind,
                        cfg.classifier.resolved(), cfg.stage_seed("folds"))
    pooled = cv.pop("pooled_scores")
    report = {"version": REPORT_VERSION, "seed": cfg.seed, "config": cfg.to_dict(),
              "users": world.user_ids, "attackers": [a.subject_id for a in world.attackers],
              "extractor": extractor_info, "cross_validation": cv, "attacks": []}

    victims = {}
    if attacks and world.attackers:
        log.info("scoring %d attackers", len(world.attackers))
        victims = {u: enroll(_flat(x), cfg.classifier.kind, cfg.classifier.resolved(), user=u)
                   for u, x in user_data.items()}
        report["attacks"] = attack_eval(victims, _attack_features(cfg, factory, extractor),
                                        cfg.evaluation.kde_grid)
    return StudyResult(report, extractor, victims, pooled)


# -- report files ----------------------------------------------------------------------

def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_report(result: StudyResult, out_dir, plots: bool = False) -> list:
    """``report.json`` plus CSV tables (and SVG plots when asked and matplotlib is present)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep = result.report
    written = [out / "report.json"]
    written[0].write_text(report_json(rep))
    cv = rep["cross_validation"]
    _write_csv(out / "per_user.csv", ["user", *METRICS],
               [[r["user"], *(f"{r[m]:.6f}" for m in METRICS)] for r in cv["per_user"]])
    _write_csv(out / "summary.csv", ["metric", "mean", "std"],
               [[m, f"{cv['summary'][m]['mean']:.6f}", f"{cv['summary'][m]['std']:.6f}"] for m in METRICS])
    written += [out / "per_user.csv", out / "summary.csv"]
    if rep["attacks"]:
        _write_csv(out / "attacks.csv", ["attack", "attempts", "bypassed", "far", "mean_score"],
                   [[r["attack"], r["attempts"], r["bypassed"], f"{r['far']:.6f}", f"{r['mean_score']:.6f}"]
                    for r in rep["attacks"]])
        written.append(out / "attacks.csv")
    if plots:
        written += _plots(result, out)
    return written


def _plots(result: StudyResult, out: Path) -> list:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping plots")
        return []
    files = []
    if result.pooled_scores is not None:
        r = roc(*result.pooled_scores)
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.plot(r.far, r.tar)
        ax.plot([0, 1], [0, 1], "k:", lw=0.8)
        ax.set_xlabel("FAR")
        ax.set_ylabel("TAR")
        ax.set_title(f"AUC {r.auc:.3f}, EER {r.eer:.3f}")
        fig.savefig(out / "roc.svg", metadata={"Date": None})
        plt.close(fig)
        files.append(out / "roc.svg")
    if result.report["attacks"]:
        fig, ax = plt.subplots(figsize=(5, 3))
        for row in result.report["attacks"]:
            if row["kde"]:
                ax.plot(row["kde"]["grid"], row["kde"]["density"], label=row["attack"])
        ax.axvline(0, color="k", lw=0.8)
        ax.set_xlabel("decision score")
        ax.legend()
        fig.savefig(out / "attack_kde.svg", metadata={"Date": None})
        plt.close(fig)
        files.append(out / "attack_kde.svg")
    return files
