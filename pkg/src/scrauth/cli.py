"""Command-line entry point: ``scrauth <subcommand> ...``.

Exit status: 0 success (or ACCEPT), 1 pipeline failure, 2 usage error,
3 authentication rejected.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fileio
from .config import PipelineConfig
from .errors import ScrAuthError
from .evalharness.latency import measure_latency
from .evalharness.study import (
    SyntheticWorld, TensorFactory, run_study, train_extractor, trial_seed, write_report,
)
from .neuralnet import build_model, checkpoint, to_feature_extractor, train
from .oneclass import enrollment
from .pipeline import Pipeline, make_preprocessor, recording_tensors
from .signals import assemble_sensing_sequence
from .earsim import render_mimicry_trial, render_trial

log = logging.getLogger("scrauth")

EXIT_FAILURE = 1
EXIT_REJECT = 3


# -- config helpers ---------------------------------------------------------------

def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "frames", None) is not None:
        cfg = replace(cfg, signal=replace(cfg.signal, n_frames=args.frames))
    if getattr(args, "subjects", None) is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, n_subjects=args.subjects))
    if getattr(args, "classifier", None) is not None:
        cfg = replace(cfg, classifier=replace(cfg.classifier, kind=args.classifier))
    if getattr(args, "phase_wrap", None) is not None:
        cfg = replace(cfg, preprocess=replace(cfg.preprocess, phase_wrap=args.phase_wrap))
    return cfg.validate().with_seed()


def _blocks(path):
    files = fileio.list_blocks(path)
    if not files:
        raise ScrAuthError(f"no .f32 artifacts under {path}")
    return files


def _out(args) -> Path:
    return Path(args.out)


# -- subcommands ------------------------------------------------------------------

def cmd_gen_signal(args):
    cfg = load_config(args)
    layout = cfg.signal.layout()
    path = fileio.write_waveform(_out(args), assemble_sensing_sequence(layout), "tx",
                                 n_frames=layout.n_frames)
    print(f"wrote {path} ({layout.total_len} samples)")


def cmd_simulate(args):
    cfg = load_config(args)
    world = SyntheticWorld.build(cfg)
    tx = assemble_sensing_sequence(cfg.signal.layout())
    jitter = cfg.sim.jitter
    n_trials = args.trials if args.trials is not None else cfg.sim.trials_per_subject
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    if args.kind == "genuine":
        stage = cfg.stage_seed("study_trials")
        for i, ear in enumerate(world.subjects):
            env = world.environments[ear.subject_id]
            jobs += [(f"{ear.subject_id}_t{t:04d}", ear.subject_id,
                      lambda s, e=ear, v=env: render_trial(tx, e, v, jitter, s),
                      trial_seed(stage, i, t)) for t in range(n_trials)]
    else:
        stage = cfg.stage_seed("attack_trials")
        users = world.user_ids
        victims_rng = np.random.default_rng(cfg.stage_seed("mimicry_victims"))
        for a, att in enumerate(world.attackers):
            if args.kind == "zero_effort":
                env = world.environments[att.subject_id]
                jobs += [(f"{att.subject_id}_t{t:04d}", att.subject_id,
                          lambda s, e=att, v=env: render_trial(tx, e, v, jitter, s, trial_kind="zero_effort"),
                          trial_seed(stage, 0, a, t)) for t in range(n_trials)]
            else:
                picks = victims_rng.choice(len(users), min(cfg.sim.mimicry_victims, len(users)),
                                             replace=False).tolist()
                for v in sorted(picks):
                    env = world.environments[users[v]]
                    jobs += [(f"{att.subject_id}_as_{users[v]}_t{t:04d}", users[v],
                              lambda s, e=att, ev=env: render_mimicry_trial(tx, ev, e, s, jitter),
                              trial_seed(stage, 1, a, v, t)) for t in range(n_trials)]
    for name, target, render, seed in jobs:
        rec = render(seed)
        meta = rec.metadata()
        meta.update(seed=seed, target=target)
        fileio.write_waveform(out / name, rec.waveform, "rx", **meta)
    fileio.dump_json({"config": cfg.to_dict(),
                      "subjects": [e.to_dict() for e in world.subjects],
                      "attackers": [e.to_dict() for e in world.attackers],
                      "environments": {k: v.to_dict() for k, v in world.environments.items()}},
                     out / "world.json")
    print(f"wrote {len(jobs)} {args.kind} trials to {out} (seed {cfg.seed})")


def cmd_preprocess(args):
    cfg = load_config(args)
    out = _out(args)
    n = 0
    for f in _blocks(args.input):
        wf, meta = fileio.read_waveform(f)
        c = cfg
        if "n_frames" in meta:
            c = replace(cfg, signal=replace(cfg.signal, n_frames=meta["n_frames"]))
        tensors = recording_tensors(make_preprocessor(c), wf, c.preprocess.per_channel_norm)
        keep = {k: meta[k] for k in ("truth", "trial_kind", "target", "seed") if k in meta}
        fileio.write_array(out / f.stem, tensors, role="tensor", source=f.name,
                           phase_wrap=c.preprocess.phase_wrap, **keep)
        n += 1
    print(f"wrote {n} tensor blocks to {out}")


def _load_extractor(path):
    model = checkpoint.load(path)
    return to_feature_extractor(model)


def cmd_featurize(args):
    ext = _load_extractor(args.extractor)
    out = _out(args)
    n = 0
    for f in _blocks(args.input):
        x, meta = fileio.read_array(f)
        if meta.get("role") != "tensor":
            raise ScrAuthError(f"{f} is not a tensor block (run preprocess first)")
        meta = {k: v for k, v in meta.items() if k not in ("shape", "role")}
        meta.update(role="features", extractor=str(Path(args.extractor).resolve()))
        fileio.write_array(out / f.stem, ext(x.astype(np.float32)), **meta)
        n += 1
    print(f"wrote {n} feature blocks to {out}")


def cmd_train_extractor(args):
    cfg = load_config(args)
    if args.input:
        xs, labels = [], []
        for f in _blocks(args.input):
            x, meta = fileio.read_array(f)
            xs.append(x)
            labels += [meta.get("truth")] * len(x)
        if None in labels or len(set(labels)) < 2:
            raise ScrAuthError("training tensors need at least 2 distinct 'truth' labels")
        classes = sorted(set(labels))
        y = np.array([classes.index(t) for t in labels])
        x = np.concatenate(xs).astype(np.float32)
        model = build_model(len(classes), seed=cfg.stage_seed("model_init"))
        model.class_labels = classes
        model, hist = train(model, x, y, replace(cfg.training, seed=cfg.stage_seed("training")))
        info = {"n_samples": len(y), "loss_history": hist}
    else:
        world = SyntheticWorld.build(cfg)
        model, info = train_extractor(cfg, TensorFactory(world))
    path = checkpoint.save(model, _out(args))
    print(f"wrote {path} ({model.n_params} parameters, final loss {info['loss_history'][-1]:.4f})")


def cmd_enroll(args):
    feats, extractor = [], None
    for f in _blocks(args.input):
        x, meta = fileio.read_array(f)
        if meta.get("role") != "features":
            raise ScrAuthError(f"{f} is not a feature block (run featurize first)")
        if args.user and meta.get("truth", args.user) != args.user:
            continue
        feats.append(x.reshape(-1, x.shape[-1]))
        extractor = meta.get("extractor", extractor)
    if not feats:
        raise ScrAuthError(f"no feature blocks for user {args.user!r} under {args.input}")
    hp = {}
    for item in args.param or []:
        key, _, value = item.partition("=")
        try:
            hp[key] = float(value) if key != "n_neighbors" else int(value)
        except ValueError:
            hp[key] = value
    em = enrollment.enroll(np.concatenate(feats), args.classifier or "ocsvm", hp, user=args.user)
    em.extractor = extractor
    path = enrollment.save(em, _out(args))
    print(f"wrote {path} ({em.kind}, {sum(len(f) for f in feats)} samples)")


def cmd_verify(args):
    em = enrollment.load(args.model)
    path = Path(args.input)
    meta = fileio.load_json(fileio.sidecar_path(path))
    role = meta.get("role")
    if role == "features":
        feats, _ = fileio.read_array(path)
    else:
        ext_path = args.extractor or em.extractor
        if not ext_path:
            raise ScrAuthError("no feature extractor: pass --extractor or enroll from featurized data")
        ext = _load_extractor(ext_path)
        if role == "tensor":
            tensors, _ = fileio.read_array(path)
        elif role == "rx":
            cfg = load_config(args)
            if "n_frames" in meta:
                cfg = replace(cfg, signal=replace(cfg.signal, n_frames=meta["n_frames"]))
            wf, _ = fileio.read_waveform(path)
            tensors = Pipeline.from_config(cfg).tensors(wf)
        else:
            raise ScrAuthError(f"cannot verify a {role!r} artifact")
        feats = ext(tensors.astype(np.float32))
    decision = em.decide(feats.reshape(-1, feats.shape[-1]), vote=True)
    if decision.accepted:
        print(f"ACCEPT score={decision.score:.6f}")
        return 0
    print(f"REJECT score={decision.score:.6f}")
    return EXIT_REJECT


def _study(args, attacks: bool):
    cfg = load_config(args)
    ext = _load_extractor(args.extractor) if args.extractor else None
    result = run_study(cfg, attacks=attacks, extractor=ext)
    out = _out(args)
    write_report(result, out, plots=args.plots)
    cfg.save(out / "config.json")
    if args.save_extractor:
        checkpoint.save(result.extractor.model, args.save_extractor)
    s = result.report["cross_validation"]["summary"]
    print(f"seed {cfg.seed}: BAC {s['bac']['mean']:.4f} +- {s['bac']['std']:.4f}, "
          f"EER {s['eer']['mean']:.4f} +- {s['eer']['std']:.4f}")
    for row in result.report["attacks"]:
        print(f"{row['attack']}: FAR {row['far']:.4f} ({row['bypassed']}/{row['attempts']}), "
              f"mean score {row['mean_score']:.4f}")
    print(f"report written to {out}")


def cmd_study(args):
    _study(args, attacks=False)


def cmd_attack_study(args):
    _study(args, attacks=True)


def cmd_latency(args):
    cfg = load_config(args)
    world = SyntheticWorld.build(cfg)
    factory = TensorFactory(world)
    if args.extractor:
        ext = _load_extractor(args.extractor)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ext = to_feature_extractor(build_model(cfg.sim.n_subjects, seed=cfg.stage_seed("model_init")))
    ear = world.subjects[0]
    stage = cfg.stage_seed("study_trials")
    enroll_x = ext(factory.genuine(ear, 20, stage, 0).reshape(-1, 65, 158, 2))
    em = enrollment.enroll(enroll_x, cfg.classifier.kind, cfg.classifier.resolved(), user=ear.subject_id)
    rec = render_trial(factory.tx, ear, world.environments[ear.subject_id], cfg.sim.jitter,
                       trial_seed(stage, 0, 10_000))
    pipe = Pipeline(make_preprocessor(cfg), ext, em, cfg.preprocess.per_channel_norm)
    rep = measure_latency(pipe, rec.waveform, args.runs)
    d = rep.to_dict()
    d.update(extractor=str(args.extractor) if args.extractor else "untrained", seed=cfg.seed)
    fileio.dump_json({"latency": d}, _out(args))
    print(f"preprocess {rep.preprocess * 1e3:.1f} ms, feature extraction {rep.feature_extraction * 1e3:.1f} ms, "
          f"classification {rep.classification * 1e3:.2f} ms, total {rep.stage_sum * 1e3:.1f} ms "
          f"(end to end {rep.end_to_end * 1e3:.1f} ms) over {rep.runs} runs")


# -- parser ---------------------------------------------------------------------------

def _common(p, *flags):
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--seed", type=int, help="global seed (random and recorded if omitted)")
    if "frames" in flags:
        p.add_argument("--frames", type=int, help="sensing frames per recording")
    if "subjects" in flags:
        p.add_argument("--subjects", type=int, help="number of enrolled synthetic subjects")
    if "classifier" in flags:
        p.add_argument("--classifier", choices=["ocsvm", "lof"])
    if "phase_wrap" in flags:
        p.add_argument("--phase-wrap", choices=["none", "angular"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scrauth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-signal", help="write the transmitted sensing sequence")
    _common(p, "frames")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_signal)

    p = sub.add_parser("simulate", help="render synthetic recordings")
    _common(p, "frames", "subjects")
    p.add_argument("--kind", choices=["genuine", "zero_effort", "mimicry"], default="genuine")
    p.add_argument("--trials", type=int, help="trials per subject (or per attacker/victim pair)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preprocess", help="recordings -> 65x158x2 tensors")
    _common(p, "frames", "phase_wrap")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("featurize", help="tensors -> 128-d features")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--extractor", required=True, help="CNN checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train-extractor", help="train the base CNN")
    _common(p, "frames", "subjects", "phase_wrap")
    p.add_argument("--in", dest="input", help="tensor blocks with 'truth' labels (simulates if omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_extractor)

    p = sub.add_parser("enroll", help="fit a one-class model on feature blocks")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--classifier", choices=["ocsvm", "lof"])
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="classifier hyperparameter")
    p.add_argument("--user", help="label the model; also keeps only blocks whose truth matches")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", help="authenticate one recording, tensor or feature block")
    _common(p, "phase_wrap")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--extractor", help="overrides the extractor recorded at enrollment")
    p.set_defaults(func=cmd_verify)

    for name, func, text in (("study", cmd_study, "k-fold synthetic user study"),
                             ("attack-study", cmd_attack_study, "user study plus attack tables")):
        p = sub.add_parser(name, help=text)
        _common(p, "frames", "subjects", "classifier", "phase_wrap")
        p.add_argument("--out", required=True)
        p.add_argument("--extractor", help="reuse a trained CNN checkpoint")
        p.add_argument("--save-extractor", help="write the trained CNN here")
        p.add_argument("--plots", action="store_true", help="also write SVG plots (needs matplotlib)")
        p.set_defaults(func=func)

    p = sub.add_parser("latency", help="per-stage authentication latency")
    _common(p, "frames", "classifier", "phase_wrap")
    p.add_argument("--extractor")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_latency)
    return parser


def _thread_limit():
    value = os.environ.get("SCRAUTH_THREADS")
    if not value:
        return contextlib.nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise ScrAuthError(f"SCRAUTH_THREADS must be an integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(1, n))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            status = args.func(args)
    except (ScrAuthError, OSError, KeyError) as exc:
        print(f"scrauth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return status or 0


if __name__ == "__main__":
    sys.exit(main())
