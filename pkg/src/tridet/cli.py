"""Experiment runner: every pipeline stage as a subcommand, with JSON
configs, seeded determinism, and a manifest recording enough to replay any
run exactly.

Subcommands: gen-data, train, self-train, tri-train, distill, evaluate,
ablate. Common flags: --config PATH, --seed N, --out DIR, --quiet.
Exit codes: 0 success, 1 config validation error, 2 runtime failure.
A run manifest can itself be passed as --config to replay the run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, data, ensemble, learner, metrics, semisup

MANIFEST_FORMAT = "tridet-run-v1"

STAGES = ("gen-data", "train", "self-train", "tri-train", "distill", "evaluate", "ablate")


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 1 with the field named."""


def _check_fields(cfg: dict, stage: str, required, optional):
    for key in required:
        if key not in cfg:
            raise ConfigError(f"missing required config field '{key}' for stage '{stage}'")
    allowed = set(required) | set(optional)
    for key in cfg:
        if key not in allowed:
            raise ConfigError(f"unknown config field '{key}' for stage '{stage}'")


def _as_block(value, field: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"config field '{field}' must be a JSON object")
    return dict(value)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require_file(path, field: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config field '{field}': no such file: {path}")
    return path


def _load_labeled(path, field: str) -> data.LabeledDataset:
    loaded = data.load_dataset(_require_file(path, field))
    if not isinstance(loaded, data.LabeledDataset):
        raise ConfigError(f"config field '{field}': {path} has no label columns")
    return loaded


def _load_pool(path, field: str) -> data.UnlabeledPool:
    loaded = data.load_dataset(_require_file(path, field))
    if not isinstance(loaded, data.UnlabeledPool):
        raise ConfigError(f"config field '{field}': {path} has label columns; "
                          "pools must be unlabeled")
    return loaded


def _model_config(block, input_dim, num_classes, default_seed) -> learner.ModelConfig:
    block = _as_block(block, "model")
    _check_fields(block, "model", [], ["hidden_layers", "seed"])
    return learner.ModelConfig(
        input_dim=input_dim,
        hidden_layers=tuple(block.get("hidden_layers", (16,))),
        num_classes=num_classes,
        seed=int(block.get("seed", default_seed)))


def _train_params(block, default_seed, dev=None) -> learner.TrainParams:
    block = _as_block(block, "train")
    _check_fields(block, "train", [], ["learning_rate", "batch_size", "epochs",
                                       "seed", "early_stop_patience"])
    patience = block.get("early_stop_patience")
    if patience is not None and dev is None:
        raise ConfigError("config field 'early_stop_patience' requires 'dev_data'")
    early = learner.EarlyStop(dev, int(patience)) if patience is not None else None
    return learner.TrainParams(
        learning_rate=float(block.get("learning_rate", 1e-3)),
        batch_size=int(block.get("batch_size", 64)),
        epochs=int(block.get("epochs", 50)),
        seed=int(block.get("seed", default_seed)),
        early_stop=early)


def _echo_model(mc: learner.ModelConfig) -> dict:
    return {"hidden_layers": list(mc.hidden_layers), "seed": mc.seed}


def _echo_train(tp: learner.TrainParams, block) -> dict:
    out = {"learning_rate": tp.learning_rate, "batch_size": tp.batch_size,
           "epochs": tp.epochs, "seed": tp.seed}
    patience = (block or {}).get("early_stop_patience")
    if patience is not None:
        out["early_stop_patience"] = int(patience)
    return out


# ---------------------------------------------------------------------------
# stages: each returns (effective_config, input_paths, output_names)


def _stage_gen_data(cfg, out: Path, seed: int, quiet: bool):
    _check_fields(cfg, "gen-data", [], ["seed", "benchmark", "synthetic",
                                        "pool_size", "split"])
    if ("synthetic" in cfg) == bool(cfg.get("benchmark", "synthetic" not in cfg)):
        raise ConfigError("config field 'benchmark'/'synthetic': specify exactly one")
    if "synthetic" in cfg:
        block = _as_block(cfg["synthetic"], "synthetic")
        block.setdefault("seed", seed)
        try:
            sc = data.SyntheticConfig(
                input_dim=int(block["input_dim"]),
                class_names=tuple(block["class_names"]),
                positives_per_event=tuple(block["positives_per_event"]),
                num_negatives=int(block["num_negatives"]),
                event_means=np.asarray(block["event_means"], dtype=np.float64),
                event_scales=np.asarray(block["event_scales"], dtype=np.float64),
                background_scale=float(block.get("background_scale", 1.0)),
                co_occur_rate=float(block.get("co_occur_rate", 0.0)),
                pool_size=int(block.get("pool_size", 0)),
                pool_shift=(np.asarray(block["pool_shift"], dtype=np.float64)
                            if "pool_shift" in block else None),
                pool_prior_factors=(np.asarray(block["pool_prior_factors"], dtype=np.float64)
                                    if "pool_prior_factors" in block else None),
                seed=int(block["seed"]))
        except KeyError as exc:
            raise ConfigError(f"missing required config field 'synthetic.{exc.args[0]}'")
        echo = {"synthetic": block}
    else:
        sc = data.benchmark_config(seed=seed, pool_size=int(cfg.get("pool_size", 20000)))
        echo = {"benchmark": True, "pool_size": sc.pool_size}
    labeled, pool, truth = data.generate_synthetic(sc)
    data.save_dataset(labeled, out / "labeled.csv")
    data.save_dataset(pool, out / "pool.csv")
    truth_ds = data.LabeledDataset(pool.ids, pool.features, truth, labeled.class_names)
    data.save_dataset(truth_ds, out / "pool_truth.csv")
    outputs = ["labeled.csv", "pool.csv", "pool_truth.csv"]

    split_block = cfg.get("split", True)
    if split_block is True:
        split_block = {}
    if split_block is not False:
        split_block = _as_block(split_block, "split")
        _check_fields(split_block, "gen-data.split", [], ["ratios", "seed"])
        ratios = tuple(split_block.get("ratios", (0.7, 0.1, 0.2)))
        split_seed = int(split_block.get("seed", seed))
        train, dev, test = data.split(labeled, ratios, seed=split_seed)
        data.save_dataset(train, out / "train.csv")
        data.save_dataset(dev, out / "dev.csv")
        data.save_dataset(test, out / "test.csv")
        outputs += ["train.csv", "dev.csv", "test.csv"]
        echo["split"] = {"ratios": list(ratios), "seed": split_seed}
    else:
        echo["split"] = False
    echo["seed"] = seed
    if not quiet:
        print(f"[gen-data] wrote {len(labeled)} labeled and {len(pool)} pool examples "
              f"to {out}")
    return echo, {}, outputs


def _stage_train(cfg, out: Path, seed: int, quiet: bool):
    _check_fields(cfg, "train", ["train_data"],
                  ["dev_data", "model", "train", "class_weight_policy", "seed"])
    inputs = {"train_data": Path(cfg["train_data"])}
    train_set = _load_labeled(inputs["train_data"], "train_data")
    dev = None
    if "dev_data" in cfg:
        inputs["dev_data"] = Path(cfg["dev_data"])
        dev = _load_labeled(inputs["dev_data"], "dev_data")
    mc = _model_config(cfg.get("model"), train_set.input_dim, train_set.num_classes, seed)
    tp = _train_params(cfg.get("train"), seed, dev)
    policy = cfg.get("class_weight_policy", "balanced")
    weights = learner.compute_class_weights(train_set, policy)
    model = learner.train(learner.init_model(mc), train_set, weights, tp)
    learner.save_model(model, out / "model.json")
    if not quiet:
        print(f"[train] {len(train_set)} examples -> {out / 'model.json'}")
    echo = {"train_data": str(inputs["train_data"]), "model": _echo_model(mc),
            "train": _echo_train(tp, cfg.get("train")),
            "class_weight_policy": policy, "seed": seed}
    if dev is not None:
        echo["dev_data"] = str(inputs["dev_data"])
    return echo, inputs, ["model.json"]


def _stage_self_train(cfg, out: Path, seed: int, quiet: bool):
    _check_fields(cfg, "self-train", ["train_data", "pool"],
                  ["dev_data", "model", "train", "k", "iterations", "theta",
                   "class_weight_policy", "seed"])
    inputs = {"train_data": Path(cfg["train_data"]), "pool": Path(cfg["pool"])}
    train_set = _load_labeled(inputs["train_data"], "train_data")
    pool = _load_pool(inputs["pool"], "pool")
    dev = None
    if "dev_data" in cfg:
        inputs["dev_data"] = Path(cfg["dev_data"])
        dev = _load_labeled(inputs["dev_data"], "dev_data")
    mc = _model_config(cfg.get("model"), train_set.input_dim, train_set.num_classes, seed)
    tp = _train_params(cfg.get("train"), seed, dev)
    params = semisup.SelfTrainParams(
        model=mc, train=tp,
        k=int(cfg.get("k", 5000)),
        iterations=int(cfg.get("iterations", 1)),
        theta=cfg.get("theta", 0.5),
        class_weight_policy=cfg.get("class_weight_policy", "balanced"))
    log = []
    model = semisup.self_train(train_set, pool, params, candidate_log=log)
    learner.save_model(model, out / "model.json")
    semisup.save_candidate_log(log, out / "candidates.csv")
    if not quiet:
        print(f"[self-train] {len(log)} selections -> {out / 'model.json'}")
    echo = {"train_data": str(inputs["train_data"]), "pool": str(inputs["pool"]),
            "model": _echo_model(mc), "train": _echo_train(tp, cfg.get("train")),
            "k": params.k, "iterations": params.iterations, "theta": params.theta,
            "class_weight_policy": params.class_weight_policy, "seed": seed}
    if dev is not None:
        echo["dev_data"] = str(inputs["dev_data"])
    return echo, inputs, ["model.json", "candidates.csv"]


def _stage_tri_train(cfg, out: Path, seed: int, quiet: bool):
    _check_fields(cfg, "tri-train", ["train_data", "pool"],
                  ["dev_data", "model", "train", "k", "t_iters", "theta",
                   "bootstrap_seeds", "class_weight_policy", "seed"])
    inputs = {"train_data": Path(cfg["train_data"]), "pool": Path(cfg["pool"])}
    train_set = _load_labeled(inputs["train_data"], "train_data")
    pool = _load_pool(inputs["pool"], "pool")
    dev = None
    if "dev_data" in cfg:
        inputs["dev_data"] = Path(cfg["dev_data"])
        dev = _load_labeled(inputs["dev_data"], "dev_data")
    mc = _model_config(cfg.get("model"), train_set.input_dim, train_set.num_classes, seed)
    tp = _train_params(cfg.get("train"), seed, dev)
    boots = tuple(int(b) for b in cfg.get("bootstrap_seeds", (seed + 1, seed + 2, seed + 3)))
    params = semisup.TriTrainParams(
        model=mc, train=tp,
        k=int(cfg.get("k", 5000)),
        t_iters=int(cfg.get("t_iters", 1)),
        theta=cfg.get("theta", 0.5),
        bootstrap_seeds=boots,
        class_weight_policy=cfg.get("class_weight_policy", "balanced"))
    result = semisup.tri_train(train_set, pool, params)
    outputs = []
    member_names = []
    for tag, models in (("initial", result.initial_models), ("final", result.final_models)):
        for i, model in enumerate(models, start=1):
            name = f"{tag}_{i}.json"
            learner.save_model(model, out / name)
            outputs.append(name)
            member_names.append(name)
    (out / "ensemble.json").write_text(json.dumps(
        {"format": ensemble.ENSEMBLE_FORMAT, "members": member_names}, indent=1) + "\n")
    outputs.append("ensemble.json")
    semisup.save_candidate_log(result.candidates, out / "candidates.csv")
    outputs.append("candidates.csv")
    if not quiet:
        print(f"[tri-train] {len(result.candidates)} selections, 6 checkpoints -> {out}")
    echo = {"train_data": str(inputs["train_data"]), "pool": str(inputs["pool"]),
            "model": _echo_model(mc), "train": _echo_train(tp, cfg.get("train")),
            "k": params.k, "t_iters": params.t_iters, "theta": params.theta,
            "bootstrap_seeds": list(boots),
            "class_weight_policy": params.class_weight_policy, "seed": seed}
    if dev is not None:
        echo["dev_data"] = str(inputs["dev_data"])
    return echo, inputs, outputs


def _stage_distill(cfg, out: Path, seed: int, quiet: bool):
    _check_fields(cfg, "distill", ["teacher", "train_data"],
                  ["dev_data", "student", "train", "alpha", "temperature",
                   "scale_student", "class_weight_policy", "seed"])
    inputs = {"teacher": _require_file(cfg["teacher"], "teacher"),
              "train_data": Path(cfg["train_data"])}
    teacher = ensemble.load_ensemble(inputs["teacher"])
    train_set = _load_labeled(inputs["train_data"], "train_data")
    dev = None
    if "dev_data" in cfg:
        inputs["dev_data"] = Path(cfg["dev_data"])
        dev = _load_labeled(inputs["dev_data"], "dev_data")
    mc = _model_config(cfg.get("student"), train_set.input_dim, train_set.num_classes, seed)
    tp = _train_params(cfg.get("train"), seed, dev)
    params = ensemble.DistillParams(
        student=mc, train=tp,
        alpha=float(cfg.get("alpha", 0.5)),
        temperature=float(cfg.get("temperature", 2.0)),
        scale_student=bool(cfg.get("scale_student", True)))
    policy = cfg.get("class_weight_policy", "balanced")
    weights = learner.compute_class_weights(train_set, policy)
    z_teacher = teacher.predict_logits(train_set.features)
    ensemble.save_teacher_logits(train_set.ids, z_teacher, train_set.class_names,
                                 out / "teacher_logits.csv")
    student = ensemble.distill(teacher, train_set, weights, params)
    learner.save_model(student, out / "student.json")
    if not quiet:
        print(f"[distill] {len(teacher.members)}-member teacher -> {out / 'student.json'}")
    echo = {"teacher": str(inputs["teacher"]), "train_data": str(inputs["train_data"]),
            "student": _echo_model(mc), "train": _echo_train(tp, cfg.get("train")),
            "alpha": params.alpha, "temperature": params.temperature,
            "scale_student": params.scale_student, "class_weight_policy": policy,
            "seed": seed}
    if dev is not None:
        echo["dev_data"] = str(inputs["dev_data"])
    return echo, inputs, ["teacher_logits.csv", "student.json"]


def _load_predictor(cfg, inputs):
    has_model, has_ens = "model" in cfg, "ensemble" in cfg
    if has_model == has_ens:
        raise ConfigError("config field 'model'/'ensemble': specify exactly one")
    if has_model:
        inputs["model"] = _require_file(cfg["model"], "model")
        return learner.load_model(inputs["model"])
    inputs["ensemble"] = _require_file(cfg["ensemble"], "ensemble")
    return ensemble.load_ensemble(inputs["ensemble"])


def _stage_evaluate(cfg, out: Path, seed: int, quiet: bool):
    _check_fields(cfg, "evaluate", ["test_data"], ["model", "ensemble", "seed"])
    inputs = {"test_data": Path(cfg["test_data"])}
    predictor = _load_predictor(cfg, inputs)
    test = _load_labeled(inputs["test_data"], "test_data")
    report = metrics.evaluate(predictor, test)
    metrics.save_report(report, out / "report.csv")
    scores = predictor.predict_proba(test.features)
    curves = {}
    for c, name in enumerate(test.class_names):
        if report.events[name] is not None:
            curves[name] = metrics.det_curve(scores[:, c], test.labels[:, c])
    metrics.save_det_points(curves, out / "det_points.csv")
    if not quiet:
        print(metrics.format_report(report))
    echo = {"test_data": str(inputs["test_data"]), "seed": seed}
    for key in ("model", "ensemble"):
        if key in cfg:
            echo[key] = str(cfg[key])
    return echo, inputs, ["report.csv", "det_points.csv"]


# ---------------------------------------------------------------------------
# ablation grids

FACTOR_NAMES = ("sup", "ens", "ens_data", "2xens_data")


def _eval_rows(predictor, test, seed, cell):
    report = metrics.evaluate(predictor, test)
    rows = []
    for name in test.class_names:
        ev = report.events[name]
        if ev is not None:
            rows.append((seed, cell, name, ev.auc, ev.eer))
    return rows


def _offset_tri_params(mc, tp, cfg, boots, policy, shift):
    return semisup.TriTrainParams(
        model=learner.ModelConfig(mc.input_dim, mc.hidden_layers, mc.num_classes,
                                  mc.seed + shift),
        train=learner.TrainParams(tp.learning_rate, tp.batch_size, tp.epochs,
                                  tp.adam_beta1, tp.adam_beta2, tp.adam_epsilon,
                                  tp.seed + shift, tp.early_stop),
        k=int(cfg.get("k", 5000)),
        t_iters=int(cfg.get("t_iters", 1)),
        theta=cfg.get("theta", 0.5),
        bootstrap_seeds=tuple(b + shift for b in boots),
        class_weight_policy=policy)


def _stage_ablate(cfg, out: Path, seed: int, quiet: bool):
    _check_fields(cfg, "ablate", ["mode", "train_data", "test_data"],
                  ["pool", "dev_data", "model", "train", "k", "t_iters", "theta",
                   "bootstrap_seeds", "class_weight_policy", "seeds", "factors",
                   "k_values", "ratios", "seed"])
    mode = cfg["mode"]
    if mode not in ("factors", "k", "ratio"):
        raise ConfigError(f"config field 'mode': unknown ablation mode {mode!r}")
    inputs = {"train_data": Path(cfg["train_data"]), "test_data": Path(cfg["test_data"])}
    train_set = _load_labeled(inputs["train_data"], "train_data")
    test = _load_labeled(inputs["test_data"], "test_data")
    dev = None
    if "dev_data" in cfg:
        inputs["dev_data"] = Path(cfg["dev_data"])
        dev = _load_labeled(inputs["dev_data"], "dev_data")
    pool = None
    if mode in ("factors", "k"):
        if "pool" not in cfg:
            raise ConfigError(f"missing required config field 'pool' for ablation mode '{mode}'")
        inputs["pool"] = Path(cfg["pool"])
        pool = _load_pool(inputs["pool"], "pool")
    seeds = [int(s) for s in cfg.get("seeds", [seed])]
    mc = _model_config(cfg.get("model"), train_set.input_dim, train_set.num_classes, seed)
    tp = _train_params(cfg.get("train"), seed, dev)
    policy = cfg.get("class_weight_policy", "balanced")
    boots = tuple(int(b) for b in cfg.get("bootstrap_seeds", (1, 2, 3)))

    rows = []
    if mode == "factors":
        factors = list(cfg.get("factors", FACTOR_NAMES))
        for f in factors:
            if f not in FACTOR_NAMES:
                raise ConfigError(f"config field 'factors': unknown factor {f!r}; "
                                  f"choose from {', '.join(FACTOR_NAMES)}")
        for s in seeds:
            shift = 10000 * s
            params = _offset_tri_params(mc, tp, cfg, boots, policy, shift)
            result = semisup.tri_train(train_set, pool, params)
            if "sup" in factors:
                weights = learner.compute_class_weights(train_set, policy)
                sup = learner.train(learner.init_model(params.model), train_set,
                                    weights, params.train)
                rows += _eval_rows(sup, test, s, "sup")
            if "ens" in factors:
                rows += _eval_rows(ensemble.Ensemble(result.initial_models), test, s, "ens")
            if "ens_data" in factors:
                rows += _eval_rows(ensemble.Ensemble(result.final_models), test, s, "ens_data")
            if "2xens_data" in factors:
                rows += _eval_rows(ensemble.Ensemble(tuple(result.all_models)), test, s,
                                   "2xens_data")
            if not quiet:
                print(f"[ablate] factors done for seed {s}")
        cells = [f for f in FACTOR_NAMES if f in factors]
        echo_grid = {"factors": factors}
    elif mode == "k":
        k_values = [int(k) for k in cfg.get("k_values", ())]
        if not k_values:
            raise ConfigError("missing required config field 'k_values' for ablation mode 'k'")
        for s in seeds:
            shift = 10000 * s
            for k in k_values:
                grid_cfg = dict(cfg)
                grid_cfg["k"] = k
                params = _offset_tri_params(mc, tp, grid_cfg, boots, policy, shift)
                result = semisup.tri_train(train_set, pool, params)
                rows += _eval_rows(ensemble.Ensemble(tuple(result.all_models)), test, s,
                                   f"k={k}")
            if not quiet:
                print(f"[ablate] k grid done for seed {s}")
        cells = [f"k={k}" for k in k_values]
        echo_grid = {"k_values": k_values}
    else:
        ratios = [float(r) for r in cfg.get("ratios", ())]
        if not ratios:
            raise ConfigError("missing required config field 'ratios' for ablation mode 'ratio'")
        for s in seeds:
            shift = 10000 * s
            for r in ratios:
                n_keep = int(round(r * len(test)))
                if not 1 <= n_keep <= len(train_set):
                    raise ConfigError(f"config field 'ratios': ratio {r} needs {n_keep} "
                                      f"training rows, have {len(train_set)}")
                # test and dev stay fixed; only the training set shrinks
                order = np.random.default_rng(shift + n_keep).permutation(len(train_set))
                subset = train_set.subset(np.sort(order[:n_keep]))
                weights = learner.compute_class_weights(subset, policy)
                sub_mc = learner.ModelConfig(mc.input_dim, mc.hidden_layers,
                                             mc.num_classes, mc.seed + shift)
                sub_tp = learner.TrainParams(tp.learning_rate, tp.batch_size, tp.epochs,
                                             tp.adam_beta1, tp.adam_beta2, tp.adam_epsilon,
                                             tp.seed + shift, tp.early_stop)
                model = learner.train(learner.init_model(sub_mc), subset, weights, sub_tp)
                rows += _eval_rows(model, test, s, f"ratio={r:g}")
            if not quiet:
                print(f"[ablate] ratio grid done for seed {s}")
        cells = [f"ratio={r:g}" for r in ratios]
        echo_grid = {"ratios": ratios}

    lines = ["seed,cell,event,auc_pct,eer_pct"]
    for s, cell, event, auc, eer_v in rows:
        lines.append(f"{s},{cell},{event},{100 * auc:.2f},{100 * eer_v:.2f}")
    (out / "cells.csv").write_text("\n".join(lines) + "\n")

    # summary pivot: one row per cell, per-event median AUC/EER columns
    header = ["cell"]
    for name in test.class_names:
        header += [f"auc_{name}", f"eer_{name}"]
    summary = [",".join(header)]
    for cell in cells:
        fields = [cell]
        for name in test.class_names:
            aucs = [a for s, c, e, a, _ in rows if c == cell and e == name]
            eers = [e_ for s, c, e, _, e_ in rows if c == cell and e == name]
            if aucs:
                fields += [f"{100 * float(np.median(aucs)):.2f}",
                           f"{100 * float(np.median(eers)):.2f}"]
            else:
                fields += ["skipped", "skipped"]
        summary.append(",".join(fields))
    (out / "summary.csv").write_text("\n".join(summary) + "\n")

    echo = {"mode": mode, "train_data": str(inputs["train_data"]),
            "test_data": str(inputs["test_data"]), "seeds": seeds,
            "model": _echo_model(mc), "train": _echo_train(tp, cfg.get("train")),
            "theta": cfg.get("theta", 0.5), "bootstrap_seeds": list(boots),
            "class_weight_policy": policy, "seed": seed, **echo_grid}
    if pool is not None:
        echo["pool"] = str(inputs["pool"])
    if dev is not None:
        echo["dev_data"] = str(inputs["dev_data"])
    if mode in ("factors", "k"):
        echo["k"] = int(cfg.get("k", 5000))
        echo["t_iters"] = int(cfg.get("t_iters", 1))
    return echo, inputs, ["cells.csv", "summary.csv"]


_STAGE_FNS = {
    "gen-data": _stage_gen_data,
    "train": _stage_train,
    "self-train": _stage_self_train,
    "tri-train": _stage_tri_train,
    "distill": _stage_distill,
    "evaluate": _stage_evaluate,
    "ablate": _stage_ablate,
}


def run(stage: str, config: dict, out_dir, quiet: bool = True) -> dict:
    """Execute one stage and write its manifest; returns the manifest dict."""
    if stage not in _STAGE_FNS:
        raise ConfigError(f"unknown stage {stage!r}")
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(config.get("seed", 0))
    started = time.perf_counter()
    echo, inputs, outputs = _STAGE_FNS[stage](dict(config), out, seed, quiet)
    manifest = {
        "format": MANIFEST_FORMAT,
        "stage": stage,
        "version": __version__,
        "config": echo,
        "inputs": {str(p): _sha256(p) for p in inputs.values()},
        "outputs": outputs,
        "wall_clock_sec": round(time.perf_counter() - started, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest


def _load_config(path: str, stage: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    if payload.get("format") == MANIFEST_FORMAT:
        if payload.get("stage") != stage:
            raise ConfigError(f"manifest stage '{payload.get('stage')}' does not match "
                              f"subcommand '{stage}'")
        return _as_block(payload.get("config"), "config")
    return payload


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tridet",
        description="Semi-supervised event detection experiments: data generation, "
                    "training, tri-training, distillation, DET evaluation, ablations.")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage)
        p.add_argument("--config", help="JSON config (or a previous run's manifest)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config, args.stage) if args.config else {}
        if args.seed is not None:
            config["seed"] = args.seed
        run(args.stage, config, args.out, quiet=args.quiet)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - stage failures map to exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
