"""Command-line front end: generate, fuse, cluster, balance, train, evaluate, pipeline.

Exit status: 0 success, 1 other domain error, 2 bad config, 3 malformed CSV,
4 missing input file. Errors print one ``error:`` line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .balance import AdasynConfig, balance_dataset
from .classifier import CostModel, GbdtEnsemble, TrainConfig, encode_labels, train
from .clustering import TwoStepConfig, cluster
from .clustering.twostep import ClusterModel
from .datalink import WindowConfig, compress_repeats, fuse_links
from .errors import CpsDetectError, CsvFormatError, InvalidConfigError
from .metrics import adjusted_rand_index, evaluate
from .scenario import STATES, ScenarioConfig, generate

log = logging.getLogger("cpsdetect")

SECTIONS = {
    "scenario": ScenarioConfig,
    "window": WindowConfig,
    "clustering": TwoStepConfig,
    "balance": AdasynConfig,
    "train": TrainConfig,
}
COST_KEYS = {"class_weights", "attack_weight", "miss_weight", "false_alarm_weight"}
TOP_KEYS = set(SECTIONS) | {"cost", "split", "seed"}


# -- configuration -------------------------------------------------------------

def derive_seed(seed: int, name: str) -> int:
    """Named per-module seed; the scenario uses the global seed itself."""
    if name == "scenario":
        return int(seed)
    h = hashlib.sha256(f"{int(seed)}/{name}".encode()).digest()
    return int.from_bytes(h[:4], "little")


def _build(cls, section: dict, name: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(section) - allowed
    if unknown:
        raise InvalidConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}
    try:
        return cls(**kw)
    except TypeError as exc:
        raise InvalidConfigError(f"[{name}]: {exc}") from None


class PipelineConfig:
    """All module settings resolved from one JSON document plus flag overrides."""

    def __init__(self, doc: dict | None = None, seed: int | None = None):
        doc = {} if doc is None else doc
        if not isinstance(doc, dict):
            raise InvalidConfigError("config must be a JSON object")
        unknown = set(doc) - TOP_KEYS
        if unknown:
            raise InvalidConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        self.seed = int(doc.get("seed", 42) if seed is None else seed)
        self.split = float(doc.get("split", 0.7))
        if not 0 < self.split < 1:
            raise InvalidConfigError("split must lie in (0, 1)")
        sec = {k: dict(doc.get(k, {})) for k in SECTIONS}
        for name in ("scenario", "balance", "train"):
            if seed is not None or "seed" not in sec[name]:
                sec[name]["seed"] = derive_seed(self.seed, name)
        self.scenario = _build(ScenarioConfig, sec["scenario"], "scenario")
        self.window = _build(WindowConfig, sec["window"], "window")
        self.clustering = _build(TwoStepConfig, sec["clustering"], "clustering")
        self.balance = _build(AdasynConfig, sec["balance"], "balance")
        self.train = _build(TrainConfig, sec["train"], "train")
        cost = dict(doc.get("cost", {}))
        if set(cost) - COST_KEYS:
            raise InvalidConfigError(
                f"unknown key(s) in [cost]: {', '.join(sorted(set(cost) - COST_KEYS))}")
        self.cost = cost

    def cost_model(self, classes) -> CostModel:
        c = self.cost
        kw = {k: float(c[k]) for k in ("miss_weight", "false_alarm_weight") if k in c}
        if "class_weights" in c:
            w = c["class_weights"]
            if isinstance(w, dict):
                w = [w.get(k, 1.0) for k in classes]
            if len(w) != len(classes):
                raise InvalidConfigError("cost.class_weights needs one weight per class")
            return CostModel(tuple(float(v) for v in w), **kw)
        return CostModel.for_labels(classes, float(c.get("attack_weight", 3.0)), **kw)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "split": self.split,
            "scenario": asdict(self.scenario), "window": asdict(self.window),
            "clustering": asdict(self.clustering), "balance": asdict(self.balance),
            "train": asdict(self.train), "cost": dict(self.cost),
        }


def load_config(path, seed=None) -> PipelineConfig:
    doc = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})")
        if not isinstance(doc, dict):
            raise InvalidConfigError(f"{path}: config must be a JSON object")
    return PipelineConfig(doc, seed)


# -- steps ---------------------------------------------------------------------

def stratified_split(labels, fraction: float, seed: int):
    """Per-class seeded shuffle; the first round(fraction * n_c) go to training."""
    labels = np.asarray(labels, dtype=object)
    rng = np.random.default_rng(derive_seed(seed, "split"))
    train_idx = []
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        train_idx.append(idx[:int(round(fraction * idx.size))])
    tr = np.sort(np.concatenate(train_idx))
    te = np.setdiff1d(np.arange(labels.size), tr)
    return tr, te


def _subset(link, idx):
    return replace(link, records=tuple(link.records[i] for i in idx), dropped=0)


def step_cluster(link, cfg: PipelineConfig, out: Path):
    model = cluster(link, cfg.clustering)
    io.write_json(model.to_dict(), out / "cluster_model.json")
    io.write_rows(out / "clusters.csv", ["row", "cluster", "outlier"],
                  ([str(i), str(int(c)), str(int(o))]
                   for i, (c, o) in enumerate(zip(model.labels, model.outlier_flags))))
    labels = link.labels()
    summary = {"k": model.k, "n_subclusters": model.n_subclusters,
               "outliers": int(model.outlier_flags.sum())}
    if all(lab is not None for lab in labels):
        summary["ari"] = adjusted_rand_index(np.array(labels, dtype=object).astype(str),
                                             model.labels)
    io.write_json(summary, out / "cluster_summary.json")
    return model, summary


def step_balance(X, y, cfg: PipelineConfig, out: Path):
    ds = balance_dataset(X, y, cfg.balance)
    io.write_balanced(ds, out / "balanced.csv")
    return ds


def step_train(X, y, cfg: PipelineConfig, out: Path):
    classes = tuple(sorted(set(np.asarray(y).astype(str).tolist())))
    model = train(X, np.asarray(y).astype(str), cfg.train, cfg.cost_model(classes), classes)
    io.write_json(model.to_dict(), out / "model.json")
    io.write_rows(out / "loss_trace.csv", ["iteration", "loss"],
                  ([str(i), io.fmt(v)] for i, v in enumerate(model.loss_trace)))
    return model


def step_evaluate(true_labels, proba, classes, out: Path, ari=None, fmt="json"):
    _, codes = encode_labels(np.asarray(true_labels).astype(str), tuple(classes))
    rep = evaluate(codes, proba, classes)
    rep.ari = ari
    io.write_json(rep.to_dict(), out / "report.json")
    paths = [out / "report.json"]
    paths += rep.write_curves(out / "curves")
    if fmt == "csv":
        io.write_rows(out / "report.csv", ["class", "precision", "recall", "f1", "auc"],
                      ([c, io.fmt(p), io.fmt(r), io.fmt(f), io.fmt(a)] for c, p, r, f, a in
                       zip(classes, rep.precision, rep.recall, rep.f1, rep.auc)))
        paths.append(out / "report.csv")
    return rep, paths


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_pipeline(cfg: PipelineConfig, out, input_path=None, fmt="json") -> dict:
    """End-to-end run; returns the report dictionary and writes a manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if input_path is None:
        link = generate(cfg.scenario)
        io.write_link(link, out / "scenario.csv")
    else:
        link = io.read_link(input_path)
    if any(lab is None for lab in link.labels()):
        raise InvalidConfigError("pipeline input must be labeled")
    link = compress_repeats(link, cfg.window.dedup_tolerance)
    io.write_link(link, out / "link.csv")

    _, csum = step_cluster(link, cfg, out)
    labels = np.array(link.labels(), dtype=object).astype(str)
    tr, te = stratified_split(labels, cfg.split, cfg.seed)
    train_link, test_link = _subset(link, tr), _subset(link, te)
    io.write_link(train_link, out / "train.csv")
    io.write_link(test_link, out / "test.csv")

    X = link.features()
    ds = step_balance(X[tr], labels[tr], cfg, out)
    model = step_train(ds.X, ds.y, cfg, out)
    proba = model.predict_proba(X[te])
    io.write_predictions(labels[te], proba, model.classes, out / "predictions.csv")
    rep, _ = step_evaluate(labels[te], proba, model.classes, out, csum.get("ari"), fmt)

    manifest = {
        "config": cfg.to_dict(),
        "files": {p.relative_to(out).as_posix(): sha256_of(p)
                  for p in sorted(out.rglob("*"))
                  if p.is_file() and p.name != "manifest.json"},
    }
    io.write_json(manifest, out / "manifest.json")
    return rep.to_dict()


# -- argument handling -----------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="cpsdetect",
                                description="Coordinated cyber-attack detection pipeline")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    help_ = {
        "generate": "write a labeled synthetic scenario CSV",
        "fuse": "join physical, cyber and index CSVs into a fused link",
        "cluster": "two-step clustering of a link CSV",
        "balance": "ADASYN oversampling of a labeled CSV",
        "train": "train the cost-sensitive GBDT",
        "evaluate": "score a model on a labeled CSV, or a predictions CSV",
        "pipeline": "generate (or read), cluster, split, balance, train, evaluate",
    }
    for name, text in help_.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help="JSON config with per-module sections")
        s.add_argument("--seed", type=int, help="global seed (overrides config)")
        s.add_argument("--input", nargs="*", default=[], help="input file(s)")
        s.add_argument("--output", default=".", help="output directory")
        s.add_argument("--format", choices=("csv", "json"), default="json",
                       help="report format (evaluate, pipeline)")
    return p


def _need(args, n, what):
    if len(args.input) != n:
        raise InvalidConfigError(f"{args.command} needs --input {what}")
    for f in args.input:
        if not Path(f).is_file():
            raise FileNotFoundError(f"input file not found: {f}")
    return args.input


def dispatch(args) -> None:
    if args.config is not None and not Path(args.config).is_file():
        raise FileNotFoundError(f"config file not found: {args.config}")
    cfg = load_config(args.config, args.seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command

    if cmd == "generate":
        io.write_link(generate(cfg.scenario), out / "scenario.csv")
    elif cmd == "fuse":
        phys, cyb, idx = _need(args, 3, "PHYSICAL.csv CYBER.csv INDEX.csv")
        link = fuse_links(io.read_physical(phys), io.read_cyber(cyb), io.read_index(idx),
                          cfg.window)
        merged = compress_repeats(link, cfg.window.dedup_tolerance)
        io.write_link(merged, out / "fused.csv")
        io.write_json({"fused": len(link), "dropped": link.dropped,
                       "records_after_compression": len(merged)}, out / "fuse_summary.json")
    elif cmd == "cluster":
        (path,) = _need(args, 1, "LINK.csv")
        step_cluster(io.read_link(path), cfg, out)
    elif cmd == "balance":
        (path,) = _need(args, 1, "LABELED.csv")
        X, y, _ = io.read_labeled_matrix(path)
        step_balance(X, y.astype(str), cfg, out)
    elif cmd == "train":
        (path,) = _need(args, 1, "LABELED.csv")
        X, y, _ = io.read_labeled_matrix(path)
        step_train(X, y.astype(str), cfg, out)
    elif cmd == "evaluate":
        if len(args.input) == 1:
            (path,) = _need(args, 1, "PREDICTIONS.csv")
            labels, proba, classes = io.read_predictions(path)
        else:
            mpath, dpath = _need(args, 2, "MODEL.json TEST.csv (or PREDICTIONS.csv)")
            try:
                model = GbdtEnsemble.from_dict(io.read_json(mpath))
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, CpsDetectError):
                    raise
                raise InvalidConfigError(f"{mpath}: not a model file ({exc})") from None
            X, labels, _ = io.read_labeled_matrix(dpath)
            proba = model.predict_proba(X)
            classes = list(model.classes)
            io.write_predictions(labels, proba, classes, out / "predictions.csv")
        step_evaluate(labels, proba, classes, out, fmt=args.format)
    elif cmd == "pipeline":
        inp = _need(args, 1, "LABELED.csv")[0] if args.input else None
        run_pipeline(cfg, out, inp, args.format)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        dispatch(args)
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        msg = str(exc) if not exc.filename else f"input file not found: {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
        return 4
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CpsDetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
