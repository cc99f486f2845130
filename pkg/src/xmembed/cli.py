"""Command-line entry point: ``xmembed <command> [options]``.

Data files (CSV/JSON) are deterministic for a given config and seed; wall-clock
timings are kept out of them and go to ``diagnostics.json`` and the log stream.

Exit codes: 0 ok, 1 I/O or parse error, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .embedders import EmbeddingMatrix
from .evaluation import ablation, compare_link_prediction, reports_to_csv
from .explain import explain_matrix, explain_stack, normalize_stack, nuclear_norm
from .features import (
    FeatureMatrix, check_feature_set, normalize_features, positional_features, sense_features,
)
from .graph import BUILTINS, Graph, GraphParseError, builtin, graph_stats, load_edge_list
from .presets import METHODS, base_of, make_estimator, preset

log = logging.getLogger("xmembed")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# showcased nodes (0-indexed): instructor, a student, president
KARATE_NODES = (0, 11, 33)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_plain) + "\n"


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _write(out: Path, name: str, text: str) -> None:
    path = out / name
    with open(path, "w", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _load_graph(args) -> tuple[Graph, str]:
    if bool(args.builtin) == bool(args.input):
        raise ConfigError("give exactly one of --builtin or --input")
    if args.builtin:
        return builtin(args.builtin), args.builtin
    with open(args.input) as fh:
        g = load_edge_list(fh, weighted=args.weighted)
    return g, Path(args.input).stem


def _parse_ints(text: str | None, what: str) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of integers") from None


def _node_index(g: Graph, label) -> int:
    labels = [str(x) for x in g.labels]
    try:
        return labels.index(str(label))
    except ValueError:
        raise ConfigError(f"node {label!r} is not in the graph") from None


def _features(g: Graph, args) -> FeatureMatrix:
    if args.features == "positional":
        anchors = _parse_ints(args.anchors, "--anchors")
        if not anchors:
            raise ConfigError("positional features need --anchors")
        return normalize_features(positional_features(g, [_node_index(g, a) for a in anchors]))
    try:
        names = check_feature_set(args.features)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return sense_features(g, names, n_jobs=args.workers)


def _estimator(args, graph_name: str):
    """Preset for the graph, then explicit flags, then ``params`` from the config file."""
    if args.method not in METHODS:
        raise ConfigError(f"--method must be one of {METHODS}")
    est = preset(args.method, graph_name)
    if not args.xm:
        est = base_of(est)
    overrides = {}
    for name in ("dim", "epochs", "gamma", "delta"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    overrides.update(args.params or {})
    try:
        params = {**est.get_params(), **overrides}
        if "hidden" in params:
            params["hidden"] = tuple(params["hidden"])
        return make_estimator(args.method, **params)
    except TypeError as exc:
        raise ConfigError(f"bad method parameter: {exc}") from None


def _resolved(args, g: Graph, extra: dict | None = None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "config", "verbose")}
    cfg["graph_hash"] = g.content_hash()
    cfg["graph_nodes"] = g.n
    cfg["graph_edges"] = g.edge_count
    cfg.update(extra or {})
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need_seed(args) -> None:
    if args.seed is None:
        raise ConfigError(f"--seed is required for {args.command}")


# ---------------------------------------------------------------------------
# commands


def cmd_features(args) -> int:
    g, _ = _load_graph(args)
    fm = _features(g, args)
    out = _outdir(args)
    labels = [str(x) for x in g.labels]
    _write(out, "features.csv", fm.to_csv(labels=labels))
    _write(out, "features.json", _json({**fm.to_dict(), "config": _resolved(args, g)}))
    return EXIT_OK


def _train(args, g: Graph, name: str):
    est = _estimator(args, name)
    est.set_params(random_state=args.seed)
    F = _features(g, args)
    est.fit(g, F)
    return est, F


def cmd_embed(args) -> int:
    _need_seed(args)
    g, name = _load_graph(args)
    est, _ = _train(args, g, name)
    res = est.result()
    out = _outdir(args)
    meta = res.metadata()
    timings = {"epoch_seconds": meta.pop("epoch_seconds")}
    _write(out, "embedding.csv", res.to_csv([str(x) for x in g.labels]))
    _write(out, "embedding.json", _json({**meta, "run": _resolved(args, g)}))
    _write(out, "diagnostics.json", _json(timings))
    return EXIT_OK


def _read_embedding(path: str, g: Graph) -> np.ndarray:
    with open(path) as fh:
        emb = EmbeddingMatrix.from_csv(fh)
    if emb.n != g.n:
        raise ConfigError(f"embedding has {emb.n} rows but the graph has {g.n} nodes")
    return emb.values


def _explain_files(out: Path, tag: str, Y, fm: FeatureMatrix, g: Graph, nodes, mode: str) -> dict:
    norm, _ = normalize_stack(explain_stack(Y, fm.values), mode)
    norms = nuclear_norm(norm)
    summary = {}
    for v in nodes:
        E = explain_matrix(Y[v], fm.values[v], node_id=v)
        E.normalized, E.mode = norm[v], mode
        label = str(g.labels[v])
        _write(out, f"explain_{tag}_node{label}.csv", E.to_csv(fm.names))
        summary[label] = float(norms[v])
    return {"nuclear_norms": summary, "mean_nuclear_norm": float(norms.mean())}


def cmd_explain(args) -> int:
    g, _ = _load_graph(args)
    if not args.embedding:
        raise ConfigError("--embedding is required")
    Y = _read_embedding(args.embedding, g)
    fm = _features(g, args)
    nodes = [_node_index(g, v) for v in (_parse_ints(args.nodes, "--nodes") or [])] or range(g.n)
    out = _outdir(args)
    summary = _explain_files(out, args.tag, Y, fm, g, nodes, args.mode)
    _write(out, "explain.json", _json({**summary, "features": list(fm.names),
                                       "config": _resolved(args, g)}))
    return EXIT_OK


def cmd_linkpred(args) -> int:
    _need_seed(args)
    g, name = _load_graph(args)
    est = _estimator(args, name)
    ests = [base_of(est), est] if (est.gamma or est.delta) else [est]
    reports = compare_link_prediction(g, ests, folds=args.folds, seed=args.seed,
                                      combiner=args.combiner, features=args.features,
                                      dataset=name)
    out = _outdir(args)
    _write(out, "report.json", _json({"reports": [r.to_dict() for r in reports],
                                      "config": _resolved(args, g)}))
    csv_text = reports_to_csv(reports)
    # the seconds column is a diagnostic; keep the data file reproducible
    lines = [",".join(row.split(",")[:-1]) for row in csv_text.splitlines()]
    _write(out, "report.csv", "\n".join(lines) + "\n")
    _write(out, "diagnostics.json", _json({r.method: {"seconds_per_epoch": r.seconds_per_epoch,
                                                      "epoch_seconds": r.epoch_seconds}
                                           for r in reports}))
    for r in reports:
        log.info("%s: AUC %.4f +- %.4f, norm %.3f +- %.3f, %.3f s/epoch", r.method, r.auc_mean,
                 r.auc_se, r.norm_mean, r.norm_se, r.seconds_per_epoch)
    return EXIT_OK


def cmd_ablation(args) -> int:
    _need_seed(args)
    g, name = _load_graph(args)
    args.xm = True
    est = _estimator(args, name)
    if not (est.gamma and est.delta):
        raise ConfigError("ablation needs positive --gamma and --delta")
    seeds = [int(s) for s in np.random.SeedSequence(args.seed).generate_state(args.seeds)]
    res = ablation(g, est, seeds, d=args.dim, features=args.features, dataset=name)
    out = _outdir(args)
    _write(out, "ablation.csv", res.to_csv())
    _write(out, "ablation.json", _json({**res.to_dict(), "config": _resolved(args, g)}))
    _write(out, "diagnostics.json", _json({"epoch_seconds": res.epoch_seconds}))
    for row in res.table():
        log.info("%-13s %.3f +- %.3f", row["config"], row["mean"], row["se"])
    return EXIT_OK


def cmd_demo(args) -> int:
    if args.name not in ("karate", "barbell"):
        raise ConfigError("demo name must be 'karate' or 'barbell'")
    args.builtin, args.input = args.name, None
    args.seed = 0 if args.seed is None else args.seed
    g, name = _load_graph(args)
    out = _outdir(args)
    if args.name == "karate":
        sets = {"structural": None}
        nodes = list(KARATE_NODES)
    else:
        # bridge endpoint of the first clique and an interior clique node
        bridge, inner = g.n // 2 - 1, 0
        sets = {"structural": None, "positional": f"{inner},{g.n - 1}"}
        nodes = [bridge, inner]
    summary = {}
    for set_name, anchors in sets.items():
        args.features = "positional" if anchors else "default"
        args.anchors = anchors
        for tag, xm in (("base", False), ("xm", True)):
            args.xm = xm
            est, fm = _train(args, g, name)
            prefix = tag if len(sets) == 1 else f"{set_name}_{tag}"
            summary[prefix] = _explain_files(out, prefix, est.embedding_, fm, g, nodes, "population")
    args.features, args.anchors = "default", None
    _write(out, "demo.json", _json({"runs": summary, "nodes": [str(g.labels[v]) for v in nodes],
                                    "config": _resolved(args, g)}))
    return EXIT_OK


def cmd_stats(args) -> int:
    g, _ = _load_graph(args)
    stats = graph_stats(g).as_dict()
    text = _json({**stats, "graph_hash": g.content_hash()})
    if args.out:
        _write(_outdir(args), "stats.json", text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xmembed", description="Explainable node embeddings.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=True, out_required=True):
        if graph:
            sp.add_argument("--builtin", choices=sorted(BUILTINS))
            sp.add_argument("--input", help="edge-list file")
            sp.add_argument("--weighted", action="store_true")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--config", help="JSON file; its keys override flags")
        sp.add_argument("--features", default="default",
                        help="'default', 'all', 'positional' or a comma-separated list")
        sp.add_argument("--anchors", help="anchor node labels for positional features")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--seed", type=int)

    def method(sp):
        sp.add_argument("--method", default="line", choices=METHODS)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--xm", action="store_true", help="use the preset XM weights")
        sp.set_defaults(params=None)

    sp = sub.add_parser("features", help="compute sense features")
    common(sp)
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("embed", help="train an embedding")
    common(sp)
    method(sp)
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("explain", help="Explain matrices for a trained embedding")
    common(sp)
    sp.add_argument("--embedding", help="embedding CSV")
    sp.add_argument("--mode", default="population", choices=("population", "per-matrix"))
    sp.add_argument("--nodes", help="comma-separated node labels (default: all)")
    sp.add_argument("--tag", default="run")
    sp.set_defaults(func=cmd_explain)

    sp = sub.add_parser("linkpred", help="link-prediction benchmark (base vs XM)")
    common(sp)
    method(sp)
    sp.add_argument("--folds", type=int, default=3)
    sp.add_argument("--combiner", default="concat", choices=("concat", "hadamard", "average"))
    sp.set_defaults(func=cmd_linkpred)

    sp = sub.add_parser("ablation", help="nuclear norm under the four constraint settings")
    common(sp)
    method(sp)
    sp.add_argument("--d", dest="dim", type=int)
    sp.add_argument("--seeds", type=int, default=5, help="number of seeds")
    sp.set_defaults(func=cmd_ablation)

    sp = sub.add_parser("demo", help="Explain matrices for the showcase graphs")
    sp.add_argument("name", help="karate or barbell")
    common(sp, graph=False)
    method(sp)
    sp.set_defaults(func=cmd_demo, builtin=None, input=None, weighted=False)

    sp = sub.add_parser("stats", help="graph statistics")
    common(sp, out_required=False)
    sp.set_defaults(func=cmd_stats)
    return p


def _apply_config(args) -> None:
    if not args.config:
        return
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if key == "params":
            if not isinstance(value, dict):
                raise ConfigError("'params' must be an object")
            args.params = value
        elif key in ("command", "func") or not hasattr(args, key):
            raise ConfigError(f"unknown config key {key!r}")
        else:
            setattr(args, key, value)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        _apply_config(args)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return args.func(args)
    except (GraphParseError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ArithmeticError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
