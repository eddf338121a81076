"""Command-line entry point.

Subcommands: train, eval, gradcheck, oracle, bench, inspect-checkpoint.
Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 failed check.

Heavy imports happen inside handlers so that --help stays fast and so the
bench subcommand can pin BLAS to one thread before numpy loads.
"""

import argparse
import json
import logging
import os
import sys

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4

log = logging.getLogger("samsa")

# flag name -> (section, key); every schema key is reachable from the CLI
FLAG_MAP = {
    "task": ("task", "kind"),
    "n": ("task", "n"),
    "vocab": ("task", "vocab"),
    "min_nodes": ("task", "min_nodes"),
    "max_nodes": ("task", "max_nodes"),
    "n_train": ("task", "n_train"),
    "n_val": ("task", "n_val"),
    "n_test": ("task", "n_test"),
    "cache_dir": ("task", "cache_dir"),
    "attention": ("model", "attention"),
    "depth": ("model", "depth"),
    "d_model": ("model", "d_model"),
    "d_ffn": ("model", "d_ffn"),
    "heads": ("model", "n_heads"),
    "k": ("model", "k"),
    "mode": ("model", "mode"),
    "locality": ("model", "locality"),
    "tau": ("model", "tau"),
    "dropout": ("model", "p_dropout"),
    "droppath": ("model", "p_droppath"),
    "score_on_raw": ("model", "score_on_raw"),
    "lr": ("train", "lr"),
    "wd": ("train", "weight_decay"),
    "clip": ("train", "clip_norm"),
    "steps": ("train", "steps"),
    "warmup": ("train", "warmup_steps"),
    "batch_size": ("train", "batch_size"),
    "eval_every": ("train", "eval_every"),
    "log_every": ("train", "log_every"),
    "early_stop_acc": ("train", "early_stop_acc"),
    "seed": ("run", "seed"),
    "precision": ("run", "precision"),
    "out": ("run", "out_dir"),
    "verbose": ("run", "verbose"),
}


def _add_config_flags(parser):
    from .config import SCHEMA

    parser.add_argument("--config", help="INI config file; flags override it")
    for flag, (section, key) in FLAG_MAP.items():
        typ, default, help_text = SCHEMA[section][key]
        kwargs = {"help": f"[{section}.{key}] {help_text} (default {default})"}
        if typ is bool:
            kwargs["choices"] = ["true", "false"]
        else:
            kwargs["type"] = str
        parser.add_argument(f"--{flag.replace('_', '-')}", dest=f"cfg_{flag}", **kwargs)


def _collect_config(args):
    from .config import load_config

    overrides = {}
    for flag, target in FLAG_MAP.items():
        value = getattr(args, f"cfg_{flag}", None)
        if value is not None:
            overrides[target] = value
    return load_config(path=args.config, overrides=overrides)


def _build_everything(cfg):
    """Instantiate task data and model from a RunConfig."""
    from .attention import AttentionConfig, Model, ModelConfig
    from .tasks import TaskSpec, generate_task, task_model_settings, task_n_out

    kind = cfg.get("task", "kind")
    spec = TaskSpec(
        kind=kind,
        n=cfg.get("task", "n"),
        vocab=cfg.get("task", "vocab"),
        min_nodes=cfg.get("task", "min_nodes"),
        max_nodes=cfg.get("task", "max_nodes"),
        n_train=cfg.get("task", "n_train"),
        n_val=cfg.get("task", "n_val"),
        n_test=cfg.get("task", "n_test"),
        seed=cfg.get("run", "seed"),
    )
    splits = generate_task(spec, cache_dir=cfg.get("task", "cache_dir") or None)
    layer = AttentionConfig(
        d_model=cfg.get("model", "d_model"),
        n_heads=cfg.get("model", "n_heads"),
        k=cfg.get("model", "k"),
        d_ffn=cfg.get("model", "d_ffn"),
        mode=cfg.get("model", "mode"),
        locality=cfg.get("model", "locality"),
        tau=cfg.get("model", "tau"),
        p_dropout=cfg.get("model", "p_dropout"),
        p_droppath=cfg.get("model", "p_droppath"),
        score_on_raw=cfg.get("model", "score_on_raw"),
    )
    settings = task_model_settings(kind, vocab=spec.vocab)
    mcfg = ModelConfig(
        attention=cfg.get("model", "attention"),
        depth=cfg.get("model", "depth"),
        layer=layer,
        n_out=task_n_out(kind, vocab=spec.vocab),
        **settings,
    )
    model = Model(mcfg, seed=cfg.get("run", "seed"))
    return spec, splits, mcfg, model


def _train_config(cfg):
    from .train import TrainConfig

    return TrainConfig(
        steps=cfg.get("train", "steps"),
        batch_size=cfg.get("train", "batch_size"),
        lr=cfg.get("train", "lr"),
        weight_decay=cfg.get("train", "weight_decay"),
        clip_norm=cfg.get("train", "clip_norm"),
        warmup_steps=cfg.get("train", "warmup_steps"),
        eval_every=cfg.get("train", "eval_every"),
        log_every=cfg.get("train", "log_every"),
        seed=cfg.get("run", "seed"),
        early_stop_acc=cfg.get("train", "early_stop_acc"),
    )


def cmd_train(args):
    from .checkpoint import save_checkpoint
    from .config import config_hash, echo_config
    from .tensor import set_default_dtype
    from .train import TrainingDiverged, train, write_summary_json

    cfg = _collect_config(args)
    set_default_dtype("float64" if cfg.get("run", "precision") == 64 else "float32")
    out_dir = cfg.get("run", "out_dir")
    os.makedirs(out_dir, exist_ok=True)
    echo_config(cfg, os.path.join(out_dir, "effective-config.ini"))

    spec, splits, mcfg, model = _build_everything(cfg)
    tcfg = _train_config(cfg)
    try:
        records, summary = train(model, splits, tcfg,
                                 metrics_path=os.path.join(out_dir, "metrics.csv"))
    except TrainingDiverged as exc:
        log.error("training diverged: %s", exc)
        return EXIT_NUMERIC
    summary["config_hash"] = config_hash(cfg)
    summary["task"] = spec.kind
    write_summary_json(summary, os.path.join(out_dir, "summary.json"))
    meta = {"config": cfg.as_dict(), "seed": cfg.get("run", "seed"),
            "task": spec.kind}
    save_checkpoint(os.path.join(out_dir, "model.ckpt"), model.parameters(), meta)
    if cfg.get("run", "verbose"):
        print(f"noise draws: {summary['noise_draws']}")
    print(json.dumps(summary, indent=2, sort_keys=True, default=float))
    return EXIT_OK


def cmd_eval(args):
    from .checkpoint import load_into_model, read_header
    from .config import RunConfig, default_config
    from .tensor import set_default_dtype
    from .train import evaluate

    header = read_header(args.checkpoint)
    stored = header["meta"].get("config")
    cfg = default_config()
    if stored:
        for section, keys in stored.items():
            for key, value in keys.items():
                cfg.set(section, key, value)
    if args.seed is not None:
        cfg.set("run", "seed", args.seed)
    set_default_dtype("float64" if cfg.get("run", "precision") == 64 else "float32")
    spec, splits, mcfg, model = _build_everything(cfg)
    load_into_model(model, args.checkpoint)
    loss, metric = evaluate(model, splits[args.split], seed=cfg.get("run", "seed"))
    result = {"split": args.split, "loss": loss, "metric": metric,
              "metric_kind": "accuracy" if model.cfg.head == "classify" else "mae"}
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args):
    from .tensor import precision
    from .suites import gradcheck_suite

    with precision(64):
        reports = gradcheck_suite(args.target, n=args.n, k=args.k, seed=args.seed)
    payload = {name: rep.as_dict() for name, rep in reports.items()}
    ok = all(rep.passed for rep in reports.values())
    payload["passed"] = ok
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_oracle(args):
    from .suites import oracle_sweep

    result = oracle_sweep(n_max=args.n_max, k_max=args.k_max,
                          trials=args.trials, seed=args.seed)
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK if result["agreements"] == result["trials"] else EXIT_CHECK


def cmd_bench(args):
    from .suites import bench_kernels, bench_models

    sizes = [int(v) for v in args.n.split(",")]
    report = bench_models(sizes, k=args.k, d_model=args.d_model, heads=args.heads,
                          depth=args.depth, repeats=args.repeats,
                          compare_full=args.compare == "full", seed=args.seed)
    if args.kernels:
        report["kernels"] = bench_kernels(repeats=args.repeats, seed=args.seed)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_inspect(args):
    from .checkpoint import read_header

    print(json.dumps(read_header(args.checkpoint), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="samsa",
        description="Sampling self-attention: train, verify, and benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a synthetic task")
    _add_config_flags(p_train)
    p_train.set_defaults(handler=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", default="test", choices=["train", "val", "test"])
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.set_defaults(handler=cmd_eval)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p_grad.add_argument("--target", default="all",
                        choices=["all", "primitives", "sampler-soft", "sampler-hard",
                                 "graph", "model"])
    p_grad.add_argument("--n", type=int, default=16)
    p_grad.add_argument("--k", type=int, default=4)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(handler=cmd_gradcheck)

    p_oracle = sub.add_parser("oracle", help="top-k selection vs brute-force enumeration")
    p_oracle.add_argument("--n-max", type=int, default=12)
    p_oracle.add_argument("--k-max", type=int, default=6)
    p_oracle.add_argument("--trials", type=int, default=500)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.set_defaults(handler=cmd_oracle)

    p_bench = sub.add_parser("bench", help="runtime scaling and speed ratios")
    p_bench.add_argument("--n", default="512,1024,2048,4096",
                         help="comma-separated token counts")
    p_bench.add_argument("--k", type=int, default=128)
    p_bench.add_argument("--d-model", type=int, default=64)
    p_bench.add_argument("--heads", type=int, default=4)
    p_bench.add_argument("--depth", type=int, default=1)
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.add_argument("--compare", default="full", choices=["full", "none"])
    p_bench.add_argument("--kernels", action="store_true",
                         help="also compare compiled vs numpy kernels")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", help="also write the JSON report here")
    p_bench.set_defaults(handler=cmd_bench)

    p_inspect = sub.add_parser("inspect-checkpoint", help="print a checkpoint header")
    p_inspect.add_argument("checkpoint")
    p_inspect.set_defaults(handler=cmd_inspect)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] == "bench":
        # stable timing: pin BLAS to one thread before numpy is imported
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, "1")
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:  # config errors exit 2, everything else re-raises
        from .config import ConfigError

        if isinstance(exc, ConfigError):
            log.error("config error: %s", exc)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
