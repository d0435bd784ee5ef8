"""Command-line client for the basket-completion service.

Every subcommand talks HTTP: against a remote server when ``--server`` is
given, otherwise against the service app mounted in-process, so the same
code path serves both one-off local runs and a deployed instance.  Defaults
can be supplied via ``--config FILE`` (one ``key=value`` per line, keys named
like the long flags); explicit flags win over the config file.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx


def _parse_hidden(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    return [int(part) for part in text.split(",")]


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# how config-file strings coerce into flag values, per destination name
CONFIG_COERCERS = {
    "baskets": str,
    "format": str,
    "features": str,
    "hidden": _parse_hidden,
    "k": int,
    "alpha": float,
    "batch_size": int,
    "max_iter": int,
    "lr": float,
    "rel_tol": float,
    "check_period": int,
    "seed": int,
    "workers": int,
    "test_count": int,
    "val_count": int,
    "max_basket_size": int,
    "hash_width": int,
    "out": str,
    "log": str,
    "model": str,
    "metric": str,
    "split": _parse_bool,
    "out_prefix": str,
    "basket": str,
    "top_k": int,
    "kind": str,
    "n": int,
    "count": int,
    "truth": str,
    "host": str,
    "port": int,
}


def read_config(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SystemExit(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            dest = key.strip().replace("-", "_")
            if dest not in CONFIG_COERCERS:
                raise SystemExit(f"{path}:{lineno}: unknown config key {key.strip()!r}")
            try:
                values[dest] = CONFIG_COERCERS[dest](raw.strip())
            except ValueError as exc:
                raise SystemExit(f"{path}:{lineno}: {exc}")
    return values


# flags that must be present after merging config-file defaults
REQUIRED = {
    "train": ("baskets",),
    "eval": ("model", "baskets"),
    "predict": ("model", "basket"),
    "export": ("model", "out"),
}


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="dppnet",
        description="Train, evaluate, and query DPP basket-completion models.",
    )
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    parser.add_argument("--config", help="key=value defaults file, overridden by flags")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a model and write a model file")
    train.add_argument("--baskets", help="basket file (required)")
    train.add_argument("--format", choices=["lines", "csv"], default="lines")
    train.add_argument("--features", help="optional per-item feature csv")
    train.add_argument(
        "--hidden",
        type=_parse_hidden,
        default=[],
        help='comma-separated hidden widths, e.g. "400,300,200"; empty for the shallow model',
    )
    train.add_argument("--k", type=int, default=10, help="embedding dimensions")
    train.add_argument("--alpha", type=float, help="regularization weight (default by depth)")
    train.add_argument("--batch-size", type=int, default=200)
    train.add_argument("--max-iter", type=int, default=1000)
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--rel-tol", type=float, default=1e-4, help="convergence threshold")
    train.add_argument("--check-period", type=int, default=10, help="validation check period")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--workers", type=int, default=1)
    train.add_argument("--test-count", type=int, default=2000)
    train.add_argument("--val-count", type=int, default=300)
    train.add_argument("--max-basket-size", type=int, default=100)
    train.add_argument("--hash-width", type=int, default=64)
    train.add_argument("--out", default="model.json", help="model file to write")
    train.add_argument("--log", help="training log csv (default: <out>.log.csv)")

    evaluate = sub.add_parser("eval", help="score a model with MPR and/or AUC")
    evaluate.add_argument("--model")
    evaluate.add_argument("--baskets")
    evaluate.add_argument("--format", choices=["lines", "csv"], default="lines")
    evaluate.add_argument("--metric", choices=["mpr", "auc", "both"], default="both")
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument(
        "--split",
        action="store_true",
        help="evaluate on the file's test split instead of the whole file",
    )
    evaluate.add_argument("--test-count", type=int, default=2000)
    evaluate.add_argument("--val-count", type=int, default=300)
    evaluate.add_argument("--out-prefix", help="report file prefix (default: <model>.eval)")

    predict = sub.add_parser("predict", help="rank next items for a basket")
    predict.add_argument("--model")
    predict.add_argument("--basket", help='comma-separated item ids, "id1,id2"')
    predict.add_argument("--top-k", type=int, default=10)

    synth = sub.add_parser("synth", help="write a synthetic basket dataset")
    synth.add_argument("--kind", choices=["planted", "xor"], default="planted")
    synth.add_argument("--n", type=int, default=12, help="catalog size")
    synth.add_argument("--k", type=int, default=3, help="planted embedding dimensions")
    synth.add_argument("--count", type=int, default=1000, help="number of baskets")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--format", choices=["lines", "csv"], default="lines")
    synth.add_argument("--out", default="baskets.txt")
    synth.add_argument("--truth", help="ground-truth sidecar (default: <out>.truth.json)")

    export = sub.add_parser("export", help="write embeddings as csv")
    export.add_argument("--model")
    export.add_argument("--out")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    commands = {
        "train": train,
        "eval": evaluate,
        "predict": predict,
        "synth": synth,
        "export": export,
        "serve": serve,
    }
    return parser, commands


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _call(client: httpx.Client, method: str, path: str, payload: dict | None = None) -> dict:
    response = client.request(method, path, json=payload)
    if response.status_code >= 300:
        try:
            detail = response.json().get("detail", response.text)
        except json.JSONDecodeError:
            detail = response.text
        print(f"error: {detail}", file=sys.stderr)
        raise SystemExit(1)
    return response.json()


def cmd_train(client, args) -> None:
    payload = {
        "baskets_path": args.baskets,
        "basket_format": args.format,
        "features_path": args.features,
        "embedding_dim": args.k,
        "hidden_widths": args.hidden,
        "alpha": args.alpha,
        "batch_size": args.batch_size,
        "max_iterations": args.max_iter,
        "learning_rate": args.lr,
        "convergence_rel_tol": args.rel_tol,
        "validation_check_period": args.check_period,
        "seed": args.seed,
        "workers": args.workers,
        "test_count": args.test_count,
        "val_count": args.val_count,
        "max_basket_size": args.max_basket_size,
        "hash_width": args.hash_width,
        "output_path": args.out,
        "log_path": args.log,
    }
    result = _call(client, "POST", "/train", payload)
    print(f"model written to {result['model_path']}")
    print(f"training log written to {result['log_path']}")
    print(f"iterations: {result['iterations']}")
    print(f"final validation log-likelihood: {result['final_val_loglik']}")


def cmd_eval(client, args) -> None:
    prefix = args.out_prefix or f"{args.model}.eval"
    payload = {
        "model_path": args.model,
        "baskets_path": args.baskets,
        "basket_format": args.format,
        "metric": args.metric,
        "seed": args.seed,
        "use_split": args.split,
        "test_count": args.test_count,
        "val_count": args.val_count,
        "output_prefix": prefix,
    }
    result = _call(client, "POST", "/evaluate", payload)
    for report in result["reports"]:
        for row in report["segments"]:
            print(
                f"{report['metric']} {row['segment']}: {row['estimate']:.4f} "
                f"[{row['ci_low']:.4f}, {row['ci_high']:.4f}] (n={row['count']})"
            )
    for path in result["report_files"]:
        print(f"wrote {path}")


def cmd_predict(client, args) -> None:
    basket = [item.strip() for item in args.basket.split(",") if item.strip()]
    payload = {"basket": basket, "top_k": args.top_k, "model_path": args.model}
    result = _call(client, "POST", "/predict", payload)
    for row in result["predictions"]:
        print(f"{row['item_id']}\t{row['probability']:.6f}")


def cmd_synth(client, args) -> None:
    payload = {
        "kind": args.kind,
        "catalog_size": args.n,
        "embedding_dim": args.k,
        "basket_count": args.count,
        "seed": args.seed,
        "basket_format": args.format,
        "output_path": args.out,
        "truth_path": args.truth,
    }
    result = _call(client, "POST", "/synthesize", payload)
    print(f"baskets written to {result['output_path']}")
    print(f"ground truth written to {result['truth_path']}")


def cmd_export(client, args) -> None:
    payload = {"model_path": args.model, "output_path": args.out}
    result = _call(client, "POST", "/export", payload)
    print(f"wrote {result['rows']} x {result['columns']} embeddings to {result['output_path']}")


def main(argv: list[str] | None = None) -> int:
    parser, commands = build_parser()
    bootstrap, _ = parser.parse_known_args(argv)
    if getattr(bootstrap, "config", None):
        defaults = read_config(bootstrap.config)
        # subparsers parse into a fresh namespace, so defaults go on each one
        for command in commands.values():
            command.set_defaults(**defaults)
    args = parser.parse_args(argv)
    for dest in REQUIRED.get(args.command, ()):
        if getattr(args, dest, None) in (None, ""):
            commands[args.command].error(f"--{dest.replace('_', '-')} is required")

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "predict": cmd_predict,
        "synth": cmd_synth,
        "export": cmd_export,
    }
    with make_client(args.server) as client:
        handlers[args.command](client, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
