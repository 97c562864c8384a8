"""Command-line entry point for every pipeline stage.

Exit codes are part of the contract: 0 success, 2 usage error, 3 data or
validation error, 4 internal error. All randomness flows through explicit
``--seed`` flags so any run can be reproduced byte-for-byte.

Subcommands: gen-dataset, split, fit, predict, evaluate, tally,
adjudicate, reconcile, anomalies, simulate, serve.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import SlipCountError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _read_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _apply_config_defaults(args: argparse.Namespace, config: dict) -> None:
    # flags win over config file values; config wins over built-in defaults
    for key, value in config.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in args._explicit:
            setattr(args, attr, value)


def _explicit_flags(argv: list[str]) -> set[str]:
    """Destinations named on the command line (so they beat config values)."""
    explicit = set()
    for tok in argv:
        if tok.startswith("--"):
            explicit.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    return explicit


def _write_or_print(doc: dict | list, out: str | None, as_json: bool, text: str | None = None):
    rendered = json.dumps(doc, indent=2)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(rendered + "\n", encoding="utf-8")
    if as_json:
        print(rendered)
    elif text is not None:
        print(text)


# subcommand implementations ---------------------------------------------------


def _cmd_gen_dataset(args) -> int:
    from .augment import AugmentationSpec
    from .dataset import build_labeled_dataset, save_dataset
    from .registry import SymbolRegistry

    registry = SymbolRegistry.load(args.registry)
    spec = AugmentationSpec(noise_seed=args.seed)
    ds = build_labeled_dataset(registry, spec)
    manifest = save_dataset(ds, args.out)
    doc = {
        "parties": len(registry),
        "images": len(ds),
        "manifest": str(manifest),
        "seed": args.seed,
    }
    _write_or_print(doc, None, args.format == "json",
                    f"wrote {len(ds)} images for {len(registry)} parties -> {args.out}")
    return EXIT_OK


def _cmd_split(args) -> int:
    from .dataset import MANIFEST_NAME, save_manifest, stratified_test_positions

    ds_dir = Path(args.dataset)
    manifest = ds_dir / MANIFEST_NAME if ds_dir.is_dir() else ds_dir
    records = [
        json.loads(line)
        for line in manifest.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    test_pos = stratified_test_positions(
        [r["label"] for r in records], args.train_fraction, args.seed
    )
    out_dir = Path(args.out) if args.out else manifest.parent
    train_path = save_manifest(
        [r for i, r in enumerate(records) if i not in test_pos], out_dir / "train.jsonl"
    )
    test_path = save_manifest(
        [r for i, r in enumerate(records) if i in test_pos], out_dir / "test.jsonl"
    )
    doc = {
        "train": str(train_path),
        "test": str(test_path),
        "train_items": len(records) - len(test_pos),
        "test_items": len(test_pos),
        "seed": args.seed,
    }
    _write_or_print(doc, None, args.format == "json",
                    f"train {doc['train_items']} -> {train_path}; test {doc['test_items']} -> {test_path}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    from .classifier import fit, save_model
    from .dataset import load_dataset

    train = load_dataset(args.train)
    model = fit(train, softmax_temperature=args.temperature)
    save_model(model, args.out)
    doc = {"classes": len(model.centroids), "model": args.out, "created_from": model.created_from}
    _write_or_print(doc, None, args.format == "json",
                    f"fit {doc['classes']} classes -> {args.out}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    from .classifier import load_model, predict
    from .images import load_image

    model = load_model(args.model)
    # validate everything before printing anything: no partial output
    missing = [p for p in args.images if not Path(p).is_file()]
    if missing:
        raise SlipCountError(f"missing image file(s): {', '.join(missing)}")
    rasters = [(p, load_image(p)) for p in args.images]
    results = []
    for path, raster in rasters:
        pred = predict(model, raster)
        results.append(
            {
                "image": path,
                "party_id": pred.party_id,
                "confidence": pred.confidence,
                "margin": pred.margin,
                "top_k": [[p, s] for p, s in pred.top_k],
            }
        )
    if args.format == "json":
        print(json.dumps(results, indent=2))
    else:
        for r in results:
            print(f"{r['image']}: {r['party_id']} (confidence {r['confidence']:.4f})")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from .classifier import evaluate, load_model, metrics_report
    from .dataset import load_dataset

    model = load_model(args.model)
    test = load_dataset(args.test)
    metrics = evaluate(model, test)
    report = metrics_report(metrics, args.recall_threshold)
    _write_or_print(report, args.report, args.format == "json",
                    f"accuracy {metrics.accuracy:.4f} on {len(test)} items; "
                    f"low-recall classes: {report['low_recall_classes'] or 'none'}")
    return EXIT_OK


def _cmd_tally(args) -> int:
    from .classifier import load_model
    from .tally import count_slips, load_slip_manifest, tally_to_dict

    model = load_model(args.model)
    slips = load_slip_manifest(args.manifest)
    tally = count_slips(model, slips, args.threshold)
    doc = tally_to_dict(tally)
    _write_or_print(doc, args.out, args.format == "json",
                    f"EVM {tally.evm_id}: {tally.total_slips} slips, "
                    f"{sum(tally.auto_counts.values())} auto, "
                    f"{len(tally.review_queue)} queued for review")
    return EXIT_OK


def _cmd_adjudicate(args) -> int:
    from .tally import apply_adjudication, tally_from_dict, tally_to_dict

    tally = tally_from_dict(json.loads(Path(args.tally).read_text(encoding="utf-8")))
    n = 0
    for line in Path(args.decisions).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        apply_adjudication(tally, rec["slip_id"], rec["decision"])
        n += 1
    doc = tally_to_dict(tally)
    _write_or_print(doc, args.out, args.format == "json",
                    f"applied {n} decisions; {len(tally.review_queue)} still queued")
    return EXIT_OK


def _cmd_reconcile(args) -> int:
    from .tally import reconcile, reconciliation_to_dict, tally_from_dict

    tally = tally_from_dict(json.loads(Path(args.tally).read_text(encoding="utf-8")))
    evm_counts = json.loads(Path(args.evm_counts).read_text(encoding="utf-8"))
    result = reconcile(tally, {str(p): int(n) for p, n in evm_counts.items()})
    doc = reconciliation_to_dict(result)
    _write_or_print(doc, args.out, args.format == "json",
                    f"EVM {result.evm_id}: {result.status}; final counts follow paper trail")
    return EXIT_OK


def _cmd_anomalies(args) -> int:
    from .tally import (
        anomalies_to_dicts,
        detect_rate_anomalies,
        load_slip_manifest,
    )

    slips = load_slip_manifest(args.manifest)
    stamps = sorted(s.timestamp for s in slips if s.timestamp is not None)
    windows = detect_rate_anomalies(stamps, args.limit, args.window_seconds)
    doc = anomalies_to_dicts(windows)
    _write_or_print(doc, args.out, args.format == "json",
                    f"{len(windows)} anomalous window(s) over {len(stamps)} stamped slips")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    from .simulate import (
        PRESETS,
        config_from_dict,
        load_config,
        report_table,
        report_to_dict,
        simulate_counting,
        with_overrides,
    )

    if args.preset:
        if args.preset not in PRESETS:
            raise SlipCountError(
                f"unknown preset {args.preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        config = PRESETS[args.preset]
    elif args.scenario:
        config = load_config(args.scenario)
    else:
        raise SlipCountError("simulate needs --preset or --scenario")
    overrides = {}
    for item in args.set or []:
        key, _, value = item.partition("=")
        if not _:
            raise SlipCountError(f"override must look like key=value, got {item!r}")
        overrides[key.replace("-", "_")] = json.loads(value)
    if overrides:
        base = {**_config_dict(config), **overrides}
        config = config_from_dict(base)
    report = simulate_counting(config)
    doc = report_to_dict(report)
    _write_or_print(doc, args.out, args.format == "json", report_table(report))
    return EXIT_OK


def _config_dict(config) -> dict:
    from .simulate import config_to_dict

    return config_to_dict(config)


def _cmd_serve(args) -> int:
    import os

    from .service import serve

    def pick(flag, env_name, fallback, cast):
        if flag is not None:
            return cast(flag)
        env = os.environ.get(env_name)
        return cast(env) if env is not None else fallback

    model_path = pick(args.model, "SLIPCOUNT_MODEL", None, str)
    journal = pick(args.journal, "SLIPCOUNT_JOURNAL", None, str)
    port = pick(args.port, "SLIPCOUNT_PORT", 8000, int)
    threshold = pick(args.threshold, "SLIPCOUNT_THRESHOLD", 0.80, float)
    if not model_path or not journal:
        raise SlipCountError("serve needs --model and --journal (or env equivalents)")
    serve(
        model_path=model_path,
        journal_path=journal,
        port=port,
        threshold=threshold,
        registry_dir=args.registry,
        console_dist=args.console_dist,
        host=args.host,
    )
    return EXIT_OK


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slipcount",
        description="Slip-image counting and audit pipeline",
    )
    parser.add_argument("--version", action="version", version=f"slipcount {__version__}")
    parser.add_argument("--config", help="JSON config file; explicit flags win over it")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--format", choices=("text", "json"), default="text",
                       help="machine-readable output with --format json")
        return p

    p = add("gen-dataset", _cmd_gen_dataset, "synthesize the augmented labeled dataset")
    p.add_argument("--registry", required=True, help="registry directory (manifest or images)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0, help="noise seed (reproducible output)")

    p = add("split", _cmd_split, "stratified train/test split of a dataset")
    p.add_argument("--dataset", required=True, help="dataset directory or manifest")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for train.jsonl/test.jsonl (default: beside manifest)")

    p = add("fit", _cmd_fit, "fit the nearest-centroid reference model")
    p.add_argument("--train", required=True, help="training manifest or dataset directory")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--temperature", type=float, default=0.05)

    p = add("predict", _cmd_predict, "classify slip images")
    p.add_argument("--model", required=True)
    p.add_argument("images", nargs="+", help="image files (PNG/JPG/JPEG)")

    p = add("evaluate", _cmd_evaluate, "accuracy/recall/confusion on a test split")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True, help="test manifest or dataset directory")
    p.add_argument("--report", help="write the metrics report JSON here")
    p.add_argument("--recall-threshold", type=float, default=0.80)

    p = add("tally", _cmd_tally, "count a one-machine slip batch")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True, help="slip batch manifest (JSONL)")
    p.add_argument("--threshold", type=float, default=0.80)
    p.add_argument("--out", help="write the tally sheet JSON here")

    p = add("adjudicate", _cmd_adjudicate, "apply offline decisions to a tally sheet")
    p.add_argument("--tally", required=True, help="tally sheet JSON")
    p.add_argument("--decisions", required=True,
                   help="JSONL of {slip_id, decision}; decision is a party_id or REJECTED")
    p.add_argument("--out", help="write the updated tally here")

    p = add("reconcile", _cmd_reconcile, "reconcile a tally against machine counts")
    p.add_argument("--tally", required=True)
    p.add_argument("--evm-counts", required=True, help="JSON map party_id -> count")
    p.add_argument("--out", help="write the reconciliation result here")

    p = add("anomalies", _cmd_anomalies, "timestamp rate-anomaly windows for a batch")
    p.add_argument("--manifest", required=True)
    p.add_argument("--limit", type=int, default=8)
    p.add_argument("--window-seconds", type=float, default=60.0)
    p.add_argument("--out")

    p = add("simulate", _cmd_simulate, "counting-day throughput projection")
    p.add_argument("--preset", help="named scenario (e.g. paper-state)")
    p.add_argument("--scenario", help="scenario config JSON file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a scenario field (repeatable)")
    p.add_argument("--out")

    p = add("serve", _cmd_serve, "run the adjudication HTTP service")
    p.add_argument("--model", help="model file (env SLIPCOUNT_MODEL)")
    p.add_argument("--journal", help="journal path (env SLIPCOUNT_JOURNAL)")
    p.add_argument("--port", type=int, help="listen port (env SLIPCOUNT_PORT)")
    p.add_argument("--threshold", type=float, help="confidence threshold (env SLIPCOUNT_THRESHOLD)")
    p.add_argument("--registry", help="registry directory for party names")
    p.add_argument("--console-dist", help="static console assets to mount at /console")
    p.add_argument("--host", default="127.0.0.1")

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    args._explicit = _explicit_flags(argv)
    try:
        _apply_config_defaults(args, _read_config(args.config))
        return args.func(args)
    except SlipCountError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
