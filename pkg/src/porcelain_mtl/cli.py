"""Command-line entry point: prepare | synth | train | evaluate | compare | report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import KEYS, ExperimentConfig, parse_config
from .data import SplitAssignment, generate_synthetic_dataset, load_manifest, split_dataset
from .data.transforms import PreprocessSpec
from .errors import InvalidValue, PorcelainError, UnknownCommand
from .metrics import ReportRow, evaluate_model, load_reports, merge_reports, render_tables, save_reports
from .taxonomy import build_taxonomy, label_histogram
from .train import export_curves, fit, read_epoch_log, run_ablation, run_id

log = logging.getLogger("porcelain_mtl")

COMMANDS = ("prepare", "synth", "train", "evaluate", "compare", "report")


def _require(cfg: ExperimentConfig, *keys: str) -> None:
    for k in keys:
        if getattr(cfg, k) is None:
            raise InvalidValue(k, None, "required for this command")


def _records_and_split(cfg: ExperimentConfig):
    taxonomy = build_taxonomy()
    records = load_manifest(cfg.manifest, taxonomy)
    return records, split_dataset(records, cfg.split_seed, cfg.split_ratios)


def cmd_prepare(cfg: ExperimentConfig) -> dict:
    _require(cfg, "manifest", "output_dir")
    taxonomy = build_taxonomy()
    records, splits = _records_and_split(cfg)
    split_path = splits.save(cfg.output_dir / "split.txt")
    hist = label_histogram(taxonomy, records)
    lines = ["task\tcategory\tcount"]
    for t in taxonomy.tasks:
        lines += [f"{t.name}\t{name}\t{int(n)}" for name, n in zip(t.categories, hist[t.name])]
    (cfg.output_dir / "histogram.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (cfg.output_dir / "taxonomy.txt").write_text(taxonomy.to_text(), encoding="utf-8")
    return {"records": len(records), "split": str(split_path), "sizes": list(splits.sizes)}


def cmd_synth(cfg: ExperimentConfig) -> dict:
    _require(cfg, "output_dir")
    path = generate_synthetic_dataset(cfg.n_samples, cfg.synth_seed, cfg.synth_dir, cfg.synth_side)
    return {"manifest": str(path), "n_samples": cfg.n_samples}


def _fit_one(cfg: ExperimentConfig, arch: str, splits, records) -> str:
    tc = cfg.train_config(arch)
    art = fit(tc, splits, records, cfg.runs_dir / run_id(tc, splits.seed))
    return str(art.run_dir)


def cmd_train(cfg: ExperimentConfig) -> dict:
    _require(cfg, "manifest", "output_dir")
    if cfg.ablation:
        return cmd_compare(cfg)
    records, splits = _records_and_split(cfg)
    if cfg.parallel and len(cfg.arch) > 1:
        with ProcessPoolExecutor(max_workers=len(cfg.arch)) as pool:
            futures = [pool.submit(_fit_one, cfg, a, splits, records) for a in cfg.arch]
            runs = [f.result() for f in futures]
    else:
        runs = [_fit_one(cfg, a, splits, records) for a in cfg.arch]
    return {"runs": runs}


def _evaluate_run(run_dir: Path, records) -> list[ReportRow]:
    taxonomy = build_taxonomy()
    model = load_checkpoint(run_dir, taxonomy)
    splits = SplitAssignment.load(run_dir / "split.txt")
    pre = PreprocessSpec(target_side=model.spec.input_side)
    test = evaluate_model(model, splits.subset(records, "test"), pre, taxonomy)
    val = evaluate_model(model, splits.subset(records, "val"), pre, taxonomy)
    rows = []
    for task, rep in test.items():
        rep.matrix.save(run_dir / f"confusion_{task}.csv")
        rows.append(ReportRow(model.spec.arch, model.spec.pretrained, task, rep, val[task].accuracy, run_dir.name))
    return rows


def _run_dirs(cfg: ExperimentConfig) -> list[Path]:
    if cfg.run_dir is not None:
        return [cfg.run_dir]
    if not cfg.runs_dir.is_dir():
        return []
    return sorted(
        d for d in cfg.runs_dir.iterdir()
        if (d / "best.ckpt").exists() and d.name.split("-", 1)[0] in cfg.arch
    )


def _merge_into_reports(cfg: ExperimentConfig, rows: list[ReportRow]) -> Path:
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.reports_dir / "metrics.jsonl"
    existing = load_reports(path) if path.exists() else []
    return save_reports(merge_reports(existing, rows), path)


def cmd_evaluate(cfg: ExperimentConfig) -> dict:
    _require(cfg, "manifest", "output_dir")
    records = load_manifest(cfg.manifest, build_taxonomy())
    dirs = _run_dirs(cfg)
    if not dirs:
        raise InvalidValue("run_dir", None, f"no trained runs found under {cfg.runs_dir}")
    rows = [r for d in dirs for r in _evaluate_run(d, records)]
    path = _merge_into_reports(cfg, rows)
    return {"evaluated": [d.name for d in dirs], "reports": str(path)}


def cmd_compare(cfg: ExperimentConfig) -> dict:
    _require(cfg, "manifest", "output_dir")
    records, splits = _records_and_split(cfg)
    rows, runs = [], []
    for arch in cfg.arch:
        result = run_ablation(cfg.train_config(arch), splits, records, cfg.output_dir)
        for art in (result.pretrained, result.scratch):
            _evaluate_run(art.run_dir, records)  # confusion matrices next to each checkpoint
        rows += result.rows
        runs += [result.pretrained.run_dir.name, result.scratch.run_dir.name]
    path = _merge_into_reports(cfg, rows)
    return {"runs": runs, "reports": str(path)}


def cmd_report(cfg: ExperimentConfig) -> dict:
    _require(cfg, "output_dir")
    path = cfg.reports_dir / "metrics.jsonl"
    if not path.exists():
        raise InvalidValue("output_dir", str(cfg.output_dir), "no metrics.jsonl; run evaluate or compare first")
    tables = render_tables(load_reports(path))
    out = {}
    for name, text in tables.items():
        p = cfg.reports_dir / f"{name}.md"
        p.write_text(text, encoding="utf-8")
        out[name] = str(p)
    series = {}
    if cfg.runs_dir.is_dir():
        for d in sorted(cfg.runs_dir.iterdir()):
            if (d / "epochs.log").exists():
                series[d.name] = read_epoch_log(d / "epochs.log")
    if series:
        out["curves"] = str(export_curves(series, cfg.reports_dir / "curves.csv"))
    return out


HANDLERS = {
    "prepare": cmd_prepare,
    "synth": cmd_synth,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "report": cmd_report,
}


def dispatch_command(command: str, cfg: ExperimentConfig) -> dict:
    if command not in HANDLERS:
        raise UnknownCommand(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    return HANDLERS[command](cfg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="porcelain-mtl", description=__doc__)
    p.add_argument("command", help=" | ".join(COMMANDS))
    p.add_argument("--config", type=Path, help="flat key=value config file")
    p.add_argument("-v", "--verbose", action="store_true")
    for key in KEYS:
        flag = "--" + key.replace("_", "-")
        if key in ("pretrained", "freeze_backbone", "ablation", "deterministic", "parallel"):
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument(flag, dest=key, default=None)
    return p


def _error_line(command: str, exc: Exception) -> str:
    payload = {"status": "error", "command": command, "error": type(exc).__name__, "message": str(exc)}
    row = getattr(exc, "row", None)
    if row is not None:
        payload["row"] = row
    return json.dumps(payload, sort_keys=True, default=str)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    overrides = {k: getattr(args, k) for k in KEYS}
    try:
        cfg = parse_config(args.config, overrides)
        result = dispatch_command(args.command, cfg)
    except PorcelainError as exc:
        print(_error_line(args.command, exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(_error_line(args.command, exc), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "command": args.command, **result}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
