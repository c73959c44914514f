"""Command-line front end: ``ecgbench {synth,ingest,process,evaluate,report}``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import SNAPSHOT_NAME, PipelineConfig, dump_config, load_config, resolve
from .edf import load_edf
from .errors import DataError, EcgBenchError, SchemaMismatch
from .evaluation import normalize_variant, run_scenario, write_report
from .features import (LabeledDataset, compose_dataset, read_features_csv,
                       write_features_csv)
from .pipeline import ProcessStats, log_stats, process_subject
from .synth import MANIFEST_NAME, generate_field_week

logger = logging.getLogger("ecgbench")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
OUTPUTS_NAME = "outputs.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", metavar="PATH", help="INI config file (flags win over it)")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed")
    p.add_argument("--jobs", type=int, metavar="N", help="worker threads (default: all cores)")
    p.add_argument("--out", metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ecgbench", description="ECG biometrics pipeline and evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic field-week corpus")
    _common(p)
    p.add_argument("--subjects", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--minutes", type=float, help="recording minutes per full day")
    p.add_argument("--snr", help="broadband SNR in dB, or 'none'")
    p.add_argument("--drift", type=float, help="day-to-day morphology drift (relative SD)")
    p.add_argument("--gaps", type=int, help="tracker-off gaps per day")

    p = sub.add_parser("ingest", help="read EDF files and report what they contain")
    _common(p)
    p.add_argument("--input", required=False, metavar="PATH", help="EDF file or directory")

    p = sub.add_parser("process", help="EDF corpus to per-subject feature CSVs")
    _common(p)
    p.add_argument("--input", metavar="PATH", help="corpus directory, manifest or EDF directory")
    p.add_argument("--stride", type=int, help="window stride in beats")

    p = sub.add_parser("evaluate", help="pair-wise authentication evaluation")
    _common(p)
    p.add_argument("--input", metavar="PATH", help="directory holding feature CSVs")
    p.add_argument("--scenario", help="1, 2a, 2b, 2c (comma list allowed)")
    p.add_argument("--classifier", help="forest, linear, mlp (comma list allowed)")
    p.add_argument("--fusion", type=int, help="highest fusion level k (1..5)")

    p = sub.add_parser("report", help="print the summary of an evaluation run")
    p.add_argument("--input", required=True, metavar="DIR", help="evaluation output directory")
    return parser


def configure_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("ECGBENCH_LOG", "warn").strip().lower(),
                           logging.WARNING)
    root = logging.getLogger("ecgbench")
    if not root.handlers:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(h)
    root.setLevel(level)


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "input", None):
        cfg.input = args.input
    s = {}
    if getattr(args, "subjects", None) is not None:
        s["n_subjects"] = args.subjects
    if getattr(args, "days", None) is not None:
        s["n_days"] = args.days
    if getattr(args, "minutes", None) is not None:
        s["minutes_per_day"] = args.minutes
    if getattr(args, "snr", None) is not None:
        s["snr_db"] = None if args.snr.lower() == "none" else float(args.snr)
    if getattr(args, "drift", None) is not None:
        s["drift"] = args.drift
    if getattr(args, "gaps", None) is not None:
        s["gaps_per_day"] = args.gaps
    if s:
        cfg.synth = replace(cfg.synth, **s)
    if getattr(args, "stride", None) is not None:
        cfg.process = replace(cfg.process, stride=args.stride)
    if getattr(args, "scenario", None):
        cfg.scenarios = tuple(v.strip() for v in args.scenario.split(",") if v.strip())
    if getattr(args, "classifier", None):
        cfg.classifiers = tuple(v.strip() for v in args.classifier.split(",") if v.strip())
    if getattr(args, "fusion", None) is not None:
        cfg.fusion = args.fusion
    cfg.scenarios = tuple(normalize_variant(v) for v in cfg.scenarios)
    cfg.__post_init__()
    return resolve(cfg)


def _jobs(args) -> int:
    n = getattr(args, "jobs", None)
    return max(1, n if n else (os.cpu_count() or 1))


def _need_out(cfg) -> Path:
    if not cfg.out:
        raise UsageError("--out is required")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need_input(cfg) -> Path:
    if not cfg.input:
        raise UsageError("--input is required")
    path = Path(cfg.input)
    if not path.exists():
        raise DataError(f"input path does not exist: {path}")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs_manifest(out: Path, command: str, files) -> None:
    entries = sorted({Path(f).resolve().relative_to(out.resolve()).as_posix() for f in files})
    body = {"command": command, "version": __version__,
            "files": [{"path": e, "sha256": _sha256(out / e)} for e in entries]}
    (out / OUTPUTS_NAME).write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")


def _snapshot(out: Path, cfg: PipelineConfig) -> Path:
    path = out / SNAPSHOT_NAME
    path.write_text(dump_config(cfg))
    return path


# ---------------------------------------------------------------- commands

def cmd_synth(cfg: PipelineConfig, jobs: int = 1) -> int:
    out = _need_out(cfg)
    manifest = generate_field_week(cfg.synth, out)
    _snapshot(out, cfg)
    print(f"wrote {len(manifest['recordings'])} recordings for {cfg.synth.n_subjects} "
          f"subjects to {out}")
    return EXIT_OK


def _edf_paths(path: Path) -> list[Path]:
    if path.is_file() and path.suffix.lower() == ".json":
        manifest = json.loads(path.read_text())
        return [path.parent / r["path"] for r in manifest["recordings"]]
    if path.is_file():
        return [path]
    if (path / MANIFEST_NAME).exists():
        return _edf_paths(path / MANIFEST_NAME)
    return sorted(p for p in path.rglob("*") if p.suffix.lower() == ".edf")


def cmd_ingest(cfg: PipelineConfig, jobs: int = 1) -> int:
    src = _need_input(cfg)
    out = _need_out(cfg)
    paths = _edf_paths(src)
    if not paths:
        raise DataError(f"no EDF files found under {src}")
    rows, failed = [], 0
    for p in paths:
        try:
            rec = load_edf(p)
        except (DataError, OSError) as exc:
            logger.error("%s: %s", p, exc)
            failed += 1
            continue
        rows.append([p.relative_to(src).as_posix() if src.is_dir() else p.name, rec.subject_id,
                     rec.day_index, rec.sample_rate, len(rec), f"{rec.duration:.3f}",
                     f"{float(rec.validity.mean()):.6f}"])
    with open(out / "ingest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "subject", "day", "sample_rate", "samples", "duration_s",
                    "valid_fraction"])
        w.writerows(rows)
    _snapshot(out, cfg)
    print(f"read {len(rows)} of {len(paths)} EDF files")
    return EXIT_DATA if not rows else EXIT_OK


def cmd_process(cfg: PipelineConfig, jobs: int = 1) -> int:
    src = _need_input(cfg)
    out = _need_out(cfg)
    paths = _edf_paths(src)
    if not paths:
        raise DataError(f"no EDF files found under {src}")
    by_subject: dict[str, list] = {}
    failed = 0
    for p in paths:
        try:
            rec = load_edf(p)
        except (DataError, OSError) as exc:
            logger.error("%s: %s", p, exc)
            failed += 1
            continue
        by_subject.setdefault(rec.subject_id, []).append(rec)
    if not by_subject:
        raise DataError(f"none of the {len(paths)} inputs under {src} could be read")

    def work(sid):
        return sid, process_subject(by_subject[sid], cfg.process)

    subjects = sorted(by_subject)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(work, subjects))

    feat_dir = out / "features"
    feat_dir.mkdir(exist_ok=True)
    written, lines, total = [], [], ProcessStats()
    for sid, (data, stats) in results:
        path = feat_dir / f"{sid}.csv"
        write_features_csv(path, data)
        written.append(path)
        lines.append(log_stats(sid, stats))
        total.add(stats)
    lines.append(log_stats("total", total))
    if failed:
        lines.append(f"failed inputs: {failed}")
    log_path = out / "process.log"
    log_path.write_text("\n".join(lines) + "\n")
    written += [log_path, _snapshot(out, cfg)]
    write_outputs_manifest(out, "process", written)
    print(lines[-1] if not failed else lines[-2])
    return EXIT_OK


def load_feature_dir(path: Path) -> LabeledDataset:
    folder = path / "features" if (path / "features").is_dir() else path
    files = sorted(folder.glob("*.csv")) if folder.is_dir() else [path]
    if not files:
        raise DataError(f"no feature CSVs found under {path}")
    parts = [read_features_csv(f) for f in files]
    parts = [p for p in parts if len(p)]
    if not parts:
        raise DataError(f"feature CSVs under {path} hold no windows")
    return LabeledDataset.concat(parts)


def prepare_dataset(data: LabeledDataset, cfg: PipelineConfig) -> LabeledDataset:
    if cfg.target_per_subject:
        per = {s: data.where(data.subject == s) for s in data.subjects}
        data = compose_dataset(per, cfg.target_per_subject, cfg.seed)
    if cfg.schema == "selected":
        if len(data.schema) == 15:
            data = data.select()
    elif len(data.schema) != 15:
        raise SchemaMismatch("full schema requested but features are already reduced")
    return data


def cmd_evaluate(cfg: PipelineConfig, jobs: int = 1) -> int:
    src = _need_input(cfg)
    out = _need_out(cfg)
    data = prepare_dataset(load_feature_dir(src), cfg)
    reports = []
    for scenario in cfg.scenarios:
        for kind in cfg.classifiers:
            rep = run_scenario(data, scenario, cfg.classifier_config(kind), cfg.seed,
                               cfg.fusion_levels, jobs)
            logger.info("%s/%s: %d pairs in %.1f s", scenario, kind, len(rep.pairs),
                        rep.runtime_s)
            reports.append(rep)
    files = write_report(out, reports, cfg.seed)
    files.append(_snapshot(out, cfg))
    write_outputs_manifest(out, "evaluate", files)
    print((out / "summary.txt").read_text(), end="")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.input)
    summary = path / "summary.txt"
    if not summary.exists():
        raise DataError(f"no summary.txt in {path}")
    print(summary.read_text(), end="")
    manifest = path / OUTPUTS_NAME
    if manifest.exists():
        files = json.loads(manifest.read_text())["files"]
        print(f"\n{len(files)} output files listed in {manifest}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "process": cmd_process,
            "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "report":
            return cmd_report(args)
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, _jobs(args))
    except UsageError as exc:
        print(f"ecgbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"ecgbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:  # bad config values
        print(f"ecgbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EcgBenchError as exc:
        print(f"ecgbench: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        print(f"ecgbench: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
