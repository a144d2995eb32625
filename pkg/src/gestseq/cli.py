"""``gestseq`` command line.

Settings resolve as: command-line flag > ``--config`` file > built-in
default. The config file is TOML (a ``[<subcommand>]`` table or top-level
keys) or a run manifest JSON written by a previous run. Every run writes
``<output>.manifest.json`` next to its main output.

Exit codes: 0 success, 1 invalid input, 2 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .core import (DEFAULT_ALPHABET, GestureAlphabet, GestureError, format_gesture_sequence,
                   format_outcomes, format_probability_stream, iter_case_files, parse_gesture_sequence,
                   parse_outcomes, parse_probability_stream, write_atomic, fmt)
from .cv import CvConfig, cross_validate
from .features import (FeatureMatrix, FeatureSchema, assemble_feature_vector, format_matrix,
                       parse_matrix)
from .metrics import frame_level_auc
from .segmentation import SegmentationConfig, aggregate, penalty_sweep
from .stats import DegenerateVarianceError, concordance
from .synthetic import OutcomeModel, SynthConfig, generate_cohort, render_stream

OUT_DIR_ENV = "GESTSEQ_OUTPUT_DIR"

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class UsageError(Exception):
    pass


# -- option tables -----------------------------------------------------------
# (flag, key, type, default, help); defaults applied after the config file.

def _alphabet(text):
    return GestureAlphabet.parse(text)


def _float_or_median(text):
    return text if text in ("median", "median-heuristic") else float(text)


COMMON = [
    ("--alphabet", "alphabet", str, ",".join(DEFAULT_ALPHABET.codes), "comma separated class codes"),
]
SEGMENT = [
    ("--penalty", "penalty", float, 0.5, "PELT penalty per change point"),
    ("--gamma", "gamma", _float_or_median, "median", "kernel bandwidth or 'median'"),
    ("--min-frames", "min_segment_frames", int, 2, "minimum segment length in frames"),
    ("--weights", "weights", str, None, "CSV of gesture,weight for labelling"),
    ("--dt", "dt", float, None, "seconds per frame; omit to infer from the t column"),
]
SCHEMA = [
    ("--schema", "schema", str, "default", "feature schema name"),
    ("--decay", "decay_lambda", float, 0.01, "decay rate per second for decay features"),
    ("--unknown", "unknown", str, "error", "unknown gesture codes: error | exclude"),
]
JOBS = [("--jobs", "jobs", int, 1, "worker processes for multi-case inputs")]

COMMANDS: dict[str, dict] = {
    "segment": {
        "help": "aggregate probability streams into gesture files",
        "paths": [("--probs", "probs", True, "probability file or directory"),
                  ("--out", "out", False, "gesture file (or directory for directory input)")],
        "options": COMMON + SEGMENT + [("--no-prune", "no_prune", bool, False, "disable pruning")]
        + JOBS,
        "default_out": "gestures",
    },
    "sweep": {
        "help": "number of aggregated events for penalties 0, 0.05, ..., 1",
        "paths": [("--probs", "probs", True, "probability file"),
                  ("--out", "out", False, "TSV output")],
        "options": COMMON + SEGMENT,
        "default_out": "sweep.tsv",
    },
    "features": {
        "help": "feature matrix from gesture files",
        "paths": [("--gestures", "gestures", True, "gesture file or directory"),
                  ("--out", "out", False, "matrix CSV")],
        "options": COMMON + SCHEMA + JOBS,
        "default_out": "matrix.csv",
    },
    "evaluate": {
        "help": "frame and video level AUC of a probability stream",
        "paths": [("--probs", "probs", True, "probability file"),
                  ("--gestures", "gestures", True, "ground-truth gesture file"),
                  ("--out", "out", False, "JSON report")],
        "options": COMMON + [("--dt", "dt", float, None, "seconds per frame")],
        "default_out": "report.json",
    },
    "stats": {
        "help": "t-test ranking and top-k concordance of two feature matrices",
        "paths": [("--matrix-a", "matrix_a", True, "first matrix CSV"),
                  ("--matrix-b", "matrix_b", True, "second matrix CSV"),
                  ("--outcomes", "outcomes", True, "outcome CSV"),
                  ("--out", "out", False, "TSV report")],
        "options": [("--top-k", "top_k", int, 50, "ranking depth compared"),
                    ("--welch", "welch", bool, False, "Welch instead of Student t-test")],
        "default_out": "report.tsv",
    },
    "predict": {
        "help": "stratified k-fold outcome prediction",
        "paths": [("--matrix", "matrix", True, "matrix CSV"),
                  ("--outcomes", "outcomes", True, "outcome CSV"),
                  ("--out", "out", False, "JSON report")],
        "options": [("--k", "k", int, 5, "folds"),
                    ("--seed", "seed", int, 0, "fold shuffling seed"),
                    ("--l2", "l2", float, 1.0, "L2 strength"),
                    ("--max-iters", "max_iters", int, 5000, "gradient descent iterations"),
                    ("--tolerance", "tolerance", float, 1e-6, "gradient norm stop"),
                    ("--no-standardize", "no_standardize", bool, False, "skip standardisation"),
                    ("--ci", "ci", str, "normal", "normal | bootstrap")],
        "default_out": "cv.json",
    },
    "synth": {
        "help": "synthetic cohort of gesture, probability, and outcome files",
        "paths": [("--out-dir", "out_dir", False, "output directory")],
        "options": COMMON + [
            ("--seed", "seed", int, 0, "base seed (case i uses seed + i)"),
            ("--n-cases", "n_cases", int, 20, "number of cases"),
            ("--n-events", "n_events", int, 270, "events per case"),
            ("--mean-duration", "mean_duration", float, 2.0, "mean gesture duration (s)"),
            ("--duration-spread", "duration_spread", float, 0.3, "log-normal sigma"),
            ("--fps", "fps", float, 6.0, "frames per second"),
            ("--noise-sigma", "noise_sigma", float, 0.05, "logit noise sd"),
            ("--temperature", "softmax_temperature", float, 0.5, "softmax temperature"),
        ],
        "default_out": "cohort",
    },
    "pipeline": {
        "help": "probability streams to gesture sequences to features in one pass",
        "paths": [("--probs", "probs", True, "probability file or directory"),
                  ("--out-features", "out_features", False, "matrix CSV"),
                  ("--out-gestures", "out_gestures", False, "directory for aggregated gestures"),
                  ("--truth", "truth", False, "ground-truth gesture directory (adds AUC report)"),
                  ("--out-report", "out_report", False, "JSON report (needs --truth)")],
        "options": COMMON + SEGMENT + SCHEMA + JOBS
        + [("--seed", "seed", int, 0, "recorded for reproducibility; pipeline is deterministic")],
        "default_out": "features.csv",
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gestseq", description=__doc__.split("\n\n")[0],
        epilog="Precedence: flags > --config file > defaults. "
               f"Default output directory: ${OUT_DIR_ENV} or the working directory.")
    parser.add_argument("--version", action="version", version=f"gestseq {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name, entry in COMMANDS.items():
        p = sub.add_parser(name, help=entry["help"], description=entry["help"],
                           epilog="Precedence: flags > --config file > defaults.")
        p.add_argument("--config", help="TOML config or manifest JSON")
        for flag, key, required, help_ in entry["paths"]:
            p.add_argument(flag, dest=key, default=None, help=help_)
        for flag, key, typ, default, help_ in entry["options"]:
            if typ is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None,
                               help=help_)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None,
                               help=f"{help_} (default: {default})")
    return parser


def _load_config(path: str | None, command: str) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise GestureError(f"{p}: no such config file")
    if p.suffix == ".json":
        data = json.loads(p.read_text(encoding="utf-8"))
        data = data.get("config", data)
    else:
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    section = data.get(command)
    if isinstance(section, dict):
        merged = {k: v for k, v in data.items() if not isinstance(v, dict)}
        merged.update(section)
        return merged
    return data


def resolve(args: argparse.Namespace) -> dict:
    entry = COMMANDS[args.command]
    cfg_file = _load_config(args.config, args.command)
    resolved = {}
    for flag, key, required, _ in entry["paths"]:
        value = getattr(args, key)
        if value is None:
            value = cfg_file.get(key)
        if value is None and required:
            raise UsageError(f"{args.command}: {flag} is required")
        resolved[key] = value
    for flag, key, typ, default, _ in entry["options"]:
        value = getattr(args, key)
        if value is None:
            value = cfg_file.get(key)
            if value is not None and typ not in (bool, str):
                value = typ(value) if not isinstance(value, (dict, list)) else value
        resolved[key] = default if value is None else value
    # non-flag config-only settings (e.g. synthetic outcome model)
    for extra in ("outcome_model", "transitions"):
        if extra in cfg_file:
            resolved[extra] = cfg_file[extra]
    return resolved


def _out_path(value, default: str) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / default


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digests(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        if p is None:
            continue
        for f in iter_case_files(p) if Path(p).is_dir() else [Path(p)]:
            out[str(f)] = _digest(f)
    return out


def _write_manifest(main_out: Path, command: str, config: dict, inputs, outputs, started: float):
    manifest = {
        "tool": "gestseq",
        "version": __version__,
        "subcommand": command,
        "config": config,
        "inputs": _digests(inputs),
        "outputs": [str(o) for o in outputs],
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    target = main_out / "run" if main_out.is_dir() else main_out
    write_atomic(target.with_name(target.name + ".manifest.json"),
                 json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _seg_config(cfg: dict) -> SegmentationConfig:
    weights = {}
    if cfg.get("weights"):
        path = Path(cfg["weights"])
        if not path.exists():
            raise GestureError(f"{path}: no such weights file")
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            parts = [x.strip() for x in line.split(",")]
            if not line.strip() or parts == ["gesture", "weight"]:
                continue
            if len(parts) != 2:
                raise GestureError(f"{path}:{lineno}: expected gesture,weight")
            weights[parts[0]] = float(parts[1])
    return SegmentationConfig(penalty=cfg["penalty"], gamma=cfg["gamma"],
                              min_segment_frames=cfg["min_segment_frames"],
                              class_weights=weights, prune=not cfg.get("no_prune", False))


def _schema(cfg: dict) -> FeatureSchema:
    if cfg["schema"] != "default":
        raise GestureError(f"unknown schema {cfg['schema']!r}")
    return FeatureSchema(_alphabet(cfg["alphabet"]), cfg["decay_lambda"])


# -- workers (module level so they pickle) -----------------------------------

def _segment_one(job):
    path, cfg = job
    stream = parse_probability_stream(path, _alphabet(cfg["alphabet"]), cfg["dt"])
    return stream.case_id, aggregate(stream, _seg_config(cfg))


def _features_one(job):
    path, cfg = job
    seq = parse_gesture_sequence(path, _alphabet(cfg["alphabet"]), cfg["unknown"])
    return assemble_feature_vector(seq, _schema(cfg))


def _pipeline_one(job):
    path, cfg = job
    stream = parse_probability_stream(path, _alphabet(cfg["alphabet"]), cfg["dt"])
    seq = aggregate(stream, _seg_config(cfg))
    vec = assemble_feature_vector(seq, _schema(cfg))
    report = None
    if cfg.get("truth"):
        truth_path = Path(cfg["truth"]) / f"{stream.case_id}.csv"
        truth = parse_gesture_sequence(truth_path, stream.alphabet, cfg["unknown"])
        report = frame_level_auc(stream, truth).to_dict()
    return stream.case_id, seq, vec, report


# -- subcommands ---------------------------------------------------------------

def cmd_segment(cfg, started):
    files = iter_case_files(cfg["probs"])
    results = sorted(_map(_segment_one, [(f, cfg) for f in files], cfg["jobs"]),
                     key=lambda r: r[0])
    is_dir = Path(cfg["probs"]).is_dir()
    out = _out_path(cfg["out"], "gestures" if is_dir else "gestures.csv")
    outputs = []
    for cid, seq in results:
        target = out / f"{cid}.csv" if is_dir else out
        write_atomic(target, format_gesture_sequence(seq))
        outputs.append(target)
    _write_manifest(out, "segment", cfg, [cfg["probs"], cfg["weights"]], outputs, started)


def cmd_sweep(cfg, started):
    stream = parse_probability_stream(cfg["probs"], _alphabet(cfg["alphabet"]), cfg["dt"])
    rows = penalty_sweep(stream, _seg_config(cfg))
    out = _out_path(cfg["out"], "sweep.tsv")
    text = "penalty\tn_events\n" + "".join(f"{fmt(p)}\t{n}\n" for p, n in rows)
    write_atomic(out, text)
    _write_manifest(out, "sweep", cfg, [cfg["probs"]], [out], started)


def cmd_features(cfg, started):
    files = iter_case_files(cfg["gestures"])
    vectors = _map(_features_one, [(f, cfg) for f in files], cfg["jobs"])
    matrix = FeatureMatrix.from_vectors(vectors)
    out = _out_path(cfg["out"], "matrix.csv")
    write_atomic(out, format_matrix(matrix))
    _write_manifest(out, "features", cfg, [cfg["gestures"]], [out], started)


def cmd_evaluate(cfg, started):
    alphabet = _alphabet(cfg["alphabet"])
    stream = parse_probability_stream(cfg["probs"], alphabet, cfg["dt"])
    truth = parse_gesture_sequence(cfg["gestures"], alphabet, "exclude")
    report = frame_level_auc(stream, truth).to_dict()
    report["case_id"] = stream.case_id
    out = _out_path(cfg["out"], "report.json")
    write_atomic(out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "evaluate", cfg, [cfg["probs"], cfg["gestures"]], [out], started)


def cmd_stats(cfg, started):
    outcomes = parse_outcomes(cfg["outcomes"])
    a = parse_matrix(cfg["matrix_a"]).with_outcomes(outcomes)
    b = parse_matrix(cfg["matrix_b"]).with_outcomes(outcomes)
    report = concordance(a, b, cfg["top_k"], equal_var=not cfg["welch"])
    out = _out_path(cfg["out"], "report.tsv")
    lines = ["feature\tp_a\tp_b\td_a\td_b\tin_overlap"]
    for r in report.rows():
        lines.append(f"{r['feature']}\t{fmt(r['p_a'])}\t{fmt(r['p_b'])}\t{fmt(r['d_a'])}\t"
                     f"{fmt(r['d_b'])}\t{int(r['in_overlap'])}")
    write_atomic(out, "\n".join(lines) + "\n")
    summary = out.with_name(out.name + ".summary.json")
    write_atomic(summary, json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "stats", cfg, [cfg["matrix_a"], cfg["matrix_b"], cfg["outcomes"]],
                    [out, summary], started)


def cmd_predict(cfg, started):
    outcomes = parse_outcomes(cfg["outcomes"])
    matrix = parse_matrix(cfg["matrix"]).with_outcomes(outcomes)
    config = CvConfig(k=cfg["k"], seed=cfg["seed"], standardize=not cfg["no_standardize"],
                      l2=cfg["l2"], max_iters=cfg["max_iters"], tolerance=cfg["tolerance"],
                      ci=cfg["ci"])
    report = cross_validate(matrix, config)
    out = _out_path(cfg["out"], "cv.json")
    write_atomic(out, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "predict", cfg, [cfg["matrix"], cfg["outcomes"]], [out], started)


def cmd_synth(cfg, started):
    from dataclasses import replace
    kwargs = {k: cfg[k] for k in ("seed", "n_events", "mean_duration", "duration_spread", "fps",
                                  "noise_sigma", "softmax_temperature")}
    if cfg.get("transitions") is not None:
        kwargs["transitions"] = cfg["transitions"]
    config = SynthConfig(alphabet=_alphabet(cfg["alphabet"]), **kwargs)
    model = OutcomeModel(**cfg.get("outcome_model", {}))
    cases, outcomes = generate_cohort(config, cfg["n_cases"], model)
    out = _out_path(cfg["out_dir"], "cohort")
    outputs = []
    for i, (cid, seq) in enumerate(cases.items()):
        stream = render_stream(seq, replace(config, seed=config.seed + i))
        for sub, text in (("gestures", format_gesture_sequence(seq)),
                          ("probs", format_probability_stream(stream))):
            target = out / sub / f"{cid}.csv"
            write_atomic(target, text)
            outputs.append(target)
    write_atomic(out / "outcomes.csv", format_outcomes(outcomes))
    outputs.append(out / "outcomes.csv")
    cfg = dict(cfg, resolved_synth=_jsonable(asdict(config)))
    _write_manifest(out, "synth", cfg, [], outputs, started)


def cmd_pipeline(cfg, started):
    files = iter_case_files(cfg["probs"])
    results = sorted(_map(_pipeline_one, [(f, cfg) for f in files], cfg["jobs"]),
                     key=lambda r: r[0])
    out = _out_path(cfg["out_features"], "features.csv")
    matrix = FeatureMatrix.from_vectors(r[2] for r in results)
    write_atomic(out, format_matrix(matrix))
    outputs = [out]
    if cfg.get("out_gestures"):
        for cid, seq, _, _ in results:
            target = Path(cfg["out_gestures"]) / f"{cid}.csv"
            write_atomic(target, format_gesture_sequence(seq))
            outputs.append(target)
    if cfg.get("truth"):
        report_path = Path(cfg["out_report"]) if cfg.get("out_report") else \
            out.with_name(out.stem + ".auc.json")
        report = {cid: rep for cid, _, _, rep in results}
        write_atomic(report_path, json.dumps(report, indent=2, sort_keys=True) + "\n")
        outputs.append(report_path)
    _write_manifest(out, "pipeline", cfg, [cfg["probs"], cfg.get("truth")], outputs, started)


HANDLERS = {
    "segment": cmd_segment, "sweep": cmd_sweep, "features": cmd_features,
    "evaluate": cmd_evaluate, "stats": cmd_stats, "predict": cmd_predict,
    "synth": cmd_synth, "pipeline": cmd_pipeline,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _error(kind: str, message: str, command: str | None) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "subcommand": command}) + "\n")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        cfg = resolve(args)
        HANDLERS[args.command](_jsonable(cfg), started)
    except UsageError as exc:
        _error("UsageError", str(exc), args.command)
        return 2
    except (GestureError, DegenerateVarianceError, ValueError, OSError, tomllib.TOMLDecodeError,
            json.JSONDecodeError) as exc:
        _error(type(exc).__name__, str(exc), args.command)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
