"""Command-line interface: gen, preprocess, fit, detect, eval, pipeline.

Every artifact embeds the configuration and seeds that produced it, plus
the content hashes of its inputs; paths inside artifacts are relative to
the output directory so a re-run with the same configuration is
byte-identical wherever it executes. On error the process prints one JSON
object to stderr and exits with the error family's code.

A JSON file passed with --config supplies defaults for any omitted flags;
keys use the flag names with underscores (for example {"n": 500}).
Worker-pool size is taken from the NODULESCAN_WORKERS environment
variable; results are assembled in a fixed order regardless of schedule.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import io
from .detect import DetectionResult, classify, score_margin
from .errors import ConfigError, MissingInput, PipelineError
from .evaluate import build_report, render_report_plots, write_report_csv
from .particles import ParameterBounds
from .preprocess import PreprocessConfig, preprocess
from .synth import PhantomConfig, generate_trace_set, trace_seed
from .templates import ALL_CLASSES, NODULE_CLASSES, FitConfig, build_library

PROFILES = {
    "desk": {"n": 200, "m": 200, "q": 20},
    "full": {"n": 2000, "m": 2000, "q": 20},
}

MANIFEST_FORMAT = "nodulescan-manifest-v1"


def _workers() -> int:
    raw = os.environ.get("NODULESCAN_WORKERS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"NODULESCAN_WORKERS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"NODULESCAN_WORKERS must be >= 1, got {value}")
    return value


class _Options:
    """Flag > config-file > profile > built-in default resolution."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.filecfg = io.read_json(args.config) if getattr(args, "config", None) else {}
        profile = getattr(args, "profile", None) or self.filecfg.get("profile")
        if profile is not None and profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}, choose from {sorted(PROFILES)}")
        self.profile = profile

    def pick(self, name: str, default):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.filecfg:
            return self.filecfg[name]
        if self.profile is not None and name in PROFILES[self.profile]:
            return PROFILES[self.profile][name]
        return default


def _phantom_from(opts: _Options) -> PhantomConfig:
    base = PhantomConfig()
    return dataclasses.replace(
        base,
        duration_s=float(opts.pick("duration", base.duration_s)),
        noise_std=float(opts.pick("noise_std", base.noise_std)),
        nodule_gain=float(opts.pick("gain", base.nodule_gain)),
        nodule_width_s=float(opts.pick("width", base.nodule_width_s)),
        capsule_speed_mm_s=float(opts.pick("capsule_speed", base.capsule_speed_mm_s)),
        nodule_time_s=float(opts.pick("nodule_time", base.nodule_time_s)),
    )


def _preprocess_from(opts: _Options) -> PreprocessConfig:
    base = PreprocessConfig()
    cfg = PreprocessConfig(
        window=int(opts.pick("window", base.window)),
        threshold=float(opts.pick("threshold", base.threshold)),
        n_columns=int(opts.pick("columns", base.n_columns)),
        n_sensors=int(opts.pick("sensors", base.n_sensors)),
    )
    cfg.validate()
    return cfg


def _generate_class(out_dir: Path, run_seed: int, size_class: int, count: int,
                    base: PhantomConfig) -> list[dict]:
    """Write one class's trace CSVs under out_dir; return manifest entries."""
    entries = []
    for q in range(count):
        cfg = dataclasses.replace(
            base, nodule_b=size_class, seed=trace_seed(run_seed, size_class, q)
        )
        trace = generate_trace_set(cfg)
        rel = f"b{size_class}/trace_{q:03d}.csv"
        io.write_trace_csv(out_dir / rel, trace)
        entries.append(
            {"path": rel, "b": size_class, "q": q, "seed": cfg.seed,
             "config": cfg.to_json_dict()}
        )
    return entries


def _write_manifest(out_dir: Path, run_seed: int, entries: list[dict]) -> None:
    """Create or update the manifest, replacing entries with the same (b, q)."""
    manifest_path = out_dir / "manifest.json"
    existing: list[dict] = []
    if manifest_path.is_file():
        existing = io.read_json(manifest_path).get("traces", [])
    merged = {(e["b"], e["q"]): e for e in existing}
    merged.update({(e["b"], e["q"]): e for e in entries})
    manifest = {
        "format": MANIFEST_FORMAT,
        "run_seed": run_seed,
        "traces": [merged[key] for key in sorted(merged)],
    }
    io.write_json(manifest_path, manifest)


def cmd_gen(args: argparse.Namespace) -> int:
    opts = _Options(args)
    out_dir = Path(args.out)
    base = _phantom_from(opts)
    count = int(opts.pick("q", 20))
    entries = _generate_class(out_dir, args.seed, args.b, count, base)
    _write_manifest(out_dir, args.seed, entries)
    print(f"wrote {len(entries)} traces for size {args.b} under {out_dir}")
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    opts = _Options(args)
    cfg = _preprocess_from(opts)
    trace = io.read_trace_csv(args.trace)
    feature = preprocess(trace, cfg)
    payload = feature.to_json_dict()
    payload["provenance"] = {
        "inputs": [{"path": Path(args.trace).name, "sha256": io.sha256_file(args.trace)}]
    }
    io.write_json(args.out, payload)
    print(f"wrote {args.out}")
    return 0


def _load_features_by_class(data_dir: Path, cfg: PreprocessConfig):
    manifest_path = data_dir / "manifest.json"
    manifest = io.read_json(manifest_path)
    by_class: dict[int, list] = {}
    labelled = []
    for entry in manifest.get("traces", []):
        trace = io.read_trace_csv(data_dir / entry["path"], label=entry["b"])
        feature = preprocess(trace, cfg)
        by_class.setdefault(entry["b"], []).append(feature)
        labelled.append((entry["b"], entry["path"], feature))
    return by_class, labelled


def cmd_fit(args: argparse.Namespace) -> int:
    opts = _Options(args)
    pp_cfg = _preprocess_from(opts)
    fit_cfg = FitConfig(
        n_particles=int(opts.pick("n", 2000)),
        n_iterations=int(opts.pick("m", 2000)),
        traces_per_class=int(opts.pick("q", 20)),
        master_seed=args.seed,
    )
    data_dir = Path(args.data)
    if not data_dir.is_dir():
        raise MissingInput(f"no such data directory: {data_dir}")
    by_class, _ = _load_features_by_class(data_dir, pp_cfg)
    dataset = {b: by_class.get(b, []) for b in NODULE_CLASSES}
    library = build_library(
        dataset,
        fit_cfg,
        bounds=ParameterBounds(),
        preprocess_config=pp_cfg,
        workers=_workers(),
    )
    library.provenance["inputs"] = [
        {"path": "manifest.json", "sha256": io.sha256_file(data_dir / "manifest.json")}
    ]
    io.write_library(args.out, library)
    print(f"wrote {args.out}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    library = io.read_library(args.library)
    pp_cfg = library.preprocess_config or PreprocessConfig(n_sensors=library.n_sensors,
                                                           n_columns=library.n_columns)
    trace = io.read_trace_csv(args.trace)
    feature = preprocess(trace, pp_cfg)
    result = classify(feature, library)
    payload = {
        "trace": Path(args.trace).name,
        "trace_sha256": io.sha256_file(args.trace),
        "true_b": args.true_b,
        "library_sha256": io.sha256_file(args.library),
        **result.to_json_dict(),
    }
    if args.margin:
        payload["margin"] = score_margin(result)
    io.write_json(args.out, payload)
    print(f"predicted_b={result.predicted_b} presence={result.presence} -> {args.out}")
    return 0


def _load_results(path: Path) -> list[tuple[int, DetectionResult]]:
    if path.is_file():
        payloads = io.read_json(path).get("results", [])
    elif path.is_dir():
        payloads = [io.read_json(p) for p in sorted(path.glob("*.json"))
                    if p.name not in ("report.json", "manifest.json")]
    else:
        raise MissingInput(f"no such results file or directory: {path}")
    results = []
    for p in payloads:
        if p.get("true_b") is None:
            raise ConfigError("every result needs a true_b label for evaluation")
        results.append((int(p["true_b"]), DetectionResult.from_json_dict(p)))
    return results


def cmd_eval(args: argparse.Namespace) -> int:
    results = _load_results(Path(args.results))
    report = build_report(results)
    payload = {
        "metrics": report.to_json_dict(),
        "provenance": {"inputs": [{"path": Path(args.results).name,
                                   "results": report.n_results}]},
    }
    io.write_json(args.out, payload)
    if args.csv:
        write_report_csv(report, args.csv)
    if args.plots:
        render_report_plots(report, args.plots)
    print(f"wrote {args.out}")
    return 0


def run_pipeline(out_dir: Path, train_seed: int, test_seed: int,
                 phantom: PhantomConfig, pp_cfg: PreprocessConfig,
                 fit_cfg: FitConfig, q_test: int, profile: str | None) -> Path:
    """Generate, fit, classify, and report; returns the report path."""
    q_train = fit_cfg.traces_per_class

    train_dir = out_dir / "train"
    entries = []
    for b in ALL_CLASSES:
        entries += _generate_class(train_dir, train_seed, b, q_train, phantom)
    _write_manifest(train_dir, train_seed, entries)

    test_dir = out_dir / "test"
    entries = []
    for b in ALL_CLASSES:
        entries += _generate_class(test_dir, test_seed, b, q_test, phantom)
    _write_manifest(test_dir, test_seed, entries)

    by_class, _ = _load_features_by_class(train_dir, pp_cfg)
    dataset = {b: by_class.get(b, []) for b in NODULE_CLASSES}
    library = build_library(dataset, fit_cfg, bounds=ParameterBounds(),
                            preprocess_config=pp_cfg, workers=_workers())
    library.provenance["inputs"] = [
        {"path": "train/manifest.json",
         "sha256": io.sha256_file(train_dir / "manifest.json")}
    ]
    library_path = out_dir / "library.json"
    io.write_library(library_path, library)

    _, labelled = _load_features_by_class(test_dir, pp_cfg)
    results_payload = []
    results = []
    for true_b, rel_path, feature in labelled:
        det = classify(feature, library)
        results.append((true_b, det))
        results_payload.append(
            {"trace": f"test/{rel_path}", "true_b": true_b, **det.to_json_dict()}
        )
    results_path = out_dir / "results.json"
    io.write_json(results_path, {
        "library": {"path": "library.json", "sha256": io.sha256_file(library_path)},
        "results": results_payload,
    })

    report = build_report(results)
    config_echo = {
        "profile": profile,
        "train_seed": train_seed,
        "test_seed": test_seed,
        "q_train": q_train,
        "q_test": q_test,
        "fit": fit_cfg.to_json_dict(),
        "preprocess": pp_cfg.to_json_dict(),
        "phantom_base": phantom.to_json_dict(),
    }
    report_path = out_dir / "report.json"
    io.write_json(report_path, {
        "config": config_echo,
        "metrics": report.to_json_dict(),
        "provenance": {
            "inputs": [
                {"path": "train/manifest.json",
                 "sha256": io.sha256_file(train_dir / "manifest.json")},
                {"path": "test/manifest.json",
                 "sha256": io.sha256_file(test_dir / "manifest.json")},
                {"path": "library.json", "sha256": io.sha256_file(library_path)},
                {"path": "results.json", "sha256": io.sha256_file(results_path)},
            ]
        },
    })
    write_report_csv(report, out_dir / "report.csv")
    render_report_plots(report, out_dir / "plots")
    return report_path


def cmd_pipeline(args: argparse.Namespace) -> int:
    opts = _Options(args)
    phantom = _phantom_from(opts)
    pp_cfg = _preprocess_from(opts)
    fit_cfg = FitConfig(
        n_particles=int(opts.pick("n", 200)),
        n_iterations=int(opts.pick("m", 200)),
        traces_per_class=int(opts.pick("q", 20)),
        master_seed=args.seed,
    )
    q_test = int(opts.pick("q_test", fit_cfg.traces_per_class))
    report_path = run_pipeline(
        out_dir=Path(args.out),
        train_seed=args.seed,
        test_seed=args.test_seed,
        phantom=phantom,
        pp_cfg=pp_cfg,
        fit_cfg=fit_cfg,
        q_test=q_test,
        profile=opts.profile,
    )
    print(f"wrote {report_path}")
    return 0


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file with default option values")


def _add_preprocess_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--window", type=int, help="RMS window size (even)")
    sub.add_argument("--threshold", type=float, help="gate level subtracted after the envelope")
    sub.add_argument("--columns", type=int, help="fixed matrix width")
    sub.add_argument("--sensors", type=int, help="sensor channel count")


def _add_phantom_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--duration", type=float, help="trace duration in seconds")
    sub.add_argument("--noise-std", dest="noise_std", type=float, help="white-noise sigma")
    sub.add_argument("--gain", type=float, help="bump volts per millimetre")
    sub.add_argument("--width", type=float, help="bump sigma seconds per millimetre")
    sub.add_argument("--capsule-speed", dest="capsule_speed", type=float,
                     help="net crawl speed in mm/s (sets the inter-sensor bump delay)")
    sub.add_argument("--nodule-time", dest="nodule_time", type=float,
                     help="first sensor passage time in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodulescan",
        description="Tactile nodule detection pipeline over synthetic peristalsis traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic trace CSVs for one nodule size")
    p.add_argument("--b", type=int, required=True, choices=range(6), help="nodule size in mm")
    p.add_argument("--q", type=int, help="number of traces (default 20)")
    p.add_argument("--seed", type=int, required=True, help="run seed")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    _add_phantom_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("preprocess", help="turn one trace CSV into a feature-matrix JSON")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("fit", help="fit the template library from a generated data directory")
    p.add_argument("--data", required=True, help="directory containing manifest.json")
    p.add_argument("--out", required=True, help="library JSON path")
    p.add_argument("--n", type=int, help="particles per trace")
    p.add_argument("--m", type=int, help="refinement iterations per trace")
    p.add_argument("--q", type=int, help="declared traces per class")
    p.add_argument("--seed", type=int, required=True, help="fit master seed")
    p.add_argument("--profile", choices=sorted(PROFILES), help="named size preset")
    _add_config_flags(p)
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detect", help="classify one trace CSV against a library")
    p.add_argument("--trace", required=True)
    p.add_argument("--library", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--true-b", dest="true_b", type=int, choices=range(6),
                   help="ground-truth size, recorded for later evaluation")
    p.add_argument("--margin", action="store_true",
                   help="also report the gap between the two best template scores")
    _add_config_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="aggregate labelled detection results into a report")
    p.add_argument("--results", required=True, help="results.json or a directory of result JSONs")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="also write a flat CSV of the rates")
    p.add_argument("--plots", help="also write SVG charts into this directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="generate, fit, classify, and report in one run")
    p.add_argument("--seed", type=int, required=True, help="training/generation seed")
    p.add_argument("--test-seed", dest="test_seed", type=int, required=True,
                   help="held-out generation seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--profile", choices=sorted(PROFILES), help="named size preset")
    p.add_argument("--n", type=int, help="particles per trace")
    p.add_argument("--m", type=int, help="refinement iterations per trace")
    p.add_argument("--q", type=int, help="training traces per class")
    p.add_argument("--q-test", dest="q_test", type=int, help="held-out traces per class")
    _add_config_flags(p)
    _add_preprocess_flags(p)
    _add_phantom_flags(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        payload = {
            "error": type(exc).__name__,
            "message": str(exc),
            "exit_code": exc.exit_code,
        }
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
