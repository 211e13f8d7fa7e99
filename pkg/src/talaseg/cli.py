"""Command-line interface: segment, label, eval, synth, render.

Exit codes: 0 success, 2 unreadable or malformed input, 3 recording too
short, 4 degenerate input (nothing to segment or label).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts
from .config import METHODS, PipelineConfig
from .errors import AudioReadError, DegenerateInputError, TalasegError
from .evaluation import (EvalReport, GroundTruth, average_reports, evaluate_boundaries,
                         format_table, frame_accuracy, per_section_scores)
from .features import grid_times
from .novelty import LABELS, ssm
from .onsets import ODF_RATE, OnsetDetectionFunction
from .pipeline import FeatureBundle, extract_features, feature_key, label, segment
from .segmentation import Segmentation
from .signal import load_audio, write_wav
from .synthesis import ConcertSpec, generate_concert, statistics_batch

CACHE_ENV = "TALASEG_CACHE"


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "talaseg"


# ---------------------------------------------------------------------------
# shared helpers


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    d = cfg.to_dict()
    if getattr(args, "method", None):
        d["method"] = args.method
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    return PipelineConfig.from_dict(d)


def read_odf_csv(path) -> OnsetDetectionFunction:
    try:
        header, body = artifacts.read_csv(path)
    except (OSError, ValueError) as exc:
        raise AudioReadError(f"cannot read ODF from {path}: {exc}") from exc
    if header[:2] != ["time_s", "value"]:
        raise AudioReadError(f"{path}: expected columns time_s,value")
    return OnsetDetectionFunction(body[:, 1].copy(), ODF_RATE)


def features_for(path, config: PipelineConfig, use_cache: bool = True):
    """Feature bundle and cache key for a WAV file or an ODF CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        odf = read_odf_csv(path)
        audio = None
        key = feature_key(odf.values, odf.frame_rate, config)
    else:
        audio = load_audio(path)
        odf = None
        key = feature_key(audio.samples, audio.sample_rate, config)
    cached = cache_dir() / f"{key}.npz"
    if use_cache and cached.is_file():
        try:
            return FeatureBundle.load(cached), key
        except (OSError, ValueError, KeyError):
            pass  # unreadable cache entry; recompute
    bundle = extract_features(audio, config, odf=odf)
    if use_cache:
        cached.parent.mkdir(parents=True, exist_ok=True)
        tmp = cached.with_name(f".{cached.name}.{os.getpid()}.tmp")
        bundle.save(tmp)
        os.replace(tmp, cached)
    return bundle, key


def segmentation_doc(seg: Segmentation, config: PipelineConfig, key: str, source: str) -> dict:
    return {
        "duration_s": float(seg.duration),
        "boundaries_s": [float(b) for b in seg.boundaries],
        "method": config.method,
        "params": config.to_dict(),
        "features_key": key,
        "source": source,
    }


def write_segmentation(out_json: Path, doc: dict) -> None:
    artifacts.write_json(out_json, doc)
    if "sections" in doc:
        rows = [(s["start_s"], s["end_s"], s["label"]) for s in doc["sections"]]
        text = artifacts.csv_text(("start_s", "end_s", "label"), rows)
    else:
        edges = [0.0] + doc["boundaries_s"] + [doc["duration_s"]]
        text = artifacts.csv_text(("start_s", "end_s"), zip(edges[:-1], edges[1:]))
    artifacts.atomic_write(out_json.with_suffix(".csv"), text.encode())


def output_path(out, src: Path, many: bool, suffix: str = ".json") -> Path:
    out = Path(out)
    if not many and out.suffix.lower() == suffix:
        return out
    return out / (src.stem + suffix)


def _stderr(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def _segment_one(path: str, config_dict: dict, out: str, many: bool, use_cache: bool) -> str:
    config = PipelineConfig.from_dict(config_dict)
    src = Path(path)
    bundle, key = features_for(src, config, use_cache)
    seg = segment(bundle, config)
    target = output_path(out, src, many)
    write_segmentation(target, segmentation_doc(seg, config, key, src.name))
    return str(target)


def _run_batch(fn, jobs: int, calls: list) -> list:
    """Run ``fn(*call)`` for each call, in worker processes when jobs > 1.

    Returns (result, error) pairs in input order.
    """
    results = []
    if jobs <= 1 or len(calls) <= 1:
        for call in calls:
            try:
                results.append((fn(*call), None))
            except TalasegError as exc:
                results.append((None, exc))
        return results
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *call) for call in calls]
        for fut in futures:
            try:
                results.append((fut.result(), None))
            except TalasegError as exc:
                results.append((None, exc))
    return results


def _report_batch(inputs, results) -> int:
    code = 0
    for path, (res, err) in zip(inputs, results):
        if err is not None:
            _stderr(f"error: {path}: {err}")
            code = max(code, err.exit_code)
        else:
            print(res)
    return code


def cmd_segment(args) -> int:
    config = load_config(args)
    many = len(args.inputs) > 1
    calls = [(p, config.to_dict(), args.out, many, not args.no_cache) for p in args.inputs]
    return _report_batch(args.inputs, _run_batch(_segment_one, args.jobs, calls))


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise AudioReadError(f"missing input {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise AudioReadError(f"cannot read {path}: {exc}") from exc


def cmd_label(args) -> int:
    doc = _read_json(args.segmentation)
    if "sections" in doc:
        raise DegenerateInputError("segmentation is already labeled")
    try:
        seg = Segmentation(np.asarray(doc["boundaries_s"], float), float(doc["duration_s"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise AudioReadError(f"malformed segmentation {args.segmentation}: {exc}") from exc
    if len(seg.boundaries) == 0:
        raise DegenerateInputError("empty segmentation")
    feats = Path(args.features) if args.features else cache_dir() / f"{doc.get('features_key', '')}.npz"
    if not feats.is_file():
        raise AudioReadError(f"missing feature cache {feats}")
    bundle = FeatureBundle.load(feats)
    labels = label(bundle, seg)
    doc = dict(doc)
    doc["sections"] = labels.to_list()
    out = Path(args.out) if args.out else Path(args.segmentation).with_suffix(".labeled.json")
    write_segmentation(out, doc)
    print(out)
    return 0


def _pred_from_doc(doc: dict, path) -> GroundTruth:
    try:
        return GroundTruth.from_dict(doc)
    except ValueError as exc:
        raise AudioReadError(f"{path}: {exc}") from exc


def evaluate_pair(pred_path, truth_path, tol: float):
    pred = _pred_from_doc(_read_json(pred_path), pred_path)
    truth = _pred_from_doc(_read_json(truth_path), truth_path)
    rep = evaluate_boundaries(pred.boundaries, truth.boundaries, tol)
    extra = {}
    if pred.sections and truth.sections:
        try:
            rep.frame_accuracy = frame_accuracy(pred.sections, truth.sections,
                                                pred.duration, truth.duration)
        except ValueError as exc:
            raise AudioReadError(f"{pred_path} vs {truth_path}: {exc}") from exc
    if truth.sections:
        extra = {k: v.to_dict() for k, v in per_section_scores(pred.boundaries, truth, tol).items()}
    return rep, extra


def cmd_eval(args) -> int:
    files = args.files
    if len(files) < 2 or len(files) % 2:
        raise AudioReadError("eval needs PRED TRUTH pairs")
    pairs = list(zip(files[::2], files[1::2]))
    rows, reports, per = {}, [], []
    for p, t in pairs:
        rep, sections = evaluate_pair(p, t, args.tolerance)
        reports.append(rep)
        rows[Path(p).name] = rep
        per.append({"pred": Path(p).name, "truth": Path(t).name,
                    "report": rep.to_dict(), "sections": sections})
    if len(pairs) == 1:
        out = {"report": reports[0].to_dict(), "sections": per[0]["sections"]}
    else:
        avg = average_reports(reports)
        rows["mean"] = avg
        out = {"concerts": per, "average": avg}
    print(format_table(rows))
    if args.out:
        artifacts.write_json(args.out, out)
    return 0


def _synth_one(spec: ConcertSpec, out_dir: Path, name: str) -> list:
    g = generate_concert(spec)
    written = []
    if g.audio is not None:
        target = out_dir / f"{name}.wav"
        tmp = target.with_name(f".{target.name}.tmp")
        write_wav(tmp, g.audio)
        os.replace(tmp, target)
    else:
        target = out_dir / f"{name}.csv"
        artifacts.write_csv(target, ("time_s", "value"), zip(g.odf.times, g.odf.values))
    written.append(target)
    artifacts.write_json(out_dir / f"{name}.truth.json", g.truth.to_dict())
    artifacts.write_json(out_dir / f"{name}.spec.json", spec.to_dict())
    written += [out_dir / f"{name}.truth.json", out_dir / f"{name}.spec.json"]
    return written


def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    if args.spec:
        try:
            spec = ConcertSpec.from_dict(_read_json(args.spec))
        except (KeyError, TypeError) as exc:
            raise AudioReadError(f"malformed spec {args.spec}: {exc}") from exc
        if args.mode:
            spec.render_mode = args.mode
        jobs.append((spec, out_dir, Path(args.spec).stem.replace(".spec", "")))
    else:
        seed = 1 if args.seed is None else args.seed
        specs = statistics_batch(args.batch, seed, tuple(args.duration), args.mode or "audio")
        jobs += [(s, out_dir, f"concert_{s.seed:04d}") for s in specs]
    results = _run_batch(_synth_one, args.jobs, jobs)
    code = 0
    for (_, _, name), (res, err) in zip(jobs, results):
        if err is not None:
            _stderr(f"error: {name}: {err}")
            code = max(code, err.exit_code)
        else:
            for p in res:
                print(p)
    return code


def cmd_render(args) -> int:
    config = load_config(args)
    bundle, _ = features_for(args.input, config, not args.no_cache)
    prefix = Path(args.out)
    kind = args.kind
    if kind == "odf":
        artifacts.write_csv(prefix.with_suffix(".csv"), ("time_s", "value"),
                            zip(bundle.odf.times, bundle.odf.values))
        print(prefix.with_suffix(".csv"))
    elif kind == "rhythmogram":
        rg = bundle.rhythmogram
        header = ["time_s"] + [f"lag_{lag:.2f}" for lag in rg.lags]
        rows = (np.concatenate([[t], row]) for t, row in zip(rg.times, rg.matrix))
        artifacts.write_csv(prefix.with_suffix(".csv"), header, rows)
        artifacts.write_pgm(prefix.with_suffix(".pgm"), artifacts.rhythmogram_image(rg.matrix))
        print(prefix.with_suffix(".csv"))
        print(prefix.with_suffix(".pgm"))
    elif kind == "novelty":
        nov = bundle.novelty
        cols = [nov[lab] for lab in LABELS]
        rows = (np.concatenate([[t], vals]) for t, vals in zip(grid_times(nov.n_frames), np.array(cols).T))
        artifacts.write_csv(prefix.with_suffix(".csv"), ("time_s",) + LABELS, rows)
        print(prefix.with_suffix(".csv"))
    elif kind == "ssm":
        source = {"rhythmogram": bundle.rhythmogram.matrix,
                  "posterior": bundle.posteriors.matrix,
                  "mfcc": None if bundle.mfcc is None else bundle.mfcc.matrix}[args.feature]
        if source is None:
            raise DegenerateInputError(f"no {args.feature} features for this input")
        artifacts.write_pgm(prefix.with_suffix(".pgm"), artifacts.distance_image(ssm(source)))
        print(prefix.with_suffix(".pgm"))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="talaseg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def pipeline_flags(p):
        p.add_argument("--config", help="pipeline config JSON (or a previous output JSON)")
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--seed", type=int, help="GMM seed")
        p.add_argument("--no-cache", action="store_true", help=f"skip the feature cache (${CACHE_ENV})")

    p = sub.add_parser("segment", help="find composition boundaries in WAV files or ODF CSVs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", default=".", help="output JSON path (single input) or directory")
    p.add_argument("--jobs", type=int, default=1)
    pipeline_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("label", help="add Alap/Pe/Ka/GTC sections to a segmentation")
    p.add_argument("segmentation")
    p.add_argument("--features", help="feature cache file (default: looked up by features_key)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("files", nargs="+", metavar="PRED TRUTH")
    p.add_argument("--tolerance", type=float, default=5.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render synthetic concerts with ground truth")
    p.add_argument("spec", nargs="?", help="concert spec JSON; omit for a statistics-matched batch")
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float, nargs=2, default=(900.0, 4800.0), metavar=("LO", "HI"))
    p.add_argument("--mode", choices=("audio", "odf"))
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="dump figure data as CSV / PGM")
    p.add_argument("kind", choices=("odf", "rhythmogram", "novelty", "ssm"))
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--feature", choices=("rhythmogram", "posterior", "mfcc"), default="rhythmogram",
                   help="features for the ssm image")
    pipeline_flags(p)
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TalasegError as exc:
        _stderr(f"error: {exc}")
        return exc.exit_code
    except (OSError, ValueError) as exc:
        _stderr(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
