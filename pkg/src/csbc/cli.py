"""Command line entry point: ``csbc {synth,calib,train,fuse,eval,plot}``.

Every subcommand accepts ``--config <bundle>``, an INI file. Keys of the
section named after the subcommand supply flag values (flag name without
the leading dashes, ``-`` or ``_`` both accepted; list values are
whitespace separated); explicit flags win. The bundle may also hold
``[scene]``, ``[profile:<id>]`` and ``[calibration:<id>]`` sections.

Exit codes: 0 success, 1 runtime or data error, 2 usage or bundle error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

from csbc import __version__
from csbc.calibration import CalibrationMap, fit_calibration
from csbc.errors import CsbcError
from csbc.evaluation import curve_csv, curve_svg, det_curve, log_average_miss_rate, read_curve_csv
from csbc.features import ImageDirectory, make_extractor, save_pgm
from csbc.fusion import FusionConfig, fuse_csbc, fuse_sc
from csbc.geometry import greedy_nms
from csbc.model_io import (
    DetectionSet,
    load_detections,
    read_ground_truth,
    write_detections,
    write_ground_truth,
)
from csbc.pls import load_model_file, save_model_file
from csbc.synth import CLASSES, DetectorProfile, SceneConfig, default_profiles, generate_dataset
from csbc.trainer import train_detector_model


class UsageError(Exception):
    """Bad flags or bundle; exit code 2."""


# ---------------------------------------------------------------------------
# bundle


def read_bundle(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config bundle {path}: {exc}") from None
    except configparser.Error as exc:
        raise UsageError(f"malformed config bundle {path}: {exc}") from None
    return cp


def _apply_bundle(args, parser: argparse.ArgumentParser, bundle) -> None:
    if bundle is None or not bundle.has_section(args.command):
        return
    section = {k.replace("-", "_"): v for k, v in bundle.items(args.command)}
    actions = {a.dest: a for a in parser._actions}
    for key, raw in section.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown key {key!r} in bundle section [{args.command}]")
        if getattr(args, key) is not None:
            continue
        try:
            if isinstance(action, argparse._StoreTrueAction):
                value = configparser.ConfigParser.BOOLEAN_STATES[raw.strip().lower()]
            elif action.nargs in ("+", "*"):
                conv = action.type or str
                value = [conv(v) for v in raw.split()]
            else:
                value = (action.type or str)(raw.strip())
        except (KeyError, ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad value for {key!r} in bundle: {raw!r} ({exc})") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"bundle value {value!r} for {key!r} not in {list(action.choices)}")
        setattr(args, key, value)


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n) in (None, [])]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command}: missing required option(s) {flags}")


def _defaults(args, **defaults) -> None:
    for k, v in defaults.items():
        if getattr(args, k) is None:
            setattr(args, k, v)


def _pair(text: str) -> tuple[float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    return float(parts[0]), float(parts[1])


def _fmt(v: float) -> str:
    return repr(float(v))


def scene_from_bundle(bundle) -> SceneConfig:
    if bundle is None or not bundle.has_section("scene"):
        return SceneConfig()
    s = bundle["scene"]
    base = SceneConfig()
    try:
        return SceneConfig(
            width=s.getint("width", base.width),
            height=s.getint("height", base.height),
            n_pedestrians=s.getint("n_pedestrians", base.n_pedestrians),
            n_distractors={c: s.getint(c, base.n_distractors.get(c, 0)) for c in CLASSES},
            box_height=(s.getint("box_height_min", base.box_height[0]), s.getint("box_height_max", base.box_height[1])),
            aspect=s.getfloat("aspect", base.aspect),
            overlap_budget=s.getfloat("overlap_budget", base.overlap_budget),
            noise_sd=s.getfloat("noise_sd", base.noise_sd),
            max_tries=s.getint("max_tries", base.max_tries),
        )
    except ValueError as exc:
        raise UsageError(f"bad [scene] section: {exc}") from None


def profiles_from_bundle(bundle, seed: int) -> tuple[DetectorProfile, ...]:
    names = [s for s in (bundle.sections() if bundle else []) if s.startswith("profile:")]
    if not names:
        return default_profiles(seed)
    out = []
    for name in names:
        s = bundle[name]
        try:
            out.append(
                DetectorProfile(
                    detector_id=name.split(":", 1)[1],
                    tp_rate=s.getfloat("tp_rate", 0.8),
                    fp_rate_per_class={c: s.getfloat(f"fp_{c}") for c in CLASSES if f"fp_{c}" in s},
                    localization_sigma=s.getfloat("localization_sigma", 2.0),
                    score_tp=_pair(s.get("score_tp", "1.0, 0.3")),
                    score_fp=_pair(s.get("score_fp", "0.8, 0.3")),
                    rng_seed=s.getint("rng_seed", 0) + 7919 * seed,
                )
            )
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad [{name}] section: {exc}") from None
    return tuple(out)


def read_calibrations(path) -> dict[str, CalibrationMap]:
    cp = read_bundle(path)
    cals = {}
    for name in cp.sections():
        if not name.startswith("calibration:"):
            continue
        s = cp[name]
        det_id = name.split(":", 1)[1]
        try:
            cals[det_id] = CalibrationMap(
                det_id,
                s.getfloat("slope"),
                s.getfloat("intercept"),
                (s.getfloat("source_low"), s.getfloat("source_high")),
            )
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad [{name}] section in {path}: {exc}") from None
    return cals


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    _require(args, "out")
    _defaults(args, seed=0, frames=10)
    if args.frames < 0:
        raise UsageError("--frames must be non-negative")
    try:
        scene = scene_from_bundle(args.bundle)
        profiles = profiles_from_bundle(args.bundle, args.seed)
    except CsbcError as exc:
        raise UsageError(str(exc)) from None
    data = generate_dataset(args.seed, args.frames, profiles, scene)
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "detections").mkdir(exist_ok=True)
    for fid in data.frame_ids():
        save_pgm(out / "images" / f"{fid}.pgm", data.images[fid])
    write_ground_truth(data.gts, out / "gt.txt", header=False)
    for det_id, dets in data.detections.items():
        write_detections(dets, out / "detections" / f"{det_id}.txt")
    print(f"wrote {args.frames} frames, {len(data.gts)} ground-truth boxes, {len(profiles)} detectors to {out}")
    return 0


def cmd_calib(args) -> int:
    _require(args, "root", "support", "out")
    root = load_detections(args.root)
    cp = configparser.ConfigParser(interpolation=None)
    cp["calibration"] = {"root": root.detector_id}
    for path in args.support:
        dets = load_detections(path)
        cal = fit_calibration(dets.scores(), root.scores(), dets.detector_id)
        cp[f"calibration:{dets.detector_id}"] = {
            "slope": _fmt(cal.slope),
            "intercept": _fmt(cal.intercept),
            "source_low": _fmt(cal.source_range[0]),
            "source_high": _fmt(cal.source_range[1]),
        }
        print(f"{dets.detector_id}: score -> {cal.slope:.6g} * score + {cal.intercept:.6g}")
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        cp.write(fh)
    return 0


def cmd_train(args) -> int:
    _require(args, "detections", "gt", "out")
    _defaults(args, feature="hog", components=5, pls_scale=False, normalize_features=False)
    if args.components < 1:
        raise UsageError(f"--components must be >= 1, got {args.components}")
    if args.max_windows is not None and args.max_windows < 1:
        raise UsageError("--max-windows must be >= 1")
    extractor = make_extractor(args.feature, args.normalize_features)
    if extractor.tag != "external":
        _require(args, "images")
    images = ImageDirectory(args.images) if args.images else None
    gts = read_ground_truth(args.gt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "feature": extractor.tag,
        "components": args.components,
        "normalize_features": bool(args.normalize_features),
        "pls_scale": bool(args.pls_scale),
        "detectors": {},
    }
    for path in args.detections:
        dets = load_detections(path)
        model = train_detector_model(
            dets, gts, images, extractor, args.components, args.pls_scale, args.max_windows
        )
        fname = f"{dets.detector_id}.plsmodel"
        save_model_file(model, out / fname)
        rows = len(dets) if args.max_windows is None else min(len(dets), args.max_windows)
        manifest["detectors"][dets.detector_id] = {
            "file": fname,
            "rows": rows,
            "n_components": model.n_components,
        }
        print(f"{dets.detector_id}: {rows} windows, {model.n_components} components -> {out / fname}")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _nms(dets: DetectionSet, threshold: float | None) -> DetectionSet:
    if threshold is None:
        return dets
    kept = [d for fid in dets.frame_ids() for d in greedy_nms(dets.in_frame(fid), threshold)]
    return DetectionSet.from_detections(dets.detector_id, kept)


def cmd_fuse(args) -> int:
    _require(args, "root", "support", "calib", "out")
    _defaults(
        args, mode="sc", overlap=0.5, clamp=(0.0, 1.0), support_policy="all_windows",
        multiply_jaccard=False, normalize_features=False,
    )
    if args.mode == "csbc":
        _require(args, "models")
    if not 0.0 < args.overlap <= 1.0:
        raise UsageError(f"--overlap must be in (0, 1], got {args.overlap}")
    if args.nms is not None and not 0.0 <= args.nms <= 1.0:
        raise UsageError(f"--nms must be in [0, 1], got {args.nms}")
    cfg = FusionConfig(
        overlap_threshold=args.overlap,
        mode=args.mode,
        weight_clamp=tuple(args.clamp),
        support_policy=args.support_policy,
        multiply_jaccard=args.multiply_jaccard,
    )
    root = _nms(load_detections(args.root), args.nms)
    others = [_nms(load_detections(p), args.nms) for p in args.support]
    cals = read_calibrations(args.calib)

    if args.mode == "sc":
        result = fuse_sc(root, others, cals, cfg)
    else:
        models = {}
        for s in others:
            path = Path(args.models) / f"{s.detector_id}.plsmodel"
            if not path.is_file():
                raise CsbcError(f"no model file {path} for support detector {s.detector_id!r}")
            models[s.detector_id] = load_model_file(path)
        feature = args.feature
        if feature is None:
            tags = sorted({m.feature_tag for m in models.values()})
            if len(tags) != 1 or tags[0] == "external":
                raise UsageError("cannot infer --feature from the models; pass it explicitly")
            feature = tags[0]
        extractor = make_extractor(feature, args.normalize_features)
        if extractor.tag != "external":
            _require(args, "images")
        images = ImageDirectory(args.images) if args.images else None
        result = fuse_csbc(root, others, cals, models, images, extractor, cfg)

    write_detections(result.detections, args.out)
    st = result.stats
    print(f"windows in: {st.windows_in}, discarded: {st.discarded}, out: {st.windows_out}")
    return 0


def cmd_eval(args) -> int:
    _require(args, "detections", "gt", "out")
    _defaults(args, iou=0.5)
    if not 0.0 < args.iou <= 1.0:
        raise UsageError(f"--iou must be in (0, 1], got {args.iou}")
    dets = load_detections(args.detections)
    curve = det_curve(dets, read_ground_truth(args.gt), args.iou)
    Path(args.out).write_text(curve_csv(curve), encoding="utf-8")
    if args.svg:
        Path(args.svg).write_text(curve_svg({dets.detector_id: curve}), encoding="utf-8")
    print(f"{dets.detector_id}: log-average miss rate {log_average_miss_rate(curve):.2f}%")
    return 0


def cmd_plot(args) -> int:
    _require(args, "curves", "out")
    curves = {Path(p).stem: read_curve_csv(Path(p).read_text(encoding="utf-8")) for p in args.curves}
    Path(args.out).write_text(curve_svg(curves), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csbc", description="Content-based late fusion of object detectors.")
    parser.add_argument("--version", action="version", version=f"csbc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, argument_default=None)
        p.add_argument("--config", help="INI config bundle supplying default flag values")
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate a synthetic dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--out")

    p = add("calib", cmd_calib, "fit score calibration maps onto the root detector's scale")
    p.add_argument("--root")
    p.add_argument("--support", nargs="+")
    p.add_argument("--out")

    p = add("train", cmd_train, "train one PLS weighting model per detector")
    p.add_argument("--detections", nargs="+")
    p.add_argument("--gt")
    p.add_argument("--images")
    p.add_argument("--feature", help="hog, glcm, gray, hog+glcm or external:<file>")
    p.add_argument("--components", type=int)
    p.add_argument("--max-windows", type=int)
    p.add_argument("--pls-scale", action="store_true", default=None)
    p.add_argument("--normalize-features", action="store_true", default=None)
    p.add_argument("--out")

    p = add("fuse", cmd_fuse, "fuse a root detector with support detectors")
    p.add_argument("--root")
    p.add_argument("--support", nargs="+")
    p.add_argument("--models")
    p.add_argument("--calib")
    p.add_argument("--images")
    p.add_argument("--mode", choices=["sc", "csbc"])
    p.add_argument("--overlap", type=float)
    p.add_argument("--clamp", type=_pair)
    p.add_argument("--support-policy", choices=["all_windows", "best_per_detector"])
    p.add_argument("--multiply-jaccard", action="store_true", default=None)
    p.add_argument("--feature")
    p.add_argument("--normalize-features", action="store_true", default=None)
    p.add_argument("--nms", type=float, help="greedy NMS threshold applied to every input first")
    p.add_argument("--out")

    p = add("eval", cmd_eval, "miss rate vs FPPI curve and log-average miss rate")
    p.add_argument("--detections")
    p.add_argument("--gt")
    p.add_argument("--iou", type=float)
    p.add_argument("--out")
    p.add_argument("--svg")

    p = add("plot", cmd_plot, "plot curve CSV files as a log-log SVG")
    p.add_argument("--curves", nargs="+")
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    try:
        args.bundle = read_bundle(args.config) if args.config else None
        _apply_bundle(args, subparser, args.bundle)
        return args.func(args)
    except UsageError as exc:
        subparser.print_usage(sys.stderr)
        print(f"csbc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (CsbcError, OSError, ValueError) as exc:
        print(f"csbc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
