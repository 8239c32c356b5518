"""Command-line interface.

Subcommands: ``eval`` (single-variant dataset evaluation), ``ablate`` (the
2x2 direct/wrapped x 1-pass/ensemble matrix), ``compare`` (delta table
between two saved reports), ``noise`` (export noisy PNGs), ``prep-subimages``
(tile an oversized corpus), ``sample-patches`` (deterministic sampling plan).

Exit codes: 0 all images processed, 2 partial per-image failures, 1 fatal.

``--config FILE`` loads flat ``key = value`` defaults (keys are the long
flag names with underscores, e.g. ``tile_window = 768``); explicit command
line flags override file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import BackendError, make_backend
from .config import ConfigError, parse_kv
from .dataprep import (DataprepError, default_stage_configs, make_subimages,
                       read_manifest, sample_patches)
from .harness import (ENSEMBLE_MODES, HarnessError, RunConfig, list_images,
                      run_ablation_matrix, run_eval)
from .image import crop_to_multiple, load_png, save_png
from .noise import NoiseSpec, noisy_for_image
from .report import (ReportMismatchError, compare_runs, loads_json,
                     render_comparison, render_report)
from .tiling import TileSpec

_FORMATS = ("json", "canonical-json", "csv", "markdown")


def _flag_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


# Config-file keys and the conversion applied before they become defaults.
_CONFIG_TYPES = {
    "clean": str, "noisy": str, "out": str,
    "sigma": float, "seed": int, "clip_noise": _flag_bool,
    "backend": str, "backend_cmd": str, "backend_workdir": str,
    "backend_timeout": float,
    "ensemble": str, "tile_window": int, "tile_overlap": int, "blend": str,
    "as_8bit": _flag_bool, "psnr_per_channel": _flag_bool,
    "workers": int, "format": str,
}


def _load_config_defaults(path: str) -> dict:
    kv = parse_kv(Path(path).read_text(encoding="utf-8"))
    out = {}
    for key, raw in kv.items():
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _CONFIG_TYPES[key](raw)
    return out


def _add_eval_args(p: argparse.ArgumentParser, d: dict, ablate: bool):
    get = d.get
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--clean", default=get("clean"),
                   help="directory of clean PNGs")
    p.add_argument("--noisy", default=get("noisy"),
                   help="paired noisy PNG directory (disables synthesis)")
    p.add_argument("--out", default=get("out"), help="write the report here")
    p.add_argument("--sigma", type=float, default=get("sigma", 50.0),
                   help="noise std on the 0-255 scale")
    p.add_argument("--seed", type=int, default=get("seed", 0))
    p.add_argument("--clip-noise", action=argparse.BooleanOptionalAction,
                   default=get("clip_noise", False),
                   help="clip noisy samples to [0,1]")
    p.add_argument("--backend", default=get("backend", "identity"),
                   help="backend spec: kind[:key=val,...]")
    p.add_argument("--backend-cmd", default=get("backend_cmd"),
                   help="external backend command template with {in} and {out}")
    p.add_argument("--backend-workdir", default=get("backend_workdir"))
    p.add_argument("--backend-timeout", type=float, default=get("backend_timeout", 600.0))
    p.add_argument("--ensemble", choices=ENSEMBLE_MODES,
                   default=get("ensemble", "off"))
    p.add_argument("--tile-window", type=int,
                   default=get("tile_window", 768 if ablate else None),
                   help="tile window in pixels" + ("" if ablate else "; omit for direct"))
    p.add_argument("--tile-overlap", type=int, default=get("tile_overlap", 0))
    p.add_argument("--blend", choices=("uniform", "hann"),
                   default=get("blend", "uniform"))
    p.add_argument("--as-8bit", action=argparse.BooleanOptionalAction,
                   default=get("as_8bit", False),
                   help="quantize to 8-bit before computing metrics")
    p.add_argument("--psnr-per-channel", action=argparse.BooleanOptionalAction,
                   default=get("psnr_per_channel", False),
                   help="average per-channel PSNRs instead of joint pooling")
    p.add_argument("--workers", type=int, default=get("workers", 1))
    p.add_argument("--format", choices=_FORMATS, default=get("format", "json"))


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    d = defaults or {}
    parser = argparse.ArgumentParser(prog="denoisebench",
                                     description="Deterministic denoising benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_eval_args(sub.add_parser("eval", help="evaluate one configuration"), d, ablate=False)
    _add_eval_args(sub.add_parser("ablate", help="run the 2x2 inference ablation"), d, ablate=True)

    c = sub.add_parser("compare", help="delta table between two reports")
    c.add_argument("report_a")
    c.add_argument("report_b")
    c.add_argument("--label-a", default="A")
    c.add_argument("--label-b", default="B")
    c.add_argument("--format", choices=("markdown", "json", "csv"), default="markdown")
    c.add_argument("--out")

    n = sub.add_parser("noise", help="export noisy PNGs")
    n.add_argument("--clean", required=True)
    n.add_argument("--out-dir", required=True)
    n.add_argument("--sigma", type=float, default=50.0)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--clip-noise", action=argparse.BooleanOptionalAction, default=False)
    n.add_argument("--depth", type=int, choices=(8, 16), default=8)

    s = sub.add_parser("prep-subimages", help="split a corpus into tiles")
    s.add_argument("--src", required=True)
    s.add_argument("--dst", required=True)
    s.add_argument("--target", type=int, default=2048,
                   help="target tile side in pixels")
    s.add_argument("--min-side", type=int, default=256,
                   help="discard tiles smaller than this on either axis")

    t = sub.add_parser("sample-patches", help="deterministic patch-sampling plan")
    t.add_argument("--manifest", required=True)
    t.add_argument("--stage", choices=("I", "II"), default="I")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--n", type=int, default=16)
    t.add_argument("--out")

    return parser


def _emit(text: str, out_path: str | None):
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _run_config_from_args(args) -> RunConfig:
    if not args.clean:
        raise HarnessError("--clean is required (flag or config file)")
    tile = None
    if args.tile_window is not None:
        tile = TileSpec(window=args.tile_window, overlap=args.tile_overlap,
                        blend=args.blend)
    backend = make_backend(args.backend, noise_sigma=args.sigma / 255.0,
                           cmd=args.backend_cmd, workdir=args.backend_workdir,
                           timeout=args.backend_timeout)
    return RunConfig(clean_dir=args.clean, noisy_dir=args.noisy,
                     sigma=args.sigma, seed=args.seed, clip_noise=args.clip_noise,
                     backend=backend, ensemble_mode=args.ensemble, tile=tile,
                     as_8bit=args.as_8bit, psnr_per_channel=args.psnr_per_channel,
                     workers=args.workers)


def _cmd_eval(args, ablate: bool) -> int:
    cfg = _run_config_from_args(args)
    report = run_ablation_matrix(cfg) if ablate else run_eval(cfg)
    _emit(render_report(report, args.format), args.out)
    return 2 if report.failures else 0


def _cmd_compare(args) -> int:
    a = loads_json(Path(args.report_a).read_text(encoding="utf-8"))
    b = loads_json(Path(args.report_b).read_text(encoding="utf-8"))
    cmp = compare_runs(a, b, label_a=args.label_a, label_b=args.label_b)
    _emit(render_comparison(cmp, args.format), args.out)
    return 0


def _cmd_noise(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = NoiseSpec(sigma_8bit=args.sigma, seed=args.seed,
                     clip_mode="clip01" if args.clip_noise else "none")
    failures = 0
    images = list_images(Path(args.clean))
    for image_id, path in images:
        try:
            clean = crop_to_multiple(load_png(path), 8)
            save_png(noisy_for_image(clean, spec, image_id),
                     out_dir / path.name, depth=args.depth)
        except Exception as exc:
            print(f"{image_id}: {type(exc).__name__}: {exc}", file=sys.stderr)
            failures += 1
    if failures == len(images):
        return 1
    return 2 if failures else 0


def _cmd_prep(args) -> int:
    entries = make_subimages(args.src, args.dst, target_long_side=args.target,
                             min_side=args.min_side)
    summary = entries[-1]
    print(json.dumps(summary, sort_keys=True))
    return 2 if summary.get("errors") else 0


def _cmd_sample(args) -> int:
    stage1, stage2 = default_stage_configs()
    cfg = stage1 if args.stage == "I" else stage2
    samples = sample_patches(read_manifest(args.manifest), cfg, args.seed, args.n)
    text = "".join(json.dumps(s.to_dict(), sort_keys=True) + "\n" for s in samples)
    _emit(text, args.out)
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "config", None):
            args = build_parser(_load_config_defaults(args.config)).parse_args(argv)
        if args.command == "eval":
            return _cmd_eval(args, ablate=False)
        if args.command == "ablate":
            return _cmd_eval(args, ablate=True)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "noise":
            return _cmd_noise(args)
        if args.command == "prep-subimages":
            return _cmd_prep(args)
        if args.command == "sample-patches":
            return _cmd_sample(args)
        raise AssertionError(f"unhandled command {args.command}")
    except (HarnessError, BackendError, ConfigError, DataprepError,
            ReportMismatchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
