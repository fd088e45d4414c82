"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import argparse
import json
import sys

import numpy as np

from . import metrics as MT
from . import model as M
from . import noise as NS
from . import ops
from . import phantom as PH
from .imageio import ImageError, RoiRect, crop_with, load_image, pad_to_multiple, save_image
from .losses import LossConfig
from .train import PAD_MODULUS, TrainConfig, lambda_grid, train_single_image


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _infer_format(path, fmt=None):
    if fmt:
        return fmt
    low = path.lower()
    if low.endswith((".raw", ".f32", ".rawf32", ".bin")):
        return "rawf32"
    if low.endswith(".png"):
        return "png16"
    raise UsageError(f"cannot infer image format from {path!r}; pass an explicit format")


def _load(path, fmt=None):
    fmt = _infer_format(path, fmt)
    if fmt == "png16":
        # accept either PNG depth on input
        from PIL import Image as PILImage

        mode = PILImage.open(path).mode
        fmt = "png8" if mode == "L" else "png16"
    return load_image(path, fmt), fmt


def _parse_roi(text):
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 4:
        raise UsageError(f"ROI must be x0,y0,x1,y1 — got {text!r}")
    return RoiRect(*parts)


def _emit(doc, as_json):
    if as_json:
        print(json.dumps(doc))
    else:
        for k, v in doc.items():
            print(f"{k}: {v}")


def _train_flags(p):
    p.add_argument("--stages", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--lambda", dest="reg_weight", type=float, default=350.0)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--els", choices=("els", "random", "none"), default="els")


def cmd_denoise(args):
    img, _ = _load(args.input, args.input_format)
    padded, pad = pad_to_multiple(img, PAD_MODULUS)
    train_cfg = TrainConfig(
        epochs=args.epochs, learning_rate=args.lr, seed=args.seed, els_mode=args.els
    )
    loss_cfg = LossConfig(reg_weight=args.reg_weight)
    model, report = train_single_image(
        padded, train_cfg, loss_cfg, n_stages=args.stages
    )
    out, maps = M.denoise(padded, model)
    save_image(crop_with(out, pad), args.output, _infer_format(args.output, args.output_format))
    if args.export_sigma:
        for s, m in enumerate(maps):
            M.save_sigma_maps(m, s, args.export_sigma)
    if args.checkpoint:
        M.save_checkpoint(model, args.checkpoint)
    if args.report:
        with open(args.report, "w") as f:
            json.dump(
                report.to_dict(
                    config={
                        "stages": args.stages,
                        "lambda": args.reg_weight,
                        "epochs": args.epochs,
                        "lr": args.lr,
                        "seed": args.seed,
                        "els": args.els,
                    }
                ),
                f,
            )
    _emit({"output": args.output, "final_loss": report.loss_per_epoch[-1]}, args.json)
    return 0


def cmd_refilter(args):
    img, _ = _load(args.input, args.input_format)
    padded, pad = pad_to_multiple(img, PAD_MODULUS)
    model = M.load_checkpoint(args.checkpoint)
    maps = []
    for s in range(model.meta.n_stages):
        m, _stage = M.load_sigma_maps(f"{args.sigma}/sigma_stage{s}.json")
        maps.append(m)
    if args.edit:
        with open(args.edit) as f:
            edits = json.load(f)
        if not isinstance(edits, list):
            raise ValueError("edit file must hold a JSON list of edits")
        for e in edits:
            edit = M.SigmaEdit(
                stage=int(e["stage"]),
                region=RoiRect(*e["region"]),
                multiplier_r=float(e.get("multiplier_r", 1.0)),
                multiplier_x=float(e.get("multiplier_x", 1.0)),
                multiplier_y=float(e.get("multiplier_y", 1.0)),
                clamp_max=e.get("clamp_max", {}),
            )
            maps[edit.stage] = M.apply_sigma_edit(
                maps[edit.stage], edit, model.meta.patch_size
            )
    out = M.refilter(padded, model, maps)
    save_image(crop_with(out, pad), args.output, _infer_format(args.output, args.output_format))
    _emit({"output": args.output}, args.json)
    return 0


def cmd_metrics(args):
    a, _ = _load(args.a, args.format)
    b, _ = _load(args.b, args.format)
    p = MT.psnr(a, b, args.range)
    doc = {"psnr": "inf" if p == float("inf") else p, "ssim": MT.ssim(a, b, args.range)}
    if args.roi_signal and args.roi_bg:
        doc["cnr_a"] = MT.cnr(a, _parse_roi(args.roi_signal), _parse_roi(args.roi_bg))
        doc["cnr_b"] = MT.cnr(b, _parse_roi(args.roi_signal), _parse_roi(args.roi_bg))
    print(json.dumps(doc))
    return 0


def cmd_simulate(args):
    if args.phantom != "shepp-logan":
        raise UsageError(f"unknown phantom {args.phantom!r}")
    clean = PH.shepp_logan(args.size)
    if args.photons is not None:
        noisy = NS.add_poisson_noise(clean, args.photons, args.seed)
    else:
        noisy = NS.add_correlated_gaussian_noise(
            clean, args.gauss_sigma, args.corr, args.seed
        )
    save_image(clean, args.out_clean, _infer_format(args.out_clean))
    save_image(noisy, args.out_noisy, _infer_format(args.out_noisy))
    _emit({"clean": args.out_clean, "noisy": args.out_noisy}, args.json)
    return 0


def _parse_lambda_grid(text):
    # "10@200:500" -> 10 uniform values on [200, 500]
    try:
        n, rng = text.split("@")
        lo, hi = rng.split(":")
        return lambda_grid(float(lo), float(hi), int(n))
    except ValueError as e:
        raise UsageError(f"bad --lambdas spec {text!r}; expected N@LO:HI") from e


def cmd_lambda_sweep(args):
    img, _ = _load(args.input, args.input_format)
    ref, _ = _load(args.reference, args.input_format)
    padded, pad = pad_to_multiple(img, PAD_MODULUS)
    rows = []
    for lam in _parse_lambda_grid(args.lambdas):
        model, _report = train_single_image(
            padded,
            TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=args.seed, els_mode=args.els),
            LossConfig(reg_weight=float(lam)),
            n_stages=args.stages,
        )
        out, _ = M.denoise(padded, model)
        out = crop_with(out, pad)
        rows.append(
            {"lambda": float(lam), "psnr": MT.psnr(ref, out), "ssim": MT.ssim(ref, out)}
        )
    best = max(range(len(rows)), key=lambda i: rows[i]["psnr"])
    for i, r in enumerate(rows):
        r["best"] = i == best
    print(json.dumps({"rows": rows}))
    return 0


def cmd_els_validate(args):
    img, _ = _load(args.input, args.input_format)
    if img.shape[0] % 4 or img.shape[1] % 4:
        img = img[: img.shape[0] - img.shape[0] % 4, : img.shape[1] - img.shape[1] % 4]
    g1, g2 = ops.downsample_pair(img)
    doc = {
        "identity": MT.els_validation(g1, g2, "identity", args.content_scale).to_dict(),
        "els": MT.els_validation(g1, g2, "els", args.content_scale).to_dict(),
    }
    print(json.dumps(doc))
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(args.workdir)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as e:  # uvicorn exits non-zero when the port is taken
        return int(e.code or 0) and 2
    return 0


def build_parser():
    p = _Parser(prog="zsdenoise", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("denoise", help="train on one image and denoise it")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--input-format", choices=("png8", "png16", "rawf32"))
    d.add_argument("--output-format", choices=("png8", "png16", "rawf32"))
    _train_flags(d)
    d.add_argument("--export-sigma", metavar="DIR")
    d.add_argument("--checkpoint")
    d.add_argument("--report")
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_denoise)

    r = sub.add_parser("refilter", help="re-run the filter with edited sigma maps")
    r.add_argument("--input", required=True)
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--sigma", required=True, metavar="DIR")
    r.add_argument("--edit", metavar="FILE")
    r.add_argument("--output", required=True)
    r.add_argument("--input-format", choices=("png8", "png16", "rawf32"))
    r.add_argument("--output-format", choices=("png8", "png16", "rawf32"))
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_refilter)

    m = sub.add_parser("metrics", help="PSNR/SSIM/CNR between two images")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--range", type=float, default=1.0)
    m.add_argument("--format", choices=("png8", "png16", "rawf32"))
    m.add_argument("--roi-signal")
    m.add_argument("--roi-bg")
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("simulate", help="write a clean/noisy phantom pair")
    s.add_argument("--phantom", default="shepp-logan")
    s.add_argument("--size", type=int, default=256)
    s.add_argument("--photons", type=float)
    s.add_argument("--gauss-sigma", type=float, default=0.08)
    s.add_argument("--corr", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-clean", required=True)
    s.add_argument("--out-noisy", required=True)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("lambda-sweep", help="train per lambda, report PSNR/SSIM")
    w.add_argument("--input", required=True)
    w.add_argument("--reference", required=True)
    w.add_argument("--lambdas", default="10@200:500")
    w.add_argument("--input-format", choices=("png8", "png16", "rawf32"))
    _train_flags(w)
    w.set_defaults(func=cmd_lambda_sweep)

    v = sub.add_parser("els-validate", help="shuffle decorrelation report")
    v.add_argument("--input", required=True)
    v.add_argument("--input-format", choices=("png8", "png16", "rawf32"))
    v.add_argument("--content-scale", type=float, default=3.0)
    v.set_defaults(func=cmd_els_validate)

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--workdir", required=True)
    srv.set_defaults(func=cmd_serve)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: missing file: {e}", file=sys.stderr)
        return 2
    except (ImageError, ValueError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
