"""``motionsrf`` command line.

Exit status: 0 on success, 1 for usage errors, 2 for bad or missing data.
"""

import argparse
import logging
import sys
from dataclasses import fields

from ..config import ForestConfig, load_config
from ..errors import DataError
from . import commands

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _forest_flags(p):
    g = p.add_argument_group("forest parameters (override --config)")
    for f in fields(ForestConfig):
        if f.name == "seed":
            continue
        kind = int if f.type in (int, "int") else float
        g.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None,
                       metavar=kind.__name__.upper())


def _canny_flags(p):
    g = p.add_argument_group("edge detection")
    g.add_argument("--canny-sigma", type=float, default=None)
    g.add_argument("--canny-low", type=float, default=None)
    g.add_argument("--canny-high", type=float, default=None)


def _canny(args):
    out = {}
    for k in ("sigma", "low", "high"):
        v = getattr(args, "canny_" + k, None)
        if v is not None:
            out[k] = v
    return out


def build_config(args):
    cfg = ForestConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    changes = {f.name: getattr(args, f.name) for f in fields(ForestConfig)
               if f.name != "seed" and getattr(args, f.name, None) is not None}
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes)


def _steps(text):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def make_parser():
    parser = _Parser(prog="motionsrf", description="Motion prediction from still images "
                     "with structured regression forests.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", help="train forests from a frame/flow manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True, help="model path (class suffix added per label)")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", help="write growth-trace lines here")
    _forest_flags(p)

    p = sub.add_parser("predict", help="predict dense flow for a still image")
    p.add_argument("image")
    p.add_argument("-m", "--model", action="append", required=True,
                   help="model file; repeat to merge forests")
    p.add_argument("-o", "--out", required=True, help="output .flo")
    p.add_argument("--png", help="colour-coded flow PNG")
    p.add_argument("--warp-steps", type=_steps, default=[], help="e.g. 1,2,4")
    p.add_argument("--seed", type=int, default=None)
    _canny_flags(p)

    p = sub.add_parser("eval", help="score a prediction at the image's edges")
    p.add_argument("prediction", help=".flo file or model file")
    p.add_argument("reference", help="reference .flo")
    p.add_argument("image", help="image used for the edge mask")
    p.add_argument("--label", default="")
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    _canny_flags(p)

    p = sub.add_parser("detect-unexpected", help="flag frames whose flow disagrees with prediction")
    p.add_argument("manifest")
    p.add_argument("-m", "--model", action="append", required=True)
    p.add_argument("--heatmaps", help="directory for per-frame EPE heatmaps")
    p.add_argument("--max-side", type=int, default=commands.MAX_SIDE)
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    _canny_flags(p)

    p = sub.add_parser("pool", help="flow-based pooling of dense descriptors")
    p.add_argument("image")
    p.add_argument("-m", "--model", action="append", required=True)
    p.add_argument("-o", "--out", required=True, help="output .npz")
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--png", help="pool visualisation")
    p.add_argument("--tau", type=float, default=commands.POOL_TAU)
    p.add_argument("--band-split", type=float, default=None,
                   help="magnitude band split (default: median moving magnitude)")
    p.add_argument("--seed", type=int, default=None)
    _canny_flags(p)

    p = sub.add_parser("synth", help="generate a synthetic textured-shape corpus")
    p.add_argument("out_dir")
    p.add_argument("--rule", action="append", required=True,
                   help="texture:dx,dy, e.g. checkerboard:2,0 (repeatable)")
    p.add_argument("--pairs", type=int, default=10)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--per-class", action="store_true", help="one labelled class per pair")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("warp", help="forward-warp an image by a flow field")
    p.add_argument("image")
    p.add_argument("flow")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--step", type=float, default=1.0)

    p = sub.add_parser("flow2png", help="colour-code a .flo file")
    p.add_argument("flow")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--max-mag", type=float, default=None)
    return parser


def run(args):
    c = args.command
    if c == "train":
        commands.cmd_train(args.manifest, build_config(args), args.out, args.trace)
    elif c == "predict":
        commands.cmd_predict(args.model, args.image, args.out, args.png, args.warp_steps,
                             canny=_canny(args))
    elif c == "eval":
        commands.cmd_eval(args.prediction, args.reference, args.image, args.label,
                          canny=_canny(args), as_json=args.json)
    elif c == "detect-unexpected":
        if args.max_side < 1:
            raise UsageError("--max-side must be positive")
        commands.cmd_detect_unexpected(args.model, args.manifest, args.heatmaps, args.max_side,
                                       canny=_canny(args), as_json=args.json)
    elif c == "pool":
        if args.stride < 1:
            raise UsageError("--stride must be positive")
        commands.cmd_pool(args.model, args.image, args.out, args.stride, args.png, args.tau,
                          args.band_split, canny=_canny(args))
    elif c == "synth":
        if args.pairs < 1 or args.width < 8 or args.height < 8:
            raise UsageError("need --pairs >= 1 and a frame of at least 8x8")
        commands.cmd_synth(args.rule, args.out_dir, args.seed, args.pairs, args.width,
                           args.height, args.per_class)
    elif c == "warp":
        commands.cmd_warp(args.image, args.flow, args.out, args.step)
    elif c == "flow2png":
        commands.cmd_flow2png(args.flow, args.out, args.max_mag)


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except UsageError as exc:
        print(f"motionsrf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"motionsrf: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
