"""Command line entry point: ``smock <command> <pattern> ...``."""

from __future__ import annotations

import argparse
import json
import math
import sys

from .config import DEFAULT
from .errors import PatternSyntaxError, SmockError
from .pattern import BoundingBox, SmockingPattern, StitchId, load_pattern

DIGITS = 12


def _round(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(format(obj, f".{DIGITS}g"))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if hasattr(obj, "item"):
        return _round(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2) + "\n"


def _emit(text: str, out: str | None):
    if out:
        from .render import write_atomic
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


# -- argument parsing helpers ---------------------------------------------------------

def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("numbers must be finite")
    return vals


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def _window(text: str) -> BoundingBox:
    vals = _floats(text)
    if len(vals) == 1:
        if vals[0] <= 0:
            raise argparse.ArgumentTypeError("window half-width must be positive")
        return BoundingBox(-vals[0], -vals[0], vals[0], vals[0])
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("window is W or xmin,ymin,xmax,ymax")
    try:
        return BoundingBox(*vals)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def parse_node(pattern: SmockingPattern, text: str):
    """``x,y`` or ``stitch:j1,j2[,slot]`` with j the stitch's index point."""
    from .metric import MetricNode
    if text.startswith("stitch:"):
        vals = _floats(text[len("stitch:"):])
        if len(vals) not in (2, 3):
            raise argparse.ArgumentTypeError(f"bad stitch reference {text!r}")
        slot = int(vals[2]) if len(vals) == 3 else None
        return MetricNode.of(pattern.id_from_index((vals[0], vals[1]), slot=slot))
    return MetricNode.at(*_floats(text, 2))


def _center(pattern, args):
    if args.stitch is not None:
        return parse_node(pattern, "stitch:" + args.stitch)
    if args.point is not None:
        return parse_node(pattern, args.point)
    raise argparse.ArgumentTypeError("give --stitch or --point")


def _stitch_json(pattern: SmockingPattern, sid: StitchId) -> dict:
    return {"id": list(sid), "index": list(pattern.index_point(sid))}


# -- commands ---------------------------------------------------------------------------

def cmd_constants(args) -> int:
    from .constants import compute_constants
    pattern = load_pattern(args.pattern)
    _emit(dumps(compute_constants(pattern, args.tol).to_json()), args.out)
    return 0


def cmd_dist(args) -> int:
    from .metric import smocked_distance
    pattern = load_pattern(args.pattern)
    a, b = parse_node(pattern, args.source), parse_node(pattern, args.target)
    res = smocked_distance(pattern, a, b)
    out = res.to_json(pattern) if args.witness else {"distance": res.distance}
    _emit(dumps(out), args.out)
    return 0


def cmd_ball(args) -> int:
    from .balls import ball_raster
    from .render import raster_to_pgm, svg_document, write_atomic
    pattern = load_pattern(args.pattern)
    center = _center(pattern, args)
    radii = sorted(set([args.radius] + (args.series or [])))
    window = args.window
    big = ball_raster(pattern, center, radii[-1], args.spacing, window)
    window = window or big.window
    spacing = big.spacing
    layers = [ball_raster(pattern, center, r, spacing, window) for r in radii[:-1]] + [big]
    if args.out.endswith(".pgm"):
        write_atomic(args.out, raster_to_pgm(layers[radii.index(args.radius)]))
    else:
        write_atomic(args.out, svg_document(pattern, window, layers, DEFAULT.colors))
    info = {"radius": args.radius, "cells": [l.count() for l in layers],
            "width": big.width, "height": big.height, "spacing": spacing,
            "clipped": any(l.clipped for l in layers), "out": args.out}
    sys.stdout.write(dumps(info))
    return 0


def cmd_frontier(args) -> int:
    from .balls import frontier_stitches
    pattern = load_pattern(args.pattern)
    fs = frontier_stitches(pattern, _center(pattern, args), args.radius, args.tol)
    out = {"radius": fs.radius,
           "stitches": [dict(_stitch_json(pattern, s), distance=d)
                        for s, d in zip(fs.ids, fs.distances)]}
    _emit(dumps(out), args.out)
    return 0


def cmd_tangent_check(args) -> int:
    from .constants import compute_constants
    from .norms import NormSpec, deviation_bound_for, point_bound_check
    pattern = load_pattern(args.pattern)
    spec = NormSpec.named(args.norm)
    c = compute_constants(pattern)
    K = args.bound if args.bound is not None else deviation_bound_for(args.norm, c.depth_hi, c.l_max).K
    rep = point_bound_check(pattern, spec, K, args.samples, args.seed, args.window)
    out = {k: rep.stats[k] for k in ("max_dev", "bound_K", "exceeded", "worst_pair")}
    _emit(dumps(out), args.out)
    return 0


def cmd_gh_rescale(args) -> int:
    from .gh import convergence_experiment
    from .norms import NormSpec
    pattern = load_pattern(args.pattern)
    rep = convergence_experiment(pattern, NormSpec.named(args.norm), args.scales,
                                 args.radius, args.grid)
    _emit(rep.to_csv(), args.out)
    return 0


def cmd_render(args) -> int:
    from .balls import ball_raster
    from .render import svg_document, write_atomic
    pattern = load_pattern(args.pattern)
    layers = []
    window = args.window
    if args.radii:
        center = _center(pattern, args)
        radii = sorted(args.radii)
        if window is None:
            window = ball_raster(pattern, center, radii[-1]).window
        cells = DEFAULT.raster_cells * 2
        spacing = max(window.xmax - window.xmin, window.ymax - window.ymin) / cells
        layers = [ball_raster(pattern, center, r, spacing, window) for r in radii]
    window = window or BoundingBox(-6, -6, 6, 6)
    write_atomic(args.out, svg_document(pattern, window, layers, DEFAULT.colors))
    return 0


def cmd_check(args) -> int:
    from .balls import growth_check, outside_margin
    from .constants import separation_factor
    from .metric import MetricNode, metric_axiom_check, one_stitch_property_check
    from .norms import INDEX_STEP, closed_form_vs_engine
    pattern = load_pattern(args.pattern)
    results = {}
    rep = metric_axiom_check(pattern, args.samples, args.seed)
    results["metric-axioms"] = {"ok": rep.ok, "samples": rep.samples,
                                "violations": rep.violations[:20], **rep.stats}
    rep = one_stitch_property_check(pattern, args.samples, args.seed)
    results["one-stitch"] = {"ok": rep.ok, "samples": rep.samples,
                             "violations": rep.violations[:20]}
    center = MetricNode.of(StitchId(0, 0, pattern.slots[0]))
    delta = separation_factor(pattern)
    margin = outside_margin(pattern, center, delta, delta)
    g = growth_check(pattern, center, delta, min(margin.value, delta / 2))
    results["growth"] = g.to_json()
    kind = pattern.name if pattern.name in INDEX_STEP and args.pattern.startswith("builtin:") else None
    if kind:
        results["closed-form"] = closed_form_vs_engine(kind, args.closed_form_radius).to_json()
    results["ok"] = all(v["ok"] for v in results.values() if isinstance(v, dict))
    _emit(dumps(results), args.out)
    return 0 if results["ok"] else 1


# -- parser --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smock", description="Smocked metric space toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_, file_out=False):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("pattern", help="builtin:<name> or a pattern file")
        if file_out:
            sp.add_argument("--out", required=True, help="output file (.svg or .pgm)")
        else:
            sp.add_argument("--out", help="output file (default stdout)")
        sp.set_defaults(fn=fn)
        return sp

    def centre(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--stitch", help="index point j1,j2[,slot] of the centre stitch")
        g.add_argument("--point", help="centre point x,y")

    sp = cmd("constants", cmd_constants, "separation, lengths and depth")
    sp.add_argument("--tol", type=_positive, default=1e-7)

    sp = cmd("dist", cmd_dist, "smocked distance between two nodes")
    sp.add_argument("--from", dest="source", required=True)
    sp.add_argument("--to", dest="target", required=True)
    sp.add_argument("--witness", action="store_true")

    sp = cmd("ball", cmd_ball, "rasterize a ball preimage to SVG or PGM", file_out=True)
    centre(sp)
    sp.add_argument("--radius", type=_positive, required=True)
    sp.add_argument("--series", type=lambda s: [_positive(v) for v in s.split(",")],
                    help="extra radii drawn concentrically")
    sp.add_argument("--spacing", type=_positive)
    sp.add_argument("--window", type=_window)

    sp = cmd("frontier", cmd_frontier, "stitches at exactly distance r")
    centre(sp)
    sp.add_argument("--radius", type=_positive, required=True)
    sp.add_argument("--tol", type=_positive, default=1e-9)

    sp = cmd("tangent-check", cmd_tangent_check, "compare distances with the limit norm")
    sp.add_argument("--norm", choices=("plus", "woven", "bumpy"), required=True)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=DEFAULT.seed)
    sp.add_argument("--window", type=_window, default=BoundingBox(-40, -40, 40, 40))
    sp.add_argument("--bound", type=_positive, help="override the deviation constant K")

    sp = cmd("gh-rescale", cmd_gh_rescale, "distortion of rescaled balls against the norm")
    sp.add_argument("--norm", choices=("plus", "woven", "bumpy", "euclidean"), required=True)
    sp.add_argument("--scales", type=lambda s: [_positive(v) for v in s.split(",")],
                    default=[8.0, 16.0, 32.0, 64.0])
    sp.add_argument("--radius", type=_positive, default=1.0)
    sp.add_argument("--grid", type=_positive, default=0.05)

    sp = cmd("render", cmd_render, "draw stitches and optional concentric balls as SVG",
             file_out=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--stitch")
    g.add_argument("--point")
    sp.add_argument("--radii", type=lambda s: [_positive(v) for v in s.split(",")])
    sp.add_argument("--window", type=_window)

    sp = cmd("check", cmd_check, "run the property suites")
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=DEFAULT.seed)
    sp.add_argument("--closed-form-radius", type=int, default=12)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except SmockError as exc:
        sys.stderr.write(f"smock: error: {exc}\n")
        return exc.exit_code
    except ValueError as exc:
        # invalid numeric input that slipped past argparse is a usage problem
        sys.stderr.write(f"smock: error: {exc}\n")
        return PatternSyntaxError.exit_code


if __name__ == "__main__":
    sys.exit(main())
