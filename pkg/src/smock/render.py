"""SVG and PGM output, written atomically."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .balls import BitRaster
from .config import COLOR_CYCLE
from .pattern import BoundingBox, SmockingPattern


def write_atomic(path, data: bytes | str) -> None:
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        umask = os.umask(0)
        os.umask(umask)
        os.fchmod(fd, 0o666 & ~umask)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def raster_to_pgm(raster: BitRaster) -> bytes:
    """Binary P5, top row first, 255 for set cells."""
    img = np.where(raster.bits[::-1], 255, 0).astype(np.uint8)
    header = f"P5\n{raster.width} {raster.height}\n255\n".encode("ascii")
    return header + img.tobytes()


def _n(x: float) -> str:
    return format(float(x), ".6g")


def _raster_paths(raster: BitRaster) -> str:
    """One path of horizontal run rectangles per raster."""
    parts = []
    sp = raster.spacing
    x0, y0 = raster.origin
    for j in range(raster.height):
        row = raster.bits[j]
        if not row.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate([[0], row.view(np.int8), [0]])))
        y = y0 + j * sp
        for a, b in zip(edges[::2], edges[1::2]):
            parts.append(f"M{_n(x0 + a * sp)} {_n(y)}h{_n((b - a) * sp)}v{_n(sp)}h{_n(-(b - a) * sp)}z")
    return "".join(parts)


def svg_document(pattern: SmockingPattern | None, window: BoundingBox,
                 layers: Sequence[BitRaster] = (), colors: Sequence[str] = COLOR_CYCLE,
                 opacity: float = 0.55) -> str:
    """Stitches in black over ball layers.

    Layers are drawn largest first so that nested balls stay visible; layer k
    gets colour k of the cycle.
    """
    w = window.xmax - window.xmin
    h = window.ymax - window.ymin
    stroke = max(w, h) / 400
    out = [f"<!-- smock {__version__} -->",
           '<svg xmlns="http://www.w3.org/2000/svg" '
           f'viewBox="{_n(window.xmin)} {_n(-window.ymax)} {_n(w)} {_n(h)}" '
           'width="800" height="{}">'.format(int(round(800 * h / w)) if w > 0 else 800),
           '<g transform="scale(1,-1)">',
           f'<rect x="{_n(window.xmin)}" y="{_n(window.ymin)}" width="{_n(w)}" '
           f'height="{_n(h)}" fill="white"/>']
    order = sorted(range(len(layers)), key=lambda k: -layers[k].count())
    for k in order:
        d = _raster_paths(layers[k])
        if d:
            out.append(f'<path d="{d}" fill="{colors[k % len(colors)]}" '
                       f'fill-opacity="{_n(opacity)}" stroke="none"/>')
    if pattern is not None and pattern.templates:
        from .pattern import stitches_in_box
        segs = [s for st in stitches_in_box(pattern, window) for s in st.segments]
        d = "".join(f"M{_n(a)} {_n(b)}L{_n(c)} {_n(e)}" for a, b, c, e in segs)
        if d:
            out.append(f'<path d="{d}" stroke="black" stroke-width="{_n(stroke)}" '
                       'stroke-linecap="round" fill="none"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
