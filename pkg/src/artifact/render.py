"""Figures: lamination chord diagrams as SVG and fiberwise Julia rasters as PNG."""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, ImageDraw

from .circle import fmt
from .dynamics import SchemaPolynomial
from .dynamics import kernels
from .lamination import FiniteLamination, PuzzleTower, generated_classes


class RenderError(ValueError):
    pass


# ---------------------------------------------------------------- geodesics


@dataclass(frozen=True)
class Geodesic:
    a: Fraction
    b: Fraction
    center: tuple[float, float] | None
    radius: float | None

    @property
    def is_diameter(self) -> bool:
        return self.center is None


def _unit(t) -> tuple[float, float]:
    ang = 2 * math.pi * float(t)
    return math.cos(ang), math.sin(ang)


def geodesic(a, b) -> Geodesic:
    """Hyperbolic geodesic between boundary angles a and b (in turns)."""
    a, b = Fraction(a), Fraction(b)
    if a == b:
        raise RenderError("geodesic needs two distinct endpoints")
    gap = (b - a) % 1
    if gap == Fraction(1, 2):
        return Geodesic(a, b, None, None)
    m = min(gap, 1 - gap)
    # cos and sin of pi*m through the exact complement, stable near a diameter
    c = math.sin(math.pi * float(Fraction(1, 2) - m))
    s = math.sin(math.pi * float(m))
    mid = a + gap / 2
    if gap > Fraction(1, 2):
        mid += Fraction(1, 2)
    cx, cy = _unit(mid % 1)
    return Geodesic(a, b, (cx / c, cy / c), s / c)


# ---------------------------------------------------------------- SVG


@dataclass(frozen=True)
class SvgStyle:
    size: int = 480
    margin: int = 24
    stroke: str = "#1f3a93"
    fill: str = "#c5d3f0"
    circle_stroke: str = "#222222"
    stroke_width: float = 1.2
    labels: bool = False
    digits: int = 4


def _num(x: float, digits: int) -> str:
    s = f"{x:.{digits}f}"
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _classes_for(obj) -> tuple[int, list[tuple[Fraction, ...]]]:
    if isinstance(obj, PuzzleTower):
        lam = generated_classes(obj, obj.levels[-1].support)
        return obj.degree, list(lam.nontrivial)
    if isinstance(obj, FiniteLamination):
        return obj.degree, list(obj.nontrivial)
    raise RenderError(f"cannot draw {type(obj).__name__}")


def lamination_svg(obj: FiniteLamination | PuzzleTower, style: SvgStyle | None = None) -> str:
    st = style or SvgStyle()
    _, classes = _classes_for(obj)
    R = (st.size - 2 * st.margin) / 2
    c0 = st.size / 2
    n = lambda x: _num(x, st.digits)

    def pt(t) -> tuple[str, str]:
        x, y = _unit(t)
        return n(c0 + R * x), n(c0 - R * y)

    def arc_to(a, b) -> str:
        g = geodesic(a, b)
        x, y = pt(b)
        if g.is_diameter:
            return f"L {x} {y}"
        # the arc bends toward the origin; screen y points down
        gap = (Fraction(b) - Fraction(a)) % 1
        sweep = 1 if gap < Fraction(1, 2) else 0
        r = n(R * g.radius)
        return f"A {r} {r} 0 0 {sweep} {x} {y}"

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{st.size}" '
        f'height="{st.size}" viewBox="0 0 {st.size} {st.size}">',
        f'<circle cx="{n(c0)}" cy="{n(c0)}" r="{n(R)}" fill="none" stroke="{st.circle_stroke}" '
        f'stroke-width="{n(st.stroke_width)}"/>',
    ]
    for cls in sorted(classes):
        pts = list(cls)
        x0, y0 = pt(pts[0])
        if len(pts) == 2:
            d = f"M {x0} {y0} {arc_to(pts[0], pts[1])}"
            out.append(f'<path d="{d}" fill="none" stroke="{st.stroke}" '
                       f'stroke-width="{n(st.stroke_width)}"/>')
            continue
        segs = [arc_to(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]
        d = f"M {x0} {y0} " + " ".join(segs) + " Z"
        out.append(f'<path d="{d}" fill="{st.fill}" stroke="{st.stroke}" '
                   f'stroke-width="{n(st.stroke_width)}"/>')
    if st.labels:
        for cls in sorted(classes):
            for t in cls:
                x, y = _unit(t)
                lx, ly = n(c0 + (R + 10) * x), n(c0 - (R + 10) * y)
                out.append(f'<text x="{lx}" y="{ly}" font-size="9" text-anchor="middle">{fmt(t)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- rasters

PALETTES = {
    "ember": ((0.0, (12, 7, 38)), (0.25, (110, 30, 110)), (0.5, (220, 80, 60)),
              (0.75, (250, 190, 70)), (1.0, (255, 250, 220))),
    "ice": ((0.0, (8, 16, 40)), (0.5, (60, 140, 200)), (1.0, (235, 245, 255))),
}


@dataclass
class RasterSpec:
    center: complex = 0j
    width: float = 4.0
    resolution: tuple[int, int] = (256, 256)
    max_iter: int = 256
    coloring: str = "smooth"
    palette: str = "ember"
    overlays: list[dict] = field(default_factory=list)

    def validate(self) -> None:
        w, h = self.resolution
        if w <= 0 or h <= 0:
            raise RenderError("resolution must be positive")
        if not self.width > 0 or not math.isfinite(self.width):
            raise RenderError("viewport width must be positive")
        if self.coloring not in ("smooth", "binary"):
            raise RenderError(f"unknown coloring {self.coloring!r}")
        if self.palette not in PALETTES:
            raise RenderError(f"unknown palette {self.palette!r}")
        if self.max_iter < 1:
            raise RenderError("max_iter must be positive")

    @property
    def height(self) -> float:
        w, h = self.resolution
        return self.width * h / w

    def pixel_grid_row(self, row: int) -> np.ndarray:
        w, h = self.resolution
        x0 = self.center.real - self.width / 2
        y0 = self.center.imag + self.height / 2
        xs = x0 + (np.arange(w) + 0.5) * (self.width / w)
        y = y0 - (row + 0.5) * (self.height / h)
        return xs + 1j * y

    def to_pixel(self, z: complex) -> tuple[float, float]:
        w, h = self.resolution
        x = (z.real - (self.center.real - self.width / 2)) / self.width * w
        y = ((self.center.imag + self.height / 2) - z.imag) / self.height * h
        return x, y


def _workers(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("THREADS", "").strip()
    if env.isdigit() and int(env) > 0:
        return int(env)
    return 1


def _colorize(vals: np.ndarray, spec: RasterSpec) -> np.ndarray:
    out = np.zeros(vals.shape + (3,), dtype=np.uint8)
    esc = vals >= 0
    if spec.coloring == "binary":
        out[esc] = 255
        return out
    stops = PALETTES[spec.palette]
    xs = np.array([s for s, _ in stops])
    t = np.zeros(vals.shape)
    t[esc] = np.mod(np.sqrt(np.maximum(vals[esc], 0.0)) / 6.0, 1.0)
    for ch in range(3):
        ys = np.array([c[ch] for _, c in stops], dtype=float)
        layer = np.interp(t, xs, ys)
        out[..., ch] = np.where(esc, np.round(layer), 0).astype(np.uint8)
    return out


def _panel(f: SchemaPolynomial, v: str, spec: RasterSpec, workers: int, use_numba=None) -> np.ndarray:
    C, deg, sig = f.packed
    vi = f.index(v)
    R = f.escape_radius
    w, h = spec.resolution
    chunk = max(1, h // (4 * workers))
    bands = [(r0, min(h, r0 + chunk)) for r0 in range(0, h, chunk)]

    def work(band):
        r0, r1 = band
        zs = np.concatenate([spec.pixel_grid_row(r) for r in range(r0, r1)])
        vals = kernels.escape_time(C, deg, sig, vi, zs, spec.max_iter, R,
                                   smooth=spec.coloring == "smooth", use_numba=use_numba)
        return vals.reshape(r1 - r0, w)

    if workers == 1:
        parts = [work(b) for b in bands]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, bands))
    return _colorize(np.vstack(parts), spec)


def _draw_overlays(img: Image.Image, spec: RasterSpec, records: Sequence[dict]) -> None:
    draw = ImageDraw.Draw(img)
    for rec in records:
        pts = [spec.to_pixel(complex(x, y)) for x, y in rec.get("points", [])]
        pts = [(round(x, 3), round(y, 3)) for x, y in pts]
        if len(pts) < 2:
            continue
        color = tuple(rec.get("color", (0, 220, 120) if rec.get("kind") == "ray" else (255, 255, 255)))
        draw.line(pts, fill=color, width=int(rec.get("width", 1)))


def julia_raster(f: SchemaPolynomial, spec: RasterSpec, workers: int | None = None,
                 use_numba=None) -> Image.Image:
    """One panel per vertex, tiled left to right in vertex order."""
    spec.validate()
    nw = _workers(workers)
    w, h = spec.resolution
    canvas = Image.new("RGB", (w * len(f.vertices), h))
    for i, v in enumerate(f.vertices):
        panel = Image.fromarray(_panel(f, v, spec, nw, use_numba), mode="RGB")
        _draw_overlays(panel, spec, [r for r in spec.overlays if r.get("vertex", v) == v])
        canvas.paste(panel, (i * w, 0))
    return canvas


def pixel_hash(img: Image.Image) -> str:
    return hashlib.sha256(img.tobytes()).hexdigest()


def filled_ratio(img: Image.Image) -> float:
    arr = np.asarray(img.convert("L"))
    return float(np.mean(arr == 0))


def puzzle_overlays(f: SchemaPolynomial, vertex: str, angles: Iterable, level: float,
                    params=None) -> list[dict]:
    """Ray segments outside potential ``level`` plus the equipotential itself."""
    from .dynamics import equipotential, trace_ray

    recs = []
    for t in angles:
        tr = trace_ray(f, vertex, t, params)
        keep = [z for z, g in zip(tr.points, tr.potentials) if g >= level]
        recs.append({"kind": "ray", "vertex": vertex, "angle": fmt(tr.angle),
                     "points": [[float(z.real), float(z.imag)] for z in keep]})
    eq = equipotential(f, vertex, level, 256, params)
    recs.append({"kind": "equipotential", "vertex": vertex,
                 "points": [[float(z.real), float(z.imag)] for z in eq]})
    return recs
