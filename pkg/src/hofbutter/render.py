"""Raster rendering of butterfly diagrams to PPM (P6) images.

Each flux occupies a thin horizontal band at height proportional to
p/q; every open gap paints its energy interval in the color of its
Chern number.  Bands of the spectrum stay canvas-black, unresolved
gaps get a sentinel gray, and the semi-infinite gaps fill the outer
background in the neutral sigma = 0 tone.  Row bounds are computed in
exact rational arithmetic so the inversion symmetry of the physics is
pixel-exact in the image.
"""

from __future__ import annotations

import colorsys
import math
from fractions import Fraction

import numpy as np

from .butterfly import ButterflyConfig
from .spectrum import GapRecord

NEUTRAL = (245, 245, 245)   # sigma = 0
SENTINEL = (128, 128, 128)  # unresolved
SATURATION = 0.88
VALUE = 0.95


def chern_color(sigma, period: int) -> tuple:
    """Signed cyclic palette: sigma and -sigma get mirror hues.

    None maps to the sentinel gray and 0 to the neutral tone; otherwise
    the hue walks the color wheel with the given period, so hue(sigma)
    + hue(-sigma) = 360 degrees.
    """
    if sigma is None:
        return SENTINEL
    if sigma == 0:
        return NEUTRAL
    hue = (0.5 + sigma / period) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, SATURATION, VALUE)
    return (round(255 * r), round(255 * g), round(255 * b))


def _palette_period(records, override=None) -> int:
    if override:
        return override
    biggest = max((abs(r.chern) for r in records if r.chern), default=1)
    return 2 * biggest + 1


def _row_bounds(p: int, q: int, height: int, thickness: Fraction):
    """Pixel row ranges of flux p/q, exact so p/q and (q-p)/q mirror.

    The full-flux row 1/1 doubles as flux 0 by periodicity, keeping the
    rendered diagram exactly inversion symmetric."""
    centers = [Fraction(q - p, q) * (height - 1)]  # image origin is top
    if p == q:
        centers.append(Fraction(height - 1))
    spans = []
    for center in centers:
        lo = math.ceil(center - thickness / 2)
        hi = math.floor(center + thickness / 2)
        if hi >= 0 and lo <= height - 1:
            spans.append((max(lo, 0), min(hi, height - 1)))
    return spans


class _Painter:
    """One-pass rasterizer: a per-pixel owner-q buffer makes low-q rows
    win every contested pixel, independent of record order (rows of
    equal q never overlap)."""

    def __init__(self, config: ButterflyConfig, period: int):
        self.config = config
        self.period = period
        emax = config.energy_clamp
        self.emax = emax
        self.canvas = np.zeros((config.height, config.mu_bins, 3), dtype=np.uint8)
        self.owner = np.full((config.height, config.mu_bins), np.iinfo(np.int32).max,
                             dtype=np.int32)
        self.centers = -emax + (np.arange(config.mu_bins) + 0.5) \
            * (2.0 * emax / config.mu_bins)
        self._spans = {}

    def spans_for(self, p: int, q: int):
        key = (p, q)
        if key not in self._spans:
            thickness = Fraction(self.config.row_scale * self.config.height) \
                .limit_denominator(10**6) / (q * self.config.q_max)
            self._spans[key] = _row_bounds(p, q, self.config.height,
                                           max(thickness, Fraction(1)))
        return self._spans[key]

    def paint(self, rec: GapRecord):
        if rec.closed:
            return  # closed gaps stay canvas-black like the bands
        lo = max(rec.lo, -self.emax)
        hi = min(rec.hi, self.emax)
        cols = (self.centers >= lo) & (self.centers <= hi)
        if not cols.any():
            return
        color = chern_color(rec.chern, self.period)
        for y0, y1 in self.spans_for(rec.p, rec.q):
            claim = self.owner[y0:y1 + 1, cols] >= rec.q
            block = self.canvas[y0:y1 + 1, cols]
            block[claim] = color
            self.canvas[y0:y1 + 1, cols] = block
            strip = self.owner[y0:y1 + 1, cols]
            strip[claim] = rec.q
            self.owner[y0:y1 + 1, cols] = strip

    def image(self) -> bytes:
        return write_ppm(self.canvas)


def render(records, config: ButterflyConfig) -> bytes:
    """Rasterize gap records into PPM (P6) bytes.

    Low-q rows win contested pixels, so the wide low-denominator wings
    dominate visually; deterministic for fixed records and config.
    """
    records = list(records)
    painter = _Painter(config, _palette_period(records, config.colormap_period))
    for rec in records:
        painter.paint(rec)
    return painter.image()


def render_jsonl(path: str, config: ButterflyConfig) -> bytes:
    """Stream a JSON-lines record file into an image without
    materializing the records (one prepass sizes the palette)."""
    import json

    from .spectrum import gap_from_dict

    period = config.colormap_period
    if not period:
        biggest = 1
        with open(path) as fh:
            for line in fh:
                rec = json.loads(line)
                if rec["chern"]:
                    biggest = max(biggest, abs(rec["chern"]))
        period = 2 * biggest + 1
    painter = _Painter(config, period)
    with open(path) as fh:
        for line in fh:
            painter.paint(gap_from_dict(json.loads(line)))
    return painter.image()


def write_ppm(pixels: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array as binary PPM (P6)."""
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise ValueError("expected an (H, W, 3) uint8 array")
    h, w = pixels.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    """Decode binary PPM (P6) produced by write_ppm."""
    if not data.startswith(b"P6"):
        raise ValueError("not a P6 PPM")
    parts = data.split(b"\n", 3)
    w, h = map(int, parts[1].split())
    raw = np.frombuffer(parts[3], dtype=np.uint8, count=h * w * 3)
    return raw.reshape(h, w, 3)
