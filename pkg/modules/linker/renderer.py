"""
Report Charts
Importance bars with per-fold whiskers and the held-out regression scatter.
Each chart is laid out once as drawing primitives, then written as SVG and
rendered to PNG with Pillow.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from utils.errors import PipelineIOError
from .crossval import FoldPrediction
from .importance import ImportanceTable

# Layout
IMAGE_WIDTH = 640
IMAGE_HEIGHT = 420
MARGIN_LEFT = 60
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 50

# Colors
WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
GRID = (220, 220, 220)
BAR = (0, 150, 136)      # teal
WHISKER = (33, 33, 33)
POINT = (211, 47, 47)
IDENTITY = (150, 150, 150)

Color = Tuple[int, int, int]


@dataclass
class Chart:
    title: str
    lines: List[Tuple[float, float, float, float, Color, float]] = field(default_factory=list)
    rects: List[Tuple[float, float, float, float, Color]] = field(default_factory=list)
    circles: List[Tuple[float, float, float, Color]] = field(default_factory=list)
    texts: List[Tuple[float, float, str, str]] = field(default_factory=list)  # x, y, text, anchor

    def line(self, x1, y1, x2, y2, color: Color = BLACK, width: float = 1.0):
        self.lines.append((x1, y1, x2, y2, color, width))

    def text(self, x, y, value: str, anchor: str = "middle"):
        self.texts.append((x, y, value, anchor))


class _Axes:
    """Maps data coordinates into the plotting box."""

    def __init__(self, x_range: Tuple[float, float], y_range: Tuple[float, float]):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.left, self.right = MARGIN_LEFT, IMAGE_WIDTH - MARGIN_RIGHT
        self.top, self.bottom = MARGIN_TOP, IMAGE_HEIGHT - MARGIN_BOTTOM

    def x(self, value: float) -> float:
        return self.left + (value - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def y(self, value: float) -> float:
        return self.bottom - (value - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def frame(self, chart: Chart, x_label: str, y_label: str, y_ticks: Sequence[float]):
        for tick in y_ticks:
            chart.line(self.left, self.y(tick), self.right, self.y(tick), GRID)
            chart.text(self.left - 6, self.y(tick) + 4, f"{tick:g}", "end")
        chart.line(self.left, self.bottom, self.right, self.bottom)
        chart.line(self.left, self.top, self.left, self.bottom)
        chart.text((self.left + self.right) / 2, IMAGE_HEIGHT - 12, x_label)
        chart.text(14, (self.top + self.bottom) / 2, y_label, "start")


def importance_chart(table: ImportanceTable) -> Chart:
    chart = Chart("Cluster importance across folds")
    high = float(np.max(table.mean + table.sd)) if table.k else 1.0
    axes = _Axes((0, table.k), (0, max(high * 1.1, 1e-9)))
    axes.frame(chart, "cluster", "MDI", np.linspace(0, axes.y1, 5))
    slot = (axes.right - axes.left) / max(table.k, 1)
    for i in range(table.k):
        cx = axes.x(i + 0.5)
        chart.rects.append((cx - slot * 0.35, axes.y(table.mean[i]), cx + slot * 0.35, axes.bottom, BAR))
        lo, hi = max(table.mean[i] - table.sd[i], 0.0), table.mean[i] + table.sd[i]
        chart.line(cx, axes.y(lo), cx, axes.y(hi), WHISKER, 1.5)
        chart.line(cx - 5, axes.y(lo), cx + 5, axes.y(lo), WHISKER, 1.5)
        chart.line(cx - 5, axes.y(hi), cx + 5, axes.y(hi), WHISKER, 1.5)
        chart.text(cx, axes.bottom + 16, str(i + 1))
    return chart


def regression_chart(predictions: Sequence[FoldPrediction]) -> Chart:
    chart = Chart("Held-out regression values vs. true grade")
    values = [p.predicted for p in predictions] + [0.0, 3.0]
    lo, hi = min(values) - 0.25, max(values) + 0.25
    axes = _Axes((-0.5, 3.5), (lo, hi))
    axes.frame(chart, "true grade", "predicted", [t for t in np.arange(np.ceil(lo), np.floor(hi) + 1)])
    chart.line(axes.x(max(lo, -0.5)), axes.y(max(lo, -0.5)), axes.x(min(hi, 3.5)), axes.y(min(hi, 3.5)), IDENTITY)
    for grade in range(4):
        chart.text(axes.x(grade), axes.bottom + 16, str(grade))
    for p in predictions:
        chart.circles.append((axes.x(p.truth), axes.y(p.predicted), 4.0, POINT))
    return chart


# ============== OUTPUT ==============

def _rgb(color: Color) -> str:
    return "rgb({},{},{})".format(*color)


def chart_svg(chart: Chart) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{IMAGE_WIDTH}" height="{IMAGE_HEIGHT}" '
        f'viewBox="0 0 {IMAGE_WIDTH} {IMAGE_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{IMAGE_WIDTH}" height="{IMAGE_HEIGHT}" fill="white"/>',
        f'<text x="{IMAGE_WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(chart.title)}</text>',
    ]
    for x1, y1, x2, y2, color in chart.rects:
        parts.append(f'<rect x="{x1:.2f}" y="{y1:.2f}" width="{x2 - x1:.2f}" height="{y2 - y1:.2f}" fill="{_rgb(color)}"/>')
    for x1, y1, x2, y2, color, width in chart.lines:
        parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" stroke="{_rgb(color)}" stroke-width="{width:g}"/>')
    for cx, cy, r, color in chart.circles:
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:g}" fill="{_rgb(color)}" fill-opacity="0.8"/>')
    for x, y, value, anchor in chart.texts:
        parts.append(f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="{anchor}">{escape(value)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _place_text(draw: ImageDraw.ImageDraw, font, x: float, y: float, value: str, anchor: str) -> None:
    """Draw with (x, y) as the baseline anchor point, like SVG text."""
    width = draw.textlength(value, font=font)
    shift = {"middle": width / 2, "end": width}.get(anchor, 0.0)
    draw.text((x - shift, y - 10), value, fill=BLACK, font=font)


def chart_png(chart: Chart) -> Image.Image:
    img = Image.new("RGB", (IMAGE_WIDTH, IMAGE_HEIGHT), WHITE)
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    _place_text(draw, font, IMAGE_WIDTH / 2, 22, chart.title, "middle")
    for x1, y1, x2, y2, color in chart.rects:
        draw.rectangle([x1, min(y1, y2), x2, max(y1, y2)], fill=color)
    for x1, y1, x2, y2, color, width in chart.lines:
        draw.line([(x1, y1), (x2, y2)], fill=color, width=max(int(round(width)), 1))
    for cx, cy, r, color in chart.circles:
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=color)
    for x, y, value, anchor in chart.texts:
        _place_text(draw, font, x, y, value, anchor)
    return img


def write_chart(chart: Chart, svg_path: Path, png_path: Path = None) -> None:
    svg_path = Path(svg_path)
    try:
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        svg_path.write_text(chart_svg(chart), encoding="utf-8")
        if png_path is not None:
            chart_png(chart).save(png_path, format="PNG")
    except OSError as e:
        raise PipelineIOError(svg_path, f"cannot write chart: {e}") from e
