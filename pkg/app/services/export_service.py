import csv
import io
import json
import logging
import math
import os
import tempfile
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from app.core.constants import CSV_SCHEMA_VERSION

logger = logging.getLogger(__name__)

SVG_WIDTH = 640
SVG_HEIGHT = 420
SVG_PADDING = 60
SVG_COLORS = ["#3498db", "#e74c3c", "#2ecc71", "#9b59b6", "#f39c12", "#1abc9c"]


def atomic_write_text(path: Path, text: str) -> Path:
    """Write via a temp file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("Wrote %s", path)
    return path


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def render_csv(schema: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    buffer.write(f"# schema={schema} version={CSV_SCHEMA_VERSION}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def write_csv(path: Path, schema: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    return atomic_write_text(path, render_csv(schema, columns, rows))


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"
    return atomic_write_text(path, text)


# --- SVG loss plots ---

def _log_range(values: list[float]) -> tuple[float, float]:
    positive = [v for v in values if v > 0 and math.isfinite(v)]
    if not positive:
        return -1.0, 0.0
    low = math.floor(math.log10(min(positive)))
    high = math.ceil(math.log10(max(positive)))
    if high == low:
        high = low + 1
    return float(low), float(high)


def render_svg_loss_plot(
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    title: str,
    x_label: str = "iteration",
    y_label: str = "average training loss",
) -> str:
    """Polyline plot with a log10 y axis over the observed range; no external assets."""
    all_x = [float(x) for xs, _ in series.values() for x in xs]
    all_y = [float(y) for _, ys in series.values() for y in ys]
    x_max = max(all_x) if all_x else 1.0
    x_max = x_max if x_max > 0 else 1.0
    y_low, y_high = _log_range(all_y)

    inner_w = SVG_WIDTH - 2 * SVG_PADDING
    inner_h = SVG_HEIGHT - 2 * SVG_PADDING

    def sx(x: float) -> float:
        return SVG_PADDING + inner_w * x / x_max

    def sy(y: float) -> float:
        ly = math.log10(y) if y > 0 else y_low
        ly = min(max(ly, y_low), y_high)
        return SVG_HEIGHT - SVG_PADDING - inner_h * (ly - y_low) / (y_high - y_low)

    lines = [
        f'<svg width="{SVG_WIDTH}" height="{SVG_HEIGHT}" xmlns="http://www.w3.org/2000/svg">',
        '<rect width="100%" height="100%" fill="white" />',
        f'<line x1="{SVG_PADDING}" y1="{SVG_HEIGHT - SVG_PADDING}" x2="{SVG_WIDTH - SVG_PADDING}" '
        f'y2="{SVG_HEIGHT - SVG_PADDING}" stroke="black" />',
        f'<line x1="{SVG_PADDING}" y1="{SVG_PADDING}" x2="{SVG_PADDING}" '
        f'y2="{SVG_HEIGHT - SVG_PADDING}" stroke="black" />',
    ]
    for decade in range(int(y_low), int(y_high) + 1):
        y = sy(10.0 ** decade)
        lines.append(
            f'<line x1="{SVG_PADDING}" y1="{y:.2f}" x2="{SVG_WIDTH - SVG_PADDING}" y2="{y:.2f}" '
            f'stroke="#ddd" stroke-dasharray="4" />'
        )
        lines.append(
            f'<text x="{SVG_PADDING - 5}" y="{y + 4:.2f}" font-family="Arial" font-size="10" '
            f'text-anchor="end">1e{decade}</text>'
        )
    for i in range(5):
        xv = x_max * i / 4.0
        lines.append(
            f'<text x="{sx(xv):.2f}" y="{SVG_HEIGHT - SVG_PADDING + 15}" font-family="Arial" '
            f'font-size="10" text-anchor="middle">{xv:.3g}</text>'
        )
    for index, (name, (xs, ys)) in enumerate(series.items()):
        color = SVG_COLORS[index % len(SVG_COLORS)]
        points = " ".join(f"{sx(float(x)):.2f},{sy(float(y)):.2f}" for x, y in zip(xs, ys))
        lines.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2" />')
        legend_y = SVG_PADDING + 5 + 18 * index
        lines.append(
            f'<rect x="{SVG_WIDTH - SVG_PADDING - 110}" y="{legend_y}" width="12" height="12" '
            f'fill="{color}" />'
        )
        lines.append(
            f'<text x="{SVG_WIDTH - SVG_PADDING - 92}" y="{legend_y + 10}" font-family="Arial" '
            f'font-size="11">{name}</text>'
        )
    lines.append(
        f'<text x="{SVG_WIDTH / 2:.1f}" y="25" font-family="Arial" font-size="15" '
        f'text-anchor="middle" font-weight="bold">{title}</text>'
    )
    lines.append(
        f'<text x="{SVG_WIDTH / 2:.1f}" y="{SVG_HEIGHT - 15}" font-family="Arial" font-size="11" '
        f'text-anchor="middle">{x_label}</text>'
    )
    lines.append(
        f'<text x="15" y="{SVG_HEIGHT / 2:.1f}" font-family="Arial" font-size="11" '
        f'text-anchor="middle" transform="rotate(-90 15 {SVG_HEIGHT / 2:.1f})">{y_label}</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path: Path, svg: str) -> Path:
    return atomic_write_text(path, svg)
