"""Section-entropy plots as deterministic SVG documents.

One panel per (label, executable): colored bands mark section raw
ranges, a gray band marks the overlay, and a polyline draws the block
entropies over the byte axis. Identical input yields byte-identical
SVG, so plots diff cleanly.
"""

from __future__ import annotations

import colorsys
import hashlib
from dataclasses import dataclass
from xml.sax.saxutils import escape

from packlab.binfmt import Executable, parse
from packlab.dataset.store import human_size
from packlab.entropy import DEFAULT_BLOCK_SIZE, block_entropies
from packlab.errors import PackLabError, ParseFailed

PANEL_WIDTH = 1200
PANEL_HEIGHT = 220
MARGIN_LEFT = 56
MARGIN_RIGHT = 14
MARGIN_TOP = 26
MARGIN_BOTTOM = 52

OVERLAY_COLOR = "#b3b3b3"

__all__ = ["PlotDocument", "Band", "Panel", "plot", "plot_samples"]


@dataclass(frozen=True)
class Band:
    name: str
    byte_start: int
    byte_len: int
    x: float
    width: float
    color: str
    overlay: bool = False


@dataclass(frozen=True)
class Panel:
    label: str
    size: int
    bands: tuple[Band, ...]
    entropies: tuple[float, ...]
    vertices: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class PlotDocument:
    width: int
    height: int
    panels: tuple[Panel, ...]
    svg: str

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.svg)


def _color_for(name: str) -> str:
    """Stable section color: same name, same color, on every panel."""
    digest = hashlib.sha256(name.encode("utf-8", "replace")).digest()
    hue = int.from_bytes(digest[:2], "big") % 360
    r, g, b = colorsys.hls_to_rgb(hue / 360.0, 0.62, 0.55)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def _panel(label: str, exe: Executable, block_size: int) -> Panel:
    plot_w = PANEL_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    scale = plot_w / max(exe.size, 1)

    bands = []
    for sec in exe.sections:
        if sec.raw_size == 0:
            continue
        bands.append(Band(
            name=sec.display_name,
            byte_start=sec.raw_offset,
            byte_len=sec.raw_size,
            x=MARGIN_LEFT + sec.raw_offset * scale,
            width=sec.raw_size * scale,
            color=_color_for(sec.display_name),
        ))
    start, length = exe.overlay
    if length > 0:
        bands.append(Band(
            name="overlay",
            byte_start=start,
            byte_len=length,
            x=MARGIN_LEFT + start * scale,
            width=length * scale,
            color=OVERLAY_COLOR,
            overlay=True,
        ))

    entropies = tuple(block_entropies(exe.data, block_size))
    plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    vertices = []
    for i, value in enumerate(entropies):
        center = min((i + 0.5) * block_size, exe.size)
        x = MARGIN_LEFT + center * scale
        y = MARGIN_TOP + (8.0 - value) / 8.0 * plot_h
        vertices.append((x, y))
    return Panel(label=label, size=exe.size, bands=tuple(bands),
                 entropies=entropies, vertices=tuple(vertices))


def _render_panel(panel: Panel, y_offset: int) -> list[str]:
    plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    top = y_offset + MARGIN_TOP
    bottom = top + plot_h
    right = PANEL_WIDTH - MARGIN_RIGHT
    out = [f'<g class="panel" transform="translate(0,0)">']
    out.append(
        f'<text x="{MARGIN_LEFT}" y="{y_offset + 17}" class="title">'
        f"{escape(panel.label)} ({human_size(panel.size)})</text>"
    )
    # entropy gridlines and axis labels
    for level in (0, 2, 4, 6, 8):
        y = top + (8.0 - level) / 8.0 * plot_h
        out.append(
            f'<line x1="{MARGIN_LEFT}" y1="{y:.2f}" x2="{right}" y2="{y:.2f}" '
            f'class="grid"/>'
        )
        out.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{y + 4:.2f}" class="ylabel">{level}</text>'
        )
    for band in panel.bands:
        cls = "overlay" if band.overlay else "section"
        out.append(
            f'<rect class="{cls}" x="{band.x:.2f}" y="{top}" '
            f'width="{max(band.width, 0.5):.2f}" height="{plot_h}" '
            f'fill="{band.color}" fill-opacity="0.45">'
            f"<title>{escape(band.name)} [{band.byte_start}, "
            f"{band.byte_start + band.byte_len})</title></rect>"
        )
    if panel.vertices:
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in panel.vertices)
        out.append(f'<polyline class="entropy" points="{points}"/>')
    # x axis: start, middle, end in bytes
    out.append(
        f'<line x1="{MARGIN_LEFT}" y1="{bottom}" x2="{right}" y2="{bottom}" class="axis"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        x = MARGIN_LEFT + frac * (right - MARGIN_LEFT)
        out.append(
            f'<text x="{x:.2f}" y="{bottom + 16}" class="xlabel">'
            f"{human_size(round(frac * panel.size))}</text>"
        )
    # legend: unique band names in order
    seen, legend = set(), []
    for band in panel.bands:
        if band.name not in seen:
            seen.add(band.name)
            legend.append(band)
    x = MARGIN_LEFT
    ly = bottom + 34
    for band in legend:
        out.append(
            f'<rect x="{x:.2f}" y="{ly - 9}" width="10" height="10" '
            f'fill="{band.color}"/>'
        )
        label = escape(band.name)
        out.append(f'<text x="{x + 14:.2f}" y="{ly}" class="legend">{label}</text>')
        x += 14 + 7.2 * len(band.name) + 18
    out.append("</g>")
    return out


_STYLE = (
    "text{font-family:monospace;font-size:12px}"
    ".title{font-size:13px;font-weight:bold}"
    ".ylabel,.xlabel{fill:#444;text-anchor:end}"
    ".xlabel{text-anchor:middle}"
    ".legend{fill:#222}"
    ".grid{stroke:#ddd;stroke-width:1}"
    ".axis{stroke:#444;stroke-width:1}"
    ".entropy{fill:none;stroke:#111;stroke-width:1.2}"
)


def plot(
    samples: list[tuple[str, Executable]],
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> PlotDocument:
    """Stacked section-entropy panels, one per (label, executable)."""
    if not samples:
        raise PackLabError("nothing to plot")
    panels = tuple(
        _panel(label, exe, block_size) for label, exe in samples
    )
    height = PANEL_HEIGHT * len(panels)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{PANEL_WIDTH}" height="{height}" '
        f'viewBox="0 0 {PANEL_WIDTH} {height}">',
        f"<style>{_STYLE}</style>",
        f'<rect x="0" y="0" width="{PANEL_WIDTH}" height="{height}" fill="#ffffff"/>',
    ]
    for i, panel in enumerate(panels):
        offset = i * PANEL_HEIGHT
        parts.append(f'<g transform="translate(0,{offset})">')
        parts.extend(_render_panel(panel, 0))
        parts.append("</g>")
    parts.append("</svg>")
    return PlotDocument(
        width=PANEL_WIDTH, height=height, panels=panels, svg="\n".join(parts) + "\n"
    )


def plot_samples(
    labeled_bytes: list[tuple[str, bytes]],
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> PlotDocument:
    """Parse raw samples and plot them; any parse failure aborts the
    whole plot, naming the offending label."""
    parsed = []
    for label, data in labeled_bytes:
        try:
            parsed.append((label, parse(data)))
        except PackLabError as exc:
            raise ParseFailed(f"sample {label!r} cannot be parsed: {exc}") from exc
    return plot(parsed, block_size)
