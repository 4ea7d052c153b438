"""Minimal deterministic SVG emission for plots and overlays.

Hand-rolled on purpose: plotting libraries embed timestamps or hashed
ids, which breaks byte-for-byte reproducibility of command outputs.
"""

from __future__ import annotations


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


class SvgCanvas:
    def __init__(self, width: float, height: float, background: str = "white"):
        self.width = width
        self.height = height
        self._parts: list[str] = [
            f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="{background}"/>'
        ]

    def line(self, p0, p1, color="black", width=1.0, opacity=1.0):
        self._parts.append(
            f'<line x1="{_fmt(p0[0])}" y1="{_fmt(p0[1])}" x2="{_fmt(p1[0])}" y2="{_fmt(p1[1])}" '
            f'stroke="{color}" stroke-width="{_fmt(width)}" stroke-opacity="{_fmt(opacity)}"/>'
        )

    def arrow(self, p0, p1, color="black", width=1.0, head=3.0):
        self.line(p0, p1, color, width)
        dx, dy = p1[0] - p0[0], p1[1] - p0[1]
        norm = (dx * dx + dy * dy) ** 0.5
        if norm < 1e-9:
            return
        ux, uy = dx / norm, dy / norm
        px, py = -uy, ux
        for s in (1.0, -1.0):
            self.line(
                p1,
                (p1[0] - head * ux + s * head * 0.5 * px, p1[1] - head * uy + s * head * 0.5 * py),
                color,
                width,
            )

    def circle(self, center, radius, color="black", fill="none", width=1.0):
        self._parts.append(
            f'<circle cx="{_fmt(center[0])}" cy="{_fmt(center[1])}" r="{_fmt(radius)}" '
            f'stroke="{color}" fill="{fill}" stroke-width="{_fmt(width)}"/>'
        )

    def polyline(self, points, color="black", width=1.0):
        pts = " ".join(f"{_fmt(p[0])},{_fmt(p[1])}" for p in points)
        self._parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{_fmt(width)}"/>'
        )

    def text(self, pos, content, size=14.0, color="black"):
        self._parts.append(
            f'<text x="{_fmt(pos[0])}" y="{_fmt(pos[1])}" font-size="{_fmt(size)}" '
            f'font-family="monospace" fill="{color}">{content}</text>'
        )

    def to_string(self) -> str:
        body = "\n".join(f"  {p}" for p in self._parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">\n'
            f"{body}\n</svg>\n"
        )
