"""Certification reports: metrics, CSV/JSON serialization, SVG curves."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import scipy

from .errors import InputError

CSV_HEADER = "radius,collective_count,collective_ratio,naive_count,naive_ratio,seconds"


def average_certifiable_radius(curve) -> float:
    """Ratio-weighted mean radius of a certified-ratio curve.

    ``curve`` is a list of (radius, ratio) pairs whose radii must form a
    contiguous integer range starting at 0; the infinite tail beyond the
    last measured radius is read as zero. Returns 0 when every ratio is 0.
    """
    if not curve:
        raise InputError("empty certified-ratio curve")
    radii = [int(r) for r, _ in curve]
    ratios = [float(w) for _, w in curve]
    if radii != list(range(len(radii))):
        raise InputError("curve radii must be contiguous integers starting at 0")
    if any(not 0.0 <= w <= 1.0 for w in ratios):
        raise InputError("ratios must lie in [0, 1]")
    total = sum(ratios)
    if total == 0.0:
        return 0.0
    return sum(w * r for r, w in zip(radii, ratios)) / total


@dataclass(frozen=True)
class ReportRow:
    radius: int
    collective_count: int
    collective_ratio: float
    naive_count: int
    naive_ratio: float
    seconds: float


@dataclass
class CertificationReport:
    rows: list
    num_targets: int
    summary: dict
    provenance: dict

    @classmethod
    def from_sweep(cls, points, num_targets: int, provenance: dict) -> "CertificationReport":
        if num_targets <= 0:
            raise InputError("report needs at least one target")
        rows = [
            ReportRow(
                radius=p.radius,
                collective_count=p.collective_count,
                collective_ratio=p.collective_count / num_targets,
                naive_count=p.naive_count,
                naive_ratio=p.naive_count / num_targets,
                seconds=p.seconds,
            )
            for p in points
        ]
        radii = [r.radius for r in rows]
        summary = {
            "num_targets": num_targets,
            "truncation_radius": radii[-1] if radii else None,
            "avg_radius_collective": None,
            "avg_radius_naive": None,
        }
        if radii == list(range(len(radii))):
            summary["avg_radius_collective"] = average_certifiable_radius(
                [(r.radius, r.collective_ratio) for r in rows]
            )
            summary["avg_radius_naive"] = average_certifiable_radius(
                [(r.radius, r.naive_ratio) for r in rows]
            )
        return cls(rows=rows, num_targets=num_targets, summary=summary, provenance=provenance)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.radius},{r.collective_count},{r.collective_ratio:.6f},"
                f"{r.naive_count},{r.naive_ratio:.6f},{r.seconds:.4f}"
            )
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "radius": r.radius,
                    "collective_count": r.collective_count,
                    "collective_ratio": r.collective_ratio,
                    "naive_count": r.naive_count,
                    "naive_ratio": r.naive_ratio,
                    "seconds": r.seconds,
                }
                for r in self.rows
            ],
            "summary": self.summary,
            "provenance": self.provenance,
        }

    def write(self, csv_path, json_path, svg_path, log_x=False) -> None:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        with open(svg_path, "w", encoding="utf-8") as fh:
            fh.write(curve_svg(self.rows, log_x=log_x))


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def tool_versions() -> dict:
    from . import __version__

    return {"collectcert": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def curve_svg(rows, log_x: bool = False) -> str:
    """Minimal line plot: collective ratio solid, naive ratio dotted."""
    width, height = 640, 400
    ml, mr, mt, mb = 60, 20, 20, 50
    inner_w, inner_h = width - ml - mr, height - mt - mb

    def x_value(radius):
        return float(np.log10(1 + radius)) if log_x else float(radius)

    xs = [x_value(r.radius) for r in rows]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x_hi - x_lo < 1e-12:
        x_hi = x_lo + 1.0

    def px(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * inner_w

    def py(y):
        return mt + (1.0 - y) * inner_h

    def polyline(values, style):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, values))
        return f'<polyline fill="none" points="{pts}" {style}/>'

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{py(0)}" x2="{width - mr}" y2="{py(0)}" stroke="black"/>',
        f'<line x1="{ml}" y1="{py(0)}" x2="{ml}" y2="{mt}" stroke="black"/>',
    ]
    for tick in (0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{ml - 8}" y="{py(tick) + 4:.2f}" font-size="12" text-anchor="end">{tick:g}</text>'
        )
        parts.append(
            f'<line x1="{ml - 4}" y1="{py(tick):.2f}" x2="{ml}" y2="{py(tick):.2f}" stroke="black"/>'
        )
    if rows:
        for r in (rows[0], rows[-1]):
            x = px(x_value(r.radius))
            parts.append(
                f'<line x1="{x:.2f}" y1="{py(0):.2f}" x2="{x:.2f}" y2="{py(0) + 4:.2f}" stroke="black"/>'
            )
            parts.append(
                f'<text x="{x:.2f}" y="{py(0) + 18:.2f}" font-size="12" text-anchor="middle">{r.radius}</text>'
            )
    x_label = "radius (log scale)" if log_x else "radius"
    parts.append(
        f'<text x="{ml + inner_w / 2:.2f}" y="{height - 12}" font-size="13" text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{mt + inner_h / 2:.2f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + inner_h / 2:.2f})">certified ratio</text>'
    )
    if rows:
        parts.append(polyline([r.collective_ratio for r in rows], 'stroke="#1f77b4" stroke-width="2"'))
        parts.append(
            polyline(
                [r.naive_ratio for r in rows],
                'stroke="#ff7f0e" stroke-width="2" stroke-dasharray="3 4"',
            )
        )
    parts.append(
        f'<text x="{width - mr - 10}" y="{mt + 14}" font-size="12" text-anchor="end" fill="#1f77b4">collective</text>'
    )
    parts.append(
        f'<text x="{width - mr - 10}" y="{mt + 30}" font-size="12" text-anchor="end" fill="#ff7f0e">naive</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
