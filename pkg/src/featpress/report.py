"""Sweep reports: the tradeoff CSV, a region summary, and an SVG scatter."""

from __future__ import annotations

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import DataError
from .experiment import Region, TradeoffPoint

__all__ = ["REPORT_COLUMNS", "report_rows", "write_report", "render_svg"]

REPORT_COLUMNS = (
    "selection_k",
    "pca_target",
    "bits",
    "f1",
    "lossy_bytes",
    "baseline_csv_bytes",
    "reduction_vs_csv",
    "reduction_vs_f32",
    "bits_per_second",
    "wall_time_seconds",
)

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_rows(points: list[TradeoffPoint], include_timing: bool = True) -> list[str]:
    """CSV lines (header first) in :data:`REPORT_COLUMNS` order."""
    lines = [",".join(REPORT_COLUMNS)]
    for p in points:
        s = p.storage
        lines.append(
            ",".join(
                _cell(v)
                for v in (
                    p.config.selection_k,
                    p.config.pca_target,
                    p.config.bits,
                    float(p.f1),
                    s.lossy_bytes,
                    s.baseline_csv_bytes,
                    float(s.reduction_vs_csv),
                    float(s.reduction_vs_f32),
                    None if s.bits_per_second is None else float(s.bits_per_second),
                    float(p.wall_time_seconds) if include_timing else None,
                )
            )
        )
    return lines


def _summary(points: list[TradeoffPoint], region: Region | None) -> dict:
    out = {
        "points": [
            {
                "config": p.config.label(),
                "selection_k": p.config.selection_k,
                "pca_target": p.config.pca_target,
                "bits": p.config.bits,
                "f1": p.f1,
                "lossy_bytes": p.storage.lossy_bytes,
                "raw_csv_bytes": p.storage.raw_csv_bytes,
                "reduction_vs_raw_csv": p.storage.reduction_vs_raw_csv,
            }
            for p in points
        ]
    }
    if region is not None:
        out["region"] = {
            "epsilon": region.epsilon,
            "members": [p.config.label() for p in region.members],
            "min_reduction_vs_csv": region.min_reduction,
            "max_reduction_vs_csv": region.max_reduction,
        }
    return out


def write_report(
    points: list[TradeoffPoint],
    region: Region | None,
    path: str | Path,
    *,
    svg: bool = True,
    include_timing: bool = True,
) -> list[Path]:
    """Write ``report.csv``, ``summary.json`` and optionally ``report.svg`` into ``path``.

    ``summary.json`` carries what the fixed CSV schema has no room for: the
    region membership and the reduction against the untransformed log.
    ``include_timing=False`` leaves the wall-time column empty so that
    reports of identical sweeps compare byte-for-byte.
    """
    if not points:
        raise DataError("nothing to report: empty point list")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    target = out / "report.csv"
    target.write_text("\n".join(report_rows(points, include_timing)) + "\n", encoding="utf-8")
    written.append(target)
    target = out / "summary.json"
    target.write_text(json.dumps(_summary(points, region), indent=2) + "\n", encoding="utf-8")
    written.append(target)
    if svg:
        target = out / "report.svg"
        target.write_text(render_svg(points, region), encoding="utf-8")
        written.append(target)
    return written


def _log_ticks(lo: float, hi: float) -> list[float]:
    ticks = []
    for e in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1):
        for m in (1, 2, 5):
            v = m * 10.0**e
            if lo <= v <= hi:
                ticks.append(v)
    return ticks


def render_svg(points: list[TradeoffPoint], region: Region | None, width: int = 720, height: int = 440) -> str:
    """F1 against storage reduction (log x axis), one series per selection/PCA setting."""
    left, right, top, bottom = 70, 190, 30, 60
    pw, ph = width - left - right, height - top - bottom
    xs = [p.storage.reduction_vs_csv for p in points]
    x_lo, x_hi = min(xs) / 1.2, max(xs) * 1.2
    if region is not None:
        x_lo, x_hi = min(x_lo, region.min_reduction / 1.2), max(x_hi, region.max_reduction * 1.2)
    f1s = [p.f1 for p in points]
    y_lo = max(0.0, math.floor((min(f1s) - 0.05) * 20) / 20)
    y_hi = 1.0 if max(f1s) <= 1.0 else max(f1s)
    if y_hi - y_lo < 1e-9:
        y_lo = y_hi - 0.1

    def sx(v: float) -> float:
        return left + pw * (math.log10(v) - math.log10(x_lo)) / (math.log10(x_hi) - math.log10(x_lo))

    def sy(v: float) -> float:
        return top + ph * (y_hi - v) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if region is not None:
        x0, x1 = sx(region.min_reduction), sx(region.max_reduction)
        parts.append(
            f'<rect class="region" x="{x0:.2f}" y="{top}" width="{max(x1 - x0, 2.0):.2f}" height="{ph}" '
            f'fill="#999999" fill-opacity="0.25"><title>operating region, epsilon={region.epsilon:g}: '
            f"{region.min_reduction:.3g}x to {region.max_reduction:.3g}x</title></rect>"
        )
    parts.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>'
    )
    for t in _log_ticks(x_lo, x_hi):
        x = sx(t)
        parts.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    n_y = 5
    for i in range(n_y + 1):
        v = y_lo + (y_hi - y_lo) * i / n_y
        y = sy(v)
        parts.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{v:.2f}</text>')
    parts.append(
        f'<text x="{left + pw / 2:.2f}" y="{height - 15}" text-anchor="middle">'
        "storage reduction factor vs lossless same-stage log (log scale)</text>"
    )
    parts.append(
        f'<text x="18" y="{top + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2:.2f})">F1 score</text>'
    )

    series: dict[tuple, list[TradeoffPoint]] = {}
    for p in points:
        series.setdefault(p.config.stage_key, []).append(p)
    for i, (key, members) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        ordered = sorted(members, key=lambda p: p.storage.reduction_vs_csv)
        if len(ordered) > 1:
            coords = " ".join(f"{sx(p.storage.reduction_vs_csv):.2f},{sy(p.f1):.2f}" for p in ordered)
            parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for p in members:
            parts.append(
                f'<circle class="point" cx="{sx(p.storage.reduction_vs_csv):.2f}" cy="{sy(p.f1):.2f}" r="4" '
                f'fill="{color}"><title>{escape(p.config.label())}: F1={p.f1:.4f}, '
                f"{p.storage.reduction_vs_csv:.3g}x</title></circle>"
            )
        k, pca = key
        name = "full features" if k is None else f"top {k} features"
        if pca is not None:
            name += f", PCA {pca:g}"
        ly = top + 14 + 18 * i
        parts.append(f'<rect x="{left + pw + 15}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{left + pw + 30}" y="{ly}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
