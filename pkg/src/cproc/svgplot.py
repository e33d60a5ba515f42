"""Dependency-free SVG rendering of ROC bands (staircase + shaded region +
diagonal reference). Output is deterministic: no timestamps, fixed float
formatting."""

from __future__ import annotations

from pathlib import Path

import numpy as np

_PALETTE = ("#4477aa", "#ee6677", "#228833", "#ccbb44")
_SIZE = 480
_MARGIN = 56


def _px(x: float) -> float:
    return _MARGIN + x * (_SIZE - 2 * _MARGIN)


def _py(y: float) -> float:
    return _SIZE - _MARGIN - y * (_SIZE - 2 * _MARGIN)


def _path(xs, ys) -> str:
    return " ".join(
        f"{'M' if i == 0 else 'L'} {_px(float(x)):.2f} {_py(float(y)):.2f}"
        for i, (x, y) in enumerate(zip(xs, ys))
    )


def band_svg(
    bands: list[tuple[str, np.ndarray, np.ndarray, np.ndarray, np.ndarray]],
    path: str | Path,
    curve: tuple[np.ndarray, np.ndarray] | None = None,
    title: str = "ROC bands",
    comment: str = "",
) -> None:
    """Render one or more bands, each given as
    (name, sen_lo, sen_up, spe_lo, spe_up) with rows ordered by ascending
    threshold, plus an optional (fpr, tpr) point curve."""
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}">',
    ]
    if comment:
        parts.append(f"<!-- {comment.replace('--', '- -')} -->")
    parts.append(f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>')
    parts.append(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_SIZE - 2 * _MARGIN}" '
        f'height="{_SIZE - 2 * _MARGIN}" fill="none" stroke="black"/>'
    )
    for tick in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        parts.append(
            f'<line x1="{_px(tick):.2f}" y1="{_py(0) + 4:.2f}" x2="{_px(tick):.2f}" '
            f'y2="{_py(0):.2f}" stroke="black"/>'
            f'<text x="{_px(tick):.2f}" y="{_py(0) + 18:.2f}" font-size="11" '
            f'text-anchor="middle">{tick:.1f}</text>'
            f'<line x1="{_px(0) - 4:.2f}" y1="{_py(tick):.2f}" x2="{_px(0):.2f}" '
            f'y2="{_py(tick):.2f}" stroke="black"/>'
            f'<text x="{_px(0) - 8:.2f}" y="{_py(tick) + 4:.2f}" font-size="11" '
            f'text-anchor="end">{tick:.1f}</text>'
        )
    parts.append(
        f'<text x="{_px(0.5):.2f}" y="{_SIZE - 12}" font-size="13" text-anchor="middle">'
        "False positive rate</text>"
        f'<text x="14" y="{_py(0.5):.2f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {_py(0.5):.2f})">True positive rate</text>'
        f'<text x="{_px(0.5):.2f}" y="{_MARGIN - 16}" font-size="14" '
        f'text-anchor="middle">{title}</text>'
    )
    parts.append(
        f'<path d="{_path([0, 1], [0, 1])}" stroke="#999999" stroke-dasharray="5,4" fill="none"/>'
    )
    for i, (name, sen_lo, sen_up, spe_lo, spe_up) in enumerate(bands):
        color = _PALETTE[i % len(_PALETTE)]
        # upper envelope (spe_lo, sen_up) out, lower envelope (spe_up, sen_lo) back
        xs = np.concatenate([spe_lo, spe_up[::-1]])
        ys = np.concatenate([sen_up, sen_lo[::-1]])
        parts.append(f'<path d="{_path(xs, ys)} Z" fill="{color}" fill-opacity="0.25" stroke="none"/>')
        parts.append(f'<path d="{_path(spe_lo, sen_up)}" stroke="{color}" fill="none"/>')
        parts.append(f'<path d="{_path(spe_up, sen_lo)}" stroke="{color}" fill="none"/>')
        ly = _MARGIN + 16 + 16 * i
        parts.append(
            f'<rect x="{_px(0.62):.2f}" y="{ly - 9}" width="12" height="12" fill="{color}" '
            f'fill-opacity="0.45"/><text x="{_px(0.62) + 16:.2f}" y="{ly + 1}" '
            f'font-size="11">{name}</text>'
        )
    if curve is not None:
        fpr, tpr = curve
        parts.append(f'<path d="{_path(fpr, tpr)}" stroke="black" fill="none" stroke-width="1.4"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
