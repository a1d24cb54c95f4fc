"""Marching-squares isolines and a minimal SVG writer."""

from __future__ import annotations

import numpy as np

# Edge order per cell: 0 bottom (i, j)-(i, j+1), 1 right, 2 top, 3 left.
# Corner order for the case index: bit0 (i,j), bit1 (i,j+1), bit2 (i+1,j+1), bit3 (i+1,j).
_SEGMENTS = {
    0: (), 15: (),
    1: ((3, 0),), 14: ((3, 0),),
    2: ((0, 1),), 13: ((0, 1),),
    3: ((3, 1),), 12: ((3, 1),),
    4: ((1, 2),), 11: ((1, 2),),
    6: ((0, 2),), 9: ((0, 2),),
    7: ((3, 2),), 8: ((3, 2),),
}


def isoline_levels(values: np.ndarray, count: int = 8) -> np.ndarray:
    """``count`` equally spaced levels strictly between the grid min and max."""
    lo, hi = float(np.min(values)), float(np.max(values))
    return lo + (hi - lo) * np.arange(1, count + 1) / (count + 1)


def _edge_point(v, i, j, edge, level):
    corners = {
        0: ((i, j), (i, j + 1)),
        1: ((i, j + 1), (i + 1, j + 1)),
        2: ((i + 1, j), (i + 1, j + 1)),
        3: ((i, j), (i + 1, j)),
    }[edge]
    (a0, a1), (b0, b1) = corners
    va, vb = v[a0, a1], v[b0, b1]
    t = 0.5 if vb == va else (level - va) / (vb - va)
    return (a0 + t * (b0 - a0), a1 + t * (b1 - a1))


def marching_squares(values: np.ndarray, level: float):
    """Line segments ((r0, c0), (r1, c1)) in fractional grid coordinates."""
    v = np.asarray(values, dtype=float)
    above = v > level
    segs = []
    for i in range(v.shape[0] - 1):
        for j in range(v.shape[1] - 1):
            case = (
                int(above[i, j])
                | int(above[i, j + 1]) << 1
                | int(above[i + 1, j + 1]) << 2
                | int(above[i + 1, j]) << 3
            )
            if case in (5, 10):
                # saddle: resolve with the cell-centre average
                centre = v[i : i + 2, j : j + 2].mean() > level
                if (case == 5) == centre:
                    pairs = ((3, 2), (0, 1))
                else:
                    pairs = ((3, 0), (1, 2))
            else:
                pairs = _SEGMENTS[case]
            for e0, e1 in pairs:
                segs.append((_edge_point(v, i, j, e0, level), _edge_point(v, i, j, e1, level)))
    return segs


def contour_svg(values: np.ndarray, levels, size: int = 400) -> str:
    """SVG with one <path> per isoline level; row index maps to the y axis."""
    v = np.asarray(values, dtype=float)
    rows, cols = v.shape
    sx = size / (cols - 1)
    sy = size / (rows - 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white" stroke="black"/>',
    ]
    for k, level in enumerate(levels):
        parts = []
        for (r0, c0), (r1, c1) in marching_squares(v, level):
            parts.append(
                f"M{c0 * sx:.3f},{size - r0 * sy:.3f}L{c1 * sx:.3f},{size - r1 * sy:.3f}"
            )
        shade = int(200 * k / max(len(levels) - 1, 1))
        out.append(
            f'<path class="isoline" data-level="{level:.17g}" fill="none" '
            f'stroke="rgb({shade},0,{200 - shade})" stroke-width="1" d="{"".join(parts)}"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def level_crossings(values: np.ndarray, levels) -> int:
    """Grid edges whose endpoints straddle a level, summed over ``levels``."""
    v = np.asarray(values, dtype=float)
    total = 0
    for level in levels:
        above = v > level
        total += int(np.sum(above[1:, :] != above[:-1, :]) + np.sum(above[:, 1:] != above[:, :-1]))
    return total
