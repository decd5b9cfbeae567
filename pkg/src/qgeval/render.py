"""Plain-text and SVG emission for significance matrices."""

from __future__ import annotations

from .humaneval import SignificanceMatrix

CELL = 26
LABEL_SPACE = 120


def sigmatrix_csv(matrix: SignificanceMatrix) -> str:
    """Header row of system names, then one row per system with 0/1 cells."""
    lines = ["system," + ",".join(matrix.systems)]
    for system, row in zip(matrix.systems, matrix.cells):
        lines.append(system + "," + ",".join("1" if c else "0" for c in row))
    return "\n".join(lines) + "\n"


def parse_sigmatrix_csv(text: str) -> SignificanceMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header[0] != "system":
        raise ValueError("sigmatrix csv must start with a 'system' header column")
    systems = tuple(header[1:])
    cells = []
    for line in lines[1:]:
        parts = line.split(",")
        cells.append(tuple(part == "1" for part in parts[1:]))
    if len(cells) != len(systems) or any(len(r) != len(systems) for r in cells):
        raise ValueError("sigmatrix csv is not square")
    return SignificanceMatrix(systems=systems, cells=tuple(cells), threshold=0.0)


def heatmap_svg(matrix: SignificanceMatrix) -> str:
    """Grid rendering: filled cell = row system significantly beats column."""
    n = len(matrix.systems)
    width = LABEL_SPACE + n * CELL + 10
    height = LABEL_SPACE + n * CELL + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="11">',
        f'<text x="4" y="14">row significantly outperforms column (p&lt;{matrix.threshold:g})</text>',
    ]
    for j, system in enumerate(matrix.systems):
        x = LABEL_SPACE + j * CELL + CELL // 2
        parts.append(
            f'<text x="{x}" y="{LABEL_SPACE - 6}" text-anchor="start" '
            f'transform="rotate(-60 {x} {LABEL_SPACE - 6})">{_esc(system)}</text>'
        )
    for i, system in enumerate(matrix.systems):
        y = LABEL_SPACE + i * CELL
        parts.append(f'<text x="4" y="{y + CELL - 8}">{_esc(system)}</text>')
        for j in range(n):
            x = LABEL_SPACE + j * CELL
            if i == j:
                fill = "#bbbbbb"
            elif matrix.cells[i][j]:
                fill = "#2c7fb8"
            else:
                fill = "#f4f4f4"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL - 2}" height="{CELL - 2}" fill="{fill}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
