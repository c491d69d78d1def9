"""Static SVG charts emitted as plain markup (no plotting library)."""

from __future__ import annotations

from .metrics import ConfusionMatrix, RocCurve
from .preprocess import CorrMatrix


def _esc(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _open(width: int, height: int, title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" role="img" aria-label="{_esc(title)}">',
        f"<title>{_esc(title)}</title>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{_esc(title)}</text>',
    ]


def _close(lines: list[str], width: int, height: int, watermark: str | None) -> str:
    if watermark:
        lines.append(
            f'<text x="{width - 6}" y="{height - 6}" text-anchor="end" font-family="sans-serif" '
            f'font-size="10" fill="#b22222">{_esc(watermark)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _blend(value: float, lo: tuple[int, int, int], hi: tuple[int, int, int]) -> str:
    value = min(1.0, max(0.0, value))
    rgb = [round(a + (b - a) * value) for a, b in zip(lo, hi)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _diverging(r: float) -> str:
    # blue for -1, white for 0, red for +1
    if r >= 0:
        return _blend(r, (255, 255, 255), (178, 24, 43))
    return _blend(-r, (255, 255, 255), (33, 102, 172))


def roc_svg(curve: RocCurve, title: str = "Random forest ROC", watermark: str | None = None,
            width: int = 480, height: int = 480) -> str:
    pad_l, pad_r, pad_t, pad_b = 60, 20, 40, 50
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def xy(fpr: float, tpr: float) -> str:
        return f"{pad_l + fpr * pw:.2f},{pad_t + (1 - tpr) * ph:.2f}"

    lines = _open(width, height, title)
    lines.append(
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>'
    )
    for i in range(6):
        v = i / 5
        x = pad_l + v * pw
        y = pad_t + (1 - v) * ph
        lines.append(f'<line x1="{x:.2f}" y1="{pad_t + ph}" x2="{x:.2f}" y2="{pad_t + ph + 5}" stroke="#333"/>')
        lines.append(
            f'<text x="{x:.2f}" y="{pad_t + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{v:.1f}</text>'
        )
        lines.append(f'<line x1="{pad_l - 5}" y1="{y:.2f}" x2="{pad_l}" y2="{y:.2f}" stroke="#333"/>')
        lines.append(
            f'<text x="{pad_l - 8}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.1f}</text>'
        )
    lines.append(
        f'<text x="{pad_l + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">False positive rate</text>'
    )
    lines.append(
        f'<text x="16" y="{pad_t + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {pad_t + ph / 2:.1f})">True positive rate</text>'
    )
    lines.append(
        f'<polyline points="{xy(0, 0)} {xy(1, 1)}" fill="none" stroke="#999" stroke-dasharray="5,4"/>'
    )
    pts = " ".join(xy(f, t) for f, t in curve.points)
    lines.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="2"/>')
    lines.append(
        f'<text x="{pad_l + pw - 8}" y="{pad_t + ph - 10}" text-anchor="end" font-family="sans-serif" '
        f'font-size="13">AUC = {curve.auc:.4f}</text>'
    )
    return _close(lines, width, height, watermark)


def confusion_svg(cm: ConfusionMatrix, title: str = "Confusion matrix", watermark: str | None = None,
                  width: int = 420, height: int = 400) -> str:
    """Rows are true class (0, 1), columns predicted class (0, 1)."""
    cells = [[cm.tn, cm.fp], [cm.fn, cm.tp]]
    names = [["TN", "FP"], ["FN", "TP"]]
    peak = max(max(r) for r in cells) or 1
    x0, y0, size = 110, 60, 130
    lines = _open(width, height, title)
    for i in range(2):
        for j in range(2):
            v = cells[i][j]
            fill = _blend(v / peak, (247, 251, 255), (8, 48, 107))
            ink = "white" if v / peak > 0.5 else "black"
            x, y = x0 + j * size, y0 + i * size
            lines.append(f'<rect x="{x}" y="{y}" width="{size}" height="{size}" fill="{fill}" stroke="#333"/>')
            lines.append(
                f'<text x="{x + size / 2:.1f}" y="{y + size / 2:.1f}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="18" fill="{ink}">{v}</text>'
            )
            lines.append(
                f'<text x="{x + size / 2:.1f}" y="{y + size / 2 + 20:.1f}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11" fill="{ink}">{names[i][j]}</text>'
            )
    for k in range(2):
        lines.append(
            f'<text x="{x0 + k * size + size / 2:.1f}" y="{y0 + 2 * size + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{k}</text>'
        )
        lines.append(
            f'<text x="{x0 - 10}" y="{y0 + k * size + size / 2:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{k}</text>'
        )
    lines.append(
        f'<text x="{x0 + size:.1f}" y="{y0 + 2 * size + 40}" text-anchor="middle" font-family="sans-serif" font-size="12">Predicted label</text>'
    )
    lines.append(
        f'<text x="30" y="{y0 + size:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 30 {y0 + size:.1f})">True label</text>'
    )
    return _close(lines, width, height, watermark)


def heatmap_svg(corr: CorrMatrix, title: str = "Feature correlation", watermark: str | None = None,
                cell: int = 90) -> str:
    k = len(corr.names)
    label_w = 120
    width = label_w + k * cell + 20
    height = 50 + k * cell + 80
    lines = _open(width, height, title)
    for i in range(k):
        for j in range(k):
            r = float(corr.values[i, j])
            x, y = label_w + j * cell, 40 + i * cell
            ink = "white" if abs(r) > 0.6 else "black"
            lines.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_diverging(r)}" stroke="white"/>'
            )
            lines.append(
                f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 5:.1f}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="14" fill="{ink}">{r:.2f}</text>'
            )
    for i, name in enumerate(corr.names):
        lines.append(
            f'<text x="{label_w - 8}" y="{40 + i * cell + cell / 2 + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{_esc(name)}</text>'
        )
        lines.append(
            f'<text x="{label_w + i * cell + cell / 2:.1f}" y="{40 + k * cell + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{_esc(name)}</text>'
        )
    return _close(lines, width, height, watermark)
