import numpy as np

from imbalforest.metrics import ConfusionMatrix, roc_curve
from imbalforest.plots import confusion_svg, heatmap_svg, roc_svg
from imbalforest.preprocess import CorrMatrix


def test_roc_svg_polyline_matches_points():
    curve = roc_curve([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1])
    svg = roc_svg(curve, width=480, height=480)
    # plot box is 400 x 390 starting at (60, 40)
    assert 'points="60.00,430.00 60.00,235.00 260.00,235.00 260.00,40.00 460.00,40.00"' in svg
    assert "AUC = 0.7500" in svg
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_confusion_svg_cells():
    svg = confusion_svg(ConfusionMatrix(tp=83736, tn=87242, fp=3826, fn=320))
    for v in ("83736", "87242", "3826", "320", "TP", "TN", "FP", "FN"):
        assert f">{v}<" in svg
    # the largest cell is the darkest
    assert 'fill="#08306b"' in svg


def test_heatmap_colors_and_labels():
    cm = CorrMatrix(("a<b", "c"), np.array([[1.0, -1.0], [-1.0, 1.0]]))
    svg = heatmap_svg(cm)
    assert svg.count('fill="#b2182b"') == 2
    assert svg.count('fill="#2166ac"') == 2
    assert "a&lt;b" in svg and "a<b" not in svg
    assert ">-1.00<" in svg


def test_watermark_only_when_asked():
    cm = ConfusionMatrix(tp=1, tn=1, fp=0, fn=0)
    assert "leaky" not in confusion_svg(cm)
    assert ">leaky<" in confusion_svg(cm, watermark="leaky")


def test_output_is_deterministic():
    curve = roc_curve([1, 0, 1], [0.3, 0.2, 0.9])
    assert roc_svg(curve) == roc_svg(curve)
