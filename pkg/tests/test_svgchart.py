"""Structural tests for the dependency-free SVG chart writer."""

import xml.etree.ElementTree as ET

import pytest

from gridrank.svgchart import svg_line_chart, write_svg

_SVG_NS = "{http://www.w3.org/2000/svg}"


def _parse(svg: str) -> ET.Element:
    return ET.fromstring(svg)


class TestSvgLineChart:
    def test_output_is_well_formed_xml(self):
        svg = svg_line_chart({"a": [(0, 1.0), (1, 0.5), (2, 0.1)]},
                             title="demo", x_label="x", y_label="y")
        root = _parse(svg)
        assert root.tag == f"{_SVG_NS}svg"

    def test_one_polyline_per_series(self):
        svg = svg_line_chart({
            "fast": [(1, 10.0), (2, 5.0)],
            "slow": [(1, 20.0), (2, 19.0)],
        })
        root = _parse(svg)
        polylines = root.findall(f"{_SVG_NS}polyline")
        assert len(polylines) == 2
        colors = {p.get("stroke") for p in polylines}
        assert len(colors) == 2

    def test_title_and_labels_appear(self):
        svg = svg_line_chart({"s": [(0, 1.0), (1, 2.0)]},
                             title="Residual", x_label="iteration",
                             y_label="pu")
        texts = [t.text for t in _parse(svg).findall(f"{_SVG_NS}text")]
        assert "Residual" in texts
        assert "iteration" in texts
        assert "pu" in texts

    def test_legend_names_series(self):
        svg = svg_line_chart({"case118": [(0, 1.0), (1, 0.9)]})
        texts = [t.text for t in _parse(svg).findall(f"{_SVG_NS}text")]
        assert "case118" in texts

    def test_log_scale_drops_non_positive_points(self):
        svg = svg_line_chart(
            {"trace": [(0, 1.0), (1, 0.0), (2, 1e-3), (3, -5.0)]},
            log_y=True)
        (polyline,) = _parse(svg).findall(f"{_SVG_NS}polyline")
        assert len(polyline.get("points").split()) == 2

    def test_log_scale_ticks_label_powers_of_ten(self):
        svg = svg_line_chart({"t": [(0, 1.0), (5, 1e-6)]}, log_y=True)
        texts = [t.text for t in _parse(svg).findall(f"{_SVG_NS}text")]
        assert any(t and t.startswith("1e") for t in texts)

    def test_all_points_land_inside_canvas(self):
        svg = svg_line_chart({"wild": [(0, -1e6), (1, 1e6), (2, 0.0)]})
        (polyline,) = _parse(svg).findall(f"{_SVG_NS}polyline")
        for pair in polyline.get("points").split():
            x, y = map(float, pair.split(","))
            assert 0 <= x <= 640
            assert 0 <= y <= 400

    def test_constant_series_does_not_collapse_the_axis(self):
        svg = svg_line_chart({"flat": [(0, 3.0), (1, 3.0), (2, 3.0)]})
        assert "NaN" not in svg and "inf" not in svg

    def test_single_point_series_renders(self):
        svg = svg_line_chart({"dot": [(4, 2.5)]})
        (polyline,) = _parse(svg).findall(f"{_SVG_NS}polyline")
        assert polyline.get("points")

    def test_markup_in_labels_is_escaped(self):
        svg = svg_line_chart({"s": [(0, 1.0), (1, 2.0)]},
                             title="<b>bold & brash</b>")
        assert "<b>" not in svg
        assert "&amp;" in svg
        _parse(svg)  # still well-formed

    def test_entirely_non_positive_log_series_rejected(self):
        with pytest.raises(ValueError, match="no plottable points"):
            svg_line_chart({"dead": [(0, 0.0), (1, -1.0)]}, log_y=True)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="no plottable points"):
            svg_line_chart({})


class TestWriteSvg:
    def test_writes_the_document(self, tmp_path):
        svg = svg_line_chart({"a": [(0, 1.0), (1, 2.0)]})
        path = tmp_path / "chart.svg"
        write_svg(path, svg)
        assert path.read_text() == svg
