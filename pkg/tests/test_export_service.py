import json
import math

from app.services.export_service import (
    atomic_write_text,
    format_value,
    render_csv,
    render_svg_loss_plot,
    write_json,
)


class TestCsv:
    def test_schema_line_and_header(self):
        text = render_csv("table1", ["m", "N"], [[100, 1000]])
        assert text.splitlines() == ["# schema=table1 version=1", "m,N", "100,1000"]

    def test_value_formatting(self):
        assert format_value(True) == "true"
        assert format_value(None) == ""
        assert format_value(0.1) == "0.10000000000000001"
        assert float(format_value(1 / 3)) == 1 / 3


class TestFiles:
    def test_atomic_write_creates_parents(self, tmp_path):
        path = atomic_write_text(tmp_path / "a" / "b.txt", "hello")
        assert path.read_text() == "hello"
        assert [p.name for p in path.parent.iterdir()] == ["b.txt"]

    def test_json_is_sorted(self, tmp_path):
        path = write_json(tmp_path / "out.json", {"b": 1, "a": math.nan})
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert math.isnan(json.loads(text)["a"])


class TestSvg:
    def test_one_polyline_per_series(self):
        svg = render_svg_loss_plot(
            {"m=100": ([0, 10, 20], [1.0, 0.1, 0.01]), "m=1000": ([0, 10, 20], [1.0, 0.05, 0.001])},
            title="N=100",
        )
        assert svg.startswith("<svg")
        assert svg.count("<polyline") == 2
        assert "N=100" in svg

    def test_nonpositive_values_are_drawn(self):
        svg = render_svg_loss_plot({"train": ([0, 1], [0.0, 0.0])}, title="flat")
        assert "nan" not in svg
