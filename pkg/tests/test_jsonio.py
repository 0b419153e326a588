import json
import math

from nohidelab.jsonio import csv_text, format_float, json_text, write_text_atomic


class TestFormatFloat:
    def test_round_trips_hard_values(self):
        values = [1 / 3, math.pi, 0.1, 1e-300, 1.7976931348623157e308,
                  -0.0, 0.5, 123456789.123456789, math.sin(math.pi / 10) ** 2]
        for v in values:
            assert float(format_float(v)) == v

    def test_integral_floats_keep_a_point(self):
        assert format_float(1.0) == "1.0"
        assert format_float(-2.0) == "-2.0"
        assert format_float(0.5) == "0.5"


class TestJsonText:
    def test_parses_back_and_preserves_values(self):
        payload = {
            "name": "run",
            "values": [0.1, 1.0, 3],
            "nested": {"flag": True, "none": None, "text": "a\"b"},
            "empty_list": [],
            "empty_map": {},
        }
        text = json_text(payload)
        assert json.loads(text) == payload

    def test_float_precision_survives(self):
        x = math.sin(math.pi / 20) ** 2
        text = json_text({"p": x})
        assert json.loads(text)["p"] == x

    def test_deterministic(self):
        payload = {"a": [1.5, {"b": 2.5}], "c": "d"}
        assert json_text(payload) == json_text(payload)


def test_csv_text_layout():
    text = csv_text(["a", "b"], [[0.5, 1], [1.0, 2]])
    assert text == "a,b\n0.5,1\n1.0,2\n"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "out.json"
    write_text_atomic(target, "payload\n")
    assert target.read_text() == "payload\n"
    leftovers = [p for p in tmp_path.iterdir() if p != target]
    assert leftovers == []


def test_atomic_write_replaces_existing(tmp_path):
    target = tmp_path / "out.json"
    target.write_text("old")
    write_text_atomic(target, "new")
    assert target.read_text() == "new"
