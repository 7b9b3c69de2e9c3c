import numpy as np

from projplane import __version__
from projplane.report import BEGIN, END, RESULT, emit_report, flatten, parse_report


def test_flatten_shapes():
    got = dict(flatten({"a": 1, "b": {"c": [1.5, True, None]}, "m": np.eye(2), "z": 1 - 2j}))
    assert got == {"a": "1", "b.c": "[1.5, true, null]", "m.0": "[1.0, 0.0]",
                   "m.1": "[0.0, 1.0]", "z": "1.0-2.0i"}
    long = dict(flatten({"rows": [[0]] * 11}))
    assert "rows.00" in long and "rows.10" in long


def test_emit_layout_and_roundtrip():
    text = emit_report({"b": 0.1, "a": "x\ny"}, "demo op", seed=7, options={"tol": 1e-6})
    lines = text.splitlines()
    assert lines[0] == BEGIN and lines[-1] == END and RESULT in lines
    assert lines[1:4] == ["command: demo op", "seed: 7", f"version: {__version__}"]
    assert lines.index("options.tol: 1e-06") < lines.index(RESULT)
    r = parse_report(text)
    assert r["b"] == "0.1" and r["a"] == "x\\ny"
    # keys after the result marker are sorted
    body = lines[lines.index(RESULT) + 1:-1]
    assert body == sorted(body)


def test_floats_are_exact_repr():
    v = 0.1 + 0.2
    assert parse_report(emit_report({"v": v}, "c"))["v"] == repr(v)
    assert float(parse_report(emit_report({"v": np.float64(v)}, "c"))["v"]) == v
