import json

import numpy as np

from sharpbounds.util import blocked_map, canonical_json, format_float, write_csv


def test_blocked_map_thread_invariant():
    def block(b):
        rng = np.random.default_rng(np.random.SeedSequence([3, b]))
        return rng.standard_normal(100)

    serial = np.concatenate(blocked_map(block, 8, threads=1))
    threaded = np.concatenate(blocked_map(block, 8, threads=8))
    assert np.array_equal(serial, threaded)


def test_canonical_json_stable():
    a = canonical_json({"b": 1.5, "a": [1, 2]})
    b = canonical_json({"a": [1, 2], "b": 1.5})
    assert a == b
    assert json.loads(a) == {"a": [1, 2], "b": 1.5}


def test_format_float_roundtrip():
    for x in (0.1, 2 / 9, 1e-17, 3.0, np.float64(0.34327086981333843)):
        assert float(format_float(x)) == float(x)
    assert format_float(7) == "7"


def test_write_csv_blank_for_none(tmp_path):
    path = str(tmp_path / "t.csv")
    write_csv(path, ["a", "b"], [[1.5, None], [None, 2]])
    assert open(path).read() == "a,b\n1.5,\n,2\n"
