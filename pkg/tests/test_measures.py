import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gffx.measures import CellMeasure, MaxSample, PointMeasure, read_point_measures, write_point_measures

unit = st.floats(0.0, 1.0)
finite = st.floats(-50.0, 50.0)


@st.composite
def point_measures(draw):
    n = draw(st.integers(0, 12))
    x = draw(arrays(np.float64, (n, 2), elements=unit))
    h = draw(arrays(np.float64, (n,), elements=finite))
    return PointMeasure(x, h, {"N": draw(st.integers(2, 1024)), "seed": draw(st.integers(0, 2**64 - 1))})


@given(st.lists(point_measures(), max_size=5))
def test_jsonl_round_trip(tmp_path_factory, ms):
    path = tmp_path_factory.mktemp("pm") / "eta.jsonl"
    write_point_measures(path, ms)
    back = read_point_measures(path)
    assert len(back) == len(ms)
    for a, b in zip(ms, back):
        assert np.array_equal(a.x, b.x) and np.array_equal(a.h, b.h)
        assert a.meta == b.meta


def test_truncated_file_is_rejected(tmp_path):
    m = PointMeasure([[0.1, 0.2], [0.3, 0.4]], [1.0, 2.0])
    path = tmp_path / "eta.jsonl"
    write_point_measures(path, [m])
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError):
        read_point_measures(path)
    path.write_text(lines[1] + "\n")
    with pytest.raises(ValueError):
        read_point_measures(path)


@pytest.mark.parametrize(
    "x,h,meta",
    [
        ([[0.1, 1.1]], [0.0], {}),
        ([[0.1, 0.1]], [0.0, 1.0], {}),
        ([[0.1, 0.1]], [-7.0], {"lam": 6.0}),
    ],
)
def test_point_measure_validation(x, h, meta):
    with pytest.raises(ValueError):
        PointMeasure(x, h, meta)


def test_restrict_is_half_open():
    m = PointMeasure([[0.5, 0.5], [0.25, 0.75], [0.0, 0.0]], [1.0, 2.0, 3.0])
    q = m.restrict((0.0, 0.5, 0.0, 0.5))
    assert q.h.tolist() == [3.0]
    assert len(PointMeasure.empty(N=8)) == 0


@given(arrays(np.float64, st.integers(1, 6).map(lambda m: (m, m)), elements=st.floats(0, 1e6)))
def test_cell_measure_round_trip(tmp_path_factory, cells):
    cm = CellMeasure(cells)
    path = tmp_path_factory.mktemp("cm") / "z.json"
    cm.save(path)
    back = CellMeasure.load(path)
    assert np.array_equal(back.cells, cm.cells)
    assert back.total == cm.total


def test_cell_measure_mass_and_validation():
    cm = CellMeasure(np.arange(16.0).reshape(4, 4))
    assert cm.mass((0.0, 0.5, 0.5, 1.0)) == 2 + 3 + 6 + 7
    assert cm.mass((0, 1, 0, 1)) == cm.total == 120.0
    assert CellMeasure.uniform(3, 9.0).cells.tolist() == [[1.0] * 3] * 3
    assert cm.scaled(2.0).total == 240.0
    for bad in (np.zeros((2, 3)), -np.ones((2, 2)), np.full((2, 2), np.nan)):
        with pytest.raises(ValueError):
            CellMeasure(bad)
    with pytest.raises(ValueError):
        CellMeasure.from_dict({"m": 1, "cells": [1.0], "total": 2.0})


@given(arrays(np.float64, st.integers(0, 20), elements=finite), st.data())
def test_max_sample_csv_round_trip(tmp_path_factory, m, data):
    pos = data.draw(arrays(np.float64, (len(m), 2), elements=unit))
    ms = MaxSample(m, pos, 64)
    path = tmp_path_factory.mktemp("ms") / "max.csv"
    ms.to_csv(path)
    back = MaxSample.from_csv(path, 64)
    assert np.array_equal(back.max_centered, ms.max_centered)
    assert np.array_equal(back.position, ms.position)
    assert back.replicates == len(m)
