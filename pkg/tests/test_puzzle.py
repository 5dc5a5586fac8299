import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdlarc.puzzle import (
    Grid,
    PuzzleFormatError,
    build_color_map,
    infer_shape_rules,
    parse_puzzle,
    serialize_puzzle,
)


def task(train, test):
    return json.dumps({"train": train, "test": test})


def test_minimal_task():
    p = parse_puzzle('{"train":[{"input":[[1]],"output":[[1]]}],"test":[{"input":[[2]]}]}')
    assert p.n_example == 2 and p.n_train == 1 and p.n_test == 1
    assert p.test[0].output is None


@pytest.mark.parametrize("text", [
    "{not json",
    task([{"input": [[1, 2, 3], [1, 2, 3, 4]], "output": [[1]]}], [{"input": [[1]]}]),
    task([{"input": [[10]], "output": [[1]]}], [{"input": [[1]]}]),
    task([], [{"input": [[1]]}]),
    task([{"input": [[1]], "output": [[1]]}], []),
    task([{"input": [[1]]}], [{"input": [[1]]}]),
    task([{"input": [[1.5]], "output": [[1]]}], [{"input": [[1]]}]),
    task([{"input": [[-1]], "output": [[1]]}], [{"input": [[1]]}]),
    task([{"input": [[0] * 31], "output": [[1]]}], [{"input": [[1]]}]),
])
def test_malformed_tasks_rejected(text):
    with pytest.raises(PuzzleFormatError):
        parse_puzzle(text)


def test_test_outputs_are_withheld():
    p = parse_puzzle(task([{"input": [[1]], "output": [[2]]}], [{"input": [[3]], "output": [[4]]}]))
    assert all(q.output is None for q in p.test)
    assert p.withheld == (Grid(np.array([[4]])),)
    assert [g for _, _, g in p.known_grids()] == [Grid(np.array([[1]])), Grid(np.array([[2]])), Grid(np.array([[3]]))]


grids = st.integers(1, 6).flatmap(
    lambda h: st.integers(1, 6).flatmap(
        lambda w: st.lists(st.lists(st.integers(0, 9), min_size=w, max_size=w), min_size=h, max_size=h)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(grids, grids), min_size=1, max_size=3), st.lists(grids, min_size=1, max_size=2), st.booleans())
def test_round_trip(train, test, with_answers):
    blob = {
        "train": [{"input": a, "output": b} for a, b in train],
        "test": [{"input": a, **({"output": a} if with_answers else {})} for a in test],
    }
    p = parse_puzzle(json.dumps(blob), "x")
    q = parse_puzzle(serialize_puzzle(p), "x")
    assert p == q and p.withheld == q.withheld


def test_rule1():
    p = parse_puzzle(task(
        [{"input": [[1, 2]], "output": [[2, 1]]}, {"input": [[1], [2], [3]], "output": [[3], [2], [1]]}],
        [{"input": [[1, 1, 1], [2, 2, 2]]}]))
    si = infer_shape_rules(p)
    assert si.rule1 and not si.rule3
    assert si.predicted[2] == (2, 3)
    assert si.fixed[2].all()


def test_rule3():
    p = parse_puzzle(task(
        [{"input": [[1] * 4] * 4, "output": [[1] * 3] * 3}, {"input": [[2] * 5] * 2, "output": [[2] * 3] * 3}],
        [{"input": [[3] * 2] * 6}]))
    si = infer_shape_rules(p)
    assert not si.rule1 and si.rule3
    assert si.predicted[2] == (3, 3)


def test_rule1_takes_precedence():
    p = parse_puzzle(task(
        [{"input": [[1, 2]], "output": [[2, 1]]}, {"input": [[1, 0]], "output": [[0, 1]]}],
        [{"input": [[1], [2]]}]))
    si = infer_shape_rules(p)
    assert si.rule1 and si.rule3 and si.rule2 is False
    assert si.predicted[2] == (2, 1)


def test_no_rule_free_output_and_canvas():
    p = parse_puzzle(task(
        [{"input": [[1] * 5] * 7, "output": [[1] * 2] * 3}, {"input": [[1] * 3] * 2, "output": [[1] * 4] * 4}],
        [{"input": [[2] * 2] * 2}]))
    si = infer_shape_rules(p)
    assert not (si.rule1 or si.rule3)
    assert (si.canvas_h, si.canvas_w) == (7, 5)
    assert si.predicted[2] is None
    assert si.row_masks[2, :, 1].all() and si.col_masks[2, :, 1].all()
    assert not si.fixed[:, 1].any() and si.fixed[:, 0].all()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(grids, grids), min_size=1, max_size=3), st.lists(grids, min_size=1, max_size=2))
def test_masks_match_grids(train, test):
    p = parse_puzzle(json.dumps({"train": [{"input": a, "output": b} for a, b in train],
                                 "test": [{"input": a} for a in test]}))
    si = infer_shape_rules(p)
    for e, side, g in p.known_grids():
        r, c = si.row_masks[e, :, side], si.col_masks[e, :, side]
        assert r.sum() == g.height and c.sum() == g.width
        assert r[: g.height].all() and c[: g.width].all()
    for e in range(p.n_train, p.n_example):
        if si.rule1 or si.rule3:
            assert si.predicted[e] is not None
        if si.rule1:
            assert si.predicted[e] == p.pairs[e].input.shape


def test_color_map():
    p = parse_puzzle(task([{"input": [[0, 3]], "output": [[5, 0]]}], [{"input": [[3]]}]))
    cm = build_color_map(p)
    assert cm.present == (3, 5) and cm.n_colors == 2
    cells = np.array([[0, 3, 5]])
    np.testing.assert_array_equal(cm.encode(cells), [[0, 1, 2]])
    np.testing.assert_array_equal(cm.decode(cm.encode(cells)), cells)


def test_color_map_degenerate_and_full():
    p = parse_puzzle(task([{"input": [[0]], "output": [[0]]}], [{"input": [[0]]}]))
    assert build_color_map(p).n_colors == 0
    p = parse_puzzle(task([{"input": [list(range(10))], "output": [[0]]}], [{"input": [[0]]}]))
    assert build_color_map(p).n_colors == 9


def test_color_map_ignores_withheld_outputs():
    p = parse_puzzle(task([{"input": [[1]], "output": [[1]]}], [{"input": [[1]], "output": [[7]]}]))
    assert build_color_map(p).present == (1,)
