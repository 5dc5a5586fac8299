import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdlarc.multitensor import (
    LEGAL_KEYS,
    Dims,
    GridMasks,
    MultiTensor,
    ShapeKey,
    SymmetryElement,
    apply_symmetry,
    d4_compose,
    d4_direction_perm,
    d4_inverse,
    enumerate_legal_shapes,
    random_multitensor,
    tied_key,
    zeros_like,
)

DIMS = Dims(3, 4, 5, 6)


def brute_force_legal():
    out = set()
    for flags in itertools.product((False, True), repeat=5):
        e, c, d, h, w = flags
        if not (c or d or h or w):
            continue
        if (h or w) and not e:
            continue
        out.add(flags)
    return out


def test_eighteen_keys():
    keys = enumerate_legal_shapes()
    assert len(keys) == 18
    assert {k.flags for k in keys} == brute_force_legal()
    assert keys == enumerate_legal_shapes()


def test_specific_keys():
    assert ShapeKey.from_name("height") not in LEGAL_KEYS
    assert ShapeKey.from_name("example,color") in LEGAL_KEYS
    assert ShapeKey.from_name("example") not in LEGAL_KEYS


def test_residual_widths_and_tying():
    for k in LEGAL_KEYS:
        assert k.residual_width == (8 if k.direction else 16)
        t = tied_key(k)
        assert t in LEGAL_KEYS
        if k.height and not k.width:
            assert t == k.transposed() and t.width
        else:
            assert t == k


def rand_g(rng, d4=None):
    return SymmetryElement.random(DIMS.n_example, DIMS.n_colors, rng, d4)


def assert_mt_equal(a, b):
    assert set(a.entries) == set(b.entries) and a.dims == b.dims
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_identity_action():
    rng = np.random.default_rng(0)
    x = random_multitensor(DIMS, rng)
    assert_mt_equal(apply_symmetry(x, SymmetryElement.identity(3, 4)), x.numpy())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_group_action_laws(seed):
    rng = np.random.default_rng(seed)
    x = random_multitensor(DIMS, rng)
    g, h = rand_g(rng), rand_g(rng)
    assert_mt_equal(apply_symmetry(apply_symmetry(x, g), g.inverse()), x.numpy())
    assert_mt_equal(apply_symmetry(apply_symmetry(x, g), h), apply_symmetry(x, g.then(h)))


def test_rotations_compose():
    rng = np.random.default_rng(1)
    x = random_multitensor(DIMS, rng)
    r90 = SymmetryElement.identity(3, 4).__class__(tuple(range(3)), tuple(range(4)), 1)
    r180 = SymmetryElement(tuple(range(3)), tuple(range(4)), 2)
    assert_mt_equal(apply_symmetry(apply_symmetry(x, r90), r90), apply_symmetry(x, r180))


def test_d4_is_dihedral():
    elems = range(8)
    for a in elems:
        assert d4_compose(a, d4_inverse(a)) == 0
        for b in elems:
            for c in elems:
                assert d4_compose(d4_compose(a, b), c) == d4_compose(a, d4_compose(b, c))
    assert len({tuple(d4_direction_perm(g)) for g in elems}) == 8
    # a quarter turn counter-clockwise sends east to north
    assert d4_direction_perm(1)[0] == 2


def test_rotation_moves_pixels_and_directions_consistently():
    # a pixel east of another pixel ends up north of it after a ccw quarter turn
    a = np.zeros((1, 1, 1, 3, 3, 1))
    a[0, 0, 0, 1, 1, 0] = 1.0
    a[0, 0, 0, 1, 2, 0] = 2.0
    key = ShapeKey.from_name("example,height,width")
    x = MultiTensor({key: a}, Dims(1, 1, 3, 3))
    y = apply_symmetry(x, SymmetryElement((0,), (0,), 1))[key][0, 0, 0, :, :, 0]
    assert y[1, 1] == 1.0 and y[0, 1] == 2.0


def test_axis_swap_moves_height_key_to_width_key():
    rng = np.random.default_rng(2)
    x = random_multitensor(DIMS, rng)
    y = apply_symmetry(x, SymmetryElement(tuple(range(3)), tuple(range(4)), 1))
    h, w = ShapeKey.from_name("example,height"), ShapeKey.from_name("example,width")
    assert y.dims == DIMS.transposed()
    # counter-clockwise: the top row becomes the left column, the left column the bottom row
    np.testing.assert_array_equal(y[w][:, :, :, 0, :, :], x[h][:, :, :, :, 0, :])
    np.testing.assert_array_equal(y[h][:, :, :, :, 0, :], x[w][:, :, :, 0, ::-1, :])


def test_map_zip_zeros():
    rng = np.random.default_rng(3)
    x = random_multitensor(DIMS, rng).numpy()
    z = zeros_like(x)
    assert_mt_equal(z.zip(x, lambda k, a, b: a + b), x)
    assert_mt_equal(x.map(lambda k, v: v * 2).map(lambda k, v: v * 2), x.map(lambda k, v: v * 4))
    g = rand_g(rng)
    y = random_multitensor(DIMS, rng)
    lhs = apply_symmetry(x.zip(y.numpy(), lambda k, a, b: a + b), g)
    rhs = apply_symmetry(x, g).zip(apply_symmetry(y, g), lambda k, a, b: a + b)
    for k in lhs:
        np.testing.assert_allclose(lhs[k], rhs[k], rtol=0, atol=1e-15)


def test_zip_shape_mismatch():
    rng = np.random.default_rng(4)
    x = random_multitensor(DIMS, rng)
    y = random_multitensor(Dims(3, 4, 5, 7), rng)
    with pytest.raises(ValueError):
        x.zip(y, lambda k, a, b: a)


def test_check_and_dump_round_trip():
    rng = np.random.default_rng(5)
    x = random_multitensor(Dims(2, 1, 2, 3), rng).numpy().check()
    y = MultiTensor.load(x.dumps()).check()
    assert_mt_equal(x, y)
    assert x.squeezed(ShapeKey.from_name("example,height")).shape == (2, 2, 16)


def test_grid_masks_follow_symmetry():
    rng = np.random.default_rng(6)
    rows = (np.arange(5)[None] < np.array([[3], [5], [2]])).astype(float)
    cols = (np.arange(6)[None] < np.array([[6], [1], [4]])).astype(float)
    m = GridMasks(rows, cols)
    key = ShapeKey.from_name("example,height,width")
    for d4 in range(8):
        g = rand_g(rng, d4)
        full = np.broadcast_to(m.full(key), (3, 1, 1, 5, 6, 1))
        x = MultiTensor({key: full}, Dims(3, 1, 5, 6))
        moved = apply_symmetry(x, SymmetryElement(g.example_perm, (0,), d4))[key]
        np.testing.assert_array_equal(moved, np.broadcast_to(m.transform(g).full(key), moved.shape))
