import numpy as np
import pytest

from tilesynth.geometry import Box
from tilesynth.tiling import (ExtensionSpec, OutOfDomainError, RefinementError,
                              Tiling, extend_box, extend_tile,
                              extend_tile_param, trivial_tiling)

LOWER = ExtensionSpec("lower")
SYM = ExtensionSpec("symmetric")


def test_trivial_tiling_unit_square():
    t = trivial_tiling(Box([0, 0], [1, 1]))
    tiles = t.tiles()
    assert len(tiles) == 1
    assert tiles[0].box == Box([0, 0], [1, 1])
    assert tiles[0].depth == 0
    assert all(tiles[0].lower_contact) and all(tiles[0].upper_contact)


def test_trivial_tiling_eleven_dims():
    t = trivial_tiling(Box([0.0] * 11, [1.0] * 11))
    assert len(t.tiles()) == 1
    assert t.tiles()[0].box.dims == 11


def test_bisect_1d_midpoint():
    t = trivial_tiling(Box([0], [2])).bisect(["0"], max_depth=3)
    assert [tuple(tile.box.lo) + tuple(tile.box.hi) for tile in t.tiles()] == \
        [(0.0, 1.0), (1.0, 2.0)]


def test_bisect_one_bad_tile_of_four():
    t = trivial_tiling(Box([0, 0], [1, 1])).bisect(["0"], max_depth=2)
    assert len(t) == 4
    t2 = t.bisect(["0.0"], max_depth=2)
    assert len(t2) == 7  # 4 - 1 + 4


def test_bisect_depth_budget():
    t = trivial_tiling(Box([0], [1]))
    with pytest.raises(RefinementError) as err:
        t.bisect(["0"], max_depth=0)
    assert err.value.tile_ids == ["0"]


def test_contact_flags_inherited():
    t = trivial_tiling(Box([0, 0], [4, 4])).bisect(["0"], max_depth=3)
    lower_left = t.tile("0.0")
    assert lower_left.lower_contact == (True, True)
    assert lower_left.upper_contact == (False, False)
    upper_right = t.tile("0.3")
    assert upper_right.lower_contact == (False, False)
    assert upper_right.upper_contact == (True, True)
    mixed = t.tile("0.1")  # upper half in dim 1, lower half in dim 2
    assert mixed.lower_contact == (False, True)
    assert mixed.upper_contact == (True, False)


def test_extend_tile_interior_unchanged():
    t = trivial_tiling(Box([0], [4])).bisect(["0"], 3).bisect(["0.0", "0.1"], 3)
    interior = t.tile("0.0.1")  # [1, 2]: touches neither root face
    assert extend_tile(interior, 5.0, LOWER) == interior.box
    assert extend_tile(interior, 5.0, SYM) == interior.box


def test_extend_tile_boundary_lower_only():
    root = Box([18.5, 18.5], [22.0, 22.0])
    t = trivial_tiling(root).bisect(["0"], 2)
    tile = t.tile("0.2")  # lower half in dim 1, upper half in dim 2
    out = extend_tile(tile, 1.0, LOWER)
    assert out == Box([17.5, 20.25], [20.25, 22.0])


def test_extend_tile_zero_is_identity():
    t = trivial_tiling(Box([0, 0], [1, 1])).bisect(["0"], 2)
    for tile in t.tiles():
        assert extend_tile(tile, 0.0, LOWER) == tile.box
        assert extend_tile(tile, 0.0, SYM) == tile.box


def test_extend_tile_symmetric_moves_upper_contacts():
    t = trivial_tiling(Box([0], [2])).bisect(["0"], 2)
    upper = t.tile("0.1")
    assert extend_tile(upper, 0.5, SYM) == Box([1.0], [2.5])
    assert extend_tile(upper, 0.5, LOWER) == upper.box


def test_extend_tile_param_matches_pointwise():
    t = trivial_tiling(Box([0, 0], [2, 2])).bisect(["0"], 2)
    for tile in t.tiles():
        for spec in (LOWER, SYM):
            pbox = extend_tile_param(tile, spec)
            for a in (0.0, 0.3, 2.0):
                assert pbox.at(a) == extend_tile(tile, a, spec)


def test_locate_single_tile():
    t = trivial_tiling(Box([0], [1]))
    assert t.locate([0.5]).tile_id == "0"


def test_locate_shared_face_belongs_upward():
    t = trivial_tiling(Box([0], [2])).bisect(["0"], 1)
    assert t.locate([1.0]).box == Box([1], [2])


def test_locate_root_upper_corner_closed():
    t = trivial_tiling(Box([0, 0], [2, 2])).bisect(["0"], 1)
    tile = t.locate([2.0, 2.0])
    assert tile.box == Box([1, 1], [2, 2])


def test_locate_outside_root_raises():
    t = trivial_tiling(Box([0], [1]))
    with pytest.raises(OutOfDomainError):
        t.locate([1.5])


def test_locate_in_extended_margin():
    t = trivial_tiling(Box([0, 0], [2, 2])).bisect(["0"], 1)
    tile = t.locate([-0.5, 0.2], a=1.0, spec=LOWER)
    assert tile.tile_id == "0.0"
    with pytest.raises(OutOfDomainError):
        t.locate([-1.5, 0.2], a=1.0, spec=LOWER)


def _random_refined(rng, root, depth):
    t = trivial_tiling(root)
    for _ in range(depth):
        tiles = t.tiles()
        chosen = [tile.tile_id for tile in tiles
                  if rng.random() < 0.5 and tile.depth < depth]
        if not chosen:
            break
        t = t.bisect(chosen, depth)
    return t


def test_coverage_and_disjointness_sampled():
    rng = np.random.default_rng(7)
    root = Box([-1.0, 2.0], [3.0, 5.0])
    t = _random_refined(rng, root, 4)
    tiles = t.tiles()
    volume = sum(tile.box.volume() for tile in tiles)
    assert volume == pytest.approx(root.volume(), rel=1e-9)
    for x in root.sample(rng, 10_000):
        owner = t.locate(x)
        hits = [tile for tile in tiles
                if tile.box.contains_point(x)]
        assert owner.tile_id in {tile.tile_id for tile in hits}
        # interiors are disjoint: multiple hits only on shared faces
        if len(hits) > 1:
            assert any(np.any(x == tile.box.lo) or np.any(x == tile.box.hi)
                       for tile in hits)


@pytest.mark.parametrize("spec", [LOWER, SYM])
def test_extension_covers_extended_root(spec):
    rng = np.random.default_rng(11)
    root = Box([18.5, 18.5], [22.0, 22.0])
    t = _random_refined(rng, root, 3)
    a = 1.25
    ext_root = extend_box(root, a, spec)
    volume = sum(extend_tile(tile, a, spec).volume() for tile in t.tiles())
    assert volume == pytest.approx(ext_root.volume(), rel=1e-9)
    for x in ext_root.sample(rng, 10_000):
        tile = t.locate(x, a, spec)
        assert extend_tile(tile, a, spec).contains_point(x)


def test_extension_preserves_tile_count():
    rng = np.random.default_rng(3)
    t = _random_refined(rng, Box([0, 0], [1, 1]), 3)
    # extension never changes the index set, only stretches boundary tiles
    assert len({tile.tile_id for tile in t.tiles()}) == len(t)


def test_uniform_refinement_tile_count():
    t = trivial_tiling(Box([0, 0], [1, 1])).uniform(2)
    assert len(t) == 16
    assert all(tile.depth == 2 for tile in t.tiles())


def test_serialization_round_trip():
    t = trivial_tiling(Box([0, 0], [1, 1])).bisect(["0"], 2).bisect(["0.1"], 2)
    back = Tiling.from_dict(t.to_dict())
    assert back == t
    assert [tile.tile_id for tile in back.tiles()] == \
        [tile.tile_id for tile in t.tiles()]
