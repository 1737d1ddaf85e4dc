"""Floorplans: ASCII IO, validation, procedural generation, traversability."""

import numpy as np
import pytest

from exploresim import world as wo
from exploresim.errors import GenerationError, ParseError, ValidationError

from tests.oracles import any_free_cell, flood_fill_count, plan_from_rows


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="ascii")
    return str(path)


def _file_text(rows, resolution=0.05):
    header = (f"{wo.HEADER_MAGIC} {wo.HEADER_VERSION} resolution={resolution!r} "
              f"width={len(rows[0])} height={len(rows)}")
    return "\n".join([header] + rows) + "\n"


# ---------------------------------------------------------------------------
# load / save
# ---------------------------------------------------------------------------

def test_load_smallest_closed_room(tmp_path):
    rows = ["#####", "#...#", "#...#", "#...#", "#####"]
    plan = wo.load_floorplan(_write(tmp_path, "a.world", _file_text(rows)))
    assert plan.width == 5 and plan.height == 5
    assert int(np.count_nonzero(plan.cells == wo.FREE)) == 9
    assert int(np.count_nonzero(plan.cells == wo.DOOR)) == 0


def test_load_rejects_unknown_character(tmp_path):
    rows = ["#####", "#.X.#", "#...#", "#...#", "#####"]
    with pytest.raises(ParseError):
        wo.load_floorplan(_write(tmp_path, "bad.world", _file_text(rows)))


def test_load_rejects_bad_header_and_ragged_rows(tmp_path):
    with pytest.raises(ParseError):
        wo.load_floorplan(_write(tmp_path, "h.world", "NOT-A-HEADER\n#####\n"))
    ragged = _file_text(["#####", "#...#", "#..#", "#...#", "#####"])
    with pytest.raises(ParseError):
        wo.load_floorplan(_write(tmp_path, "r.world", ragged))


def test_door_joined_rooms_are_connected(tmp_path):
    rows = ["#######",
            "#..#..#",
            "#..D..#",
            "#..#..#",
            "#######"]
    plan = wo.load_floorplan(_write(tmp_path, "door.world", _file_text(rows)))
    # The same layout with the door walled off is disconnected and invalid.
    walled = [r.replace("D", "#") for r in rows]
    with pytest.raises(ValidationError):
        wo.load_floorplan(_write(tmp_path, "wall.world", _file_text(walled)))
    # Flood fill through the door reaches every traversable cell.
    n_trav = int(np.count_nonzero(plan.cells != wo.WALL))
    assert flood_fill_count(plan.cells, any_free_cell(plan.cells)) == n_trav


def test_validation_rejects_open_boundary_and_no_free(tmp_path):
    open_rows = ["#####", "#...#", "#....", "#...#", "#####"]
    with pytest.raises(ValidationError):
        wo.load_floorplan(_write(tmp_path, "open.world", _file_text(open_rows)))
    no_free = ["#####", "#DD##", "#####"]
    with pytest.raises(ValidationError):
        wo.load_floorplan(_write(tmp_path, "nofree.world", _file_text(no_free)))


def test_save_load_round_trip_is_byte_identical(tmp_path, small_house):
    p1 = str(tmp_path / "h1.world")
    p2 = str(tmp_path / "h2.world")
    wo.save_floorplan(small_house, p1)
    again = wo.load_floorplan(p1)
    wo.save_floorplan(again, p2)
    b1 = open(p1, "rb").read()
    b2 = open(p2, "rb").read()
    assert b1 == b2
    assert np.array_equal(again.cells, small_house.cells)
    assert again.resolution == small_house.resolution


# ---------------------------------------------------------------------------
# generate_house
# ---------------------------------------------------------------------------

def test_generate_house_is_deterministic(tmp_path):
    params = wo.GenParams(target_area=60.0)
    a = wo.generate_house(99, params)
    b = wo.generate_house(99, params)
    assert np.array_equal(a.cells, b.cells)
    pa, pb = str(tmp_path / "a.world"), str(tmp_path / "b.world")
    wo.save_floorplan(a, pa)
    wo.save_floorplan(b, pb)
    assert open(pa, "rb").read() == open(pb, "rb").read()


def test_generate_house_area_near_target():
    plan = wo.generate_house(1, wo.GenParams(target_area=100.0))
    assert 80.0 <= wo.traversable_area(plan) <= 120.0


def test_generated_houses_satisfy_invariants():
    for seed in range(6):
        plan = wo.generate_house(40 + seed, wo.GenParams(target_area=80.0))
        wo.validate_floorplan(plan)
        cells = plan.cells
        assert cells[0, :].min() == wo.WALL and cells[-1, :].max() == wo.WALL
        assert cells[:, 0].min() == wo.WALL and cells[:, -1].max() == wo.WALL
        n_trav = int(np.count_nonzero(cells != wo.WALL))
        assert flood_fill_count(cells, any_free_cell(cells)) == n_trav
        # Every room reachable through doors: at least one door exists and
        # removing all doors must disconnect or shrink the reachable set.
        assert np.count_nonzero(cells == wo.DOOR) > 0


def test_generate_house_raises_on_infeasible_params():
    with pytest.raises(GenerationError):
        wo.generate_house(3, wo.GenParams(target_area=20.0, room_count_range=(20, 24)))


# ---------------------------------------------------------------------------
# traversability
# ---------------------------------------------------------------------------

def test_is_traversable_cases():
    plan = plan_from_rows(["#####", "#..D#", "#...#", "#####"])
    matched = wo.WorldMode()
    mismatch = wo.WorldMode(door_mismatch=True)
    res = plan.resolution
    wall_p = (0.5 * res, 0.5 * res)
    free_p = (1.5 * res, 1.5 * res)
    door_p = (3.5 * res, 1.5 * res)
    assert not wo.is_traversable(plan, matched, wall_p)
    assert wo.is_traversable(plan, matched, free_p)
    assert wo.is_traversable(plan, matched, door_p)
    assert wo.is_traversable(plan, mismatch, door_p)  # doors stay walkable
    assert not wo.is_traversable(plan, matched, (-1.0, -1.0))
    assert not wo.is_traversable(plan, matched, (1e9, 1e9))


def test_traversable_area_arithmetic():
    plan = plan_from_rows(["#####", "#...#", "#...#", "#...#", "#####"])
    assert wo.traversable_area(plan) == pytest.approx(9 * 0.05 * 0.05, abs=1e-15)
    assert wo.traversable_area(plan) == pytest.approx(0.0225, abs=1e-15)


def test_traversable_area_counts_doors_and_matches_flood_fill(small_house):
    cells = small_house.cells
    n_free = int(np.count_nonzero(cells == wo.FREE))
    n_door = int(np.count_nonzero(cells == wo.DOOR))
    res2 = small_house.resolution ** 2
    assert wo.traversable_area(small_house) == pytest.approx((n_free + n_door) * res2)
    assert flood_fill_count(cells, any_free_cell(cells)) == n_free + n_door


def test_mean_area_over_20_seeds_tracks_large_target():
    params = wo.GenParams(target_area=328.0, room_count_range=(8, 12),
                          corridor_width=16, door_width=6)
    areas = [wo.traversable_area(wo.generate_house(600 + i, params)) for i in range(20)]
    mean = float(np.mean(areas))
    assert 0.8 * 327.9 <= mean <= 1.2 * 327.9
