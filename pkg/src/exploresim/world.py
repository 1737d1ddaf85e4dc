"""Ground-truth worlds: grid floorplans, procedural houses, door semantics, file IO.

Coordinate conventions used throughout the package:

* World coordinates are continuous (x, y) in meters, y pointing up.
* Cell (cx, cy) covers the half-open square [cx*res, (cx+1)*res) x [cy*res, (cy+1)*res).
* ``Floorplan.cells`` is indexed ``cells[cy, cx]`` (row = y). Row 0 of the *file*
  is the top of the world, i.e. file row r maps to cy = height - 1 - r.
"""
from __future__ import annotations

import dataclasses
import math
import os
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .errors import GenerationError, ParseError, ValidationError

# Cell kinds.
FREE = 0
WALL = 1
DOOR = 2

_CHAR_TO_CELL = {".": FREE, "#": WALL, "D": DOOR}
_CELL_TO_CHAR = {FREE: ".", WALL: "#", DOOR: "D"}

HEADER_MAGIC = "EXPLORE-WORLD"
HEADER_VERSION = "v1"

DEFAULT_RESOLUTION = 0.05

_4CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)


@dataclasses.dataclass
class WorldMode:
    """World-level semantics toggle.

    With ``door_mismatch=False`` doors behave exactly like free space for both
    sensing and collision. With ``door_mismatch=True`` doors are opaque to the
    depth sensor but remain traversable: geometry and affordance disagree.
    """

    door_mismatch: bool = False


@dataclasses.dataclass
class Floorplan:
    """Immutable ground-truth occupancy of one world.

    Treat instances as read-only after construction; the cell array is marked
    non-writeable and derived masks are cached.
    """

    width: int
    height: int
    resolution: float
    cells: np.ndarray  # uint8 (height, width), indexed [cy, cx]
    name: str = "world"

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        self.cells.flags.writeable = False
        self._opaque_plain = None
        self._opaque_mismatch = None

    def opaque_mask(self, mode: WorldMode) -> np.ndarray:
        """uint8 mask of cells that block the depth sensor under `mode`."""
        if mode.door_mismatch:
            if self._opaque_mismatch is None:
                self._opaque_mismatch = ((self.cells == WALL) | (self.cells == DOOR)).astype(np.uint8)
            return self._opaque_mismatch
        if self._opaque_plain is None:
            self._opaque_plain = (self.cells == WALL).astype(np.uint8)
        return self._opaque_plain

    def traversable_mask(self) -> np.ndarray:
        return self.cells != WALL

    def cell_at(self, x: float, y: float) -> Optional[int]:
        """Cell kind containing world point (x, y), or None when out of bounds."""
        cx = math.floor(x / self.resolution)
        cy = math.floor(y / self.resolution)
        if cx < 0 or cx >= self.width or cy < 0 or cy >= self.height:
            return None
        return int(self.cells[cy, cx])


def validate_floorplan(plan: Floorplan) -> None:
    """Raise ValidationError unless `plan` satisfies all structural invariants."""
    if plan.width <= 0 or plan.height <= 0:
        raise ValidationError("floorplan dimensions must be positive")
    if plan.resolution <= 0:
        raise ValidationError("resolution must be positive")
    if plan.cells.shape != (plan.height, plan.width):
        raise ValidationError("cell grid shape does not match header dimensions")
    border = np.concatenate([plan.cells[0, :], plan.cells[-1, :], plan.cells[:, 0], plan.cells[:, -1]])
    if not np.all(border == WALL):
        raise ValidationError("world boundary must be closed (all wall)")
    if not np.any(plan.cells == FREE):
        raise ValidationError("floorplan has no free cell")
    trav = plan.traversable_mask()
    _, n_components = ndimage.label(trav, structure=_4CONN)
    if n_components != 1:
        raise ValidationError(f"traversable space has {n_components} components, expected 1")


def load_floorplan(path: str) -> Floorplan:
    """Parse an ASCII floorplan file.

    Format: header line ``EXPLORE-WORLD v1 resolution=<float> width=<int> height=<int>``
    followed by `height` rows of `width` characters from {#, ., D}. The first
    data row is the top of the world.
    """
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise ParseError(f"{path}: missing header line")
    header = lines[0].split(" ")
    if len(header) != 5 or header[0] != HEADER_MAGIC or header[1] != HEADER_VERSION:
        raise ParseError(f"{path}: bad header {lines[0]!r}")
    fields = {}
    for tok in header[2:]:
        if "=" not in tok:
            raise ParseError(f"{path}: bad header token {tok!r}")
        key, val = tok.split("=", 1)
        fields[key] = val
    try:
        resolution = float(fields["resolution"])
        width = int(fields["width"])
        height = int(fields["height"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad header fields ({exc})") from exc
    rows = lines[1:]
    # Allow exactly one trailing newline at EOF (split artifact).
    while rows and rows[-1] == "":
        rows.pop()
    if len(rows) != height:
        raise ParseError(f"{path}: expected {height} rows, found {len(rows)}")
    cells = np.zeros((height, width), dtype=np.uint8)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: row {r} has length {len(row)}, expected {width}")
        for c, ch in enumerate(row):
            if ch not in _CHAR_TO_CELL:
                raise ParseError(f"{path}: illegal character {ch!r} at row {r} col {c}")
            cells[height - 1 - r, c] = _CHAR_TO_CELL[ch]
    name = os.path.splitext(os.path.basename(path))[0]
    plan = Floorplan(width=width, height=height, resolution=resolution, cells=cells, name=name)
    validate_floorplan(plan)
    return plan


def save_floorplan(plan: Floorplan, path: str) -> None:
    """Write `plan` in the ASCII format. Canonical output: save(load(f)) == f."""
    out = [f"{HEADER_MAGIC} {HEADER_VERSION} resolution={plan.resolution!r} width={plan.width} height={plan.height}"]
    for r in range(plan.height):
        row = plan.cells[plan.height - 1 - r, :]
        out.append("".join(_CELL_TO_CHAR[int(v)] for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(out))
        fh.write("\n")


def is_traversable(plan: Floorplan, mode: WorldMode, p: Tuple[float, float]) -> bool:
    """True iff the cell containing `p` is Free or Door.

    Doors are always traversable regardless of `mode.door_mismatch` (the
    mismatch is purely a sensing effect). Out-of-bounds points are not
    traversable.
    """
    kind = plan.cell_at(p[0], p[1])
    return kind is not None and kind != WALL


def traversable_area(plan: Floorplan) -> float:
    """Total traversable (Free + Door) area in square meters."""
    n = int(np.count_nonzero(plan.cells != WALL))
    return n * plan.resolution * plan.resolution


# ---------------------------------------------------------------------------
# Procedural houses
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class GenParams:
    """Knobs for `generate_house`. Widths are in cells."""

    target_area: float = 100.0       # m^2 of traversable space, +/-20%
    room_count_range: Tuple[int, int] = (4, 8)
    corridor_width: int = 14
    door_width: int = 6


_MAX_ATTEMPTS = 64
# Rooms per corridor band; beyond this a new band (corridor level) is opened.
_BAND_CAPACITY = 10


def _sample_rooms(rng: np.random.Generator, params: GenParams, res: float):
    """Sample room rectangles (w, d in cells) whose total area tracks target_area."""
    lo, hi = params.room_count_range
    if lo < 1 or hi < lo:
        raise GenerationError(f"bad room_count_range {params.room_count_range}")
    n_rooms = int(rng.integers(lo, hi + 1))
    corridor_frac = rng.uniform(0.05, 0.10)
    room_budget = params.target_area * (1.0 - corridor_frac)
    mean_room = room_budget / n_rooms
    dim_cap = max(12.0, 1.8 * math.sqrt(mean_room))
    rooms = []
    for _ in range(n_rooms):
        w_m = math.sqrt(mean_room) * math.exp(rng.normal(0.0, 0.22))
        w_m = min(max(w_m, 1.6), dim_cap)
        d_m = min(max(mean_room / w_m, 1.6), dim_cap)
        rooms.append((max(8, round(w_m / res)), max(8, round(d_m / res))))
    # One corrective scale pass so the sampled total lands near the budget.
    total = sum(w * d for w, d in rooms) * res * res
    s = math.sqrt(room_budget / total)
    rooms = [(max(8, round(w * s)), max(8, round(d * s))) for w, d in rooms]
    return rooms


def _try_build(rng: np.random.Generator, params: GenParams, res: float) -> Optional[Floorplan]:
    cw = params.corridor_width
    dw = params.door_width
    rooms = _sample_rooms(rng, params, res)

    # Distribute rooms over corridor bands, alternating top/bottom.
    n_bands = max(1, math.ceil(len(rooms) / _BAND_CAPACITY))
    bands = [{"top": [], "bot": []} for _ in range(n_bands)]
    for i, room in enumerate(rooms):
        band = bands[(i // 2) % n_bands]
        side = "top" if i % 2 == 0 else "bot"
        band[side].append(room)

    multi = n_bands > 1
    # Reserve a left vertical corridor connecting the bands when there are several.
    x_room0 = 1 + (cw + 1 if multi else 0)

    def side_len(side):
        if not side:
            return 0
        return sum(w for w, _ in side) + (len(side) - 1)  # 1-cell walls between rooms

    band_len = [max(side_len(b["top"]), side_len(b["bot"]), 4 * cw) for b in bands]
    width = x_room0 + max(band_len) + 1
    heights = []
    for b in bands:
        d_top = max([d for _, d in b["top"]], default=0)
        d_bot = max([d for _, d in b["bot"]], default=0)
        heights.append((d_bot, d_top))
    height = 1 + sum(db + (1 if db else 0) + cw + (1 if dt else 0) + dt for db, dt in heights) + (n_bands - 1) + 1

    if width > 4000 or height > 4000:
        return None

    cells = np.full((height, width), WALL, dtype=np.uint8)

    corridor_y = []  # (y0, y1) per band, bottom to top
    y = 1
    for bi, b in enumerate(bands):
        d_bot, d_top = heights[bi]
        y_bot = y
        y = y + d_bot + (1 if d_bot else 0)
        cy0, cy1 = y, y + cw
        corridor_y.append((cy0, cy1))
        cells[cy0:cy1, x_room0:width - 1] = FREE
        y = cy1 + (1 if d_top else 0) + d_top
        y += 1  # wall row between bands

        # Carve the rooms of this band and punch a door through the corridor wall.
        for side, rooms_side in (("bot", b["bot"]), ("top", b["top"])):
            x = x_room0
            for (w, d) in rooms_side:
                if side == "bot":
                    ry0, ry1 = cy0 - 1 - d, cy0 - 1
                    door_y = cy0 - 1
                else:
                    ry0, ry1 = cy1 + 1, cy1 + 1 + d
                    door_y = cy1
                cells[ry0:ry1, x:x + w] = FREE
                dw_eff = min(dw, w - 2)
                off = int(rng.integers(1, w - dw_eff)) if w - dw_eff > 1 else 1
                cells[door_y, x + off:x + off + dw_eff] = DOOR
                x += w + 1

    if multi:
        # Vertical corridor joining every band's corridor on the left.
        v_x0, v_x1 = 1, 1 + cw
        y_lo = corridor_y[0][0]
        y_hi = corridor_y[-1][1]
        cells[y_lo:y_hi, v_x0:v_x1] = FREE
        # Open the junction between the vertical corridor and each band corridor.
        for cy0, cy1 in corridor_y:
            cells[cy0:cy1, v_x1:x_room0] = FREE

    plan = Floorplan(width=width, height=height, resolution=res, cells=cells)
    area = traversable_area(plan)
    if abs(area - params.target_area) > 0.15 * params.target_area:
        return None
    try:
        validate_floorplan(plan)
    except ValidationError:
        return None
    return plan


def generate_house(seed: int, params: GenParams) -> Floorplan:
    """Deterministically generate a closed multi-room house.

    Rooms open onto corridors through Door-cell segments only, so every room is
    reachable and the world is door-gated by construction. Traversable area is
    within +/-20% of ``params.target_area`` (the builder aims for +/-15%).
    """
    if not (20.0 <= params.target_area <= 2000.0):
        raise GenerationError(f"target_area {params.target_area} outside supported range [20, 2000]")
    if params.corridor_width < 4 or params.door_width < 3:
        raise GenerationError("corridor_width must be >= 4 and door_width >= 3 cells")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for _ in range(_MAX_ATTEMPTS):
        plan = _try_build(rng, params, DEFAULT_RESOLUTION)
        if plan is not None:
            plan.name = f"house-{seed}"
            return plan
    raise GenerationError(f"could not satisfy constraints for seed={seed} params={params}")
