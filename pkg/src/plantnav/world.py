"""Simulation space: grid dimensions, box obstacles, wind field, target sampling.

Coordinates are integer cells (one cell is one km). Obstacles are closed
axis-aligned boxes, so a cell on a box face counts as a collision. Anything
outside the space is treated as occupied when measuring clearance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from plantnav.errors import InsideObstacleError, OutOfBoundsError, WorldError


class Vec3(NamedTuple):
    x: int
    y: int
    z: int

    def __add__(self, other):  # type: ignore[override]
        return Vec3(self.x + other[0], self.y + other[1], self.z + other[2])

    def __sub__(self, other):
        return Vec3(self.x - other[0], self.y - other[1], self.z - other[2])


def euclidean(a: Sequence[float], b: Sequence[float]) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def manhattan(a: Sequence[int], b: Sequence[int]) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) + abs(a[2] - b[2])


@dataclass(frozen=True)
class BoxObstacle:
    center: Vec3
    size: Vec3
    color: str = "gray"

    def __post_init__(self):
        object.__setattr__(self, "center", Vec3(*(int(v) for v in self.center)))
        object.__setattr__(self, "size", Vec3(*(int(v) for v in self.size)))
        if min(self.size) < 1:
            raise WorldError(f"obstacle size components must be >= 1, got {tuple(self.size)}")

    @cached_property
    def lo(self) -> Vec3:
        """Smallest integer cell covered on each axis (ceil of center - size/2)."""
        return Vec3(*((2 * c - s + 1) // 2 for c, s in zip(self.center, self.size)))

    @cached_property
    def hi(self) -> Vec3:
        """Largest integer cell covered on each axis (floor of center + size/2)."""
        return Vec3(*((2 * c + s) // 2 for c, s in zip(self.center, self.size)))

    def contains(self, p: Sequence[int]) -> bool:
        lo, hi = self.lo, self.hi
        return all(lo[i] <= p[i] <= hi[i] for i in range(3))

    def chebyshev_distance(self, p: Sequence[int]) -> int:
        """Chebyshev distance from ``p`` to the nearest cell of the box (0 inside)."""
        lo, hi = self.lo, self.hi
        return max(max(lo[i] - p[i], p[i] - hi[i], 0) for i in range(3))


@dataclass(frozen=True)
class WindParams:
    base_speed: float = 30.0
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    height_gain: float = 0.5
    drift_reference_speed: float = 120.0

    def __post_init__(self):
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))
        if self.base_speed < 0:
            raise WorldError("wind base_speed must be >= 0")
        if self.height_gain < 0:
            raise WorldError("wind height_gain must be >= 0")
        if self.drift_reference_speed <= 0:
            raise WorldError("wind drift_reference_speed must be > 0")
        dx, dy, dz = self.direction
        if dz != 0.0:
            raise WorldError("wind direction must be horizontal (z component 0)")
        if abs(math.hypot(dx, dy) - 1.0) > 1e-9:
            raise WorldError("wind direction must have unit length")

    @property
    def drift_cell(self) -> tuple[int, int]:
        """Horizontal grid step a drift event applies (direction rounded per axis)."""
        return int(round(self.direction[0])), int(round(self.direction[1]))

    def calm(self) -> "WindParams":
        return WindParams(0.0, self.direction, 0.0, self.drift_reference_speed)


@dataclass(frozen=True)
class World:
    dims: Vec3 = Vec3(100, 100, 22)
    obstacles: tuple[BoxObstacle, ...] = ()
    wind: WindParams = field(default_factory=WindParams)
    target_clearance: int = 3

    def __post_init__(self):
        object.__setattr__(self, "dims", Vec3(*(int(v) for v in self.dims)))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if min(self.dims) < 1:
            raise WorldError(f"dims must be strictly positive, got {tuple(self.dims)}")
        if self.target_clearance < 1:
            raise WorldError("target_clearance must be >= 1")
        for i, box in enumerate(self.obstacles):
            for c in range(3):
                twice_lo = 2 * box.center[c] - box.size[c]
                twice_hi = 2 * box.center[c] + box.size[c]
                # cell i spans [i - 1/2, i + 1/2], so the space is [-1/2, dims - 1/2]
                if twice_lo < -1 or twice_hi > 2 * self.dims[c] - 1:
                    raise WorldError(f"obstacle {i} extends outside the space")
        if not (self.clearance_grid >= self.target_clearance).any():
            raise WorldError(
                f"no free cell has clearance >= target_clearance={self.target_clearance}"
            )

    def without_wind(self) -> "World":
        return self._calm

    @cached_property
    def _calm(self) -> "World":
        if self.wind.base_speed == 0 and self.wind.height_gain == 0:
            return self
        return World(self.dims, self.obstacles, self.wind.calm(), self.target_clearance)

    @cached_property
    def clearance_grid(self) -> np.ndarray:
        """Clearance of every cell as an int array of shape ``dims``; 0 marks obstacle cells."""
        axes = [np.arange(n) for n in self.dims]
        # distance to the out-of-bounds shell on each axis
        per_axis = [np.minimum(a + 1, n - a) for a, n in zip(axes, self.dims)]
        grid = np.minimum.outer(np.minimum.outer(per_axis[0], per_axis[1]), per_axis[2])
        for box in self.obstacles:
            gaps = [
                np.maximum(np.maximum(lo - a, a - hi), 0)
                for a, lo, hi in zip(axes, box.lo, box.hi)
            ]
            dist = np.maximum.outer(np.maximum.outer(gaps[0], gaps[1]), gaps[2])
            grid = np.minimum(grid, dist)
        grid.setflags(write=False)
        return grid

    @cached_property
    def _candidate_cache(self) -> dict:
        return {}


def in_bounds(world: World, p: Sequence[int]) -> bool:
    d = world.dims
    return 0 <= p[0] < d[0] and 0 <= p[1] < d[1] and 0 <= p[2] < d[2]


def collides(world: World, p: Sequence[int]) -> bool:
    if not in_bounds(world, p):
        raise OutOfBoundsError(f"point {tuple(p)} is outside dims {tuple(world.dims)}")
    return any(box.contains(p) for box in world.obstacles)


def wind_at(world: World, p: Sequence[int]) -> tuple[float, float, float]:
    w = world.wind
    speed = w.base_speed + w.height_gain * p[2]
    return (w.direction[0] * speed, w.direction[1] * speed, w.direction[2] * speed)


def wind_speed_at(world: World, p: Sequence[int]) -> float:
    return world.wind.base_speed + world.wind.height_gain * p[2]


def obstacle_clearance(world: World, p: Sequence[int]) -> int:
    """Chebyshev distance from ``p`` to the nearest obstacle or out-of-bounds cell.

    Raises:
        OutOfBoundsError: ``p`` is outside the space.
        InsideObstacleError: ``p`` lies inside or on an obstacle.
    """
    if collides(world, p):
        raise InsideObstacleError(f"point {tuple(p)} is inside an obstacle")
    best = min(min(p[i] + 1, world.dims[i] - p[i]) for i in range(3))
    for box in world.obstacles:
        best = min(best, box.chebyshev_distance(p))
    return best


def candidate_cells(
    world: World,
    near: Sequence[int] | None = None,
    max_distance: int | None = None,
) -> np.ndarray:
    """Flat indices of cells eligible as targets, sorted ascending.

    Eligible cells have clearance >= ``world.target_clearance``. When ``near``
    is given the cell ``near`` itself is excluded and, if ``max_distance`` is
    set, only cells within that Manhattan distance of ``near`` are kept.
    """
    key = (None if near is None else tuple(near), max_distance)
    cache = world._candidate_cache
    if key not in cache:
        mask = world.clearance_grid >= world.target_clearance
        if near is not None:
            gx, gy, gz = np.indices(world.dims, sparse=True)
            dist = np.abs(gx - near[0]) + np.abs(gy - near[1]) + np.abs(gz - near[2])
            mask = mask & (dist > 0)
            if max_distance is not None:
                mask = mask & (dist <= max_distance)
        cells = np.flatnonzero(mask)
        cells.setflags(write=False)
        cache[key] = cells
    return cache[key]


def sample_target(
    world: World,
    rng: np.random.Generator,
    near: Sequence[int] | None = None,
    max_distance: int | None = None,
) -> Vec3:
    """Uniformly sample a target cell with clearance >= ``world.target_clearance``.

    Raises:
        WorldError: no cell satisfies the constraints.
    """
    cells = candidate_cells(world, near, max_distance)
    if cells.size == 0:
        raise WorldError(
            f"no target cell with clearance >= {world.target_clearance}"
            + (f" within distance {max_distance} of {tuple(near)}" if near is not None else "")
        )
    flat = int(cells[rng.integers(cells.size)])
    return Vec3(*(int(v) for v in np.unravel_index(flat, world.dims)))


def sample_free_cell(world: World, rng: np.random.Generator) -> Vec3:
    free = np.flatnonzero(world.clearance_grid >= 1)
    flat = int(free[rng.integers(free.size)])
    return Vec3(*(int(v) for v in np.unravel_index(flat, world.dims)))


# --- serialization ---------------------------------------------------------

def _xyz(v) -> dict:
    return {"x": v[0], "y": v[1], "z": v[2]}


def _from_xyz(d, name: str, cast=int) -> tuple:
    if not isinstance(d, dict) or set(d) != {"x", "y", "z"}:
        raise WorldError(f"{name} must be an object with exactly keys x, y, z")
    try:
        return tuple(cast(d[k]) for k in ("x", "y", "z"))
    except (TypeError, ValueError) as exc:
        raise WorldError(f"{name}: {exc}") from None


def world_to_dict(world: World) -> dict:
    return {
        "dims": _xyz(world.dims),
        "obstacles": [
            {"center": _xyz(b.center), "size": _xyz(b.size), "color": b.color}
            for b in world.obstacles
        ],
        "wind": {
            "base_speed": float(world.wind.base_speed),
            "direction": _xyz(world.wind.direction),
            "height_gain": float(world.wind.height_gain),
            "drift_reference_speed": float(world.wind.drift_reference_speed),
        },
        "target_clearance": world.target_clearance,
    }


def world_from_dict(d: dict) -> World:
    expected = {"dims", "obstacles", "wind", "target_clearance"}
    if not isinstance(d, dict) or set(d) != expected:
        raise WorldError(f"world document must have exactly keys {sorted(expected)}")
    obstacles = []
    for i, o in enumerate(d["obstacles"]):
        if not isinstance(o, dict) or set(o) != {"center", "size", "color"}:
            raise WorldError(f"obstacle {i} must have exactly keys center, size, color")
        obstacles.append(
            BoxObstacle(
                Vec3(*_from_xyz(o["center"], f"obstacle {i} center")),
                Vec3(*_from_xyz(o["size"], f"obstacle {i} size")),
                str(o["color"]),
            )
        )
    w = d["wind"]
    wind_keys = {"base_speed", "direction", "height_gain", "drift_reference_speed"}
    if not isinstance(w, dict) or set(w) != wind_keys:
        raise WorldError(f"wind must have exactly keys {sorted(wind_keys)}")
    wind = WindParams(
        float(w["base_speed"]),
        _from_xyz(w["direction"], "wind direction", float),
        float(w["height_gain"]),
        float(w["drift_reference_speed"]),
    )
    return World(
        Vec3(*_from_xyz(d["dims"], "dims")), tuple(obstacles), wind, int(d["target_clearance"])
    )


def dumps_world(world: World) -> str:
    return json.dumps(world_to_dict(world), indent=2) + "\n"


def save_world(world: World, path: str | Path) -> None:
    Path(path).write_text(dumps_world(world))


def load_world(path: str | Path) -> World:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise WorldError(f"cannot read world file {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorldError(f"world file {path} is not valid JSON: {exc}") from None
    return world_from_dict(doc)


def default_world() -> World:
    """The bundled 100 x 100 x 22 plant: three buildings of differing heights, 30 km/h wind."""
    return World(
        dims=Vec3(100, 100, 22),
        obstacles=(
            BoxObstacle(Vec3(30, 30, 5), Vec3(12, 12, 10), "gray"),
            BoxObstacle(Vec3(62, 58, 7), Vec3(14, 10, 14), "red"),
            BoxObstacle(Vec3(72, 24, 9), Vec3(8, 8, 18), "blue"),
        ),
        wind=WindParams(30.0, (1.0, 0.0, 0.0), 0.5, 120.0),
        target_clearance=3,
    )
