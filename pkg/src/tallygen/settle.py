"""Deterministic rest-state solver for spawned instances.

Instances are deposited in ascending spawn height: each one is projected
straight down onto its supports (floor, container interior, or an already
settled object) and then slid downhill in bounded steps while that lowers
it.  Every move is monotonically non-increasing in height, so the total
potential energy never grows and the result is deterministic bit-for-bit.

Collision proxies are convex and two-tier: the scaled mesh vertex set
(its convex hull's extreme points) resolves support contacts exactly,
while object-object contacts use bounding spheres, which keeps pair
resolution analytic and guarantees the render meshes never interpenetrate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import AssetCatalog
from .composer import ContainerSpec, FloorSpec, InstanceState
from .config import GeneratorConfig
from .rng import RngStream
from .transforms import quat_to_matrix


@dataclass
class SettleParams:
    max_steps: int = 300
    substeps: int = 2
    solver_iterations: int = 4
    gravity: float = 9.81
    restitution: float = 0.0
    penetration_tolerance: float = 0.01

    @classmethod
    def from_config(cls, config: GeneratorConfig) -> "SettleParams":
        return cls(
            max_steps=config.settle_max_steps,
            substeps=config.settle_substeps,
            solver_iterations=config.settle_solver_iterations,
            gravity=config.settle_gravity,
            restitution=config.settle_restitution,
            penetration_tolerance=config.settle_penetration_tolerance,
        )


@dataclass
class CollisionProxy:
    """Bounding sphere plus the exact bottom offset of the rotated mesh."""
    instance_id: int
    radius: float        # bounding-sphere radius of the scaled mesh
    bottom: float        # min z of the rotated, scaled mesh (negative)

    @classmethod
    def for_instance(cls, inst: InstanceState, catalog: AssetCatalog) -> "CollisionProxy":
        mesh = catalog.by_id[inst.template_id].mesh
        radius = float(np.linalg.norm(mesh.vertices, axis=1).max()) * inst.scale
        rot = quat_to_matrix(inst.quat)
        bottom = float(((mesh.vertices * inst.scale) @ rot.T)[:, 2].min())
        return cls(inst.instance_id, radius, bottom)


def _support_height(x: float, y: float, container: ContainerSpec | None) -> float:
    """Height of the static support under (x, y): container base, wall top,
    or the floor plane at z = 0."""
    if container is None:
        return 0.0
    rx, ry = container.inner_rx, container.inner_ry
    q_in = (x / rx) ** 2 + (y / ry) ** 2
    if q_in <= 1.0:
        return container.base_thickness
    q_out = (x / container.outer_rx) ** 2 + (y / container.outer_ry) ** 2
    if q_out <= 1.0:
        return container.top_z
    return 0.0


def _rest_height(x: float, y: float, proxy: CollisionProxy,
                 container: ContainerSpec | None,
                 placed_pos: np.ndarray, placed_r: np.ndarray) -> tuple[float, int]:
    """Lowest non-penetrating z for the proxy dropped at (x, y).

    Returns (z, index of the supporting placed proxy, or -1 for the base).
    """
    z = _support_height(x, y, container) - proxy.bottom
    support = -1
    if len(placed_pos):
        dx = placed_pos[:, 0] - x
        dy = placed_pos[:, 1] - y
        rsum = placed_r + proxy.radius
        d2 = dx * dx + dy * dy
        near = d2 < rsum * rsum
        if near.any():
            dz = np.sqrt(rsum[near] ** 2 - d2[near])
            cand = placed_pos[near, 2] + dz
            k = int(np.argmax(cand))
            if cand[k] > z:
                z = float(cand[k])
                support = int(np.flatnonzero(near)[k])
    return z, support


def settle(instances: list[InstanceState], floor: FloorSpec,
           container: ContainerSpec | None, params: SettleParams,
           stream: RngStream, catalog: AssetCatalog,
           spawn_margin: float = 0.0,
           trace: list | None = None) -> list[InstanceState]:
    """Bring instances to rest; returns the same list with updated positions.

    The slide budget per instance is substeps * solver_iterations; the
    stream argument is accepted for interface stability but the relaxation
    itself is fully deterministic.
    """
    if not instances:
        return instances
    proxies = {i.instance_id: CollisionProxy.for_instance(i, catalog) for i in instances}
    order = sorted(range(len(instances)),
                   key=lambda k: (instances[k].position[2], instances[k].instance_id))
    placed_pos = np.zeros((len(instances), 3))
    placed_r = np.zeros(len(instances))
    n_placed = 0
    slide_budget = max(1, params.substeps * params.solver_iterations)

    if container is not None:
        clamp_a = max(container.outer_rx - spawn_margin, 0.05)
        clamp_b = max(container.outer_ry - spawn_margin, 0.05)

    def clamp_xy(x: float, y: float, radius: float) -> tuple[float, float]:
        if container is not None:
            q = (x / clamp_a) ** 2 + (y / clamp_b) ** 2
            if q > 1.0:
                f = 1.0 / math.sqrt(q)
                x, y = x * f, y * f
        else:
            lim = max(floor.half_extent - radius, 0.05)
            x = min(max(x, -lim), lim)
            y = min(max(y, -lim), lim)
        return x, y

    # Potential-energy proxy: sum of heights, unplaced instances at spawn.
    pe = float(sum(i.position[2] for i in instances))

    for k in order:
        inst = instances[k]
        proxy = proxies[inst.instance_id]
        x, y = clamp_xy(float(inst.position[0]), float(inst.position[1]), proxy.radius)
        pos_view = placed_pos[:n_placed]
        r_view = placed_r[:n_placed]
        z, support = _rest_height(x, y, proxy, container, pos_view, r_view)
        pe += z - float(inst.position[2])
        if trace is not None:
            trace.append(pe)

        for _ in range(slide_budget):
            if support < 0:
                break  # resting on floor/container: stable
            sx = x - pos_view[support, 0]
            sy = y - pos_view[support, 1]
            norm = math.hypot(sx, sy)
            if norm < 1e-9:
                break  # exactly on top: no downhill direction
            step = 0.3 * proxy.radius
            nx, ny = clamp_xy(x + sx / norm * step, y + sy / norm * step, proxy.radius)
            nz, nsupport = _rest_height(nx, ny, proxy, container, pos_view, r_view)
            if nz < z - 1e-9:
                pe -= z - nz
                x, y, z, support = nx, ny, nz, nsupport
                if trace is not None:
                    trace.append(pe)
            else:
                break

        if not math.isfinite(z):
            inst.alive = False
            continue
        inst.position = np.array([x, y, z])
        placed_pos[n_placed] = (x, y, z)
        placed_r[n_placed] = proxy.radius
        n_placed += 1

    return instances


@dataclass
class PenetrationReport:
    pairs: list[tuple[int, int, float]] = field(default_factory=list)  # (id_a, id_b, depth)

    @property
    def clean(self) -> bool:
        return not self.pairs


def check_interpenetration(instances: list[InstanceState], tol: float,
                           catalog: AssetCatalog) -> PenetrationReport:
    """O(n^2) bounding-sphere overlap check over alive instances."""
    alive = [i for i in instances if i.alive]
    report = PenetrationReport()
    proxies = [CollisionProxy.for_instance(i, catalog) for i in alive]
    for a in range(len(alive)):
        for b in range(a + 1, len(alive)):
            dist = float(np.linalg.norm(alive[a].position - alive[b].position))
            depth = proxies[a].radius + proxies[b].radius - dist
            if depth > tol:
                report.pairs.append((alive[a].instance_id, alive[b].instance_id, depth))
    return report


def support_distances(instances: list[InstanceState], container: ContainerSpec | None,
                      catalog: AssetCatalog) -> dict[int, float]:
    """Distance from each alive instance to its nearest support (floor,
    container, or another instance); used to validate the settle contract."""
    alive = [i for i in instances if i.alive]
    proxies = [CollisionProxy.for_instance(i, catalog) for i in alive]
    out: dict[int, float] = {}
    for idx, inst in enumerate(alive):
        x, y, z = (float(v) for v in inst.position)
        base = _support_height(x, y, container)
        gap = (z + proxies[idx].bottom) - base
        for jdx, other in enumerate(alive):
            if jdx == idx:
                continue
            dist = float(np.linalg.norm(inst.position - other.position))
            gap = min(gap, dist - (proxies[idx].radius + proxies[jdx].radius))
        out[inst.instance_id] = gap
    return out
