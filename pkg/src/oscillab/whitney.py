"""Whitney covers of map images and the covering-sum statistic.

The image of a ball under a measure-preserving bi-Lipschitz map is an open
set; a dyadic stopping-time subdivision of the window produces disjoint
cubes whose size is comparable to their distance to the complement. Each
accepted cube contributes its (slightly shrunken) inscribed ball, so the
balls are strictly disjoint while the doubled balls still cover every cell
of the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import (
    Ball,
    DistanceField,
    Grid,
    PixelMask,
    cells_in_ball,
    distance_transform,
    unit_ball_volume,
)
from .errors import DegenerateMask, OutOfDomain, RadiusViolation
from .maps import BiLipMap
from .oscillation import rho

# inscribed balls are shrunk by this factor so adjacent cubes' balls
# cannot touch; doubled balls still cover the cube diagonal (0.995 > 1/sqrt2)
_BALL_SHRINK = 0.995


def image_mask(phi: BiLipMap, ball: Ball, grid: Grid) -> PixelMask:
    """Rasterize phi(B): a cell is inside iff its preimage lies in B.

    Membership through the inverse map leaves no rasterization holes, which
    forward point-dumping would.
    """
    centers = grid.cell_centers()
    pre = phi.inverse(centers)
    if not grid.box.periodic:
        # the preimage samples themselves are fine; what must stay inside the
        # window is the set we rasterize, which is a subset of the grid by
        # construction. Guard instead that the ball image could fit at all.
        fwd_center = phi.forward(np.asarray(ball.center))
        if not grid.box.contains(fwd_center[None, :])[0]:
            raise OutOfDomain("mapped ball center leaves the window")
    disp = grid.box.wrap_displacement(pre - np.asarray(ball.center))
    bits = np.einsum("ij,ij->i", disp, disp) <= ball.radius**2
    return PixelMask(grid, bits)


@dataclass(frozen=True)
class WhitneyCover:
    """Disjoint balls inside an open set whose doubles cover it.

    ``whitney_ratios`` certifies comparability of ball size and boundary
    distance: diameter of the ball over the distance from its center to the
    complement, one entry per ball.
    """

    balls: list
    source_ball: Ball
    map_name: str
    whitney_ratios: list
    uncovered_fraction: float

    @property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])

    @property
    def total_ball_area(self) -> float:
        return float(sum(b.volume for b in self.balls))


def _subdivide(bits2d, dist2d, grid, i0, j0, m, out):
    """Recursive stopping-time scan; appends (i0, j0, m) accepted cubes."""
    h = grid.h
    block = bits2d[i0 : i0 + m, j0 : j0 + m]
    if not block.any():
        return
    if block.all():
        if m == 1:
            out.append((i0, j0, m))
            return
        diam = m * h * math.sqrt(2.0)
        dq = dist2d[i0 : i0 + m, j0 : j0 + m].min() - h * math.sqrt(2.0)
        if dq >= diam:
            out.append((i0, j0, m))
            return
    if m == 1:
        return
    half = m // 2
    for di in (0, half):
        for dj in (0, half):
            _subdivide(bits2d, dist2d, grid, i0 + di, j0 + dj, half, out)


def whitney_decompose(
    mask: PixelMask,
    source_ball: Ball | None = None,
    map_name: str = "",
    dist: DistanceField | None = None,
) -> WhitneyCover:
    """Dyadic Whitney cover of a 2-D pixel mask.

    Top-down quadtree: a cube is accepted when it sits inside the set and
    its (conservatively measured) distance to the complement is at least its
    diameter; single in-set cells are accepted unconditionally, so every set
    cell belongs to some cube and the doubled inscribed balls cover the set
    exactly.
    """
    grid = mask.grid
    if grid.d != 2:
        raise ValueError("whitney covers are implemented for d = 2")
    if mask.count == 0:
        raise DegenerateMask("empty mask")
    if dist is None:
        dist = distance_transform(mask)
    bits2d = mask.bits.reshape(grid.n, grid.n)
    dist2d = dist.dist.reshape(grid.n, grid.n)
    cubes: list = []
    _subdivide(bits2d, dist2d, grid, 0, 0, grid.n, cubes)
    cubes.sort()

    h = grid.h
    low = np.asarray(grid.box.lower)
    balls, ratios = [], []
    for i0, j0, m in cubes:
        s = m * h
        center = (low[0] + (i0 + m / 2.0) * h, low[1] + (j0 + m / 2.0) * h)
        r = _BALL_SHRINK * s / 2.0
        d_center = dist.at_point(np.asarray(center))
        balls.append(Ball(center, r))
        ratios.append(2.0 * r / d_center)

    covered = np.zeros(grid.size, dtype=bool)
    for ball in balls:
        covered[cells_in_ball(grid, Ball(ball.center, 2.0 * ball.radius))] = True
    uncovered = float((mask.bits & ~covered).sum()) / mask.count

    if source_ball is None:
        # synthetic source ball with the same area as the mask
        r_eq = (mask.area / unit_ball_volume(2)) ** 0.5
        source_ball = Ball(tuple(grid.box.center), r_eq)
    return WhitneyCover(balls, source_ball, map_name, ratios, uncovered)


def check_cover_invariants(cover: WhitneyCover, mask: PixelMask) -> dict:
    """Literal checks of the cover invariants; returns the measured slacks.

    Keys: min_gap (smallest center distance minus radius sum, positive for
    disjointness), uncovered_fraction, ratio_min/ratio_max, max_radius,
    containment_violations (ball cells outside the mask).
    """
    balls = cover.balls
    centers = np.array([b.center for b in balls])
    radii = cover.radii
    min_gap = math.inf
    if len(balls) > 1:
        # neighbor scan via sorted cells is overkill at these sizes
        for i in range(len(balls)):
            d = np.linalg.norm(centers[i + 1 :] - centers[i], axis=1)
            gap = d - (radii[i + 1 :] + radii[i])
            if len(gap):
                min_gap = min(min_gap, float(gap.min()))
    grid = mask.grid
    contain_bad = 0
    for ball in balls:
        inside = cells_in_ball(grid, ball)
        contain_bad += int((~mask.bits[inside]).sum())
    return {
        "min_gap": min_gap,
        "uncovered_fraction": cover.uncovered_fraction,
        "ratio_min": float(min(cover.whitney_ratios)),
        "ratio_max": float(max(cover.whitney_ratios)),
        "max_radius": float(radii.max()),
        "containment_violations": contain_bad,
    }


def covering_statistic(cover: WhitneyCover, a: float = 0.0, p: float = 1.0) -> float:
    """Mass-weighted gauge sum of the cover, normalized by the source ball.

    ((1/|B|) sum_k |O_k| rho_a(r_B / r_k)^p)^(1/p); stays bounded by a
    constant multiple of rho_a of the map distortion when the cover comes
    from a measure-preserving image.
    """
    r_b = cover.source_ball.radius
    vol_b = cover.source_ball.volume
    total = 0.0
    for ball in cover.balls:
        if ball.radius > r_b * (1.0 + 1e-9):
            raise RadiusViolation(
                f"cover ball radius {ball.radius} exceeds source radius {r_b}"
            )
        total += ball.volume * rho(a, max(r_b / ball.radius, 1.0)) ** p
    return (total / vol_b) ** (1.0 / p)


@dataclass(frozen=True)
class ShellHistogram:
    """Dyadic-radius mass profile of a cover.

    ``masses[l]`` is the total ball area with radius in
    [2^-l r_B, 2^-(l-1) r_B); ``decay_constant`` is the smallest C with
    masses[l] <= C * K * 2^-l * |B| for all shells (reported only when the
    map distortion K is known).
    """

    levels: list
    masses: list
    covered_mass_fraction: float
    decay_constant: float | None

    def total_mass(self) -> float:
        return float(sum(self.masses))


def shell_histogram(cover: WhitneyCover, k_phi: float | None = None) -> ShellHistogram:
    """Bucket the cover's ball areas by dyadic radius relative to r_B."""
    r_b = cover.source_ball.radius
    vol_b = cover.source_ball.volume
    buckets: dict = {}
    for ball in cover.balls:
        ratio = max(r_b / ball.radius, 1.0)
        lvl = int(math.floor(math.log2(ratio) + 1e-12))
        buckets[lvl] = buckets.get(lvl, 0.0) + ball.volume
    levels = sorted(buckets)
    masses = [buckets[l] for l in levels]
    decay = None
    if k_phi is not None:
        decay = max(
            m / (k_phi * 2.0 ** (-l) * vol_b) for l, m in zip(levels, masses)
        )
    return ShellHistogram(levels, masses, sum(masses) / vol_b, decay)
