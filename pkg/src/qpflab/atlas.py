"""Partition atlas: disjoint open allocations U_n inside the blown-up regions.

Within each quantile plateau the member curves receive sub-arcs by the
inductive collapsing order (0, 1, -1, 2, -2, ...): each curve's arc sits at
the offset given by the mass of later curves lifted below it, punctured by
the arcs of earlier curves.  Fiberwise widths are exact: Leb(U_{n,theta}) is
the atom weight a_n, and the component count is bounded by the allocation
rank + 1 <= 2|n| + 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import AtlasInvariantViolation, CoverFailure, PreconditionError
from .measure import MeasureFamily, Projection, allocation_rank


@dataclass(frozen=True)
class FiberAtlas:
    theta: Fraction
    u: dict          # n -> tuple of (lo, hi) open arcs, unrolled source coords
    v: dict          # n -> tuple of (lo, hi) closed arcs (compact shrinkings)

    def u_width(self, n) -> Fraction:
        return sum((hi - lo for lo, hi in self.u[n]), Fraction(0))

    def v_width(self, n) -> Fraction:
        return sum((hi - lo for lo, hi in self.v[n]), Fraction(0))

    def components(self, n) -> int:
        return len(self.u[n])


def _allocate_plateau(members, masses, t_split, start: Fraction, length: Fraction):
    """Sequential within-plateau allocation; returns n -> list of closed arcs."""
    allocated: list = []   # disjoint closed arcs already assigned, sorted
    out = {}
    for idx, m in enumerate(members):
        later = members[idx + 1:]
        offset = sum((t_split[(j, m)] * masses[j] for j in later), Fraction(0))
        # free pieces of the plateau in increasing order
        free = []
        cur = start
        for lo, hi in sorted(allocated):
            if lo > cur:
                free.append((cur, lo))
            cur = max(cur, hi)
        if cur < start + length:
            free.append((cur, start + length))
        # consume the free pieces from the collapsed offset
        target = masses[m]
        arcs = []
        pos = Fraction(0)
        for lo, hi in free:
            piece = hi - lo
            take_lo = max(lo, lo + (offset - pos))
            take_hi = min(hi, lo + (offset + target - pos))
            if take_lo < take_hi:
                arcs.append((take_lo, take_hi))
            pos += piece
        got = sum((hi - lo for lo, hi in arcs), Fraction(0))
        if got != target:
            raise AtlasInvariantViolation(
                f"allocation of curve {m} got width {float(got)} != {float(target)}")
        out[m] = arcs
        allocated.extend(arcs)
    return out


def _shrink_arcs(arcs, epsilon: Fraction):
    """Proportional inward shrink keeping total (1-eps) of the length."""
    out = []
    for lo, hi in arcs:
        margin = (hi - lo) * epsilon / 2
        out.append((lo + margin, hi - margin))
    return out


@dataclass(eq=False)
class PartitionAtlas:
    projection: Projection
    epsilon: Fraction
    order: tuple

    def __post_init__(self):
        if self.order[0] != self.projection.n0:
            raise PreconditionError("allocation order must start at the anchor curve")
        if not (0 < self.epsilon < 1):
            raise CoverFailure("epsilon must lie in (0,1) for a compact shrinking")
        self._cache = lru_cache(maxsize=32768)(self._fiber_uncached)

    @property
    def mu(self) -> MeasureFamily:
        return self.projection.mu

    def fiber(self, theta) -> FiberAtlas:
        return self._cache(Fraction(theta))

    def _fiber_uncached(self, theta: Fraction) -> FiberAtlas:
        fm = self.mu.fiber(theta)
        fp = self.projection.fiber(theta)
        u: dict = {}
        for plateau in fp.plateaus:
            arcs = _allocate_plateau(list(plateau.members), fm.masses, fm.t_split,
                                     plateau.start, plateau.length)
            u.update(arcs)
        u = {n: tuple(v) for n, v in u.items()}
        v = {n: tuple(_shrink_arcs(list(arcs), self.epsilon)) for n, arcs in u.items()}
        return FiberAtlas(theta=theta, u=u, v=v)

    def audit_fiber(self, theta) -> None:
        """Raise AtlasInvariantViolation if any invariant fails at this fiber."""
        fa = self.fiber(theta)
        fm = self.mu.fiber(theta)
        fp = self.projection.fiber(theta)
        all_arcs = []
        for n in self.order:
            arcs = fa.u[n]
            if fa.u_width(n) != fm.masses[n]:
                raise AtlasInvariantViolation(
                    f"theta={float(theta)}: width of U_{n} is {float(fa.u_width(n))}")
            bound = 2 * abs(n) + 1
            if len(arcs) > bound:
                raise AtlasInvariantViolation(
                    f"theta={float(theta)}: U_{n} has {len(arcs)} components > {bound}")
            plateau = fp.plateau_of(n)
            for lo, hi in arcs:
                if not (plateau.start <= lo and hi <= plateau.start + plateau.length):
                    raise AtlasInvariantViolation(
                        f"theta={float(theta)}: U_{n} leaves its plateau")
            if fa.v_width(n) < (1 - self.epsilon) * fm.masses[n]:
                raise AtlasInvariantViolation(
                    f"theta={float(theta)}: V_{n} too small")
            for (lo, hi), (vlo, vhi) in zip(arcs, fa.v[n]):
                if not (lo < vlo and vhi < hi):
                    raise AtlasInvariantViolation(
                        f"theta={float(theta)}: V_{n} not interior to U_{n}")
            all_arcs.extend(arcs)
        all_arcs.sort()
        for (alo, ahi), (blo, bhi) in zip(all_arcs, all_arcs[1:]):
            if blo < ahi:
                raise AtlasInvariantViolation(
                    f"theta={float(theta)}: allocations overlap at {float(blo)}")


@dataclass
class AtlasAudit:
    fibers: int
    max_components: dict
    min_v_fraction: float
    passed: bool


def build_partition_atlas(mu: MeasureFamily, projection: Projection,
                          epsilon, order=None) -> PartitionAtlas:
    if order is None:
        order = tuple(sorted(mu.curves.keys(), key=allocation_rank))
    if projection.mu is not mu:
        raise PreconditionError("projection must be built from the same measure family")
    return PartitionAtlas(projection=projection, epsilon=Fraction(epsilon), order=tuple(order))


def audit_atlas(atlas: PartitionAtlas, grid: int) -> AtlasAudit:
    """Full-grid audit; raises AtlasInvariantViolation on the first failure."""
    max_components = {n: 0 for n in atlas.order}
    min_v_frac = 1.0
    for g in range(grid):
        theta = Fraction(g, grid)
        atlas.audit_fiber(theta)
        fa = atlas.fiber(theta)
        for n in atlas.order:
            max_components[n] = max(max_components[n], fa.components(n))
            frac = float(fa.v_width(n) / atlas.mu.masses[n])
            min_v_frac = min(min_v_frac, frac)
    return AtlasAudit(fibers=grid, max_components=max_components,
                      min_v_fraction=min_v_frac, passed=True)


def shrink_to_compact(atlas: PartitionAtlas, epsilon, grid: int = 64) -> dict:
    """Compact V_n family at a given epsilon, with a neighbour-fiber cover check.

    Returns {n: per-grid-fiber arc lists}; raises CoverFailure when the
    requested fraction cannot be certified (epsilon = 0 by design).
    """
    epsilon = Fraction(epsilon)
    if not (0 < epsilon < 1):
        raise CoverFailure("epsilon must lie in (0,1); epsilon=0 admits no compact shrink")
    out: dict = {n: [] for n in atlas.order}
    worst = 1.0
    for g in range(grid):
        theta = Fraction(g, grid)
        fa = atlas.fiber(theta)
        for n in atlas.order:
            arcs = _shrink_arcs(list(fa.u[n]), epsilon)
            got = sum((hi - lo for lo, hi in arcs), Fraction(0))
            frac = float(got / atlas.mu.masses[n])
            worst = min(worst, frac)
            out[n].append(tuple(arcs))
    if worst < float(1 - epsilon) - 1e-12:
        raise CoverFailure(f"achieved fraction {worst:.6f} below 1-eps")
    return out
