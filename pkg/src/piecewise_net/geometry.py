"""Domains, embedded interfaces, point classification and samplers.

A :class:`RegionMap` owns an outer domain and a list of closed interfaces.
Region 0 is everything inside the domain that is not inside any interface;
region ``l`` (``l >= 1``) is the open set enclosed by interface ``l``.
:class:`IntervalPartition` is the one-dimensional variant where consecutive
breakpoints split an interval into pieces.

All point arrays have shape ``(n, d)``.  Samplers take an explicit seed and are
pure functions of ``(map, count, seed)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormalError, GeometryConfigError, OutOfDomainError

ON_TOL = 1e-12
GRAD_TOL = 1e-10
MIN_ACCEPTANCE = 0.01


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1) if dim > 1 or x.size == 1 else x.reshape(-1, 1)
    if x.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _sphere_directions(n, dim, rng):
    if dim == 2:
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        return np.column_stack([np.cos(theta), np.sin(theta)])
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# outer domains
# ---------------------------------------------------------------------------


class Interval:
    """The closed interval ``[lo, hi]``."""

    dim = 1

    def __init__(self, lo, hi):
        self.lo = float(lo)
        self.hi = float(hi)

    def level(self, x):
        x = x[:, 0]
        return np.maximum(self.lo - x, x - self.hi)

    @property
    def bbox(self):
        return np.array([self.lo]), np.array([self.hi])

    def sample_boundary(self, n, rng):
        # two boundary points, alternated
        return np.where(np.arange(n) % 2 == 0, self.lo, self.hi).reshape(-1, 1)

    def describe(self):
        return {"type": "interval", "lo": self.lo, "hi": self.hi}


class SuperQuadric:
    """``sum_i w_i x_i**4 <= 1``; e.g. the superellipse ``x1^4 + x2^4 = 1``."""

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)
        self.dim = len(self.weights)

    def level(self, x):
        return (self.weights * x**4).sum(axis=1) - 1.0

    @property
    def bbox(self):
        half = self.weights ** -0.25
        return -half, half

    def sample_boundary(self, n, rng):
        # x_i = sign(a_i) |a_i|^(1/2) / w_i^(1/4) maps the unit sphere onto the surface
        a = _sphere_directions(n, self.dim, rng)
        return np.sign(a) * np.sqrt(np.abs(a)) * self.weights ** -0.25

    def describe(self):
        return {"type": "superquadric", "weights": self.weights.tolist()}


class Box:
    """Axis-aligned box ``[lo, hi]``."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.dim = len(self.lo)

    def level(self, x):
        return np.maximum(self.lo - x, x - self.hi).max(axis=1)

    @property
    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def sample_boundary(self, n, rng):
        width = self.hi - self.lo
        areas = np.array([np.prod(np.delete(width, i)) for i in range(self.dim)])
        axis = rng.choice(self.dim, size=n, p=areas / areas.sum())
        side = rng.integers(0, 2, size=n)
        pts = self.lo + rng.random((n, self.dim)) * width
        rows = np.arange(n)
        pts[rows, axis] = np.where(side == 0, self.lo[axis], self.hi[axis])
        return pts

    def describe(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


# ---------------------------------------------------------------------------
# interfaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InterfaceSample:
    """Points on interface ``region`` with unit normals pointing inner -> outer.

    ``valid[k]`` is False where the normal is undefined (cusp neighbourhood or
    vanishing level-set gradient); the corresponding normal row is zero.
    """

    region: int
    points: np.ndarray
    normals: np.ndarray
    valid: np.ndarray

    def __len__(self):
        return len(self.points)


class PolarCurve:
    """Star-shaped closed curve ``center + r(theta) (cos theta, sin theta)``."""

    dim = 2

    def __init__(self, center, radius, dradius, cusps=(), cusp_exclusion=1e-3):
        self.center = np.asarray(center, dtype=float)
        self.radius = radius
        self.dradius = dradius
        self.cusps = tuple(cusps)
        self.cusp_exclusion = cusp_exclusion

    def _polar(self, x):
        rel = x - self.center
        return np.hypot(rel[:, 0], rel[:, 1]), np.arctan2(rel[:, 1], rel[:, 0])

    def level(self, x):
        rho, theta = self._polar(x)
        return rho - self.radius(theta)

    def point(self, theta):
        r = self.radius(theta)
        return self.center + np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def _normals_theta(self, theta):
        r, dr = self.radius(theta), self.dradius(theta)
        c, s = np.cos(theta), np.sin(theta)
        tx, ty = dr * c - r * s, dr * s + r * c
        norm = np.hypot(tx, ty)
        ok = norm >= GRAD_TOL
        safe = np.where(ok, norm, 1.0)
        # tangent rotated by -90 degrees: outward for a counter-clockwise curve
        n = np.column_stack([ty / safe, -tx / safe])
        if self.cusps:
            pts = self.point(theta)
            for tc in self.cusps:
                cusp = self.point(np.array([tc]))
                ok &= np.linalg.norm(pts - cusp, axis=1) > self.cusp_exclusion
        n[~ok] = 0.0
        return n, ok

    def normal(self, x):
        _, theta = self._polar(x)
        n, ok = self._normals_theta(theta)
        return n, ok

    def sample(self, n, rng, domain):
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        normals, ok = self._normals_theta(theta)
        return self.point(theta), normals, ok

    def describe(self):
        return {"type": "polar", "center": self.center.tolist()}


class Sphere:
    """Sphere (circle in 2D) of given center and radius."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = len(self.center)

    def level(self, x):
        return np.linalg.norm(x - self.center, axis=1) - self.radius

    def normal(self, x):
        rel = x - self.center
        norm = np.linalg.norm(rel, axis=1)
        ok = norm >= GRAD_TOL
        n = rel / np.where(ok, norm, 1.0)[:, None]
        n[~ok] = 0.0
        return n, ok

    def sample(self, n, rng, domain):
        dirs = _sphere_directions(n, self.dim, rng)
        return self.center + self.radius * dirs, dirs, np.ones(n, dtype=bool)

    def describe(self):
        return {"type": "sphere", "center": self.center.tolist(), "radius": self.radius}


class LevelSet:
    """Interface ``phi(x) = 0`` enclosing the region ``phi(x) < 0``."""

    def __init__(self, phi, grad_phi, dim=2, newton_iters=20):
        self.phi = phi
        self.grad_phi = grad_phi
        self.dim = dim
        self.newton_iters = newton_iters

    def level(self, x):
        return self.phi(x)

    def normal(self, x):
        g = self.grad_phi(x)
        norm = np.linalg.norm(g, axis=1)
        ok = norm >= GRAD_TOL
        n = g / np.where(ok, norm, 1.0)[:, None]
        n[~ok] = 0.0
        return n, ok

    def project(self, x):
        """Newton-project points onto ``phi = 0`` along the gradient."""
        x = x.copy()
        done = np.zeros(len(x), dtype=bool)
        for _ in range(self.newton_iters):
            phi = self.phi(x)
            done = np.abs(phi) <= ON_TOL
            if done.all():
                break
            g = self.grad_phi(x)
            g2 = (g * g).sum(axis=1)
            move = ~done & (g2 > GRAD_TOL**2)
            x[move] -= (phi[move] / g2[move])[:, None] * g[move]
        done = np.abs(self.phi(x)) <= ON_TOL
        return x, done

    def sample(self, n, rng, domain):
        lo, hi = domain.bbox
        out, have, tried = [], 0, 0
        while have < n:
            batch = max(2 * (n - have), 64)
            cand = lo + rng.random((batch, self.dim)) * (hi - lo)
            proj, conv = self.project(cand)
            keep = conv & (domain.level(proj) <= -ON_TOL)
            out.append(proj[keep])
            have += int(keep.sum())
            tried += batch
            if tried > 1000 and have < MIN_ACCEPTANCE * tried:
                raise GeometryConfigError("level-set projection acceptance below 1%")
        pts = np.concatenate(out)[:n]
        normals, ok = self.normal(pts)
        return pts, normals, ok

    def describe(self):
        return {"type": "levelset"}


# ---------------------------------------------------------------------------
# region maps
# ---------------------------------------------------------------------------


class RegionMap:
    """Outer domain with ``L`` disjoint interfaces; regions ``0..L``.

    Points on an interface (``|level| <= 1e-12``) classify into region 0.
    """

    def __init__(self, domain, interfaces, name=""):
        self.domain = domain
        self.interfaces = list(interfaces)
        self.dim = domain.dim
        self.name = name
        for itf in self.interfaces:
            if itf.dim != self.dim:
                raise ValueError("interface dimension does not match domain")

    @property
    def n_interfaces(self):
        return len(self.interfaces)

    @property
    def n_regions(self):
        return len(self.interfaces) + 1

    @property
    def bbox(self):
        return self.domain.bbox

    def interface_regions(self, ell):
        """``(inner, outer)`` region indices on the two sides of interface ``ell``."""
        self._check_interface(ell)
        return ell, 0

    def _check_interface(self, ell):
        if not 1 <= ell <= self.n_interfaces:
            raise ValueError(f"interface index must be in 1..{self.n_interfaces}, got {ell}")

    def contains(self, x):
        x = _as_points(x, self.dim)
        return self.domain.level(x) <= ON_TOL

    def classify(self, x):
        """Region index for each point; raises for points outside the domain."""
        x = _as_points(x, self.dim)
        if not self.contains(x).all():
            raise OutOfDomainError("point outside the outer boundary")
        regions = np.zeros(len(x), dtype=int)
        for ell, itf in enumerate(self.interfaces, start=1):
            regions[itf.level(x) < -ON_TOL] = ell
        return regions

    def on_interface(self, x):
        x = _as_points(x, self.dim)
        hit = np.zeros(len(x), dtype=bool)
        for itf in self.interfaces:
            hit |= np.abs(itf.level(x)) <= ON_TOL
        return hit

    def one_hot(self, x):
        regions = self.classify(x)
        return np.eye(self.n_regions)[regions]

    def normal_at(self, ell, x, tol=1e-9):
        """Unit normal on interface ``ell`` pointing from region ``ell`` to region 0."""
        self._check_interface(ell)
        x = _as_points(x, self.dim)
        itf = self.interfaces[ell - 1]
        if np.any(np.abs(itf.level(x)) > tol):
            raise ValueError("point is not on the requested interface")
        n, ok = itf.normal(x)
        if not ok.all():
            raise DegenerateNormalError(f"normal undefined on interface {ell}")
        return n

    def sample_interior(self, m, seed):
        if m < 1:
            raise ValueError("sample count must be >= 1")
        rng = _rng(seed)
        lo, hi = self.bbox
        out, have, tried = [], 0, 0
        while have < m:
            batch = max(2 * (m - have), 64)
            cand = lo + rng.random((batch, self.dim)) * (hi - lo)
            tried += batch
            keep = (self.domain.level(cand) < -ON_TOL) & ~self.on_interface(cand)
            out.append(cand[keep])
            have += int(keep.sum())
            if tried > 1000 and have < MIN_ACCEPTANCE * tried:
                raise GeometryConfigError("interior rejection acceptance below 1%")
        return np.concatenate(out)[:m]

    def sample_boundary(self, m, seed):
        if m < 1:
            raise ValueError("sample count must be >= 1")
        return self.domain.sample_boundary(m, _rng(seed))

    def sample_interface(self, ell, m, seed):
        self._check_interface(ell)
        if m < 1:
            raise ValueError("sample count must be >= 1")
        pts, normals, ok = self.interfaces[ell - 1].sample(m, _rng(seed), self.domain)
        return InterfaceSample(ell, pts, normals, ok)

    def check_disjoint(self, m=2000, seed=0):
        """True if no sampled point lies strictly inside two interfaces."""
        x = self.sample_interior(m, seed)
        inside = np.array([itf.level(x) < -ON_TOL for itf in self.interfaces])
        return not inside.size or inside.sum(axis=0).max() <= 1


class IntervalPartition(RegionMap):
    """``[lo, hi]`` cut into ``n_pieces`` equal pieces by ``n_pieces - 1`` breakpoints.

    Piece ``l`` is ``(G_l, G_{l+1})`` with ``G_l = lo + l (hi - lo) / n_pieces``.
    Interface ``l`` is the breakpoint ``G_l`` between pieces ``l - 1`` (inner)
    and ``l`` (outer), so its normal is ``+1``.  A point exactly on a breakpoint
    belongs to the piece on its right.
    """

    def __init__(self, lo, hi, n_pieces, name=""):
        if n_pieces < 1:
            raise ValueError("need at least one piece")
        self.domain = Interval(lo, hi)
        self.dim = 1
        self.name = name
        self.breaks = lo + (hi - lo) * np.arange(1, n_pieces) / n_pieces
        self.interfaces = list(self.breaks)

    def interface_regions(self, ell):
        self._check_interface(ell)
        return ell - 1, ell

    def classify(self, x):
        x = _as_points(x, 1)
        if not self.contains(x).all():
            raise OutOfDomainError("point outside the interval")
        return np.searchsorted(self.breaks, x[:, 0] + ON_TOL, side="right")

    def on_interface(self, x):
        x = _as_points(x, 1)
        if not len(self.breaks):
            return np.zeros(len(x), dtype=bool)
        return np.abs(x[:, 0, None] - self.breaks[None, :]).min(axis=1) <= ON_TOL

    def normal_at(self, ell, x, tol=1e-9):
        self._check_interface(ell)
        x = _as_points(x, 1)
        if np.any(np.abs(x[:, 0] - self.breaks[ell - 1]) > tol):
            raise ValueError("point is not on the requested breakpoint")
        return np.ones((len(x), 1))

    def sample_interface(self, ell, m, seed):
        self._check_interface(ell)
        if m < 1:
            raise ValueError("sample count must be >= 1")
        pts = np.full((m, 1), self.breaks[ell - 1])
        return InterfaceSample(ell, pts, np.ones((m, 1)), np.ones(m, dtype=bool))

    def check_disjoint(self, m=2000, seed=0):
        return True
