"""Scaled residual vectors and their parameter Jacobians.

Rows are scaled so that ``||r||^2`` is exactly the mean-squared loss:
``1/sqrt(M)`` for interior and supervised rows, ``1/sqrt(M_b)`` for boundary
rows and ``1/sqrt(M_G)`` for both row types of an interface with ``M_G``
sample points.

Supervised rows are data minus model.  PDE rows are model minus data.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import network as nw
from .errors import OnInterfaceError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResidualSystem:
    r: np.ndarray
    J: np.ndarray
    groups: np.ndarray

    @property
    def loss(self):
        return float(self.r @ self.r)

    def group_counts(self):
        labels, counts = np.unique(self.groups, return_counts=True)
        return dict(zip(labels.tolist(), counts.tolist()))


@dataclass(frozen=True)
class CollocationPoints:
    interior: np.ndarray
    boundary: np.ndarray
    interfaces: tuple


def sample_collocation(region_map, m, m_b, m_gamma, seed):
    """Interior, boundary and per-interface training points from one seed."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    seeds = seed.spawn(2 + region_map.n_interfaces)
    interfaces = tuple(
        region_map.sample_interface(ell, m_gamma, seeds[1 + ell])
        for ell in range(1, region_map.n_interfaces + 1)
    )
    return CollocationPoints(
        region_map.sample_interior(m, seeds[0]),
        region_map.sample_boundary(m_b, seeds[1]),
        interfaces,
    )


class SupervisedSystem:
    """Builder ``theta -> ResidualSystem`` for the data-fitting loss."""

    def __init__(self, layout, region_map, x, u):
        x = np.asarray(x, dtype=float).reshape(len(u), region_map.dim)
        if len(x) == 0:
            raise ValueError("empty training set")
        self.layout = layout
        self.x = x
        self.u = np.asarray(u, dtype=float)
        self.regions = region_map.classify(x)
        self.scale = 1.0 / np.sqrt(len(x))
        self.groups = np.full(len(x), "supervised")

    def __call__(self, theta, jacobian=True):
        params = self.layout.unpack(theta)
        q, J = nw.value_rows(params, self.layout.encoding, self.x, self.regions, jacobian)
        J = None if J is None else -self.scale * J
        return ResidualSystem(self.scale * (self.u - q), J, self.groups)


class _InterfaceBlock:
    def __init__(self, problem, sample):
        rmap = problem.region_map
        self.inner, self.outer = rmap.interface_regions(sample.region)
        self.region = sample.region
        self.x = sample.points
        self.valid = np.asarray(sample.valid, dtype=bool)
        self.scale = 1.0 / np.sqrt(len(self.x))
        self.v, w = problem.jump_data(self.x, sample.region, sample.normals)
        self.w = w[self.valid]
        xv = self.x[self.valid]
        self.normals = sample.normals[self.valid]
        self.A_out = problem.coefficients(xv, self.outer)[0]
        self.A_in = problem.coefficients(xv, self.inner)[0]
        n, nv = len(self.x), int(self.valid.sum())
        before = np.cumsum(self.valid) - self.valid
        self.pos_jump = np.arange(n) + before
        self.pos_flux = (np.arange(n) + before + 1)[self.valid]
        self.n_rows = n + nv
        self.groups = np.empty(self.n_rows, dtype="<U16")
        self.groups[self.pos_jump] = f"jump:{sample.region}"
        self.groups[self.pos_flux] = f"flux:{sample.region}"
        if nv < n:
            log.info("interface %d: %d flux rows skipped (undefined normal)", sample.region, n - nv)

    def rows(self, params, enc, jacobian):
        r = np.empty(self.n_rows)
        qj, Jj = nw.jump_rows(params, enc, self.x, self.inner, self.outer, jacobian=jacobian)
        r[self.pos_jump] = qj - self.v
        if jacobian:
            J = np.empty((self.n_rows, Jj.shape[1]))
            J[self.pos_jump] = Jj
        if len(self.pos_flux):
            qf, Jf = nw.flux_jump_rows(
                params,
                enc,
                self.x[self.valid],
                self.normals,
                self.A_out,
                self.A_in,
                self.inner,
                self.outer,
                jacobian=jacobian,
            )
            r[self.pos_flux] = qf - self.w
            if jacobian:
                J[self.pos_flux] = Jf
        if not jacobian:
            return self.scale * r, None
        return self.scale * r, self.scale * J


class PinnSystem:
    """Builder ``theta -> ResidualSystem`` for the PDE collocation loss.

    All problem data (coefficients, sources, boundary and jump values) are
    evaluated once at construction.
    """

    def __init__(self, layout, problem, points):
        rmap = problem.region_map
        if len(points.interior) == 0 or len(points.boundary) == 0:
            raise ValueError("interior and boundary point sets must be non-empty")
        if rmap.on_interface(points.interior).any():
            raise OnInterfaceError("interior collocation point lies on an interface")
        self.layout = layout
        self.x = points.interior
        self.regions = rmap.classify(self.x)
        self.A, self.div_A, self.lam = problem.coefficients(self.x, self.regions)
        self.f = problem.rhs(self.x, self.regions)
        self.scale = 1.0 / np.sqrt(len(self.x))
        self.xb = points.boundary
        self.regions_b = rmap.classify(self.xb)
        self.g = problem.boundary_data(self.xb)
        self.scale_b = 1.0 / np.sqrt(len(self.xb))
        self.blocks = [_InterfaceBlock(problem, s) for s in points.interfaces]
        self.groups = np.concatenate(
            [np.full(len(self.x), "interior"), np.full(len(self.xb), "boundary")]
            + [b.groups for b in self.blocks]
        )

    def __call__(self, theta, jacobian=True):
        params = self.layout.unpack(theta)
        enc = self.layout.encoding
        qi, Ji = nw.operator_rows(
            params, enc, self.x, self.regions, self.A, self.div_A, self.lam, jacobian
        )
        qb, Jb = nw.value_rows(params, enc, self.xb, self.regions_b, jacobian)
        rs = [self.scale * (qi - self.f), self.scale_b * (qb - self.g)]
        Js = [self.scale * Ji, self.scale_b * Jb] if jacobian else []
        for block in self.blocks:
            r, J = block.rows(params, enc, jacobian)
            rs.append(r)
            if jacobian:
                Js.append(J)
        J = np.vstack(Js) if jacobian else None
        return ResidualSystem(np.concatenate(rs), J, self.groups)


def assemble_supervised(params, encoding, region_map, x, u):
    layout = nw.Layout(params.n_neurons, region_map.dim, encoding)
    return SupervisedSystem(layout, region_map, x, u)(layout.pack(params))


def assemble_pinn(params, encoding, problem, points):
    layout = nw.Layout(params.n_neurons, problem.dim, encoding)
    return PinnSystem(layout, problem, points)(layout.pack(params))
