"""Benchmark problems: piecewise exact solutions and anisotropic coefficients.

Each region carries a closed-form solution (value, gradient, Hessian) and, for
PDE problems, a symmetric positive-definite coefficient matrix ``A`` with its
divergence ``div_A[m] = sum_k dA_km/dx_k`` and a scalar ``lam``.  The source
``f``, boundary data ``g`` and jump data ``v, w`` are always derived from these
fields; nothing is stored independently.

Functions act on point arrays of shape ``(n, d)``.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import OnInterfaceError

RANDOM_FAMILY_SEED = 20240917
PIECE_COUNTS = (5, 10, 50, 100)


@dataclass(frozen=True)
class Piece:
    """Exact solution and coefficients on one region."""

    u: object
    grad: object
    hess: object
    A: object = None
    div_A: object = None
    lam: object = None


@dataclass(frozen=True)
class ProblemDefinition:
    name: str
    region_map: object
    pieces: tuple
    description: str = ""

    @property
    def dim(self):
        return self.region_map.dim

    @property
    def n_regions(self):
        return self.region_map.n_regions

    @property
    def has_pde(self):
        return all(p.A is not None for p in self.pieces)

    def _regions(self, x, regions):
        if regions is None:
            return self.region_map.classify(x)
        return np.broadcast_to(np.asarray(regions, dtype=int), (len(x),))

    def _per_region(self, attr, x, regions, shape):
        x = geo._as_points(x, self.dim)
        regions = self._regions(x, regions)
        out = np.zeros((len(x),) + shape)
        for ell in np.unique(regions):
            mask = regions == ell
            out[mask] = getattr(self.pieces[ell], attr)(x[mask])
        return out

    def exact(self, x, regions=None):
        return self._per_region("u", x, regions, ())

    def exact_grad(self, x, regions=None):
        return self._per_region("grad", x, regions, (self.dim,))

    def exact_hess(self, x, regions=None):
        return self._per_region("hess", x, regions, (self.dim, self.dim))

    def coefficients(self, x, regions=None):
        """``(A, div_A, lam)`` evaluated with each point's region-local fields."""
        if not self.has_pde:
            raise ValueError(f"problem {self.name!r} has no PDE coefficients")
        d = self.dim
        return (
            self._per_region("A", x, regions, (d, d)),
            self._per_region("div_A", x, regions, (d,)),
            self._per_region("lam", x, regions, ()),
        )

    def rhs(self, x, regions=None):
        """``f = div(A grad u) - lam u`` from the region-local closed forms."""
        x = geo._as_points(x, self.dim)
        if regions is None:
            if self.region_map.on_interface(x).any():
                raise OnInterfaceError("source term is undefined on an interface")
            regions = self.region_map.classify(x)
        A, div_A, lam = self.coefficients(x, regions)
        grad = self.exact_grad(x, regions)
        hess = self.exact_hess(x, regions)
        return (
            np.einsum("nm,nm->n", div_A, grad)
            + np.einsum("nkm,nkm->n", A, hess)
            - lam * self.exact(x, regions)
        )

    def boundary_data(self, x):
        """Dirichlet data: the exact solution of the region each point lies in."""
        return self.exact(x)

    def jump_data(self, x, ell, normals):
        """``(v, w)`` on interface ``ell``: jumps of ``u`` and of ``A grad u . n``."""
        x = geo._as_points(x, self.dim)
        inner, outer = self.region_map.interface_regions(ell)
        v = self.exact(x, outer) - self.exact(x, inner)
        if not self.has_pde:
            return v, None
        A_out, _, _ = self.coefficients(x, outer)
        A_in, _, _ = self.coefficients(x, inner)
        flux_out = np.einsum("nk,nkm,nm->n", normals, A_out, self.exact_grad(x, outer))
        flux_in = np.einsum("nk,nkm,nm->n", normals, A_in, self.exact_grad(x, inner))
        return v, flux_out - flux_in


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def _ones_hess(h):
    return lambda x: h(x)[:, None, None] * np.ones((1, x.shape[1], x.shape[1]))


def _product_piece(f, df, d2f):
    """``u = prod_i f(x_i)`` with gradient and Hessian."""

    def u(x):
        return np.prod(f(x), axis=1)

    def grad(x):
        fx, dfx = f(x), df(x)
        out = np.empty_like(x)
        for i in range(x.shape[1]):
            out[:, i] = dfx[:, i] * np.prod(np.delete(fx, i, axis=1), axis=1)
        return out

    def hess(x):
        fx, dfx, d2fx = f(x), df(x), d2f(x)
        d = x.shape[1]
        out = np.empty((len(x), d, d))
        for i in range(d):
            for j in range(d):
                factors = fx.copy()
                if i == j:
                    factors[:, i] = d2fx[:, i]
                else:
                    factors[:, i] = dfx[:, i]
                    factors[:, j] = dfx[:, j]
                out[:, i, j] = np.prod(factors, axis=1)
        return out

    return u, grad, hess


def _isotropic(a, grad_a):
    """Scalar coefficient ``a(x) I``; its divergence row is ``grad a``."""

    def A(x):
        return a(x)[:, None, None] * np.eye(x.shape[1])

    return A, grad_a


def _scaled(beta, A, div_A, lam):
    return (
        lambda x: beta * A(x),
        lambda x: beta * div_A(x),
        lambda x: beta * lam(x),
    )


# ---------------------------------------------------------------------------
# two-dimensional five-region geometry and solution
# ---------------------------------------------------------------------------


def _polar(center, r0, amp, freq, trig):
    if trig == "cos":
        return geo.PolarCurve(
            center,
            lambda t: r0 - amp * np.cos(freq * t),
            lambda t: amp * freq * np.sin(freq * t),
        )
    return geo.PolarCurve(
        center,
        lambda t: r0 - amp * np.sin(freq * t),
        lambda t: -amp * freq * np.cos(freq * t),
    )


def five_region_map():
    """Superellipse ``x1^4 + x2^4 <= 1`` with four star-shaped inclusions."""
    return geo.RegionMap(
        geo.SuperQuadric([1.0, 1.0]),
        [
            _polar((-0.5, 0.5), 0.3, 0.1, 5, "cos"),
            _polar((0.4, 0.4), 0.35, 0.2, 4, "sin"),
            _polar((-0.5, -0.4), 0.45, 0.05, 2, "sin"),
            _polar((0.5, -0.5), 0.35, 0.05, 3, "cos"),
        ],
        name="superellipse-5",
    )


def _five_region_solutions():
    def s_sum(x):
        return x[:, 0] + x[:, 1]

    ones = np.ones(2)
    pieces = []

    # sin(x1) sin(x2)
    pieces.append(
        (
            lambda x: np.sin(x[:, 0]) * np.sin(x[:, 1]),
            lambda x: np.column_stack(
                [np.cos(x[:, 0]) * np.sin(x[:, 1]), np.sin(x[:, 0]) * np.cos(x[:, 1])]
            ),
            lambda x: np.stack(
                [
                    np.column_stack(
                        [-np.sin(x[:, 0]) * np.sin(x[:, 1]), np.cos(x[:, 0]) * np.cos(x[:, 1])]
                    ),
                    np.column_stack(
                        [np.cos(x[:, 0]) * np.cos(x[:, 1]), -np.sin(x[:, 0]) * np.sin(x[:, 1])]
                    ),
                ],
                axis=1,
            ),
        )
    )
    # exp(x1 - x2)
    sgn = np.array([1.0, -1.0])
    pieces.append(
        (
            lambda x: np.exp(x[:, 0] - x[:, 1]),
            lambda x: np.exp(x[:, 0] - x[:, 1])[:, None] * sgn,
            lambda x: np.exp(x[:, 0] - x[:, 1])[:, None, None] * np.outer(sgn, sgn),
        )
    )
    # cos(x1 + x2)
    pieces.append(
        (
            lambda x: np.cos(s_sum(x)),
            lambda x: -np.sin(s_sum(x))[:, None] * ones,
            _ones_hess(lambda x: -np.cos(s_sum(x))),
        )
    )
    # 0.5 cosh(x1 + x2)
    pieces.append(
        (
            lambda x: 0.5 * np.cosh(s_sum(x)),
            lambda x: 0.5 * np.sinh(s_sum(x))[:, None] * ones,
            _ones_hess(lambda x: 0.5 * np.cosh(s_sum(x))),
        )
    )
    # ln(x1 + x2 + 3)
    pieces.append(
        (
            lambda x: np.log(s_sum(x) + 3.0),
            lambda x: (1.0 / (s_sum(x) + 3.0))[:, None] * ones,
            _ones_hess(lambda x: -1.0 / (s_sum(x) + 3.0) ** 2),
        )
    )
    return pieces


def func2d_multiregion():
    pieces = tuple(Piece(*sol) for sol in _five_region_solutions())
    return ProblemDefinition(
        "func2d_multiregion",
        five_region_map(),
        pieces,
        "five-piece function on a superellipse",
    )


def aniso2d_multiregion():
    def A0(x):
        x1, x2 = x[:, 0], x[:, 1]
        off = -(x1**2) + x2**2
        return np.stack(
            [
                np.column_stack([(x1 + x2) ** 2 + 1.0, off]),
                np.column_stack([off, (x1 - x2) ** 2 + 1.0]),
            ],
            axis=1,
        )

    def div_A0(x):
        x1, x2 = x[:, 0], x[:, 1]
        return np.column_stack([2.0 * x1 + 4.0 * x2, -4.0 * x1 + 2.0 * x2])

    def lam0(x):
        return np.exp(x[:, 0] - x[:, 1])

    betas = (1.0, 1e-1, 1e-2, 1e1, 1e2)
    pieces = tuple(
        Piece(*sol, *_scaled(beta, A0, div_A0, lam0))
        for sol, beta in zip(_five_region_solutions(), betas)
    )
    return ProblemDefinition(
        "aniso2d_multiregion",
        five_region_map(),
        pieces,
        "anisotropic problem, five regions, coefficient ratio up to 1e4",
    )


# ---------------------------------------------------------------------------
# heart-shaped interface
# ---------------------------------------------------------------------------


def heart_map():
    curve = geo.PolarCurve(
        (-0.25, 0.0),
        lambda t: (1.0 + np.cos(t)) / 3.0,
        lambda t: -np.sin(t) / 3.0,
        cusps=(np.pi,),
    )
    return geo.RegionMap(geo.Box([-1.0, -1.0], [1.0, 1.0]), [curve], name="square-heart")


def aniso2d_heart():
    def rho(x):
        return x[:, 0] ** 2 + x[:, 1] ** 2

    def A1(x):
        r = rho(x)
        return np.stack(
            [np.column_stack([r + 1.0, r]), np.column_stack([r, r + 2.0])], axis=1
        )

    def div_A1(x):
        s = 2.0 * (x[:, 0] + x[:, 1])
        return np.column_stack([s, s])

    def lam1(x):
        return np.exp(x[:, 0]) * (rho(x) + 3.0) * np.sin(x[:, 1])

    outer = Piece(
        rho,
        lambda x: 2.0 * x,
        lambda x: np.broadcast_to(2.0 * np.eye(2), (len(x), 2, 2)).copy(),
        *_scaled(1000.0, A1, div_A1, lam1),
    )
    inner = Piece(
        lambda x: np.exp(x[:, 0]) * np.cos(x[:, 1]),
        lambda x: np.exp(x[:, 0])[:, None]
        * np.column_stack([np.cos(x[:, 1]), -np.sin(x[:, 1])]),
        lambda x: np.exp(x[:, 0])[:, None, None]
        * np.stack(
            [
                np.column_stack([np.cos(x[:, 1]), -np.sin(x[:, 1])]),
                np.column_stack([-np.sin(x[:, 1]), -np.cos(x[:, 1])]),
            ],
            axis=1,
        ),
        A1,
        div_A1,
        lam1,
    )
    return ProblemDefinition(
        "aniso2d_heart", heart_map(), (outer, inner), "heart-shaped interface, contrast 1000"
    )


# ---------------------------------------------------------------------------
# chessboard level set
# ---------------------------------------------------------------------------


def _chess_phi(x):
    x1, x2 = x[:, 0], x[:, 1]
    return (np.sin(5 * np.pi * x1) - x2) * (-np.sin(5 * np.pi * x2) - x1)


def _chess_grad(x):
    x1, x2 = x[:, 0], x[:, 1]
    p = np.sin(5 * np.pi * x1) - x2
    q = -np.sin(5 * np.pi * x2) - x1
    dp = np.column_stack([5 * np.pi * np.cos(5 * np.pi * x1), -np.ones_like(x1)])
    dq = np.column_stack([-np.ones_like(x1), -5 * np.pi * np.cos(5 * np.pi * x2)])
    return q[:, None] * dp + p[:, None] * dq


def chessboard_map():
    return geo.RegionMap(
        geo.Box([-1.0, -1.0], [1.0, 1.0]),
        [geo.LevelSet(_chess_phi, _chess_grad)],
        name="square-chessboard",
    )


def aniso2d_chessboard():
    A0, div_A0 = _isotropic(
        lambda x: x[:, 0] * x[:, 1] + 2.0, lambda x: np.column_stack([x[:, 1], x[:, 0]])
    )
    A1, div_A1 = _isotropic(
        lambda x: x[:, 0] ** 2 - x[:, 1] ** 2 + 3.0,
        lambda x: np.column_stack([2.0 * x[:, 0], -2.0 * x[:, 1]]),
    )

    def zero(x):
        return np.zeros(len(x))

    def hess2(x):
        return np.broadcast_to(2.0 * np.eye(2), (len(x), 2, 2)).copy()

    outer = Piece(
        lambda x: 4.0 - x[:, 0] ** 2 - x[:, 1] ** 2,
        lambda x: -2.0 * x,
        lambda x: -hess2(x),
        A0,
        div_A0,
        zero,
    )
    inner = Piece(
        lambda x: x[:, 0] ** 2 + x[:, 1] ** 2, lambda x: 2.0 * x, hess2, A1, div_A1, zero
    )
    return ProblemDefinition(
        "aniso2d_chessboard", chessboard_map(), (outer, inner), "chessboard level-set interface"
    )


# ---------------------------------------------------------------------------
# three-dimensional spheres
# ---------------------------------------------------------------------------

ROTATION = np.array(
    [[2.0, 1.0, 2.0], [-2.0, 2.0, 1.0], [1.0, 2.0, -2.0]]
) / 3.0
SPHERE_CENTERS = ((-0.45, 0.45, 0.0), (0.45, 0.45, 0.0), (-0.45, -0.45, 0.0), (0.45, -0.45, 0.0))


def spheres_map():
    return geo.RegionMap(
        geo.SuperQuadric([1.0, 1.0, 16.0]),
        [geo.Sphere(c, 0.4) for c in SPHERE_CENTERS],
        name="superquadric-4-spheres",
    )


def aniso3d_spheres():
    base = ROTATION @ np.diag([1.0, 2.0, 3.0]) @ ROTATION.T

    def A0(x):
        # R diag(|x|^2 + k) R^T = |x|^2 I + R diag(1, 2, 3) R^T
        r2 = (x**2).sum(axis=1)
        return r2[:, None, None] * np.eye(3) + base

    def div_A0(x):
        return 2.0 * x

    def lam0(x):
        return np.exp(x[:, 0] - x[:, 1] - x[:, 2])

    def exp_sum(x):
        return np.exp(x.sum(axis=1))

    solutions = [
        (
            exp_sum,
            lambda x: exp_sum(x)[:, None] * np.ones((1, 3)),
            lambda x: exp_sum(x)[:, None, None] * np.ones((1, 3, 3)),
        ),
        _product_piece(np.sin, np.cos, lambda t: -np.sin(t)),
        _product_piece(np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)),
        _product_piece(np.sinh, np.cosh, np.sinh),
        _product_piece(np.cosh, np.sinh, np.cosh),
    ]
    betas = (1.0, 0.1, 0.05, 10.0, 50.0)
    pieces = tuple(
        Piece(*sol, *_scaled(beta, A0, div_A0, lam0)) for sol, beta in zip(solutions, betas)
    )
    return ProblemDefinition(
        "aniso3d_spheres", spheres_map(), pieces, "four spheres in a super-quadric, contrast 1000"
    )


# ---------------------------------------------------------------------------
# one-dimensional randomised families
# ---------------------------------------------------------------------------


def random_family_coefficients(n_pieces):
    """``(a, b, c, d, e)`` per piece, drawn once from a fixed seed.

    The function-approximation and PDE families with the same piece count share
    the same draws.
    """
    rng = np.random.default_rng([RANDOM_FAMILY_SEED, n_pieces])
    a = rng.uniform(0.5, 1.5, n_pieces)
    b = rng.uniform(1.0, 3.0, n_pieces)
    c = rng.uniform(1.0, 3.0, n_pieces)
    d = rng.uniform(0.5, 1.5, n_pieces)
    e = rng.uniform(0.5, 1.5, n_pieces)
    return np.column_stack([a, b, c, d, e])


def _wave_piece(a, b, c, d=None, e=None):
    """``u = a exp(sin(b x) + cos(c x))``; with ``d, e`` also ``A = (d x)^2``, ``lam = sin^2(e x)``."""

    def g(t):
        return np.sin(b * t) + np.cos(c * t)

    def dg(t):
        return b * np.cos(b * t) - c * np.sin(c * t)

    def d2g(t):
        return -(b**2) * np.sin(b * t) - c**2 * np.cos(c * t)

    def u(x):
        return a * np.exp(g(x[:, 0]))

    def grad(x):
        return (u(x) * dg(x[:, 0]))[:, None]

    def hess(x):
        t = x[:, 0]
        return (u(x) * (dg(t) ** 2 + d2g(t)))[:, None, None]

    if d is None:
        return Piece(u, grad, hess)
    return Piece(
        u,
        grad,
        hess,
        lambda x: ((d * x[:, 0]) ** 2)[:, None, None],
        lambda x: (2.0 * d * d * x[:, 0])[:, None],
        lambda x: np.sin(e * x[:, 0]) ** 2,
    )


def func1d_pieces(n_pieces):
    coeffs = random_family_coefficients(n_pieces)
    return ProblemDefinition(
        f"func1d_pieces{n_pieces}",
        geo.IntervalPartition(0.0, 2.0 * np.pi, n_pieces),
        tuple(_wave_piece(a, b, c) for a, b, c, _, _ in coeffs),
        f"{n_pieces}-piece function on [0, 2 pi]",
    )


def aniso1d_pieces(n_pieces):
    coeffs = random_family_coefficients(n_pieces)
    return ProblemDefinition(
        f"aniso1d_pieces{n_pieces}",
        geo.IntervalPartition(0.0, 2.0 * np.pi, n_pieces),
        tuple(_wave_piece(*row) for row in coeffs),
        f"{n_pieces}-piece interface problem on [0, 2 pi]",
    )


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

_CATALOG = {
    "func2d_multiregion": func2d_multiregion,
    "aniso2d_heart": aniso2d_heart,
    "aniso2d_chessboard": aniso2d_chessboard,
    "aniso2d_multiregion": aniso2d_multiregion,
    "aniso3d_spheres": aniso3d_spheres,
}
for _n in PIECE_COUNTS:
    _CATALOG[f"func1d_pieces{_n}"] = lambda n=_n: func1d_pieces(n)
    _CATALOG[f"aniso1d_pieces{_n}"] = lambda n=_n: aniso1d_pieces(n)


def names():
    return sorted(_CATALOG)


def catalog(name):
    """Build a catalog problem by name."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; available: {', '.join(names())}") from None
    return factory()
