"""Shallow sigmoid network ``U(x, z) = sum_j c_j sigma(W_j [x, z] + b_j)``.

Everything here is closed form: the value, the spatial gradient and Hessian,
interface jumps evaluated by swapping the categorical input, and the
derivatives of each of these with respect to every trainable parameter.

Flat parameter layout: ``c`` (N), ``W`` row-major (N x (d + dim_z)), ``b`` (N),
then ``E`` column-major (D x (L+1)) for the embedding scheme only.
"""

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

MAGIC = b"PWNN"
FORMAT_VERSION = 1
SCHEME_TAGS = {"scalar": 0, "onehot": 1, "embedding": 2}
_HEADER = struct.Struct("<4sIIIII")


# ---------------------------------------------------------------------------
# activation
# ---------------------------------------------------------------------------


def sigmoid(t):
    return expit(t)


def sigmoid_derivatives(t, order=3):
    """``[sigma, sigma', ..., sigma^(order)]`` evaluated at ``t``."""
    s = expit(t)
    out = [s]
    if order >= 1:
        ds = s * (1.0 - s)
        out.append(ds)
    if order >= 2:
        out.append(ds * (1.0 - 2.0 * s))
    if order >= 3:
        out.append(ds * (1.0 - 6.0 * s + 6.0 * s * s))
    return out


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def count_params(dim, n_neurons, encoding):
    """Number of trainable parameters for a given scheme."""
    if encoding.kind == "scalar":
        return (dim + 3) * n_neurons
    if encoding.kind == "onehot":
        return (dim + encoding.n_regions + 2) * n_neurons
    return (dim + encoding.dim + 2) * n_neurons + encoding.n_regions * encoding.dim


@dataclass
class Params:
    c: np.ndarray
    W: np.ndarray
    b: np.ndarray
    E: np.ndarray = None

    @property
    def n_neurons(self):
        return len(self.c)

    @property
    def n_inputs(self):
        return self.W.shape[1]

    def flat(self):
        parts = [self.c, self.W.ravel(), self.b]
        if self.E is not None:
            parts.append(self.E.ravel(order="F"))
        return np.concatenate(parts)


@dataclass(frozen=True)
class Layout:
    """Shapes needed to pack and unpack a flat parameter vector."""

    n_neurons: int
    dim: int
    encoding: object

    @property
    def n_inputs(self):
        return self.dim + self.encoding.dim_z

    @property
    def n_fc(self):
        return self.n_neurons * (self.n_inputs + 2)

    @property
    def n_params(self):
        n = self.n_fc
        if self.encoding.trainable:
            n += self.encoding.dim * self.encoding.n_regions
        return n

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        N, k = self.n_neurons, self.n_inputs
        c = theta[:N]
        W = theta[N : N + N * k].reshape(N, k)
        b = theta[N + N * k : self.n_fc]
        E = None
        if self.encoding.trainable:
            E = theta[self.n_fc :].reshape(self.encoding.dim, self.encoding.n_regions, order="F")
        return Params(c, W, b, E)

    def pack(self, params):
        theta = params.flat()
        if theta.shape != (self.n_params,):
            raise ValueError("parameters do not match the layout")
        return theta


def init_params(layout, seed):
    """Uniform [-1, 1] initialisation of every trainable entry."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    N, k = layout.n_neurons, layout.n_inputs
    c = rng.uniform(-1.0, 1.0, N)
    W = rng.uniform(-1.0, 1.0, (N, k))
    b = rng.uniform(-1.0, 1.0, N)
    E = None
    enc = layout.encoding
    if enc.trainable:
        E = rng.uniform(-1.0, 1.0, (enc.dim, enc.n_regions))
    return Params(c, W, b, E)


# ---------------------------------------------------------------------------
# forward evaluation and spatial derivatives
# ---------------------------------------------------------------------------


def _inputs(params, x, z):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if len(z) == 1 and len(x) > 1:
        z = np.repeat(z, len(x), axis=0)
    s = np.hstack([x, z])
    if s.shape[1] != params.n_inputs:
        raise ValueError(
            f"input dimension {s.shape[1]} does not match network input {params.n_inputs}"
        )
    return s, x.shape[1]


def forward(params, x, z):
    s, _ = _inputs(params, x, z)
    return sigmoid(s @ params.W.T + params.b) @ params.c


def grad_x(params, x, z):
    s, d = _inputs(params, x, z)
    _, ds = sigmoid_derivatives(s @ params.W.T + params.b, 1)
    return (ds * params.c) @ params.W[:, :d]


def hess_x(params, x, z):
    s, d = _inputs(params, x, z)
    d2s = sigmoid_derivatives(s @ params.W.T + params.b, 2)[2]
    Wx = params.W[:, :d]
    H = np.einsum("nj,jk,jm->nkm", d2s * params.c, Wx, Wx)
    # floating-point addition commutes, so this is symmetric bit for bit
    return 0.5 * (H + H.transpose(0, 2, 1))


def eval_piecewise(params, encoding, region_map, x):
    regions = region_map.classify(x)
    x = np.asarray(x, dtype=float).reshape(len(regions), region_map.dim)
    return forward(params, x, encoding.encode_regions(regions, params.E))


def jump(params, encoding, x, inner, outer=0):
    """Outer-side minus inner-side value, evaluated without limits."""
    if inner == outer:
        raise ValueError("jump needs two distinct regions")
    x = np.atleast_2d(x)
    z_out = encoding.encode_regions(np.full(len(x), outer), params.E)
    z_in = encoding.encode_regions(np.full(len(x), inner), params.E)
    return forward(params, x, z_out) - forward(params, x, z_in)


def flux_jump(params, encoding, x, normals, A_outer, A_inner, inner, outer=0):
    """``n^T A_out grad U(x, z_out) - n^T A_in grad U(x, z_in)``.

    ``A_outer`` and ``A_inner`` have shape ``(n, d, d)``.
    """
    if inner == outer:
        raise ValueError("flux jump needs two distinct regions")
    x = np.atleast_2d(x)
    normals = np.atleast_2d(normals)
    if np.any(np.abs(np.linalg.norm(normals, axis=1) - 1.0) > 1e-8):
        raise ValueError("normals must be unit vectors")
    z_out = encoding.encode_regions(np.full(len(x), outer), params.E)
    z_in = encoding.encode_regions(np.full(len(x), inner), params.E)
    g_out = grad_x(params, x, z_out)
    g_in = grad_x(params, x, z_in)
    return np.einsum("nk,nkm,nm->n", normals, A_outer, g_out) - np.einsum(
        "nk,nkm,nm->n", normals, A_inner, g_in
    )


# ---------------------------------------------------------------------------
# parameter Jacobians
#
# Each kernel returns (q, J_fc, dq_dz): the quantity per point, its derivative
# with respect to (c, W, b) in flat layout, and its derivative with respect to
# the categorical input z (chained into E by _attach_embedding).
# ---------------------------------------------------------------------------


def _pack_fc(dc, dW, db):
    n = len(dc)
    return np.hstack([dc, dW.reshape(n, -1), db])


def _value_kernel(params, s, d, jac=True):
    sig, ds = sigmoid_derivatives(s @ params.W.T + params.b, 1)
    q = sig @ params.c
    if not jac:
        return q, None, None
    tau = ds * params.c
    dW = tau[:, :, None] * s[:, None, :]
    return q, _pack_fc(sig, dW, tau), tau @ params.W[:, d:]


def _directional_kernel(params, s, d, a, jac=True):
    """Derivative of U along a per-point direction ``a`` (shape ``(n, d)``)."""
    _, ds, d2s = sigmoid_derivatives(s @ params.W.T + params.b, 2)
    Wx = params.W[:, :d]
    alpha = a @ Wx.T
    q = (alpha * ds) @ params.c
    if not jac:
        return q, None, None
    tau = params.c * alpha * d2s
    dW = tau[:, :, None] * s[:, None, :]
    dW[:, :, :d] += (params.c * ds)[:, :, None] * a[:, None, :]
    return q, _pack_fc(alpha * ds, dW, tau), tau @ params.W[:, d:]


def _operator_kernel(params, s, d, A, div_A, lam, jac=True):
    """``sum_km A_km d2U/dx_k dx_m + div_A . grad U - lam U``.

    ``A`` is ``(n, d, d)`` symmetric, ``div_A[:, m] = sum_k dA_km / dx_k``.
    """
    sig, ds, d2s, d3s = sigmoid_derivatives(s @ params.W.T + params.b, 3)
    Wx = params.W[:, :d]
    AW = np.einsum("nkm,jm->njk", A, Wx)
    quad = np.einsum("njk,jk->nj", AW, Wx)
    lin = div_A @ Wx.T
    lam = lam[:, None]
    h = quad * d2s + lin * ds - lam * sig
    q = h @ params.c
    if not jac:
        return q, None, None
    tau = params.c * (quad * d3s + lin * d2s - lam * ds)
    dW = tau[:, :, None] * s[:, None, :]
    dW[:, :, :d] += params.c[None, :, None] * (
        2.0 * AW * d2s[:, :, None] + div_A[:, None, :] * ds[:, :, None]
    )
    return q, _pack_fc(h, dW, tau), tau @ params.W[:, d:]


def _attach_embedding(encoding, J_fc, dq_dz, regions):
    if J_fc is None or not encoding.trainable:
        return J_fc
    n, D = len(J_fc), encoding.dim
    J_E = np.zeros((n, D * encoding.n_regions))
    cols = regions[:, None] * D + np.arange(D)
    J_E[np.arange(n)[:, None], cols] = dq_dz
    return np.hstack([J_fc, J_E])


def _stack(params, encoding, x, regions):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    regions = np.broadcast_to(np.asarray(regions, dtype=int), (len(x),))
    z = encoding.encode_regions(regions, params.E)
    s, d = _inputs(params, x, z)
    return s, d, regions


def value_rows(params, encoding, x, regions, jacobian=True):
    """Values and parameter Jacobian of ``U(x, z(region))`` at each point.

    With ``jacobian=False`` the Jacobian is skipped (returned as None) but the
    values are computed by the same arithmetic.
    """
    s, d, regions = _stack(params, encoding, x, regions)
    q, J, dz = _value_kernel(params, s, d, jacobian)
    return q, _attach_embedding(encoding, J, dz, regions)


def directional_rows(params, encoding, x, regions, direction, jacobian=True):
    s, d, regions = _stack(params, encoding, x, regions)
    q, J, dz = _directional_kernel(params, s, d, np.atleast_2d(direction), jacobian)
    return q, _attach_embedding(encoding, J, dz, regions)


def operator_rows(params, encoding, x, regions, A, div_A, lam, jacobian=True):
    s, d, regions = _stack(params, encoding, x, regions)
    q, J, dz = _operator_kernel(params, s, d, A, div_A, np.asarray(lam, dtype=float), jacobian)
    return q, _attach_embedding(encoding, J, dz, regions)


def _difference(encoding, out, inn, reg_out, reg_in):
    q_out, J_out, dz_out = out
    q_in, J_in, dz_in = inn
    if J_out is None:
        return q_out - q_in, None
    J_out = _attach_embedding(encoding, J_out, dz_out, reg_out)
    J_in = _attach_embedding(encoding, J_in, dz_in, reg_in)
    return q_out - q_in, J_out - J_in


def jump_rows(params, encoding, x, inner, outer=0, jacobian=True):
    """Jump values and their parameter Jacobian."""
    x = np.atleast_2d(x)
    reg_out = np.full(len(x), outer)
    reg_in = np.full(len(x), inner)
    s_out, d, _ = _stack(params, encoding, x, reg_out)
    s_in, _, _ = _stack(params, encoding, x, reg_in)
    return _difference(
        encoding,
        _value_kernel(params, s_out, d, jacobian),
        _value_kernel(params, s_in, d, jacobian),
        reg_out,
        reg_in,
    )


def flux_jump_rows(params, encoding, x, normals, A_outer, A_inner, inner, outer=0, jacobian=True):
    """Conormal-derivative jumps and their parameter Jacobian."""
    x = np.atleast_2d(x)
    reg_out = np.full(len(x), outer)
    reg_in = np.full(len(x), inner)
    s_out, d, _ = _stack(params, encoding, x, reg_out)
    s_in, _, _ = _stack(params, encoding, x, reg_in)
    a_out = np.einsum("nkm,nk->nm", A_outer, normals)
    a_in = np.einsum("nkm,nk->nm", A_inner, normals)
    return _difference(
        encoding,
        _directional_kernel(params, s_out, d, a_out, jacobian),
        _directional_kernel(params, s_in, d, a_in, jacobian),
        reg_out,
        reg_in,
    )


def param_jacobian_row(params, encoding, x, region, which="value"):
    """Derivative of one network quantity at a single point w.r.t. every parameter.

    ``which`` is ``"value"``, ``("grad", k)`` or ``("hess", k, m)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    if which == "value":
        return value_rows(params, encoding, x, region)[1][0]
    kind, *idx = which
    if kind == "grad":
        e = np.zeros((1, d))
        e[0, idx[0]] = 1.0
        return directional_rows(params, encoding, x, region, e)[1][0]
    if kind == "hess":
        k, m = idx
        A = np.zeros((1, d, d))
        A[0, k, m] += 0.5
        A[0, m, k] += 0.5
        return operator_rows(params, encoding, x, region, A, np.zeros((1, d)), np.zeros(1))[1][0]
    raise ValueError(f"unknown quantity {which!r}")


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def save_params(path, params, encoding, dim):
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        params.n_neurons,
        dim,
        encoding.dim_z,
        SCHEME_TAGS[encoding.kind],
    )
    data = header + params.flat().astype("<f8").tobytes()
    if hasattr(path, "write"):
        path.write(data)
        return
    with open(path, "wb") as fh:
        fh.write(data)


def load_params(path):
    """Returns ``(theta, header)`` where header holds N, d, dim_z and the scheme."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, N, d, dim_z, tag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a parameter dump")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported parameter dump version {version}")
    theta = np.frombuffer(raw[_HEADER.size :], dtype="<f8").astype(float)
    scheme = {v: k for k, v in SCHEME_TAGS.items()}[tag]
    return theta, {"n_neurons": N, "dim": d, "dim_z": dim_z, "scheme": scheme}
