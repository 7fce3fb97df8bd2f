"""Categorical functions that lift a region index into augmentation coordinates.

Three schemes are supported:

* ``scalar``    -- one fixed real label per region, ``z = (gamma_l)``;
* ``onehot``    -- the canonical basis vector ``delta_{l+1}`` of length ``L+1``;
* ``embedding`` -- a trainable ``D x (L+1)`` matrix ``E`` with ``z = E delta``.

Only ``E`` is ever trained.  Scalar labels and one-hot vectors are fixed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabelsError, InvalidCategoryError

KINDS = ("scalar", "onehot", "embedding")


@dataclass(frozen=True)
class Encoding:
    kind: str
    n_regions: int
    labels: np.ndarray = field(default=None, repr=False)
    dim: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown encoding {self.kind!r}; expected one of {KINDS}")
        if self.n_regions < 1:
            raise ValueError("need at least one region")
        if self.kind == "scalar":
            labels = np.asarray(self.labels, dtype=float).ravel()
            if labels.shape != (self.n_regions,):
                raise ValueError("scalar encoding needs one label per region")
            if len(np.unique(labels)) != len(labels):
                raise DegenerateLabelsError("scalar labels must be pairwise distinct")
            object.__setattr__(self, "labels", labels)
        if self.kind == "embedding":
            if self.dim is None or not 1 <= self.dim <= self.n_regions:
                raise ValueError(f"embedding dimension must be in 1..{self.n_regions}")

    @property
    def dim_z(self):
        if self.kind == "scalar":
            return 1
        if self.kind == "onehot":
            return self.n_regions
        return self.dim

    @property
    def trainable(self):
        return self.kind == "embedding"

    def describe(self):
        if self.kind == "embedding":
            return f"CE (D = {self.dim})"
        if self.kind == "scalar":
            return "SE"
        return "OH"

    def encode(self, delta, E=None):
        """Map a one-hot vector to ``z``."""
        delta = np.asarray(delta, dtype=float)
        if (
            delta.shape != (self.n_regions,)
            or not np.all((delta == 0) | (delta == 1))
            or delta.sum() != 1
        ):
            raise InvalidCategoryError("category vector is not a canonical basis vector")
        return self.encode_regions(np.array([int(np.argmax(delta))]), E)[0]

    def encode_regions(self, regions, E=None):
        """Vectorised ``z`` for an integer array of region indices, shape ``(n, dim_z)``."""
        regions = np.asarray(regions, dtype=int)
        if regions.size and (regions.min() < 0 or regions.max() >= self.n_regions):
            raise InvalidCategoryError("region index out of range")
        if self.kind == "scalar":
            return self.labels[regions][:, None]
        if self.kind == "onehot":
            return np.eye(self.n_regions)[regions]
        if E is None:
            raise ValueError("embedding encoding needs the matrix E")
        return E[:, regions].T


def scalar(labels):
    labels = np.asarray(labels, dtype=float)
    return Encoding("scalar", len(labels), labels=labels)


def nominal(n_regions):
    """Scalar encoding with ``gamma_l = l``."""
    return scalar(np.arange(n_regions, dtype=float))


def onehot(n_regions):
    return Encoding("onehot", n_regions)


def embedding(n_regions, dim):
    return Encoding("embedding", n_regions, dim=dim)


def mean_labels(averages, normalize=False):
    """Scalar encoding from per-region averages of a function.

    With ``normalize`` the labels are divided by the largest magnitude.
    """
    avg = np.asarray(averages, dtype=float)
    if not np.any(avg):
        raise DegenerateLabelsError("all region averages are zero")
    if normalize:
        avg = avg / np.abs(avg).max()
    return scalar(avg)


def region_averages(values, regions, n_regions):
    """Monte Carlo average of ``values`` over the points of each region."""
    regions = np.asarray(regions, dtype=int)
    counts = np.bincount(regions, minlength=n_regions)
    if np.any(counts == 0):
        missing = np.flatnonzero(counts == 0).tolist()
        raise DegenerateLabelsError(f"no sample points in regions {missing}")
    return np.bincount(regions, weights=values, minlength=n_regions) / counts


def embedding_init(dim, n_regions, seed):
    """Embedding matrix with i.i.d. uniform [-1, 1] entries."""
    if not 1 <= dim <= n_regions:
        raise ValueError(f"embedding dimension must be in 1..{n_regions}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, (dim, n_regions))
