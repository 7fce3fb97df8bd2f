"""JSON experiment descriptions.

Example::

    {
      "problem": "aniso2d_heart",
      "mode": "solve",
      "encoding": {"scheme": "embedding", "embed_dim": 1},
      "width": 50,
      "points": {"M": 324, "M_b": 72, "M_gamma": 72},
      "optimizer": {"mu0": 1e-3, "nu": 3, "max_iters": 1000, "tol": 1e-15, "solver": "qr"},
      "trials": 10,
      "seed": 0
    }

Label rules for the scalar scheme: ``nominal`` (``gamma_l = l``), ``mean``
(region averages of the target, approximation only), ``mean_f`` (region
averages of the source term normalised by the largest magnitude, solve only)
or an explicit list of numbers.
"""

import json
from dataclasses import asdict, dataclass, field

from . import problems
from .errors import ConfigError
from .optimizer import SOLVERS, LMConfig

MODES = ("approximate", "solve")
SCHEMES = ("embedding", "scalar", "onehot")
LABEL_RULES = ("nominal", "mean", "mean_f")


@dataclass(frozen=True)
class EncodingSpec:
    scheme: str = "embedding"
    labels: object = None
    embed_dim: int = None

    def describe(self):
        if self.scheme == "embedding":
            return f"CE (D = {self.embed_dim})"
        if self.scheme == "onehot":
            return "OH"
        lab = self.labels
        return f"SE ({lab})" if isinstance(lab, str) else "SE (custom)"


@dataclass(frozen=True)
class PointCounts:
    M: int
    M_b: int
    M_gamma: int = None


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    mode: str
    encoding: EncodingSpec
    points: PointCounts
    width: int = 50
    optimizer: LMConfig = field(default_factory=LMConfig)
    trials: int = 10
    seed: int = 0
    out: str = None
    n_test: int = None
    grid_res: int = 201
    init_scale: float = 1.0

    @property
    def test_points(self):
        return self.n_test if self.n_test is not None else 10 * self.points.M

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("problem", "mode", "encoding", "points"):
            if key not in data:
                raise ConfigError(f"missing config key {key!r}")
        enc = data["encoding"]
        if not isinstance(enc, dict):
            raise ConfigError("encoding must be an object")
        bad = set(enc) - {"scheme", "labels", "embed_dim"}
        if bad:
            raise ConfigError(f"unknown encoding keys: {sorted(bad)}")
        pts = data["points"]
        if not isinstance(pts, dict):
            raise ConfigError("points must be an object")
        bad = set(pts) - {"M", "M_b", "M_gamma"}
        if bad:
            raise ConfigError(f"unknown points keys: {sorted(bad)}")
        try:
            data["encoding"] = EncodingSpec(**enc)
            data["points"] = PointCounts(**pts)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        opt = data.get("optimizer", {})
        if not isinstance(opt, LMConfig):
            try:
                data["optimizer"] = LMConfig(**opt)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"optimizer: {exc}") from None
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self):
        d = asdict(self)
        d["optimizer"] = self.optimizer.to_dict()
        return d

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def validate(self):
        if self.problem not in problems.names():
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        enc, pts = self.encoding, self.points
        if enc.scheme not in SCHEMES:
            raise ConfigError(f"encoding scheme must be one of {SCHEMES}")
        if enc.scheme == "embedding":
            if not _is_count(enc.embed_dim):
                raise ConfigError("embedding scheme needs a positive integer embed_dim")
        elif enc.embed_dim is not None:
            raise ConfigError(f"embed_dim is only valid with the embedding scheme, not {enc.scheme!r}")
        if enc.scheme == "scalar":
            if enc.labels is None:
                raise ConfigError("scalar scheme needs a labels rule")
            if isinstance(enc.labels, str):
                if enc.labels not in LABEL_RULES:
                    raise ConfigError(f"labels must be one of {LABEL_RULES} or a list of numbers")
                if enc.labels == "mean" and self.mode != "approximate":
                    raise ConfigError("labels 'mean' is for approximate mode; use 'mean_f' to solve")
                if enc.labels == "mean_f" and self.mode != "solve":
                    raise ConfigError("labels 'mean_f' needs a source term (solve mode)")
            elif not all(isinstance(v, (int, float)) for v in enc.labels):
                raise ConfigError("explicit labels must be numbers")
        elif enc.labels is not None:
            raise ConfigError("labels are only valid with the scalar scheme")
        for name in ("M", "M_b"):
            if not _is_count(getattr(pts, name)):
                raise ConfigError(f"points.{name} must be a positive integer")
        if self.mode == "approximate" and pts.M_gamma is not None:
            raise ConfigError("approximate mode has no interface residuals; drop points.M_gamma")
        if self.mode == "solve" and not _is_count(pts.M_gamma):
            raise ConfigError("solve mode needs a positive integer points.M_gamma")
        for name in ("width", "trials", "grid_res"):
            if not _is_count(getattr(self, name)):
                raise ConfigError(f"{name} must be a positive integer")
        if self.n_test is not None and not _is_count(self.n_test):
            raise ConfigError("n_test must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not self.init_scale > 0:
            raise ConfigError("init_scale must be positive")
        if self.optimizer.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        problem = problems.catalog(self.problem)
        if self.mode == "solve" and not problem.has_pde:
            raise ConfigError(f"problem {self.problem!r} has no PDE data; use approximate mode")
        L1 = problem.n_regions
        if enc.scheme == "embedding" and enc.embed_dim > L1:
            raise ConfigError(f"embed_dim must be at most {L1} for {self.problem!r}")
        if enc.scheme == "scalar" and not isinstance(enc.labels, str) and len(enc.labels) != L1:
            raise ConfigError(f"need {L1} labels for {self.problem!r}")

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig.from_dict(d)


def _is_count(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1
