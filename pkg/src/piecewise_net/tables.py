"""Benchmark sweeps with published reference errors.

Every row carries the reference parameter count and errors (``None`` marks a
run that is expected to fail to converge) together with the tolerance used to
mark a measured row as passing.  Unless a row sets ``l2_max``/``linf_max``
explicitly, a row passes when its mean L2 error is within ten times the
reference value.
"""

from dataclasses import dataclass

from .config import EncodingSpec, ExperimentConfig, PointCounts

FAIL = None


@dataclass(frozen=True)
class Row:
    label: str
    problem: str
    mode: str
    encoding: EncodingSpec
    points: PointCounts
    n_params: int
    l2: float
    linf: float
    width: int = 50
    n_test: int = None
    l2_max: float = None
    linf_max: float = None

    @property
    def expect_failure(self):
        return self.l2 is FAIL

    def config(self, trials=10, seed=0, **extra):
        return ExperimentConfig(
            problem=self.problem,
            mode=self.mode,
            encoding=self.encoding,
            points=self.points,
            width=self.width,
            trials=trials,
            seed=seed,
            n_test=self.n_test,
            **extra,
        )

    def limits(self):
        """(max mean L2, max mean Linf) for a pass; ``None`` entries are unchecked."""
        if self.expect_failure:
            return None, None
        l2 = self.l2_max if self.l2_max is not None else 10 * self.l2
        return l2, self.linf_max

    def passed(self, report):
        if self.expect_failure:
            return report.failed
        if report.failed:
            return False
        l2, linf = self.limits()
        ok = report.mean_l2 <= l2
        if linf is not None:
            ok = ok and report.mean_linf <= linf
        return ok


@dataclass(frozen=True)
class Table:
    key: str
    title: str
    rows: tuple
    reference: str = None


CE1 = EncodingSpec("embedding", embed_dim=1)
CE2 = EncodingSpec("embedding", embed_dim=2)
CE5 = EncodingSpec("embedding", embed_dim=5)
CE10 = EncodingSpec("embedding", embed_dim=10)
SE_NOM = EncodingSpec("scalar", labels="nominal")
SE_MEAN = EncodingSpec("scalar", labels="mean")
SE_MEAN_F = EncodingSpec("scalar", labels="mean_f")
OH = EncodingSpec("onehot")

_T1_POINTS = PointCounts(880, 120)
_T1 = (
    Row("CE (D = 1)", "func2d_multiregion", "approximate", CE1, _T1_POINTS, 255, 6.47e-8, 2.09e-6,
        n_test=10000, l2_max=1e-6, linf_max=1e-4),
    Row("SE (nominal)", "func2d_multiregion", "approximate", SE_NOM, _T1_POINTS, 250, 1.10e-7, 4.07e-6,
        n_test=10000),
    Row("OH", "func2d_multiregion", "approximate", OH, _T1_POINTS, 450, 4.22e-8, 1.06e-6, n_test=10000),
)

# (encoding, N_p, L2, Linf) per piece count
_T2_REF = {
    5: [(CE1, 205, 5.65e-8, 1.43e-7), (CE2, 260, 2.76e-8, 8.14e-8), (SE_NOM, 200, 4.02e-8, 3.43e-7),
        (SE_MEAN, 200, 9.60e-8, 2.19e-7), (OH, 400, 2.79e-8, 7.14e-8)],
    10: [(CE1, 210, 4.27e-8, 3.96e-7), (CE2, 270, 4.78e-8, 1.68e-7), (CE5, 450, 3.24e-8, 1.87e-7),
         (SE_NOM, 200, FAIL, FAIL), (SE_MEAN, 200, 3.81e-8, 5.67e-7), (OH, 650, 3.26e-8, 1.49e-7)],
    50: [(CE1, 250, 4.03e-4, 2.94e-3), (CE2, 350, 1.71e-6, 2.50e-5), (CE5, 650, 3.89e-7, 5.29e-6),
         (CE10, 1150, 7.43e-8, 1.47e-6), (SE_MEAN, 200, 8.29e-4, 8.92e-3), (OH, 2650, 4.29e-8, 6.00e-7)],
    100: [(CE1, 300, 2.27e-3, 1.99e-2), (CE2, 450, 1.46e-5, 1.92e-4), (CE5, 900, 1.94e-7, 3.83e-6),
          (CE10, 1650, 9.02e-8, 2.83e-6), (SE_MEAN, 200, 4.47e-3, 3.62e-2), (OH, 5150, 5.69e-8, 1.43e-6)],
}

_T3_REF = {
    5: [(CE1, 205, 4.37e-7, 1.78e-6), (CE2, 260, 6.13e-8, 1.47e-7), (SE_NOM, 200, 7.63e-7, 4.01e-6),
        (SE_MEAN_F, 200, 6.40e-7, 2.71e-6), (OH, 400, 2.57e-8, 7.69e-8)],
    10: [(CE1, 210, 1.68e-6, 4.68e-6), (CE2, 270, 2.32e-7, 6.43e-7), (SE_NOM, 200, FAIL, FAIL),
         (SE_MEAN_F, 200, 1.36e-3, 3.25e-3), (OH, 650, 7.00e-8, 2.20e-7)],
    50: [(CE5, 650, 2.38e-5, 1.44e-4), (CE10, 1150, 2.26e-5, 9.29e-5), (SE_MEAN_F, 200, FAIL, FAIL),
         (OH, 2650, 3.47e-8, 8.04e-7)],
    100: [(CE5, 900, 5.77e-5, 3.29e-4), (CE10, 1650, 4.97e-5, 1.94e-4), (SE_MEAN_F, 200, FAIL, FAIL),
          (OH, 5150, 8.08e-8, 4.23e-7)],
}


def _label(enc):
    if enc.scheme == "scalar":
        return {"nominal": "SE (nominal)", "mean": "SE (mean u)", "mean_f": "SE (mean f)"}[enc.labels]
    return enc.describe()


def _one_d_points(n, mode):
    M = 2000 if n == 100 else 1000
    return PointCounts(M, 2, 1 if mode == "solve" else None)


def _one_d_limits(n, enc, mode):
    # property-based thresholds used where the random coefficients differ
    if n in (5, 10) and enc.scheme == "embedding":
        return 1e-5
    if n == 100 and enc.scheme == "onehot":
        return 1e-6
    return None


def _one_d_rows(ref, family, mode):
    rows = []
    for n, entries in ref.items():
        for enc, n_p, l2, linf in entries:
            rows.append(
                Row(
                    f"{n:>3} pieces {_label(enc)}",
                    f"{family}{n}",
                    mode,
                    enc,
                    _one_d_points(n, mode),
                    n_p,
                    l2,
                    linf,
                    l2_max=_one_d_limits(n, enc, mode),
                )
            )
    return tuple(rows)


_PDE2D = PointCounts(324, 72, 72)
_PDE3D = PointCounts(324, 144, 144)

TABLES = {
    "t1": Table("t1", "2D five-region function approximation", _T1),
    "t2": Table("t2", "1D multi-piece function approximation", _one_d_rows(_T2_REF, "func1d_pieces", "approximate")),
    "t3": Table("t3", "1D anisotropic interface problem", _one_d_rows(_T3_REF, "aniso1d_pieces", "solve")),
    "t4": Table(
        "t4",
        "2D anisotropic problem, heart-shaped interface",
        (
            Row("CE (D = 1)", "aniso2d_heart", "solve", CE1, _PDE2D, 252, 5.97e-8, 5.43e-7, l2_max=1e-6, linf_max=1e-5),
            Row("SE (nominal)", "aniso2d_heart", "solve", SE_NOM, _PDE2D, 250, 6.62e-8, 6.23e-7, l2_max=1e-6),
            Row("OH", "aniso2d_heart", "solve", OH, _PDE2D, 300, 1.47e-8, 1.34e-7, l2_max=1e-6),
        ),
        reference="FVM (16384 unknowns): L2 1.80e-04",
    ),
    "t5": Table(
        "t5",
        "2D variable-coefficient problem, chessboard interface",
        (
            Row("CE (D = 1)", "aniso2d_chessboard", "solve", CE1, _PDE2D, 252, 4.39e-9, 9.59e-9, linf_max=1e-6),
            Row("SE (nominal)", "aniso2d_chessboard", "solve", SE_NOM, _PDE2D, 250, 5.48e-9, 1.25e-8),
            Row("OH", "aniso2d_chessboard", "solve", OH, _PDE2D, 300, 4.13e-9, 7.89e-9),
        ),
        reference="FEM (102400 unknowns): Linf 2.60e-05",
    ),
    "t6": Table(
        "t6",
        "2D anisotropic problem, four interfaces",
        (
            Row("CE (D = 1)", "aniso2d_multiregion", "solve", CE1, _PDE2D, 255, 2.33e-9, 2.28e-8),
            Row("SE (nominal)", "aniso2d_multiregion", "solve", SE_NOM, _PDE2D, 250, 3.96e-9, 3.54e-8),
            Row("OH", "aniso2d_multiregion", "solve", OH, _PDE2D, 450, 2.95e-9, 2.09e-8),
        ),
    ),
    "t7": Table(
        "t7",
        "3D anisotropic problem, four spherical interfaces",
        (
            Row("CE (D = 1)", "aniso3d_spheres", "solve", CE1, _PDE3D, 605, 3.42e-8, 2.64e-7, width=100, l2_max=1e-6),
            Row("SE (nominal)", "aniso3d_spheres", "solve", SE_NOM, _PDE3D, 600, 2.87e-7, 3.45e-6, width=100),
            Row("OH", "aniso3d_spheres", "solve", OH, _PDE3D, 1000, 4.25e-8, 5.51e-7, width=100),
        ),
    ),
}


def get(key):
    try:
        return TABLES[key]
    except KeyError:
        raise KeyError(f"unknown table {key!r}; expected one of {sorted(TABLES)}") from None
