"""Positivity and stability analysis of continuous-time linear positive systems.

A system dx/dt = A x, y = C x is positive (trajectories and outputs stay
elementwise nonnegative from nonnegative initial states) exactly when A is
Metzler and C >= 0. For Metzler A, Hurwitz stability has a cheap linear-solve
certificate: a positive vector v with A^T v < 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matcore

#: Default absolute tolerance for sign tests on entries derived from physical
#: parameters.
DEFAULT_TOL = 1e-9


def is_nonnegative_matrix(m, tol: float = DEFAULT_TOL) -> bool:
    """True iff every entry of m is >= -tol."""
    if tol < 0.0:
        raise ValueError("tol must be >= 0")
    arr = matcore.as_matrix(m, "m")
    return bool(np.all(arr >= -tol))


def is_metzler(a, tol: float = DEFAULT_TOL) -> bool:
    """True iff all off-diagonal entries of square a are >= -tol."""
    arr = matcore.require_square(a, "a")
    off = arr - np.diag(np.diag(arr))
    return bool(np.all(off >= -tol))


def metzler_shift(a, tol: float = DEFAULT_TOL) -> float:
    """Smallest shift lam >= 0 with a + lam I elementwise nonnegative.

    Only the diagonal can be negative for a Metzler matrix, so the shift is
    max(0, -min_i a_ii). Raises on non-Metzler input.
    """
    arr = matcore.require_square(a, "a")
    if not is_metzler(arr, tol):
        raise ValueError("metzler_shift requires a Metzler matrix")
    if arr.size == 0:
        return 0.0
    return float(max(0.0, -np.min(np.diag(arr))))


def is_hurwitz_metzler(a, tol: float = DEFAULT_TOL) -> tuple[bool, np.ndarray | None]:
    """Hurwitz certificate for a Metzler matrix.

    Solves a^T v = -1 (vector of ones). If the solve succeeds and v > 0
    elementwise, v certifies that all eigenvalues have negative real part and
    (True, v) is returned; otherwise (False, None). A singular a^T means the
    matrix is marginally stable or worse and also yields (False, None).
    """
    arr = matcore.require_square(a, "a")
    if not is_metzler(arr, tol):
        raise ValueError("is_hurwitz_metzler requires a Metzler matrix")
    try:
        v = matcore.solve_linear(arr.T, -np.ones(arr.shape[0]))
    except matcore.SingularMatrixError:
        return False, None
    if np.all(v > 0.0):
        return True, v
    return False, None


@dataclass
class PositiveLinearSystem:
    """Plant matrices with positivity metadata.

    A must be Metzler (enforced at construction). C and B nonnegativity are
    checked and exposed as properties but not enforced: closed-loop effective
    plants legitimately violate them and are reported instead.
    ``equilibrium``, when present, is the absolute operating point: the
    dynamics are dx/dt = A (x - equilibrium) + B u in absolute coordinates.
    """

    A: np.ndarray
    C: np.ndarray
    B: np.ndarray | None = None
    equilibrium: np.ndarray | None = None
    label: str = ""
    metzler_tol: float = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        self.A = matcore.require_square(self.A, "A")
        self.C = matcore.as_matrix(self.C, "C")
        n = self.A.shape[0]
        if self.C.shape[1] != n:
            raise ValueError(f"C has {self.C.shape[1]} columns, expected {n}")
        if self.B is not None:
            self.B = matcore.as_matrix(self.B, "B")
            if self.B.shape[0] != n:
                raise ValueError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.equilibrium is not None:
            self.equilibrium = matcore.as_vector(self.equilibrium, "equilibrium")
            if self.equilibrium.shape[0] != n:
                raise ValueError("equilibrium length must match state dimension")
        if not is_metzler(self.A, self.metzler_tol):
            raise ValueError(f"A is not Metzler (tol {self.metzler_tol:g})")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return 0 if self.B is None else self.B.shape[1]

    @property
    def output_nonneg(self) -> bool:
        return is_nonnegative_matrix(self.C, self.metzler_tol)

    @property
    def input_nonneg(self) -> bool:
        if self.B is None:
            return True
        return is_nonnegative_matrix(self.B, self.metzler_tol)


@dataclass
class AnalysisReport:
    """Aggregate positivity/stability verdicts for one system."""

    metzler: bool
    output_nonneg: bool
    hurwitz: bool
    metzler_shift: float
    positive_scaling_vector: np.ndarray | None

    def to_json_dict(self) -> dict:
        return {
            "metzler": self.metzler,
            "output_nonneg": self.output_nonneg,
            "hurwitz": self.hurwitz,
            "metzler_shift": self.metzler_shift,
            "positive_scaling_vector": (
                None
                if self.positive_scaling_vector is None
                else [float(x) for x in self.positive_scaling_vector]
            ),
        }


def analyze_matrices(a, c, tol: float = DEFAULT_TOL) -> AnalysisReport:
    """Positivity/stability report from raw matrices.

    Works on non-Metzler inputs too: the Hurwitz field then stays False
    because the Metzler certificate route does not apply (it means
    "certified", not "disproved").
    """
    arr = matcore.require_square(a, "a")
    cm = matcore.as_matrix(c, "c")
    metzler = is_metzler(arr, tol)
    output_ok = is_nonnegative_matrix(cm, tol)
    if metzler:
        shift = metzler_shift(arr, tol)
        hurwitz, witness = is_hurwitz_metzler(arr, tol)
    else:
        shift = float(max(0.0, -np.min(np.diag(arr)))) if arr.size else 0.0
        hurwitz, witness = False, None
    return AnalysisReport(
        metzler=metzler,
        output_nonneg=output_ok,
        hurwitz=hurwitz,
        metzler_shift=shift,
        positive_scaling_vector=witness,
    )


def check_positive_system(sys: PositiveLinearSystem, tol: float = DEFAULT_TOL) -> AnalysisReport:
    """AnalysisReport for a typed system (which already guarantees Metzler A)."""
    return analyze_matrices(sys.A, sys.C, tol)
