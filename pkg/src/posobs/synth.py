"""Observer gain synthesis for positive systems under event-based sampling.

The design conditions are a pair of coupled requirements on positive diagonal
P, Q and a nonnegative matrix W (with the gain recovered as L = Q^{-1} W):

  * a 2n x 2n block matrix
        [ P A + A^T P                theta C^T W^T                    ]
        [ theta W C                  Q A + A^T Q - W C - C^T W^T      ]
    must be negative definite, where theta = alpha*beta + beta - 1 is the
    trigger threshold coefficient, and
  * Q A - W C + lam Q >= 0 elementwise for some lam > 0, which makes
    A - L C Metzler and hence keeps the estimation error nonnegative.

lam multiplies Q, so it is treated as a swept parameter: for each grid value
the remaining conditions are affine in (P, Q, W) and handed to the generic
LMI feasibility solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import lmi, matcore, posys


class SynthesisError(RuntimeError):
    """No lam on the grid produced a feasible design."""

    def __init__(self, message: str, diagnostics: list[tuple[float, str, float]]):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class TriggerConfig:
    """Event-law scalars: threshold parameter alpha > 0, weighting beta > 1."""

    alpha: float
    beta: float
    threshold_coeff: float = field(init=False)

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError("alpha must be > 0")
        if not self.beta > 1.0:
            raise ValueError("beta must be > 1")
        object.__setattr__(
            self, "threshold_coeff", self.alpha * self.beta + self.beta - 1.0
        )


@dataclass
class ObserverDesign:
    """Synthesized gain with its certificate data.

    P_diag and Q_diag hold the diagonals of the positive definite diagonal
    Lyapunov weights; W = Q L; lmi_margin is lambda_max of the block
    condition at this point (negative when it holds) and elementwise_margin
    is the min entry of Q A - W C + lam Q (nonnegative when it holds).

    Construction enforces shapes, positive weights, and the L = Q^{-1} W
    identity; W (hence L) nonnegativity is a verify_design verdict rather
    than a constructor gate, so that out-of-family designs loaded from files
    can still be inspected and reported on. Every design synthesize() returns
    satisfies W >= 0 through the solver's bounds.
    """

    L: np.ndarray
    P_diag: np.ndarray
    Q_diag: np.ndarray
    W: np.ndarray
    lam: float
    lmi_margin: float
    elementwise_margin: float

    def __post_init__(self):
        self.L = matcore.as_matrix(self.L, "L")
        self.P_diag = matcore.as_vector(self.P_diag, "P_diag")
        self.Q_diag = matcore.as_vector(self.Q_diag, "Q_diag")
        self.W = matcore.as_matrix(self.W, "W")
        n, r = self.L.shape
        if self.W.shape != (n, r):
            raise ValueError("W must have the same shape as L")
        if self.P_diag.shape != (n,) or self.Q_diag.shape != (n,):
            raise ValueError("P_diag and Q_diag must have length n")
        if np.any(self.P_diag <= 0.0) or np.any(self.Q_diag <= 0.0):
            raise ValueError("P and Q diagonals must be strictly positive")
        if not self.lam > 0.0:
            raise ValueError("lam must be > 0")
        recon = self.W / self.Q_diag[:, None]
        if np.max(np.abs(recon - self.L)) > 1e-10 * (1.0 + np.max(np.abs(self.L))):
            raise ValueError("L must equal Q^{-1} W within 1e-10")

    def to_json_dict(self) -> dict:
        return {
            "L": self.L.tolist(),
            "P_diag": self.P_diag.tolist(),
            "Q_diag": self.Q_diag.tolist(),
            "W": self.W.tolist(),
            "lambda": self.lam,
            "lmi_margin": self.lmi_margin,
            "elementwise_margin": self.elementwise_margin,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ObserverDesign":
        return cls(
            L=np.asarray(doc["L"], dtype=float),
            P_diag=np.asarray(doc["P_diag"], dtype=float),
            Q_diag=np.asarray(doc["Q_diag"], dtype=float),
            W=np.asarray(doc["W"], dtype=float),
            lam=float(doc["lambda"]),
            lmi_margin=float(doc["lmi_margin"]),
            elementwise_margin=float(doc["elementwise_margin"]),
        )


@dataclass
class DesignReport:
    """Verification verdicts for one design. Report-only, never raises."""

    metzler_ALC: bool
    L_nonneg: bool
    lmi_pass: bool
    elementwise_pass: bool
    augmented_hurwitz: bool
    observability_ok: bool
    lmi_margin: float
    elementwise_margin: float

    @property
    def all_pass(self) -> bool:
        """Gate verdict; observability is a diagnostic and not included."""
        return (
            self.metzler_ALC
            and self.L_nonneg
            and self.lmi_pass
            and self.elementwise_pass
            and self.augmented_hurwitz
        )


def design_blocks(a, c, theta: float, lam: float, p_diag, q_diag, w):
    """Evaluate the two design conditions at a concrete (P, Q, W) point.

    Returns (block, elementwise): the 2n x 2n symmetric block matrix and the
    n x n matrix Q A - W C + lam Q.
    """
    a = matcore.require_square(a, "a")
    c = matcore.as_matrix(c, "c")
    p_diag = matcore.as_vector(p_diag, "p_diag")
    q_diag = matcore.as_vector(q_diag, "q_diag")
    w = matcore.as_matrix(w, "w")
    pa = p_diag[:, None] * a
    qa = q_diag[:, None] * a
    wc = w @ c
    b11 = pa + pa.T
    b22 = qa + qa.T - wc - wc.T
    b12 = theta * (c.T @ w.T)
    block = np.block([[b11, b12], [b12.T, b22]])
    elementwise = qa - wc + lam * np.diag(q_diag)
    return block, elementwise


def build_design_problem(
    sys: posys.PositiveLinearSystem,
    trig: TriggerConfig,
    lam: float,
    var_floor: float = 1e-6,
    var_ceil: float = 1e6,
) -> lmi.LmiFeasibilityProblem:
    """Encode the design conditions at a fixed lam as an LMI problem.

    Decision vector: (p_1..p_n, q_1..q_n, w_11..w_nr) with W in row-major
    order. One 2n x 2n negative-definite constraint, one n x n elementwise
    nonnegativity constraint, and box bounds p, q >= var_floor, w >= 0.
    """
    if not lam > 0.0:
        raise ValueError("lam must be > 0")
    a, c = sys.A, sys.C
    n, r = sys.n, sys.r
    dim = 2 * n + n * r
    theta = trig.threshold_coeff

    def blocks_at(z):
        p = z[:n]
        q = z[n:2 * n]
        w = z[2 * n:].reshape(n, r)
        return design_blocks(a, c, theta, lam, p, q, w)

    zero_block, zero_elem = blocks_at(np.zeros(dim))
    block_coeffs = np.empty((dim, 2 * n, 2 * n))
    elem_coeffs = np.empty((dim, n, n))
    for i in range(dim):
        unit = np.zeros(dim)
        unit[i] = 1.0
        blk, ele = blocks_at(unit)
        block_coeffs[i] = blk - zero_block
        elem_coeffs[i] = ele - zero_elem

    lower = np.concatenate([np.full(2 * n, var_floor), np.zeros(n * r)])
    upper = np.full(dim, var_ceil)
    return lmi.LmiFeasibilityProblem(
        dim=dim,
        matrix_constraints=[lmi.MatrixConstraint(zero_block, block_coeffs)],
        elementwise_constraints=[lmi.ElementwiseConstraint(zero_elem, elem_coeffs)],
        lower_bounds=lower,
        upper_bounds=upper,
    )


def split_decision_vector(sys: posys.PositiveLinearSystem, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(P_diag, Q_diag, W) from a decision vector of build_design_problem."""
    n, r = sys.n, sys.r
    z = matcore.as_vector(z, "z")
    return z[:n].copy(), z[n:2 * n].copy(), z[2 * n:].reshape(n, r).copy()


def default_lambda_grid(a, points: int = 50) -> np.ndarray:
    """Log-spaced lam sweep anchored at the Metzler shift of a."""
    shift = posys.metzler_shift(a)
    return np.geomspace(0.1 * (1.0 + shift), 50.0 * (1.0 + shift), points)


def synthesize(
    sys: posys.PositiveLinearSystem,
    trig: TriggerConfig,
    lambda_grid=None,
    opts: lmi.SolveOptions | None = None,
) -> ObserverDesign:
    """Sweep lam ascending and return the design at the first feasible value.

    Raises SynthesisError with per-lam diagnostics when the whole grid fails.
    A non-Hurwitz plant gets a warning but the sweep still runs: the block
    condition itself decides feasibility.
    """
    hurwitz, _ = posys.is_hurwitz_metzler(sys.A)
    if not hurwitz:
        warnings.warn(
            "plant matrix is not certified Hurwitz; synthesis may be infeasible",
            RuntimeWarning,
            stacklevel=2,
        )
    grid = default_lambda_grid(sys.A) if lambda_grid is None else np.sort(
        matcore.as_vector(lambda_grid, "lambda_grid")
    )
    if np.any(grid <= 0.0):
        raise ValueError("lambda grid values must be > 0")
    diagnostics: list[tuple[float, str, float]] = []
    for lam in grid:
        problem = build_design_problem(sys, trig, float(lam))
        outcome = lmi.solve(problem, opts)
        diagnostics.append((float(lam), outcome.status, float(outcome.worst_violation)))
        if outcome.status == lmi.FEASIBLE:
            p_diag, q_diag, w = split_decision_vector(sys, outcome.z)
            block, elem = design_blocks(
                sys.A, sys.C, trig.threshold_coeff, float(lam), p_diag, q_diag, w
            )
            vals, _ = matcore.sym_eigen(block)
            gain = w / q_diag[:, None]
            return ObserverDesign(
                L=gain,
                P_diag=p_diag,
                Q_diag=q_diag,
                W=w,
                lam=float(lam),
                lmi_margin=float(vals[-1]),
                elementwise_margin=float(np.min(elem)),
            )
    lines = ", ".join(f"lam={l:.4g}: {s}" for l, s, _ in diagnostics[:8])
    raise SynthesisError(
        f"no feasible lam in grid of {len(grid)} points ({lines}...)", diagnostics
    )


def observability_rank(a, c) -> int:
    """Rank of the stacked observability matrix [C; CA; ...; CA^(n-1)]."""
    a = matcore.require_square(a, "a")
    c = matcore.as_matrix(c, "c")
    n = a.shape[0]
    rows = [c]
    for _ in range(n - 1):
        rows.append(rows[-1] @ a)
    return int(np.linalg.matrix_rank(np.vstack(rows)))


def verify_design(
    sys: posys.PositiveLinearSystem,
    trig: TriggerConfig,
    design: ObserverDesign,
    tol: float = 1e-9,
) -> DesignReport:
    """Re-derive every design condition at the stored (P, Q, W, lam).

    Checks: A - L C Metzler; L >= 0; the block condition negative definite;
    the elementwise condition nonnegative; the augmented block-diagonal
    matrix diag(A, A - L C) Hurwitz via the Metzler certificate on each
    block; and (diagnostic only) observability of (A, C).
    """
    a, c = sys.A, sys.C
    if design.L.shape != (sys.n, sys.r):
        raise ValueError(
            f"design gain shape {design.L.shape} does not match system ({sys.n},{sys.r})"
        )
    alc = a - design.L @ c
    metzler_alc = posys.is_metzler(alc, tol)
    l_nonneg = bool(np.min(design.L) >= -tol)
    block, elem = design_blocks(
        a, c, trig.threshold_coeff, design.lam, design.P_diag, design.Q_diag, design.W
    )
    lmi_pass = matcore.is_negative_definite(block, 0.0)
    vals, _ = matcore.sym_eigen(block)
    elem_min = float(np.min(elem))
    elementwise_pass = elem_min >= -tol

    def _hurwitz(mat) -> bool:
        try:
            ok, _ = posys.is_hurwitz_metzler(mat, tol)
        except ValueError:
            return False
        return ok

    augmented_hurwitz = _hurwitz(a) and _hurwitz(alc)
    return DesignReport(
        metzler_ALC=metzler_alc,
        L_nonneg=l_nonneg,
        lmi_pass=lmi_pass,
        elementwise_pass=elementwise_pass,
        augmented_hurwitz=augmented_hurwitz,
        observability_ok=observability_rank(a, c) == sys.n,
        lmi_margin=float(vals[-1]),
        elementwise_margin=elem_min,
    )
