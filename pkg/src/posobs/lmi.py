"""Feasibility solver for small dense linear-matrix-inequality problems.

A problem consists of a decision vector z inside a box, affine symmetric
matrix constraints

    F_k(z) = S_k0 + sum_i z_i S_ki    required lambda_max(F_k) <= -margin_k

and affine elementwise constraints

    E_j(z) = T_j0 + sum_i z_i T_ji    required min entry(E_j) >= -slack_j.

solve() runs a projected subgradient method on the convex merit

    f(z) = max_k,j ( lambda_max(F_k(z)) + margin_k , -min(E_j(z)) - slack_j )

using Polyak target-level steps with an adaptive level gap, and declares the
problem feasible as soon as f(z) <= 0. Infeasibility is only ever reported
with an analytic certificate from interval bound propagation over the box;
exhausting the iteration budget yields "undetermined", never a negative
claim the method cannot back up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matcore

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class SolveOptions:
    """Solver knobs. Defaults quantify the strict inequalities of the model."""

    max_iters: int = 50_000
    definiteness_margin: float = 1e-6
    elementwise_slack: float = 1e-9
    stall_limit: int = 120
    level_gap_floor: float = 1e-14


@dataclass(frozen=True)
class MatrixConstraint:
    """Affine symmetric-matrix constraint with a negative-definiteness sense."""

    constant: np.ndarray          # (k, k), symmetric
    coefficients: np.ndarray      # (dim, k, k), each slice symmetric
    margin: float | None = None   # None -> SolveOptions.definiteness_margin


@dataclass(frozen=True)
class ElementwiseConstraint:
    """Affine matrix constraint required elementwise >= -slack."""

    constant: np.ndarray          # (p, q)
    coefficients: np.ndarray      # (dim, p, q)
    slack: float | None = None    # None -> SolveOptions.elementwise_slack


@dataclass
class LmiFeasibilityProblem:
    dim: int
    matrix_constraints: list[MatrixConstraint]
    elementwise_constraints: list[ElementwiseConstraint]
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        self.lower_bounds = matcore.as_vector(self.lower_bounds, "lower_bounds")
        self.upper_bounds = matcore.as_vector(self.upper_bounds, "upper_bounds")
        if self.lower_bounds.shape != (self.dim,) or self.upper_bounds.shape != (self.dim,):
            raise ValueError("bounds must have length dim")
        if np.any(self.lower_bounds > self.upper_bounds):
            raise ValueError("lower_bounds must be <= upper_bounds elementwise")
        for idx, con in enumerate(self.matrix_constraints):
            self._check_stack(con, idx, symmetric=True)
        for idx, con in enumerate(self.elementwise_constraints):
            self._check_stack(con, idx, symmetric=False)

    def _check_stack(self, con, idx: int, symmetric: bool) -> None:
        name = f"constraint {idx}"
        const = np.asarray(con.constant, dtype=float)
        coeffs = np.asarray(con.coefficients, dtype=float)
        if const.ndim != 2:
            raise ValueError(f"{name}: constant must be a matrix")
        if coeffs.shape != (self.dim, *const.shape):
            raise ValueError(
                f"{name}: coefficients must have shape (dim, *constant.shape), "
                f"got {coeffs.shape}"
            )
        if not (np.all(np.isfinite(const)) and np.all(np.isfinite(coeffs))):
            raise ValueError(f"{name}: entries must be finite")
        if symmetric:
            matcore.symmetrize(const, f"{name} constant")
            for i in range(self.dim):
                matcore.symmetrize(coeffs[i], f"{name} coefficient {i}")
        object.__setattr__(con, "constant", const)
        object.__setattr__(con, "coefficients", coeffs)


@dataclass
class LmiOutcome:
    status: str                 # FEASIBLE | INFEASIBLE | UNDETERMINED
    z: np.ndarray | None
    iterations: int
    worst_violation: float
    certificate: str | None = None


@dataclass
class SolutionCheck:
    passed: bool
    matrix_margins: list[float]       # lambda_max of each matrix constraint
    elementwise_margins: list[float]  # min entry of each elementwise constraint
    bounds_ok: bool


def evaluate_matrix_constraint(problem: LmiFeasibilityProblem, k: int, z) -> np.ndarray:
    """constant + sum_i z_i coefficient_i for matrix constraint k."""
    zv = matcore.as_vector(z, "z")
    if zv.shape != (problem.dim,):
        raise ValueError(f"z must have length {problem.dim}")
    if not 0 <= k < len(problem.matrix_constraints):
        raise IndexError(f"matrix constraint index {k} out of range")
    con = problem.matrix_constraints[k]
    return con.constant + np.tensordot(zv, con.coefficients, axes=1)


def evaluate_elementwise_constraint(problem: LmiFeasibilityProblem, j: int, z) -> np.ndarray:
    zv = matcore.as_vector(z, "z")
    if zv.shape != (problem.dim,):
        raise ValueError(f"z must have length {problem.dim}")
    if not 0 <= j < len(problem.elementwise_constraints):
        raise IndexError(f"elementwise constraint index {j} out of range")
    con = problem.elementwise_constraints[j]
    return con.constant + np.tensordot(zv, con.coefficients, axes=1)


def _resolved_margins(problem, opts) -> tuple[list[float], list[float]]:
    margins = [
        con.margin if con.margin is not None else opts.definiteness_margin
        for con in problem.matrix_constraints
    ]
    slacks = [
        con.slack if con.slack is not None else opts.elementwise_slack
        for con in problem.elementwise_constraints
    ]
    return margins, slacks


def _merit_and_subgradient(problem, z, margins, slacks):
    """Worst constraint merit and one subgradient of it at z."""
    best = -np.inf
    grad = np.zeros(problem.dim)
    for con, margin in zip(problem.matrix_constraints, margins):
        mat = con.constant + np.tensordot(z, con.coefficients, axes=1)
        vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
        merit = vals[-1] + margin
        if merit > best:
            best = merit
            v = vecs[:, -1]
            grad = np.einsum("j,ijk,k->i", v, con.coefficients, v)
    for con, slack in zip(problem.elementwise_constraints, slacks):
        mat = con.constant + np.tensordot(z, con.coefficients, axes=1)
        flat = np.argmin(mat)
        merit = -mat.flat[flat] - slack
        if merit > best:
            best = merit
            r, c = np.unravel_index(flat, mat.shape)
            grad = -con.coefficients[:, r, c]
    return best, grad


def _certify_infeasible(problem, margins, slacks) -> str | None:
    """Interval-bound certificate of infeasibility over the box, or None.

    Three sound checks: (1) a constraint that is constant over the box is
    evaluated exactly; (2) a matrix constraint whose some diagonal entry has
    a box-minimum above -margin cannot reach negative definiteness, since
    lambda_max >= any diagonal entry; (3) an elementwise constraint with an
    entry whose box-maximum is below -slack can never satisfy its sense.
    """
    lb, ub = problem.lower_bounds, problem.upper_bounds
    for k, (con, margin) in enumerate(zip(problem.matrix_constraints, margins)):
        coeffs = con.coefficients
        if not np.any(coeffs * (ub - lb)[:, None, None]):
            fixed = con.constant + np.tensordot(lb, coeffs, axes=1)
            top = np.linalg.eigvalsh(0.5 * (fixed + fixed.T))[-1]
            if top > -margin:
                return (
                    f"matrix constraint {k} is constant over the box with "
                    f"lambda_max {top:.6g} > {-margin:.6g}"
                )
            continue
        diag_coeffs = np.einsum("ijj->ij", coeffs)       # (dim, k)
        diag_min = (
            np.diag(con.constant)
            + np.minimum(diag_coeffs.T * lb, diag_coeffs.T * ub).sum(axis=1)
        )
        worst = np.max(diag_min)
        if worst > -margin:
            d = int(np.argmax(diag_min))
            return (
                f"matrix constraint {k}: diagonal entry {d} is >= "
                f"{worst:.6g} > {-margin:.6g} everywhere in the box"
            )
    for j, (con, slack) in enumerate(zip(problem.elementwise_constraints, slacks)):
        coeffs = con.coefficients
        entry_max = con.constant + np.maximum(
            coeffs * lb[:, None, None], coeffs * ub[:, None, None]
        ).sum(axis=0)
        if np.min(entry_max) < -slack:
            r, c = np.unravel_index(int(np.argmin(entry_max)), entry_max.shape)
            return (
                f"elementwise constraint {j}: entry ({r},{c}) is <= "
                f"{np.min(entry_max):.6g} < {-slack:.6g} everywhere in the box"
            )
    return None


def solve(problem: LmiFeasibilityProblem, opts: SolveOptions | None = None) -> LmiOutcome:
    """Phase-1 feasibility search. Deterministic, seed-free.

    Returns Feasible(z) only when every constraint holds at z with its margin
    and z is inside the box; Infeasible only with an analytic certificate;
    Undetermined on budget exhaustion.
    """
    opts = opts or SolveOptions()
    margins, slacks = _resolved_margins(problem, opts)

    cert = _certify_infeasible(problem, margins, slacks)
    if cert is not None:
        return LmiOutcome(INFEASIBLE, None, 0, np.inf, certificate=cert)

    lb, ub = problem.lower_bounds, problem.upper_bounds
    z = np.clip(np.ones(problem.dim), lb, ub)
    f, g = _merit_and_subgradient(problem, z, margins, slacks)
    f_best, z_best = f, z.copy()
    if f_best <= 0.0:
        return LmiOutcome(FEASIBLE, z_best, 0, f_best)

    gap = max(0.1 * abs(f_best), 1e-6)
    stall = 0
    for it in range(1, opts.max_iters + 1):
        gn2 = float(g @ g)
        if gn2 <= 0.0:
            break  # flat merit: no direction to move in
        level = f_best - gap
        step = (f - level) / gn2
        z = np.clip(z - step * g, lb, ub)
        f, g = _merit_and_subgradient(problem, z, margins, slacks)
        if f < f_best - 1e-14 * max(1.0, abs(f_best)):
            f_best, z_best = f, z.copy()
            stall = 0
        else:
            stall += 1
            if stall >= opts.stall_limit:
                gap *= 0.5
                stall = 0
                z = z_best.copy()
                f, g = _merit_and_subgradient(problem, z, margins, slacks)
                if gap < opts.level_gap_floor * max(1.0, abs(f_best)):
                    break
        if f_best <= 0.0:
            return LmiOutcome(FEASIBLE, z_best, it, f_best)
    return LmiOutcome(UNDETERMINED, None, opts.max_iters, f_best)


def check_solution(problem: LmiFeasibilityProblem, z, report_tol: float = 1e-9,
                   opts: SolveOptions | None = None) -> SolutionCheck:
    """Independent evaluation of every constraint at z.

    Reports lambda_max per matrix constraint and min entry per elementwise
    constraint; passes iff each is within its sense plus report_tol and the
    bounds hold to the same tolerance.
    """
    opts = opts or SolveOptions()
    zv = matcore.as_vector(z, "z")
    if zv.shape != (problem.dim,):
        raise ValueError(f"z must have length {problem.dim}")
    margins, slacks = _resolved_margins(problem, opts)
    mat_margins: list[float] = []
    ok = True
    for k, margin in enumerate(margins):
        mat = evaluate_matrix_constraint(problem, k, zv)
        vals, _ = matcore.sym_eigen(mat)
        top = float(vals[-1])
        mat_margins.append(top)
        ok &= top <= -margin + report_tol
    elem_margins: list[float] = []
    for j, slack in enumerate(slacks):
        mat = evaluate_elementwise_constraint(problem, j, zv)
        low = float(np.min(mat))
        elem_margins.append(low)
        ok &= low >= -slack - report_tol
    bounds_ok = bool(
        np.all(zv >= problem.lower_bounds - report_tol)
        and np.all(zv <= problem.upper_bounds + report_tol)
    )
    ok &= bounds_ok
    return SolutionCheck(bool(ok), mat_margins, elem_margins, bounds_ok)


def problem_to_json_dict(problem: LmiFeasibilityProblem) -> dict:
    """Serialize to the structured dump format shared with the CLI."""
    return {
        "dim": problem.dim,
        "matrix_constraints": [
            {
                "constant": con.constant.tolist(),
                "coefficients": con.coefficients.tolist(),
                "margin": con.margin,
            }
            for con in problem.matrix_constraints
        ],
        "elementwise_constraints": [
            {
                "constant": con.constant.tolist(),
                "coefficients": con.coefficients.tolist(),
                "slack": con.slack,
            }
            for con in problem.elementwise_constraints
        ],
        "lower_bounds": problem.lower_bounds.tolist(),
        "upper_bounds": problem.upper_bounds.tolist(),
    }


def problem_from_json_dict(doc: dict) -> LmiFeasibilityProblem:
    return LmiFeasibilityProblem(
        dim=int(doc["dim"]),
        matrix_constraints=[
            MatrixConstraint(
                constant=np.asarray(c["constant"], dtype=float),
                coefficients=np.asarray(c["coefficients"], dtype=float),
                margin=c.get("margin"),
            )
            for c in doc["matrix_constraints"]
        ],
        elementwise_constraints=[
            ElementwiseConstraint(
                constant=np.asarray(c["constant"], dtype=float),
                coefficients=np.asarray(c["coefficients"], dtype=float),
                slack=c.get("slack"),
            )
            for c in doc["elementwise_constraints"]
        ],
        lower_bounds=np.asarray(doc["lower_bounds"], dtype=float),
        upper_bounds=np.asarray(doc["upper_bounds"], dtype=float),
    )
