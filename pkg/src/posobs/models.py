"""Benchmark system constructors.

Two systems ship with the package: a 2-state academic positive system, and
the linearization of a three-tank process whose tanks have variable
cross-sections (upper tank rectangular, middle tank trapezoidal, lower tank
circular). All tank quantities are SI: lengths in meters, areas in m^2,
flows in m^3/s. The valve coefficients are SI-consistent with levels in
meters (the steady-state balance C_i * H_i^alpha_i reproduces the nominal
inflow Q0 to about 2e-4 relative).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matcore, posys

#: Factor from centimeters to meters for geometry fields declared in cm.
_CM = 0.01


def example1() -> posys.PositiveLinearSystem:
    """2-state academic benchmark: A = [[-1, 3], [0, -1]], C = [1, 0]."""
    return posys.PositiveLinearSystem(
        A=np.array([[-1.0, 3.0], [0.0, -1.0]]),
        C=np.array([[1.0, 0.0]]),
        label="example1",
    )


@dataclass(frozen=True)
class TankParameters:
    """Three-tank geometry and operating point, all in SI units.

    a, w: upper-tank footprint (length x width); b, c: trapezoid shape of the
    middle tank; R: lower-tank radius. H2max/H3max are the level ranges the
    shape formulas are written against. C1..C3 are valve coefficients and
    alpha1..alpha3 flow exponents of the outflow law C_i * H_i^alpha_i.
    H0 is the equilibrium level triple and Q0 the matching steady inflow.
    K, when present, is the 1x3 state-feedback gain on level deviations.
    """

    a: float
    b: float
    c: float
    w: float
    R: float
    H2max: float
    H3max: float
    C1: float
    C2: float
    C3: float
    alpha1: float
    alpha2: float
    alpha3: float
    H0: np.ndarray
    Q0: float
    K: np.ndarray | None = None

    def __post_init__(self):
        for name in ("a", "b", "c", "w", "R", "H2max", "H3max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")
        object.__setattr__(self, "H0", matcore.as_vector(self.H0, "H0"))
        if self.H0.shape != (3,):
            raise ValueError("H0 must have length 3")
        if np.any(self.H0 <= 0.0):
            raise ValueError("equilibrium levels must be > 0")
        if not self.H0[1] < self.H2max:
            raise ValueError("H0[1] must be below H2max")
        if not self.H0[2] < self.H3max:
            raise ValueError("H0[2] must be below H3max")
        if not self.R > self.H3max - self.H0[2]:
            raise ValueError("R must exceed H3max - H0[2] (circular section)")
        for name in ("alpha1", "alpha2", "alpha3"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.K is not None:
            k = matcore.as_matrix(self.K, "K")
            if k.shape != (1, 3):
                raise ValueError("K must be 1x3")
            object.__setattr__(self, "K", k)

    def to_json_dict(self) -> dict:
        doc = {
            "units": {"geometry": "m", "levels": "m", "flow": "m3/s"},
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "w": self.w,
            "R": self.R,
            "H2max": self.H2max,
            "H3max": self.H3max,
            "C1": self.C1,
            "C2": self.C2,
            "C3": self.C3,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "alpha3": self.alpha3,
            "H10": float(self.H0[0]),
            "H20": float(self.H0[1]),
            "H30": float(self.H0[2]),
            "Q0": self.Q0,
        }
        if self.K is not None:
            doc["K"] = self.K.ravel().tolist()
        return doc


def tank_parameters_from_json_dict(doc: dict) -> TankParameters:
    """Parse a parameter document, honoring its units block.

    The geometry group (a, b, c, w, R, H2max, H3max) may be declared in
    "cm" or "m"; levels (H10, H20, H30) likewise. Flow must be m3/s.
    """
    units = doc.get("units", {})
    geo_unit = units.get("geometry", "m")
    lvl_unit = units.get("levels", "m")
    flow_unit = units.get("flow", "m3/s")
    if geo_unit not in ("m", "cm") or lvl_unit not in ("m", "cm"):
        raise ValueError("units.geometry and units.levels must be 'm' or 'cm'")
    if flow_unit != "m3/s":
        raise ValueError("units.flow must be 'm3/s'")
    geo = _CM if geo_unit == "cm" else 1.0
    lvl = _CM if lvl_unit == "cm" else 1.0
    try:
        params = TankParameters(
            a=float(doc["a"]) * geo,
            b=float(doc["b"]) * geo,
            c=float(doc["c"]) * geo,
            w=float(doc["w"]) * geo,
            R=float(doc["R"]) * geo,
            H2max=float(doc["H2max"]) * geo,
            H3max=float(doc["H3max"]) * geo,
            C1=float(doc["C1"]),
            C2=float(doc["C2"]),
            C3=float(doc["C3"]),
            alpha1=float(doc["alpha1"]),
            alpha2=float(doc["alpha2"]),
            alpha3=float(doc["alpha3"]),
            H0=np.array([float(doc["H10"]), float(doc["H20"]), float(doc["H30"])]) * lvl,
            Q0=float(doc["Q0"]),
            K=np.asarray(doc["K"], dtype=float).reshape(1, 3) if "K" in doc else None,
        )
    except KeyError as exc:
        raise ValueError(f"missing tank parameter field: {exc}") from exc
    return params


def three_tank_benchmark(with_feedback: bool = True) -> TankParameters:
    """Published benchmark parameter set (geometry source values in cm)."""
    return TankParameters(
        a=25.0 * _CM,
        b=34.8 * _CM,
        c=10.0 * _CM,
        w=3.5 * _CM,
        R=36.4 * _CM,
        H2max=35.0 * _CM,
        H3max=35.0 * _CM,
        C1=1.0057e-4,
        C2=1.1963e-4,
        C3=9.8008e-5,
        alpha1=0.5,
        alpha2=0.5,
        alpha3=0.5,
        H0=np.array([0.1425, 0.1007, 0.15]),
        Q0=3.7958e-5,
        K=np.array([[0.1983e-3, 0.0765e-3, 0.0496e-3]]) if with_feedback else None,
    )


def tank_areas(p: TankParameters, H) -> np.ndarray:
    """Cross-sectional areas (m^2) of the three tanks at level triple H.

    beta1 = a w (rectangular), beta2 = w (c + b H2/H2max) (trapezoidal),
    beta3 = w sqrt(R^2 - (H3max - H3)^2) (circular).
    """
    h = matcore.as_vector(H, "H")
    if h.shape != (3,):
        raise ValueError("H must have length 3")
    under = p.R**2 - (p.H3max - h[2]) ** 2
    if not under > 0.0:
        raise ValueError(
            f"H3={h[2]:g} outside the circular-section range (radicand {under:g})"
        )
    return np.array(
        [
            p.a * p.w,
            p.w * (p.c + p.b * h[1] / p.H2max),
            p.w * np.sqrt(under),
        ]
    )


@dataclass(frozen=True)
class LinearizedModel:
    """Linearized three-tank dynamics about H0 (deviation coordinates)."""

    A: np.ndarray     # 3x3, 1/s
    B: np.ndarray     # 3x1, 1/m^2
    C: np.ndarray     # 1x3
    H0: np.ndarray
    areas: np.ndarray

    def to_system(self, label: str = "three-tank") -> posys.PositiveLinearSystem:
        return posys.PositiveLinearSystem(
            A=self.A, C=self.C, B=self.B, equilibrium=self.H0, label=label
        )


def tank_linearize(p: TankParameters) -> LinearizedModel:
    """Linearize the tank cascade at its equilibrium.

    Outflow of tank i is C_i H_i^alpha_i and feeds tank i+1, so the state
    matrix is lower-bidiagonal with negative diagonal (own outflow) and
    positive subdiagonal (inflow from above): Metzler by construction.
    """
    areas = tank_areas(p, p.H0)
    coeffs = np.array(
        [
            p.C1 * p.alpha1 * p.H0[0] ** (p.alpha1 - 1.0),
            p.C2 * p.alpha2 * p.H0[1] ** (p.alpha2 - 1.0),
            p.C3 * p.alpha3 * p.H0[2] ** (p.alpha3 - 1.0),
        ]
    )
    a = np.zeros((3, 3))
    a[0, 0] = -coeffs[0] / areas[0]
    a[1, 0] = coeffs[0] / areas[1]
    a[1, 1] = -coeffs[1] / areas[1]
    a[2, 1] = coeffs[1] / areas[2]
    a[2, 2] = -coeffs[2] / areas[2]
    b = np.array([[1.0 / areas[0]], [0.0], [0.0]])
    c = np.array([[0.0, 1.0, 0.0]])
    return LinearizedModel(A=a, B=b, C=c, H0=p.H0.copy(), areas=areas)


def tank_closed_loop(m: LinearizedModel, K) -> tuple[np.ndarray, bool]:
    """Effective plant matrix A - B K under u = -K h, plus its Metzler verdict.

    Level feedback through the top tank injects negative off-diagonal terms,
    so the verdict is typically False for nonzero K; callers surface it as a
    warning rather than an error.
    """
    k = matcore.as_matrix(K, "K")
    if k.shape != (m.B.shape[1], m.A.shape[0]):
        raise ValueError(f"K must be {m.B.shape[1]}x{m.A.shape[0]}")
    a_cl = m.A - m.B @ k
    return a_cl, posys.is_metzler(a_cl)
