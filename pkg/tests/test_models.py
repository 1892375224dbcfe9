import numpy as np
import pytest

from posobs import models, posys


class TestExample1:
    def test_matrices(self):
        sysv = models.example1()
        np.testing.assert_array_equal(sysv.A, [[-1.0, 3.0], [0.0, -1.0]])
        np.testing.assert_array_equal(sysv.C, [[1.0, 0.0]])
        assert sysv.B is None and sysv.equilibrium is None

    def test_repeated_calls_identical_and_independent(self):
        s1, s2 = models.example1(), models.example1()
        np.testing.assert_array_equal(s1.A, s2.A)
        s1.A[0, 0] = 99.0
        assert s2.A[0, 0] == -1.0


class TestTankParameters:
    def test_benchmark_values(self):
        p = models.three_tank_benchmark()
        assert p.a == pytest.approx(0.25)
        assert p.w == pytest.approx(0.035)
        np.testing.assert_allclose(p.H0, [0.1425, 0.1007, 0.15])
        np.testing.assert_allclose(p.K, [[0.1983e-3, 0.0765e-3, 0.0496e-3]])

    def test_steady_state_balance(self):
        # valve coefficients are SI-consistent: C_i H_i^alpha_i matches Q0
        p = models.three_tank_benchmark()
        for coeff, level, expo in [
            (p.C1, p.H0[0], p.alpha1),
            (p.C2, p.H0[1], p.alpha2),
            (p.C3, p.H0[2], p.alpha3),
        ]:
            assert coeff * level**expo == pytest.approx(p.Q0, rel=2e-3)

    def test_invalid_parameters_rejected(self):
        good = models.three_tank_benchmark().to_json_dict()
        bad = dict(good, H20=0.40)  # above H2max
        with pytest.raises(ValueError, match="H2max"):
            models.tank_parameters_from_json_dict(bad)
        bad = dict(good, R=0.15)  # circular section becomes imaginary
        with pytest.raises(ValueError, match="R"):
            models.tank_parameters_from_json_dict(bad)
        bad = dict(good, alpha1=1.5)
        with pytest.raises(ValueError, match="alpha1"):
            models.tank_parameters_from_json_dict(bad)
        bad = dict(good)
        del bad["C2"]
        with pytest.raises(ValueError, match="C2"):
            models.tank_parameters_from_json_dict(bad)

    def test_json_round_trip(self):
        p = models.three_tank_benchmark()
        back = models.tank_parameters_from_json_dict(p.to_json_dict())
        assert back.a == p.a and back.C3 == p.C3
        np.testing.assert_array_equal(back.H0, p.H0)
        np.testing.assert_array_equal(back.K, p.K)

    def test_cm_units_block(self):
        doc = models.three_tank_benchmark().to_json_dict()
        doc_cm = dict(doc)
        for name in ("a", "b", "c", "w", "R", "H2max", "H3max"):
            doc_cm[name] = doc[name] * 100.0
        doc_cm["units"] = {"geometry": "cm", "levels": "m", "flow": "m3/s"}
        p_cm = models.tank_parameters_from_json_dict(doc_cm)
        p = models.three_tank_benchmark()
        assert p_cm.a == pytest.approx(p.a, rel=1e-15)
        assert p_cm.R == pytest.approx(p.R, rel=1e-15)


class TestTankAreas:
    def test_benchmark_areas(self):
        p = models.three_tank_benchmark()
        areas = models.tank_areas(p, p.H0)
        assert areas[0] == pytest.approx(8.75e-3, rel=1e-12)
        assert areas[1] == pytest.approx(
            0.035 * (0.10 + 0.348 * 0.1007 / 0.35), rel=1e-12
        )
        assert areas[1] == pytest.approx(7.004e-3, abs=5e-7)
        assert areas[2] == pytest.approx(
            0.035 * np.sqrt(0.364**2 - (0.35 - 0.15) ** 2), rel=1e-12
        )
        assert areas[2] == pytest.approx(1.0645e-2, abs=5e-7)

    def test_geometric_infeasibility(self):
        p = models.three_tank_benchmark()
        with pytest.raises(ValueError, match="circular"):
            models.tank_areas(p, np.array([0.1, 0.1, -0.05]))


class TestTankLinearize:
    def test_entry_oracles(self):
        # closed-form hand evaluation of the two leading entries
        p = models.three_tank_benchmark()
        m = models.tank_linearize(p)
        a11 = -1.0057e-4 * 0.5 / (8.75e-3 * np.sqrt(0.1425))
        assert m.A[0, 0] == pytest.approx(a11, rel=1e-12)
        assert m.A[0, 0] == pytest.approx(-1.522e-2, abs=5e-6)
        beta2 = 0.035 * (0.10 + 0.348 * 0.1007 / 0.35)
        a21 = 1.0057e-4 * 0.5 / (beta2 * np.sqrt(0.1425))
        assert m.A[1, 0] == pytest.approx(a21, rel=1e-12)
        assert m.A[1, 0] == pytest.approx(1.902e-2, abs=5e-6)

    def test_sign_structure_and_metzler(self):
        m = models.tank_linearize(models.three_tank_benchmark())
        assert posys.is_metzler(m.A, 0.0)
        assert np.all(np.diag(m.A) < 0.0)
        assert m.A[1, 0] > 0.0 and m.A[2, 1] > 0.0
        for i, j in [(0, 1), (0, 2), (1, 2), (2, 0)]:
            assert m.A[i, j] == 0.0
        np.testing.assert_array_equal(m.C, [[0.0, 1.0, 0.0]])
        assert m.B[0, 0] == pytest.approx(1.0 / m.areas[0], rel=1e-15)
        assert m.B[1, 0] == 0.0 and m.B[2, 0] == 0.0

    def test_unit_self_consistency(self):
        # rebuild in centimeters (C_i rescaled by 1e6 / 100^alpha) and compare
        p = models.three_tank_benchmark()
        factor = 1e6 / 100.0**0.5
        p_cm = models.TankParameters(
            a=p.a * 100, b=p.b * 100, c=p.c * 100, w=p.w * 100, R=p.R * 100,
            H2max=p.H2max * 100, H3max=p.H3max * 100,
            C1=p.C1 * factor, C2=p.C2 * factor, C3=p.C3 * factor,
            alpha1=0.5, alpha2=0.5, alpha3=0.5,
            H0=p.H0 * 100, Q0=p.Q0 * 1e6,
        )
        a_m = models.tank_linearize(p).A
        a_cm = models.tank_linearize(p_cm).A
        np.testing.assert_allclose(a_cm, a_m, rtol=1e-12)

    def test_to_system(self):
        sysv = models.tank_linearize(models.three_tank_benchmark()).to_system()
        assert sysv.n == 3 and sysv.r == 1 and sysv.m == 1
        np.testing.assert_allclose(sysv.equilibrium, [0.1425, 0.1007, 0.15])


class TestTankClosedLoop:
    def test_zero_gain(self):
        m = models.tank_linearize(models.three_tank_benchmark())
        a_cl, metzler = models.tank_closed_loop(m, np.zeros((1, 3)))
        np.testing.assert_array_equal(a_cl, m.A)
        assert metzler

    def test_benchmark_gain_breaks_metzler(self):
        p = models.three_tank_benchmark()
        m = models.tank_linearize(p)
        a_cl, metzler = models.tank_closed_loop(m, p.K)
        assert not metzler
        assert a_cl[0, 1] == pytest.approx(-0.0765e-3 / 8.75e-3, rel=1e-12)
        assert a_cl[0, 0] == pytest.approx(m.A[0, 0] - 0.1983e-3 / 8.75e-3, rel=1e-12)

    def test_gain_shape_rejected(self):
        m = models.tank_linearize(models.three_tank_benchmark())
        with pytest.raises(ValueError):
            models.tank_closed_loop(m, np.zeros((2, 3)))
