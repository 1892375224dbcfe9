import json

import numpy as np
import pytest
from scipy.linalg import expm

from posobs import etsim, models, synth

A_EX1 = np.array([[-1.0, 3.0], [0.0, -1.0]])
EX1_NORM = float(np.sqrt((11.0 + np.sqrt(117.0)) / 2.0))


def zero_gain_design(n=2, r=1, lam=2.0):
    return synth.ObserverDesign(
        L=np.zeros((n, r)), P_diag=np.ones(n), Q_diag=np.ones(n),
        W=np.zeros((n, r)), lam=lam, lmi_margin=-1.0, elementwise_margin=0.0,
    )


@pytest.fixture(scope="module")
def beta25_design(example1_system):
    # nontrivial verified design for the positivity-regime runs
    trig = synth.TriggerConfig(0.3, 2.5)
    design = synth.synthesize(example1_system, trig, lambda_grid=[2.6341])
    assert synth.verify_design(example1_system, trig, design).all_pass
    return design


@pytest.fixture(scope="module")
def beta25_trace(example1_system, beta25_design):
    cfg = etsim.SimulationConfig(
        x0=np.array([1.2, 1.8]), xhat0=np.array([2.0, 2.0]),
        horizon=20.0, step=1e-3,
    )
    trig = synth.TriggerConfig(0.3, 2.5)
    return etsim.simulate(example1_system, beta25_design, trig, cfg)


class TestTriggerViolated:
    def test_fresh_sample_not_violated(self):
        trig = synth.TriggerConfig(0.3, 1.5)
        y = np.array([2.0])
        eps = (trig.beta - 1.0) * y
        assert not etsim.trigger_violated(eps, y, trig)

    def test_boundary_is_violated(self):
        trig = synth.TriggerConfig(0.3, 1.5)
        y = np.array([2.0, 0.5])
        eps = trig.threshold_coeff * y
        assert etsim.trigger_violated(eps, y, trig)

    def test_zero_output_violated(self):
        trig = synth.TriggerConfig(0.3, 1.5)
        assert etsim.trigger_violated(np.zeros(1), np.zeros(1), trig)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            etsim.trigger_violated(np.zeros(2), np.zeros(1), synth.TriggerConfig(0.3, 1.5))


class TestMinIetBound:
    @pytest.mark.parametrize(
        "alpha,published",
        [(0.3, 0.0699), (0.5, 0.1009), (0.9, 0.1434), (1.0, 0.1514)],
    )
    def test_published_bounds(self, alpha, published):
        assert etsim.min_iet_bound(A_EX1, alpha) == pytest.approx(published, abs=5e-4)

    def test_formula(self):
        assert etsim.min_iet_bound(A_EX1, 0.3) == pytest.approx(
            0.3 / (1.3 * EX1_NORM), rel=1e-12
        )

    def test_large_alpha_limit(self):
        assert etsim.min_iet_bound(A_EX1, 1e9) == pytest.approx(1.0 / EX1_NORM, rel=1e-6)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError):
            etsim.min_iet_bound(np.zeros((2, 2)), 0.5)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ValueError):
            etsim.min_iet_bound(A_EX1, 0.0)


class TestIetCurve:
    def test_published_row(self):
        curve = etsim.iet_curve(A_EX1, [0.3, 0.5, 0.9, 1.0])
        bounds = [b for _, b in curve]
        np.testing.assert_allclose(bounds, [0.0699, 0.1009, 0.1434, 0.1514], atol=5e-4)

    def test_sorted_and_increasing(self):
        curve = etsim.iet_curve(A_EX1, [1.0, 0.3, 0.9, 0.5])
        alphas = [a for a, _ in curve]
        bounds = [b for _, b in curve]
        assert alphas == sorted(alphas)
        assert all(b2 > b1 for b1, b2 in zip(bounds, bounds[1:]))

    def test_singleton(self):
        assert len(etsim.iet_curve(A_EX1, [0.3])) == 1

    def test_norm_homogeneity(self):
        one = etsim.iet_curve(A_EX1, [0.5])[0][1]
        doubled = etsim.iet_curve(2.0 * A_EX1, [0.5])[0][1]
        assert doubled == pytest.approx(0.5 * one, rel=1e-12)


class TestSimulationConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            etsim.SimulationConfig(x0=np.zeros(2), horizon=0.0, step=0.1)
        with pytest.raises(ValueError):
            etsim.SimulationConfig(x0=np.zeros(2), horizon=1.0, step=2.0)
        with pytest.raises(ValueError):
            etsim.SimulationConfig(x0=np.zeros(2), horizon=1.0, step=0.1,
                                   event_time_tol=0.5)

    def test_default_event_tol(self):
        cfg = etsim.SimulationConfig(x0=np.zeros(2), horizon=1.0, step=0.1)
        assert cfg.resolved_event_time_tol == pytest.approx(1e-4)


class TestSimulateBasics:
    def test_error_equilibrium_with_zero_gain(self, example1_system):
        # e(0)=0 and L=0: the error dynamics have no forcing, e stays at 0
        cfg = etsim.SimulationConfig(
            x0=np.array([1.2, 1.8]), xhat0=np.array([1.2, 1.8]),
            horizon=5.0, step=1e-3,
        )
        trace = etsim.simulate(
            example1_system, zero_gain_design(), synth.TriggerConfig(0.3, 1.5), cfg
        )
        assert np.max(np.abs(trace.e)) <= 1e-12

    def test_zero_state_with_floor(self, example1_system):
        cfg = etsim.SimulationConfig(
            x0=np.zeros(2), xhat0=np.zeros(2), horizon=1.0, step=1e-2,
            output_floor=1e-9,
        )
        trace = etsim.simulate(
            example1_system, zero_gain_design(), synth.TriggerConfig(0.3, 1.5), cfg
        )
        assert trace.transmissions == 1
        v, _ = etsim.lyapunov_trace(trace, zero_gain_design())
        assert np.max(np.abs(v)) == 0.0

    def test_zero_state_without_floor_aborts(self, example1_system):
        cfg = etsim.SimulationConfig(
            x0=np.zeros(2), xhat0=np.zeros(2), horizon=1.0, step=1e-2,
        )
        with pytest.raises(etsim.SimulationAbortedError, match="output_floor"):
            etsim.simulate(
                example1_system, zero_gain_design(), synth.TriggerConfig(0.3, 1.5), cfg
            )

    def test_divergent_plant_aborts(self):
        sysv = models.posys.PositiveLinearSystem(A=[[5.0]], C=[[1.0]])
        cfg = etsim.SimulationConfig(x0=np.array([1.0]), horizon=200.0, step=0.5,
                                     xhat0=np.array([1.0]))
        with pytest.raises(etsim.SimulationAbortedError, match="non-finite"):
            etsim.simulate(sysv, zero_gain_design(1, 1), synth.TriggerConfig(0.3, 1.5), cfg)

    def test_dimension_checks(self, example1_system):
        cfg = etsim.SimulationConfig(x0=np.zeros(3), horizon=1.0, step=0.1)
        with pytest.raises(ValueError):
            etsim.simulate(example1_system, zero_gain_design(),
                           synth.TriggerConfig(0.3, 1.5), cfg)
        cfg = etsim.SimulationConfig(x0=np.zeros(2), horizon=1.0, step=0.1,
                                     feedback_gain=np.ones((1, 2)))
        with pytest.raises(ValueError, match="input matrix"):
            etsim.simulate(example1_system, zero_gain_design(),
                           synth.TriggerConfig(0.3, 1.5), cfg)


class TestTraceStructure:
    def test_events_and_rows(self, beta25_trace):
        trace = beta25_trace
        event_times = [ev.t for ev in trace.events]
        assert event_times[0] == 0.0
        assert all(t2 > t1 for t1, t2 in zip(event_times, event_times[1:]))
        assert trace.iets.shape[0] == trace.transmissions - 1
        assert np.all(trace.iets > 0.0)
        # e column is exactly xhat - x
        assert np.max(np.abs(trace.e - (trace.xhat - trace.x))) <= 1e-12
        # event rows flagged consistently with the event list
        flagged = trace.times[trace.event_flags == 1]
        np.testing.assert_allclose(flagged, event_times, atol=1e-12)

    def test_trigger_boundary_at_events(self, beta25_trace):
        # localized events sit on the violation surface within the bisection
        # residual: |g| <= (local slope) * event_time_tol, generously bounded
        for ev in beta25_trace.events[1:]:
            assert ev.residual >= 0.0
            assert ev.residual <= 1e-4

    def test_fresh_sample_reset(self, beta25_trace):
        # right after each event the held sample makes eps = (beta-1) y(t_k)
        beta = 2.5
        for ev in beta25_trace.events[1:]:
            idx = np.searchsorted(beta25_trace.times, ev.t)
            assert beta25_trace.times[idx] == pytest.approx(ev.t, abs=1e-12)
            # row after the event row uses the refreshed sample
            eps_next = beta25_trace.eps[idx + 1]
            y_next = beta25_trace.y[idx + 1]
            np.testing.assert_allclose(
                eps_next, beta * ev.y - y_next, atol=1e-12
            )

    def test_zeno_exclusion(self, example1_system, beta25_trace):
        report = etsim.zeno_report(beta25_trace, example1_system.A, 0.3, 1e-6)
        assert report.satisfied
        assert report.min_observed_iet >= report.bound

    def test_lyapunov_initial_value(self, example1_system, published_design):
        # V(0) = 1.2^2 p1 + 1.8^2 p2 + 0.8^2 q1 + 0.2^2 q2 at the published P, Q
        cfg = etsim.SimulationConfig(
            x0=np.array([1.2, 1.8]), xhat0=np.array([2.0, 2.0]),
            horizon=0.1, step=1e-3,
        )
        trace = etsim.simulate(
            example1_system, published_design, synth.TriggerConfig(0.3, 1.5), cfg
        )
        v, _ = etsim.lyapunov_trace(trace, published_design)
        expected = (
            1.2**2 * 0.3655 + 1.8**2 * 1.1736
            + 0.8**2 * 0.4056 + 0.2**2 * 0.9079
        )
        assert v[0] == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(4.624684, abs=1e-6)


class TestPositivity:
    def test_ordered_initialization_all_pass(self, beta25_trace):
        audit = etsim.positivity_audit(beta25_trace)
        assert audit.x_nonneg and audit.xhat_nonneg
        assert audit.e_nonneg and audit.eps_nonneg

    def test_underestimating_observer_flags_error_sign(self, example1_system, beta25_design):
        cfg = etsim.SimulationConfig(
            x0=np.array([1.2, 1.8]), xhat0=np.zeros(2), horizon=1.0, step=1e-3,
        )
        trace = etsim.simulate(
            example1_system, beta25_design, synth.TriggerConfig(0.3, 2.5), cfg
        )
        audit = etsim.positivity_audit(trace)
        assert not audit.e_nonneg
        assert audit.worst["e"] < 0.0


class TestLyapunovMonotone:
    def test_monotone_on_verified_run(self, beta25_trace, beta25_design):
        v, monotone = etsim.lyapunov_trace(beta25_trace, beta25_design)
        assert monotone
        assert v[-1] < v[0] * 1e-6


class TestSavings:
    def make_trace(self, horizon, events):
        # minimal hand-built trace for the counting arithmetic
        times = np.array([0.0, horizon])
        zeros = np.zeros((2, 1))
        return etsim.SimulationTrace(
            times=times, x=zeros, xhat=zeros, e=zeros, y=zeros, yhat=zeros,
            eps=zeros, event_flags=np.array([1, 0]),
            events=[etsim.EventRecord(k, 0.0, np.zeros(1), None, None)
                    for k in range(events)],
            iets=np.zeros(max(events - 1, 0)), lyapunov=None,
            transmissions=events, min_epsilon_seen=0.0,
        )

    def test_published_reference_numbers(self):
        report = etsim.savings_report(self.make_trace(400.0, 85), 1.0)
        assert report.periodic_count == 400
        assert report.savings_pct == pytest.approx(78.75, abs=1e-12)

    def test_no_savings(self):
        report = etsim.savings_report(self.make_trace(400.0, 400), 1.0)
        assert report.savings_pct == 0.0

    def test_formula(self):
        report = etsim.savings_report(self.make_trace(400.0, 10), 1.0)
        assert report.savings_pct == pytest.approx(97.5)

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            etsim.savings_report(self.make_trace(400.0, 10), 0.0)
        with pytest.raises(ValueError):
            etsim.savings_report(self.make_trace(400.0, 10), 1000.0)


class TestEventCountTrend:
    def test_nonincreasing_in_alpha(self, example1_system):
        counts = []
        for alpha in [0.3, 0.5, 0.9, 1.0]:
            cfg = etsim.SimulationConfig(
                x0=np.array([1.2, 1.8]), xhat0=np.array([2.0, 2.0]),
                horizon=10.0, step=5e-3,
            )
            trace = etsim.simulate(
                example1_system, zero_gain_design(),
                synth.TriggerConfig(alpha, 1.5), cfg,
            )
            counts.append(trace.transmissions)
        assert counts == sorted(counts, reverse=True)
        assert counts[0] > counts[-1]


class TestIntegrationOrder:
    def test_step_halving_vs_matrix_exponential(self, example1_system, published_design):
        # event-free sub-case: large beta as specified, horizon inside the
        # first inter-event gap; reference is the exact affine-LTI solution
        trig = synth.TriggerConfig(0.3, 1e6)
        x0 = np.array([1.2, 1.8])
        xhat0 = np.array([2.0, 2.0])
        a, c, gain = example1_system.A, example1_system.C, published_design.L
        big = np.block([[a, np.zeros((2, 2))], [np.zeros((2, 2)), a - gain @ c]])
        forcing = np.concatenate([np.zeros(2), gain @ (trig.beta * (c @ x0))])
        aug = np.zeros((5, 5))
        aug[:4, :4] = big
        aug[:4, 4] = forcing
        horizon = 2.0
        exact = (expm(aug * horizon) @ np.concatenate([x0, xhat0, [1.0]]))[:4]
        errs = []
        for step in (0.01, 0.005):
            cfg = etsim.SimulationConfig(x0=x0, xhat0=xhat0, horizon=horizon, step=step)
            trace = etsim.simulate(example1_system, published_design, trig, cfg)
            assert trace.transmissions == 1  # genuinely event-free
            terminal = np.concatenate([trace.x[-1], trace.xhat[-1]])
            errs.append(np.linalg.norm(terminal - exact))
        assert errs[0] / errs[1] >= 12.0


class TestExports:
    def test_csv_format(self, beta25_trace, tmp_path):
        path = tmp_path / "trace.csv"
        etsim.write_trace_csv(beta25_trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x1,x2,xhat1,xhat2,y1,eps1,event"
        assert len(lines) == beta25_trace.times.shape[0] + 1
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert first[-1] == "1"
        # 17-significant-digit cells parse back exactly
        row = lines[2].split(",")
        assert float(row[1]) == beta25_trace.x[1, 0]

    def test_events_json(self, beta25_trace, tmp_path):
        path = tmp_path / "events.json"
        etsim.write_events_json(beta25_trace, path)
        doc = json.loads(path.read_text())
        assert len(doc) == beta25_trace.transmissions
        assert doc[0]["k"] == 0 and doc[0]["t_k"] == 0.0 and doc[0]["iet"] is None
        assert set(doc[1]) == {"k", "t_k", "y_k", "iet"}
        assert doc[1]["iet"] == pytest.approx(doc[1]["t_k"] - doc[0]["t_k"])


class TestAbsoluteOutputMode:
    def test_requires_equilibrium(self, example1_system):
        cfg = etsim.SimulationConfig(
            x0=np.zeros(2), horizon=1.0, step=0.1, use_absolute_output=True
        )
        with pytest.raises(ValueError, match="equilibrium"):
            etsim.simulate(example1_system, zero_gain_design(),
                           synth.TriggerConfig(0.3, 1.5), cfg)

    def test_tank_run_shapes(self, tank_system):
        params = models.three_tank_benchmark()
        trig = synth.TriggerConfig(0.5, 1.5)
        design = synth.synthesize(tank_system, trig)
        cfg = etsim.SimulationConfig(
            x0=np.full(3, 0.01), xhat0=np.full(3, 0.05),
            horizon=40.0, step=0.05,
            feedback_gain=params.K, use_absolute_output=True,
        )
        trace = etsim.simulate(tank_system, design, trig, cfg)
        # outputs are absolute levels, nonnegative throughout
        assert np.min(trace.y) > 0.0
        # plant state tracks toward the equilibrium from below
        assert np.all(trace.x[-1] > trace.x[0])
