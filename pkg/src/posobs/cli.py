"""Command-line interface.

Commands: analyze, synthesize, simulate, zeno, tank. All file interchange is
JSON (systems, designs, event logs, manifests) and CSV (traces). Exit codes:
0 success, 2 input error, 3 synthesis infeasible/undetermined, 4 simulation
aborted. Relative output paths are placed under $POSOBS_OUTPUT_DIR when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__, etsim, models, posys, synth

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SYNTH = 3
EXIT_SIM = 4

OUTPUT_DIR_ENV = "POSOBS_OUTPUT_DIR"

#: Published three-tank benchmark comparison (85 event-based vs 400 periodic
#: transmissions over 400 s), printed next to computed savings for reference.
REFERENCE_SAVINGS_PCT = 78.75


class InputError(ValueError):
    """Bad file content or inconsistent flags; maps to exit code 2."""


def _out_path(path: str) -> str:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def _write_json(doc, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _parse_vector(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError as exc:
        raise InputError(f"{name}: expected comma-separated floats, got {text!r}") from exc


def system_to_json_dict(sys_obj: posys.PositiveLinearSystem) -> dict:
    doc = {
        "label": sys_obj.label,
        "A": sys_obj.A.tolist(),
        "C": sys_obj.C.tolist(),
    }
    if sys_obj.B is not None:
        doc["B"] = sys_obj.B.tolist()
    if sys_obj.equilibrium is not None:
        doc["equilibrium"] = sys_obj.equilibrium.tolist()
    return doc


def _matrix_from_doc(doc: dict, key: str, path: str, required: bool = True):
    if key not in doc:
        if required:
            raise InputError(f"{path}: missing field '{key}'")
        return None
    value = doc[key]
    try:
        out = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(
            f"{path}: field '{key}' must be a rectangular numeric 2-d array"
        ) from exc
    if out.ndim != 2:
        raise InputError(f"{path}: field '{key}' must be a rectangular 2-d array")
    return out


def load_system_matrices(path: str):
    """Raw (label, A, B, C, equilibrium) from a system file, no Metzler gate."""
    doc = _load_json(path)
    a = _matrix_from_doc(doc, "A", path)
    c = _matrix_from_doc(doc, "C", path)
    b = _matrix_from_doc(doc, "B", path, required=False)
    eqm = None
    if doc.get("equilibrium") is not None:
        try:
            eqm = np.asarray(doc["equilibrium"], dtype=float).reshape(-1)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: field 'equilibrium' is not numeric") from exc
    if a.shape[0] != a.shape[1]:
        raise InputError(f"{path}: A must be square, got {a.shape}")
    if c.shape[1] != a.shape[0]:
        raise InputError(f"{path}: C has {c.shape[1]} columns, A is {a.shape[0]}x{a.shape[0]}")
    if b is not None and b.shape[0] != a.shape[0]:
        raise InputError(f"{path}: B has {b.shape[0]} rows, A is {a.shape[0]}x{a.shape[0]}")
    if eqm is not None and eqm.shape[0] != a.shape[0]:
        raise InputError(f"{path}: equilibrium length does not match A")
    return doc.get("label", ""), a, b, c, eqm


def load_system(path: str) -> posys.PositiveLinearSystem:
    label, a, b, c, eqm = load_system_matrices(path)
    try:
        return posys.PositiveLinearSystem(A=a, C=c, B=b, equilibrium=eqm, label=label)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_analyze(args) -> int:
    label, a, b, c, _ = load_system_matrices(args.system)
    report = posys.analyze_matrices(a, c)
    print(f"system: {label or args.system}")
    print(f"metzler: {report.metzler}")
    print(f"output_nonneg: {report.output_nonneg}")
    if b is not None:
        print(f"input_nonneg: {bool(np.min(b) >= -posys.DEFAULT_TOL)}")
    print(f"hurwitz: {report.hurwitz}")
    print(f"metzler_shift: {report.metzler_shift:.17g}")
    if report.positive_scaling_vector is not None:
        vec = ", ".join(format(v, ".17g") for v in report.positive_scaling_vector)
        print(f"positive_scaling_vector: [{vec}]")
    if args.json:
        _write_json(report.to_json_dict(), _out_path(args.json))
        print(f"wrote {args.json}")
    return EXIT_OK


def _design_doc(design: synth.ObserverDesign, trig: synth.TriggerConfig) -> dict:
    doc = design.to_json_dict()
    doc["alpha"] = trig.alpha
    doc["beta"] = trig.beta
    doc["artifact_version"] = __version__
    return doc


def _print_design_report(report: synth.DesignReport) -> None:
    print(f"  A-LC metzler: {report.metzler_ALC}")
    print(f"  L nonneg: {report.L_nonneg}")
    print(f"  block condition negative definite: {report.lmi_pass}"
          f" (lambda_max {report.lmi_margin:.6g})")
    print(f"  elementwise condition nonneg: {report.elementwise_pass}"
          f" (min entry {report.elementwise_margin:.6g})")
    print(f"  augmented matrix hurwitz: {report.augmented_hurwitz}")
    print(f"  observability (diagnostic): {report.observability_ok}")
    print(f"  all checks: {'PASS' if report.all_pass else 'FAIL'}")


def cmd_synthesize(args) -> int:
    system = load_system(args.system)
    try:
        trig = synth.TriggerConfig(alpha=args.alpha, beta=args.beta)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    grid = None
    if args.lambda_grid:
        grid = _parse_vector(args.lambda_grid, "--lambda-grid")
        if grid.size == 0 or np.any(grid <= 0):
            raise InputError("--lambda-grid must list positive values")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            design = synth.synthesize(system, trig, lambda_grid=grid)
        except synth.SynthesisError as exc:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            print(f"synthesis failed: {exc}", file=sys.stderr)
            for lam, status, worst in exc.diagnostics:
                print(f"  lam={lam:.6g}: {status} (worst merit {worst:.6g})",
                      file=sys.stderr)
            return EXIT_SYNTH
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report = synth.verify_design(system, trig, design)
    out = _out_path(args.out)
    _write_json(_design_doc(design, trig), out)
    print(f"feasible design at lambda={design.lam:.17g}")
    print(f"L = {design.L.tolist()}")
    _print_design_report(report)
    print(f"wrote {out}")
    return EXIT_OK


def load_design(path: str) -> synth.ObserverDesign:
    doc = _load_json(path)
    try:
        return synth.ObserverDesign.from_json_dict(doc)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: bad design file: {exc}") from exc


def _simulate_manifest(args) -> dict:
    """Everything needed to reproduce a simulate run, inputs embedded."""
    system_doc = _load_json(args.system)
    design_doc = _load_json(args.design)
    return {
        "artifact_version": __version__,
        "command": "simulate",
        "system": system_doc,
        "design": design_doc,
        "alpha": args.alpha,
        "beta": args.beta,
        "x0": args.x0,
        "xhat0": args.xhat0,
        "horizon": args.horizon,
        "step": args.step,
        "event_time_tol": args.event_time_tol,
        "feedback_gain": args.feedback_gain,
        "absolute_output": args.absolute_output,
        "output_floor": args.output_floor,
        "periodic_interval": args.periodic_interval,
        "trace": args.trace,
        "events": args.events,
    }


def _apply_manifest(args, doc: dict, tmpdir: str) -> None:
    """Materialize embedded inputs and replay manifest values onto args."""
    sys_path = os.path.join(tmpdir, "manifest_system.json")
    design_path = os.path.join(tmpdir, "manifest_design.json")
    _write_json(doc["system"], sys_path)
    _write_json(doc["design"], design_path)
    args.system = sys_path
    args.design = design_path
    for key in (
        "alpha", "beta", "x0", "xhat0", "horizon", "step", "event_time_tol",
        "feedback_gain", "absolute_output", "output_floor",
        "periodic_interval", "trace", "events",
    ):
        setattr(args, key, doc.get(key))


def cmd_simulate(args) -> int:
    if args.manifest:
        import tempfile

        with tempfile.TemporaryDirectory() as tmpdir:
            _apply_manifest(args, _load_json(args.manifest), tmpdir)
            return _run_simulate(args)
    return _run_simulate(args)


def _run_simulate(args) -> int:
    if args.system is None or args.design is None:
        raise InputError("system and design files are required (or --manifest)")
    for name in ("alpha", "beta", "x0", "horizon", "step"):
        if getattr(args, name) is None:
            raise InputError(f"--{name.replace('_', '-')} is required")
    system = load_system(args.system)
    design = load_design(args.design)
    try:
        trig = synth.TriggerConfig(alpha=float(args.alpha), beta=float(args.beta))
        cfg = etsim.SimulationConfig(
            x0=_parse_vector(args.x0, "--x0"),
            xhat0=_parse_vector(args.xhat0, "--xhat0") if args.xhat0 else None,
            horizon=float(args.horizon),
            step=float(args.step),
            event_time_tol=(
                float(args.event_time_tol) if args.event_time_tol is not None else None
            ),
            feedback_gain=(
                _parse_vector(args.feedback_gain, "--feedback-gain").reshape(
                    system.m, system.n
                )
                if args.feedback_gain
                else None
            ),
            use_absolute_output=bool(args.absolute_output),
            output_floor=(
                float(args.output_floor) if args.output_floor is not None else None
            ),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc

    report = synth.verify_design(system, trig, design)
    if not report.all_pass:
        print("warning: design does not pass verification for these trigger "
              "settings; simulating anyway", file=sys.stderr)

    try:
        trace = etsim.simulate(system, design, trig, cfg)
    except etsim.SimulationAbortedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIM

    zeno = etsim.zeno_report(trace, system.A, trig.alpha, cfg.resolved_event_time_tol)
    _, monotone = etsim.lyapunov_trace(trace, design)
    audit = etsim.positivity_audit(trace)
    print(f"events: {trace.transmissions}")
    min_iet = zeno.min_observed_iet
    print(f"min IET: {'n/a (single event)' if not np.isfinite(min_iet) else format(min_iet, '.17g')}")
    print(f"zeno bound: {zeno.bound:.17g} (satisfied: {zeno.satisfied})")
    print(f"lyapunov monotone: {monotone}")
    print(
        "positivity: x={} xhat={} e={} eps={}".format(
            audit.x_nonneg, audit.xhat_nonneg, audit.e_nonneg, audit.eps_nonneg
        )
    )
    if args.periodic_interval is not None:
        savings = etsim.savings_report(trace, float(args.periodic_interval))
        print(
            f"savings: {savings.savings_pct:.17g}% "
            f"({savings.event_count} events vs {savings.periodic_count} periodic; "
            f"three-tank benchmark reference: {REFERENCE_SAVINGS_PCT}%)"
        )
    if args.trace:
        path = _out_path(args.trace)
        etsim.write_trace_csv(trace, path)
        print(f"wrote {path}")
    if args.events:
        path = _out_path(args.events)
        etsim.write_events_json(trace, path)
        print(f"wrote {path}")
    if args.write_manifest:
        path = _out_path(args.write_manifest)
        _write_json(_simulate_manifest(args), path)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_zeno(args) -> int:
    system = load_system(args.system)
    try:
        curve = etsim.iet_curve(system.A, np.asarray(args.alphas, dtype=float))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    print("alpha,bound")
    lines = ["alpha,bound"]
    for alpha, bound in curve:
        row = f"{format(alpha, '.17g')},{format(bound, '.17g')}"
        print(row)
        lines.append(row)
    if args.out:
        path = _out_path(args.out)
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {path}")
    return EXIT_OK


def cmd_tank(args) -> int:
    doc = _load_json(args.params)
    try:
        params = models.tank_parameters_from_json_dict(doc)
        model = models.tank_linearize(params)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    system = model.to_system()
    print(f"areas (m^2): {model.areas.tolist()}")
    print(f"A:\n{model.A}")
    print(f"metzler: {posys.is_metzler(model.A)}")
    if params.K is not None:
        a_cl, still_metzler = models.tank_closed_loop(model, params.K)
        if not still_metzler:
            print(
                "warning: closed-loop matrix A - B K is not Metzler "
                f"(min off-diagonal {np.min(a_cl - np.diag(np.diag(a_cl))):.6g})",
                file=sys.stderr,
            )
    out = _out_path(args.out)
    _write_json(system_to_json_dict(system), out)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posobs",
        description="Event-based positive observer synthesis and simulation",
    )
    parser.add_argument("--version", action="version", version=f"posobs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="positivity/stability report for a system file")
    p.add_argument("system", help="system JSON file")
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synthesize", help="design an observer gain")
    p.add_argument("system")
    p.add_argument("--alpha", type=float, required=True, help="threshold parameter > 0")
    p.add_argument("--beta", type=float, required=True, help="weighting scalar > 1")
    p.add_argument("--lambda-grid", help="comma-separated positive shift values")
    p.add_argument("--out", required=True, help="design JSON output path")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="run the event-triggered loop")
    p.add_argument("system", nargs="?", help="system JSON file")
    p.add_argument("design", nargs="?", help="design JSON file")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--x0", help="comma-separated plant initial state")
    p.add_argument("--xhat0", help="comma-separated observer initial state (default 0)")
    p.add_argument("--horizon", type=float, help="simulation length in seconds")
    p.add_argument("--step", type=float, help="integration step in seconds")
    p.add_argument("--event-time-tol", type=float, help="event bisection tolerance")
    p.add_argument("--feedback-gain", help="comma-separated row-major m x n gain")
    p.add_argument("--absolute-output", action="store_true",
                   help="shift outputs by C*equilibrium before triggering")
    p.add_argument("--output-floor", type=float,
                   help="suppress triggering when all |y_i| are below this")
    p.add_argument("--periodic-interval", type=float,
                   help="baseline sampling interval for the savings report")
    p.add_argument("--trace", help="trace CSV output path")
    p.add_argument("--events", help="event log JSON output path")
    p.add_argument("--write-manifest", help="record all inputs to this JSON file")
    p.add_argument("--manifest", help="replay a recorded manifest")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("zeno", help="minimum inter-execution-time bounds")
    p.add_argument("system")
    p.add_argument("--alphas", type=float, nargs="+", required=True)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_zeno)

    p = sub.add_parser("tank", help="linearize a three-tank parameter file")
    p.add_argument("params", help="tank parameters JSON file")
    p.add_argument("--out", required=True, help="system JSON output path")
    p.set_defaults(func=cmd_tank)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
