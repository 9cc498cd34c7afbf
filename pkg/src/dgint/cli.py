"""Command-line front end: ``dgint {integrate,check,compare,order}``.

Exit codes: 0 success, 2 bad arguments or unknown system, 3 solver
divergence (partial output is still written), 4 file I/O failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .core import (
    DGError,
    InvalidArgumentError,
    LinearGradientSystem,
    SolverDivergenceError,
    StructureClass,
    StructureMatrixField,
    Trajectory,
)
from .discgrad import check_axioms, scheme_from_string
from .exprlang import ParseError, compile_expressions, parse, scalar_field, vector_field
from .lingrad import build_linear_gradient_system, default_L, detect_class, sample_box, verify_jacobi
from .multigrad import (
    MultiLinearGradientSystem,
    is_fully_antisymmetric,
    lyapunov_bracket_W,
    multi_integrate,
)
from .stepper import (
    LTildePolicy,
    SolverConfig,
    empirical_order,
    explicit_euler,
    integrate,
    reference_integrate,
)
from .systems import CATALOG, builtin

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ----------------------------------------------------------- system files


@dataclass
class SystemFile:
    name: str = "file"
    dimension: int = 0
    params: dict = field(default_factory=dict)
    V: str | None = None
    f: dict = field(default_factory=dict)
    L: dict = field(default_factory=dict)
    track: dict = field(default_factory=dict)


_LINE = re.compile(r"^\s*(?P<key>[^=]+?)\s*=\s*(?P<val>.*?)\s*$")


def parse_system_file(text: str) -> SystemFile:
    """Parse the flat ``key = value`` system-definition format.

    Recognised keys: ``name``, ``dimension``, ``param <p>``, ``V``,
    ``f<i>``, ``L<i>_<j>``, ``track <label>``. ``#`` starts a comment.
    """
    out = SystemFile()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise UsageError(f"line {lineno}: expected 'key = value'")
        key, val = m.group("key"), m.group("val")
        try:
            if key == "name":
                out.name = val
            elif key == "dimension":
                out.dimension = int(val)
            elif key.startswith("param "):
                out.params[key[6:].strip()] = float(val)
            elif key.startswith("track "):
                out.track[key[6:].strip()] = val
            elif key == "V":
                out.V = val
            elif re.fullmatch(r"f\d+", key):
                out.f[int(key[1:])] = val
            elif re.fullmatch(r"L\d+_\d+", key):
                i, j = key[1:].split("_")
                out.L[(int(i), int(j))] = val
            else:
                raise UsageError(f"line {lineno}: unknown key {key!r}")
        except ValueError:
            raise UsageError(f"line {lineno}: bad value {val!r} for {key!r}") from None
    if out.dimension < 1:
        raise UsageError("system file must declare 'dimension' >= 1")
    if out.V is None:
        raise UsageError("system file must define V")
    return out


def build_from_file(defn: SystemFile, overrides: dict, box=(-1.0, 1.0)) -> LinearGradientSystem:
    n = defn.dimension
    params = {**defn.params, **overrides}
    V = scalar_field(defn.V, n, params)
    f = None
    if defn.f:
        if sorted(defn.f) != list(range(1, n + 1)):
            raise UsageError(f"f must define f1..f{n}")
        f = vector_field([defn.f[i] for i in range(1, n + 1)], params)
    points = sample_box(n, *box, n_points=256)
    if defn.L:
        entries = {}
        for (i, j), src in defn.L.items():
            if not (1 <= i <= n and 1 <= j <= n):
                raise UsageError(f"L{i}_{j} out of range")
            entries[(i - 1, j - 1)] = parse(src, n, params)
        keys = sorted(entries)
        fn = compile_expressions([entries[k] for k in keys], params)

        def L(x):
            M = np.zeros((n, n))
            for k, v in zip(keys, fn(x)):
                M[k] = v
            return M

        field_ = StructureMatrixField(n, L)
        field_ = StructureMatrixField(n, L, detect_class(field_, points))
        return LinearGradientSystem(n, field_, V, f, params, defn.name)
    if f is None:
        raise UsageError("system file needs f entries, L entries, or both")
    return build_linear_gradient_system(f, V, points=points, name=defn.name)


def load_system(args):
    params = dict(args.param or [])
    if args.file:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
        defn = parse_system_file(text)
        box = getattr(args, "box", None) or (-1.0, 1.0)
        sysobj = build_from_file(defn, params, box)
        track = [scalar_field(src, defn.dimension, sysobj.parameters, name=label)
                 for label, src in defn.track.items()]
        return sysobj, track
    if args.system not in CATALOG:
        raise UsageError(f"unknown system {args.system!r}\navailable systems:\n  "
                         + "\n  ".join(CATALOG))
    kwargs = {}
    if args.system == "damped-particle" and getattr(args, "potential", None):
        kwargs["potential"] = args.potential
    return builtin(args.system, params, **kwargs), []


# -------------------------------------------------------------- arguments


def _param(text):
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number in {text!r}") from None


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _box(text):
    vals = _floats(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise argparse.ArgumentTypeError("box must be lo,hi with lo < hi")
    return tuple(vals)


def _scheme(text):
    try:
        return scheme_from_string(text)
    except InvalidArgumentError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _policy(text):
    try:
        return LTildePolicy(text)
    except ValueError:
        raise argparse.ArgumentTypeError("policy must be 'frozen' or 'midpoint'") from None


def _add_system_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--system", help="catalog name")
    src.add_argument("--file", help="system-definition file")
    p.add_argument("--param", action="append", type=_param, metavar="NAME=VALUE")
    p.add_argument("--potential", help="damped-particle potential expression in x1")


def _add_integration_args(p, x0_required=True):
    p.add_argument("--x0", type=_floats, required=x0_required)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--scheme", type=_scheme, default=scheme_from_string("midpoint"))
    p.add_argument("--policy", type=_policy, default=LTildePolicy.MIDPOINT)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgint", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dgint {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="run the discrete-gradient map and write a trajectory")
    _add_system_args(p)
    _add_integration_args(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("check", help="report structure class and residuals")
    _add_system_args(p)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--box", type=_box, default=(-1.0, 1.0))
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("compare", help="drift of the DG map against a baseline")
    _add_system_args(p)
    _add_integration_args(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--baseline", choices=("rk-reference", "explicit-euler"), default="explicit-euler")
    p.add_argument("--every", type=int, default=0, help="print every k-th row (default: ~20 rows)")
    p.add_argument("--out", help="write the full table as CSV")

    p = sub.add_parser("order", help="empirical order of accuracy")
    _add_system_args(p)
    p.add_argument("--x0", type=_floats, required=True)
    p.add_argument("--tau-list", type=_floats, required=True)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--scheme", type=_scheme, action="append")
    p.add_argument("--policy", type=_policy, default=LTildePolicy.MIDPOINT)
    p.add_argument("--tol", type=float, default=None)
    return parser


# ------------------------------------------------------------------ output


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_columns(traj: Trajectory) -> list[str]:
    n = traj.states.shape[1]
    m = traj.v_values.shape[0]
    return ["t", *(f"x{i + 1}" for i in range(n)), *(f"V{j + 1}" for j in range(m)),
            "iters", "residual"]


def _rows(traj: Trajectory):
    for k in range(len(traj)):
        yield [traj.times[k], *traj.states[k], *traj.v_values[:, k]], int(traj.iterations[k]), \
            traj.residuals[k]


def write_csv(traj: Trajectory, fh):
    fh.write(",".join(trajectory_columns(traj)) + "\n")
    for vals, it, res in _rows(traj):
        fh.write(",".join([*(fmt(v) for v in vals), str(it), fmt(res)]) + "\n")


def write_json(traj: Trajectory, fh, metadata: dict):
    cols = trajectory_columns(traj)
    steps = []
    for vals, it, res in _rows(traj):
        rec = {c: float(fmt(v)) for c, v in zip(cols, vals)}
        rec["iters"] = it
        rec["residual"] = float(fmt(res))
        steps.append(rec)
    json.dump({"metadata": metadata, "columns": cols, "steps": steps}, fh, indent=1, sort_keys=False)
    fh.write("\n")


def _solver(args) -> SolverConfig:
    return SolverConfig(tol=args.tol, max_iter=args.max_iter)


def _run(sysobj, track, args, n_steps):
    if isinstance(sysobj, MultiLinearGradientSystem):
        return multi_integrate(sysobj, args.x0, args.tau, n_steps, args.scheme, _solver(args))
    return integrate(sysobj, args.x0, args.tau, n_steps, args.scheme, args.policy, _solver(args),
                     track=track)


def _summary(traj: Trajectory) -> str:
    finals = " ".join(f"V{j + 1}={fmt(traj.v_values[j, -1])}" for j in range(traj.v_values.shape[0]))
    drift = max(traj.max_drift(j) for j in range(traj.v_values.shape[0]))
    iters = float(np.mean(traj.iterations[1:])) if len(traj) > 1 else 0.0
    return f"final {finals} max_drift={drift:.3e} mean_iters={iters:.2f} steps={len(traj) - 1}"


def cmd_integrate(args, out=None) -> int:
    out = out or sys.stdout
    sysobj, track = load_system(args)
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    if len(args.x0) != sysobj.dimension:
        raise UsageError(f"--x0 needs {sysobj.dimension} components")
    code = EXIT_OK
    try:
        traj = _run(sysobj, track, args, args.steps)
    except SolverDivergenceError as exc:
        if exc.trajectory is None:
            raise
        traj, code = exc.trajectory, EXIT_DIVERGED
        print(f"solver diverged at step {exc.step_index}: {exc}", file=sys.stderr)
    meta = {
        "system": getattr(sysobj, "name", "system"),
        "params": {k: v for k, v in sorted(dict(sysobj.parameters).items())},
        "scheme": str(args.scheme),
        "policy": args.policy.value,
        "tau": args.tau,
        "steps": args.steps,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "version": __version__,
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            (write_csv(traj, fh) if args.format == "csv" else write_json(traj, fh, meta))
        print(_summary(traj), file=out)
    else:
        write_csv(traj, out) if args.format == "csv" else write_json(traj, out, meta)
        print(_summary(traj), file=sys.stderr)
    return code


def cmd_check(args, out=None) -> int:
    out = out or sys.stdout
    sysobj, _ = load_system(args)
    n = sysobj.dimension
    pts = sample_box(n, *args.box, n_points=args.points, seed=args.seed)
    print(f"system: {getattr(sysobj, 'name', 'system')} (n={n})", file=out)
    if isinstance(sysobj, MultiLinearGradientSystem):
        anti = all(is_fully_antisymmetric(sysobj.L(x)) for x in pts)
        print(f"tensor order: {sysobj.L.order}, fully antisymmetric: {'yes' if anti else 'no'}", file=out)
        for j, V in enumerate(sysobj.V_list, 1):
            w = max(abs(lyapunov_bracket_W(sysobj, V, x)) for x in pts)
            print(f"W residual V{j}: {w:.3e}", file=out)
        return EXIT_OK
    cls = detect_class(sysobj.L, pts)
    print(f"structure class: {cls.value}", file=out)
    if sysobj.raw_f is not None:
        rec = lg = 0.0
        for x in pts:
            g = sysobj.V.grad(x)
            fx = sysobj.raw_f(x)
            scale = 1.0 + np.linalg.norm(fx)
            if np.linalg.norm(g) > 1e-6:
                rec = max(rec, np.linalg.norm(default_L(fx, g) @ g - fx) / scale)
            try:
                lg = max(lg, np.linalg.norm(sysobj.L(x) @ g - fx) / scale)
            except ArithmeticError:
                pass
        print(f"reconstruction residual: {rec:.3e}", file=out)
        print(f"L grad V residual: {lg:.3e}", file=out)
    if cls is StructureClass.ANTISYMMETRIC and n >= 3:
        jac = max(verify_jacobi(sysobj.L, x) for x in pts[: min(len(pts), 50)])
        print(f"jacobi residual: {jac:.3e}", file=out)
    rng = np.random.default_rng(args.seed)
    pairs = [(rng.uniform(*args.box, n), rng.uniform(*args.box, n)) for _ in range(args.points)]
    for name in ("midpoint", "itoh-abe", "avf:2"):
        a1, a2 = check_axioms(scheme_from_string(name), sysobj.V, pairs, relative=True)
        print(f"discrete gradient {name}: axiom1={a1:.3e} axiom2={a2:.3e}", file=out)
    return EXIT_OK


def cmd_compare(args, out=None) -> int:
    out = out or sys.stdout
    sysobj, _ = load_system(args)
    if args.steps < 0:
        raise UsageError("--steps must be >= 0")
    if len(args.x0) != sysobj.dimension:
        raise UsageError(f"--x0 needs {sysobj.dimension} components")
    header = "step t dg_drift baseline_drift"
    if args.steps == 0:
        print(header, file=out)
        return EXIT_OK
    code = EXIT_OK
    try:
        dg = _run(sysobj, [], args, args.steps)
    except SolverDivergenceError as exc:
        if exc.trajectory is None:
            raise
        dg, code = exc.trajectory, EXIT_DIVERGED
        print(f"solver diverged at step {exc.step_index}: {exc}", file=sys.stderr)
    V = sysobj.V_list[0] if isinstance(sysobj, MultiLinearGradientSystem) else sysobj.V
    f = sysobj.vector_field()
    if args.baseline == "explicit-euler":
        with np.errstate(over="ignore", invalid="ignore"):
            base = explicit_euler(f, args.x0, args.tau, len(dg) - 1, track=[V])
    else:
        base = reference_integrate(f, args.x0, dg.times[-1], rel_tol=1e-10, t_eval=dg.times, track=[V])
    k_max = min(len(dg), len(base))
    dg_drift = dg.v_values[0, :k_max] - dg.v_values[0, 0]
    base_drift = base.v_values[0, :k_max] - base.v_values[0, 0]
    every = args.every or max(1, (k_max - 1) // 20)
    rows = [k for k in range(0, k_max, every)]
    if rows[-1] != k_max - 1:
        rows.append(k_max - 1)
    print(header, file=out)
    for k in rows:
        print(f"{k} {fmt(dg.times[k])} {abs(dg_drift[k]):.6e} {abs(base_drift[k]):.6e}", file=out)
    print(f"max drift: dg={np.max(np.abs(dg_drift)):.3e} baseline={np.max(np.abs(base_drift)):.3e}",
          file=out)
    if isinstance(sysobj, LinearGradientSystem) and sysobj.structure_class in (
            StructureClass.NEGATIVE_SEMIDEFINITE, StructureClass.NEGATIVE_DEFINITE):
        tol = 1e-10
        dg_up = int(np.sum(np.diff(dg.v_values[0, :k_max]) > tol))
        base_up = int(np.sum(np.diff(base.v_values[0, :k_max]) > tol))
        print(f"monotonicity violations (V increases > {tol:g}): dg={dg_up} baseline={base_up}", file=out)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("step,t,dg_drift,baseline_drift\n")
            for k in range(k_max):
                fh.write(f"{k},{fmt(dg.times[k])},{fmt(dg_drift[k])},{fmt(base_drift[k])}\n")
    return code


def cmd_order(args, out=None) -> int:
    out = out or sys.stdout
    sysobj, _ = load_system(args)
    if isinstance(sysobj, MultiLinearGradientSystem):
        raise UsageError("order estimation is available for linear-gradient systems only")
    if len(args.tau_list) < 4:
        raise UsageError("--tau-list needs at least 4 values")
    if len(args.x0) != sysobj.dimension:
        raise UsageError(f"--x0 needs {sysobj.dimension} components")
    schemes = args.scheme or [scheme_from_string("midpoint")]
    for scheme in schemes:
        slope = empirical_order(sysobj, scheme, args.policy, args.x0, args.t_end, args.tau_list,
                                SolverConfig(tol=args.tol))
        print(f"scheme={scheme} policy={args.policy.value} slope={slope:.4f}", file=out)
    return EXIT_OK


COMMANDS = {"integrate": cmd_integrate, "check": cmd_check, "compare": cmd_compare, "order": cmd_order}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidArgumentError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverDivergenceError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED if isinstance(exc, ArithmeticError) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
