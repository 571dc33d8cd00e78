"""Command-line front end.

Every subcommand reads optional settings from an INI file (``--config``):
keys in ``[DEFAULT]`` apply to every command, keys in a section named
after the command apply to that command only, and command-line flags win
over both. Outputs are written atomically.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 violated recovery assumption.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import importlib
import json
import math
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import AssumptionError, BiofilmError, DomainError, MeasurementFormatError
from .fitting import FLAVORS, WEIGHTINGS, FitProblem, fit, grid_scan
from .forward import convergence_study, solve_forward
from .model import CASES, PARAM_NAMES, Grid, ManufacturedCase, ParamVector, ProblemData
from .observables import add_noise, measurements_from_case, measurements_from_solution, read_measurements, \
    write_measurements
from .recovery import EXAMPLE2_POINTS, EvaluationPoints, FieldProbe, recover_all, scan_points

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ASSUMPTION = 4

# starting point of the eight-parameter fits, with d1 supplied separately
INITIAL_GUESS = {"d2": 0.5, "K1": 0.5, "K2": 0.5, "K3": 0.5, "K4": 0.5, "a": 2.0, "b": 1.0}


class ConfigError(BiofilmError):
    """Invalid or inconsistent run configuration."""


# ---------------------------------------------------------------- helpers
@contextmanager
def atomic_path(path):
    """Yield a temporary path next to ``path``; rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(obj, path):
    with atomic_path(path) as tmp, open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=True)
        fh.write("\n")


def write_rows(path, header, rows):
    with atomic_path(path) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def parse_assignments(text, what="parameter") -> dict:
    """``"a=1,b=2"`` -> ``{"a": 1.0, "b": 2.0}``."""
    out = {}
    if not text:
        return out
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"expected name=value in {what} list, got {item!r}")
        name, value = (s.strip() for s in item.split("=", 1))
        if name not in PARAM_NAMES:
            raise ConfigError(f"unknown {what} {name!r}; choose from {', '.join(PARAM_NAMES)}")
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigError(f"{what} {name} has non-numeric value {value!r}") from None
    return out


def parse_floats(text, what, count=None):
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise ConfigError(f"{what} needs {count} values, got {len(values)}")
    return values


def truthy(value) -> bool:
    if value is None:
        return False
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


# ---------------------------------------------------------------- configuration
def load_case(opts) -> ManufacturedCase | ProblemData:
    name = opts.case
    if name in CASES:
        return CASES[name]()
    if name == "custom":
        if not opts.factory:
            raise ConfigError("case=custom needs factory=module:function")
        module, _, func = opts.factory.partition(":")
        try:
            obj = getattr(importlib.import_module(module), func)()
        except (ImportError, AttributeError) as exc:
            raise ConfigError(f"cannot load factory {opts.factory!r}: {exc}") from None
        if not isinstance(obj, (ManufacturedCase, ProblemData)):
            raise ConfigError("factory must return a ManufacturedCase or ProblemData")
        return obj
    raise ConfigError(f"unknown case {name!r}; choose from {', '.join([*CASES, 'custom'])}")


def build_grid(opts, T_default=1.0) -> Grid:
    T = float(opts.T) if opts.T is not None else T_default
    if opts.I is not None or opts.N is not None:
        if opts.I is None or opts.N is None:
            raise ConfigError("I and N must be given together")
        return Grid(int(opts.I), int(opts.N), T)
    if opts.mesh is None:
        raise ConfigError("give either mesh (and optionally dt) or both I and N")
    dx = float(opts.mesh)
    dt = float(opts.dt) if opts.dt is not None else dx
    return Grid.from_steps(dx, dt, T)


def case_and_data(opts):
    obj = load_case(opts)
    if isinstance(obj, ManufacturedCase):
        return obj, obj.data, obj.T
    return None, obj, 1.0


def base_params(opts, case) -> ParamVector:
    values = case.params.to_dict() if case is not None else {}
    values.update(parse_assignments(opts.params))
    missing = [n for n in PARAM_NAMES if n not in values]
    if missing:
        raise ConfigError(f"parameters {', '.join(missing)} must be given for a custom case")
    return ParamVector(**values)


# ---------------------------------------------------------------- commands
def cmd_forward(opts):
    case, data, T = case_and_data(opts)
    grid = build_grid(opts, T)
    params = base_params(opts, case)
    out = opts.out or "forward.csv"

    def run():
        sol = solve_forward(data, params, grid)
        rows = []
        for n in range(grid.N):
            for i in range(grid.I):
                rows.append((grid.x[i], grid.t[n], sol.S[i, n], sol.M[i, n]))
        write_rows(out, ["x", "t", "S", "M"], rows)
        return f"forward solve on I={grid.I}, N={grid.N}: max M = {sol.M.max():.4g}", [out]

    return run


def cmd_convergence(opts):
    case, _, _ = case_and_data(opts)
    if case is None:
        raise ConfigError("convergence needs a manufactured case")
    meshes = parse_floats(opts.meshes or "0.1,0.05,0.01", "meshes")
    ratio = float(opts.dt_ratio or 1.0)
    out = opts.out or "convergence.csv"

    def run():
        table = convergence_study(case, meshes, ratio)
        rows = [(r.dx, r.dt, r.errS, r.errM, r.order) for r in table.rows]
        write_rows(out, ["dx", "dt", "errS", "errM", "order"], rows)
        return f"observed order {table.slope:.3f} over {len(rows)} meshes", [out]

    return run


def cmd_synth(opts):
    case, data, T = case_and_data(opts)
    grid = build_grid(opts, T)
    exact = truthy(opts.exact)
    with_biomass = not truthy(opts.no_biomass)
    level = float(opts.noise or 0.0)
    seed = None if opts.seed is None else int(opts.seed)
    out = opts.out or "measurements.csv"
    if exact and case is None:
        raise ConfigError("exact measurements need a manufactured case")
    if exact and with_biomass and case.exact_biomass is None:
        raise ConfigError(f"case {case.name} has no closed-form biomass; use no_biomass")
    params = base_params(opts, case)

    def run():
        if exact:
            ms = measurements_from_case(case, grid, with_biomass=with_biomass)
        else:
            ms = measurements_from_solution(solve_forward(data, params, grid), params.d1, with_biomass)
        ms = add_noise(ms, level, seed)
        with atomic_path(out) as tmp:
            write_measurements(ms, tmp)
        return f"{len(ms.times)} samples ({ms.provenance}, noise {level:g}): q0(0) = {ms.flux[0]:.6g}", [out]

    return run


def cmd_recover(opts):
    case, data, T = case_and_data(opts)
    if case is None:
        raise ConfigError("recover needs a manufactured case (closed-form fields)")
    sampled = truthy(opts.sampled)
    grid = build_grid(opts, T) if sampled else None
    points = None
    if opts.points:
        try:
            with open(opts.points) as fh:
                points = EvaluationPoints.from_dict(json.load(fh))
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot read points file {opts.points!r}: {exc}") from None
    elif truthy(opts.stated_points):
        if case.name != "example2":
            raise ConfigError("stated_points is defined for example2 only")
        points = EXAMPLE2_POINTS
    resolution = tuple(int(v) for v in parse_floats(opts.lattice or "101,101", "lattice", 2))
    out = opts.out or "recovery.json"

    def run():
        if sampled:
            probe = FieldProbe.from_solution(solve_forward(data, case.params, grid), data)
        else:
            probe = FieldProbe.from_case(case)
        pts = points if points is not None else scan_points(probe, resolution)
        report = recover_all(probe, pts)
        payload = report.to_dict()
        payload["probe"] = probe.kind
        write_json(_jsonable(payload), out)
        vals = ", ".join(f"{k}={report.values[k]:.6g}" for k in PARAM_NAMES)
        return f"recovered {vals}", [out]

    return run


def _fit_problem(opts, case, data, T, unknowns):
    grid = build_grid(opts, T)
    flavor = opts.flavor or "flux"
    weighting = opts.weighting or "trapezoid"
    if flavor not in FLAVORS:
        raise ConfigError(f"flavor must be one of {FLAVORS}")
    if weighting not in WEIGHTINGS:
        raise ConfigError(f"weighting must be one of {WEIGHTINGS}")
    known = base_params(opts, case)
    if opts.measurements:
        try:
            ms = read_measurements(opts.measurements)
        except OSError as exc:
            raise ConfigError(f"cannot read measurements: {exc}") from None
    elif case is not None:
        ms = measurements_from_case(case, grid, with_biomass=flavor == "flux+biomass")
    else:
        raise ConfigError("a custom case needs a measurements file")
    level = float(opts.noise or 0.0)
    if level:
        ms = add_noise(ms, level, None if opts.seed is None else int(opts.seed))
    return FitProblem(
        data=data, grid=grid, measurements=ms, known=known, unknowns=tuple(unknowns), flavor=flavor,
        reduce_k2=truthy(getattr(opts, "reduce_k2", None)), weighting=weighting,
        lower=parse_assignments(opts.lower, "bound"), upper=parse_assignments(opts.upper, "bound"),
    )


def cmd_scan(opts):
    case, data, T = case_and_data(opts)
    prob = _fit_problem(opts, case, data, T, ("a", "b"))
    a_range = parse_floats(opts.a_range or "0,4", "a_range", 2)
    b_range = parse_floats(opts.b_range or "1,4", "b_range", 2)
    counts = tuple(int(v) for v in parse_floats(opts.counts or "41,31", "counts", 2))
    if min(counts) < 1:
        raise ConfigError("lattice counts must be positive")
    out = opts.out or "scan.csv"

    def run():
        res = grid_scan(prob, a_range, b_range, counts)
        rows = [(a, b, res.values[i, j]) for i, a in enumerate(res.a_values) for j, b in enumerate(res.b_values)]
        write_rows(out, ["a", "b", "H"], rows)
        return f"argmin (a, b) = ({res.argmin[0]:.4g}, {res.argmin[1]:.4g}), H = {res.minimum:.4g}", [out]

    return run


def cmd_fit(opts):
    case, data, T = case_and_data(opts)
    unknowns = opts.unknowns or "a,b"
    if unknowns == "all":
        unknowns = ",".join(PARAM_NAMES)
    unknowns = [u.strip() for u in unknowns.split(",") if u.strip()]
    if truthy(opts.reduce_k2):
        unknowns = [u for u in unknowns if u != "K2"]
    try:
        prob = _fit_problem(opts, case, data, T, unknowns)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    guess = {}
    if truthy(opts.standard_guess):
        guess.update(INITIAL_GUESS)
        guess["d1"] = 1.3
    guess.update(parse_assignments(opts.guess, "guess"))
    missing = [u for u in prob.unknowns if u not in guess]
    if missing:
        raise ConfigError(f"initial guess missing for {', '.join(missing)}")
    x0 = np.array([guess[u] for u in prob.unknowns])
    lo, hi = prob.lower_array(), prob.upper_array()
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ConfigError("initial guess lies outside the bounds")
    max_iter = int(opts.max_iter or 400)
    out = opts.out or "fit.json"
    trace_out = opts.trace or str(Path(out).with_suffix("")) + "_trace.csv"

    def run():
        report = fit(prob, x0, max_iter=max_iter)
        payload = report.to_dict()
        payload["settings"] = {
            "flavor": prob.flavor, "weighting": prob.weighting, "reduce_k2": prob.reduce_k2,
            "dx": prob.grid.dx, "dt": prob.grid.dt, "initial_guess": dict(zip(prob.unknowns, x0.tolist())),
            "noise": float(opts.noise or 0.0), "seed": None if opts.seed is None else int(opts.seed),
        }
        write_json(_jsonable(payload), out)
        write_rows(trace_out, ["iter", "J"], [(k, J) for k, J in enumerate(report.trace)])
        return (f"{report.termination} after {report.iterations} iterations, objective {report.objective:.4g}",
                [out, trace_out])

    return run


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


COMMANDS = {
    "forward": cmd_forward,
    "convergence": cmd_convergence,
    "synth": cmd_synth,
    "recover": cmd_recover,
    "scan": cmd_scan,
    "fit": cmd_fit,
}


# ---------------------------------------------------------------- argument parsing
def _common(p):
    p.add_argument("--config", help="INI file; [DEFAULT] and [<command>] sections are read")
    p.add_argument("--case", help="example1, example2 or custom (default example1)")
    p.add_argument("--factory", help="module:function returning ProblemData or ManufacturedCase (case=custom)")
    p.add_argument("--mesh", help="spatial step dx; the time step defaults to dx")
    p.add_argument("--dt", help="time step (with --mesh)")
    p.add_argument("-I", dest="I", help="number of spatial nodes (with -N)")
    p.add_argument("-N", dest="N", help="number of time levels (with -I)")
    p.add_argument("--T", help="final time (default: the case's)")
    p.add_argument("--params", help="parameter overrides, e.g. d1=1,a=1.5")
    p.add_argument("--seed", help="random seed for noise")
    p.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biofilm", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="solve the forward problem; writes x,t,S,M")
    _common(p)

    p = sub.add_parser("convergence", help="error table against a manufactured solution")
    _common(p)
    p.add_argument("--meshes", help="comma-separated dx values (default 0.1,0.05,0.01)")
    p.add_argument("--dt-ratio", dest="dt_ratio", help="time step as a multiple of dx (default 1)")

    p = sub.add_parser("synth", help="synthesise flux/biomass measurements")
    _common(p)
    p.add_argument("--exact", action="store_const", const="true", help="closed-form data instead of the solver")
    p.add_argument("--no-biomass", dest="no_biomass", action="store_const", const="true",
                   help="write the flux column only")
    p.add_argument("--noise", help="relative Gaussian noise level")

    p = sub.add_parser("recover", help="closed-form recovery of all eight constants")
    _common(p)
    p.add_argument("--points", help="JSON file with p0, p1, p2, t3, t4, p5, p6, p7")
    p.add_argument("--stated-points", dest="stated_points", action="store_const", const="true",
                   help="use the reference point set of example2")
    p.add_argument("--lattice", help="scan resolution nx,nt when no points are given (default 101,101)")
    p.add_argument("--sampled", action="store_const", const="true",
                   help="probe a computed solution (needs a mesh) instead of closed forms")

    for name, helptext in (("scan", "objective on an (a, b) lattice"), ("fit", "least-squares fit")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--measurements", help="measurement CSV t,q0[,EM] (default: closed-form data)")
        p.add_argument("--flavor", help=f"objective: {' or '.join(FLAVORS)}")
        p.add_argument("--weighting", help=f"time weights: {' or '.join(WEIGHTINGS)}")
        p.add_argument("--noise", help="relative Gaussian noise added to the measurements")
        p.add_argument("--lower", help="lower-bound overrides, e.g. a=0.5")
        p.add_argument("--upper", help="upper-bound overrides")
        if name == "scan":
            p.add_argument("--a-range", dest="a_range", help="amin,amax (default 0,4)")
            p.add_argument("--b-range", dest="b_range", help="bmin,bmax (default 1,4)")
            p.add_argument("--counts", help="lattice sizes na,nb (default 41,31)")
        else:
            p.add_argument("--unknowns", help="comma-separated names or 'all' (default a,b)")
            p.add_argument("--guess", help="initial values, e.g. a=2,b=1")
            p.add_argument("--standard-guess", dest="standard_guess", action="store_const", const="true",
                           help="start from a=2, b=1, d2=K1..K4=0.5, d1=1.3 (overridable by --guess)")
            p.add_argument("--reduce-k2", dest="reduce_k2", action="store_const", const="true",
                           help="eliminate K2 through its closed-form reduction")
            p.add_argument("--max-iter", dest="max_iter", help="iteration limit (default 400)")
            p.add_argument("--trace", help="objective trace CSV (default <out>_trace.csv)")
    return parser


def merge_config(opts, parser) -> argparse.Namespace:
    """Fill unset options from the config file; flags always win."""
    if opts.config:
        if not os.path.exists(opts.config):
            raise ConfigError(f"config file {opts.config!r} does not exist")
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read(opts.config)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {opts.config!r}: {exc}") from None
        section = cp[opts.command] if cp.has_section(opts.command) else cp.defaults()
        known = vars(opts)
        for key, value in section.items():
            attr = key.replace("-", "_")
            if attr not in known or attr in ("command", "config"):
                raise ConfigError(f"unknown key {key!r} for command {opts.command!r}")
            if known[attr] is None:
                setattr(opts, attr, value)
    if opts.case is None:
        opts.case = "example1"
    return opts


def _fail(code, exc):
    payload = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    for attr in ("clause", "details", "line", "row", "pivot"):
        if hasattr(exc, attr):
            payload[attr] = _jsonable(getattr(exc, attr))
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    opts = parser.parse_args(argv)
    try:
        opts = merge_config(opts, parser)
        run = COMMANDS[opts.command](opts)
    except (ConfigError, DomainError, MeasurementFormatError, ValueError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except AssumptionError as exc:
        return _fail(EXIT_ASSUMPTION, exc)
    try:
        summary, paths = run()
    except AssumptionError as exc:
        return _fail(EXIT_ASSUMPTION, exc)
    except (BiofilmError, ArithmeticError, ValueError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    print(summary)
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
