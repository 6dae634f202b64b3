"""Command-line front end.

Exit status: 0 on success, 1 on usage or configuration errors, 2 when a
computation does not produce a result (the JSON artifact then carries the
diagnostics). Settings come from built-in defaults, then an optional JSON
config file (``--config``), then explicit flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import io
from .bvp import Mesh, solve
from .charroots import bundle_dims, root_collision_lambda
from .continuation import ContinuationBranch, lambda_max, sweep, try_solve
from .errors import (
    BracketInvalid,
    InterfaceNotFound,
    KPPError,
    NoConvergence,
    SingularSystem,
)
from .model import catalog_by_tag, catalog_lookup, catalog_table
from .pk import pk_build, pk_eval

log = logging.getLogger("kppw")

COMMON = {"out": ".", "prefix": None, "svg": False, "L": 60.0, "L_left": None, "L_right": None,
          "N": 2000, "newton_tol": 1e-8, "log_level": "WARNING"}
SPEC_KEYS = {"family": None, "k": None, "l": None, "tag": None, "s_t": None, "s_x": None}
DEFAULTS = {
    "list": {"json": False},
    "solve": {**SPEC_KEYS, "lambda": None, "bc": "auto"},
    "sweep": {**SPEC_KEYS, "lambdas": None, "bc": "auto", "warm_start": True},
    "lmax": {**SPEC_KEYS, "lo": None, "hi": None, "tol": 0.01, "bc": "auto", "n_probe": 3},
    "chars": {**SPEC_KEYS, "lambda": None, "collision": None, "equilibrium": 0},
    "pk": {"order": None, "gamma": None, "json": False},
    "quasi": {"n": 1.0, "lambda": None, "delta": 1e-9, "osc": False, "fourier_modes": 64},
    "logshift": {"lambda0": 0.5, "kshift": 1.0, "rhs": "d3", "phi": True,
                 "times": [1e2, 1e3, 1e4]},
}
COMPUTE = {"solve", "sweep", "lmax", "quasi", "logshift"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(x) for x in str(text).replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_common(p, compute):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file with settings (flags override)")
    p.add_argument("--log-level", dest="log_level", default=S)
    if compute:
        p.add_argument("--out", default=S, help="output directory")
        p.add_argument("--prefix", default=S, help="artifact file prefix")
        p.add_argument("--svg", action="store_true", default=S, help="also write an SVG plot")
        p.add_argument("--L", type=float, default=S, help="half-length of the domain")
        p.add_argument("--L-left", dest="L_left", type=float, default=S)
        p.add_argument("--L-right", dest="L_right", type=float, default=S)
        p.add_argument("--N", type=int, default=S, help="number of mesh intervals")
        p.add_argument("--newton-tol", dest="newton_tol", type=float, default=S)


def _add_spec(p):
    S = argparse.SUPPRESS
    p.add_argument("--family", default=S)
    p.add_argument("--k", type=int, default=S)
    p.add_argument("--l", type=int, default=S)
    p.add_argument("--tag", default=S, help="catalog tag, e.g. 1.17")
    p.add_argument("--s-t", dest="s_t", type=int, choices=(-1, 1), default=S)
    p.add_argument("--s-x", dest="s_x", type=int, choices=(-1, 1), default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="kppw", description="Travelling waves of higher-order KPP equations.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("list", help="catalog of equations")
    _add_common(p, False)
    p.add_argument("--json", action="store_true", default=S)

    p = sub.add_parser("solve", help="one travelling-wave profile")
    _add_common(p, True)
    _add_spec(p)
    p.add_argument("--lambda", dest="lambda", type=float, default=S)
    p.add_argument("--bc", choices=("auto", "projection", "dirichlet"), default=S)

    p = sub.add_parser("sweep", help="profiles over a list of speeds")
    _add_common(p, True)
    _add_spec(p)
    p.add_argument("--lambdas", type=_floats, default=S, help="comma-separated speeds")
    p.add_argument("--bc", choices=("auto", "projection", "dirichlet"), default=S)
    p.add_argument("--no-warm-start", dest="warm_start", action="store_false", default=S)

    p = sub.add_parser("lmax", help="bracket the maximal speed")
    _add_common(p, True)
    _add_spec(p)
    p.add_argument("--lo", type=float, default=S)
    p.add_argument("--hi", type=float, default=S)
    p.add_argument("--tol", type=float, default=S, help="bracket width")
    p.add_argument("--n-probe", dest="n_probe", type=int, default=S)
    p.add_argument("--bc", choices=("auto", "projection", "dirichlet"), default=S)

    p = sub.add_parser("chars", help="characteristic roots and bundle dimensions")
    _add_common(p, False)
    _add_spec(p)
    p.add_argument("--lambda", dest="lambda", type=float, default=S)
    p.add_argument("--collision", type=_floats, default=S, help="LO,HI: search a root collision")
    p.add_argument("--equilibrium", type=int, choices=(0, 1), default=S)

    p = sub.add_parser("pk", help="print the operator P_K")
    _add_common(p, False)
    p.add_argument("--order", type=int, default=S)
    p.add_argument("--gamma", type=float, default=S, help="also evaluate the coefficients")
    p.add_argument("--json", action="store_true", default=S)

    p = sub.add_parser("quasi", help="quasilinear profile and interface")
    _add_common(p, True)
    p.add_argument("--n", type=float, default=S)
    p.add_argument("--lambda", dest="lambda", type=float, default=S)
    p.add_argument("--delta", type=float, default=S, help="target regularization")
    p.add_argument("--osc", action="store_true", default=S, help="also compute the periodic component")
    p.add_argument("--fourier-modes", dest="fourier_modes", type=int, default=S)

    p = sub.add_parser("logshift", help="log-t shift expansion for KPP-(11,3)")
    _add_common(p, True)
    p.add_argument("--lambda0", type=float, default=S)
    p.add_argument("--kshift", type=float, default=S)
    p.add_argument("--rhs", choices=("d2", "d3"), default=S)
    p.add_argument("--no-phi", dest="phi", action="store_false", default=S)
    p.add_argument("--times", type=_floats, default=S)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    cmd = args.command
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[cmd])
    path = getattr(args, "config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - set(cfg) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if data.get("command", cmd) != cmd:
            raise UsageError(f"config is for {data['command']!r}, not {cmd!r}")
        data.pop("command", None)
        cfg.update(data)
    cfg.update(flags)
    cfg["command"] = cmd
    if cmd not in COMPUTE:
        for k in ("out", "prefix", "svg", "L", "L_left", "L_right", "N", "newton_tol"):
            cfg.pop(k, None)
    return cfg


def _spec(cfg):
    if cfg.get("tag"):
        found = catalog_by_tag(str(cfg["tag"]))
        if not found:
            raise UsageError(f"no catalog equation with tag {cfg['tag']!r}")
        spec = found[0]
    else:
        missing = [k for k in ("family", "k", "l") if cfg.get(k) is None]
        if missing:
            raise UsageError(f"spec needs --family, --k, --l or --tag (missing {missing})")
        spec = catalog_lookup(cfg["family"], cfg["k"], cfg["l"])
    if cfg.get("s_t") is not None or cfg.get("s_x") is not None:
        spec = spec.with_signs(cfg.get("s_t"), cfg.get("s_x"))
    return spec


def _mesh(cfg):
    left = cfg["L_left"] if cfg["L_left"] is not None else cfg["L"]
    right = cfg["L_right"] if cfg["L_right"] is not None else cfg["L"]
    if not (left > 0 and right > 0 and cfg["N"] >= 4):
        raise UsageError("domain lengths must be positive and N >= 4")
    return Mesh.uniform(-float(left), float(right), int(cfg["N"]))


def _mode(cfg):
    return None if cfg["bc"] == "auto" else cfg["bc"]


def _need(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise UsageError(f"missing required setting {k!r}")


def _path(cfg, name):
    stem = f"{cfg['prefix']}_{name}" if cfg.get("prefix") else name
    return Path(cfg["out"]) / stem


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("KPPW_THREADS", "1")))
    except ValueError:
        raise UsageError("KPPW_THREADS must be an integer") from None


def _profile_columns(profile):
    m = profile.values.shape[1]
    header = ["y", "f"] + [f"f{j}" for j in range(1, m)]
    return header, [profile.y] + [profile.values[:, j] for j in range(m)]


# -- subcommands --------------------------------------------------------------

def cmd_list(cfg):
    rows = catalog_table()
    if cfg["json"]:
        sys.stdout.write(io.dumps(rows))
        return 0
    for r in rows:
        print(f"{r['tag']:>6}  {r['family']:<22} ({r['k']},{r['l']})  {r['equation']}")
    return 0


def cmd_solve(cfg):
    _need(cfg, "lambda")
    spec, mesh = _spec(cfg), _mesh(cfg)
    out = {"config": cfg, "spec": spec.to_dict()}
    try:
        prof = solve(spec, cfg["lambda"], mesh, _mode(cfg), tol=cfg["newton_tol"])
    except NoConvergence as exc:
        out["error"] = {"type": type(exc).__name__, "message": str(exc),
                        "best_residual": exc.best_residual}
        io.write_json(_path(cfg, "profile.json"), out)
        return 2
    header, cols = _profile_columns(prof)
    io.write_csv(_path(cfg, "profile.csv"), header, cols)
    out.update(**{"lambda": prof.lam, "diagnostics": prof.diagnostics, "invariants_violated": prof.check()})
    io.write_json(_path(cfg, "profile.json"), out)
    if cfg["svg"]:
        io.write_svg(_path(cfg, "profile.svg"), prof.y, [prof.f], [f"lambda={io.fmt(prof.lam)}"],
                     spec.label)
    return 0


def cmd_sweep(cfg):
    _need(cfg, "lambdas")
    spec, mesh = _spec(cfg), _mesh(cfg)
    lams = sorted(float(x) for x in cfg["lambdas"])
    workers = _threads()
    if cfg["warm_start"] or workers == 1:
        branch = sweep(spec, lams, mesh, _mode(cfg), warm_start=cfg["warm_start"],
                       tol=cfg["newton_tol"])
    else:
        # cold starts are independent; results are collected in speed order
        with ThreadPoolExecutor(max_workers=workers) as ex:
            recs = list(ex.map(
                lambda lam: try_solve(spec, lam, mesh, _mode(cfg), None, tol=cfg["newton_tol"]), lams))
        branch = ContinuationBranch(spec)
        for r in recs:
            branch.add(r)
    io.write_json(_path(cfg, "sweep.json"), {"config": cfg, **branch.to_dict()})
    ok = [r for r in branch.records if r.ok]
    rows = [[r.lam, float(r.ok), r.profile.diagnostics["newton_iters"] if r.ok else np.nan]
            for r in branch.records]
    io.write_csv(_path(cfg, "sweep.csv"), ["lambda", "ok", "newton_iters"], list(zip(*rows)))
    if cfg["svg"] and ok:
        io.write_svg(_path(cfg, "sweep.svg"), ok[0].profile.y, [r.profile.f for r in ok],
                     [f"lambda={io.fmt(r.lam)}" for r in ok], spec.label)
    return 0 if ok else 2


def cmd_lmax(cfg):
    _need(cfg, "lo", "hi")
    if not cfg["lo"] < cfg["hi"]:
        raise UsageError("need --lo < --hi")
    spec, mesh = _spec(cfg), _mesh(cfg)
    out = {"config": cfg, "spec": spec.to_dict()}
    try:
        branch = lambda_max(spec, cfg["lo"], cfg["hi"], cfg["tol"], mesh, _mode(cfg),
                            n_probe=cfg["n_probe"], solver=partial(solve, tol=cfg["newton_tol"]))
    except BracketInvalid as exc:
        out["error"] = {"type": type(exc).__name__, "message": str(exc)}
        io.write_json(_path(cfg, "lmax.json"), out)
        return 2
    out.update(branch.to_dict())
    io.write_json(_path(cfg, "lmax.json"), out)
    lo, hi = branch.lambda_max_bracket
    print(f"lambda_max in [{io.fmt(lo)}, {io.fmt(hi)}]  (domain [{mesh.left:g}, {mesh.right:g}])")
    return 0


def cmd_chars(cfg):
    spec = _spec(cfg)
    out = {"config": cfg, "spec": spec.to_dict()}
    if cfg.get("lambda") is not None:
        out["bundles"] = bundle_dims(spec, cfg["lambda"]).to_dict()
    if cfg.get("collision"):
        if len(cfg["collision"]) != 2:
            raise UsageError("--collision needs LO,HI")
        lo, hi = cfg["collision"]
        out["collision_lambda"] = root_collision_lambda(spec, cfg["equilibrium"], lo, hi)
    if len(out) == 2:
        raise UsageError("chars needs --lambda and/or --collision")
    sys.stdout.write(io.dumps(out))
    return 0


def cmd_pk(cfg):
    _need(cfg, "order")
    op = pk_build(int(cfg["order"]))
    if cfg["json"]:
        d = op.to_dict()
        if cfg.get("gamma") is not None:
            d["values"] = pk_eval(op, cfg["gamma"]).tolist()
        sys.stdout.write(io.dumps(d))
        return 0
    print(op.text())
    if cfg.get("gamma") is not None:
        vals = pk_eval(op, cfg["gamma"])
        print("at gamma = " + io.fmt(cfg["gamma"]) + ": " + ", ".join(io.fmt(v) for v in vals))
    return 0


def cmd_quasi(cfg):
    from .quasilinear import oscillatory_component, solve_quasilinear

    _need(cfg, "lambda")
    mesh = _mesh(cfg)
    out = {"config": cfg, "n": cfg["n"], "lambda": cfg["lambda"], "delta": cfg["delta"]}
    status = 0
    try:
        prof = solve_quasilinear(cfg["n"], cfg["lambda"], mesh, cfg["delta"], tol=cfg["newton_tol"])
    except NoConvergence as exc:
        out["error"] = {"type": type(exc).__name__, "message": str(exc),
                        "best_residual": exc.best_residual}
        io.write_json(_path(cfg, "quasi.json"), out)
        return 2
    D = prof.derivatives()
    header = ["y", "F"] + [f"F{j}" for j in range(1, 11)]
    io.write_csv(_path(cfg, "quasi.csv"), header, [prof.y] + [D[:, j] for j in range(11)])
    out.update(y0=prof.y0, diagnostics=prof.diagnostics, invariants_violated=prof.check())
    if cfg["osc"]:
        try:
            osc = oscillatory_component(cfg["n"], cfg["lambda"], cfg["fourier_modes"])
            out["oscillatory"] = {k: v for k, v in osc.to_dict().items() if k != "phi"}
            io.write_csv(_path(cfg, "osc.csv"), ["s", "phi"], [osc.s, osc.phi])
        except (NoConvergence, InterfaceNotFound) as exc:
            out["oscillatory"] = {"error": str(exc)}
            status = 2
        except ValueError as exc:
            out["oscillatory"] = {"error": str(exc)}
    io.write_json(_path(cfg, "quasi.json"), out)
    if cfg["svg"]:
        io.write_svg(_path(cfg, "quasi.svg"), prof.y, [prof.F],
                     [f"n={io.fmt(cfg['n'])} lambda={io.fmt(cfg['lambda'])}"], "F = |f|^n f")
    return status


def cmd_logshift(cfg):
    from .logshift import assemble_B, build_expansion

    spec = catalog_lookup("dispersion", 11, 3)
    mesh = _mesh(cfg)
    out = {"config": cfg, "spec": spec.to_dict()}
    try:
        prof = solve(spec, cfg["lambda0"], mesh, tol=cfg["newton_tol"])
        exp = build_expansion(prof, cfg["kshift"], cfg["rhs"], with_phi=cfg["phi"])
    except (NoConvergence, SingularSystem) as exc:
        out["error"] = {"type": type(exc).__name__, "message": str(exc)}
        io.write_json(_path(cfg, "logshift.json"), out)
        return 2
    times = [float(t) for t in cfg["times"]]
    table = [{"t": t, "residual": exp.residual(t)} for t in times]
    slope = (float(np.polyfit(np.log(times), np.log([r["residual"] for r in table]), 1)[0])
             if len(times) > 1 else None)
    B = assemble_B(prof)
    out.update(residuals=table, slope=slope, kernel_defect=B.kernel_defect(),
               invariants_violated=exp.check(B))
    io.write_json(_path(cfg, "logshift.json"), out)
    io.write_csv(_path(cfg, "logshift.csv"), ["y", "f", "psi", "phi"],
                 [prof.y, prof.f, exp.psi[:, 0], exp.phi[:, 0]])
    if cfg["svg"]:
        io.write_svg(_path(cfg, "logshift.svg"), prof.y, [exp.psi[:, 0], exp.phi[:, 0]],
                     ["psi", "phi"], f"lambda0={io.fmt(cfg['lambda0'])}")
    return 0


COMMANDS = {"list": cmd_list, "solve": cmd_solve, "sweep": cmd_sweep, "lmax": cmd_lmax,
            "chars": cmd_chars, "pk": cmd_pk, "quasi": cmd_quasi, "logshift": cmd_logshift}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing subcommand")
        cfg = resolve(args)
        logging.basicConfig(level=getattr(logging, str(cfg["log_level"]).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"kppw: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except KPPError as exc:
        # invalid specs, unknown equations and other configuration problems
        print(f"kppw: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
