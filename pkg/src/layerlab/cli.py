"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 numerical
failure (blow-up, Newton divergence, ill-conditioning).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import dynamics as dyn
from . import operlab as ol
from . import resonance as res
from . import simulator as sim
from . import spectral as sp
from . import wavesolver as ws
from .dispersion import ModelParams, b_coeff, bifurcation_speed, linear_wave, omega
from .errors import (BlowUpError, ConditioningError, DivergenceError, LayerLabError, NumericalError)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3

# config key -> flag destination
CONFIG_KEYS = {
    "model.a": "a", "model.eps": "eps", "model.splus": "splus", "model.sminus": "sminus",
    "model.amps": "amps",
    "grid.n_x": "grid",
    "sim.dt": "dt", "sim.t_end": "t_end", "sim.scheme": "scheme", "sim.stride": "stride",
    "sim.init": "init",
    "solver.cutoff": "cutoff", "solver.tol": "tol", "solver.eps_path": "eps_path",
    "validate.t_check": "t_check", "validate.sim_tol": "sim_tol",
    "scan.gamma": "gamma", "scan.tau": "tau", "scan.ellmax": "ellmax",
    "scan.a_lo": "a_lo", "scan.a_hi": "a_hi", "scan.count": "count",
    "spectrum.l_phi": "l_phi", "spectrum.l_x": "l_x",
    "dispersion.modes": "modes",
    "output.dir": "out", "seed": "seed",
}

DEFAULTS = {
    "a": 1.0, "eps": 0.0, "splus": "", "sminus": "", "amps": "", "grid": 64, "dt": 1e-3,
    "t_end": 1.0, "scheme": "lawson_rk4", "stride": None, "init": "linear", "cutoff": 8,
    "tol": 1e-10, "eps_path": "", "t_check": 1.0, "sim_tol": 1e-6, "gamma": 1e-4, "tau": 2.0,
    "ellmax": 20, "a_lo": 0.5, "a_hi": 1.5, "count": 1000, "l_phi": 6, "l_x": 32,
    "modes": "1,2,3", "out": ".", "seed": 0,
}

SUBCOMMANDS = ("dispersion", "simulate", "solve-wave", "validate-wave", "scan-cantor",
               "audit-divisors", "spectrum", "verify-ep")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> tuple[int, ...]:
    text = str(text).strip()
    return tuple(int(v) for v in text.split(",") if v.strip()) if text else ()


def _float_list(text: str) -> tuple[float, ...]:
    text = str(text).strip()
    return tuple(float(v) for v in text.split(",") if v.strip()) if text else ()


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``[section]`` headers prefix later keys."""
    out, section = {}, ""
    with open(path) as fh:
        for no, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{no}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            full = f"{section}.{key}" if section and "." not in key and key != "seed" else key
            if full not in CONFIG_KEYS:
                raise UsageError(f"{path}:{no}: unknown config key {full!r}")
            out[CONFIG_KEYS[full]] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="layerlab", description="Two-layer dispersive wave toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config")
        s.add_argument("--a", type=float)
        s.add_argument("--eps", type=float)
        s.add_argument("--splus")
        s.add_argument("--sminus")
        s.add_argument("--amps")
        s.add_argument("--gamma", type=float)
        s.add_argument("--tau", type=float)
        s.add_argument("--ellmax", type=int)
        s.add_argument("--grid", type=int)
        s.add_argument("--dt", type=float)
        s.add_argument("--t-end", dest="t_end", type=float)
        s.add_argument("--cutoff", type=int)
        s.add_argument("--tol", type=float)
        s.add_argument("--out")
        s.add_argument("--seed", type=int)
        if name == "dispersion":
            s.add_argument("--modes")
        if name == "simulate":
            s.add_argument("--scheme", choices=sim.SCHEMES)
            s.add_argument("--stride", type=int)
            s.add_argument("--init", choices=("linear", "random"))
        if name == "solve-wave":
            s.add_argument("--eps-path", dest="eps_path")
        if name in ("validate-wave", "spectrum"):
            s.add_argument("--input")
        if name == "validate-wave":
            s.add_argument("--t-check", dest="t_check", type=float)
            s.add_argument("--sim-tol", dest="sim_tol", type=float)
        if name == "scan-cantor":
            s.add_argument("--a-lo", dest="a_lo", type=float)
            s.add_argument("--a-hi", dest="a_hi", type=float)
        if name == "audit-divisors":
            s.add_argument("--count", type=int)
        if name == "spectrum":
            s.add_argument("--l-phi", dest="l_phi", type=int)
            s.add_argument("--l-x", dest="l_x", type=int)
    return p


def _options(ns: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if ns.config:
        try:
            opts.update(read_config(ns.config))
        except OSError as err:
            raise UsageError(f"cannot read config: {err}") from err
    for key, value in vars(ns).items():
        if key not in ("command", "config") and value is not None:
            opts[key] = value
    casts = {"a": float, "eps": float, "grid": int, "dt": float, "t_end": float, "cutoff": int,
             "tol": float, "t_check": float, "sim_tol": float, "gamma": float, "tau": float,
             "ellmax": int, "a_lo": float, "a_hi": float, "count": int, "l_phi": int, "l_x": int,
             "seed": int}
    try:
        for key, cast in casts.items():
            opts[key] = cast(opts[key])
        if opts["stride"] is not None:
            opts["stride"] = int(opts["stride"])
    except (TypeError, ValueError) as err:
        raise UsageError(f"bad option value: {err}") from err
    return opts


def _params(opts: dict) -> ModelParams:
    try:
        splus, sminus = _int_list(opts["splus"]), _int_list(opts["sminus"])
        amps = _float_list(opts["amps"])
    except ValueError as err:
        raise UsageError(f"bad mode or amplitude list: {err}") from err
    if splus or sminus:
        if amps and len(amps) != len(splus) + len(sminus):
            raise UsageError("--amps needs one value per tangential mode")
    else:
        amps = ()
    if not amps:
        amps = (1.0,) * (len(splus) + len(sminus))
    return ModelParams(a=opts["a"], eps=opts["eps"], s_plus=splus, s_minus=sminus,
                       amps_plus=amps[:len(splus)], amps_minus=amps[len(splus):])


def _out(opts: dict, name: str) -> str:
    os.makedirs(opts["out"], exist_ok=True)
    return os.path.join(opts["out"], name)


def _g(v: float) -> str:
    return f"{float(v):.17g}"


def _rel(new: float, old: float) -> float:
    return abs(new - old) / abs(old) if old else abs(new - old)


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def cmd_dispersion(opts):
    a = opts["a"]
    modes = _int_list(opts["modes"])
    if not modes or any(m <= 0 for m in modes):
        raise UsageError("--modes needs positive integers")
    path = _out(opts, "dispersion.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "Omega", "b", "c"])
        for j in modes:
            w.writerow([j, _g(omega(a, j)), _g(b_coeff(a, j)), _g(bifurcation_speed(a, j))])
    _emit({"command": "dispersion", "file": path, "modes": list(modes)})
    return EXIT_OK


def _initial(opts, params, grid):
    x = grid.x()
    if opts["init"] == "random":
        rng = np.random.default_rng(opts["seed"])
        amp = _float_list(opts["amps"])[:1] or (1.0,)
        kband = max(1, grid.kmax // 4)
        c = np.stack([sp.random_bandlimited(rng, grid.n_x, kband, amp[0]) for _ in range(2)])
        return sp.PairField.from_coeffs(*c, grid.n_x)
    if params.d == 0:
        raise UsageError("linear initial data needs --splus or --sminus")
    w = linear_wave(params, 0.0, x)
    return sp.PairField.from_arrays(w[:, 0], w[:, 1])


def cmd_simulate(opts):
    params = _params(opts)
    grid = sp.GridSpec(opts["grid"])
    n_steps = max(1, math.ceil(opts["t_end"] / opts["dt"] - 1e-9))
    stride = opts["stride"] or max(1, n_steps // 100)
    cfg = sim.SimConfig(params, grid, opts["dt"], opts["t_end"], opts["scheme"], stride)
    result = sim.run(cfg, _initial(opts, params, grid))
    traj, diag = _out(opts, "trajectory.csv"), _out(opts, "diagnostics.csv")
    sim.write_trajectory_csv(traj, result)
    sim.write_diagnostics_csv(diag, result)
    d0, d1 = result.diagnostics[0], result.diagnostics[-1]
    flat = dyn.flat_energy(params.a)
    _emit({"command": "simulate", "trajectory": traj, "diagnostics": diag,
           "energy_drift": _g(_rel(d1.energy - flat, d0.energy - flat)),
           "momentum_drift": _g(_rel(d1.momentum, d0.momentum))})
    return EXIT_OK


def cmd_solve_wave(opts):
    params = _params(opts)
    path = _float_list(opts["eps_path"]) or None
    sol = ws.solve(params, opts["cutoff"], tol=opts["tol"], eps_path=path)
    out = _out(opts, "wave.json")
    ws.save_solution(out, sol, params)
    _emit({"command": "solve-wave", "file": out, "omega": [_g(v) for v in sol.omega],
           "residual": _g(sol.residual_norm), "newton_iters": sol.newton_iters})
    return EXIT_OK


def _load(opts):
    if not opts.get("input"):
        raise UsageError("--input wave.json is required")
    try:
        return ws.load_solution(opts["input"])
    except (OSError, KeyError, ValueError) as err:
        raise UsageError(f"cannot load solution: {err}") from err


def cmd_validate_wave(opts):
    sol, params = _load(opts)
    rep = ws.validate(sol, params, opts["t_check"], opts["dt"], tol=opts["tol"])
    passed = rep.ok and rep.sim_error <= opts["sim_tol"]
    out = _out(opts, "validation.json")
    doc = {"residual_L": _g(rep.residual_L), "residual_2L": _g(rep.residual_2L),
           "residual_ok": rep.residual_ok, "sim_error": _g(rep.sim_error),
           "reversible": rep.reversible, "momentum_support": rep.momentum_support, "passed": passed}
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    _emit({"command": "validate-wave", "file": out, **doc})
    return EXIT_OK if passed else EXIT_INVALID


def cmd_scan_cantor(opts):
    params = _params(opts)
    scan = res.cantor_measure(params, opts["a_lo"], opts["a_hi"], opts["gamma"], opts["tau"],
                              opts["ellmax"])
    out = _out(opts, "cantor.json")
    with open(out, "w") as fh:
        fh.write(scan.to_json())
    _emit({"command": "scan-cantor", "file": out, "excluded_fraction": _g(scan.excluded_fraction)})
    return EXIT_OK


def cmd_audit_divisors(opts):
    params = _params(opts)
    rng = np.random.default_rng(opts["seed"])
    audits, rejected = res.random_audits(params, opts["count"], rng, gamma=opts["gamma"], tau=opts["tau"])
    out = _out(opts, "audit.csv")
    res.write_audit_csv(out, audits)
    fails = sum(not au.passed for au in audits)
    _emit({"command": "audit-divisors", "file": out, "audited": len(audits), "rejected": rejected,
           "failures": fails})
    return EXIT_OK


def cmd_spectrum(opts):
    if opts.get("input"):
        sol, params = _load(opts)
    else:
        params = _params(opts)
        sol = ws.solve(params, opts["cutoff"], tol=opts["tol"])
    mat = ol.linearized_floquet(sol, params, opts["l_phi"], opts["l_x"])
    rep = ol.spectrum(mat)
    out = _out(opts, "spectrum.csv")
    ol.write_spectrum_csv(out, rep)
    fit = rep.tail_fit or {}
    _emit({"command": "spectrum", "file": out, "max_abs_real": _g(rep.max_abs_real),
           "tail_exponent": _g(fit["exponent"]) if fit else None,
           "c_plus": _g(mat.transport[0]), "c_minus": _g(mat.transport[1])})
    return EXIT_OK


def cmd_verify_ep(opts):
    params = _params(opts)
    if params.eps <= 0:
        raise UsageError("verify-ep needs --eps > 0")
    grid = sp.GridSpec(opts["grid"])
    rng = np.random.default_rng(opts["seed"])
    c = np.stack([sp.random_bandlimited(rng, grid.n_x, max(1, grid.kmax // 4), 1.0) for _ in range(2)])
    r0 = sp.PairField.from_coeffs(*c, grid.n_x)
    layer = sim.evolve(r0, sim.SimConfig(params, grid, opts["dt"], opts["t_end"]))
    ep = sim.evolve(r0, sim.SimConfig(params, grid, opts["dt"], opts["t_end"], formulation="euler_poisson"))
    s1, s2 = dyn.to_euler_poisson(layer, params), dyn.to_euler_poisson(ep, params)
    err = max(float(np.abs(s1.rho.values - s2.rho.values).max()),
              float(np.abs(s1.u.values - s2.u.values).max()))
    tol = 1e-6
    out = _out(opts, "verify_ep.json")
    doc = {"sup_mismatch": _g(err), "tolerance": tol, "passed": err <= tol}
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    _emit({"command": "verify-ep", "file": out, **doc})
    return EXIT_OK if err <= tol else EXIT_INVALID


COMMANDS = {
    "dispersion": cmd_dispersion, "simulate": cmd_simulate, "solve-wave": cmd_solve_wave,
    "validate-wave": cmd_validate_wave, "scan-cantor": cmd_scan_cantor,
    "audit-divisors": cmd_audit_divisors, "spectrum": cmd_spectrum, "verify-ep": cmd_verify_ep,
}


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        opts = _options(ns)
        return COMMANDS[ns.command](opts)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (BlowUpError, DivergenceError, ConditioningError, NumericalError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except LayerLabError as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:
        # --help
        return EXIT_OK if err.code in (0, None) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
