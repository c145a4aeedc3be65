"""Batch command-line interface.

Subcommands:

  solve     run the continuation on a config, emit artifacts + report
  diagnose  re-run the certification suite on saved artifacts
  sweep     fan a config over wedge angles / density ratios

Config files are flat INI-style sections with decimal literals; every
run embeds its fully resolved config in report.json so artifacts are
reproducible.  All files are written atomically and floats are emitted
with the shortest round-trip representation, which makes reruns of the
same config byte-identical.

Exit codes: 0 success, 1 numerical failure, 2 usage or config error.
"""

import argparse
import configparser
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import run_all
from .driver import ContinuationSchedule, continuation_solve
from .errors import ConvergenceError
from .geometry import WedgeSetup, derive_geometry
from .mesh import DensityField, build_grid
from .physics import GasModel, invert_cbar
from .shockcurve import ShockCurve

SCHEMA_VERSION = 1

_CASE_LABELS = {"case1": "Case1", "case2": "Case2", "case3": "Case3"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    gamma: float = 2.0
    rho0: float = 1.0
    rho1: float = 2.0
    theta_w: float = -math.pi / 2
    n_theta: int = 64
    n_sigma: int = 64
    omega: float = 0.5
    omega_fb: float = 0.25
    tol_nl: float = 2e-8
    tol_fb: float = 2e-6
    tol_ell: float = 1e-6
    max_iters: int = 200
    max_outer: int = 400
    stages: int = 4
    eps0: float = 0.1
    delta_ratio: float = 0.4
    directory: str = "out"
    formats: str = "csv,json"
    emit_plots: bool = False

    _SECTIONS = {
        "problem": ("gamma", "rho0", "rho1", "theta_w"),
        "grid": ("n_theta", "n_sigma"),
        "solver": ("omega", "omega_fb", "tol_nl", "tol_fb", "tol_ell",
                   "max_iters", "max_outer"),
        "continuation": ("stages", "eps0", "delta_ratio"),
        "output": ("directory", "formats", "emit_plots"),
    }
    _INTS = ("n_theta", "n_sigma", "max_iters", "max_outer", "stages")
    _STRS = ("directory", "formats")
    _BOOLS = ("emit_plots",)

    @classmethod
    def from_file(cls, path, overrides=()):
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        values = {}
        for section in parser.sections():
            if section not in cls._SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in cls._SECTIONS[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                values[key] = cls._parse_value(key, raw)
        cfg = cls(**values)
        for item in overrides:
            cfg = cfg.override(item)
        cfg.validate()
        return cfg

    @classmethod
    def _parse_value(cls, key, raw):
        raw = raw.strip()
        try:
            if key in cls._INTS:
                return int(raw)
            if key in cls._BOOLS:
                if raw.lower() in ("true", "1", "yes"):
                    return True
                if raw.lower() in ("false", "0", "no"):
                    return False
                raise ValueError(raw)
            if key in cls._STRS:
                return raw
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc

    def override(self, item):
        if "=" not in item:
            raise ConfigError(f"override must be section.key=value: {item!r}")
        dotted, raw = item.split("=", 1)
        if "." in dotted:
            section, key = dotted.split(".", 1)
            if section not in self._SECTIONS or key not in self._SECTIONS[section]:
                raise ConfigError(f"unknown override target {dotted!r}")
        else:
            key = dotted
            if not any(key in keys for keys in self._SECTIONS.values()):
                raise ConfigError(f"unknown override target {dotted!r}")
        return replace(self, **{key: self._parse_value(key, raw)})

    def validate(self):
        if self.gamma <= 1.0:
            raise ConfigError("gamma must exceed 1")
        if not 0.0 < self.rho0 < self.rho1:
            raise ConfigError("need 0 < rho0 < rho1")
        if not -math.pi < self.theta_w < 0.0:
            raise ConfigError("theta_w must lie in (-pi, 0)")
        for name in ("omega", "omega_fb", "tol_nl", "tol_fb", "tol_ell",
                     "eps0", "delta_ratio"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.n_sigma < 8 or self.n_theta < 16:
            raise ConfigError("grid too coarse: n_sigma >= 8, n_theta >= 16")
        if self.stages < 1:
            raise ConfigError("stages must be >= 1")
        if self.max_iters < 1 or self.max_outer < 1:
            raise ConfigError("iteration caps must be >= 1")

    def to_dict(self):
        out = {}
        for section, keys in self._SECTIONS.items():
            out[section] = {k: getattr(self, k) for k in keys}
        return out


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def shock_rows(shock):
    if shock.patch is not None:
        junction = shock.patch["theta_a"] + shock.patch["tau"]
    else:
        junction = -np.inf
    for t, r, rp in zip(shock.theta, shock.r, shock.r_prime):
        yield (float(t), float(r), float(rp), int(t <= junction))


def density_rows(field):
    g = field.grid
    tc, sc = g.theta_centers, g.sigma_centers
    R = np.asarray(g.outer_radius_at(tc))
    for i in range(g.n_theta):
        for j in range(g.n_sigma):
            yield (i, j, float(tc[i]), float(sc[j]),
                   float(sc[j] * R[i]), float(field.rho[i, j]))


def write_artifacts(out_dir, cfg, states, report, layer):
    final = states[-1]
    write_csv(os.path.join(out_dir, "shock.csv"),
              ("theta", "r", "r_prime", "patched_flag"),
              shock_rows(final.shock))
    write_csv(os.path.join(out_dir, "density.csv"),
              ("i", "j", "theta", "sigma", "r", "rho"),
              density_rows(final.field))
    write_csv(os.path.join(out_dir, "faces.csv"),
              ("theta", "rho_face"),
              zip(final.field.grid.theta_centers[:final.field.grid.n_lower],
                  final.faces))
    if layer is not None and layer.x.size:
        rows = []
        for k, yv in enumerate(layer.y):
            for j, xv in enumerate(layer.x):
                rows.append((float(xv), float(yv),
                             float(layer.psi[k, j]), float(layer.w[k, j])))
        write_csv(os.path.join(out_dir, "layer.csv"),
                  ("x", "y", "psi", "w"), rows)

    stages = []
    for st in states:
        stages.append({
            "eps": st.reg.eps,
            "delta": st.reg.delta,
            "iterations": st.outer_iterations,
            "converged": st.converged,
            "final_drift": st.drift_history[-1] if st.drift_history else None,
            "foot_radius": st.shock.foot_radius(),
            "rho_bar": st.rho_bar,
            "case_label": _CASE_LABELS[st.case],
        })
    _atomic_write(os.path.join(out_dir, "stages.json"),
                  json.dumps({"schema_version": SCHEMA_VERSION,
                              "stages": stages}, indent=2, sort_keys=True))

    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "case_label": _CASE_LABELS[final.case],
        "foot_radius": final.shock.foot_radius(),
        "rho_bar": final.rho_bar,
        "diagnostics": report.to_dict(),
    }
    _atomic_write(os.path.join(out_dir, "report.json"),
                  json.dumps(payload, indent=2, sort_keys=True))


def _solve_from_config(cfg):
    gas = GasModel(cfg.gamma, cfg.rho0, cfg.rho1)
    geom = derive_geometry(WedgeSetup(gas, cfg.theta_w))
    schedule = ContinuationSchedule.default(
        eps0=cfg.eps0, n_stages=cfg.stages, delta_ratio=cfg.delta_ratio)
    states = continuation_solve(
        geom, schedule, n_sigma=cfg.n_sigma, n_theta=cfg.n_theta,
        omega=cfg.omega, omega_fb=cfg.omega_fb, tol_fb=cfg.tol_fb,
        tol_nl=cfg.tol_nl, max_iters=cfg.max_iters, max_outer=cfg.max_outer,
        raise_on_fail=False)
    final = states[-1]
    if not final.converged:
        raise ConvergenceError(
            "final continuation stage did not converge "
            f"(drift {final.drift_history[-1]:.3e})",
            history=final.drift_history)
    return states


def cmd_solve(cfg):
    try:
        states = _solve_from_config(cfg)
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        print(f"drift history: {exc.history}", file=sys.stderr)
        return 1
    report, layer = run_all(states[-1])
    write_artifacts(cfg.directory, cfg, states, report, layer)
    failed = [r.name for r in report.records if r.status == "fail"]
    if failed:
        print(f"diagnostics failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    print(f"ok: case {_CASE_LABELS[states[-1].case]}, "
          f"foot {states[-1].shock.foot_radius()!r}, "
          f"artifacts in {cfg.directory}")
    return 0


def _load_artifacts(cfg, directory):
    for name in ("shock.csv", "density.csv", "report.json"):
        if not os.path.exists(os.path.join(directory, name)):
            raise ConfigError(f"missing artifact: {name} in {directory}")
    with open(os.path.join(directory, "report.json")) as handle:
        saved = json.load(handle)
    flat = {}
    for section in saved["config"].values():
        flat.update(section)
    gas = GasModel(flat["gamma"], flat["rho0"], flat["rho1"])
    geom = derive_geometry(WedgeSetup(gas, flat["theta_w"]))

    shock_data = np.loadtxt(os.path.join(directory, "shock.csv"),
                            delimiter=",", skiprows=1)
    shock = ShockCurve(theta=shock_data[:, 0], r=shock_data[:, 1],
                       r_prime=shock_data[:, 2])
    grid = build_grid(geom, shock, int(flat["n_sigma"]), int(flat["n_theta"]))
    dens = np.loadtxt(os.path.join(directory, "density.csv"),
                      delimiter=",", skiprows=1)
    rho = np.full(grid.shape, np.nan)
    rho[dens[:, 0].astype(int), dens[:, 1].astype(int)] = dens[:, 5]
    bad = np.argwhere(~np.isfinite(rho))
    if len(bad):
        i, j = bad[0]
        raise ValueError(f"density.csv: non-finite value at cell ({i}, {j})")
    field = DensityField(grid=grid, rho=rho)
    faces = None
    faces_path = os.path.join(directory, "faces.csv")
    if os.path.exists(faces_path):
        faces = np.loadtxt(faces_path, delimiter=",", skiprows=1)[:, 1]
    rho_bar = invert_cbar(shock.foot_radius(), gas.rho0, gas)

    class _State:
        pass

    state = _State()
    state.geom = geom
    state.shock = shock
    state.field = field
    state.faces = faces
    state.rho_bar = rho_bar
    return state


def cmd_diagnose(cfg, directory, layer_only=False):
    try:
        state = _load_artifacts(cfg, directory)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report, layer = run_all(state)
    if layer_only:
        records = [r for r in report.records if r.name.startswith("sonic_layer")]
        payload = {"schema_version": SCHEMA_VERSION,
                   "checks": [r.to_dict() for r in records]}
    else:
        payload = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
    _atomic_write(os.path.join(directory, "diagnose.json"),
                  json.dumps(payload, indent=2, sort_keys=True))
    failed = [r.name for r in report.records if r.status == "fail"]
    if failed and not layer_only:
        print(f"diagnostics failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    print(f"diagnostics written to {os.path.join(directory, 'diagnose.json')}")
    return 0


def _sweep_one(cfg):
    try:
        cfg.validate()
        states = _solve_from_config(cfg)
    except (ConfigError, ValueError) as exc:
        return (cfg.theta_w, cfg.rho1 / cfg.rho0, "config_error", "", "",
                "", "", "", 0, 0, str(exc))
    except ConvergenceError as exc:
        return (cfg.theta_w, cfg.rho1 / cfg.rho0, "solver_error", "", "",
                "", "", "", 0, 0, str(exc))
    final = states[-1]
    report, layer = run_all(final)
    n_pass = sum(r.status == "pass" for r in report.records)
    n_fail = sum(r.status == "fail" for r in report.records)
    strength = report["shock_inequalities"].values["min_r_minus_cbar"]
    return (cfg.theta_w, cfg.rho1 / cfg.rho0, "ok",
            _CASE_LABELS[final.case], final.shock.foot_radius(),
            strength, layer.mu, layer.exponent, n_pass, n_fail, "")


def cmd_sweep(cfg, theta_ws, rho0s, rho1s, max_workers=None):
    jobs = []
    for tw in theta_ws if theta_ws is not None else [cfg.theta_w]:
        for r0 in rho0s if rho0s is not None else [cfg.rho0]:
            for r1 in rho1s if rho1s is not None else [cfg.rho1]:
                jobs.append(replace(cfg, theta_w=tw, rho0=r0, rho1=r1))
    header = ("theta_w", "rho_ratio", "status", "case_label", "foot_radius",
              "min_shock_strength", "mu", "w_exponent", "checks_passed",
              "checks_failed", "message")
    if not jobs:
        write_csv(os.path.join(cfg.directory, "summary.csv"), header, [])
        return 0
    workers = max_workers or min(len(jobs), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(_sweep_one, jobs))
    write_csv(os.path.join(cfg.directory, "summary.csv"), header, rows)
    print(f"sweep summary in {os.path.join(cfg.directory, 'summary.csv')}")
    return 0


def _parse_float_list(raw):
    if raw is None:
        return None
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list: {raw!r}") from exc


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="shockdiff",
        description="Shock diffraction free boundary solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "diagnose", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=(name != "diagnose"))
        p.add_argument("--out", default=None,
                       help="output (or artifact) directory")
        p.add_argument("--stage-override", action="append", default=[],
                       metavar="KEY=VALUE")
        if name == "diagnose":
            p.add_argument("--layer-only", action="store_true")
        if name == "sweep":
            p.add_argument("--theta-w", default=None,
                           help="comma-separated wedge angles")
            p.add_argument("--rho0", default=None)
            p.add_argument("--rho1", default=None)
    args = parser.parse_args(argv)

    try:
        if args.config is not None:
            cfg = RunConfig.from_file(args.config,
                                      overrides=args.stage_override)
        else:
            cfg = RunConfig()
            for item in args.stage_override:
                cfg = cfg.override(item)
            cfg.validate()
        if args.out is not None:
            cfg = replace(cfg, directory=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "solve":
        return cmd_solve(cfg)
    if args.command == "diagnose":
        return cmd_diagnose(cfg, cfg.directory, layer_only=args.layer_only)
    try:
        theta_ws = _parse_float_list(args.theta_w)
        rho0s = _parse_float_list(args.rho0)
        rho1s = _parse_float_list(args.rho1)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return cmd_sweep(cfg, theta_ws, rho0s, rho1s)


if __name__ == "__main__":
    sys.exit(main())
