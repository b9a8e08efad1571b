"""Batch command-line front end.

Subcommands: pt-compute, dynamics, correlations, gradient, optimize,
meanfield, tebd.  Runs are driven by a TOML config with sections [bath],
[system], [parameters], [run]; every run writes a manifest JSON capturing the
config, input hashes, parameters, and package versions, and can be re-run
byte-identically from that manifest.

Exit codes: 0 ok, 2 config error, 3 numeric error, 4 I/O error.
"""

import argparse
import hashlib
import json
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import scipy

from . import __version__
from .application import (ControlSequence, compute_correlations_nt,
                          compute_dynamics, correlations_to_csv,
                          dynamics_to_csv)
from .bath import Bath, CustomSD, PowerLawSD
from .chain import (PtTebdParameters, bond_telemetry_to_csv,
                    compute_chain_dynamics)
from .engines import TempoParameters, pt_tempo_compute, tempo_compute
from .gradient import (LinearObjective, history_to_json, optimize_controls,
                       state_gradient)
from .meanfield import compute_meanfield_dynamics, field_to_csv
from .operators import named_operator, spin_dm
from .process_tensor import bond_profile, pt_read, pt_write, trivial_pt
from .system import (FieldSystem, MeanFieldSystem, ParameterizedSystem,
                     System, SystemChain, xy_chain)
from .tensor import NumericsError


class ConfigError(ValueError):
    """A config file violates the schema."""


# -- config parsing ----------------------------------------------------------


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing key '{key}' in [{where}]")
    return section[key]


def parse_complex(value) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2:
        return complex(value[0], value[1])
    raise ConfigError(f"cannot parse complex number from {value!r}")


def parse_matrix(value) -> np.ndarray:
    rows = []
    for row in value:
        rows.append([parse_complex(x) for x in row])
    m = np.array(rows, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError("matrix must be square")
    return m


def parse_operator(value, dim: int = 2) -> np.ndarray:
    """Operator from a shorthand string or an explicit matrix.

    Strings may carry a real prefactor, e.g. ``"0.5*sigma_z"``.
    """
    if isinstance(value, str):
        factor = 1.0
        name = value
        if "*" in value:
            head, name = value.split("*", 1)
            try:
                factor = float(head)
            except ValueError:
                raise ConfigError(f"bad operator prefactor in {value!r}")
        try:
            return factor * named_operator(name.strip(), dim)
        except ValueError as exc:
            raise ConfigError(str(exc))
    if isinstance(value, list):
        return parse_matrix(value)
    raise ConfigError(f"cannot parse operator from {value!r}")


def parse_state(value) -> np.ndarray:
    if isinstance(value, str):
        try:
            return spin_dm(value)
        except KeyError:
            raise ConfigError(f"unknown state shorthand {value!r}")
    return parse_matrix(value)


def build_bath(cfg: dict) -> Bath:
    section = _need(cfg, "bath", "bath")
    coupling = parse_operator(section.get("coupling_operator", "sigma_z"))
    temperature = float(section.get("temperature", 0.0))
    if "file" in section:
        sd = CustomSD.from_file(section["file"])
    else:
        sd = PowerLawSD(alpha=float(_need(section, "alpha", "bath")),
                        zeta=float(section.get("zeta", 1.0)),
                        omega_c=float(_need(section, "omega_c", "bath")),
                        cutoff=section.get("cutoff", "exponential"))
    try:
        return Bath(coupling, sd, temperature)
    except ValueError as exc:
        raise ConfigError(str(exc))


def build_system(cfg: dict) -> System:
    section = _need(cfg, "system", "system")
    h = parse_operator(_need(section, "hamiltonian", "system"))
    channels = []
    for entry in section.get("lindblad", []):
        gamma, op = entry[0], entry[1]
        channels.append((float(gamma), parse_operator(op)))
    try:
        return System(h, channels)
    except ValueError as exc:
        raise ConfigError(str(exc))


def build_parameters(cfg: dict) -> TempoParameters:
    section = _need(cfg, "parameters", "parameters")
    try:
        return TempoParameters(
            dt=float(_need(section, "dt", "parameters")),
            epsrel=float(_need(section, "epsrel", "parameters")),
            tcut=(float(section["tcut"]) if "tcut" in section else None),
            max_rank=(int(section["max_rank"])
                      if "max_rank" in section else None),
            degeneracy=bool(section.get("degeneracy", True)))
    except ValueError as exc:
        raise ConfigError(str(exc))


def _n_steps(cfg: dict) -> int:
    section = _need(cfg, "parameters", "parameters")
    n = int(_need(section, "n_steps", "parameters"))
    if n < 1:
        raise ConfigError("n_steps must be >= 1")
    return n


def _load_pts(cfg: dict, inputs: dict):
    """Resolve [run] pt_file (string or list; 'trivial' builds on the fly)."""
    run = cfg.get("run", {})
    value = run.get("pt_file", "trivial")
    names = [value] if isinstance(value, str) else list(value)
    pts = []
    for name in names:
        if name == "trivial":
            params = _need(cfg, "parameters", "parameters")
            d = int(params.get("dimension", 2))
            pts.append(trivial_pt(d, _n_steps(cfg), float(params["dt"])))
        else:
            if not os.path.exists(name):
                raise ConfigError(f"process tensor file not found: {name}")
            inputs[name] = _sha256_file(name)
            pts.append(pt_read(name))
    return pts


# -- manifest ----------------------------------------------------------------


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _sha256_file(path: str) -> str:
    with open(path, "rb") as fh:
        return _sha256_bytes(fh.read())


def _write_manifest(out_dir, subcommand, config_text, inputs, outputs,
                    extra=None, seed=None):
    manifest = {
        "tool": "ptmpo",
        "version": __version__,
        "subcommand": subcommand,
        "config_text": config_text,
        "config_sha256": _sha256_bytes(config_text.encode()),
        "inputs": inputs,
        "outputs": {os.path.basename(p): _sha256_file(p) for p in outputs},
        "seed": seed,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- subcommands -------------------------------------------------------------


def _cmd_pt_compute(cfg, out_dir, args, inputs):
    bath = build_bath(cfg)
    params = build_parameters(cfg)
    n_steps = _n_steps(cfg)
    pt = pt_tempo_compute(bath, params, n_steps)
    path = os.path.join(out_dir, cfg.get("run", {}).get("output", "pt.oqpt"))
    pt_write(pt, path)
    extra = {"bond_profile": bond_profile(pt).extents}
    return [path], extra


def _cmd_dynamics(cfg, out_dir, args, inputs):
    system = build_system(cfg)
    run = cfg.get("run", {})
    rho0 = parse_state(_need(run, "initial_state", "run"))
    n_steps = _n_steps(cfg)
    if run.get("engine", "pt") == "tempo":
        bath = build_bath(cfg)
        params = build_parameters(cfg)
        dynamics = tempo_compute(system, bath, rho0, params, n_steps)
    else:
        pts = _load_pts(cfg, inputs)
        dynamics = compute_dynamics(system, pts, rho0, n_steps=n_steps)
    path = os.path.join(out_dir, "dynamics.csv")
    dynamics_to_csv(dynamics, path)
    outputs = [path]
    observables = run.get("observables", [])
    if observables:
        obs_path = os.path.join(out_dir, "observables.csv")
        with open(obs_path, "w") as fh:
            fh.write("t," + ",".join(
                "re_%s,im_%s" % (o, o) for o in observables) + "\n")
            ops = [parse_operator(o) for o in observables]
            for i, t in enumerate(dynamics.times):
                vals = [np.trace(op @ dynamics.states[i]) for op in ops]
                fh.write(",".join(["%.17g" % t] + [
                    "%.17g,%.17g" % (v.real, v.imag) for v in vals]) + "\n")
        outputs.append(obs_path)
    return outputs, {}


def _cmd_correlations(cfg, out_dir, args, inputs):
    system = build_system(cfg)
    run = cfg.get("run", {})
    rho0 = parse_state(_need(run, "initial_state", "run"))
    pts = _load_pts(cfg, inputs)
    ops = [(parse_operator(o), side)
           for o, side in _need(run, "operators", "run")]
    times = _need(run, "times", "run")  # step indices, last may be a list
    values = compute_correlations_nt(system, pts[0], ops, times, rho0)
    last = times[-1]
    sweep = list(last) if isinstance(last, list) else [last]
    dt = pts[0].dt
    path = os.path.join(out_dir, "correlations.csv")
    correlations_to_csv([s * dt for s in sweep], np.atleast_1d(values), path)
    return [path], {}


def _parameterized_system(cfg) -> ParameterizedSystem:
    section = _need(cfg, "system", "system")
    h0 = parse_operator(_need(section, "hamiltonian", "system"))
    control_ops = [parse_operator(o)
                   for o in _need(section, "control_operators", "system")]
    bounds = None
    if "bounds" in section:
        bounds = [(float(lo), float(hi)) for lo, hi in section["bounds"]]

    def builder(*c):
        h = h0.copy()
        for value, op in zip(c, control_ops):
            h = h + value * op
        return h

    derivatives = [(lambda *c, op=op: op) for op in control_ops]
    return ParameterizedSystem(builder, len(control_ops), bounds=bounds,
                               derivatives=derivatives)


def _initial_values(run, ps, n_steps, rng):
    value = run.get("values", "zeros")
    if value == "zeros":
        return np.zeros((2 * n_steps, ps.n_params))
    if value == "random":
        v = rng.standard_normal((2 * n_steps, ps.n_params))
        if ps.bounds is not None:
            lo = np.array([b[0] for b in ps.bounds])
            hi = np.array([b[1] for b in ps.bounds])
            v = lo + (hi - lo) * (0.5 + 0.5 * np.tanh(v))
        return v
    return np.array(value, dtype=float)


def _cmd_gradient(cfg, out_dir, args, inputs):
    ps = _parameterized_system(cfg)
    run = cfg.get("run", {})
    rho0 = parse_state(_need(run, "initial_state", "run"))
    target = parse_state(_need(run, "target_state", "run"))
    pts = _load_pts(cfg, inputs)
    n_steps = _n_steps(cfg)
    rng = np.random.default_rng(args.seed)
    values = _initial_values(run, ps, n_steps, rng)
    result = state_gradient(ps, pts[0], rho0, LinearObjective(target.T),
                            values)
    path = os.path.join(out_dir, "gradient.json")
    with open(path, "w") as fh:
        json.dump({"value": result.value.real,
                   "dZ_dc_real": np.real(result.dZ_dc).tolist()},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [path], {}


def _cmd_optimize(cfg, out_dir, args, inputs):
    ps = _parameterized_system(cfg)
    run = cfg.get("run", {})
    rho0 = parse_state(_need(run, "initial_state", "run"))
    target = parse_state(_need(run, "target_state", "run"))
    pts = _load_pts(cfg, inputs)
    n_steps = _n_steps(cfg)
    rng = np.random.default_rng(args.seed)
    values = _initial_values(run, ps, n_steps, rng)
    budget = int(run.get("budget", 50))
    best, history = optimize_controls(ps, pts[0], rho0,
                                      LinearObjective(target.T),
                                      values, budget=budget)
    vpath = os.path.join(out_dir, "values.json")
    with open(vpath, "w") as fh:
        json.dump({"values": best.tolist(),
                   "objective": history[-1]["objective"] if history else None},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    hpath = os.path.join(out_dir, "history.json")
    history_to_json(history, hpath)
    return [vpath, hpath], {}


def _cmd_meanfield(cfg, out_dir, args, inputs):
    run = cfg.get("run", {})
    eom_cfg = _need(run, "field_eom", "run")
    omega = float(eom_cfg.get("omega", 0.0))
    kappa = float(eom_cfg.get("kappa", 0.0))
    couplings = [parse_complex(g) for g in eom_cfg.get("couplings", [])]

    subsystems = []
    for sub in _need(run, "subsystems", "run"):
        h0 = parse_operator(_need(sub, "hamiltonian", "run.subsystems"))
        g = parse_complex(sub.get("coupling", 0.0))
        coupling_op = parse_operator(
            sub.get("coupling_operator", "sigma_minus"))
        expectation = parse_operator(
            sub.get("expectation_operator", "sigma_minus"))
        channels = [(float(gamma), parse_operator(op))
                    for gamma, op in sub.get("lindblad", [])]

        def h_of(t, alpha, h0=h0, g=g, op=coupling_op):
            return (h0 + g * alpha * op.conj().T
                    + np.conj(g * alpha) * op)

        subsystems.append(FieldSystem(h_of, expectation, channels))
    if couplings and len(couplings) != len(subsystems):
        raise ConfigError("field_eom.couplings length mismatch")
    if not couplings:
        couplings = [0.0] * len(subsystems)

    def eom(t, alpha, expectations):
        drive = sum(g * ex for g, ex in zip(couplings, expectations))
        return -(1j * omega + kappa) * alpha - 1j * drive

    mfs = MeanFieldSystem(subsystems, eom)
    rho0s = [parse_state(_need(sub, "initial_state", "run.subsystems"))
             for sub in run["subsystems"]]
    pts = _load_pts(cfg, inputs)
    if len(pts) == 1 and len(subsystems) > 1:
        pts = pts * len(subsystems)
    field0 = parse_complex(_need(run, "field0", "run"))
    result = compute_meanfield_dynamics(mfs, pts, rho0s, field0,
                                        None, _n_steps(cfg))
    fpath = os.path.join(out_dir, "field.csv")
    field_to_csv(result.dynamics[0].times[:len(result.fields)],
                 result.fields, fpath)
    outputs = [fpath]
    for i, dyn in enumerate(result.dynamics):
        path = os.path.join(out_dir, "subsystem_%d.csv" % i)
        dynamics_to_csv(dyn, path)
        outputs.append(path)
    return outputs, {"operation_counts": result.operation_counts}


def _cmd_tebd(cfg, out_dir, args, inputs):
    section = _need(cfg, "system", "system")
    params_cfg = _need(cfg, "parameters", "parameters")
    run = cfg.get("run", {})
    if "n_sites" in section:
        chain = xy_chain(int(section["n_sites"]),
                         epsilon=float(section.get("epsilon", 1.0)),
                         coupling=float(section.get("coupling", 1.0)),
                         anisotropy=float(section.get("anisotropy", 0.0)))
    else:
        sites = [parse_operator(o) for o in _need(section, "site_hamiltonians",
                                                  "system")]
        bonds = [parse_operator(o) for o in _need(section, "bond_hamiltonians",
                                                  "system")]
        chain = SystemChain(sites[0].shape[0], sites, bonds)
    try:
        params = PtTebdParameters(
            dt=float(_need(params_cfg, "dt", "parameters")),
            order=int(params_cfg.get("order", 2)),
            epsrel_tebd=float(params_cfg.get("epsrel_tebd", 1e-7)),
            max_bond=(int(params_cfg["max_bond"])
                      if "max_bond" in params_cfg else None))
    except ValueError as exc:
        raise ConfigError(str(exc))
    n_steps = _n_steps(cfg)
    attach = run.get("attach_sites", [])
    pts = [None] * chain.length
    if attach:
        loaded = _load_pts(cfg, inputs)
        if len(loaded) == 1:
            loaded = loaded * len(attach)
        for site, pt in zip(attach, loaded):
            pts[int(site)] = pt
    initial = [parse_state(s) for s in _need(run, "initial_sites", "run")]
    result = compute_chain_dynamics(chain, pts, initial, params, n_steps)
    spath = os.path.join(out_dir, "sites.csv")
    with open(spath, "w") as fh:
        fh.write("t," + ",".join(
            "p_up_site%d" % i for i in range(chain.length)) + "\n")
        for s, t in enumerate(result.times):
            pops = [result.states[i][s][0, 0].real
                    for i in range(chain.length)]
            fh.write(",".join(["%.17g" % t] + ["%.17g" % p for p in pops])
                     + "\n")
    bpath = os.path.join(out_dir, "bonds.csv")
    bond_telemetry_to_csv(result, bpath)
    return [spath, bpath], {}


_COMMANDS = {
    "pt-compute": _cmd_pt_compute,
    "dynamics": _cmd_dynamics,
    "correlations": _cmd_correlations,
    "gradient": _cmd_gradient,
    "optimize": _cmd_optimize,
    "meanfield": _cmd_meanfield,
    "tebd": _cmd_tebd,
}


# -- driver ------------------------------------------------------------------


def _load_config(path: str):
    """Load a TOML config, or recover the config from a manifest JSON."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".json"):
        manifest = json.loads(raw.decode())
        text = manifest["config_text"]
    else:
        text = raw.decode()
    try:
        return tomllib.loads(text), text
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}")


def _run_one(subcommand, config_path, out_dir, args):
    cfg, text = _load_config(config_path)
    os.makedirs(out_dir, exist_ok=True)
    inputs = {config_path: _sha256_bytes(text.encode())}
    outputs, extra = _COMMANDS[subcommand](cfg, out_dir, args, inputs)
    _write_manifest(out_dir, subcommand, text, inputs, outputs,
                    extra=extra, seed=args.seed)
    if args.verbose:
        for path in outputs:
            print("wrote", path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ptmpo",
        description="Process-tensor simulations of open quantum systems")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True,
                        help="TOML config or manifest JSON to re-run")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for [sweep] configs")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for randomized optimizer starts")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg, _ = _load_config(args.config)
        sweep = cfg.get("sweep")
        if sweep:
            key = _need(sweep, "key", "sweep")
            values = _need(sweep, "values", "sweep")
            jobs = []
            for i, value in enumerate(values):
                sub_cfg_path = os.path.join(args.out, "sweep_%d.toml" % i)
                os.makedirs(args.out, exist_ok=True)
                _write_sweep_config(args.config, key, value, sub_cfg_path)
                jobs.append((sub_cfg_path,
                             os.path.join(args.out, "sweep_%d" % i)))
            if args.jobs > 1:
                import multiprocessing
                with multiprocessing.Pool(args.jobs) as pool:
                    pool.starmap(_run_one, [
                        (args.subcommand, c, o, args) for c, o in jobs])
            else:
                for c, o in jobs:
                    _run_one(args.subcommand, c, o, args)
        else:
            _run_one(args.subcommand, args.config, args.out, args)
    except ConfigError as exc:
        print("config error:", exc, file=sys.stderr)
        return 2
    except NumericsError as exc:
        print("numeric error:", exc, file=sys.stderr)
        return 3
    except OSError as exc:
        print("I/O error:", exc, file=sys.stderr)
        return 4
    return 0


def _write_sweep_config(base_path, key, value, dest):
    """Materialize one sweep point as a standalone TOML config."""
    cfg, text = _load_config(base_path)
    section, _, leaf = key.rpartition(".")
    lines = text.splitlines()
    out = []
    in_section = not section
    replaced = False
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("["):
            in_section = stripped == f"[{section}]"
        if (in_section and not replaced
                and stripped.split("=")[0].strip() == leaf):
            line = f"{leaf} = {json.dumps(value)}"
            replaced = True
        out.append(line)
    if not replaced:
        raise ConfigError(f"sweep key {key!r} not found in config")
    with open(dest, "w") as fh:
        fh.write("\n".join(out) + "\n")


if __name__ == "__main__":
    sys.exit(main())
