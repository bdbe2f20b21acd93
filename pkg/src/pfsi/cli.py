"""Command line front end: configuration, runs, archives and reports.

Subcommands
-----------
run      solve every stage of a configured continuation and write artifacts
check    recompute the diagnostics of an archived state
oracle   run one of the brute-force reference comparisons
sweep    run each stage of a schedule independently (cold starts)

Verbosity follows the ``PFSI_LOG`` environment variable (``DEBUG``,
``INFO``, ``WARNING``, ...).

Archive layout (``PFSI1``, all integers and floats little-endian)::

    magic      8 bytes   b"PFSI1\\0\\0\\0"
    version    uint32
    hlen       uint32    length of the JSON header in bytes
    header     hlen bytes UTF-8 JSON (config echo, config hash, stage tag,
                         stage, array shapes)
    arrays     float64   rho real part, rho imaginary part, u coefficients,
                         eta coefficients, each C-ordered
    digest     32 bytes  SHA-256 of everything above

CSV columns (version 1): ``t, E, E_delta, diss_viscous, diss_beam,
diss_cubic, diss_penalty``.  JSON summary keys are listed in
:data:`SUMMARY_KEYS`.
"""

import argparse
import copy
from dataclasses import dataclass
import csv
import hashlib
import json
import logging
import os
from pathlib import Path
import struct
import sys

import numpy as np
import yaml

from .basis import SpectralField
from .density import DensityField
from .errors import (ArchiveError, ConfigurationError, InputDomainError, InternalError,
                     PFSIError, SolverError)
from .geometry import DomainSpec

__all__ = ["RunConfig", "StateArchive", "parse_config", "load_config_text", "config_from_mapping",
           "save_archive",
           "load_archive", "cmd_run", "cmd_check", "cmd_oracle", "cmd_sweep", "main",
           "ARCHIVE_VERSION", "CSV_COLUMNS", "SUMMARY_KEYS"]

log = logging.getLogger("pfsi")

MAGIC = b"PFSI1\0\0\0"
ARCHIVE_VERSION = 1
CSV_VERSION = 1
CSV_COLUMNS = ("t", "E", "E_delta", "diss_viscous", "diss_beam", "diss_cubic", "diss_penalty")
SUMMARY_KEYS = ("csv_version", "config_hash", "stage_tag", "stages", "exit_code")

#: two-sided tolerance of the equality checks, relative to their scale
EQUALITY_TOL = 1e-8
#: mass check tolerance relative to m0
MASS_TOL = 1e-10

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_SOLVER, EXIT_ARCHIVE, EXIT_INTERNAL = range(6)

DEFAULTS = {
    "mu": 1.0,
    "zeta": 1.0,
    "a": 5.0,
    "forcing": {"f": [], "F": []},
    "discretization": {"m": 2, "n_beam": 4, "n_fluid": 12, "beam_grid": None},
    "schedule": [{"eps": 1e-1, "delta": 1e-1}, {"eps": 1e-2, "delta": 1e-2},
                 {"eps": 1e-3, "delta": 1e-3}],
    "solver": {"tol": 1e-10, "maxiter": 400, "relaxation": 0.5, "anderson": 10,
               "density_factor": 2},
    "output": "pfsi_out",
    "seed": 0,
}
REQUIRED = ("L", "H", "T", "m0", "gamma")
STAGE_KEYS = {"eps", "delta", "m", "n_beam", "n_fluid", "tol", "maxiter"}


# ----------------------------------------------------------------------
# configuration


class _UniqueKeyLoader(yaml.SafeLoader):
    """Safe loader refusing duplicate mapping keys."""


def _construct_mapping(loader, node, deep=False):
    seen = {}
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        mark = key_node.start_mark
        if key in seen:
            first = seen[key]
            raise ConfigurationError(
                f"duplicate key {key!r} at line {mark.line + 1}, column {mark.column + 1} "
                f"(first defined at line {first.line + 1}, column {first.column + 1})")
        seen[key] = mark
    return yaml.SafeLoader.construct_mapping(loader, node, deep)


_UniqueKeyLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG,
                                 _construct_mapping)


@dataclass
class RunConfig:
    """Validated run configuration.

    Attributes
    ----------
    solver : SolverConfig
    schedule : ContinuationSchedule
    output : str
    seed : int
    echo : dict
        Full configuration with every default applied.
    """

    solver: object
    schedule: object
    output: str
    seed: int
    echo: dict

    @property
    def hash(self):
        text = json.dumps(self.echo, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _merge(defaults, given, where):
    out = {}
    for k, v in defaults.items():
        if isinstance(v, dict) and k in given:
            if not isinstance(given[k], dict):
                raise ConfigurationError(f"{where}{k}: expected a mapping")
            unknown = set(given[k]) - set(v)
            if unknown:
                raise ConfigurationError(f"{where}{k}: unknown keys {sorted(unknown)}")
            out[k] = {**v, **given[k]}
        else:
            out[k] = given.get(k, v)
    return out


def _number(d, key, where=""):
    v = d[key]
    if isinstance(v, str):
        # YAML 1.1 reads exponents without a dot (1e-3) as strings
        try:
            return float(v)
        except ValueError:
            pass
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"{where}{key}: expected a number, got {v!r}")
    return float(v)


def _triples(items, name):
    out = []
    for k, t in enumerate(items or []):
        if not (isinstance(t, (list, tuple)) and len(t) == 3):
            raise ConfigurationError(f"forcing.{name}[{k}]: expected [amplitude, space, time]")
        amp, i, j = t
        if isinstance(amp, bool) or not isinstance(amp, (int, float)):
            raise ConfigurationError(f"forcing.{name}[{k}]: amplitude must be a number")
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (i, j)):
            raise ConfigurationError(f"forcing.{name}[{k}]: mode indices must be integers")
        out.append((float(amp), int(i), int(j)))
    return tuple(out)


def load_config_text(text, source="<string>"):
    """Parse and validate configuration text; see :func:`parse_config`."""
    try:
        raw = yaml.load(text, Loader=_UniqueKeyLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigurationError(f"{source}: syntax error{line}: {exc.problem}") from exc
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    return config_from_mapping(raw, source)


def config_from_mapping(raw, source="<mapping>"):
    """Validate an already parsed configuration mapping."""
    from .driver import ContinuationSchedule, SolverConfig, Stage

    if not isinstance(raw, dict):
        raise ConfigurationError(f"{source}: top level must be a mapping")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigurationError(f"{source}: missing required keys {missing}")
    unknown = set(raw) - set(REQUIRED) - set(DEFAULTS)
    if unknown:
        raise ConfigurationError(f"{source}: unknown keys {sorted(unknown)}")
    cfg = {k: raw[k] for k in REQUIRED}
    cfg.update(_merge(copy.deepcopy(DEFAULTS), copy.deepcopy(raw), ""))
    for k in ("L", "H", "T", "m0", "gamma", "mu", "zeta", "a"):
        cfg[k] = _number(cfg, k)
    if not cfg["gamma"] > 1:
        raise ConfigurationError(
            f"gamma = {cfg['gamma']:g} violates the hypothesis \"let gamma > 1\"")
    if not cfg["a"] >= 5:
        raise ConfigurationError(f"a = {cfg['a']:g}: the artificial pressure exponent needs a >= 5")
    for k in ("L", "H", "T", "m0"):
        if not cfg[k] > 0:
            raise ConfigurationError(f"{k} must be positive, got {cfg[k]:g}")
    if not (cfg["mu"] > 0 and cfg["zeta"] > 0):
        raise ConfigurationError("mu and zeta must be positive")
    disc, sol = cfg["discretization"], cfg["solver"]
    if not isinstance(cfg["schedule"], list) or not cfg["schedule"]:
        raise ConfigurationError("schedule: expected a non-empty list of stages")
    stages = []
    for k, st in enumerate(cfg["schedule"]):
        if not isinstance(st, dict) or not {"eps", "delta"} <= set(st):
            raise ConfigurationError(f"schedule[{k}]: needs eps and delta")
        bad = set(st) - STAGE_KEYS
        if bad:
            raise ConfigurationError(f"schedule[{k}]: unknown keys {sorted(bad)}")
        full = {"m": disc["m"], "n_beam": disc["n_beam"], "n_fluid": disc["n_fluid"],
                "tol": sol["tol"], "maxiter": sol["maxiter"], **st}
        full = {"m": int(full["m"]), "n_beam": int(full["n_beam"]),
                "n_fluid": int(full["n_fluid"]), "eps": _number(full, "eps", f"schedule[{k}]."),
                "delta": _number(full, "delta", f"schedule[{k}]."),
                "tol": _number(full, "tol", f"schedule[{k}]."), "maxiter": int(full["maxiter"])}
        cfg["schedule"][k] = full
        try:
            stages.append(Stage(**full))
        except InputDomainError as exc:
            raise ConfigurationError(f"schedule[{k}]: {exc}") from exc
    forcing = {"f": _triples(cfg["forcing"].get("f"), "f"),
               "F": _triples(cfg["forcing"].get("F"), "F")}
    cfg["forcing"] = {k: [list(t) for t in v] for k, v in forcing.items()}
    for name, size, tsize in (("f", "n_beam", None), ("F", "n_fluid", None)):
        for amp, i, j in forcing[name]:
            if not (1 <= i <= min(s[size] for s in cfg["schedule"])
                    and 0 <= j <= 2 * min(s["m"] for s in cfg["schedule"])):
                raise ConfigurationError(
                    f"forcing.{name}: mode ({i}, {j}) lies outside the smallest stage basis")
    bg = disc["beam_grid"]
    try:
        schedule = ContinuationSchedule(tuple(stages))
        solver = SolverConfig(
            DomainSpec(cfg["L"], cfg["H"], cfg["T"]), gamma=cfg["gamma"], mu=cfg["mu"],
            zeta=cfg["zeta"], m0=cfg["m0"], a=cfg["a"], f_modes=forcing["f"],
            F_modes=forcing["F"], relaxation=float(sol["relaxation"]),
            anderson=int(sol["anderson"]), density_factor=int(sol["density_factor"]),
            beam_grid=None if bg is None else tuple(int(n) for n in bg), seed=int(cfg["seed"]))
    except (InputDomainError, ConfigurationError) as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    return RunConfig(solver, schedule, str(cfg["output"]), int(cfg["seed"]), cfg)


def parse_config(path):
    """Read a YAML run configuration and apply defaults.

    Parameters
    ----------
    path : str or Path

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigurationError
        Syntax errors (with line), duplicate keys (with both locations) or
        parameters outside their valid ranges (naming the field).
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    return load_config_text(p.read_text(), str(p))


# ----------------------------------------------------------------------
# archives


@dataclass
class StateArchive:
    """Header and arrays of one archived stage."""

    header: dict
    rho_hat: np.ndarray
    u: np.ndarray
    eta: np.ndarray

    def context(self):
        from .driver import Stage, build_context

        cfg = config_from_mapping(self.header["config"], "<archive>")
        return build_context(Stage(**self.header["stage"]), cfg.solver)

    def state(self, ctx=None):
        """Rebuild a :class:`~pfsi.driver.CoupledState` and its context."""
        from .driver import CoupledState
        from .structure import BeamState

        ctx = ctx or self.context()
        rho = DensityField(self.rho_hat, ctx.periods, ctx.config.M)
        st = CoupledState(rho, SpectralField(ctx.fluid, ctx.time, self.u),
                          BeamState(SpectralField(ctx.beam, ctx.time, self.eta)),
                          iteration=self.header.get("iteration", 0),
                          converged=self.header.get("converged", False))
        return st, ctx


def _stage_dict(stage):
    return {"m": stage.m, "n_beam": stage.n_beam, "n_fluid": stage.n_fluid, "eps": stage.eps,
            "delta": stage.delta, "tol": stage.tol, "maxiter": stage.maxiter}


def archive_bytes(state, ctx, config: RunConfig, stage_tag, extra=None):
    """Serialise one stage state to the ``PFSI1`` layout."""
    arrays = [np.ascontiguousarray(state.rho.hat.real, "<f8"),
              np.ascontiguousarray(state.rho.hat.imag, "<f8"),
              np.ascontiguousarray(state.u.coeffs, "<f8"),
              np.ascontiguousarray(state.eta.eta.coeffs, "<f8")]
    header = {"version": ARCHIVE_VERSION, "config": config.echo, "config_hash": config.hash,
              "stage_tag": stage_tag, "stage": _stage_dict(ctx.stage),
              "iteration": int(state.iteration), "converged": bool(state.converged),
              "shapes": [list(a.shape) for a in arrays]}
    if extra:
        header["recorded"] = extra
    h = json.dumps(header, sort_keys=True).encode()
    body = MAGIC + struct.pack("<II", ARCHIVE_VERSION, len(h)) + h
    body += b"".join(a.tobytes() for a in arrays)
    return body + hashlib.sha256(body).digest()


def save_archive(path, state, ctx, config: RunConfig, stage_tag="stage", extra=None):
    data = archive_bytes(state, ctx, config, stage_tag, extra)
    Path(path).write_bytes(data)
    return Path(path)


def load_archive(path) -> StateArchive:
    """Read and verify a ``PFSI1`` archive.

    Raises
    ------
    ArchiveError
        Wrong magic, unsupported version, truncated data or digest mismatch.
    """
    data = Path(path).read_bytes()
    if len(data) < 16 + 32 or data[:8] != MAGIC:
        raise ArchiveError(f"{path}: not a PFSI1 archive")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != ARCHIVE_VERSION:
        raise ArchiveError(f"{path}: archive version {version}, this reader supports "
                           f"version {ARCHIVE_VERSION}")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ArchiveError(f"{path}: integrity digest mismatch (file corrupt or edited)")
    try:
        header = json.loads(body[16:16 + hlen].decode())
        shapes = [tuple(s) for s in header["shapes"]]
    except (ValueError, KeyError) as exc:
        raise ArchiveError(f"{path}: unreadable header") from exc
    off = 16 + hlen
    arrays = []
    for s in shapes:
        n = int(np.prod(s)) * 8
        if off + n > len(body):
            raise ArchiveError(f"{path}: truncated array data")
        arrays.append(np.frombuffer(body[off:off + n], dtype="<f8").reshape(s).astype(float))
        off += n
    if off != len(body):
        raise ArchiveError(f"{path}: trailing bytes after array data")
    rr, ri, u, eta = arrays
    return StateArchive(header, rr + 1j * ri, u, eta)


# ----------------------------------------------------------------------
# diagnostics report


def stage_report(state, ctx):
    """Scalar diagnostics and check verdicts of one converged stage."""
    from .diagnostics import coupled_weak_residual, energy, energy_inequality

    rep = energy(state, ctx)
    defect, _ = energy_inequality(state, ctx)
    weak = coupled_weak_residual(state, ctx)
    checks = {
        "converged": bool(state.converged),
        "energy_balance": abs(rep.balance_residual) <= EQUALITY_TOL * rep.balance_scale,
        "mass": rep.mass_error <= MASS_TOL,
    }
    monitors = {"density_positive": rep.min_rho > 0,
                "inequality_defect": defect}
    scalars = {k: float(v) for k, v in rep.scalars().items()}
    scalars.update({"eps": ctx.stage.eps, "delta": ctx.stage.delta, "m": ctx.stage.m,
                    "n_beam": ctx.stage.n_beam, "n_fluid": ctx.stage.n_fluid,
                    "iterations": int(state.iteration), "penalty_over_eps": rep.penalty / ctx.stage.eps,
                    "inequality_defect": float(defect),
                    "weak_residual_physical": weak.physical_norm,
                    "weak_residual_total": weak.total_norm})
    return rep, {"scalars": scalars, "checks": checks, "monitors": monitors}


def write_csv(path, rep):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        cols = [rep.t, rep.E, rep.E_delta] + [rep.rates[k] for k in
                                               ("viscous", "beam", "cubic", "penalty")]
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def _format_report(rows):
    lines = []
    for r in rows:
        s = r["scalars"]
        lines.append(f"stage {r['tag']}: eps={s['eps']:g} delta={s['delta']:g} m={s['m']} "
                     f"n_beam={s['n_beam']} n_fluid={s['n_fluid']} iterations={s['iterations']}")
        for k, v in r["checks"].items():
            lines.append(f"  check {k:<16} {'pass' if v else 'FAIL'}")
        lines.append(f"  balance residual {s['balance_residual']:.3e} (scale {s['balance_scale']:.3e})")
        lines.append(f"  mass error       {s['mass_error']:.3e}")
        lines.append(f"  min rho          {s['min_rho']:.6f}"
                     f"{'' if r['monitors']['density_positive'] else '  (NEGATIVE)'}")
        lines.append(f"  penalty          {s['penalty']:.3e}  penalty/eps {s['penalty_over_eps']:.3e}")
        lines.append(f"  inequality defect {s['inequality_defect']:.3e}")
    return "\n".join(lines)


# ----------------------------------------------------------------------
# commands


def cmd_run(config: RunConfig, out=None, stage_tag=None):
    """Run the continuation and write archives, CSV, JSON and a summary.

    Returns
    -------
    int
        Exit code: 0 when every stage converged and every equality check
        passed, 1 otherwise.
    """
    from .driver import run_continuation

    out = Path(out or config.output)
    out.mkdir(parents=True, exist_ok=True)
    tag = stage_tag or "stage"
    states = run_continuation(config.schedule, config.solver)
    rows = []
    for k, st in enumerate(states):
        ctx = st.info["context"]
        name = f"{tag}{k}"
        rep, row = stage_report(st, ctx)
        row["tag"] = name
        rows.append(row)
        save_archive(out / f"{name}.pfsi", st, ctx, config, name, extra=row["scalars"])
        write_csv(out / f"{name}_energy.csv", rep)
    error = states[-1].info.get("error") if states else None
    ok = (len(states) == len(config.schedule.stages) and error is None
          and all(all(r["checks"].values()) for r in rows))
    code = EXIT_OK if ok else EXIT_CHECKS
    summary = {"csv_version": CSV_VERSION, "config_hash": config.hash, "stage_tag": tag,
               "config": config.echo, "stages": rows, "exit_code": code}
    if error:
        summary["error"] = error
    penalties = [r["scalars"]["penalty"] for r in rows]
    summary["penalty_monotone"] = all(b < a for a, b in zip(penalties, penalties[1:]))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    text = _format_report(rows)
    text += "\npenalty table (eps, penalty, penalty/eps):\n" + "\n".join(
        f"  {r['scalars']['eps']:9.1e} {r['scalars']['penalty']:.4e} "
        f"{r['scalars']['penalty_over_eps']:.4e}" for r in rows)
    if error:
        text += f"\ncontinuation halted: {error}"
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    return code


def cmd_check(path):
    """Recompute the diagnostics of an archived stage and print them.

    Returns the exit code (0 when every equality check passes).
    """
    arc = load_archive(path)
    st, ctx = arc.state()
    _, row = stage_report(st, ctx)
    row["tag"] = arc.header.get("stage_tag", "stage")
    print(f"archive {path} (config {arc.header['config_hash'][:12]})")
    print(_format_report([row]))
    recorded = arc.header.get("recorded")
    if recorded is not None:
        same = all(recorded.get(k) == v for k, v in row["scalars"].items() if k in recorded)
        print(f"recorded diagnostics reproduced: {'yes' if same else 'NO'}")
    return EXIT_OK if all(row["checks"].values()) else EXIT_CHECKS


def cmd_oracle(name):
    """Run one brute-force oracle comparison and print it."""
    from .oracles import ORACLES

    names = list(ORACLES) if name == "all" else [name]
    code = EXIT_OK
    for n in names:
        if n not in ORACLES:
            raise ConfigurationError(f"unknown oracle {n!r}; choose from {sorted(ORACLES)}")
        rep = ORACLES[n]()
        print(rep.line())
        if not rep.passed:
            code = EXIT_CHECKS
    return code


def _sweep_one(args):
    echo, k, out = args
    cfg = config_from_mapping({**echo, "schedule": [echo["schedule"][k]]}, "<sweep>")
    from .driver import run_stage, build_context, initial_state

    ctx = build_context(cfg.schedule.stages[0], cfg.solver)
    st = run_stage(initial_state(ctx), ctx)
    _, row = stage_report(st, ctx)
    row["tag"] = f"sweep{k}"
    d = Path(out) / f"sweep{k}"
    d.mkdir(parents=True, exist_ok=True)
    save_archive(d / "state.pfsi", st, ctx, cfg, row["tag"], extra=row["scalars"])
    return row


def cmd_sweep(config: RunConfig, out=None, jobs=1):
    """Solve every schedule entry from a cold start, optionally in parallel processes."""
    out = Path(out or config.output)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(config.echo, k, str(out)) for k in range(len(config.schedule.stages))]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    print(_format_report(rows))
    (out / "sweep.json").write_text(json.dumps(
        {"config_hash": config.hash, "stages": rows}, indent=2, sort_keys=True))
    ok = all(all(r["checks"].values()) for r in rows)
    return EXIT_OK if ok else EXIT_CHECKS


# ----------------------------------------------------------------------
# entry point


def _parser():
    p = argparse.ArgumentParser(prog="pfsi", description="Time-periodic fluid-beam solver")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a continuation")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--stage-tag")
    r.add_argument("--seed", type=int)
    c = sub.add_parser("check", help="recompute diagnostics of an archive")
    c.add_argument("archive")
    o = sub.add_parser("oracle", help="run a reference comparison")
    o.add_argument("name", help="gram-time, gram-beam, gram-fluid, structure-dense, "
                                "density-fd, fluid-fd or all")
    s = sub.add_parser("sweep", help="solve each stage from a cold start")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    return p


def _load_with_seed(path, seed):
    cfg = parse_config(path)
    if seed is not None:
        echo = dict(cfg.echo, seed=seed)
        cfg = config_from_mapping(echo, str(path))
    return cfg


def main(argv=None):
    level = os.environ.get("PFSI_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(_load_with_seed(args.config, args.seed), args.out, args.stage_tag)
        if args.command == "check":
            return cmd_check(args.archive)
        if args.command == "oracle":
            return cmd_oracle(args.name)
        return cmd_sweep(_load_with_seed(args.config, args.seed), args.out, args.jobs)
    except (ConfigurationError, InputDomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ArchiveError as exc:
        print(f"archive error: {exc}", file=sys.stderr)
        return EXIT_ARCHIVE
    except (InternalError, PFSIError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
