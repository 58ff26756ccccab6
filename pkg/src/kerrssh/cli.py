"""Command-line driver.

    kerrssh steady CONFIG [--seed-branch low|high]
    kerrssh sweep CONFIG --control rabi|power --from A --to B --steps N [--direction both]
    kerrssh topology CONFIG [--r-from A --r-to B --r-steps N] [--force]
    kerrssh transmission CONFIG --dp-from A --dp-to B --dp-steps N

Every command accepts ``--set key=value`` overrides (dotted paths such as
``omega_a.0=58`` address list elements; a scalar given for a list field is
broadcast) and ``--out DIR``.  Exit codes: 0 success, 1 numerical failure,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (AggregationWarning, ConfigError, KerrSSHError, NumericalError,
                     PreconditionError, TopologyUndefinedError, UnstableStateError,
                     ZeroModeCountWarning)
from .linearize import (SqueezeParams, apply_edge_rule, effective_ssh, finite_ssh_matrix,
                        reduced_hamiltonian, squeeze_params)
from .model import (ChainConfig, build_fluctuation_hamiltonian, detunings, require_valid)
from .spectroscopy import ProbeConfig, gap_window, peak_find, transmission
from .steadystate import (build_cubic_reduction, hysteresis_sweep, initial_state, loop_area,
                          solve_cubic, stability_check)
from .topology import (GAP_FRACTION, b_dominant, central_modes, edge_profile, model_winding, spectrum,
                       zero_modes)

log = logging.getLogger("kerrssh")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- config handling ----------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``key=value`` / ``key.index=value`` assignments in order (last wins)."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        path, raw = item.split("=", 1)
        value = _parse_value(raw)
        keys = path.split(".")
        target = data
        for k in keys[:-1]:
            target = _step(target, k, path)
        last = keys[-1]
        if isinstance(target, list):
            target[_list_index(target, last, path)] = value
        else:
            target[last] = value
    return data


def _list_index(seq: list, key: str, path: str) -> int:
    try:
        i = int(key)
        seq[i]
    except (ValueError, IndexError):
        raise ConfigError(f"override {path!r}: bad list index {key!r}") from None
    return i


def _step(node, key, path):
    if isinstance(node, list):
        return node[_list_index(node, key, path)]
    if not isinstance(node, dict) or key not in node:
        raise ConfigError(f"override {path!r}: no field {key!r}")
    if isinstance(node[key], (int, float)) and not isinstance(node[key], bool):
        raise ConfigError(f"override {path!r}: {key!r} is a scalar")
    return node[key]


def load_with_overrides(path, overrides) -> tuple[ChainConfig, dict]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    data = apply_overrides(data, overrides or [])
    config = require_valid(ChainConfig.from_dict(data))
    return config.to_dimensionless(), config.to_dict()


# --- output helpers --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % float(v)
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, payload):
    path.write_text(json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# --- commands ------------------------------------------------------------------------------

def _steady(config, branch):
    ss = initial_state(config, branch)
    ss.stable, _ = stability_check(config, None, ss)
    return ss


def _squeeze_or_none(config, ss):
    try:
        return squeeze_params(config, ss, warn=False)
    except NumericalError:
        return None


def cmd_steady(args, config, out: Path) -> dict:
    ss = _steady(config, args.seed_branch)
    sq = _squeeze_or_none(config, ss)
    payload = {
        "a_s": [[z.real, z.imag] for z in ss.a_s],
        "b_s": [[z.real, z.imag] for z in ss.b_s],
        "x": ss.x, "occupations": ss.occupations, "residual": ss.residual,
        "stable": ss.stable, "iterations": ss.iterations, "branch": args.seed_branch,
        "r": None if sq is None else sq.r, "xi": None if sq is None else sq.xi,
    }
    write_json(out / "steady_state.json", payload)
    files = ["steady_state.json"]
    try:
        red = build_cubic_reduction(config)
    except (PreconditionError, NumericalError):
        red = None
    if red is not None:
        rows = [(i, root.x, root.tag, red.rabi) for i, root in enumerate(solve_cubic(red, red.rabi))]
        write_csv(out / "cubic_roots.csv", ["index", "x", "tag", "rabi"], rows)
        files.append("cubic_roots.csv")
    return {"files": files}


def _bdg_frequencies(config, ss):
    qf = build_fluctuation_hamiltonian(config, None, ss, with_losses=False)
    return qf.symplectic_spectrum()[0]


def cmd_sweep(args, config, out: Path) -> dict:
    res = hysteresis_sweep(config, args.control, args.start, args.stop, args.steps,
                           args.direction, strategy=args.strategy)
    branches = res if isinstance(res, tuple) else (res,)
    n_drv = config.index.driven.size
    r_cols = [f"r{2 * (j + 1)}" for j in range(n_drv)]
    files = []
    eig_rows = []
    for br in branches:
        flags = br.jump_flags
        rows = [(c, x, *r, int(s), int(f))
                for c, x, r, s, f in zip(br.grid, br.x, br.r, br.stable, flags)]
        name = f"sweep_{br.branch}.csv"
        write_csv(out / name, ["control_value", "x", *r_cols, "stable", "jump_flag"], rows)
        files.append(name)
        for c, ss in zip(br.grid, br.states):
            # the fluctuation matrix depends on the drive only through the state
            for k, w in enumerate(_bdg_frequencies(config, ss)):
                eig_rows.append((br.branch, c, k, w.real, w.imag))
    write_csv(out / "eigenvalues_vs_control.csv",
              ["branch", "control_value", "mode_index", "eigenvalue_re", "eigenvalue_im"],
              eig_rows)
    files.append("eigenvalues_vs_control.csv")
    if len(branches) == 2:
        fwd, bwd = branches
        xb = bwd.x[::-1]
        differs = np.abs(fwd.x - xb) > 1e-6 * np.maximum(np.abs(fwd.x), 1e-300)
        window = fwd.grid[differs]
        summary = {
            "control": args.control,
            "forward_jumps": [{"index": i, "control_value": fwd.grid[i]} for i in fwd.jumps],
            "backward_jumps": [{"index": i, "control_value": bwd.grid[i]} for i in bwd.jumps],
            "loop_area": loop_area(fwd, bwd),
            "bistable_window": [window.min(), window.max()] if window.size else None,
        }
        write_json(out / "hysteresis.json", summary)
        files.append("hysteresis.json")
    return {"files": files}


def _reduced_eigs(config, sq, mode, force):
    if mode == "rwa":
        return spectrum(reduced_hamiltonian(config, None, sq, "rwa", force=force))
    qf = reduced_hamiltonian(config, None, sq, "exact")
    w, v = qf.symplectic_spectrum()
    return w.real, v


def _ssh_entry(model, m_k, gap_fraction):
    e, vecs = spectrum(finite_ssh_matrix(model))
    notes = []
    try:
        nu = model_winding(model, m_k)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ZeroModeCountWarning)
            zm = zero_modes(e, model, gap_fraction, m_k=m_k)
        notes = [str(w.message) for w in caught]
    except TopologyUndefinedError as exc:
        nu, zm, notes = None, [], [str(exc)]
    entry = {**model.to_dict(), "nu": nu, "zero_modes": zm, "zero_mode_energies": e[zm],
             "zero_mode_notes": notes}
    return entry, e, vecs


def _profile_for(config, ss, force, gap_fraction, source):
    """Mean ``|psi|^2`` of the two modes closest to the band centre."""
    sq = squeeze_params(config, ss, warn=False)
    model = effective_ssh(config, None, sq, strict=not force)
    if source == "effective":
        e, v = spectrum(finite_ssh_matrix(model))
        idx = central_modes(e, model.delta_r)
        prof = edge_profile(v[:, idx], config.n_b, "ssh_only")
    else:
        qf = build_fluctuation_hamiltonian(config, None, ss)
        w, v = qf.symplectic_spectrum()
        w, v = b_dominant(w.real, v, config.n_b)
        idx = central_modes(w, model.big_delta + model.delta_r)
        prof = edge_profile(v[:, idx], config.n_b, "full_chain")
    return prof.positions, prof.weights.mean(0), prof.edge_weight


def cmd_topology(args, config, out: Path) -> dict:
    det = detunings(config)
    strict = not args.force
    spec_rows, models = [], []
    if args.r_from is not None:
        if args.r_to is None or args.r_steps is None or args.r_steps < 2:
            raise UsageError("--r-from needs --r-to and --r-steps >= 2")
        small = float(det.delta_a[1:config.n_b:2].mean())
        r_grid = np.linspace(args.r_from, args.r_to, args.r_steps)
        for r in r_grid:
            cfg = apply_edge_rule(config, r)
            sq = SqueezeParams.from_r(np.full(config.index.driven.size, r), small,
                                      config.index.driven)
            model = effective_ssh(cfg, None, sq, strict=strict)
            entry, e, vecs = _ssh_entry(model, args.m_k, args.gap_fraction)
            models.append(entry)
            re, rv = _reduced_eigs(cfg, sq, args.mode, args.force)
            rw = edge_profile(rv, config.n_b, "full_chain").edge_weight
            spec_rows += [(r, "reduced", k, x, w) for k, (x, w) in enumerate(zip(re, rw))]
            ew = edge_profile(vecs, config.n_b, "ssh_only").edge_weight
            spec_rows += [(r, "effective", k, x, w) for k, (x, w) in enumerate(zip(e, ew))]
        nus = [m["nu"] for m in models]
        transitions = [{"index": i, "r": r_grid[i], "nu_before": nus[i - 1], "nu_after": nus[i]}
                       for i in range(1, len(nus)) if nus[i] != nus[i - 1]]
        write_json(out / "ssh_model.json", {"sweep": models, "transitions": transitions})
        files = ["ssh_model.json", "spectrum.csv"]
    else:
        ss = _steady(config, args.seed_branch)
        sq = squeeze_params(config, ss)
        model = effective_ssh(config, None, sq, strict=strict)
        entry, e, vecs = _ssh_entry(model, args.m_k, args.gap_fraction)
        entry["stable"] = ss.stable
        write_json(out / "ssh_model.json", entry)
        re, rv = _reduced_eigs(config, sq, args.mode, args.force)
        rw = edge_profile(rv, config.n_b, "full_chain").edge_weight
        spec_rows += [(model.r, "reduced", k, x, w) for k, (x, w) in enumerate(zip(re, rw))]
        ew = edge_profile(vecs, config.n_b, "ssh_only").edge_weight
        spec_rows += [(model.r, "effective", k, x, w) for k, (x, w) in enumerate(zip(e, ew))]
        s, p1, _ = _profile_for(config, ss, args.force, args.gap_fraction, args.profile)
        cfg2, _ = load_with_overrides(args.config, (args.set or []) + (args.state2_set or []))
        ss2 = _steady(cfg2, args.seed_branch)
        _, p2, _ = _profile_for(cfg2, ss2, True, args.gap_fraction, args.profile)
        write_csv(out / "edge_profile.csv", ["s_position", "psi_sq_state1", "psi_sq_state2"],
                  zip(s, p1, p2))
        files = ["ssh_model.json", "spectrum.csv", "edge_profile.csv"]
    write_csv(out / "spectrum.csv", ["r", "source", "index", "eigenvalue", "edge_weight"],
              spec_rows)
    return {"files": files}


def cmd_transmission(args, config, out: Path) -> dict:
    probe = ProbeConfig.linspace(args.dp_from, args.dp_to, args.dp_steps,
                                 probe_mode=args.probe)
    ss = _steady(config, args.seed_branch)
    spec = transmission(config, None, ss, probe, find_peaks=False)
    spec.peaks = peak_find(spec, args.floor, args.min_separation)
    try:
        window = gap_window(config, None, ss)
    except (PreconditionError, NumericalError) as exc:
        log.warning("no gap window: %s", exc)
        window = None
    write_csv(out / "transmission.csv", ["delta_p", "re_t", "im_t", "abs_t"],
              zip(spec.delta_p, spec.t.real, spec.t.imag, spec.abs_t))
    peaks = [{"delta_p": p.delta_p, "abs_t": p.abs_t,
              "in_gap": None if window is None else bool(window.contains(p.delta_p))}
             for p in spec.peaks]
    write_json(out / "peaks.json", peaks)
    if window is not None:
        write_json(out / "gap_window.json", {"center": window.center,
                                             "half_width": window.half_width,
                                             "edge_modes": window.edge_modes})
    return {"files": ["transmission.csv", "peaks.json"]
            + (["gap_window.json"] if window is not None else [])}


COMMANDS = {"steady": cmd_steady, "sweep": cmd_sweep, "topology": cmd_topology,
            "transmission": cmd_transmission}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kerrssh", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("config", help="JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="override a config field (repeatable, last wins)")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--seed-branch", choices=("low", "high"), default="low")

    sp = sub.add_parser("steady", help="steady state and cubic roots")
    common(sp)
    sp = sub.add_parser("sweep", help="hysteresis sweep in drive amplitude or power")
    common(sp)
    sp.add_argument("--control", choices=("rabi", "power"), default="rabi")
    sp.add_argument("--from", dest="start", type=float, required=True)
    sp.add_argument("--to", dest="stop", type=float, required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--direction", choices=("forward", "backward", "both"), default="both")
    sp.add_argument("--strategy", choices=("auto", "cubic", "evolve"), default="auto")
    sp = sub.add_parser("topology", help="effective SSH model, winding, spectra, profiles")
    common(sp)
    sp.add_argument("--force", action="store_true",
                    help="skip the rotating-wave and uniformity checks")
    sp.add_argument("--mode", choices=("rwa", "exact"), default="rwa")
    sp.add_argument("--r-from", type=float)
    sp.add_argument("--r-to", type=float)
    sp.add_argument("--r-steps", type=int)
    sp.add_argument("--m-k", type=int, default=256)
    sp.add_argument("--gap-fraction", type=float, default=GAP_FRACTION)
    sp.add_argument("--profile", choices=("effective", "full_chain"), default="effective")
    sp.add_argument("--state2-set", action="append", metavar="KEY=VALUE",
                    default=None, help="overrides defining state 2 (default drive_amp=0)")
    sp = sub.add_parser("transmission", help="probe transmission and peaks")
    common(sp)
    sp.add_argument("--dp-from", type=float, required=True)
    sp.add_argument("--dp-to", type=float, required=True)
    sp.add_argument("--dp-steps", type=int, required=True)
    sp.add_argument("--probe", default="b1")
    sp.add_argument("--floor", type=float, default=None)
    sp.add_argument("--min-separation", type=float, default=None)
    return p


def run(argv=None) -> int:
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "topology" and args.state2_set is None:
        args.state2_set = ["drive_amp=0"]
    out = args.out or Path("kerrssh-out") / args.command
    try:
        config, resolved = load_with_overrides(args.config, args.set)
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            # aggregation problems are recorded in the SSH model; no need to print them twice
            warnings.simplefilter("ignore", AggregationWarning)
            result = COMMANDS[args.command](args, config, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, UnstableStateError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, PreconditionError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KerrSSHError as exc:  # pragma: no cover - every subclass is mapped above
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest = {
        "command": args.command, "config_path": str(args.config), "overrides": args.set,
        "resolved_config": resolved, "output_dir": str(out), "version": _version(),
        "backend": kernels.BACKEND, "argv": list(argv if argv is not None else sys.argv[1:]),
        "files": result["files"], "duration_s": time.perf_counter() - start,
    }
    write_json(out / "manifest.json", manifest)
    log.info("wrote %s to %s", ", ".join(result["files"]), out)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
