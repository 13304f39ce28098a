"""Command-line driver for the dressed-molecule resonance pipeline.

Seven subcommands cover the workflow end to end: ``levels`` (field-free
table plus upper-well curves), ``adiabatic`` (dressed potentials at one
field point), ``resonance`` (single Floquet solve), ``ep-map`` /
``ep-refine`` (coalescence searches), ``loop`` (one parameter-plane
traversal), and ``scenario`` (chained loops).

Config files are plain ``key = value`` text; keys are the long option
names without the leading dashes (``grid.n-points = 6001``).  Values
given as command-line flags win over config values.  The ``scenario``
command additionally reads numbered loop sections (``loop1.lambda0``,
``loop1.v-from``, ...) that have no flag equivalent.

Every command writes a ``<command>.json`` run document (config echo,
results, provenance) plus its CSV/SVG outputs under ``--out``, and prints
a one-line summary to stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .bound_states import adiabatic_levels, vibrational_levels
from .cache import SolveCache
from .ep import (DIAGNOSTIC_INTENSITY, EPCandidate, EPRecord, _refine_worker,
                 approximate_eps, cluster_bands, records_from_csv,
                 records_to_csv, refine_ep)
from .errors import ContinuationError, ConvergenceError, GridError, ModelError
from .floquet import build_system, classify_resonance, find_resonance
from .loops import LoopSpec, follow_resonance, run_scenario, trajectory_to_csv
from .molecule import FieldPoint, RadialGrid, adiabatic_potentials, load_molecule
from .svg import ep_map_plot, line_plot

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- config

def _read_config(path):
    """Parse a key = value file; '#' lines and blanks are skipped."""
    pairs = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ModelError(f"{path}:{ln}: expected key = value")
            key, _, val = line.partition("=")
            pairs[key.strip()] = val.strip()
    return pairs


_LOOP_KEY = re.compile(r"loop(\d+)\.(.+)")


def _split_loop_sections(pairs):
    plain, loops = {}, {}
    for key, val in pairs.items():
        m = _LOOP_KEY.fullmatch(key)
        if m:
            loops.setdefault(int(m.group(1)), {})[m.group(2)] = val
        else:
            plain[key] = val
    return plain, loops


def _coerce(action, raw):
    if action.nargs in (2, "+", "*"):
        conv = action.type or str
        return [conv(tok) for tok in raw.split()]
    if action.const is True:
        return raw.lower() in ("1", "true", "yes", "on")
    return (action.type or str)(raw)


def _apply_config(subparser, pairs, path):
    """Install config values as parser defaults, so explicit flags win."""
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in pairs.items():
        dest = key.replace(".", "_").replace("-", "_")
        action = actions.get(dest)
        if action is None:
            raise ModelError(f"{path}: unknown config key {key!r}")
        defaults[dest] = _coerce(action, raw)
    subparser.set_defaults(**defaults)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ModelError(f"missing required option(s): {flags} "
                         "(set as flag or config key)")


# ------------------------------------------------------------- run docs

def _echo(args):
    return {k: v for k, v in vars(args).items() if k not in ("func", "command")}


def _run_doc(args, model, results):
    return {"command": args.command,
            "config": _echo(args),
            "results": results,
            "provenance": {"model": model.name,
                           "model_hash": model.fingerprint,
                           "code_version": __version__}}


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _record_to_dict(r: EPRecord) -> dict:
    return {"pair": list(r.pair), "lambda_nm": r.lambda_ep,
            "intensity_1e13Wcm2": r.intensity_ep,
            "gap_residual": r.gap_residual,
            "e_ep": [r.e_ep.real, r.e_ep.imag], "v_plus": r.v_plus}


def _record_from_dict(d: dict) -> EPRecord:
    return EPRecord(pair=tuple(d["pair"]), lambda_ep=d["lambda_nm"],
                    intensity_ep=d["intensity_1e13Wcm2"],
                    gap_residual=d["gap_residual"],
                    e_ep=complex(d["e_ep"][0], d["e_ep"][1]),
                    v_plus=d.get("v_plus"))


# ------------------------------------------------------------- commands

def cmd_levels(args, model, grid, cache):
    """Field-free level table, upper-well curves over a wavelength grid,
    and the crossing-diagram overlay."""
    levels = vibrational_levels(model.vg_curve, model.reduced_mass, args.v_max,
                                r_min=grid.r_min, r_max=grid.r_max,
                                n_points=grid.n_points)
    with open(os.path.join(args.out, "levels.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v", "energy_hartree"])
        for lv in levels:
            w.writerow([lv.v, f"{lv.energy:.12g}"])

    lam_grid = []
    if args.lambda_max > args.lambda_min:
        lam_grid = list(np.arange(args.lambda_min,
                                  args.lambda_max + 0.5 * args.lambda_step,
                                  args.lambda_step))
    curves = {}
    n_pts = 0
    with open(os.path.join(args.out, "well_curves.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda_nm", "v_plus", "energy_hartree"])
        for lam in lam_grid:
            try:
                ls = adiabatic_levels(model, FieldPoint(lam, args.curve_intensity),
                                      args.vplus_max)
            except ModelError:
                continue
            for lv in ls:
                w.writerow([f"{lam:.12g}", lv.v, f"{lv.energy:.12g}"])
                curves.setdefault(lv.v, []).append((lam, lv.energy))
                n_pts += 1

    if lam_grid:
        series = [(f"v+ = {vp}", [p[0] for p in pts], [p[1] for p in pts])
                  for vp, pts in sorted(curves.items())]
        lo, hi = lam_grid[0], lam_grid[-1]
        series += [("", [lo, hi], [lv.energy, lv.energy]) for lv in levels]
        x_label = "wavelength (nm)"
    else:
        series = [("levels", [lv.v for lv in levels],
                   [lv.energy for lv in levels])]
        x_label = "v"
    line_plot(os.path.join(args.out, "levels.svg"), series,
              title=f"{model.name}: bound levels and upper-well curves",
              x_label=x_label, y_label="E (hartree)")

    _write_json(os.path.join(args.out, "levels.json"), _run_doc(
        args, model,
        {"n_levels": len(levels), "truncated": levels.truncated,
         "levels": [{"v": lv.v, "energy_hartree": lv.energy} for lv in levels],
         "n_curve_points": n_pts}))
    print(f"{len(levels)} bound levels, {n_pts} curve points -> {args.out}")
    return 0


def cmd_adiabatic(args, model, grid, cache):
    """Dressed adiabatic potentials and upper-well levels at one field
    point."""
    _require(args, "wavelength", "intensity")
    field = FieldPoint(args.wavelength, args.intensity)
    ref = model.vg_curve.asymptote
    r_lo = max(model.vg_curve.r_lo, model.vu_curve.r_lo, 0.3, grid.r_min)
    r = np.linspace(r_lo, grid.r_max, 2001)
    upper, lower = adiabatic_potentials(model, field, r)
    with open(os.path.join(args.out, "adiabatic_curves.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r_bohr", "v_plus_hartree", "v_minus_hartree"])
        for ri, up, lo in zip(r, upper, lower):
            w.writerow([f"{ri:.12g}", f"{up:.12g}", f"{lo:.12g}"])

    ls = adiabatic_levels(model, field, args.vplus_max)
    with open(os.path.join(args.out, "adiabatic_levels.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v_plus", "energy_hartree"])
        for lv in ls:
            w.writerow([lv.v, f"{lv.energy:.12g}"])

    series = [("V+", list(r), list(upper - ref)),
              ("V-", list(r), list(lower - ref))]
    series += [("", [r_lo, grid.r_max], [lv.energy, lv.energy]) for lv in ls]
    line_plot(os.path.join(args.out, "adiabatic.svg"), series,
              title=f"{model.name} dressed adiabats at {args.wavelength:g} nm",
              x_label="R (bohr)", y_label="E - E_diss (hartree)")

    _write_json(os.path.join(args.out, "adiabatic.json"), _run_doc(
        args, model,
        {"n_levels": len(ls),
         "levels": [{"v_plus": lv.v, "energy_hartree": lv.energy}
                    for lv in ls]}))
    print(f"{len(ls)} upper-well levels at {args.wavelength:g} nm, "
          f"{args.intensity:g} W/cm^2 -> {args.out}")
    return 0


def cmd_resonance(args, model, grid, cache):
    """One Floquet resonance, continued in intensity from the field-free
    level."""
    _require(args, "wavelength", "intensity", "v")
    key = None
    rec = None
    if cache is not None:
        key = SolveCache.key(model, grid, "resonance",
                             wavelength=args.wavelength,
                             intensity=args.intensity, v=args.v,
                             n_blocks=args.n_blocks, steps=args.steps)
        rec = cache.get(key)
    cached = rec is not None

    if rec is None:
        levels = vibrational_levels(model.vg_curve, model.reduced_mass,
                                    r_min=grid.r_min, r_max=grid.r_max,
                                    n_points=grid.n_points)
        if not 0 <= args.v < len(levels):
            raise ModelError(f"v={args.v} outside the {len(levels)} "
                             "bound levels")
        e = complex(levels[args.v].energy)
        system = res = None
        for inten in np.linspace(args.intensity / args.steps,
                                 args.intensity, args.steps):
            system = build_system(model, FieldPoint(args.wavelength, inten),
                                  grid, n_blocks=args.n_blocks)
            res = find_resonance(system, e, label=args.v)
            e = res.energy
        rec = {"energy_re_hartree": res.energy.real,
               "energy_im_hartree": res.energy.imag,
               "width_hartree": res.width,
               "width_invcm": res.width_invcm,
               "character": classify_resonance(system, res),
               "residual": abs(res.residual)}
        if cache is not None:
            cache.put(key, rec)
            cache.flush()

    _write_json(os.path.join(args.out, "resonance.json"),
                _run_doc(args, model, {**rec, "from_cache": cached}))
    tag = " [cache]" if cached else ""
    print(f"E = {rec['energy_re_hartree']:.10g} hartree, "
          f"Gamma = {rec['width_invcm']:.6g} cm^-1 "
          f"({rec['character']}){tag}")
    return 0


def _ep_key(cache, model, grid, args, cand):
    # keyed on the candidate identity, not the exact seed wavelength, so a
    # rerun with a shifted scan window still hits
    return SolveCache.key(model, grid, "ep", v=cand.v,
                          v_partner=cand.v_partner, v_plus=cand.v_plus,
                          lambda_bucket=round(cand.lambda_guess),
                          n_blocks=args.n_blocks, i_cap=args.i_cap)


def cmd_ep_map(args, model, grid, cache):
    """Locate and refine every coalescence seeded inside the window."""
    lo, hi = args.window
    cands = approximate_eps(model, range(args.v_max + 1),
                            range(args.vplus_max + 1), (lo, hi))
    records, todo = [], []
    n_hits = 0
    for cand in cands:
        rec = None
        key = None
        if cache is not None:
            key = _ep_key(cache, model, grid, args, cand)
            rec = cache.get(key)
        if rec is not None:
            records.append(_record_from_dict(rec))
            n_hits += 1
        else:
            todo.append((key, cand))

    # workers only compute; cache and file writes stay in this process
    failures = []

    def absorb(key, cand, result):
        if isinstance(result, EPRecord):
            records.append(result)
            if cache is not None:
                cache.put(key, _record_to_dict(result))
        else:
            failures.append((cand, result[1]))

    if args.jobs > 1 and model.origin and todo:
        grid_args = (grid.r_min, grid.r_max, grid.n_points,
                     grid.ecs_radius, grid.ecs_angle)
        work = [(model.origin, grid_args, args.n_blocks,
                 (c.v, c.v_partner, c.v_plus, c.lambda_guess), args.i_cap)
                for _, c in todo]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for (key, cand), result in zip(todo, pool.map(_refine_worker,
                                                          work)):
                absorb(key, cand, result)
    else:
        for key, cand in todo:
            try:
                result = refine_ep(model, cand, grid, n_blocks=args.n_blocks,
                                   i_cap=args.i_cap)
            except (ConvergenceError, ModelError) as ex:
                result = (cand, str(ex))
            absorb(key, cand, result)
    if cache is not None:
        cache.flush()
    for cand, msg in failures:
        log.warning("refinement failed for pair (%d,%d) v+=%d: %s",
                    cand.v, cand.v_partner, cand.v_plus, msg)

    ordered = [r for band in cluster_bands(records)
               for r in sorted(band, key=lambda r: r.pair[0])]
    records_to_csv(ordered, os.path.join(args.out, "ep_map.csv"))
    ep_map_plot(os.path.join(args.out, "ep_map.svg"), ordered,
                title=f"{model.name} coalescence map")
    _write_json(os.path.join(args.out, "ep_map.json"), _run_doc(
        args, model,
        {"n_records": len(ordered), "n_cached": n_hits,
         "n_failed": len(failures),
         "records": [_record_to_dict(r) for r in ordered]}))
    print(f"{len(ordered)} coalescences ({n_hits} from cache, "
          f"{len(failures)} failed) -> {args.out}")
    return 0


def cmd_ep_refine(args, model, grid, cache):
    """Refine a single candidate to its coalescence point."""
    _require(args, "v", "v_plus", "lambda_guess")
    partner = args.v_partner if args.v_partner is not None else args.v + 1
    cand = EPCandidate(v=args.v, v_partner=partner, v_plus=args.v_plus,
                       lambda_guess=args.lambda_guess)
    key = None
    rec_dict = None
    if cache is not None:
        key = _ep_key(cache, model, grid, args, cand)
        rec_dict = cache.get(key)
    cached = rec_dict is not None
    if rec_dict is None:
        rec = refine_ep(model, cand, grid, n_blocks=args.n_blocks,
                        i_cap=args.i_cap)
        rec_dict = _record_to_dict(rec)
        if cache is not None:
            cache.put(key, rec_dict)
            cache.flush()

    _write_json(os.path.join(args.out, "ep_refine.json"),
                _run_doc(args, model, {**rec_dict, "from_cache": cached}))
    tag = " [cache]" if cached else ""
    print(f"EP({cand.v},{cand.v_partner}) at lambda = "
          f"{rec_dict['lambda_nm']:.6f} nm, I = "
          f"{rec_dict['intensity_1e13Wcm2']:.6f} x10^13 W/cm^2 "
          f"(gap {rec_dict['gap_residual']:.2e}){tag}")
    return 0


def cmd_loop(args, model, grid, cache):
    """Transport one resonance around a parameter-plane loop."""
    _require(args, "lambda0", "d_lambda", "i_max", "v_start")
    spec = LoopSpec(lambda0=args.lambda0, d_lambda=args.d_lambda,
                    i_max=args.i_max, t_f=args.t_f, n_steps=args.n_steps)
    partial = False
    try:
        traj = follow_resonance(model, spec, args.v_start, grid,
                                n_blocks=args.n_blocks, reverse=args.reverse)
    except ContinuationError as ex:
        if ex.partial is None:
            raise
        traj = ex.partial
        partial = True
        print(f"warning: {ex}; writing partial outputs", file=sys.stderr)

    p_end = traj.survival_at_end() if traj.samples else float("nan")
    trajectory_to_csv(traj, os.path.join(args.out, "loop.csv"))

    markers = [(traj.samples[0].wavelength,
                traj.samples[0].intensity / 1.0e13, "start")]
    if args.ep_csv:
        markers += [(r.lambda_ep, r.intensity_ep,
                     f"({r.pair[0]},{r.pair[1]})")
                    for r in records_from_csv(args.ep_csv)]
    line_plot(os.path.join(args.out, "loop_contour.svg"),
              [("contour", [s.wavelength for s in traj.samples],
                [s.intensity / 1.0e13 for s in traj.samples])],
              markers=markers, title="parameter-plane contour",
              x_label="wavelength (nm)", y_label="intensity (10^13 W/cm^2)")
    line_plot(os.path.join(args.out, "loop_energy.svg"),
              [("trajectory", [s.energy.real for s in traj.samples],
                [s.width_invcm for s in traj.samples])],
              title="complex-energy trajectory",
              x_label="Re E (hartree)", y_label="width (cm^-1)")
    line_plot(os.path.join(args.out, "loop_survival.svg"),
              [("P_ND", [t for t, _ in traj.p_nd],
                [p for _, p in traj.p_nd])],
              title="non-dissociated fraction",
              x_label="t (fs)", y_label="P_ND")

    _write_json(os.path.join(args.out, "loop.json"), _run_doc(
        args, model,
        {"v_start": traj.v_start, "v_end": traj.v_end,
         "exchanged": traj.exchanged, "p_nd_final": p_end,
         "n_samples": len(traj.samples), "partial": partial,
         "characters": [[phi, c] for phi, c in traj.characters]}))
    tag = " [partial]" if partial else ""
    print(f"v = {traj.v_start} -> {traj.v_end}, "
          f"P_ND(t_f) = {p_end:.4g}{tag}")
    return 3 if partial else 0


def cmd_scenario(args, model, grid, cache):
    """Chain loops from a config file and compare survivals."""
    if not args.loop_sections:
        raise ModelError("scenario needs loop sections in the config file "
                         "(loop1.lambda0 = ..., loop1.v-from = ..., ...)")
    loops = []
    for idx in sorted(args.loop_sections):
        sec = args.loop_sections[idx]
        try:
            spec = LoopSpec(lambda0=float(sec["lambda0"]),
                            d_lambda=float(sec["d-lambda"]),
                            i_max=float(sec["i-max"]),
                            t_f=float(sec.get("t-f", args.t_f)),
                            n_steps=int(sec.get("n-steps", args.n_steps)))
            loops.append((spec, (int(sec["v-from"]), int(sec["v-to"]))))
        except KeyError as ex:
            raise ModelError(f"loop{idx} section is missing key {ex}")

    report = run_scenario(model, loops, grid, n_blocks=args.n_blocks)

    with open(os.path.join(args.out, "scenario.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["loop", "v_from", "v_to", "lambda0_nm", "d_lambda_nm",
                    "i_max_1e13Wcm2", "t_f_fs", "p_nd"])
        for i, ((spec, _), (va, vb), p) in enumerate(
                zip(loops, report.transfers, report.survivals), 1):
            w.writerow([i, va, vb, f"{spec.lambda0:.12g}",
                        f"{spec.d_lambda:.12g}", f"{spec.i_max:.12g}",
                        f"{spec.t_f:.12g}", f"{p:.12g}"])

    series = []
    t_off, p_prod = 0.0, 1.0
    for i, traj in enumerate(report.trajectories, 1):
        traj.survival_at_end()
        ts = [t_off + t for t, _ in traj.p_nd]
        ps = [p_prod * p for _, p in traj.p_nd]
        series.append((f"loop {i}", ts, ps))
        t_off, p_prod = ts[-1], ps[-1]
        trajectory_to_csv(traj, os.path.join(args.out, f"loop{i}.csv"))
    line_plot(os.path.join(args.out, "scenario_survival.svg"), series,
              title="chained survival", x_label="t (fs)", y_label="P_ND")

    _write_json(os.path.join(args.out, "scenario.json"), _run_doc(
        args, model,
        {"transfers": [list(t) for t in report.transfers],
         "survivals": report.survivals,
         "cumulative": report.cumulative}))
    print(f"{len(loops)} loops, transfers "
          f"{' '.join(f'{a}->{b}' for a, b in report.transfers)}, "
          f"cumulative P_ND = {report.cumulative:.4g}")
    return 0


# --------------------------------------------------------------- parser

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="floqep",
        description="Laser-dressed molecular resonances, coalescence maps, "
                    "and parameter-plane loop transport.")
    parser.add_argument("--version", action="version",
                        version=f"floqep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    subparsers = {}
    g = RadialGrid()

    def add_command(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--model", default="h2plus",
                        help="bundled model name or descriptor file path")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--config",
                        help="key = value config file; flags win over it")
        sp.add_argument("--cache",
                        help="JSON cache file for resumable solves")
        sp.add_argument("--jobs", type=int, default=1,
                        help="worker processes for refinements")
        sp.add_argument("--verbose", action="store_true",
                        help="info-level logging")
        sp.add_argument("--grid.r-min", dest="grid_r_min", type=float,
                        default=g.r_min, help="grid start (bohr)")
        sp.add_argument("--grid.r-max", dest="grid_r_max", type=float,
                        default=g.r_max, help="grid end (bohr)")
        sp.add_argument("--grid.n-points", dest="grid_n_points", type=int,
                        default=g.n_points, help="number of grid points")
        sp.add_argument("--grid.ecs-radius", dest="grid_ecs_radius",
                        type=float, default=g.ecs_radius,
                        help="complex-scaling corner (bohr)")
        sp.add_argument("--grid.ecs-angle", dest="grid_ecs_angle",
                        type=float, default=g.ecs_angle,
                        help="complex-scaling angle (rad)")
        sp.set_defaults(func=func)
        subparsers[name] = sp
        return sp

    sp = add_command("levels", cmd_levels,
                     "field-free levels and upper-well curves")
    sp.add_argument("--v-max", type=int, default=None,
                    help="highest level to report (default: all)")
    sp.add_argument("--lambda-min", type=float, default=0.0,
                    help="curve scan start (nm); scan off when empty window")
    sp.add_argument("--lambda-max", type=float, default=0.0,
                    help="curve scan end (nm)")
    sp.add_argument("--lambda-step", type=float, default=25.0,
                    help="curve scan step (nm)")
    sp.add_argument("--vplus-max", type=int, default=3,
                    help="highest upper-well level in the curves")
    sp.add_argument("--curve-intensity", type=float,
                    default=DIAGNOSTIC_INTENSITY,
                    help="probe intensity for the curves (W/cm^2)")

    sp = add_command("adiabatic", cmd_adiabatic,
                     "dressed adiabatic potentials at one field point")
    sp.add_argument("--wavelength", type=float, help="nm")
    sp.add_argument("--intensity", type=float, help="W/cm^2")
    sp.add_argument("--vplus-max", type=int, default=8)

    sp = add_command("resonance", cmd_resonance, "single Floquet solve")
    sp.add_argument("--wavelength", type=float, help="nm")
    sp.add_argument("--intensity", type=float, help="W/cm^2")
    sp.add_argument("--v", type=int, help="field-free level to continue from")
    sp.add_argument("--steps", type=int, default=8,
                    help="intensity continuation steps")
    sp.add_argument("--n-blocks", type=int, default=2)

    sp = add_command("ep-map", cmd_ep_map,
                     "locate and refine coalescences in a window")
    sp.add_argument("--v-max", type=int, default=16)
    sp.add_argument("--window", type=float, nargs=2, default=(110.0, 900.0),
                    metavar=("LO", "HI"), help="wavelength window (nm)")
    sp.add_argument("--vplus-max", type=int, default=8)
    sp.add_argument("--i-cap", type=float, default=0.6,
                    help="intensity scan ceiling (10^13 W/cm^2)")
    sp.add_argument("--n-blocks", type=int, default=2)

    sp = add_command("ep-refine", cmd_ep_refine,
                     "refine one coalescence candidate")
    sp.add_argument("--v", type=int)
    sp.add_argument("--v-partner", type=int, default=None,
                    help="default: v + 1")
    sp.add_argument("--v-plus", type=int)
    sp.add_argument("--lambda-guess", type=float, help="nm")
    sp.add_argument("--i-cap", type=float, default=0.6)
    sp.add_argument("--n-blocks", type=int, default=2)

    sp = add_command("loop", cmd_loop,
                     "transport a resonance around a parameter-plane loop")
    sp.add_argument("--lambda0", type=float, help="nm")
    sp.add_argument("--d-lambda", type=float,
                    help="wavelength radius (nm); sign sets handedness")
    sp.add_argument("--i-max", type=float, help="peak intensity "
                    "(10^13 W/cm^2)")
    sp.add_argument("--t-f", type=float, default=30.0,
                    help="pulse duration (fs)")
    sp.add_argument("--n-steps", type=int, default=200)
    sp.add_argument("--v-start", type=int)
    sp.add_argument("--reverse", action="store_true",
                    help="traverse the contour backwards")
    sp.add_argument("--n-blocks", type=int, default=2)
    sp.add_argument("--ep-csv",
                    help="coalescence CSV to mark on the contour plot")

    sp = add_command("scenario", cmd_scenario,
                     "chain loops from a config file")
    sp.add_argument("--t-f", type=float, default=30.0,
                    help="default pulse duration (fs) for loop sections")
    sp.add_argument("--n-steps", type=int, default=200,
                    help="default angle steps for loop sections")
    sp.add_argument("--n-blocks", type=int, default=2)

    return parser, subparsers


def main(argv=None) -> int:
    parser, subparsers = _build_parser()
    args = parser.parse_args(argv)
    try:
        loop_sections = {}
        if args.config:
            plain, loop_sections = _split_loop_sections(
                _read_config(args.config))
            if loop_sections and args.command != "scenario":
                raise ModelError("loop sections only apply to the scenario "
                                 "command")
            _apply_config(subparsers[args.command], plain, args.config)
            args = parser.parse_args(argv)
        args.loop_sections = loop_sections

        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(message)s")
        model = load_molecule(args.model)
        grid = RadialGrid(args.grid_r_min, args.grid_r_max,
                          args.grid_n_points, args.grid_ecs_radius,
                          args.grid_ecs_angle)
        cache = SolveCache(args.cache) if args.cache else None
        os.makedirs(args.out, exist_ok=True)
        return args.func(args, model, grid, cache)
    except (ModelError, GridError, OSError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except (ConvergenceError, ContinuationError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
