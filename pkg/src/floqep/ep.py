"""Locate and refine exceptional points in the (wavelength, intensity) plane.

The search runs in two stages.  A coarse stage scans the quasi-bound levels
of the upper adiabatic well against the field-free levels and records every
wavelength where the two families cross; each crossing seeds a candidate.
A refinement stage then tracks the two resonances of the candidate pair
through the parameter plane and drives the squared complex gap to zero with
a damped Newton iteration.  The squared gap is used because the eigenvalue
difference itself behaves like a square root near the coalescence and has
no derivative there, while its square is smooth.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bound_states import adiabatic_levels, vibrational_levels
from .errors import ConvergenceError, ModelError
from .floquet import build_system, find_resonance
from .molecule import FieldPoint, MoleculeModel, RadialGrid, load_molecule

log = logging.getLogger(__name__)

# reference intensity for the crossing diagnostic: small enough that the
# upper-well levels are field-independent, large enough to define the well
DIAGNOSTIC_INTENSITY = 1.0e3

# one unit of EPRecord.intensity_ep in W/cm^2
INTENSITY_UNIT = 1.0e13

_GAP_TOL = 1e-8


@dataclass(frozen=True)
class EPCandidate:
    """A crossing-derived seed for the refinement stage."""

    v: int
    v_partner: int
    v_plus: int
    lambda_guess: float


@dataclass(frozen=True)
class EPRecord:
    """A refined coalescence of two resonances.

    intensity_ep is stored in units of 10^13 W/cm^2; e_ep is the common
    complex energy of the merged pair in hartree.
    """

    pair: tuple[int, int]
    lambda_ep: float
    intensity_ep: float
    gap_residual: float
    e_ep: complex
    v_plus: int | None = None

    def __post_init__(self):
        if self.intensity_ep <= 0.0:
            raise ModelError("intensity_ep must be positive")


@dataclass
class SideScan:
    """Intensity-scan summary on one side of an EP."""

    wavelength: float
    re_crossings: int
    width_crossings: int
    min_width_split: float
    characters: tuple[str, str]


@dataclass
class SignatureReport:
    """Crossing/tweezer verification of a refined EP."""

    ep: EPRecord
    side_low: SideScan
    side_high: SideScan
    interchanged: bool
    contaminated: bool
    valid: bool


def cplus_minimum_wavelength(model: MoleculeModel) -> float:
    """Shortest wavelength whose one-photon crossing lies beyond the
    equilibrium distance of the attractive curve."""
    from .units import PHOTON_HARTREE_NM

    r = np.linspace(model.vg_curve.r_lo if np.isfinite(model.vg_curve.r_lo) else 0.3,
                    12.0, 2001)
    r = r[r > 0.2]
    vg = model.vg_curve.eval_at(r)
    re = r[int(np.argmin(vg))]
    gap = model.vu_curve.eval_at(re) - model.vg_curve.eval_at(re)
    return PHOTON_HARTREE_NM / gap


def crossing_radius(model: MoleculeModel, wavelength: float) -> float | None:
    """Radius where the one-photon dressed curves cross, or None."""
    from .units import photon_energy

    omega = photon_energy(wavelength)
    r = np.linspace(0.3, 20.0, 4001)
    f = model.vu_curve.eval_at(r) - model.vg_curve.eval_at(r) - omega
    sign = np.signbit(f)
    flips = np.nonzero(sign[1:] != sign[:-1])[0]
    if len(flips) == 0:
        return None
    k = flips[0]
    lo, hi = r[k], r[k + 1]
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        fm = (model.vu_curve.eval_at(mid) - model.vg_curve.eval_at(mid) - omega)
        if (fm > 0) == (f[k] > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def approximate_eps(model: MoleculeModel, v_range, vplus_range,
                    lambda_window: tuple[float, float], *,
                    scan_step: float = 4.0) -> list[EPCandidate]:
    """Coarse EP wavelengths from crossings of the two level families.

    The upper-well levels are computed at DIAGNOSTIC_INTENSITY on a dense
    wavelength grid; every sign change of E_v - E_{v+}(lambda) is refined
    by bisection.  Wavelengths whose crossing falls inside the equilibrium
    distance are excluded.  Pairs without a crossing are skipped silently.
    """
    v_range = list(v_range)
    vplus_range = list(vplus_range)
    if not v_range or not vplus_range:
        return []
    lo, hi = lambda_window
    lam_min = cplus_minimum_wavelength(model)
    lo = max(lo, lam_min * 1.001)
    if hi <= lo:
        return []

    levels = vibrational_levels(model.vg_curve, model.reduced_mass,
                                r_min=0.5, r_max=25.0, n_points=6001)
    n_bound = len(levels)
    vmax_plus = max(vplus_range)

    def well_levels(lam):
        try:
            ls = adiabatic_levels(model, FieldPoint(lam, DIAGNOSTIC_INTENSITY),
                                  vmax_plus)
        except ModelError:
            return {}
        return {l.v: l.energy for l in ls}

    grid_lam = np.arange(lo, hi + scan_step, scan_step)
    grid_lam[-1] = min(grid_lam[-1], hi)
    table = [well_levels(lam) for lam in grid_lam]

    out = []
    for v in v_range:
        if v < 0 or v + 1 >= n_bound:
            continue
        ev = levels[v].energy
        for vp in vplus_range:
            for k in range(len(grid_lam) - 1):
                ea = table[k].get(vp)
                eb = table[k + 1].get(vp)
                if ea is None or eb is None:
                    continue
                fa, fb = ev - ea, ev - eb
                if fa == 0.0 or fa * fb > 0.0:
                    continue
                la, lb = grid_lam[k], grid_lam[k + 1]
                while lb - la > 0.05:
                    lm = 0.5 * (la + lb)
                    em = well_levels(lm).get(vp)
                    if em is None:
                        break
                    if (ev - em) * fa <= 0.0:
                        lb = lm
                    else:
                        la, fa = lm, ev - em
                lam_c = 0.5 * (la + lb)
                rx = crossing_radius(model, lam_c)
                if rx is None:
                    continue
                out.append(EPCandidate(v=v, v_partner=v + 1, v_plus=vp,
                                       lambda_guess=lam_c))
                break
    out.sort(key=lambda c: (c.v, c.v_plus))
    return out


class _PairPath:
    """Continues two labelled resonances across the parameter plane.

    A walk proceeds in straight segments from the last accepted point,
    splitting the segment whenever a solve fails, the two roots cannot be
    assigned unambiguously, or a branch moves farther than max_jump in one
    step.  Predictions come from a local linear model of each branch over
    the recent history, which stays valid when the walk zig-zags (the
    refinement stage probes a finite-difference stencil).
    """

    _LAM_SCALE = 1.0       # nm per walk unit
    _INT_SCALE = 0.001     # intensity units (1e13 W/cm^2) per walk unit

    def __init__(self, model, v, v_partner, grid=None, *, n_blocks=2,
                 max_jump=5e-4, history=6):
        self.model = model
        self.grid = grid if grid is not None else RadialGrid()
        self.n_blocks = n_blocks
        self.max_jump = max_jump
        self._hist = history
        levels = vibrational_levels(model.vg_curve, model.reduced_mass,
                                    r_min=self.grid.r_min, r_max=self.grid.r_max,
                                    n_points=self.grid.n_points)
        if v_partner >= len(levels):
            raise ModelError(f"pair ({v}, {v_partner}) exceeds the "
                             f"{len(levels)} bound levels")
        self.labels = (v, v_partner)
        self._free = (complex(levels[v].energy), complex(levels[v_partner].energy))
        self._points: list[tuple[float, float, tuple[complex, complex]]] = []

    def _solve_pair(self, lam, inten, guesses):
        system = build_system(self.model, FieldPoint(lam, inten * INTENSITY_UNIT),
                              self.grid, n_blocks=self.n_blocks)
        r1 = find_resonance(system, guesses[0])
        r2 = find_resonance(system, guesses[1], deflate=(r1.energy,))
        found = (r1.energy, r2.energy)
        # assign found roots to predicted branches; swap when it is clearly
        # better, reject when neither assignment separates the branches
        d_keep = abs(found[0] - guesses[0]) + abs(found[1] - guesses[1])
        d_swap = abs(found[0] - guesses[1]) + abs(found[1] - guesses[0])
        if d_swap < d_keep:
            found = (found[1], found[0])
            d_keep, d_swap = d_swap, d_keep
        if abs(found[0] - found[1]) < 1e-13:
            raise ConvergenceError("resonances lost identity during continuation",
                                   last_value=found[0])
        return found

    def _predict(self, lam, inten):
        pts = self._points[-self._hist:]
        if len(pts) < 3:
            return pts[-1][2]
        a = np.array([[1.0, (p[0] - lam) / self._LAM_SCALE,
                       (p[1] - inten) / self._INT_SCALE] for p in pts])
        out = []
        for j in range(2):
            b = np.array([p[2][j] for p in pts])
            coef = np.linalg.lstsq(a, b, rcond=None)[0]
            out.append(coef[0])
        return tuple(out)

    def seed(self, lam, inten=0.0):
        self._points = [(lam, inten, self._free)]

    def advance(self, lam, inten, *, max_splits=14):
        """Walk from the current point to (lam, inten); returns the pair."""
        if not self._points:
            raise ConvergenceError("pair path has no starting point")
        stack = [(lam, inten)]
        splits = 0
        while stack:
            tl, ti = stack[-1]
            cl, ci, ce = self._points[-1]
            if abs(tl - cl) < 1e-12 and abs(ti - ci) < 1e-12:
                stack.pop()
                continue
            guess = self._predict(tl, ti)
            try:
                found = self._solve_pair(tl, ti, guess)
                jump = max(abs(found[0] - ce[0]), abs(found[1] - ce[1]))
                if jump > self.max_jump:
                    raise ConvergenceError("branch moved too far in one step",
                                           last_value=found[0])
            except ConvergenceError:
                splits += 1
                if splits > max_splits:
                    raise ConvergenceError(
                        "resonances lost identity during continuation; "
                        "restart with smaller steps", iterations=splits)
                stack.append((0.5 * (cl + tl), 0.5 * (ci + ti)))
                continue
            self._points.append((tl, ti, found))
            if len(self._points) > 400:
                del self._points[:100]
            stack.pop()
        return self._points[-1][2]

    def pair_at(self, lam, inten):
        """Pair evaluator for the coalescence search (intensity in
        units of 10^13 W/cm^2)."""
        return self.advance(lam, inten)


def _initial_intensity(path: _PairPath, lam, *, i_cap=0.6, n_scan=30):
    """Scan intensity upward at fixed wavelength and return the gap
    minimum, refined by a parabola through the bracketing samples."""
    path.seed(lam, 0.0)
    best_i, best_g = None, math.inf
    gaps = []
    step = i_cap / n_scan
    for k in range(1, n_scan + 1):
        i = k * step
        e1, e2 = path.advance(lam, i)
        g = abs(e1 - e2)
        gaps.append((i, g))
        if g < best_g:
            best_i, best_g = i, g
        elif g > 3.0 * best_g and len(gaps) >= 3:
            break
    k = next(j for j, (i, g) in enumerate(gaps) if i == best_i)
    if 0 < k < len(gaps) - 1:
        (ia, ga), (ib, gb), (ic, gc) = gaps[k - 1], gaps[k], gaps[k + 1]
        denom = (ga - 2.0 * gb + gc)
        if denom > 0:
            best_i = ib + 0.5 * step * (ga - gc) / denom
    return best_i, best_g


def find_coalescence(pair_fn, lam0, i0, *, gap_tol=_GAP_TOL, d_lambda=0.02,
                     d_intensity=0.002, max_iter=60):
    """Drive the squared complex gap of a resonance pair to zero.

    pair_fn(lambda_nm, intensity_1e13) must return the two branch energies
    consistently labelled between calls.  Newton iterates on the two real
    equations Re[(E1-E2)^2] = Im[(E1-E2)^2] = 0 with a central-difference
    Jacobian; steps are capped and fall back to a simplex search on the
    gap magnitude if the iteration stops making progress.
    """
    lam, inten = float(lam0), float(i0)

    def gap_sq(l, i):
        e1, e2 = pair_fn(l, i)
        return (e1 - e2) ** 2, (e1, e2)

    def newton(lam, inten, iters):
        stall = 0
        s, pair = gap_sq(lam, inten)
        for _ in range(iters):
            gap = math.sqrt(abs(s))
            if gap < gap_tol:
                return lam, inten, pair, gap
            sp_l, _ = gap_sq(lam + d_lambda, inten)
            sm_l, _ = gap_sq(lam - d_lambda, inten)
            sp_i, _ = gap_sq(lam, inten + d_intensity)
            sm_i, _ = gap_sq(lam, inten - d_intensity)
            jac = np.array([
                [(sp_l.real - sm_l.real) / (2 * d_lambda),
                 (sp_i.real - sm_i.real) / (2 * d_intensity)],
                [(sp_l.imag - sm_l.imag) / (2 * d_lambda),
                 (sp_i.imag - sm_i.imag) / (2 * d_intensity)]])
            try:
                dx = np.linalg.solve(jac, -np.array([s.real, s.imag]))
            except np.linalg.LinAlgError:
                break
            dx[0] = float(np.clip(dx[0], -4.0, 4.0))
            dx[1] = float(np.clip(dx[1], -0.04, 0.04))
            accepted = False
            for _ in range(6):
                trial = (lam + dx[0], max(inten + dx[1], 1e-4))
                s_new, pair_new = gap_sq(*trial)
                if abs(s_new) < abs(s):
                    lam, inten = trial
                    s, pair = s_new, pair_new
                    accepted = True
                    break
                dx *= 0.5
            if not accepted:
                stall += 1
                if stall >= 3:
                    break
            else:
                stall = 0
        return lam, inten, pair, math.sqrt(abs(s))

    lam, inten, pair, gap = newton(lam, inten, max_iter)
    if gap >= gap_tol:
        from scipy.optimize import minimize

        res = minimize(lambda x: abs(gap_sq(x[0], max(x[1], 1e-4))[0]),
                       [lam, inten], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 0.0,
                                "initial_simplex": [
                                    [lam, inten],
                                    [lam + 0.5, inten],
                                    [lam, inten + 0.005]],
                                "maxiter": 200})
        lam, inten, pair, gap = newton(res.x[0], max(res.x[1], 1e-4), max_iter)
    if gap >= gap_tol:
        raise ConvergenceError(
            f"coalescence search stalled with gap {gap:.3e}", last_value=gap)
    return lam, inten, pair, gap


def refine_ep(model: MoleculeModel, candidate: EPCandidate,
              grid: RadialGrid | None = None, *, n_blocks=2,
              pair_fn=None, i_cap=0.6) -> EPRecord:
    """Refine a candidate to a coalescence in the (wavelength, intensity)
    plane.

    pair_fn overrides the resonance-pair evaluator; the default tracks the
    candidate's pair with adaptive continuation from zero field.  The
    override exists so closed-form two-level models can exercise the same
    search (and so tests can pin the machinery independently of the
    molecular solve).
    """
    if pair_fn is None:
        path = _PairPath(model, candidate.v, candidate.v_partner, grid,
                         n_blocks=n_blocks)
        i0, gap0 = _initial_intensity(path, candidate.lambda_guess, i_cap=i_cap)
        if i0 is None:
            raise ConvergenceError("no gap minimum along the intensity scan")
        pair_fn = path.pair_at
        lam0 = candidate.lambda_guess
    else:
        lam0, i0 = candidate.lambda_guess, i_cap * 0.5
    lam, inten, pair, gap = find_coalescence(pair_fn, lam0, i0)
    return EPRecord(pair=(candidate.v, candidate.v_partner),
                    lambda_ep=lam, intensity_ep=inten, gap_residual=gap,
                    e_ep=0.5 * (pair[0] + pair[1]), v_plus=candidate.v_plus)


def _step_character(e, stepped):
    """Feshbach/Shape sign pattern of one branch under an intensity step."""
    de = stepped.real - e.real
    dw = -2.0 * (stepped.imag - e.imag)
    if de > 0 and dw < 0:
        return "Feshbach"
    if de < 0 and dw > 0:
        return "Shape"
    return "Unclassified"


def verify_signature(model: MoleculeModel, ep: EPRecord, d_lambda: float = 0.05,
                     *, grid=None, n_blocks=2, n_scan=25,
                     neighbors=()) -> SignatureReport:
    """Check the crossing/tweezer signature on either side of an EP.

    Scans intensity through the EP at lambda_ep -/+ d_lambda.  A valid EP
    shows the real parts crossing on exactly one side with the widths
    avoiding (tweezer), and the mirrored pattern on the other side.  The
    characters come from stepping the tracked pair a little past the scan
    top, which keeps branch identity where independent probes would hop.
    The report is flagged contaminated when the scan cannot isolate this
    EP: a record in neighbors shares a branch and sits within d_lambda, a
    side shows more than one crossing, or the pair tracking itself
    collides.
    """
    i_lo = max(0.25 * ep.intensity_ep, 1e-3)
    i_hi = 1.7 * ep.intensity_ep
    crowded = any(n is not ep
                  and set(n.pair) & set(ep.pair)
                  and abs(n.lambda_ep - ep.lambda_ep) <= d_lambda
                  and n.intensity_ep <= i_hi
                  for n in neighbors)

    def scan(lam):
        path = _PairPath(model, ep.pair[0], ep.pair[1], grid, n_blocks=n_blocks)
        path.seed(lam, 0.0)
        re_gap, w_gap = [], []
        pair = None
        for i in np.linspace(i_lo, i_hi, n_scan):
            e1, e2 = path.advance(lam, i)
            re_gap.append(e1.real - e2.real)
            w_gap.append(e1.imag - e2.imag)
            pair = (e1, e2)
        stepped = path.advance(lam, 1.02 * i_hi)
        chars = tuple(_step_character(e, p) for e, p in zip(pair, stepped))
        re_x = int(np.sum(np.diff(np.sign(re_gap)) != 0))
        w_x = int(np.sum(np.diff(np.sign(w_gap)) != 0))
        return SideScan(wavelength=lam, re_crossings=re_x, width_crossings=w_x,
                        min_width_split=float(np.min(np.abs(w_gap))),
                        characters=tuple(chars))

    collided = False
    sides = []
    for lam in (ep.lambda_ep - d_lambda, ep.lambda_ep + d_lambda):
        try:
            sides.append(scan(lam))
        except ConvergenceError:
            collided = True
            sides.append(SideScan(wavelength=lam, re_crossings=0,
                                  width_crossings=0, min_width_split=math.inf,
                                  characters=("Unclassified", "Unclassified")))
    low, high = sides
    contaminated = (crowded or collided
                    or low.re_crossings + low.width_crossings > 2
                    or high.re_crossings + high.width_crossings > 2)
    crossing_side = None
    for a, b in ((low, high), (high, low)):
        if a.re_crossings == 1 and a.width_crossings == 0 \
                and b.re_crossings == 0 and b.width_crossings == 1:
            crossing_side = a
    interchanged = (low.characters == high.characters[::-1]
                    and low.characters[0] != low.characters[1])
    valid = crossing_side is not None and not contaminated
    return SignatureReport(ep=ep, side_low=low, side_high=high,
                           interchanged=interchanged,
                           contaminated=contaminated, valid=valid)


def _refine_worker(args):
    origin, grid_args, n_blocks, cand_args, i_cap = args
    model = load_molecule(origin)
    grid = RadialGrid(*grid_args)
    cand = EPCandidate(*cand_args)
    try:
        return refine_ep(model, cand, grid, n_blocks=n_blocks, i_cap=i_cap)
    except (ConvergenceError, ModelError) as ex:
        return (cand, str(ex))


def map_clusters(model: MoleculeModel, v_max: int,
                 lambda_window: tuple[float, float], *, grid=None,
                 vplus_max=8, n_blocks=2, jobs=1, i_cap=0.6,
                 progress=None) -> list[EPRecord]:
    """Locate every EP seeded by crossings up to v_max inside the window.

    Individual refinement failures are logged and skipped.  Records come
    back grouped into wavelength clusters (gaps below 50 nm) ordered red
    to blue, ascending v inside each cluster.
    """
    grid = grid if grid is not None else RadialGrid()
    cands = approximate_eps(model, range(v_max + 1), range(vplus_max + 1),
                            lambda_window)
    records, failures = [], []

    if jobs > 1 and model.origin:
        grid_args = (grid.r_min, grid.r_max, grid.n_points,
                     grid.ecs_radius, grid.ecs_angle)
        work = [(model.origin, grid_args, n_blocks,
                 (c.v, c.v_partner, c.v_plus, c.lambda_guess), i_cap)
                for c in cands]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for cand, result in zip(cands, pool.map(_refine_worker, work)):
                if isinstance(result, EPRecord):
                    records.append(result)
                else:
                    failures.append(result)
                if progress:
                    progress(cand, result)
    else:
        for cand in cands:
            try:
                rec = refine_ep(model, cand, grid, n_blocks=n_blocks,
                                i_cap=i_cap)
                records.append(rec)
            except (ConvergenceError, ModelError) as ex:
                failures.append((cand, str(ex)))
                rec = None
            if progress:
                progress(cand, rec)
    for cand, msg in failures:
        log.warning("refinement failed for %s: %s", cand, msg)

    records.sort(key=lambda r: -r.lambda_ep)
    ordered, cluster = [], []
    for rec in records:
        if cluster and cluster[-1].lambda_ep - rec.lambda_ep > 50.0:
            cluster.sort(key=lambda r: r.pair[0])
            ordered.extend(cluster)
            cluster = []
        cluster.append(rec)
    cluster.sort(key=lambda r: r.pair[0])
    ordered.extend(cluster)
    return ordered


def cluster_bands(records) -> list[list[EPRecord]]:
    """Split an ordered record list into its wavelength clusters."""
    bands = []
    for rec in sorted(records, key=lambda r: -r.lambda_ep):
        if bands and bands[-1][-1].lambda_ep - rec.lambda_ep <= 50.0:
            bands[-1].append(rec)
        else:
            bands.append([rec])
    return bands


def records_to_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair", "lambda_nm", "intensity_1e13Wcm2", "gap_residual"])
        for r in records:
            w.writerow([f"{r.pair[0]}-{r.pair[1]}",
                        f"{r.lambda_ep:.12g}", f"{r.intensity_ep:.12g}",
                        f"{r.gap_residual:.12g}"])


def records_to_json(records, path):
    blob = [{"pair": list(r.pair), "lambda_nm": r.lambda_ep,
             "intensity_1e13Wcm2": r.intensity_ep,
             "gap_residual": r.gap_residual,
             "e_ep": [r.e_ep.real, r.e_ep.imag],
             "v_plus": r.v_plus} for r in records]
    with open(path, "w") as fh:
        json.dump(blob, fh, indent=1)


def records_from_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            a, b = row["pair"].split("-")
            out.append(EPRecord(pair=(int(a), int(b)),
                                lambda_ep=float(row["lambda_nm"]),
                                intensity_ep=float(row["intensity_1e13Wcm2"]),
                                gap_residual=float(row["gap_residual"]),
                                e_ep=0j))
    return out
