"""Bound vibrational levels of single-channel radial potentials.

Shooting solver on a uniform grid: Numerov propagation outward and inward,
eigenvalues bracketed by node counting (Sturm-safe, no missed or duplicated
levels) and polished by the matching-derivative Newton correction.  Used for
field-free diabatic levels and for quasi-bound levels of the upper adiabatic
potential treated as a plain well with a box boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ModelError
from .molecule import FieldPoint, MoleculeModel, adiabatic_potentials

__all__ = ["BoundLevel", "LevelSet", "adiabatic_levels", "vibrational_levels"]

_ETOL = 1e-12          # |dE| convergence for the Newton polish
_MAX_NEWTON = 200


@dataclass(frozen=True)
class BoundLevel:
    """One vibrational level: node count v and energy relative to the
    dissociation asymptote (negative for bound states of an open well)."""

    v: int
    energy: float


class LevelSet(list):
    """List of BoundLevel with a truncation flag.

    ``truncated`` is set when fewer levels exist than were requested;
    ``reference`` is the absolute energy subtracted from every level.
    """

    def __init__(self, items=(), truncated: bool = False, reference: float = 0.0):
        super().__init__(items)
        self.truncated = truncated
        self.reference = reference


class _Shooter:
    """Numerov propagation machinery for one potential on one grid.

    Works on the shifted potential (reference already subtracted), so the
    dissociation cap sits at 0 when the reference is the asymptote.
    """

    def __init__(self, v: np.ndarray, h: float, mass: float):
        self.v = v
        self.h = h
        self.mass = mass
        self.n = len(v)
        self.c2 = h * h * mass / 6.0   # t_k = c2 (V_k - E)

    def _f(self, e: float) -> np.ndarray:
        return 1.0 - self.c2 * (self.v - e)

    def count_nodes(self, e: float) -> int:
        """Sign changes of the left-regular solution across the box; equals
        the number of box eigenvalues below e."""
        f = self._f(e)
        a = ((12.0 - 10.0 * f[1:-1]) / f[2:]).tolist()
        b = (f[:-2] / f[2:]).tolist()
        p0, p1 = 0.0, 1.0
        nodes = 0
        for ak, bk in zip(a, b):
            p2 = ak * p1 - bk * p0
            if abs(p2) > 1e250:
                p1 *= 1e-250
                p2 *= 1e-250
            if p1 * p2 < 0.0:
                nodes += 1
            p0, p1 = p1, p2
        return nodes

    def _match_index(self, e: float) -> int:
        allowed = np.nonzero(self.v < e)[0]
        m = int(allowed[-1]) if len(allowed) else int(np.argmin(self.v))
        return min(max(m, 3), self.n - 4)

    def newton_step(self, e: float) -> float:
        """Matching-derivative (Cooley) energy correction at e."""
        f = self._f(e)
        fl = f.tolist()
        n = self.n
        m0 = self._match_index(e)

        out = [0.0, 1.0]   # out[k] lives on grid index k, filled to m0 + 3
        for k in range(1, m0 + 3):
            p2 = ((12.0 - 10.0 * fl[k]) * out[k] - fl[k - 1] * out[k - 1]) / fl[k + 1]
            if abs(p2) > 1e200:
                out = [x * 1e-200 for x in out]
                p2 *= 1e-200
            out.append(p2)

        inw = [0.0, 1.0]   # stored right to left from grid index n-1 down to m0-1
        for j, k in enumerate(range(n - 2, m0 - 1, -1)):
            q2 = ((12.0 - 10.0 * fl[k]) * inw[j + 1] - fl[k + 1] * inw[j]) / fl[k - 1]
            if abs(q2) > 1e200:
                inw = [x * 1e-200 for x in inw]
                q2 *= 1e-200
            inw.append(q2)
        inw.reverse()      # inw[j] lives on grid index m0 - 1 + j

        # keep the match away from a node of either branch
        m, best_w = m0, -1.0
        for mm in (m0, m0 - 1, m0 + 1, m0 + 2):
            w = min(abs(out[mm]), abs(inw[mm - m0 + 1]))
            if w > best_w:
                m, best_w = mm, w
        po, pi = out[m], inw[m - m0 + 1]
        if po == 0.0 or pi == 0.0:
            raise ConvergenceError("matching point fell on a node", last_value=e)

        phi_out = np.asarray(out[: m + 1]) / po
        phi_in = np.asarray(inw[m - m0 + 1:]) / pi
        norm = float(phi_out @ phi_out) + float(phi_in @ phi_in) - 1.0

        ym1 = fl[m - 1] * phi_out[m - 1]
        y0 = fl[m]
        yp1 = fl[m + 1] * phi_in[1]
        d = (-ym1 + 2.0 * y0 - yp1 + 12.0 * (1.0 - fl[m])) / (self.h * self.h)
        return d / (2.0 * self.mass * norm)

    def solve_level(self, v_target: int, e_lo: float, e_hi: float) -> float:
        """Eigenvalue with exactly v_target interior nodes inside (e_lo, e_hi).

        Caller guarantees count_nodes(e_lo) <= v_target < count_nodes(e_hi).
        """
        lo, hi = e_lo, e_hi
        klo, khi = self.count_nodes(lo), self.count_nodes(hi)
        if not klo <= v_target < khi:
            raise ConvergenceError(f"level {v_target} not inside the bracket",
                                   last_value=lo)
        # shrink until the bracket holds a single eigenvalue
        while not (klo == v_target and khi == v_target + 1):
            mid = 0.5 * (lo + hi)
            k = self.count_nodes(mid)
            if k <= v_target:
                lo, klo = mid, k
            else:
                hi, khi = mid, k
            if hi - lo < 1e-15 * max(1.0, abs(lo)):
                raise ConvergenceError(f"bracket collapsed for level {v_target}",
                                       last_value=mid)

        e = 0.5 * (lo + hi)
        prev = math.inf
        for it in range(_MAX_NEWTON):
            try:
                de = self.newton_step(e)
            except ConvergenceError:
                de = math.nan
            if not math.isfinite(de) or not (lo < e + de < hi):
                # fall back to bisection on node count
                k = self.count_nodes(e)
                if k <= v_target:
                    lo = e
                else:
                    hi = e
                e = 0.5 * (lo + hi)
                if hi - lo < _ETOL:
                    return e
                prev = math.inf
                continue
            e += de
            if abs(de) < _ETOL:
                return e
            # quadratic convergence exhausted: accept the noise floor
            if abs(de) >= 0.5 * prev and abs(de) < 1e3 * _ETOL * max(1.0, abs(e)):
                return e
            prev = abs(de)
        raise ConvergenceError(f"level {v_target} did not converge", iterations=_MAX_NEWTON,
                               last_value=e)


def _domain(potential, r_min, r_max):
    lo = getattr(potential, "r_lo", None)
    hi = getattr(potential, "r_hi", None)
    if r_min is None:
        r_min = lo if lo is not None else 0.1
    if r_max is None:
        r_max = hi if (hi is not None and math.isfinite(hi)) else 30.0
    if not r_max > r_min:
        raise ModelError(f"empty radial domain [{r_min}, {r_max}]")
    return float(r_min), float(r_max)


def vibrational_levels(potential, mass: float, v_max: int | None = None, *,
                       r_min: float | None = None, r_max: float | None = None,
                       n_points: int = 12001, asymptote: float | None = None) -> LevelSet:
    """Bound levels v = 0..v_max of a single-channel radial potential.

    ``potential`` is any callable of R (bohr) returning hartree; curve objects
    expose their domain and dissociation limit, otherwise pass ``asymptote``
    (energies are referenced to it, and only levels below it count as bound).
    With no finite asymptote the box spectrum is returned and ``v_max`` is
    required.  Returns fewer levels with ``truncated`` set when the well runs
    out of bound states.
    """
    if mass <= 0:
        raise ModelError(f"mass must be positive, got {mass}")
    if v_max is not None and v_max < 0:
        raise ModelError(f"v_max must be non-negative, got {v_max}")
    r_lo, r_hi = _domain(potential, r_min, r_max)
    r = np.linspace(r_lo, r_hi, n_points)
    vv = np.asarray(potential(r), dtype=float)

    if asymptote is None:
        asymptote = getattr(potential, "asymptote", None)
    if asymptote is None and v_max is None:
        raise ModelError("v_max is required for a potential without a dissociation limit")

    ref = float(asymptote) if asymptote is not None else 0.0
    vv = vv - ref

    imin = int(np.argmin(vv))
    if imin in (0, len(vv) - 1):
        raise ModelError("potential has no minimum inside the domain")
    floor = float(vv[imin])

    shooter = _Shooter(vv, (r_hi - r_lo) / (n_points - 1), mass)

    if asymptote is not None:
        cap = -1e-13
        if floor >= cap:
            return LevelSet([], truncated=v_max is not None, reference=ref)
        n_bound = shooter.count_nodes(cap)
    else:
        cap = max(float(vv[0]), float(vv[-1]), floor + 1.0)
        for _ in range(60):
            n_bound = shooter.count_nodes(cap)
            if n_bound > v_max:
                break
            cap = floor + 2.0 * (cap - floor)
        else:
            raise ConvergenceError(f"could not bracket {v_max + 1} box levels",
                                   last_value=cap)

    want = n_bound if v_max is None else min(v_max + 1, n_bound)
    levels = []
    lo = floor + 1e-14 * max(1.0, abs(floor))
    for v in range(want):
        e = shooter.solve_level(v, lo, cap)
        levels.append(BoundLevel(v=v, energy=e))
        lo = e + max(1e-13, 1e-13 * abs(e))
    truncated = v_max is not None and want < v_max + 1
    return LevelSet(levels, truncated=truncated, reference=ref)


def adiabatic_levels(model: MoleculeModel, field: FieldPoint, vplus_max: int, *,
                     r_max: float = 25.0, n_points: int = 6001) -> LevelSet:
    """Quasi-bound levels of the upper adiabatic potential V_plus.

    V_plus is treated as a plain single-channel well with a box boundary at
    r_max; continuum coupling is ignored at this stage.  Energies come out
    relative to the shared dissociation limit.  Returns an empty set when the
    well holds no level at this field point.
    """
    if field.intensity == 0.0:
        raise ModelError("zero-field adiabat undefined at crossing")
    ref = model.vg_curve.asymptote

    def vplus(r):
        return adiabatic_potentials(model, field, r)[0] - ref

    r_lo = max(model.vg_curve.r_lo, model.vu_curve.r_lo, 0.3)
    try:
        return vibrational_levels(vplus, model.reduced_mass, vplus_max,
                                  r_min=r_lo, r_max=r_max, n_points=n_points,
                                  asymptote=0.0)
    except ModelError as err:
        if "no minimum" in str(err):
            return LevelSet([], truncated=True, reference=ref)
        raise
