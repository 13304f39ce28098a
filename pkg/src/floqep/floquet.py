"""Coupled-channel quasienergies with outgoing-wave boundary conditions.

The time-periodic coupling of the two electronic states is expanded in photon
blocks; adjacent blocks alternate g/u character and differ by one photon, and
the radiative term couples neighbours through -E0 mu(R)/2.  The resulting
block-tridiagonal radial problem is discretized on a uniform grid whose outer
part is rotated into the complex plane (exterior scaling), which turns the
outgoing Siegert solutions into decaying ones; a zero boundary at both contour
ends then selects complex quasienergies E = E_R - i Gamma/2.

The solver propagates renormalized Numerov ratio matrices outward from the
origin and inward from the contour end; eigenvalues are roots of the matching
determinant at an interior point.  Ratio propagation is overflow-free, and a
dedicated one-point stencil bridges the real/rotated step mismatch at the
scaling corner.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, GridError, ModelError
from .molecule import FieldPoint, MoleculeModel, RadialGrid
from .units import HARTREE_TO_INVCM

__all__ = [
    "CoupledSystem",
    "Resonance",
    "build_system",
    "classify_resonance",
    "find_resonance",
    "matching_determinant",
]

_DE_TOL = 1e-12        # secant convergence on |dE|
_MAX_SECANT = 50
_IM_TOL = 1e-12        # tolerated positive imaginary part before rejection
_MAX_STEP = 2e-3       # cap on a single secant step, hartree


@dataclass(frozen=True)
class Resonance:
    """One complex quasienergy E = E_R - i Gamma/2.

    ``label`` is the field-free vibrational number attached by continuation
    (or zero-field matching); ``character`` is "Feshbach", "Shape" or
    "Unclassified"; ``residual`` is |matching determinant| at convergence.
    """

    energy: complex
    width: float
    label: int | None = None
    character: str | None = None
    residual: float = 0.0

    def __post_init__(self):
        if self.width < 0:
            raise ValueError(f"width must be non-negative, got {self.width}")
        if self.energy.imag > _IM_TOL:
            raise ValueError(f"resonance on the wrong sheet: Im E = {self.energy.imag:.3e}")

    @property
    def width_invcm(self) -> float:
        return self.width * HARTREE_TO_INVCM


def _block_list(n_blocks: int) -> list[tuple[str, int]]:
    if n_blocks < 2 or n_blocks % 2:
        raise ModelError(f"n_blocks must be an even count >= 2, got {n_blocks}")
    top = n_blocks // 2 - 1
    return [("g" if n % 2 == 0 else "u", n) for n in range(top, top - n_blocks, -1)]


class CoupledSystem:
    """Discretized coupled problem, ready for determinant evaluation.

    Immutable after construction; precomputes all energy-independent grid
    quantities so one determinant evaluation costs a single sweep.
    """

    def __init__(self, model: MoleculeModel, field: FieldPoint, grid: RadialGrid,
                 n_blocks: int = 2, matching_index: int | None = None):
        self.model = model
        self.field = field
        self.grid = grid
        self.blocks = _block_list(n_blocks)
        self.coupling = lambda r: -0.5 * field.e0 * model.dipole(r)

        vg, vu = model.vg_curve, model.vu_curve
        corner_r = grid.points()[grid.corner_index]
        for crv in (vg, vu):
            if corner_r < crv.continuation_start - 1e-9:
                raise GridError(
                    f"ecs_radius must lie at or beyond the analytic tail region "
                    f"(r >= {crv.continuation_start})")

        z = grid.contour()
        c = grid.corner_index
        x = np.real(z[: c + 1])
        mass = model.reduced_mass
        omega = field.omega
        self.reference = vg.asymptote

        curves = {"g": vg, "u": vu}
        diag = []
        for state, n in self.blocks:
            crv = curves[state]
            vals = np.empty(len(z), dtype=complex)
            vals[: c + 1] = crv(x)
            vals[c + 1:] = crv.eval_at(z[c + 1:])
            diag.append(vals + n * omega - self.reference)
        self._vdiag = diag

        mu = np.empty(len(z), dtype=complex)
        mu[: c + 1] = model.dipole(x)
        mu[c + 1:] = model.dipole.eval_at(z[c + 1:])
        self._woff = -mass * field.e0 * mu        # off-diagonal of W = 2M(V - E)

        h = grid.step
        b = h * cmath.exp(1j * grid.ecs_angle)
        p = np.full(len(z), h * h / 12.0, dtype=complex)
        p[c + 1:] = b * b / 12.0
        self._p = p
        self._2m = 2.0 * mass
        self._h, self._b, self._corner = h, b, c

        if matching_index is None:
            gidx = [i for i, (s, n) in enumerate(self.blocks) if (s, n) == ("g", 0)][0]
            matching_index = int(np.argmin(np.real(diag[gidx][: c])))
        if not 2 <= matching_index <= c - 3:
            raise GridError(f"matching index {matching_index} must sit between the "
                            f"inner boundary and the scaling corner")
        self.matching_index = matching_index

        self._check_resolution()
        self._corner_data(curves, mass, omega)

    def _check_resolution(self):
        c = self._corner
        re_v = [np.real(v[: c + 1]) for v in self._vdiag]
        spread = max(float(v[0]) for v in re_v) - min(float(v.min()) for v in re_v)
        if self._h * math.sqrt(self._2m * max(spread, 1e-6)) > 1.0:
            raise GridError("grid too coarse for the de Broglie resolution "
                            "at this energy scale")

    def _corner_data(self, curves, mass, omega):
        """Energy-independent pieces of the corner stencil at the scaling radius."""
        zc = complex(self.grid.points()[self._corner])
        nb = len(self.blocks)
        v0 = np.zeros((nb, nb), dtype=complex)
        v1 = np.zeros_like(v0)
        v2 = np.zeros_like(v0)
        for i, (state, n) in enumerate(self.blocks):
            crv = curves[state]
            v0[i, i] = crv.eval_at(zc) + n * omega - self.reference
            v1[i, i] = crv.d1(zc)
            v2[i, i] = crv.d2(zc)
        mu0 = self.model.dipole.eval_at(zc)
        mu1 = self.model.dipole.d1(zc)
        mu2 = self.model.dipole.d2(zc)
        coef = -0.5 * self.field.e0
        for i in range(nb - 1):
            v0[i, i + 1] = v0[i + 1, i] = coef * mu0
            v1[i, i + 1] = v1[i + 1, i] = coef * mu1
            v2[i, i + 1] = v2[i + 1, i] = coef * mu2
        self._w0c = 2.0 * mass * v0      # W(E) = _w0c - 2M E I
        self._w1c = 2.0 * mass * v1
        self._w2c = 2.0 * mass * v2

    # -- corner stencil ----------------------------------------------------
    def _corner_matrices(self, e: complex):
        a, b = self._h, self._b
        eye = np.eye(len(self.blocks), dtype=complex)
        w0 = self._w0c - self._2m * e * eye
        pp = a * b * (b * b - a * a) / 6.0
        qq = a * b * (a ** 3 + b ** 3) / 24.0
        cp = a / (b * (a + b))
        cm = -b / (a * (a + b))
        c0 = (b - a) / (a * b)
        pw = pp * w0 + 2.0 * qq * self._w1c
        a_plus = a * eye - pw * cp
        a_minus = b * eye - pw * cm
        a_zero = ((a + b) * eye + 0.5 * a * b * (a + b) * w0 + pp * self._w1c
                  + qq * (self._w2c + w0 @ w0) + pw * c0)
        return a_plus, a_minus, a_zero

    def _cross_corner(self, g_next: np.ndarray, e: complex) -> np.ndarray:
        """Carry the inward F-ratio across the corner: G_{c+1} -> G_c."""
        c = self._corner
        eye = np.eye(len(self.blocks), dtype=complex)
        pb = self._b * self._b / 12.0
        pa = self._h * self._h / 12.0
        wc = self._w0c - self._2m * e * eye
        fb_c = eye - pb * wc
        fb_c1 = eye - pb * self._wmat(c + 1, e)
        phi_ratio = np.linalg.solve(fb_c, g_next @ fb_c1)   # phi_c phi_{c+1}^-1
        a_plus, a_minus, a_zero = self._corner_matrices(e)
        g_c_phi = np.linalg.solve(a_minus, a_zero - a_plus @ np.linalg.inv(phi_ratio))
        fa_cm1 = eye - pa * self._wmat(c - 1, e)
        fa_c = eye - pa * wc
        return fa_cm1 @ g_c_phi @ np.linalg.inv(fa_c)

    def _wmat(self, k: int, e: complex) -> np.ndarray:
        nb = len(self.blocks)
        w = np.zeros((nb, nb), dtype=complex)
        for i in range(nb):
            w[i, i] = self._2m * (self._vdiag[i][k] - e)
        for i in range(nb - 1):
            w[i, i + 1] = w[i + 1, i] = self._woff[k]
        return w

    # -- determinant -------------------------------------------------------
    def determinant(self, e: complex) -> complex:
        """det(R_out - R_in^-1) at the matching point; zero at quasienergies."""
        if len(self.blocks) == 2:
            return self._det_two(e)
        return self._det_generic(e)

    def _det_two(self, e: complex) -> complex:
        p2m = self._p * self._2m
        tg = p2m * (self._vdiag[0] - e)
        tu = p2m * (self._vdiag[1] - e)
        tc = self._p * self._woff
        dg = 1.0 - tg
        du = 1.0 - tu
        det = dg * du - tc * tc
        ug = (12.0 * du / det - 10.0).tolist()
        uu = (12.0 * dg / det - 10.0).tolist()
        uc = (12.0 * tc / det).tolist()

        m = self.matching_index
        c = self._corner
        n = len(ug)

        rg, rc, ru = ug[1], uc[1], uu[1]
        for k in range(2, m + 1):
            d = rg * ru - rc * rc
            rg, rc, ru = ug[k] - ru / d, uc[k] + rc / d, uu[k] - rg / d

        gg, gc, gu = ug[n - 2], uc[n - 2], uu[n - 2]
        for k in range(n - 3, c, -1):
            d = gg * gu - gc * gc
            gg, gc, gu = ug[k] - gu / d, uc[k] + gc / d, uu[k] - gg / d

        g_mat = self._cross_corner(np.array([[gg, gc], [gc, gu]]), e)
        gg, gc, gu = g_mat[0, 0], g_mat[0, 1], g_mat[1, 1]
        for k in range(c - 1, m, -1):
            d = gg * gu - gc * gc
            gg, gc, gu = ug[k] - gu / d, uc[k] + gc / d, uu[k] - gg / d

        d = gg * gu - gc * gc
        m11 = rg - gu / d
        m12 = rc + gc / d
        m22 = ru - gg / d
        return m11 * m22 - m12 * m12

    def _det_generic(self, e: complex) -> complex:
        nb = len(self.blocks)
        n = len(self._p)
        eye = np.eye(nb, dtype=complex)
        diag = np.stack([v - e for v in self._vdiag])       # (nb, n)
        t = np.zeros((n, nb, nb), dtype=complex)
        idx = np.arange(nb)
        t[:, idx, idx] = (self._p * self._2m * diag).T
        off = self._p * self._woff
        for i in range(nb - 1):
            t[:, i, i + 1] = t[:, i + 1, i] = off
        u = 12.0 * np.linalg.inv(eye - t) - 10.0 * eye

        m = self.matching_index
        c = self._corner

        r = u[1].copy()
        for k in range(2, m + 1):
            r = u[k] - np.linalg.inv(r)

        g = u[n - 2].copy()
        for k in range(n - 3, c, -1):
            g = u[k] - np.linalg.inv(g)
        g = self._cross_corner(g, e)
        for k in range(c - 1, m, -1):
            g = u[k] - np.linalg.inv(g)

        return complex(np.linalg.det(r - np.linalg.inv(g)))


def build_system(model: MoleculeModel, field: FieldPoint, grid: RadialGrid | None = None,
                 n_blocks: int = 2, matching_index: int | None = None) -> CoupledSystem:
    """Assemble the coupled photon-block problem on the scaling contour."""
    if grid is None:
        grid = RadialGrid()
    return CoupledSystem(model, field, grid, n_blocks, matching_index)


def matching_determinant(system: CoupledSystem, e: complex) -> complex:
    """Matching determinant whose zeros are the complex quasienergies."""
    return system.determinant(e)


def find_resonance(system: CoupledSystem, e_guess: complex, label: int | None = None,
                   *, deflate: tuple = (), max_step: float = _MAX_STEP) -> Resonance:
    """Secant iteration in the complex plane from e_guess to one quasienergy.

    ``deflate`` divides out already-known roots so a nearby second root can be
    resolved (needed close to a coalescence).
    """

    def f(e: complex) -> complex:
        d = system.determinant(e)
        for r in deflate:
            d /= (e - r)
        return d

    e0 = complex(e_guess)
    e1 = e0 + 1e-9
    f0, f1 = f(e0), f(e1)
    peak = max(abs(f0), abs(f1))
    for _ in range(_MAX_SECANT):
        denom = f1 - f0
        if denom == 0 or not (cmath.isfinite(f1) and cmath.isfinite(f0)):
            e1 += 1e-9 * (1 + abs(e1)) * (1 + 1j)
            f1 = f(e1)
            continue
        step = -f1 * (e1 - e0) / denom
        if abs(step) > max_step:
            step *= max_step / abs(step)
        e0, f0 = e1, f1
        e1 = e1 + step
        f1 = f(e1)
        peak = max(peak, abs(f1))
        if abs(step) < _DE_TOL:
            if e1.imag > _IM_TOL:
                raise ConvergenceError(
                    f"converged to the unphysical sheet (Im E = {e1.imag:.3e})",
                    last_value=e1)
            resid = abs(system.determinant(e1))
            energy = complex(e1.real, min(e1.imag, 0.0))
            return Resonance(energy=energy, width=-2.0 * energy.imag, label=label,
                             residual=resid)
    raise ConvergenceError("no quasienergy within 50 secant iterations",
                           iterations=_MAX_SECANT, last_value=e1)


def classify_resonance(system: CoupledSystem, res: Resonance,
                       d_intensity: float | None = None) -> str:
    """Feshbach/Shape character from the sign pattern of an intensity step.

    Feshbach: position rises and width shrinks with intensity; Shape: the
    opposite; anything mixed (the near-coalescence regime) is Unclassified,
    as is a resonance whose probe step cannot be tracked.
    """
    field = system.field
    if d_intensity is None:
        d_intensity = max(0.02 * field.intensity, 1e9)
    stepped = CoupledSystem(system.model,
                            FieldPoint(field.wavelength, field.intensity + d_intensity),
                            system.grid, len(system.blocks), system.matching_index)
    try:
        res2 = find_resonance(stepped, res.energy, label=res.label)
    except ConvergenceError:
        return "Unclassified"
    de = res2.energy.real - res.energy.real
    dw = res2.width - res.width
    if de > 0 and dw < 0:
        return "Feshbach"
    if de < 0 and dw > 0:
        return "Shape"
    return "Unclassified"
