import math

import numpy as np
import pytest
import scipy.linalg as sla
from numpy.testing import assert_allclose

from floqep.bound_states import vibrational_levels
from floqep.errors import ConvergenceError, GridError, ModelError
from floqep.floquet import (
    Resonance,
    build_system,
    classify_resonance,
    find_resonance,
    matching_determinant,
)
from floqep.molecule import (
    FieldPoint,
    MoleculeModel,
    RadialGrid,
    exp_repulsive,
    linear_dipole,
    load_molecule,
    morse_curve,
)


@pytest.fixture(scope="module")
def h2plus():
    return load_molecule("h2plus")


@pytest.fixture(scope="module")
def grid():
    return RadialGrid()


@pytest.fixture(scope="module")
def free_levels(h2plus, grid):
    # field-free reference on the same span and spacing as the contour grid
    return vibrational_levels(h2plus.vg_curve, h2plus.reduced_mass,
                              r_min=grid.r_min, r_max=grid.r_max,
                              n_points=grid.n_points)


@pytest.fixture(scope="module")
def toy():
    model = MoleculeModel(name="toy", vg_curve=morse_curve(0.1, 0.7, 2.0),
                          vu_curve=exp_repulsive(2.0, 0.9),
                          dipole=linear_dipole(0.5), reduced_mass=50.0)
    tgrid = RadialGrid(r_min=0.4, r_max=14.0, n_points=501,
                       ecs_radius=9.0, ecs_angle=0.3)
    levels = vibrational_levels(model.vg_curve, model.reduced_mass,
                                r_min=0.4, r_max=14.0, n_points=501)
    return model, tgrid, levels


def continued_resonance(model, grid, wavelength, intensity, e_start, n_steps=6):
    """Walk the intensity up in steps, reseeding from the previous root."""
    e = complex(e_start)
    res = None
    for i in np.linspace(intensity / n_steps, intensity, n_steps):
        system = build_system(model, FieldPoint(wavelength, i), grid)
        res = find_resonance(system, e)
        e = res.energy
    return res


def dense_eigenvalue(system, e_about, niter=3):
    """Independent oracle: the same discretization assembled as a dense
    generalized eigenproblem A x = -E B x instead of propagated ratios.

    Interior rows are the three-point recursion with the step factor of the
    row's own contour segment; the corner row is linearized in E about the
    current estimate and the whole pencil re-assembled a few times.
    """
    grid = system.grid
    n, c, nb = grid.n_points, grid.corner_index, len(system.blocks)
    p, vd, woff = system._p, system._vdiag, system._woff
    two_m = 2.0 * system.model.reduced_mass

    def assemble(e0):
        big = (n - 2) * nb
        a = np.zeros((big, big), complex)
        b = np.zeros((big, big), complex)
        idx = lambda k, blk: (k - 1) * nb + blk
        ap, am, a0 = system._corner_matrices(e0)
        de = 1e-6
        ap2, am2, a02 = system._corner_matrices(e0 + de)
        dap, dam, da0 = (ap2 - ap) / de, (am2 - am) / de, (a02 - a0) / de
        for k in range(1, n - 1):
            if k == c:
                for blk in range(nb):
                    r = idx(k, blk)
                    for b2 in range(nb):
                        a[r, idx(k + 1, b2)] += ap[blk, b2] - e0 * dap[blk, b2]
                        b[r, idx(k + 1, b2)] += dap[blk, b2]
                        a[r, idx(k - 1, b2)] += am[blk, b2] - e0 * dam[blk, b2]
                        b[r, idx(k - 1, b2)] += dam[blk, b2]
                        a[r, idx(k, b2)] -= a0[blk, b2] - e0 * da0[blk, b2]
                        b[r, idx(k, b2)] -= da0[blk, b2]
                continue
            pr = p[k]      # step factor of the row's segment
            for blk in range(nb):
                r = idx(k, blk)
                for kk, sign, w10 in ((k + 1, 1.0, 1.0), (k - 1, 1.0, 1.0),
                                      (k, -2.0, 10.0)):
                    if kk == 0 or kk == n - 1:
                        continue
                    a[r, idx(kk, blk)] += sign - w10 * pr * two_m * vd[blk][kk]
                    b[r, idx(kk, blk)] += w10 * pr * two_m
                    wo = w10 * pr * woff[kk]
                    if blk + 1 < nb:
                        a[r, idx(kk, blk + 1)] -= wo
                    if blk - 1 >= 0:
                        a[r, idx(kk, blk - 1)] -= wo
        return a, b

    e = e_about
    for _ in range(niter):
        a, b = assemble(e)
        w = sla.eig(a, -b, right=False)
        w = w[np.isfinite(w)]
        e = w[np.argmin(np.abs(w - e_about))]
    return e


class TestBlockStructure:
    def test_two_block_layout(self, h2plus, grid):
        system = build_system(h2plus, FieldPoint(600.0, 1e12), grid)
        assert system.blocks == [("g", 0), ("u", -1)]

    def test_four_block_layout(self, h2plus, grid):
        system = build_system(h2plus, FieldPoint(600.0, 1e12), grid, n_blocks=4)
        assert system.blocks == [("u", 1), ("g", 0), ("u", -1), ("g", -2)]

    def test_odd_block_count_rejected(self, h2plus, grid):
        with pytest.raises(ModelError, match="even"):
            build_system(h2plus, FieldPoint(600.0, 1e12), grid, n_blocks=3)


class TestZeroFieldLimit:
    def test_uncoupled_roots_are_bound_levels(self, h2plus, grid, free_levels):
        system = build_system(h2plus, FieldPoint(600.0, 0.0), grid)
        for v in (0, 5, 12, 16):
            res = find_resonance(system, complex(free_levels[v].energy))
            assert res.energy.real == pytest.approx(free_levels[v].energy, abs=1e-11)
            assert res.width < 1e-12

    def test_weak_field_stays_on_level(self, h2plus, grid, free_levels):
        # deep-UV point: the one-photon crossing falls inside every inner
        # turning point, so neither shifts nor widths are resolvable
        system = build_system(h2plus, FieldPoint(70.0, 1e6), grid)
        for v in (0, 8, 16):
            res = find_resonance(system, complex(free_levels[v].energy))
            assert res.energy.real == pytest.approx(free_levels[v].energy, abs=1e-8)
            assert res.width < 1e-10


@pytest.fixture(scope="module")
def res788(h2plus, grid, free_levels):
    return continued_resonance(h2plus, grid, TestFrozenResonance.WAVELENGTH,
                               TestFrozenResonance.INTENSITY,
                               free_levels[12].energy)


class TestFrozenResonance:
    WAVELENGTH = 788.2
    INTENSITY = 1e12
    # reference values from this solver on the default grid; stable to
    # 1e-8 under grid doubling and contour-angle changes (checked below)
    E_REF = -0.0119660506
    W_REF = 1.540394e-05

    def test_position_and_width(self, res788):
        assert res788.energy.real == pytest.approx(self.E_REF, abs=1e-8)
        assert res788.width == pytest.approx(self.W_REF, abs=5e-8)

    def test_matching_point_invariance(self, h2plus, grid, res788):
        base = build_system(h2plus, FieldPoint(self.WAVELENGTH, self.INTENSITY), grid)
        for shift in (-10, 10):
            moved = build_system(h2plus, FieldPoint(self.WAVELENGTH, self.INTENSITY),
                                 grid, matching_index=base.matching_index + shift)
            again = find_resonance(moved, res788.energy)
            assert abs(again.energy - res788.energy) < 1e-12

    def test_contour_angle_invariance(self, h2plus, grid, res788):
        for angle in (grid.ecs_angle - 0.05, grid.ecs_angle + 0.05):
            g2 = RadialGrid(grid.r_min, grid.r_max, grid.n_points,
                            grid.ecs_radius, angle)
            system = build_system(h2plus, FieldPoint(self.WAVELENGTH, self.INTENSITY), g2)
            again = find_resonance(system, res788.energy)
            assert abs(again.energy - res788.energy) < 1e-8

    def test_grid_doubling_invariance(self, h2plus, grid, res788):
        system = build_system(h2plus, FieldPoint(self.WAVELENGTH, self.INTENSITY),
                              grid.doubled())
        again = find_resonance(system, res788.energy)
        assert abs(again.energy - res788.energy) < 1e-8


class TestDenseOracle:
    def test_matches_propagated_root(self, toy):
        # same discretization, independent linear algebra; the agreement is
        # limited only by the corner-row linearization in E
        model, tgrid, levels = toy
        system = build_system(model, FieldPoint(600.0, 5e12), tgrid)
        res = find_resonance(system, complex(levels[2].energy))
        ref = dense_eigenvalue(system, res.energy)
        assert abs(ref - res.energy) < 5e-11
        assert res.energy.imag < -1e-5   # genuinely decaying at this field

    def test_determinant_vanishes_at_root(self, toy):
        model, tgrid, levels = toy
        system = build_system(model, FieldPoint(600.0, 5e12), tgrid)
        res = find_resonance(system, complex(levels[2].energy))
        on = abs(matching_determinant(system, res.energy))
        off = abs(matching_determinant(system, res.energy + 1e-4))
        assert on < 1e-6 * off


class TestMultiBlock:
    def test_zero_field_block_bookkeeping(self, toy):
        # uncoupled four-block problem: every g block carries a copy of the
        # bound spectrum shifted by its photon count
        model, tgrid, levels = toy
        fp = FieldPoint(600.0, 0.0)
        system = build_system(model, fp, tgrid, n_blocks=4)
        e1 = complex(levels[1].energy)
        assert find_resonance(system, e1).energy.real == pytest.approx(
            levels[1].energy, abs=1e-9)
        shifted = find_resonance(system, e1 - 2 * fp.omega)
        assert shifted.energy.real == pytest.approx(
            levels[1].energy - 2 * fp.omega, abs=1e-9)

    def test_block_truncation_error_is_first_order(self, toy):
        # the omitted blocks shift the root proportionally to intensity, so
        # the truncation error must scale down linearly with the field
        model, tgrid, levels = toy
        e0 = complex(levels[2].energy)

        def diff(inten):
            fp = FieldPoint(600.0, inten)
            r2 = find_resonance(build_system(model, fp, tgrid), e0)
            r4 = find_resonance(build_system(model, fp, tgrid, n_blocks=4), e0)
            return abs(r4.energy - r2.energy)

        d_lo, d_hi = diff(1e10), diff(1e11)
        assert d_lo < 3e-6
        assert d_hi / d_lo == pytest.approx(10.0, rel=0.2)


class TestClassification:
    def test_characters_across_the_crossing(self, h2plus, grid, free_levels):
        # at 700 nm the crossing sits between the v = 12 and v = 13 outer
        # turning points: the lower level behaves shape-like, the upper one
        # feshbach-like
        expected = {12: "Shape", 13: "Feshbach"}
        for v, want in expected.items():
            res = continued_resonance(h2plus, grid, 700.0, 1e12,
                                      free_levels[v].energy, n_steps=8)
            system = build_system(h2plus, FieldPoint(700.0, 1e12), grid)
            assert classify_resonance(system, res) == want


class TestGuards:
    def test_coarse_grid_rejected(self, h2plus):
        with pytest.raises(GridError, match="too coarse"):
            build_system(h2plus, FieldPoint(600.0, 1e12),
                         RadialGrid(n_points=500))

    def test_corner_before_tail_rejected(self, h2plus):
        with pytest.raises(GridError, match="tail region"):
            build_system(h2plus, FieldPoint(600.0, 1e12),
                         RadialGrid(ecs_radius=5.0))

    def test_matching_index_range(self, h2plus, grid):
        with pytest.raises(GridError, match="matching index"):
            build_system(h2plus, FieldPoint(600.0, 1e12), grid, matching_index=1)

    def test_secant_budget_exhausted(self, h2plus, grid):
        system = build_system(h2plus, FieldPoint(600.0, 1e12), grid)
        # no root below the well floor, and the step cap keeps the iterate there
        with pytest.raises(ConvergenceError, match="secant"):
            find_resonance(system, complex(-0.3), max_step=1e-6)

    def test_resonance_rejects_negative_width(self):
        with pytest.raises(ValueError, match="non-negative"):
            Resonance(energy=-0.1 - 0.001j, width=-1e-3)

    def test_resonance_rejects_wrong_sheet(self):
        with pytest.raises(ValueError, match="wrong sheet"):
            Resonance(energy=-0.1 + 1e-3j, width=2e-3)

    def test_width_conversion(self):
        res = Resonance(energy=-0.1 - 0.5e-4j, width=1e-4)
        assert res.width_invcm == pytest.approx(1e-4 * 219474.63)
