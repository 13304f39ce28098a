import cmath
import json
import math

import numpy as np
import pytest

from floqep.ep import (
    EPCandidate,
    EPRecord,
    approximate_eps,
    cluster_bands,
    cplus_minimum_wavelength,
    crossing_radius,
    find_coalescence,
    records_from_csv,
    records_to_csv,
    records_to_json,
    refine_ep,
    verify_signature,
)
from floqep.errors import ConvergenceError, ModelError
from floqep.molecule import (
    MoleculeModel,
    exp_repulsive,
    linear_dipole,
    load_molecule,
    morse_curve,
)


@pytest.fixture(scope="module")
def h2plus():
    return load_molecule("h2plus")


@pytest.fixture(scope="module")
def ep1213(h2plus):
    # crossing seed frozen from the coarse scan; the refinement drives the
    # squared gap below 1e-8 from here in a handful of Newton steps
    cand = EPCandidate(v=12, v_partner=13, v_plus=2, lambda_guess=635.95)
    return refine_ep(h2plus, cand)


# closed-form pair with an exact coalescence at (600 nm, 0.2): the squared
# gap is linear in both parameters, the eigenvalue gap a pure square root
TOY_E0 = -0.012 - 0.0015j
TOY_A = 2.5e-4
TOY_B = 4.0e-4


def toy_pair(lam, inten):
    s = cmath.sqrt(TOY_A * (lam - 600.0) + 1j * TOY_B * (inten - 0.2))
    return TOY_E0 + s, TOY_E0 - s


class TestCandidateScan:
    def test_minimum_wavelength(self, h2plus):
        assert cplus_minimum_wavelength(h2plus) == pytest.approx(104.45, abs=0.5)

    def test_crossing_radius_softens_outward(self, h2plus):
        assert crossing_radius(h2plus, 300.0) == pytest.approx(3.440, abs=0.05)
        assert crossing_radius(h2plus, 600.0) == pytest.approx(4.375, abs=0.05)
        assert crossing_radius(h2plus, 900.0) > crossing_radius(h2plus, 600.0)

    def test_no_crossing_for_hard_photon(self):
        toy = MoleculeModel(name="toy", vg_curve=morse_curve(0.1, 0.7, 2.0),
                            vu_curve=exp_repulsive(2.0, 0.9),
                            dipole=linear_dipole(0.5), reduced_mass=50.0)
        assert crossing_radius(toy, 30.0) is None

    def test_window_below_threshold_is_empty(self, h2plus):
        assert approximate_eps(h2plus, range(12, 14), range(4), (60.0, 100.0)) == []

    def test_frozen_seeds(self, h2plus):
        cands = approximate_eps(h2plus, (12, 13), (2, 3), (560.0, 660.0))
        got = {(c.v, c.v_partner, c.v_plus): c.lambda_guess for c in cands}
        assert set(got) == {(12, 13, 2), (13, 14, 3)}
        assert got[(12, 13, 2)] == pytest.approx(635.95, abs=0.5)
        assert got[(13, 14, 3)] == pytest.approx(602.58, abs=0.5)


class TestCoalescenceSearch:
    def test_toy_ep_to_machine_precision(self):
        lam, inten, pair, gap = find_coalescence(toy_pair, 601.5, 0.26)
        assert lam == pytest.approx(600.0, abs=1e-9)
        assert inten == pytest.approx(0.2, abs=1e-9)
        assert gap < 1e-8
        assert pair[0] == pytest.approx(TOY_E0, abs=1e-8)

    def test_fd_step_independence(self):
        coarse = find_coalescence(toy_pair, 601.5, 0.26,
                                  d_lambda=0.02, d_intensity=0.002)
        fine = find_coalescence(toy_pair, 601.5, 0.26,
                                d_lambda=0.002, d_intensity=0.0002)
        assert coarse[0] == pytest.approx(fine[0], abs=1e-9)
        assert coarse[1] == pytest.approx(fine[1], abs=1e-9)

    def test_gap_scales_as_square_root(self):
        def gap(dlam):
            e1, e2 = toy_pair(600.0 + dlam, 0.2)
            return abs(e1 - e2)

        assert gap(0.04) / gap(0.01) == pytest.approx(2.0, rel=1e-9)
        # the squared gap is linear, so quadrupling the offset quadruples it
        assert gap(0.04) ** 2 / gap(0.01) ** 2 == pytest.approx(4.0, rel=1e-9)

    def test_unreachable_gap_raises(self):
        def stuck_pair(lam, inten):
            s = TOY_A * (lam - 600.0) ** 2 + 1e-4 + 1j * TOY_B * (inten - 0.2)
            root = cmath.sqrt(s)
            return TOY_E0 + 0.5 * root, TOY_E0 - 0.5 * root

        with pytest.raises(ConvergenceError, match="stalled"):
            find_coalescence(stuck_pair, 600.0, 0.2)

    def test_refine_ep_with_custom_pair(self, h2plus):
        cand = EPCandidate(v=0, v_partner=1, v_plus=0, lambda_guess=601.0)
        rec = refine_ep(h2plus, cand, pair_fn=toy_pair, i_cap=0.5)
        assert rec.lambda_ep == pytest.approx(600.0, rel=1e-6)
        assert rec.intensity_ep == pytest.approx(0.2, rel=1e-6)
        assert rec.e_ep == pytest.approx(TOY_E0, abs=1e-8)
        assert rec.gap_residual < 1e-8

    def test_pair_outside_bound_spectrum(self, h2plus):
        cand = EPCandidate(v=25, v_partner=26, v_plus=2, lambda_guess=600.0)
        with pytest.raises(ModelError, match="bound levels"):
            refine_ep(h2plus, cand)


class TestRefinedRecord:
    def test_frozen_coordinates(self, ep1213):
        assert ep1213.pair == (12, 13)
        assert ep1213.v_plus == 2
        assert ep1213.lambda_ep == pytest.approx(634.550, abs=0.05)
        assert ep1213.intensity_ep == pytest.approx(0.2052, abs=0.002)
        assert ep1213.gap_residual < 1e-8

    def test_frozen_common_energy(self, ep1213):
        assert ep1213.e_ep.real == pytest.approx(-0.0094954, abs=2e-5)
        assert ep1213.e_ep.imag == pytest.approx(-0.0015346, abs=2e-5)

    def test_record_rejects_nonpositive_intensity(self):
        with pytest.raises(ModelError, match="positive"):
            EPRecord(pair=(1, 2), lambda_ep=600.0, intensity_ep=0.0,
                     gap_residual=0.0, e_ep=0j)


class TestSignature:
    def test_crossing_and_tweezer_sides(self, h2plus, ep1213):
        rep = verify_signature(h2plus, ep1213)
        assert rep.valid
        assert not rep.contaminated
        assert rep.interchanged
        sides = {(rep.side_low.re_crossings, rep.side_low.width_crossings),
                 (rep.side_high.re_crossings, rep.side_high.width_crossings)}
        assert sides == {(1, 0), (0, 1)}
        assert set(rep.side_low.characters) == {"Feshbach", "Shape"}
        assert rep.side_low.characters == rep.side_high.characters[::-1]

    def test_neighbor_contaminates(self, h2plus, ep1213):
        intruder = EPRecord(pair=(13, 14), lambda_ep=ep1213.lambda_ep + 0.01,
                            intensity_ep=ep1213.intensity_ep,
                            gap_residual=0.0, e_ep=0j)
        rep = verify_signature(h2plus, ep1213, neighbors=[ep1213, intruder])
        assert rep.contaminated
        assert not rep.valid


class TestSerialization:
    RECORDS = [
        EPRecord(pair=(12, 13), lambda_ep=634.550197362718,
                 intensity_ep=0.205204918377, gap_residual=3.1e-9,
                 e_ep=-0.00949537 - 0.00153464j, v_plus=2),
        EPRecord(pair=(13, 14), lambda_ep=604.603,
                 intensity_ep=0.22495, gap_residual=8.8e-10,
                 e_ep=-0.0101 - 0.0017j, v_plus=3),
    ]

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "records.csv"
        records_to_csv(self.RECORDS, path)
        back = records_from_csv(path)
        assert len(back) == 2
        for a, b in zip(self.RECORDS, back):
            assert b.pair == a.pair
            # full printed precision survives the round trip
            assert b.lambda_ep == float(f"{a.lambda_ep:.12g}")
            assert b.intensity_ep == float(f"{a.intensity_ep:.12g}")
            assert b.gap_residual == float(f"{a.gap_residual:.12g}")

    def test_json_fields(self, tmp_path):
        path = tmp_path / "records.json"
        records_to_json(self.RECORDS, path)
        blob = json.loads(path.read_text())
        assert blob[0]["pair"] == [12, 13]
        assert blob[0]["e_ep"] == [self.RECORDS[0].e_ep.real,
                                   self.RECORDS[0].e_ep.imag]
        assert blob[1]["v_plus"] == 3

    def test_cluster_bands(self):
        recs = [EPRecord(pair=(v, v + 1), lambda_ep=lam, intensity_ep=0.2,
                         gap_residual=0.0, e_ep=0j)
                for v, lam in ((12, 700.0), (13, 660.0), (14, 590.0))]
        bands = cluster_bands(recs)
        assert [[r.lambda_ep for r in band] for band in bands] == [
            [700.0, 660.0], [590.0]]
