"""Rotor coefficient table and force/power formulas."""

import numpy as np
import pytest

from floatfarm import rotor


@pytest.fixture(scope="module")
def aero():
    return rotor.AeroParams()


class TestThrustForce:
    def test_zero_wind_zero_force(self, aero):
        assert np.allclose(rotor.thrust_force(aero, [0.0, 0.0], 10.0, 0.8), 0.0)

    def test_closed_form_axial(self, aero):
        f = rotor.thrust_force(aero, [14.0, 0.0], 0.0, 0.84)
        assert f[0] == pytest.approx(1.257e6, rel=1e-3)
        assert f[1] == 0.0

    def test_yaw_rotates_without_changing_magnitude(self, aero):
        f0 = rotor.thrust_force(aero, [14.0, 0.0], 0.0, 0.84)
        f60 = rotor.thrust_force(aero, [14.0, 0.0], 60.0, 0.84)
        assert f60[0] == pytest.approx(6.287e5, rel=1e-3)
        assert f60[1] == pytest.approx(1.089e6, rel=1e-3)
        assert np.linalg.norm(f60) == pytest.approx(np.linalg.norm(f0), rel=1e-12)

    def test_magnitude_yaw_invariant_sweep(self, aero):
        mags = [np.linalg.norm(rotor.thrust_force(aero, [9.0, 2.0], yaw, 0.7))
                for yaw in np.linspace(-60, 60, 13)]
        assert np.ptp(mags) < 1e-6 * mags[0]

    def test_negative_ct_rejected(self, aero):
        with pytest.raises(ValueError):
            rotor.thrust_force(aero, [10.0, 0.0], 0.0, -0.1)


class TestCoefficientLookup:
    def test_node_is_exact(self, aero):
        table = aero.coefficient_table
        i, j = 23, 10
        ct, cq = table.lookup(table.tsr_axis[i], table.pitch_axis[j])
        assert ct == pytest.approx(table.ct[i, j], abs=1e-14)
        assert cq == pytest.approx(table.cq[i, j], abs=1e-14)

    def test_cell_midpoint_is_mean_of_corners(self, aero):
        table = aero.coefficient_table
        i, j = 30, 15
        tsr = 0.5 * (table.tsr_axis[i] + table.tsr_axis[i + 1])
        pitch = 0.5 * (table.pitch_axis[j] + table.pitch_axis[j + 1])
        _, cq = table.lookup(tsr, pitch)
        corners = table.cq[i:i + 2, j:j + 2]
        assert cq == pytest.approx(corners.mean(), rel=1e-12)

    def test_design_point_cp(self, aero):
        ct, cq = rotor.coefficient_lookup(aero, 7.55, 0.0)
        cp = 7.55 * cq
        assert cp == pytest.approx(0.482, rel=0.05)

    def test_betz_respected_everywhere(self, aero):
        table = aero.coefficient_table
        cp = table.cq * table.tsr_axis[:, None]
        assert cp.max() <= rotor.BETZ_LIMIT

    def test_out_of_bounds_clamps_and_counts(self, aero):
        table = rotor.build_default_table()
        before = table.clamp_count
        ct_hi, _ = table.lookup(20.0, 0.0)
        ct_edge, _ = table.lookup(15.0, 0.0)
        assert table.clamp_count == before + 1
        assert ct_hi == pytest.approx(ct_edge)

    def test_round_trip_file_format(self, aero, tmp_path):
        path = tmp_path / "coeffs.dat"
        rotor.write_coefficient_table(aero.coefficient_table, path)
        back = rotor.read_coefficient_table(path)
        assert np.allclose(back.ct, aero.coefficient_table.ct, atol=1e-8)
        assert np.allclose(back.cq, aero.coefficient_table.cq, atol=1e-8)


class TestTorqueStability:
    def test_cq_falls_with_tsr_on_operating_flank(self, aero):
        """Above the C_p peak, torque drops as the rotor speeds up.

        This sign makes the drivetrain equilibrium self-stabilizing under
        a power-law generator load, so speed regulation only has to trim
        slow drifts rather than fight an unstable plant.
        """
        for pitch in (0.0, -4.0, -11.0):
            cqs = [rotor.coefficient_lookup(aero, t, pitch)[1]
                   for t in np.arange(5.0, 9.0, 0.4)]
            assert np.all(np.diff(cqs) < 0.0)


class TestPower:
    def test_simple_product(self):
        assert rotor.power_output(1000.0, 100.0, 1.0) == pytest.approx(1e5)

    def test_rated_point(self):
        w = 1173.7 * np.pi / 30.0
        assert rotor.power_output(43094.0, w, 0.944) == pytest.approx(5.0e6, rel=1e-3)

    def test_zero_torque(self):
        assert rotor.power_output(0.0, 120.0, 0.944) == 0.0

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            rotor.power_output(1000.0, -1.0, 0.9)


class TestFarmPower:
    def test_paper_baseline_pattern(self):
        assert rotor.farm_power([5e6, 3e6, 3e6]) == pytest.approx(11e6)

    def test_empty_and_single(self):
        assert rotor.farm_power([]) == 0.0
        assert rotor.farm_power([2.5e6]) == 2.5e6

    def test_sum_invariant_under_permutation(self):
        rng = np.random.default_rng(0)
        values = rng.uniform(0.0, 5e6, 12)
        base = rotor.farm_power(values)
        for _ in range(5):
            rng.shuffle(values)
            assert rotor.farm_power(values) == pytest.approx(base, rel=1e-9)

    def test_record_total_matches(self):
        rec = rotor.PowerRecord([1e6, 2e6, 3e6])
        assert rec.farm_total == pytest.approx(rec.per_turbine.sum())
