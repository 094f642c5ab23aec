"""Steady farm construction and coupled time-marching tests.

Oracles: momentum-theory induction in closed form, reduced-model
residuals evaluated at every returned trim, and runs started exactly on
a farm fixed point, which must stay on it.
"""

import numpy as np
import pytest

from floatfarm.control import (
    MAX_POWER_MARGIN,
    SPEED_REFERENCE_CEILING,
    TurbineController,
    available_power,
    design_power_coefficient,
    speed_reference,
)
from floatfarm.params import default_params
from floatfarm.reduced_model import DisturbanceInputs, state_derivative
from floatfarm.simulator import (
    FarmSimulator,
    StationSpec,
    baseline_turbine_trim,
    farm_steady_state,
    held_turbine_trim,
    induction_from_ct,
)
from floatfarm.wind import WindSpec, synthesize

LAYOUT = [(84.0, 0.0), (966.0, 0.0), (1848.0, 0.0)]
FREE = (14.0, 0.0)
RPM = 30.0 / np.pi


@pytest.fixture(scope="module")
def params():
    return default_params()


@pytest.fixture(scope="module")
def steady(params):
    return farm_steady_state(params, LAYOUT, FREE)


def trim_residual(point, params):
    d = DisturbanceInputs(wind=point.inflow)
    return float(np.max(np.abs(
        state_derivative(point.state, point.command, d, params))))


class TestInduction:
    """Momentum-theory inversion a = (1 - sqrt(1 - Ct)) / 2."""

    def test_closed_form_values(self):
        assert induction_from_ct(0.0) == 0.0
        assert induction_from_ct(0.84) == pytest.approx(0.3)
        assert induction_from_ct(0.96) == pytest.approx(0.4)

    def test_deep_stall_clamps(self):
        # table corners exceed Ct = 1 where momentum theory has no root;
        # the clamp pins them just below it
        pinned = 0.5 * (1.0 - np.sqrt(1.0 - 0.9999))
        assert induction_from_ct(1.2) == pytest.approx(pinned)
        assert induction_from_ct(1.0) == pytest.approx(pinned)
        assert induction_from_ct(1.2) < 0.5


class TestBaselineTrim:
    """One-turbine steady states under the no-repositioning policy."""

    def test_rated_point(self, params):
        pt = baseline_turbine_trim(FREE, params)
        lim = params.limits
        assert pt.power == pytest.approx(params.rated_power)
        assert pt.state[13] == pytest.approx(
            SPEED_REFERENCE_CEILING * lim.omega_g_max)
        assert pt.command.nacelle_yaw == 0.0
        assert trim_residual(pt, params) < 1e-5

    def test_below_rated_tracks_reference(self, params):
        """Mid-band trims sit at the speed reference, slightly feathered."""
        pt = baseline_turbine_trim((9.5793, 0.0), params)
        k = design_power_coefficient(params)
        assert pt.power == pytest.approx(
            MAX_POWER_MARGIN * available_power(9.5793, k))
        assert pt.state[13] == pytest.approx(speed_reference(9.5793, params))
        assert -3.0 < pt.command.blade_pitch < -1.0
        assert trim_residual(pt, params) < 1e-5

    def test_railed_governor_regime(self, params):
        """Below the floor-clip knee the pitch rails at fine and the
        speed floats below the reference on the torque balance."""
        pt = baseline_turbine_trim((8.0, 0.0), params)
        k = design_power_coefficient(params)
        assert pt.command.blade_pitch == 0.0
        assert pt.state[13] < speed_reference(8.0, params)
        assert pt.power == pytest.approx(
            MAX_POWER_MARGIN * available_power(8.0, k))
        assert trim_residual(pt, params) < 1e-5


class TestHeldTrim:
    """Station-holding steady states (yawed, laterally displaced)."""

    def test_holds_station_and_power(self, params):
        pt = held_turbine_trim(FREE, 45.0, 5.0e6, params, yaw_guess=40.0)
        assert pt.state[1] == pytest.approx(45.0, abs=1e-6)
        assert pt.command.nacelle_yaw > 30.0
        assert pt.power == pytest.approx(5.0e6)
        assert trim_residual(pt, params) < 1e-5

    def test_cold_seed_recovers_by_walking_out(self, params):
        """A zero yaw seed strands the joint solve at far stations; the
        trim must still converge by continuation from the rest position."""
        pt = held_turbine_trim(FREE, -60.0, 5.0e6, params)
        assert pt.state[1] == pytest.approx(-60.0, abs=1e-6)
        assert pt.command.nacelle_yaw == pytest.approx(-56.65, abs=0.5)
        assert trim_residual(pt, params) < 1e-5


class TestFarmSteadyState:
    """Fixed points of trims coupled through steady wake profiles."""

    def test_baseline_operating_point(self, steady):
        assert steady.iterations < 20
        v = steady.inflow_speeds
        assert v == pytest.approx([14.0, 9.5793, 8.9793], abs=2e-3)
        assert v[0] > v[1] > v[2]
        p = np.array([pt.power for pt in steady.points]) / 1e6
        assert p == pytest.approx([5.0000, 3.3559, 2.7640], rel=1e-3)
        assert steady.farm_power / 1e6 == pytest.approx(11.120, rel=1e-3)

    def test_baseline_platform_and_drivetrain(self, steady):
        surge = [pt.state[0] for pt in steady.points]
        assert surge == pytest.approx([142.83, 115.86, 110.56], abs=0.1)
        omega = [pt.state[13] * RPM for pt in steady.points]
        assert omega == pytest.approx([1091.5, 788.7, 749.6], abs=0.5)
        beta = [pt.command.blade_pitch for pt in steady.points]
        assert beta == pytest.approx([-10.614, -2.078, -1.975], abs=0.05)

    def test_alternating_stations_reach_rated(self, params):
        """Staggered lateral stations clear the wake corridor enough for
        every rotor to reach rated; the layout optimizer relies on this
        headroom existing."""
        alt = farm_steady_state(
            params, LAYOUT, FREE,
            specs=[StationSpec(60.0), StationSpec(-60.0), StationSpec(60.0)])
        for pt in alt.points:
            assert pt.power == pytest.approx(params.rated_power)
        assert alt.farm_power == pytest.approx(15.0e6)

    def test_power_target_station(self, params):
        alt = farm_steady_state(params, [LAYOUT[0]], FREE,
                                specs=[StationSpec(-30.0, 4.0e6)])
        assert alt.points[0].power == pytest.approx(4.0e6)
        assert alt.points[0].state[1] == pytest.approx(-30.0, abs=1e-6)

    def test_spec_count_must_match(self, params):
        with pytest.raises(ValueError, match="one StationSpec per turbine"):
            farm_steady_state(params, LAYOUT, FREE, specs=[StationSpec()])


class TestFarmSimulator:
    """Coupled integrator: log contract, steadiness, and guard rails."""

    def quiet_sim(self, params, steady, duration, wakes_enabled=True, ti=0.0,
                  seed=0):
        wind = synthesize(WindSpec(FREE, ti, 170.0, duration, 0.5, seed=seed))
        ctrls = [TurbineController(params, use_mpc=False) for _ in range(3)]
        return FarmSimulator(params, steady, wind, ctrls, dt=0.5,
                             control_substeps=2, wakes_enabled=wakes_enabled)

    def test_log_shapes_and_times(self, params, steady):
        log = self.quiet_sim(params, steady, 10.0).run(10.0)
        n = 20
        assert log.times.shape == (n,)
        assert np.allclose(np.diff(log.times), 0.5)
        assert log.wind.shape == (n, 2)
        assert log.positions.shape == (n, 3, 2)
        assert log.commands.shape == (n, 3, 3)
        for name in ("powers", "effective_speeds", "generator_speeds",
                     "rotor_speeds"):
            assert getattr(log, name).shape == (n, 3)
        assert np.allclose(log.farm_power, log.powers.sum(axis=1))
        assert np.allclose(log.displacements,
                           log.positions - log.layout[None, :, :])

    def test_fixed_point_stays_put(self, params, steady):
        """Started exactly on the farm fixed point with steady wind, the
        run must not develop a transient: the controllers are seeded at
        the trim and the wake march starts from the steady profiles."""
        log = self.quiet_sim(params, steady, 120.0).run(120.0)
        x0 = np.array([steady.layout[i] + steady.points[i].state[0:2]
                       for i in range(3)])
        p0 = np.array([pt.power for pt in steady.points])
        assert np.abs(log.positions - x0[None]).max() < 2.0
        assert np.abs(log.powers / p0[None] - 1.0).max() < 0.05
        lim = params.limits
        assert log.generator_speeds.min() > lim.omega_g_min
        assert log.generator_speeds.max() < lim.omega_g_max

    def test_wakes_disabled_sees_free_stream(self, params, steady):
        log = self.quiet_sim(params, steady, 10.0, wakes_enabled=False,
                             ti=0.04, seed=5).run(10.0)
        free = np.hypot(log.wind[:, 0], log.wind[:, 1])
        assert np.allclose(log.effective_speeds, free[:, None])

    def test_band_compliance_short_turbulent_run(self, params, steady):
        log = self.quiet_sim(params, steady, 120.0, ti=0.036, seed=0).run(120.0)
        lim = params.limits
        assert log.generator_speeds.min() > lim.omega_g_min
        assert log.generator_speeds.max() < lim.omega_g_max
        beta = log.commands[:, :, 0]
        assert beta.min() >= lim.beta_min and beta.max() <= lim.beta_max
        tau = log.commands[:, :, 1]
        assert tau.min() >= lim.torque_min and tau.max() <= lim.torque_max

    def test_duration_must_be_step_multiple(self, params, steady):
        sim = self.quiet_sim(params, steady, 10.0)
        with pytest.raises(ValueError, match="not a multiple"):
            sim.run(10.3)

    def test_constructor_guards(self, params, steady):
        wind = synthesize(WindSpec(FREE, 0.0, 170.0, 10.0, 0.5, seed=0))
        ctrls = [TurbineController(params, use_mpc=False) for _ in range(2)]
        with pytest.raises(ValueError, match="3 turbines but 2 controllers"):
            FarmSimulator(params, steady, wind, ctrls)
        ctrls3 = [TurbineController(params, use_mpc=False) for _ in range(3)]
        with pytest.raises(ValueError, match="dt must be positive"):
            FarmSimulator(params, steady, wind, ctrls3, dt=0.0)
        with pytest.raises(ValueError, match="control_substeps"):
            FarmSimulator(params, steady, wind, ctrls3, control_substeps=0)
