"""Cooperative signals, the PI outer loop, and closed-loop assembly.

The outer gain pair is applied as (proportional 0.1, integral 90); the
two-element benchmark gain list is ordered [integral, proportional].
See the README note on the outer-loop interpretation.
"""

import numpy as np
import numpy.testing as npt
import pytest

from conftest import quiet_schedule, random_reachable_graph
from coopftc.control import (ClosedLoopState, ControlLaw, build_closed_loop,
                             closed_loop_maps, closed_loop_rhs,
                             control_input, cooperative_error,
                             in_neighbor_setpoint)
from coopftc.errors import DimensionMismatchError
from coopftc.graph import benchmark_topology
from coopftc.linalg import is_hurwitz, kron, solve_linear
from coopftc.sim import SignalSchedule, constant_disturbance, \
    piecewise_setpoint, step_fault


def test_star_neighbor_setpoint_is_source(star_graph):
    y_hat = np.array([3.0, -1.0, 2.0, 0.5])
    z = in_neighbor_setpoint(star_graph, y_hat, np.array([1.5]))
    npt.assert_allclose(z, 1.5 * np.ones(4))


def test_cyclic_neighbor_setpoint_weights(graphs):
    z = in_neighbor_setpoint(graphs["cyclic"],
                             np.array([1.0, 2.0, 3.0, 4.0]),
                             np.array([0.0]))
    # unit 1 hears units 2 and 4 at weight 0.3 each
    npt.assert_allclose(z[0], 1.8)


def test_balanced_consensus_passthrough():
    g = random_reachable_graph(np.random.default_rng(42))
    y0 = np.array([0.7])
    z = in_neighbor_setpoint(g, 0.7 * np.ones(g.m), y0)
    npt.assert_allclose(z, 0.7 * np.ones(g.m), atol=1e-12)


def test_cooperative_error_zero_at_consensus():
    g = random_reachable_graph(np.random.default_rng(43))
    e = cooperative_error(g, 1.3 * np.ones(g.m), np.array([1.3]))
    npt.assert_allclose(e, 0.0, atol=1e-12)


def test_cooperative_error_star_is_direct_offset(star_graph):
    y_hat = np.array([1.0, 2.0, 3.0, 4.0])
    e = cooperative_error(star_graph, y_hat, np.array([1.0]))
    npt.assert_allclose(e, y_hat - 1.0)


def test_cooperative_error_identity_paths():
    rng = np.random.default_rng(44)
    g = random_reachable_graph(rng)
    y_hat = rng.normal(size=g.m)
    y0 = rng.normal(size=1)
    e = cooperative_error(g, y_hat, y0)
    direct = kron(g.L, np.eye(1)) @ y_hat \
        - kron(g.A_0, np.eye(1)) @ np.repeat(y0, g.m)
    npt.assert_allclose(e, direct, atol=1e-12)
    z = in_neighbor_setpoint(g, y_hat, y0)
    npt.assert_allclose(e, y_hat - z, atol=1e-12)


def test_cooperative_error_dimension_check(star_graph):
    with pytest.raises(DimensionMismatchError):
        cooperative_error(star_graph, np.zeros(3), np.zeros(1))


def test_control_input_zero(loops, benchmark_aug):
    law = loops["star"].law
    u = control_input(law, benchmark_aug.E1, np.zeros(12), np.zeros(4),
                      np.zeros(4))
    npt.assert_allclose(u, 0.0)


def test_control_input_outer_gain_mapping(loops, benchmark_aug):
    """Proportional 0.1 acts on e, integral 90 on the accumulated q."""
    law = loops["star"].law
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    u_p = control_input(law, benchmark_aug.E1, np.zeros(12), e1, np.zeros(4))
    npt.assert_allclose(u_p, [-0.1, 0.0, 0.0, 0.0], atol=1e-15)
    u_i = control_input(law, benchmark_aug.E1, np.zeros(12), np.zeros(4), e1)
    npt.assert_allclose(u_i, [-90.0, 0.0, 0.0, 0.0], atol=1e-15)


def test_control_input_inner_gain_and_superposition(loops, benchmark_aug):
    law = loops["star"].law
    rng = np.random.default_rng(45)
    x_o = rng.normal(size=12)
    e = rng.normal(size=4)
    q = rng.normal(size=4)
    u = control_input(law, benchmark_aug.E1, x_o, e, q)
    ref = law.K @ (benchmark_aug.E1 @ x_o) - (law.ell_p * e
                                              + law.ell_i * q)
    npt.assert_allclose(u, ref, atol=1e-12)
    u_split = control_input(law, benchmark_aug.E1, x_o, np.zeros(4),
                            np.zeros(4)) \
        + control_input(law, benchmark_aug.E1, np.zeros(12), e, q)
    npt.assert_allclose(u, u_split, atol=1e-12)


def test_closed_loop_dimension(loops):
    assert loops["star"].dim == 24  # 4*2 states + 4*3 observer + 4*1 integral


def test_zero_equilibrium(loops):
    sched = SignalSchedule(disturbance=constant_disturbance(0.0, 4),
                           fault=step_fault(0.0, 0.0, 4),
                           setpoint=piecewise_setpoint([0.0], [0.0]),
                           setpoint_times=(0.0,), fault_times=())
    rest = ClosedLoopState(x=np.zeros(8), eta=np.zeros(12), q=np.zeros(4))
    ds = closed_loop_rhs(1.0, rest, loops["star"], sched)
    npt.assert_allclose(ds.packed(), 0.0, atol=0)


@pytest.mark.parametrize("name", ["star", "cyclic", "path"])
def test_homogeneous_closed_loop_hurwitz(loops, name):
    maps = closed_loop_maps(loops[name])
    assert maps.M.shape == (24, 24)
    assert is_hurwitz(maps.M)


def test_affine_maps_match_reference_rhs(loops):
    loop = loops["star"]
    maps = closed_loop_maps(loop)
    sched = quiet_schedule(4)
    rng = np.random.default_rng(46)
    z = rng.normal(size=24)
    state = ClosedLoopState.unpack(z, 8, 12)
    ref = closed_loop_rhs(0.0, state, loop, sched).packed()
    fast = maps.M @ z + maps.B_v @ sched.disturbance(0.0) \
        + maps.B_f @ sched.fault(0.0) + maps.B_r @ sched.setpoint(0.0)
    npt.assert_allclose(fast, ref, atol=1e-12)


def test_zero_error_equivalent_to_consensus():
    rng = np.random.default_rng(47)
    for _ in range(5):
        g = random_reachable_graph(rng)
        y0 = rng.normal(size=1)
        # consensus => zero error
        e = cooperative_error(g, np.repeat(y0, g.m), y0)
        npt.assert_allclose(e, 0.0, atol=1e-12)
        # zero error => consensus
        rhs = kron(g.A_0, np.eye(1)) @ np.repeat(y0, g.m)
        y_hat = solve_linear(kron(g.L, np.eye(1)), rhs)
        npt.assert_allclose(y_hat, np.repeat(y0, g.m), atol=1e-8)


def test_integral_action_removes_steady_offset(quiet_traces, benchmark_net):
    y = quiet_traces["star"].x @ benchmark_net.C.T
    assert np.abs(y[-1] - 1.0).max() <= 1e-4
