"""Certificate computation and trace verification.

The trivial certificate cases use single-unit networks built so the
transformed error matrix comes out diagonal, which makes every constant
computable by hand.
"""

from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

from conftest import benchmark_schedule, quiet_schedule
from coopftc.analysis import (consensus_report, cooperative_state_error,
                              dissipation_check, empirical_l2_ratio,
                              iss_certificate,
                              timevarying_reference_boundedness,
                              verify_iss_bound)
from coopftc.control import ClosedLoopState, ControlLaw, build_closed_loop
from coopftc.errors import (IdentityCheckFailedError, NotHurwitzError,
                            NotPositiveStableError)
from coopftc.estimator import build_observer
from coopftc.graph import build_graph
from coopftc.linalg import kron
from coopftc.plant import (AgentModel, augment_network, dc_motor_agent,
                           stack_network)
from coopftc.sim import (SignalSchedule, constant_disturbance,
                         piecewise_setpoint, run_experiment,
                         sample_initial_state, step_fault)
from coopftc.synth import synth_controller, synth_observer


def _single_unit_net(A, B, C, D):
    agent = AgentModel(A=np.atleast_2d(A), B=np.atleast_2d(B),
                       C=np.atleast_2d(C), D=np.atleast_2d(D),
                       F=np.eye(np.atleast_2d(C).shape[0]))
    return stack_network([agent])


def _unit_graph():
    return build_graph(1, [], [(1, 1.0)])


# --- iss_certificate --------------------------------------------------------

def test_certificate_scalar_closed_forms():
    # identity graph, A+BK = -1, Q = 2 => P_e = 1
    net = _single_unit_net([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    cert = iss_certificate(_unit_graph(), net, np.zeros((1, 1)),
                           Q=2.0 * np.eye(1))
    npt.assert_allclose(cert.Phi, [[-1.0]], atol=1e-12)
    npt.assert_allclose(cert.P_e, [[1.0]], atol=1e-10)
    assert cert.c1 == pytest.approx(1.0)
    assert cert.alpha == pytest.approx(1.0)
    assert cert.c2 == pytest.approx(0.5)


def test_certificate_diagonal_closed_forms():
    net = _single_unit_net(np.diag([-1.0, -2.0]), [[1.0], [1.0]],
                           [[1.0, 1.0]], [[1.0], [0.0]])
    cert = iss_certificate(_unit_graph(), net, np.zeros((1, 2)))
    npt.assert_allclose(cert.Phi, np.diag([-1.0, -2.0]), atol=1e-12)
    npt.assert_allclose(cert.P_e, np.diag([0.5, 0.25]), atol=1e-10)
    assert cert.c1 == pytest.approx(np.sqrt(2.0))
    assert cert.alpha == pytest.approx(1.0)
    assert cert.c2 == pytest.approx(0.5)


def test_certificate_benchmark_constants(star_cert):
    c = star_cert
    for value in (c.kappa, c.alpha, c.beta, c.c1, c.c2, c.c3):
        assert np.isfinite(value) and value > 0
    assert c.lyapunov_residual <= 1e-8
    resid = np.linalg.norm(c.Phi.T @ c.P_e + c.P_e @ c.Phi + c.Q)
    assert resid <= 1e-8 * np.linalg.norm(c.Q)


def test_certificate_rejects_unstable_laplacian(benchmark_net,
                                                controller_synth):
    g = build_graph(4, [(1, 2, 1.0)], [(1, 1.0)])  # units 3,4 isolated
    with pytest.raises(NotPositiveStableError):
        iss_certificate(g, benchmark_net, controller_synth.K)


def test_certificate_rejects_unstable_closed_loop():
    net = _single_unit_net([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(NotHurwitzError):
        iss_certificate(_unit_graph(), net, np.zeros((1, 1)))


# --- cooperative_state_error ------------------------------------------------

def test_state_error_zero_at_state_consensus(star_graph):
    x0 = np.array([0.3, -0.7])
    err = cooperative_state_error(star_graph, np.tile(x0, 4), x0)
    npt.assert_allclose(err, 0.0, atol=1e-12)


def test_state_error_star_per_agent_offsets(star_graph):
    rng = np.random.default_rng(9)
    x = rng.normal(size=8)
    x0 = rng.normal(size=2)
    err = cooperative_state_error(star_graph, x, x0)
    npt.assert_allclose(err, x - np.tile(x0, 4), atol=1e-12)


def test_state_error_linear_in_state(graphs):
    g = graphs["cyclic"]
    rng = np.random.default_rng(10)
    xa, xb = rng.normal(size=(2, 8))
    x0 = np.zeros(2)
    lhs = cooperative_state_error(g, xa + xb, x0)
    rhs = cooperative_state_error(g, xa, x0) \
        + cooperative_state_error(g, xb, x0)
    npt.assert_allclose(lhs, rhs, atol=1e-12)


def test_state_error_batch_rows_match_vectors(graphs):
    g = graphs["path"]
    rng = np.random.default_rng(11)
    X = rng.normal(size=(5, 8))
    x0 = rng.normal(size=2)
    batch = cooperative_state_error(g, X, x0)
    for k in range(5):
        npt.assert_allclose(batch[k],
                            cooperative_state_error(g, X[k], x0),
                            atol=1e-12)


# --- verify_iss_bound -------------------------------------------------------

def test_iss_bound_zero_run(loops, star_cert, benchmark_net):
    sched = SignalSchedule(disturbance=constant_disturbance(0.0, 4),
                           fault=step_fault(0.0, 0.0, 4),
                           setpoint=piecewise_setpoint([0.0], [0.0]),
                           setpoint_times=(0.0,), fault_times=())
    rest = ClosedLoopState(x=np.zeros(8), eta=np.zeros(12), q=np.zeros(4))
    tr = run_experiment(loops["star"], sched, rest, h=1e-3, T=1.0)
    report = verify_iss_bound(tr, star_cert, benchmark_net,
                              loops["star"].law)
    assert report.passed
    assert report.windows[0].sup_error <= 1e-12
    assert report.windows[0].sup_input <= 1e-12


def test_iss_bound_disturbance_free_run(quiet_traces, star_cert,
                                        benchmark_net, loops):
    report = verify_iss_bound(quiet_traces["star"], star_cert,
                              benchmark_net, loops["star"].law)
    assert report.passed
    assert report.max_relative_violation <= 1e-9
    assert len(report.windows) == 1


def test_iss_bound_full_benchmark_run(benchmark_trace, star_cert,
                                      benchmark_net, loops):
    report = verify_iss_bound(benchmark_trace, star_cert, benchmark_net,
                              loops["star"].law)
    assert report.passed
    assert len(report.windows) == 2  # setpoint step at t=20 splits the trace
    assert report.max_relative_violation <= 1e-9


def test_iss_bound_detects_tampered_inputs(benchmark_trace, star_cert,
                                           benchmark_net, loops):
    forged = replace(benchmark_trace, u=np.zeros_like(benchmark_trace.u))
    with pytest.raises(IdentityCheckFailedError):
        verify_iss_bound(forged, star_cert, benchmark_net,
                         loops["star"].law)


def test_equilibrium_error_reached_by_inner_loop(benchmark_net,
                                                 benchmark_aug, observer,
                                                 controller_synth,
                                                 star_graph, s0):
    """With the outer loop off, the plant decays to the origin, so the
    cooperative state error lands exactly on the computed equilibrium."""
    law = ControlLaw(graph=star_graph, K=controller_synth.K,
                     ell_p=0.0, ell_i=0.0)
    loop = build_closed_loop(benchmark_net, benchmark_aug, observer, law)
    tr = run_experiment(loop, quiet_schedule(4), s0, h=1e-3, T=15.0)
    x0 = np.array([1.0, 0.0])  # designated state lifting the setpoint
    e_star = -kron(star_graph.A_0, np.eye(2)) @ np.tile(x0, 4)
    final = cooperative_state_error(star_graph, tr.x[-1], x0)
    assert np.linalg.norm(final - e_star) <= 1e-6


# --- dissipation_check ------------------------------------------------------

def test_dissipation_storage_decreases_without_disturbance(
        quiet_traces, observer_synth):
    tr = quiet_traces["star"]
    eps = np.hstack([tr.x - tr.x_hat, tr.f_s - tr.f_hat])
    V = np.einsum("ij,ij->i", eps @ observer_synth.P, eps)
    early = tr.t <= 5.0
    assert V[0] > 1e-3
    assert np.all(np.diff(V[early]) < 0.0)


def test_dissipation_benchmark_run(benchmark_trace, benchmark_aug,
                                   benchmark_net, observer_synth):
    report = dissipation_check(benchmark_trace, benchmark_aug,
                               benchmark_net, observer_synth)
    assert report.passed
    assert report.max_interior_value <= 1e-9
    assert report.n_excluded >= 2


def test_dissipation_fd_deviation_order(loops, s0, benchmark_aug,
                                        benchmark_net, observer_synth):
    devs = {}
    for h in (1e-3, 5e-4):
        tr = run_experiment(loops["star"], quiet_schedule(4), s0, h=h,
                            T=2.0)
        rep = dissipation_check(tr, benchmark_aug, benchmark_net,
                                observer_synth)
        devs[h] = rep.max_fd_deviation
    assert devs[1e-3] / devs[5e-4] >= 3.0


# --- consensus_report -------------------------------------------------------

def test_consensus_quiet_run_offsets(quiet_traces, benchmark_net,
                                     star_graph):
    report = consensus_report(quiet_traces["star"], benchmark_net,
                              star_graph)
    assert report.final_offset.max() <= 1e-4
    assert report.max_pairwise_final <= 1e-4
    assert np.all(np.isfinite(report.settling_time))


def test_consensus_identical_agents_stay_identical(star_graph):
    agents = [dc_motor_agent(1) for _ in range(4)]
    net = stack_network(agents)
    aug = augment_network(net)
    obs = build_observer(aug, net, synth_observer(aug, net, 0.3))
    ctrl = synth_controller(net, 0.2, 0.3)
    law = ControlLaw(graph=star_graph, K=ctrl.K, ell_p=0.1, ell_i=90.0)
    loop = build_closed_loop(net, aug, obs, law)
    one = sample_initial_state(net, aug, seed=3).x[:2]
    same = ClosedLoopState(x=np.tile(one, 4), eta=np.zeros(12),
                           q=np.zeros(4))
    tr = run_experiment(loop, benchmark_schedule(4), same, h=1e-3, T=10.0)
    y = tr.x @ net.C.T
    spread = np.abs(y - y[:, :1])
    assert spread.max() <= 1e-9
    report = consensus_report(tr, net, star_graph)
    assert report.max_pairwise_final <= 1e-12


def test_consensus_star_settles_no_later_than_path(full_traces,
                                                   benchmark_net, graphs):
    star = consensus_report(full_traces["star"], benchmark_net,
                            graphs["star"])
    path = consensus_report(full_traces["path"], benchmark_net,
                            graphs["path"])
    assert np.all(np.isfinite(star.settling_time))
    assert np.all(np.isfinite(path.settling_time))
    assert star.settling_time.max() <= path.settling_time.max()


# --- time-varying reference -------------------------------------------------

def _ramp_schedule(rate, m=4):
    return SignalSchedule(disturbance=constant_disturbance(0.0, m),
                          fault=step_fault(0.0, 0.0, m),
                          setpoint=lambda t: np.array([rate * t]),
                          setpoint_times=(0.0,), fault_times=())


def test_timevarying_zero_rate_reduces_to_constant(quiet_traces, star_cert,
                                                   benchmark_net, loops):
    report = timevarying_reference_boundedness(
        quiet_traces["star"], star_cert, benchmark_net, loops["star"].law)
    assert report.passed
    assert report.sup_reference_rate <= 1e-9


def test_timevarying_rate_scaling(loops, star_cert, benchmark_net):
    rest = ClosedLoopState(x=np.zeros(8), eta=np.zeros(12), q=np.zeros(4))
    sups = {}
    for rate in (0.05, 0.1):
        tr = run_experiment(loops["star"], _ramp_schedule(rate), rest,
                            h=1e-3, T=20.0)
        report = timevarying_reference_boundedness(
            tr, star_cert, benchmark_net, loops["star"].law)
        assert report.passed
        sups[rate] = report.sup_shifted_error
    assert sups[0.1] <= 2.5 * sups[0.05]


def test_timevarying_long_horizon_stays_bounded(loops, star_cert,
                                                benchmark_net, s0):
    tr = run_experiment(loops["star"], _ramp_schedule(0.05), s0, h=1e-3,
                        T=80.0)
    report = timevarying_reference_boundedness(
        tr, star_cert, benchmark_net, loops["star"].law)
    assert report.passed
    assert report.final_shifted_error <= report.sup_shifted_error
    late = np.linalg.norm(
        tr.x[tr.t >= 40.0] @ kron(star_cert.graph.L, np.eye(2)).T, axis=1)
    assert late.max() <= 2.0 * late.min() + 1.0  # flat tail, no drift


# --- empirical L2 gain ------------------------------------------------------

def test_l2_ratio_below_synthesized_gamma(zero_init_trace, loops,
                                          controller_synth):
    report = empirical_l2_ratio(zero_init_trace, loops["star"].law)
    assert report.input_l2 > 0
    assert report.ratio <= controller_synth.gamma * 1.05
