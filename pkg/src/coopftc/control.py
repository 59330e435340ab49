"""Cooperative tracking signals and the observer-based control law.

Each unit drives its plant with two nested loops.  The inner loop is
robust state feedback on the unit's own state estimate,
``u* = K E1 x_o``.  The outer loop acts on the cooperative tracking
error ``e`` -- the weighted disagreement between a unit's shared output
estimate, its in-neighbors' estimates, and the source setpoint -- with
a per-agent proportional-integral pair ``(ell_p, ell_i)``:

    u = K E1 x_o - (ell_p . e + ell_i . q),     q' = e.

The integral path is what removes steady-state offsets across the
network; of a two-element outer gain, the large element belongs on the
integral channel.  Setting ``ell_p = 0`` gives pure distributed
integral action.

The cooperative error has two algebraically equal forms on a balanced
graph (row sums of neighbor plus source weights equal one); both are
computed and cross-checked on every call, so a forgotten
``normalize_weights`` surfaces immediately instead of silently skewing
the consensus point.

:func:`closed_loop_rhs` wires plant, observer, and outer loop into one
derivative over the canonical stacked state ``[x; eta; q]``;
:func:`closed_loop_maps` probes that derivative once to extract the
(affine) matrix realization used for fast simulation and for
eigenvalue/Lyapunov analysis of the loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, IdentityCheckFailedError
from .estimator import ObserverRealization, extract_estimates, observer_derivative
from .graph import NetworkGraph
from .plant import AugmentedModel, NetworkModel

__all__ = [
    "ControlLaw",
    "ClosedLoopState",
    "ClosedLoop",
    "ClosedLoopMaps",
    "in_neighbor_setpoint",
    "cooperative_error",
    "control_input",
    "build_closed_loop",
    "closed_loop_rhs",
    "closed_loop_maps",
]

#: Agreement tolerance between the two cooperative-error routes.
ERROR_IDENTITY_ATOL = 1e-12


@dataclass(frozen=True)
class ControlLaw:
    """Inner gain plus per-agent outer PI pairs, tied to a graph.

    ``ell_p`` and ``ell_i`` may be given as scalars (shared by all
    agents) or per-agent arrays of length ``graph.m``.
    """

    graph: NetworkGraph
    K: np.ndarray
    ell_p: np.ndarray
    ell_i: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2 or not np.all(np.isfinite(K)):
            raise DimensionMismatchError("K must be a finite 2-D matrix")
        object.__setattr__(self, "K", K)
        for name in ("ell_p", "ell_i"):
            g = np.broadcast_to(
                np.asarray(getattr(self, name), dtype=float),
                (self.graph.m,)).copy()
            if not np.all(np.isfinite(g)):
                raise DimensionMismatchError(f"{name} must be finite")
            object.__setattr__(self, name, g)


@dataclass(frozen=True)
class ClosedLoopState:
    """Canonical stacked state ``[x; eta; q]`` of one rollout."""

    x: np.ndarray
    eta: np.ndarray
    q: np.ndarray

    def packed(self) -> np.ndarray:
        return np.concatenate([self.x, self.eta, self.q])

    @staticmethod
    def unpack(vec: np.ndarray, nbar_x: int, n_aug: int) -> "ClosedLoopState":
        vec = np.asarray(vec, dtype=float)
        return ClosedLoopState(x=vec[:nbar_x],
                               eta=vec[nbar_x:nbar_x + n_aug],
                               q=vec[nbar_x + n_aug:])


@dataclass(frozen=True)
class ClosedLoop:
    """Everything needed to evaluate the closed-loop derivative."""

    net: NetworkModel
    aug: AugmentedModel
    obs: ObserverRealization
    law: ControlLaw

    @property
    def dim(self) -> int:
        return self.net.nbar_x + self.aug.n_aug + self.net.nbar_y


def _check_len(name, vec, n):
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (n,):
        raise DimensionMismatchError(
            f"{name} has shape {vec.shape}, expected ({n},)")
    return vec


def in_neighbor_setpoint(g: NetworkGraph, y_hat: np.ndarray,
                         y0: np.ndarray) -> np.ndarray:
    """Weighted reference each unit compares itself against:
    ``z = (A_m kron I) y_hat + (A_0 kron I) (1 kron y0)``."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    n_y = y0.size
    y_hat = _check_len("y_hat", y_hat, g.m * n_y)
    Am = np.kron(g.A_m, np.eye(n_y))
    A0 = np.kron(g.A_0, np.eye(n_y))
    return Am @ y_hat + A0 @ np.tile(y0, g.m)


def cooperative_error(g: NetworkGraph, y_hat: np.ndarray,
                      y0: np.ndarray) -> np.ndarray:
    """Cooperative tracking error ``e = (L kron I) y_hat - (A_0 kron I)
    (1 kron y0)``.

    The equal route ``y_hat - z`` (with ``z`` the in-neighbor setpoint)
    is evaluated as well and both must agree to ``1e-12`` -- an
    identity that holds exactly when the graph is balanced.

    Raises
    ------
    IdentityCheckFailedError
        When the two routes disagree, i.e. the graph was not
        normalized.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    n_y = y0.size
    y_hat = _check_len("y_hat", y_hat, g.m * n_y)
    Lk = np.kron(g.L, np.eye(n_y))
    A0 = np.kron(g.A_0, np.eye(n_y))
    e = Lk @ y_hat - A0 @ np.tile(y0, g.m)
    e_alt = y_hat - in_neighbor_setpoint(g, y_hat, y0)
    scale = max(1.0, float(np.abs(y_hat).max(initial=0.0)),
                float(np.abs(y0).max(initial=0.0)))
    if np.abs(e - e_alt).max() > ERROR_IDENTITY_ATOL * scale:
        raise IdentityCheckFailedError(
            "cooperative-error routes disagree by "
            f"{np.abs(e - e_alt).max():.3e}; the graph is not balanced "
            "(run normalize_weights first)")
    return e


def control_input(law: ControlLaw, E1: np.ndarray, x_o: np.ndarray,
                  e_bar: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Full control ``u = K E1 x_o - (ell_p . e + ell_i . q)``.

    The outer terms act per agent; this requires one input channel per
    output channel, which is checked against the shapes.
    """
    x_o = np.asarray(x_o, dtype=float)
    xhat = E1 @ x_o
    m = law.graph.m
    if law.K.shape[1] != xhat.size:
        raise DimensionMismatchError(
            f"K expects state of size {law.K.shape[1]}, got {xhat.size}")
    n_u, rem = divmod(law.K.shape[0], m)
    if rem:
        raise DimensionMismatchError(
            f"K has {law.K.shape[0]} rows, not divisible by m={m}")
    e_bar = _check_len("e_bar", e_bar, m * n_u)
    q = _check_len("q", q, m * n_u)
    outer = (np.repeat(law.ell_p, n_u) * e_bar
             + np.repeat(law.ell_i, n_u) * q)
    return law.K @ xhat - outer


def build_closed_loop(net: NetworkModel, aug: AugmentedModel,
                      obs: ObserverRealization, law: ControlLaw) -> ClosedLoop:
    """Validate cross-module dimensions once and freeze the wiring."""
    if law.graph.m != net.m:
        raise DimensionMismatchError(
            f"graph has m={law.graph.m}, network has m={net.m}")
    if law.K.shape != (net.nbar_u, net.nbar_x):
        raise DimensionMismatchError(
            f"K shape {law.K.shape}, expected {(net.nbar_u, net.nbar_x)}")
    if net.n_u != net.n_y:
        raise DimensionMismatchError(
            "outer PI action needs one input channel per output channel "
            f"(n_u={net.n_u}, n_y={net.n_y})")
    if obs.n_aug != aug.n_aug or obs.nbar_x != net.nbar_x:
        raise DimensionMismatchError("observer dims do not match models")
    return ClosedLoop(net=net, aug=aug, obs=obs, law=law)


def closed_loop_rhs(t: float, state: ClosedLoopState, loop: ClosedLoop,
                    signals) -> ClosedLoopState:
    """One evaluation of the complete networked loop.

    ``signals`` must provide ``disturbance(t)``, ``fault(t)`` and
    ``setpoint(t)`` returning the stacked disturbance, the stacked
    sensor-fault vector, and the shared source output.

    The wiring order mirrors the information flow: measure, estimate,
    share, compare, actuate.
    """
    net, aug, obs, law = loop.net, loop.aug, loop.obs, loop.law
    v = _check_len("disturbance", signals.disturbance(t), net.nbar_v)
    f_s = _check_len("fault", signals.fault(t), net.nbar_y)
    y0 = np.atleast_1d(np.asarray(signals.setpoint(t), dtype=float))

    y_f = net.C @ state.x + net.F @ f_s
    est = extract_estimates(obs, state.eta, y_f)
    y_hat = net.C @ est.x_hat
    e_bar = cooperative_error(law.graph, y_hat, y0)
    x_o = state.eta + obs.F2 @ y_f
    u = control_input(law, aug.E1, x_o, e_bar, state.q)

    dx = net.A @ state.x + net.B @ u + net.D @ v
    deta = observer_derivative(obs, state.eta, y_f, u)
    return ClosedLoopState(x=dx, eta=deta, q=e_bar)


@dataclass(frozen=True)
class ClosedLoopMaps:
    """Affine realization ``z' = M z + B_v v + B_f f_s + B_r y0`` of the
    closed loop, obtained by probing :func:`closed_loop_rhs`."""

    M: np.ndarray
    B_v: np.ndarray
    B_f: np.ndarray
    B_r: np.ndarray


class _Probe:
    def __init__(self, v, f, r):
        self._v, self._f, self._r = v, f, r

    def disturbance(self, t):
        return self._v

    def fault(self, t):
        return self._f

    def setpoint(self, t):
        return self._r


def closed_loop_maps(loop: ClosedLoop) -> ClosedLoopMaps:
    """Extract the linear realization by unit-vector probing.

    Probing the actual right-hand side (rather than re-deriving the
    block formulas) guarantees the fast path and the readable path
    cannot drift apart.
    """
    net = loop.net
    dim = loop.dim
    nbx, na = net.nbar_x, loop.aug.n_aug

    def f(z, v, fs, r):
        s = ClosedLoopState.unpack(z, nbx, na)
        d = closed_loop_rhs(0.0, s, loop, _Probe(v, fs, r))
        return d.packed()

    z0 = np.zeros(dim)
    v0 = np.zeros(net.nbar_v)
    f0 = np.zeros(net.nbar_y)
    r0 = np.zeros(net.n_y)
    base = f(z0, v0, f0, r0)
    if np.abs(base).max() > 0.0:
        raise IdentityCheckFailedError("closed loop is not affine-zero "
                                       "at the origin")

    def probe(n, mk):
        cols = np.empty((dim, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            cols[:, k] = mk(e) - base
        return cols

    M = probe(dim, lambda e: f(e, v0, f0, r0))
    B_v = probe(net.nbar_v, lambda e: f(z0, e, f0, r0))
    B_f = probe(net.nbar_y, lambda e: f(z0, v0, e, r0))
    B_r = probe(net.n_y, lambda e: f(z0, v0, f0, e))
    return ClosedLoopMaps(M=M, B_v=B_v, B_f=B_f, B_r=B_r)
