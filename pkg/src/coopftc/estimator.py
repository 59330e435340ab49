"""Realizable augmented-state observer and its verification oracle.

The observer runs in transformed coordinates ``eta = x_o - F2 y_f`` so
that only measured signals appear on the right-hand side:

    eta' = A_obs eta + F1 B u + (A_obs F2 + L) y_f,
    x_o  = eta + F2 y_f,          A_obs = F1 A_a - L E2.

The measured output is injected exactly once, through
``B_y = A_obs F2 + L``; that is the unique form consistent with the
change of variables above, and :func:`virtual_observer_oracle` exists
precisely to check this equivalence numerically against the idealized
observer driven by the true augmented-state derivative.

Splitting ``x_o`` along the canonical augmented layout gives the plant
state estimate and the sensor-fault estimate in one step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import DimensionMismatchError, NotHurwitzError
from .linalg import is_hurwitz
from .plant import AugmentedModel, NetworkModel
from .synth import ObserverSynthesis

__all__ = [
    "ObserverRealization",
    "EstimateSplit",
    "build_observer",
    "observer_derivative",
    "extract_estimates",
    "virtual_observer_oracle",
]


@dataclass(frozen=True)
class ObserverRealization:
    """Matrices of the transformed observer, immutable once built."""

    A_obs: np.ndarray  #: state matrix F1 A_a - L E2 (Hurwitz)
    B_u: np.ndarray    #: input injection F1 B
    B_y: np.ndarray    #: measured-output injection A_obs F2 + L
    F2: np.ndarray     #: lift from measured output to augmented state
    n_aug: int
    nbar_x: int
    nbar_y: int


@dataclass(frozen=True)
class EstimateSplit:
    """State and sensor-fault estimates cut from one augmented vector."""

    x_hat: np.ndarray
    f_hat: np.ndarray


def build_observer(aug: AugmentedModel, net: NetworkModel,
                   synth: ObserverSynthesis) -> ObserverRealization:
    """Assemble the realizable observer from a synthesized gain.

    The Hurwitz property of ``A_obs`` is re-checked here even though
    the synthesis already certified it; construction is cheap and the
    check keeps this module independent of how the gain was produced.

    Raises
    ------
    NotHurwitzError
        If ``F1 A_a - L E2`` fails the Lyapunov-based stability test.
    """
    Lgain = np.asarray(synth.Lgain, dtype=float)
    if Lgain.shape != (aug.n_aug, net.nbar_y):
        raise DimensionMismatchError(
            f"observer gain shape {Lgain.shape}, expected "
            f"{(aug.n_aug, net.nbar_y)}")
    A_obs = aug.F1 @ aug.A_a - Lgain @ aug.E2
    if not is_hurwitz(A_obs):
        raise NotHurwitzError("observer state matrix F1 A_a - L E2 is "
                              "not Hurwitz; refuse to build realization")
    return ObserverRealization(
        A_obs=A_obs,
        B_u=aug.F1 @ net.B,
        B_y=A_obs @ aug.F2 + Lgain,
        F2=aug.F2.copy(),
        n_aug=aug.n_aug,
        nbar_x=net.nbar_x,
        nbar_y=net.nbar_y,
    )


def observer_derivative(obs: ObserverRealization, eta: np.ndarray,
                        y_f: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Right-hand side ``A_obs eta + B_u u + B_y y_f``."""
    eta = np.asarray(eta, dtype=float)
    y_f = np.asarray(y_f, dtype=float)
    u = np.asarray(u, dtype=float)
    if eta.shape != (obs.n_aug,):
        raise DimensionMismatchError(
            f"eta has shape {eta.shape}, expected ({obs.n_aug},)")
    if y_f.shape != (obs.nbar_y,):
        raise DimensionMismatchError(
            f"y_f has shape {y_f.shape}, expected ({obs.nbar_y},)")
    if u.shape != (obs.B_u.shape[1],):
        raise DimensionMismatchError(
            f"u has shape {u.shape}, expected ({obs.B_u.shape[1]},)")
    return obs.A_obs @ eta + obs.B_u @ u + obs.B_y @ y_f


def extract_estimates(obs: ObserverRealization, eta: np.ndarray,
                      y_f: np.ndarray) -> EstimateSplit:
    """Recover ``x_o = eta + F2 y_f`` and split it along the canonical
    layout (plant states first, sensor-fault components after)."""
    eta = np.asarray(eta, dtype=float)
    y_f = np.asarray(y_f, dtype=float)
    if eta.shape != (obs.n_aug,):
        raise DimensionMismatchError(
            f"eta has shape {eta.shape}, expected ({obs.n_aug},)")
    if y_f.shape != (obs.nbar_y,):
        raise DimensionMismatchError(
            f"y_f has shape {y_f.shape}, expected ({obs.nbar_y},)")
    x_o = eta + obs.F2 @ y_f
    return EstimateSplit(x_hat=x_o[:obs.nbar_x], f_hat=x_o[obs.nbar_x:])


def virtual_observer_oracle(aug: AugmentedModel, net: NetworkModel,
                            synth: ObserverSynthesis,
                            times: np.ndarray, x_a: np.ndarray,
                            x_a_dot: np.ndarray, u: np.ndarray,
                            x_o0: np.ndarray | None = None) -> np.ndarray:
    """Integrate the idealized observer that sees the true derivative.

    This observer is not implementable (it consumes the exact
    augmented-state derivative through the filtered-output slope), so
    it serves purely as a test oracle: fed the recorded
    ``x_a``/``x_a_dot``/``u`` traces of a run, its ``x_o`` trajectory
    must match ``eta + F2 y_f`` from the realizable observer to
    integration accuracy.  Signals between grid points are
    reconstructed by cubic Hermite interpolation (the derivative trace
    pins the slope), keeping the classical Runge-Kutta steps at full
    order.  The equivalence itself holds because the difference of the
    two observers obeys the homogeneous estimation-error dynamics.

    Parameters
    ----------
    times : (N,) strictly increasing, uniformly spaced sample times.
    x_a : (N, n_aug) true augmented-state trace.
    x_a_dot : (N, n_aug) its exact derivative trace.
    u : (N, nbar_u) input trace.
    x_o0 : optional initial estimate; defaults to ``F2 E2 x_a(0)``,
        which matches starting the realizable observer at
        ``eta(0) = 0``.

    Returns
    -------
    (N, n_aug) array of virtual-observer estimates.
    """
    times = np.asarray(times, dtype=float)
    x_a = np.asarray(x_a, dtype=float)
    x_a_dot = np.asarray(x_a_dot, dtype=float)
    u = np.asarray(u, dtype=float)
    n = times.size
    if x_a.shape != (n, aug.n_aug) or x_a_dot.shape != x_a.shape:
        raise DimensionMismatchError(
            f"state traces must be ({n}, {aug.n_aug}), got "
            f"{x_a.shape} and {x_a_dot.shape}")
    if u.shape != (n, net.nbar_u):
        raise DimensionMismatchError(
            f"input trace must be ({n}, {net.nbar_u}), got {u.shape}")

    Lgain = synth.Lgain
    F1A = aug.F1 @ aug.A_a
    F1B = aug.F1 @ net.B
    E2, F2 = aug.E2, aug.F2

    xa_spline = CubicHermiteSpline(times, x_a, x_a_dot, axis=0)
    dxa_spline = xa_spline.derivative()
    u_spline = CubicSpline(times, u, axis=0)

    if x_o0 is None:
        x_o0 = F2 @ (E2 @ x_a[0])

    def rhs(t, x_o):
        y_f = E2 @ xa_spline(t)
        dy_f = E2 @ dxa_spline(t)
        return (F1A @ x_o + F1B @ u_spline(t) + F2 @ dy_f
                + Lgain @ (y_f - E2 @ x_o))

    out = np.empty_like(x_a)
    out[0] = x_o0
    h = times[1] - times[0]
    x_o = np.asarray(x_o0, dtype=float).copy()
    for k in range(n - 1):
        t = times[k]
        k1 = rhs(t, x_o)
        k2 = rhs(t + 0.5 * h, x_o + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x_o + 0.5 * h * k2)
        k4 = rhs(t + h, x_o + h * k3)
        x_o = x_o + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = x_o
    return out
