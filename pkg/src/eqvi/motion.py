"""Linear, quadratic and rectified quadratic flow prediction.

Every function here works elementwise on ``(H, W, 2)`` flows. The quadratic
model describes the displacement from the anchor frame at time ``t`` as
``f(t) = v0 * t + a * t**2 / 2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .core import as_flow, check_same_shape


@dataclass(frozen=True)
class RQFPParams:
    """Shape of the least-squares weighting curve.

    ``omega`` sets the steepness and ``gamma`` the acceleration mismatch
    (pixels/frame^2) at which the weight crosses 0.5.
    """

    omega: float = 5.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")


@dataclass(frozen=True)
class QuadraticMotionField:
    v0: np.ndarray
    a: np.ndarray


class AccelTriplet(NamedTuple):
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray


def _flows(*flows):
    arrs = [as_flow(f) for f in flows]
    check_same_shape(*arrs, what="flows")
    return arrs


def linear_predict(f01, t: float) -> np.ndarray:
    return t * as_flow(f01)


def qvi_predict(f01, f0m1) -> QuadraticMotionField:
    """Velocity and acceleration from the flows to the two neighbouring frames."""
    f01, f0m1 = _flows(f01, f0m1)
    return QuadraticMotionField(v0=0.5 * (f01 - f0m1), a=f01 + f0m1)


def ls_predict(f0m1, f01, f02) -> QuadraticMotionField:
    """Least-squares ``(v0, a)`` from the flows to frames -1, 1 and 2.

    Closed form of ``(A^T A)^-1 A^T b`` for the design matrix with rows
    ``(-1, 1/2)``, ``(1, 1/2)`` and ``(2, 2)``.
    """
    f0m1, f01, f02 = _flows(f0m1, f01, f02)
    v0 = (-6.5 * f0m1 + 2.5 * f01 + f02) / 11.0
    a = (7.0 * f0m1 - f01 + 4.0 * f02) / 11.0
    return QuadraticMotionField(v0=v0, a=a)


def accel_triplet(f0m1, f01, f02) -> AccelTriplet:
    """Accelerations implied by each pair of the three flow equations."""
    f0m1, f01, f02 = _flows(f0m1, f01, f02)
    return AccelTriplet(
        a1=f01 + f0m1,
        a2=(2.0 / 3.0) * f0m1 + (1.0 / 3.0) * f02,
        a3=f02 - 2.0 * f01,
    )


def direction_gate(triplet: AccelTriplet) -> np.ndarray:
    """Per-pixel mask, true where all three accelerations point the same way.

    Pairwise dot products must be strictly positive, so a zero acceleration
    anywhere closes the gate.
    """
    a1, a2, a3 = triplet
    d12 = np.sum(a1 * a2, axis=-1)
    d13 = np.sum(a1 * a3, axis=-1)
    d23 = np.sum(a2 * a3, axis=-1)
    return (d12 > 0) & (d13 > 0) & (d23 > 0)


def alpha_weight(z, params: RQFPParams = RQFPParams()):
    """Weight of the least-squares estimate, ``(1 - tanh(omega * (z - gamma))) / 2``.

    Evaluated as the logistic function of ``-2 * omega * (z - gamma)``, which is
    the same curve but keeps the result strictly inside (0, 1) for large ``z``.
    """
    z = np.asarray(z, dtype=np.float64)
    return expit(-2.0 * params.omega * (z - params.gamma))


def rectified_predict(f0m1, f01, f02, params: RQFPParams = RQFPParams()) -> QuadraticMotionField:
    """Blend the least-squares and two-flow estimates where motion looks quadratic.

    Pixels failing :func:`direction_gate` keep the two-flow estimate
    bit-for-bit. Elsewhere each flow component is mixed with its own weight
    ``alpha(|a1 - a2|)``.
    """
    f0m1, f01, f02 = _flows(f0m1, f01, f02)
    qvi = qvi_predict(f01, f0m1)
    ls = ls_predict(f0m1, f01, f02)
    triplet = accel_triplet(f0m1, f01, f02)
    gate = direction_gate(triplet)[..., None]
    alpha = alpha_weight(np.abs(triplet.a1 - triplet.a2), params)
    v0 = np.where(gate, alpha * ls.v0 + (1.0 - alpha) * qvi.v0, qvi.v0)
    a = np.where(gate, alpha * ls.a + (1.0 - alpha) * qvi.a, qvi.a)
    return QuadraticMotionField(v0=v0, a=a)


def eval_flow_at(m: QuadraticMotionField, t: float) -> np.ndarray:
    return 0.5 * m.a * (t * t) + m.v0 * t
