"""Closed-form Wigner functions of Laguerre-Gaussian modes.

Coordinates are the dimensionless quadratures ``(X, P_X, Y, P_Y)``; the
physical position is ``x = w X / sqrt(2)`` and the physical transverse
momentum ``p = sqrt(2) lambda_bar P / w``.  Every function accepts scalars
or broadcastable numpy arrays.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .lg_fields import MAX_ORDER_M, MAX_ORDER_N, laguerre

PI2 = math.pi ** 2


class QuadraturePoint(NamedTuple):
    X: float
    P_X: float
    Y: float
    P_Y: float


class QInvariants(NamedTuple):
    """``Q0`` is a quarter of the squared phase-space radius, ``Q2`` half the
    orbital angular momentum ``X P_Y - Y P_X``."""

    Q0: float
    Q2: float


def q_invariants(p) -> QInvariants:
    X, P_X, Y, P_Y = p
    q0 = (np.square(X) + np.square(P_X) + np.square(Y) + np.square(P_Y)) / 4.0
    q2 = (np.multiply(X, P_Y) - np.multiply(Y, P_X)) / 2.0
    return QInvariants(q0, q2)


def _check_orders(n, m):
    if int(n) != n or abs(n) > MAX_ORDER_N:
        raise DomainError(f"|n| must be an integer <= {MAX_ORDER_N}, got {n}")
    if int(m) != m or not 0 <= m <= MAX_ORDER_M:
        raise DomainError(f"m must be an integer in [0, {MAX_ORDER_M}], got {m}")


def wdf_analytic(n: int, m: int, p):
    """Wigner function ``W_nm`` at quadrature point(s) ``p``.

    Negative ``n`` reverses the orbital sense: it is evaluated as ``|n|``
    with the sign of ``Q2`` flipped.
    """
    _check_orders(n, m)
    q0, q2 = q_invariants(p)
    if n < 0:
        q2 = -q2
    na = abs(int(n))
    sign = -1.0 if (na + int(m)) % 2 else 1.0
    val = sign / PI2 * laguerre(na, 0, 4 * (q0 + q2)) * np.exp(-4 * q0)
    if m:
        val = val * laguerre(int(m), 0, 4 * (q0 - q2))
    return val


def wdf_n1_closed(p):
    """Expanded form of ``W_10``, kept as an independent cross-check."""
    X, P_X, Y, P_Y = (np.asarray(c, dtype=float) for c in p)
    bracket = (P_X - Y) ** 2 + (P_Y + X) ** 2 - 1.0
    val = np.exp(-X ** 2 - P_X ** 2 - Y ** 2 - P_Y ** 2) * bracket / PI2
    return val if val.ndim else float(val)


def pi_value(n: int, m: int, p):
    """``pi**2 * W``: the displaced-parity expectation entering the Bell sum."""
    return PI2 * wdf_analytic(n, m, p)


def scale_to_quadrature(x_phys, p_phys, w: float, lambda_bar: float):
    """Map a physical position and transverse momentum to ``(X, P)``."""
    if not w > 0:
        raise DomainError(f"waist must be positive, got {w}")
    if not lambda_bar > 0:
        raise DomainError(f"lambda_bar must be positive, got {lambda_bar}")
    return (math.sqrt(2.0) * np.asarray(x_phys) / w,
            w * np.asarray(p_phys) / (math.sqrt(2.0) * lambda_bar))


def rotate_phase_space(p, angle: float) -> QuadraturePoint:
    """Rotate ``(X, Y)`` and ``(P_X, P_Y)`` by the same spatial angle."""
    X, P_X, Y, P_Y = p
    c, s = math.cos(angle), math.sin(angle)
    return QuadraturePoint(c * X - s * Y, c * P_X - s * P_Y, s * X + c * Y, s * P_X + c * P_Y)
