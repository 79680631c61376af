"""Elementary-link parameters."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, replace

DEFAULT_LOSS_DB_PER_KM = 0.18
LAMBDA_MAX = 1.0 / math.sqrt(2.0)


def one_minus_cos(theta: float) -> float:
    """1 - cos(theta) without cancellation at small angles."""
    return 2.0 * math.sin(0.5 * theta) ** 2


def transmission(distance_km: float, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM) -> float:
    """Fibre power transmission after ``distance_km``."""
    if distance_km < 0 or loss_db_per_km < 0:
        raise ValueError("distance and loss must be non-negative")
    return 10.0 ** (-loss_db_per_km * distance_km / 10.0)


def distance_for_transmission(eta: float, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM) -> float:
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {eta}")
    if eta == 1.0:
        return 0.0
    if loss_db_per_km <= 0:
        raise ValueError("a lossy link needs a positive loss per km")
    return -10.0 * math.log10(eta) / loss_db_per_km


@dataclass(frozen=True)
class LinkParams:
    """One elementary repeater link.

    ``alpha`` is the (real, non-negative) qubus amplitude, ``theta`` the
    controlled-rotation angle and ``lambda_bs`` the splitting parameter of
    the three-port receiver. The transmission is derived from the distance
    unless ``eta`` is given explicitly.
    """

    alpha: float
    theta: float
    distance_km: float = 0.0
    loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM
    lambda_bs: float = 0.7
    eta_override: float | None = None

    def __post_init__(self):
        for name in ("alpha", "theta", "distance_km", "loss_db_per_km", "lambda_bs"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be real and non-negative, got {self.alpha}")
        if self.distance_km < 0 or self.loss_db_per_km < 0:
            raise ValueError("distance and loss must be non-negative")
        if not 0.0 <= self.lambda_bs <= LAMBDA_MAX + 1e-12:
            raise ValueError(f"lambda_bs must lie in [0, 1/sqrt(2)], got {self.lambda_bs}")
        if self.eta_override is not None and not 0.0 < self.eta_override <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta_override}")

    @classmethod
    def from_eta(cls, alpha: float, theta: float, eta: float, lambda_bs: float = 0.7,
                 loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM) -> "LinkParams":
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {eta}")
        dist = distance_for_transmission(eta, loss_db_per_km) if loss_db_per_km > 0 else 0.0
        return cls(alpha, theta, dist, loss_db_per_km, lambda_bs, eta_override=eta)

    @property
    def eta(self) -> float:
        if self.eta_override is not None:
            return self.eta_override
        return transmission(self.distance_km, self.loss_db_per_km)

    @property
    def xi(self) -> float:
        return self.alpha**2 * math.sin(self.theta)

    @property
    def transmitted_alpha(self) -> float:
        return math.sqrt(self.eta) * self.alpha

    @property
    def third_port_weight(self) -> float:
        """Power fraction 1 - 2 lambda^2 sent to the third receiver port.

        Rounding residue at lambda = 1/sqrt(2) is snapped to an exact zero.
        """
        w = 1.0 - 2.0 * self.lambda_bs**2
        return 0.0 if w < 8 * sys.float_info.epsilon else w

    @property
    def third_port(self) -> float:
        """Amplitude fraction sqrt(1 - 2 lambda^2) sent to the third receiver port."""
        return math.sqrt(self.third_port_weight)

    def with_(self, **changes) -> "LinkParams":
        return replace(self, **changes)
