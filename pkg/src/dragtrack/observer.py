"""High-gain observer for the drag-tracking error and its rate.

The drag error x1 = D - D* is measurable; its rate is not. The observer
reconstructs both with correction gains scaled by 1/eps and 1/eps^2, so the
estimate error shrinks with eps at the price of a stiffer transient. The
integration step must satisfy dt <= eps/10 (enforced at config validation).
"""

from dataclasses import dataclass

from numba import njit


@dataclass(frozen=True)
class ObserverGains:
    h1: float = 2.0
    h2: float = 1.0
    eps: float = 1.78  # s

    def __post_init__(self):
        # the 2x2 correction matrix [[-h1, 1], [-h2, 0]] is Hurwitz iff h1, h2 > 0
        if not (self.h1 > 0.0 and self.h2 > 0.0):
            raise ValueError("observer gains h1, h2 must be positive")
        if not self.eps > 0.0:
            raise ValueError("observer eps must be positive")


@dataclass
class ObserverState:
    xhat1: float = 0.0  # estimated drag error, m/s^2
    xhat2: float = 0.0  # estimated drag-error rate, m/s^3


@njit(cache=True)
def observer_rates(xh1, xh2, x1, f, g0, g_u, d_star_ddot, h1, h2, eps):
    innov = x1 - xh1
    dxh1 = xh2 + (h1 / eps) * innov
    dxh2 = f - d_star_ddot + g0 * g_u + (h2 / (eps * eps)) * innov
    return dxh1, dxh2


def observer_derivative(obs: ObserverState, x1_measured: float, f: float, g0: float,
                        g_u: float, d_star_ddot: float, gains: ObserverGains):
    """(d xhat1/dt, d xhat2/dt) given the measured drag error and model terms."""
    return observer_rates(obs.xhat1, obs.xhat2, x1_measured, f, g0, g_u,
                          d_star_ddot, gains.h1, gains.h2, gains.eps)
