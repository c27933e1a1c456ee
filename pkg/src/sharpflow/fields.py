"""Velocity fields: the common evaluation interface plus analytic test fields.

A field maps (points, time) to velocities.  The forward convention drives
x from noise at t=0 to data at t=1; the reverse convention uses s = 1 - t,
with the exact bridge u(x, t) = -v(x, 1 - t).  Every field here is defined
primally in forward time and derives the reverse convention through that
bridge, so the identity holds to the last bit whenever 1 - (1 - t)
round-trips exactly (in particular on dyadic time grids).

Analytic fields additionally expose closed-form flows, Jacobians, time
derivatives and trajectory accelerations.  They exist as oracles for the
local-truncation-error and schedule experiments; learned fields raise
UnsupportedOracleError for those hooks.
"""

import numpy as np
from scipy.linalg import expm
from scipy.special import erf

from .errors import ConfigurationError, UnsupportedOracleError


class VelocityField:
    """Base class: deterministic velocity evaluation in both time conventions."""

    kind = "analytic"

    def forward(self, x, t):
        """u(x, t): velocity in forward time, x shaped (..., d)."""
        raise NotImplementedError

    def reverse(self, x, s):
        """v(x, s) = -u(x, 1 - s): velocity in reverse time."""
        return -self.forward(x, 1.0 - s)

    def evaluate(self, x, time, convention="forward"):
        if convention == "forward":
            return self.forward(x, time)
        if convention == "reverse":
            return self.reverse(x, time)
        raise ConfigurationError(f"unknown time convention {convention!r}")

    # Oracle hooks; analytic subclasses override what they can provide.

    def flow(self, x, t0, t1):
        """Exact solution of the forward ODE from (x, t0) to t1."""
        raise UnsupportedOracleError(f"{type(self).__name__} has no closed-form flow")

    def time_derivative(self, x, t):
        """del_t u(x, t)."""
        raise UnsupportedOracleError(f"{type(self).__name__} has no closed-form del_t u")

    def jacobian(self, x, t):
        """grad_x u(x, t), shaped (..., d, d)."""
        raise UnsupportedOracleError(f"{type(self).__name__} has no closed-form Jacobian")

    def acceleration(self, x, t):
        """Trajectory acceleration d/dt u(x(t), t) = del_t u + (grad_x u) u at (x, t)."""
        u = self.forward(x, t)
        jac = self.jacobian(x, t)
        return self.time_derivative(x, t) + np.einsum("...ij,...j->...i", jac, u)

    def acceleration_norm(self, x, t):
        return np.linalg.norm(self.acceleration(x, t), axis=-1)


class ConstantField(VelocityField):
    """u(x, t) = c.  Trajectories are straight lines; acceleration vanishes."""

    def __init__(self, c=(1.0, 0.0)):
        self.c = np.asarray(c, dtype=float)

    def forward(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.c, x.shape).copy()

    def flow(self, x, t0, t1):
        return np.asarray(x, dtype=float) + (t1 - t0) * self.c

    def time_derivative(self, x, t):
        return np.zeros_like(np.asarray(x, dtype=float))

    def jacobian(self, x, t):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        return np.zeros(x.shape + (d,))


class LinearField(VelocityField):
    """u(x, t) = A x.  Flow is the matrix exponential; acceleration is A^2 x(t)."""

    def __init__(self, a=None):
        self.a = np.eye(2) if a is None else np.asarray(a, dtype=float)

    def forward(self, x, t):
        return np.asarray(x, dtype=float) @ self.a.T

    def flow(self, x, t0, t1):
        return np.asarray(x, dtype=float) @ expm(self.a * (t1 - t0)).T

    def time_derivative(self, x, t):
        return np.zeros_like(np.asarray(x, dtype=float))

    def jacobian(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.a, x.shape + (x.shape[-1],)).copy()


class TimeQuadraticField(VelocityField):
    """u(x, t) = c0 + c1 t + c2 t^2, state independent with polynomial flow."""

    def __init__(self, c0=(0.3, -0.2), c1=(1.0, 0.5), c2=(-0.8, 1.2)):
        self.c0 = np.asarray(c0, dtype=float)
        self.c1 = np.asarray(c1, dtype=float)
        self.c2 = np.asarray(c2, dtype=float)

    def forward(self, x, t):
        x = np.asarray(x, dtype=float)
        u = self.c0 + self.c1 * t + self.c2 * t * t
        return np.broadcast_to(u, x.shape).copy()

    def flow(self, x, t0, t1):
        disp = (
            self.c0 * (t1 - t0)
            + self.c1 * (t1**2 - t0**2) / 2.0
            + self.c2 * (t1**3 - t0**3) / 3.0
        )
        return np.asarray(x, dtype=float) + disp

    def time_derivative(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.c1 + 2.0 * self.c2 * t, x.shape).copy()

    def jacobian(self, x, t):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        return np.zeros(x.shape + (d,))


def _std_normal_cdf(z):
    return 0.5 * (1.0 + erf(z / np.sqrt(2.0)))


def _std_normal_pdf(z):
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


class AccelerationBumpField(VelocityField):
    """State-independent field whose acceleration is a Gaussian bump at t_star.

    The speed ramps through a scaled normal CDF, g(t) = amplitude *
    Phi((t - t_star) / width), so the trajectory acceleration |g'(t)| peaks
    exactly at t = t_star with height amplitude / (width * sqrt(2 pi)).
    The antiderivative of Phi is z Phi(z) + phi(z), giving a closed-form flow.
    """

    def __init__(self, t_star=0.8, width=0.05, amplitude=1.0, direction=(1.0, 0.0)):
        if width <= 0:
            raise ConfigurationError("bump width must be positive")
        self.t_star = float(t_star)
        self.width = float(width)
        self.amplitude = float(amplitude)
        e = np.asarray(direction, dtype=float)
        self.direction = e / np.linalg.norm(e)

    def _speed(self, t):
        return self.amplitude * _std_normal_cdf((t - self.t_star) / self.width)

    def _speed_integral(self, t0, t1):
        def anti(t):
            z = (t - self.t_star) / self.width
            return self.width * (z * _std_normal_cdf(z) + _std_normal_pdf(z))

        return self.amplitude * (anti(t1) - anti(t0))

    def forward(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(
            np.asarray(self._speed(t)) * self.direction, x.shape
        ).copy()

    def flow(self, x, t0, t1):
        return np.asarray(x, dtype=float) + self._speed_integral(t0, t1) * self.direction

    def time_derivative(self, x, t):
        x = np.asarray(x, dtype=float)
        z = (t - self.t_star) / self.width
        gdot = self.amplitude * _std_normal_pdf(z) / self.width
        return np.broadcast_to(np.asarray(gdot) * self.direction, x.shape).copy()

    def jacobian(self, x, t):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        return np.zeros(x.shape + (d,))


_ANALYTIC_FIELDS = {
    "constant": ConstantField,
    "linear": LinearField,
    "time-quadratic": TimeQuadraticField,
    "acceleration-bump": AccelerationBumpField,
}


def analytic_field(name, **params):
    """Construct one of the closed-form test fields by name.

    Known names: constant(c), linear(a), time-quadratic(c0, c1, c2),
    acceleration-bump(t_star, width, amplitude, direction).
    """
    try:
        cls = _ANALYTIC_FIELDS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown analytic field {name!r}; choose from {sorted(_ANALYTIC_FIELDS)}"
        ) from None
    return cls(**params)
