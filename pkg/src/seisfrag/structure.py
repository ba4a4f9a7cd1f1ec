"""Lumped-mass shear building with bilinear hysteretic storeys.

The frame is a chain of storey springs between floor masses; springs are
elastic-plastic with kinematic hardening, damping is Rayleigh on the
initial stiffness (held constant through yielding).  A linear SDOF
integrator provides spectral intensity measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._kernels import bilinear_force, newmark_bilinear, newmark_sdof
from .errors import ConfigurationError, IntegrationError
from .motion import Accelerogram

NEWTON_TOL = 1e-8
NEWTON_MAXIT = 50
SUBSTEP_PERIOD_FRACTION = 20.0  # dt_int = min(dt, T_smallest / 20)


@dataclass(frozen=True)
class ShearFrameModel:
    masses: np.ndarray        # kg per storey, bottom to top
    stiffnesses: np.ndarray   # N/m per storey spring
    heights: np.ndarray       # m per storey
    yield_drift: float        # drift ratio at first yield
    hardening: float          # post-yield / elastic stiffness ratio
    damping: float            # modal damping ratio on modes 1-2

    def __post_init__(self):
        for name in ("masses", "stiffnesses", "heights"):
            object.__setattr__(self, name,
                               np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        n = self.masses.size
        if self.stiffnesses.size != n:
            raise ConfigurationError("masses and stiffnesses must have equal length")
        if self.heights.size == 1:
            object.__setattr__(self, "heights", np.full(n, self.heights[0]))
        if self.heights.size != n:
            raise ConfigurationError("heights must be scalar or per storey")
        if np.any(self.masses <= 0) or np.any(self.stiffnesses <= 0) \
                or np.any(self.heights <= 0):
            raise ConfigurationError("masses, stiffnesses, heights must be positive")
        if not 0.0 < self.hardening < 1.0:
            raise ConfigurationError("hardening ratio must lie in (0, 1)")
        if not 0.0 < self.yield_drift < 0.05:
            raise ConfigurationError("yield drift ratio must lie in (0, 0.05)")
        if not 0.0 < self.damping < 0.2:
            raise ConfigurationError("damping ratio must lie in (0, 0.2)")

    @property
    def n_storeys(self) -> int:
        return self.masses.size

    def stiffness_matrix(self) -> np.ndarray:
        n = self.n_storeys
        k = np.zeros((n, n))
        for j in range(n):
            k[j, j] += self.stiffnesses[j]
            if j + 1 < n:
                k[j, j] += self.stiffnesses[j + 1]
                k[j, j + 1] -= self.stiffnesses[j + 1]
                k[j + 1, j] -= self.stiffnesses[j + 1]
        return k

    def mass_matrix(self) -> np.ndarray:
        return np.diag(self.masses)

    def rayleigh(self) -> tuple[float, float]:
        periods, _ = modal_analysis(self)
        w1 = 2.0 * math.pi / periods[0]
        w2 = 2.0 * math.pi / periods[1] if len(periods) > 1 else w1
        return rayleigh_coeffs(w1, w2, self.damping)


def uniform_shear_frame(storeys: int = 3, mass: float = 30000.0,
                        height: float = 3.0, period: float = 0.61,
                        damping: float = 0.02, yield_drift: float = 0.007,
                        hardening: float = 0.01) -> ShearFrameModel:
    """Uniform frame with storey stiffness calibrated to the target T1.

    For equal masses and stiffnesses the fundamental frequency is
    2*sqrt(k/m)*sin(pi/(2(2n+1))), which inverts in closed form.
    """
    w1 = 2.0 * math.pi / period
    k = mass * (w1 / (2.0 * math.sin(math.pi / (2.0 * (2 * storeys + 1))))) ** 2
    return ShearFrameModel(
        masses=np.full(storeys, float(mass)),
        stiffnesses=np.full(storeys, k),
        heights=np.full(storeys, float(height)),
        yield_drift=yield_drift, hardening=hardening, damping=damping)


@dataclass(frozen=True)
class HystereticState:
    """Committed state of one bilinear storey spring."""

    plastic_disp: float = 0.0
    yielded: bool = False


@dataclass(frozen=True)
class ResponseHistory:
    """Relative displacements (m) and absolute accelerations (g)."""

    dt: float
    displacements: np.ndarray   # (n_steps, n_storeys)
    accelerations: np.ndarray   # (n_steps, n_storeys), absolute, g
    velocities: np.ndarray      # (n_steps, n_storeys), m/s


def modal_analysis(model: ShearFrameModel) -> tuple[np.ndarray, np.ndarray]:
    """Periods (s, descending) and mode-shape columns of (K, M)."""
    K = model.stiffness_matrix()
    M = model.mass_matrix()
    try:
        w2, vecs = scipy.linalg.eigh(K, M)
    except scipy.linalg.LinAlgError as exc:
        raise ConfigurationError(f"modal analysis failed: {exc}")
    if np.any(w2 <= 0):
        raise ConfigurationError("stiffness matrix is not positive definite")
    periods = 2.0 * math.pi / np.sqrt(w2)          # eigh sorts w2 ascending
    shapes = np.empty_like(vecs)
    for i in range(vecs.shape[1]):
        phi = vecs[:, i]
        peak = phi[np.argmax(np.abs(phi))]
        shapes[:, i] = phi / peak                   # sign-fixed, max component 1
    return periods, shapes


def rayleigh_coeffs(omega1: float, omega2: float, zeta: float) -> tuple[float, float]:
    """Mass/stiffness factors giving damping zeta at both frequencies."""
    if omega1 <= 0 or omega2 < omega1:
        raise ConfigurationError("need 0 < omega1 <= omega2")
    a0 = 2.0 * zeta * omega1 * omega2 / (omega1 + omega2)
    a1 = 2.0 * zeta / (omega1 + omega2)
    return a0, a1


def bilinear_restoring(state: HystereticState, drift: float, k: float,
                       u_y: float, b: float) -> tuple[float, HystereticState]:
    """Force of the kinematic-hardening bilinear spring at a total drift.

    Elastic slope k, post-yield slope b*k, elastic unloading; the path
    enters through the committed plastic displacement.
    """
    h_kin = b * k / (1.0 - b)
    f, _, up = bilinear_force(drift, state.plastic_disp, k, h_kin, k * u_y, b)
    return f, HystereticState(plastic_disp=up, yielded=up != state.plastic_disp or state.yielded)


def integrate(model: ShearFrameModel, acc: Accelerogram) -> ResponseHistory:
    """Nonlinear transient analysis under base acceleration.

    Average-acceleration Newmark with Newton iteration per sub-step to a
    relative force residual of 1e-8; sub-step size min(dt, T_smallest/20).
    """
    periods, _ = modal_analysis(model)
    a0, a1 = model.rayleigh()
    dt_target = periods[-1] / SUBSTEP_PERIOD_FRACTION
    nsub = max(1, int(math.ceil(acc.dt / dt_target)))
    u_y = model.yield_drift * model.heights
    disp, vel, acc_abs, status = newmark_bilinear(
        model.masses, model.stiffnesses, u_y, model.hardening,
        a0, a1, acc.samples, acc.dt, nsub, NEWTON_TOL, NEWTON_MAXIT)
    if status < 0:
        raise IntegrationError(f"Newton failed to converge at step {-status}")
    return ResponseHistory(dt=acc.dt, displacements=disp,
                           accelerations=acc_abs, velocities=vel)


def linear_sdof_response(period: float, zeta: float,
                         acc: Accelerogram) -> ResponseHistory:
    """Linear unit-mass oscillator response to a base motion."""
    if period <= 0:
        raise ConfigurationError("period must be positive")
    if not 0.0 < zeta < 1.0:
        raise ConfigurationError("zeta must lie in (0, 1)")
    omega = 2.0 * math.pi / period
    nsub = max(1, int(math.ceil(acc.dt / (period / SUBSTEP_PERIOD_FRACTION))))
    disp, acc_abs = newmark_sdof(acc.samples, acc.dt, nsub, omega, zeta)
    vel = np.gradient(disp, acc.dt)
    return ResponseHistory(dt=acc.dt, displacements=disp[:, None],
                           accelerations=acc_abs[:, None],
                           velocities=vel[:, None])


def max_interstorey_drift(resp: ResponseHistory, heights) -> float:
    """Max over time and storeys of |u_i - u_(i-1)| / H_i (ground fixed)."""
    u = resp.displacements
    heights = np.atleast_1d(np.asarray(heights, dtype=float))
    if heights.size == 1:
        heights = np.full(u.shape[1], heights[0])
    drifts = np.diff(u, axis=1, prepend=0.0)
    return float(np.max(np.abs(drifts) / heights))
