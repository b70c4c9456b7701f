"""Step-size rules for single-call extragradient iterations.

All quasi-strongly monotone regimes use equal extrapolation and update steps
(gamma_k = omega_k); only the weak-Minty rule separates them.  The base
constant step is omega_bar = min{mu/(18 delta), 1/(4 L)}, with the delta term
dropped when delta = 0.  Three refinements are provided: a target-accuracy
constant step, a switch to ~1/k decay after k* = ceil(4/(mu omega_bar))
iterations, and a horizon-aware rule that decays only in the second half of a
known budget of K iterations.  A decreasing gamma0/(k+b) baseline is included
for comparison runs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .core import VibenchError

__all__ = [
    "ScheduleError",
    "constant_step",
    "switching_threshold",
    "switching_step",
    "horizon_step",
    "hsieh_step",
    "weak_mvi_steps",
    "weak_mvi_batchsize",
    "StepSizePlan",
]


class ScheduleError(VibenchError):
    pass


def _omega_bar(L: float, mu: float, delta: float) -> float:
    if L <= 0:
        raise ScheduleError(f"L must be positive, got {L}")
    if mu <= 0:
        raise ScheduleError(f"mu must be positive, got {mu}")
    if delta < 0:
        raise ScheduleError(f"delta must be nonnegative, got {delta}")
    out = 1.0 / (4.0 * L)
    if delta > 0:
        out = min(out, mu / (18.0 * delta))
    return out


def constant_step(
    L: float,
    mu: float,
    delta: float,
    target_eps: float | None = None,
    sigma_star_sq: float | None = None,
) -> float:
    """Constant step omega = min{mu/(18 delta), 1/(4 L)}.

    With a target accuracy ``target_eps`` the step is additionally capped at
    target_eps * mu / (48 sigma_star_sq), which shrinks the long-run noise
    neighborhood below the target; ``sigma_star_sq`` is then required (a zero
    value drops the cap).
    """
    omega = _omega_bar(L, mu, delta)
    if target_eps is not None:
        if target_eps <= 0:
            raise ScheduleError("target_eps must be positive")
        if sigma_star_sq is None:
            raise ScheduleError("target_eps requires sigma_star_sq")
        if sigma_star_sq > 0:
            omega = min(omega, target_eps * mu / (48.0 * sigma_star_sq))
    return omega


def switching_threshold(L: float, mu: float, delta: float) -> tuple[float, int]:
    """(omega_bar, k*) for the switching rule, k* = ceil(4/(mu omega_bar))."""
    omega_bar = _omega_bar(L, mu, delta)
    return omega_bar, math.ceil(4.0 / (mu * omega_bar))


def switching_step(k: int, L: float, mu: float, delta: float) -> float:
    """Constant omega_bar for k <= k*, then the decreasing 2(2k+1)/(mu (k+1)^2)."""
    if k < 0:
        raise ScheduleError("iteration index must be nonnegative")
    omega_bar, k_star = switching_threshold(L, mu, delta)
    if k <= k_star:
        return omega_bar
    return 2.0 * (2.0 * k + 1.0) / (mu * (k + 1.0) ** 2)


def horizon_step(k: int, K: int, L: float, mu: float, delta: float) -> float:
    """Horizon-aware step: constant when the budget K is short (K <= 2/(mu
    omega_bar)); otherwise constant up to k0 = ceil(K/2) and then
    2 / (2/omega_bar + (mu/2)(k - k0))."""
    if K <= 0:
        raise ScheduleError("horizon K must be positive")
    if not 0 <= k < K:
        raise ScheduleError(f"iteration {k} outside horizon {K}")
    omega_bar = _omega_bar(L, mu, delta)
    if K <= 2.0 / (mu * omega_bar):
        return omega_bar
    k0 = math.ceil(K / 2)
    if k <= k0:
        return omega_bar
    return 2.0 / (2.0 / omega_bar + 0.5 * mu * (k - k0))


def hsieh_step(k: int, gamma0: float, b: float) -> float:
    """Decreasing comparison baseline omega_k = gamma0 / (k + b)."""
    if gamma0 <= 0 or b <= 0:
        raise ScheduleError("gamma0 and b must be positive")
    if k < 0:
        raise ScheduleError("iteration index must be nonnegative")
    return gamma0 / (k + b)


def weak_mvi_steps(L: float, rho: float, safety: float = 0.5) -> tuple[float, float]:
    """Admissible (gamma, omega) for the weak-Minty regime.

    gamma is the midpoint of the open interval (max{2 rho, 1/(2L)}, 1/L) and
    omega = safety * min{gamma - 2 rho, 1/(4L) - gamma/4}; both constraints are
    then strictly satisfied.  Requires rho < 1/(2L).
    """
    if L <= 0:
        raise ScheduleError("L must be positive")
    if rho < 0:
        raise ScheduleError("rho must be nonnegative")
    if not 0 < safety < 1:
        raise ScheduleError("safety must lie in (0, 1)")
    if rho >= 1.0 / (2.0 * L):
        raise ScheduleError(
            f"weak-MVI regime out of range: rho={rho} >= 1/(2L)={1.0 / (2.0 * L)}"
        )
    lo = max(2.0 * rho, 1.0 / (2.0 * L))
    hi = 1.0 / L
    gamma = 0.5 * (lo + hi)
    omega = safety * min(gamma - 2.0 * rho, 1.0 / (4.0 * L) - gamma / 4.0)
    return gamma, omega


def validate_weak_mvi_steps(L: float, rho: float, gamma: float, omega: float) -> None:
    """Raise unless (gamma, omega) strictly satisfy the weak-Minty constraints."""
    lo = max(2.0 * rho, 1.0 / (2.0 * L))
    if not lo < gamma < 1.0 / L:
        raise ScheduleError(f"gamma={gamma} outside ({lo}, {1.0 / L})")
    cap = min(gamma - 2.0 * rho, 1.0 / (4.0 * L) - gamma / 4.0)
    if not 0.0 < omega < cap:
        raise ScheduleError(f"omega={omega} outside (0, {cap})")


def weak_mvi_batchsize(
    K: int,
    delta: float,
    sigma_star_sq: float,
    L: float,
    gamma: float,
    omega: float,
    r0_sq: float,
) -> int:
    """Batch size prescription for the weak-Minty regime over a K-iteration run:
    ceil of max{1, 32 delta/((1-L gamma) L^3 omega),
    48 omega gamma delta (K-1)/(1-L gamma)^2,
    2 omega gamma sigma_star_sq (K-1)/((1-L gamma) r0_sq)}.
    """
    if K < 2:
        raise ScheduleError("K must be at least 2")
    if r0_sq <= 0:
        raise ScheduleError("r0_sq must be positive")
    if L * gamma >= 1.0:
        raise ScheduleError(f"L*gamma={L * gamma} must be below 1")
    one_m = 1.0 - L * gamma
    terms = (
        1.0,
        32.0 * delta / (one_m * L**3 * omega),
        48.0 * omega * gamma * delta * (K - 1) / one_m**2,
        2.0 * omega * gamma * sigma_star_sq * (K - 1) / (one_m * r0_sq),
    )
    return int(math.ceil(max(terms)))


@dataclass(frozen=True)
class StepSizePlan:
    """A (gamma_k, omega_k) schedule consumed by the solvers.

    Built through the classmethod factories; ``step(k)`` returns the pair for
    iteration k.  Quasi-strong kinds always emit gamma_k = omega_k; only the
    ``weak_mvi`` kind separates the two.  ``omega_bar``/``k_star``/``k0`` echo
    the derived quantities where the kind defines them.
    """

    kind: str
    L: float | None = None
    mu: float | None = None
    delta: float | None = None
    omega: float | None = None
    gamma: float | None = None
    omega_bar: float | None = None
    k_star: int | None = None
    k0: int | None = None
    K: int | None = None
    gamma0: float | None = None
    b: float | None = None
    switch_at: int | None = None

    @classmethod
    def constant(cls, L, mu, delta, target_eps=None, sigma_star_sq=None) -> "StepSizePlan":
        omega = constant_step(L, mu, delta, target_eps, sigma_star_sq)
        kind = "constant" if target_eps is None else "constant_targeted"
        return cls(kind=kind, L=L, mu=mu, delta=delta, omega=omega, omega_bar=omega)

    @classmethod
    def fixed(cls, omega: float, gamma: float | None = None) -> "StepSizePlan":
        """Explicit constant steps, bypassing the derivations."""
        if omega <= 0 or (gamma is not None and gamma <= 0):
            raise ScheduleError("steps must be strictly positive")
        g = omega if gamma is None else gamma
        kind = "constant" if g == omega else "weak_mvi"
        return cls(kind=kind, omega=omega, gamma=g, omega_bar=omega)

    @classmethod
    def switching(cls, L, mu, delta) -> "StepSizePlan":
        omega_bar, k_star = switching_threshold(L, mu, delta)
        return cls(kind="switching", L=L, mu=mu, delta=delta, omega_bar=omega_bar, k_star=k_star)

    @classmethod
    def horizon_aware(cls, K, L, mu, delta) -> "StepSizePlan":
        if K <= 0:
            raise ScheduleError("horizon K must be positive")
        omega_bar = _omega_bar(L, mu, delta)
        k0 = math.ceil(K / 2) if K > 2.0 / (mu * omega_bar) else None
        return cls(kind="horizon_aware", L=L, mu=mu, delta=delta, K=K, omega_bar=omega_bar, k0=k0)

    @classmethod
    def hsieh(cls, gamma0, b, L=None, mu=None) -> "StepSizePlan":
        if gamma0 <= 0 or b <= 0:
            raise ScheduleError("gamma0 and b must be positive")
        if mu is not None and gamma0 <= 1.0 / mu:
            warnings.warn(
                f"baseline schedule outside its stated range: gamma0={gamma0} <= 1/mu={1.0 / mu}",
                stacklevel=2,
            )
        if L is not None and b < 4.0 * L * gamma0:
            warnings.warn(
                f"baseline schedule outside its stated range: b={b} < 4*L*gamma0={4.0 * L * gamma0}",
                stacklevel=2,
            )
        return cls(kind="hsieh", gamma0=gamma0, b=b, L=L, mu=mu)

    @classmethod
    def weak_mvi(cls, L, rho, gamma=None, omega=None, safety=0.5) -> "StepSizePlan":
        if gamma is None or omega is None:
            gamma, omega = weak_mvi_steps(L, rho, safety)
        else:
            validate_weak_mvi_steps(L, rho, gamma, omega)
        return cls(kind="weak_mvi", L=L, gamma=gamma, omega=omega)

    @classmethod
    def custom_switch(cls, L, mu, delta, switch_at: int) -> "StepSizePlan":
        """Switching rule with a manually chosen switch iteration."""
        if switch_at < 0:
            raise ScheduleError("switch_at must be nonnegative")
        omega_bar = _omega_bar(L, mu, delta)
        return cls(
            kind="custom", L=L, mu=mu, delta=delta, omega_bar=omega_bar, switch_at=switch_at
        )

    @property
    def is_constant(self) -> bool:
        return self.kind in ("constant", "constant_targeted", "weak_mvi")

    def step(self, k: int) -> tuple[float, float]:
        if self.kind in ("constant", "constant_targeted"):
            return self.omega, self.omega
        if self.kind == "weak_mvi":
            return self.gamma, self.omega
        if self.kind == "switching":
            w = self.omega_bar if k <= self.k_star else (
                2.0 * (2.0 * k + 1.0) / (self.mu * (k + 1.0) ** 2)
            )
            return w, w
        if self.kind == "custom":
            if k <= self.switch_at:
                return self.omega_bar, self.omega_bar
            w = min(self.omega_bar, 2.0 * (2.0 * k + 1.0) / (self.mu * (k + 1.0) ** 2))
            return w, w
        if self.kind == "horizon_aware":
            # trace final rows probe k = K; clamp to the last in-horizon step
            w = horizon_step(min(k, self.K - 1), self.K, self.L, self.mu, self.delta)
            return w, w
        if self.kind == "hsieh":
            w = hsieh_step(k, self.gamma0, self.b)
            return w, w
        raise ScheduleError(f"unknown plan kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind in ("constant", "constant_targeted"):
            return f"{self.kind}(omega={self.omega:.6g})"
        if self.kind == "weak_mvi":
            return f"weak_mvi(gamma={self.gamma:.6g}, omega={self.omega:.6g})"
        if self.kind == "switching":
            return f"switching(omega_bar={self.omega_bar:.6g}, k_star={self.k_star})"
        if self.kind == "custom":
            return f"custom(omega_bar={self.omega_bar:.6g}, switch_at={self.switch_at})"
        if self.kind == "horizon_aware":
            return f"horizon_aware(omega_bar={self.omega_bar:.6g}, K={self.K}, k0={self.k0})"
        return f"hsieh(gamma0={self.gamma0:.6g}, b={self.b:.6g})"
