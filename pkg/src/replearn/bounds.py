"""Sample-complexity bounds for learning n tasks with a shared representation.

All capacities are handled in log space using the Lipschitz-network
approximations ``C(eps, l_G) <= (k/eps)^(2 W_G)`` and
``C*(eps, F) <= (k'/eps)^(2 W_F)``.  ``k`` and ``k'`` are unknown constants;
the default of 10 is a placeholder, not a derived value.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

DEFAULT_K = 10.0


def d_nu(x: float, y: float, nu: float) -> float:
    """``|x - y| / (nu + x + y)`` on the non-negative reals."""
    if x < 0 or y < 0:
        raise ValueError(f"d_nu is defined on non-negative reals, got x={x}, y={y}")
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return abs(x - y) / (nu + (x + y))


def ln_capacity_G(eps: float, W_G: int, k: float = DEFAULT_K) -> float:
    """``2 W_G ln(k / eps)``, clipped at 0 when ``eps >= k`` (vacuous regime)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps >= k:
        return 0.0
    return 2.0 * W_G * math.log(k / eps)


def ln_capacity_F(eps: float, W_F: int, k_prime: float = DEFAULT_K) -> float:
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps >= k_prime:
        return 0.0
    return 2.0 * W_F * math.log(k_prime / eps)


def epsilon_split(W_F: int, W_G: int, n: int, budget: float) -> tuple[float, float]:
    """Split ``budget`` between the G-cover and F-cover scales.

    ``eps2 = max(W_F, n W_G) / (W_F + n W_G) * budget`` and ``eps1`` takes the
    remainder, which equals ``min(W_F, n W_G) / (W_F + n W_G) * budget`` up to
    rounding and makes ``eps1 + eps2 == budget`` hold exactly.
    """
    if not budget > 0:
        raise ValueError("budget must be positive")
    a, b = W_F, n * W_G
    eps2 = max(a, b) / (a + b) * budget
    # eps2 >= budget/2, so this subtraction is exact
    eps1 = budget - eps2
    return eps1, eps2


@dataclass(frozen=True)
class BoundInputs:
    M: float = 1.0
    alpha: float = 0.1
    nu: float = 0.1
    delta: float = 0.01
    W_F: int = 100
    W_G: int = 10
    k: float = DEFAULT_K
    k_prime: float = DEFAULT_K
    n: int = 1

    def __post_init__(self):
        errors = []
        if not self.M > 0:
            errors.append(f"M must be > 0 (got {self.M})")
        if not 0 < self.alpha < 1:
            errors.append(f"alpha must lie in (0, 1) (got {self.alpha})")
        if not self.nu > 0:
            errors.append(f"nu must be > 0 (got {self.nu})")
        if not 0 < self.delta < 1:
            errors.append(f"delta must lie in (0, 1) (got {self.delta})")
        for name in ("W_F", "W_G", "n"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be a positive integer (got {getattr(self, name)})")
        if not (self.k > 0 and self.k_prime > 0):
            errors.append("k and k_prime must be > 0")
        if errors:
            raise ValueError("; ".join(errors))

    def replace(self, **kw) -> "BoundInputs":
        return BoundInputs(**{**asdict(self), **kw})


@dataclass(frozen=True)
class BoundReport:
    n: int
    eps1: float
    eps2: float
    ln_capacity_G: float
    ln_capacity_F: float
    m_bound_thm1: float
    n_bound_thm2: float
    m_bound_thm2: float
    a_term: float
    b_term: float
    vacuous: bool


def _m_bound(inp: BoundInputs, prefactor: float, budget: float, conf: float):
    eps1, eps2 = epsilon_split(inp.W_F, inp.W_G, inp.n, budget)
    lcg = ln_capacity_G(eps1, inp.W_G, inp.k)
    lcf = ln_capacity_F(eps2, inp.W_F, inp.k_prime)
    a = prefactor * lcg
    b = prefactor * (math.log(conf) + lcf - math.log(inp.delta))
    vacuous = eps1 >= inp.k or eps2 >= inp.k_prime
    return a + b / inp.n, a, b, eps1, eps2, lcg, lcf, vacuous


def m_bound_thm1(inp: BoundInputs) -> float:
    """Examples per task sufficient for the n-task deviation to be <= alpha w.p. 1 - delta."""
    return _m_bound(inp, 8.0 * inp.M / (inp.alpha**2 * inp.nu), inp.alpha * inp.nu / 8.0, 4.0)[0]


def n_bound_thm2(inp: BoundInputs) -> float:
    """Tasks sufficient for the learnt representation to transfer to new tasks."""
    c = 32.0 * inp.M / (inp.alpha**2 * inp.nu)
    eps = inp.alpha * inp.nu / 16.0
    return c * (math.log(8.0) + ln_capacity_F(eps, inp.W_F, inp.k_prime) - math.log(inp.delta))


def m_bound_thm2(inp: BoundInputs) -> float:
    c = 32.0 * inp.M / (inp.alpha**2 * inp.nu)
    return _m_bound(inp, c, inp.alpha * inp.nu / 16.0, 8.0)[0]


def bound_report(inp: BoundInputs) -> BoundReport:
    m1, a, b, eps1, eps2, lcg, lcf, vac1 = _m_bound(
        inp, 8.0 * inp.M / (inp.alpha**2 * inp.nu), inp.alpha * inp.nu / 8.0, 4.0
    )
    _, _, _, e1_2, e2_2, *_ = _m_bound(
        inp, 32.0 * inp.M / (inp.alpha**2 * inp.nu), inp.alpha * inp.nu / 16.0, 8.0
    )
    vac2 = e1_2 >= inp.k or e2_2 >= inp.k_prime or inp.alpha * inp.nu / 16.0 >= inp.k_prime
    return BoundReport(
        n=inp.n,
        eps1=eps1,
        eps2=eps2,
        ln_capacity_G=lcg,
        ln_capacity_F=lcf,
        m_bound_thm1=m1,
        n_bound_thm2=n_bound_thm2(inp),
        m_bound_thm2=m_bound_thm2(inp),
        a_term=a,
        b_term=b,
        vacuous=vac1 or vac2,
    )


def sweep_n(inp: BoundInputs, n_values) -> list[BoundReport]:
    return [bound_report(inp.replace(n=int(n))) for n in n_values]
