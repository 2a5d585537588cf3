"""Spin measurements on the even-correlation state and their Bell violations.

Observer ``i`` measures spin along angle ``theta[i, m_i]`` in the xz-plane
(0 is +z).  Outcome 1 is spin-up and outcome 2 spin-down.  For this state
only the empty and the full-order multideviations survive in every context,
so the joint statistics depend on the angle sum alone.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .algebra import full_mask, popcount, submasks
from .contexts import EventSpace, MultiContextDistribution

MAX_STATEVECTOR = 12
# above this many observers cos^n is taken through logarithms
LOG_POWER_THRESHOLD = 50
GRID_STEP = math.pi * 1e-4
D_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SpinConfig:
    """``angles[i] = (theta_i0, theta_i1)`` in radians."""

    angles: tuple[tuple[float, float], ...]

    def __init__(self, angles):
        arr = np.asarray(angles, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(arr)):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "angles", tuple((float(a), float(b)) for a, b in arr))

    @property
    def n(self) -> int:
        return len(self.angles)

    def setting_angles(self, m: Sequence[int]) -> np.ndarray:
        if len(m) != self.n or any(x not in (0, 1) for x in m):
            raise ValueError("need one 0/1 setting per observer")
        return np.array([self.angles[i][m[i]] for i in range(self.n)])


@dataclass(frozen=True)
class ViolationParams:
    a: float
    d: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("at least two observers")


def joint_probability(cfg: SpinConfig, m: Sequence[int], x: Sequence[int]) -> float:
    """Probability of outcomes ``x`` (0 = spin-up, 1 = spin-down) under settings ``m``."""
    if len(x) != cfg.n or any(v not in (0, 1) for v in x):
        raise ValueError("need one binary outcome per observer")
    s = float(np.sum(cfg.setting_angles(m)))
    return (1 + (-1) ** sum(x) * math.cos(s)) / 2**cfg.n


def context_probabilities(cfg: SpinConfig, m: Sequence[int]) -> np.ndarray:
    """All ``2^n`` joint probabilities in encode order (first observer most significant)."""
    n = cfg.n
    s = math.cos(float(np.sum(cfg.setting_angles(m))))
    parity = np.array([bin(k).count("1") % 2 for k in range(2**n)])
    return (1 + np.where(parity, -s, s)) / 2**n


def qm_multideviations(cfg: SpinConfig, m: Sequence[int]) -> dict[int, np.ndarray]:
    """The nonvanishing orders: empty and full, each over its outcomes in encode order."""
    n = cfg.n
    c = math.cos(float(np.sum(cfg.setting_angles(m))))
    parity = np.array([bin(k).count("1") % 2 for k in range(2**n)])
    out = {0: np.array([1 / 2**n])}
    out[full_mask(n)] = np.where(parity, -c, c) / 2**n
    return out


def statistics(cfg: SpinConfig) -> MultiContextDistribution:
    """Quantum statistics as a multiple-context distribution on the binary event space."""
    space = EventSpace.binary(cfg.n)
    arrays = {}
    for c in space.contexts:
        m = [(c >> (2 * i + 1)) & 1 for i in range(cfg.n)]
        arrays[c] = context_probabilities(cfg, m)
    return MultiContextDistribution.from_arrays(space, arrays)


def even_correlation_state(n: int) -> np.ndarray:
    """Equal-weight superposition of even-parity spin-down patterns with sign ``(-1)^(k/2)``."""
    if n > MAX_STATEVECTOR:
        raise ValueError(f"statevector limited to {MAX_STATEVECTOR} observers")
    if n < 1:
        raise ValueError("need at least one observer")
    psi = np.zeros(2**n, dtype=complex)
    for sigma in submasks(full_mask(n)):
        k = popcount(sigma)
        if k % 2 == 0:
            # observer 0 is the most significant bit
            idx = sum(1 << (n - 1 - i) for i in range(n) if sigma >> i & 1)
            psi[idx] = (-1) ** (k // 2)
    return psi / math.sqrt(2 ** (n - 1))


def spin_basis(theta: float) -> tuple[np.ndarray, np.ndarray]:
    up = np.array([math.cos(theta / 2), math.sin(theta / 2)])
    down = np.array([-math.sin(theta / 2), math.cos(theta / 2)])
    return up, down


def statevector_probability(cfg: SpinConfig, m: Sequence[int], x: Sequence[int]) -> float:
    """Born-rule probability by explicit tensor products; slow, for cross-checks."""
    psi = even_correlation_state(cfg.n)
    vec = np.array([1.0])
    for theta, xi in zip(cfg.setting_angles(m), x):
        vec = np.kron(vec, spin_basis(theta)[xi])
    return float(abs(np.vdot(vec, psi)) ** 2)


# -- violation curves ----------------------------------------------------------


def cos_power(x: float, n: int) -> float:
    """``cos(x)^n``; through logarithms for large ``n``."""
    c = math.cos(x)
    if n <= LOG_POWER_THRESHOLD or c <= 0:
        return c**n
    return math.exp(n * math.log(c))


def violation_lhs(p: ViolationParams) -> float:
    """Left-hand side of the simplest inequality for the even-correlation state."""
    return 0.5 - (0.5 * math.cos(p.a) - math.cos(p.a + p.d) * cos_power(p.d / p.n, p.n))


def violation_lhs_a(a: float, n: int) -> float:
    """Quarter-turn spacing between the two settings of each observer."""
    return violation_lhs(ViolationParams(a, math.pi / 2, n))


def stationary_a(d: float, n: int) -> float:
    return math.pi - d * (n + 1) / n


def violation_lhs_d(d: float, n: int) -> float:
    """``a`` fixed at its stationary value, leaving ``d`` open."""
    return violation_lhs(ViolationParams(stationary_a(d, n), d, n))


def _grid_values(n: int, step: float) -> tuple[np.ndarray, np.ndarray]:
    k = int(round(math.pi / step))
    d = np.linspace(step, math.pi, k)
    c = np.cos(d / n)
    if n > LOG_POWER_THRESHOLD:
        with np.errstate(divide="ignore"):
            power = np.where(c > 0, np.exp(n * np.log(np.abs(c))), c**n)
    else:
        power = c**n
    vals = 0.5 - (-0.5 * np.cos(d + d / n) + c * power)
    return d, vals


def maximize_violation(n: int) -> tuple[float, float]:
    """``(d, value)`` minimizing the stationary-``a`` curve over ``d`` in ``(0, pi]``."""
    if n < 2:
        raise ValueError("at least two observers")
    d, vals = _grid_values(n, GRID_STEP)
    k = int(np.argmin(vals))
    if k == len(d) - 1:
        return float(d[k]), float(vals[k])
    lo = d[k - 1] if k > 0 else d[k] / 2
    hi = d[k + 1]
    res = minimize_scalar(violation_lhs_d, bracket=(lo, d[k], hi), args=(n,), method="golden",
                          options={"xtol": D_TOLERANCE / d[k]})
    x = float(res.x)
    if not 0 < x <= math.pi:
        x = float(d[k])
    return x, violation_lhs_d(x, n)


def scan_global(n: int, steps: int = 400) -> tuple[float, float, float]:
    """Coarse scan over the full ``(a, d)`` rectangle ``[0, 2pi) x (0, pi]``: ``(a, d, value)``."""
    a = np.linspace(0, 2 * math.pi, 2 * steps, endpoint=False)
    d = np.linspace(math.pi / steps, math.pi, steps)
    A, D = np.meshgrid(a, d, indexing="ij")
    c = np.cos(D / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(c > 0, np.exp(n * np.log(np.abs(c))), c**n) if n > LOG_POWER_THRESHOLD else c**n
    vals = 0.5 - (0.5 * np.cos(A) - np.cos(A + D) * power)
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    return float(a[i]), float(d[j]), float(vals[i, j])


def global_minimum(d: float, n: int) -> float:
    """Minimum over ``a`` of the curve at fixed ``d``, in closed form."""
    c = cos_power(d / n, n)
    return 0.5 - math.sqrt(0.25 - c * math.cos(d) + c * c)


def global_check(n: int, steps: int = 400) -> dict:
    """Compare the parameterized optimum with a coarse scan of the whole ``(a, d)`` rectangle."""
    d, v = maximize_violation(n)
    a_s, d_s, v_s = scan_global(n, steps)
    return {"observers": n, "value": v, "scan_a": a_s, "scan_d_over_pi": d_s / math.pi, "scan_value": v_s,
            "lower_found": v_s < v - 1e-12}


def optimal_config(n: int, d: float, phi: int | None = None, m: int = 1) -> SpinConfig:
    """Angles realizing ``violation_lhs_d(d, n)`` for the simplest inequality ``(phi, m)``.

    Every observer gets ``a_i = (a - pi [m = 0]) / n`` on the setting picked
    by ``phi`` and ``a_i + 2d/n`` on the other one.
    """
    if phi is None:
        phi = full_mask(n)
    a = stationary_a(d, n)
    ai = (a - (math.pi if m == 0 else 0.0)) / n
    angles = []
    for i in range(n):
        t = [0.0, 0.0]
        k = (phi >> i) & 1
        t[k] = ai
        t[1 - k] = ai + 2 * d / n
        angles.append(t)
    return SpinConfig(angles)


TABLE_ROWS = (2, 3, 4, 5, 10, 100, 1000)


def violation_table(rows: Sequence[int] = TABLE_ROWS, threads: int = 1) -> list[dict]:
    """One row per observer count; rows are independent and may run on a thread pool."""
    rows = list(rows)
    if threads > 1 and len(rows) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(rows))) as ex:
            optima = list(ex.map(maximize_violation, rows))
    else:
        optima = [maximize_violation(n) for n in rows]
    return [{"observers": n, "d_over_pi": d / math.pi, "value": v} for n, (d, v) in zip(rows, optima)]


__all__ = [
    "SpinConfig",
    "ViolationParams",
    "joint_probability",
    "context_probabilities",
    "qm_multideviations",
    "statistics",
    "even_correlation_state",
    "spin_basis",
    "statevector_probability",
    "cos_power",
    "violation_lhs",
    "violation_lhs_a",
    "violation_lhs_d",
    "stationary_a",
    "maximize_violation",
    "scan_global",
    "global_minimum",
    "global_check",
    "optimal_config",
    "violation_table",
    "TABLE_ROWS",
]
