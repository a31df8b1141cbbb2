"""Parallel vs. collective charging of N two-level batteries.

The collective interaction exchanges the populations of the joint levels
E_k <-> E_{N-k}. It is built from spin-flip-matched dyads

    V0 = sum_s |sbar>_S |sbar>_R <s|_S <s|_R,     sbar = s with all qubits flipped,

which reduces to the two-battery interaction (including its factor 2 once
the overall N prefactor is applied) and to the single-battery charging
interaction at N = 1. V0 is a partial isometry, so ||N V0|| = N equals the
parallel interaction norm with no rescaling; the sector relaxation times it
induces are tau_k = Z1^N / (2 cosh(beta E_k) N^2 eps^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, log

import numpy as np

from .collision import CollisionSpec
from .qcore import (
    DensityMatrix,
    HermitianOperator,
    SIGMA_PLUS,
    embed,
    sum_qubit_hamiltonian,
)


@dataclass(frozen=True)
class BatteryEnsembleSpec:
    """N batteries with gap omega, coupling epsilon, bath inverse temperature beta.

    delta is the charge threshold: a battery counts as charged once its mean
    energy reaches E_full (1 - delta).
    """

    N: int
    omega: float
    epsilon: float
    beta: float
    delta: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")


def build_parallel_V(spec: BatteryEnsembleSpec) -> HermitianOperator:
    """sum_i sigma+_{S_i} sigma+_{R_i} + h.c. on (S_1..S_N, R_1..R_N), unscaled."""
    N = spec.N
    n = 2 * N
    V = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(N):
        term = embed(SIGMA_PLUS, i, n) @ embed(SIGMA_PLUS, N + i, n)
        V += term + term.conj().T
    return HermitianOperator(V, "V_parallel")


def build_collective_V(spec: BatteryEnsembleSpec) -> HermitianOperator:
    """N * sum_s |sbar, sbar><s, s|; asserts norm equality with the parallel V."""
    N = spec.N
    d = 2**N
    V = np.zeros((d * d, d * d), dtype=complex)
    mask = d - 1
    for s in range(d):
        sb = s ^ mask
        V[sb * d + sb, s * d + s] = 1.0
    V *= N
    norm_col = float(np.linalg.norm(V, 2))
    norm_par = float(np.linalg.norm(build_parallel_V(spec).entries, 2))
    if abs(norm_col - norm_par) > 1e-9:
        raise ValueError(
            f"operator-norm mismatch: ||V_col|| = {norm_col:.12f}, "
            f"||V_par|| = {norm_par:.12f}"
        )
    return HermitianOperator(V, "V_collective")


def to_collision_spec(spec: BatteryEnsembleSpec, process: str, delta_t: float = 1e-3
                      ) -> CollisionSpec:
    """Joint-register CollisionSpec for either process ('parallel'|'collective')."""
    N = spec.N
    HS = HermitianOperator(sum_qubit_hamiltonian(spec.omega, N), "H_S^(N)")
    if process == "parallel":
        V = build_parallel_V(spec)
    elif process == "collective":
        V = build_collective_V(spec)
    else:
        raise ValueError(f"unknown process {process!r}")
    return CollisionSpec(H_S=HS, H_R=HS, V_unscaled=V,
                         epsilon=spec.epsilon, delta_t=delta_t, beta=spec.beta)


@dataclass(frozen=True)
class SectorDynamics:
    """Closed-form level populations of the collective process.

    populations(t)[k] is the occupation of a single state within level k;
    the level carries weight degeneracies[k] * populations(t)[k].
    """

    energies: np.ndarray
    degeneracies: np.ndarray
    taus: np.ndarray
    N: int
    omega: float
    beta: float

    def populations(self, t: float) -> np.ndarray:
        b, E = self.beta, self.energies
        Z1N = (2.0 * np.cosh(b * self.omega / 2.0)) ** self.N
        return (np.exp(-b * E) - np.exp(b * E)) / Z1N * np.exp(-t / self.taus) \
            + np.exp(b * E) / Z1N

    def energy(self, t: float) -> float:
        return float(np.sum(self.degeneracies * self.populations(t) * self.energies))

    @property
    def energy_full(self) -> float:
        return (self.N * self.omega / 2.0) * np.tanh(self.beta * self.omega / 2.0)

    @property
    def energy_empty(self) -> float:
        return -self.energy_full


def sector_dynamics(spec: BatteryEnsembleSpec) -> SectorDynamics:
    """E_k = omega (2k - N)/2, g_k = C(N, k), tau_k = Z1^N/(2 cosh(beta E_k) N^2 eps^2)."""
    N = spec.N
    ks = np.arange(N + 1)
    E = spec.omega * (2 * ks - N) / 2.0
    g = np.array([comb(N, int(k)) for k in ks], dtype=float)
    Z1N = (2.0 * np.cosh(spec.beta * spec.omega / 2.0)) ** N
    taus = Z1N / (2.0 * np.cosh(spec.beta * E) * N**2 * spec.epsilon**2)
    return SectorDynamics(E, g, taus, N, spec.omega, spec.beta)


def _bracketed_root(f, target: float, rel_tol: float = 1e-10) -> float:
    """Smallest t with f(t) >= target, for monotone increasing f with f(0) < target."""
    hi = 1.0
    for _ in range(200):
        if f(hi) >= target:
            break
        hi *= 2.0
    else:
        raise ValueError("charge target unreachable within bracket search")
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def charge_time(spec: BatteryEnsembleSpec, process: str) -> float:
    """Time to reach E_full (1 - delta) from the thermal start.

    Parallel: closed form tau_par log[(E_full - E_empty)/(delta E_full)].
    Collective: root of the sector-dynamics energy curve.
    """
    if spec.beta <= 0:
        raise ValueError("charge_time requires beta > 0 (E_full > 0)")
    sd = sector_dynamics(spec)
    E_full, E_empty = sd.energy_full, sd.energy_empty
    if process == "parallel":
        tau = 1.0 / spec.epsilon**2
        return tau * log((E_full - E_empty) / (spec.delta * E_full))
    if process == "collective":
        target = E_full * (1.0 - spec.delta)
        return _bracketed_root(sd.energy, target)
    raise ValueError(f"unknown process {process!r}")


def advantage(spec: BatteryEnsembleSpec) -> float:
    """Collective advantage Gamma = T_parallel / T_collective (equal endpoints)."""
    return charge_time(spec, "parallel") / charge_time(spec, "collective")


def partitioned_advantage(spec: BatteryEnsembleSpec, k: int) -> float:
    """Advantage when charging in N/k independent collective blocks of size k."""
    if spec.N % k != 0:
        raise ValueError(f"k = {k} does not divide N = {spec.N}")
    block = BatteryEnsembleSpec(k, spec.omega, spec.epsilon, spec.beta, spec.delta)
    return charge_time(spec, "parallel") / charge_time(block, "collective")


def mutual_info_max_closed(spec: BatteryEnsembleSpec) -> float:
    """Peak two-battery mutual information, Z-form (nats). N = 2 only."""
    if spec.N != 2:
        raise ValueError("closed form is specific to N = 2")
    Z1 = 2.0 * np.cosh(spec.beta * spec.omega / 2.0)
    Z = Z1 * Z1
    return float(2.0 * log(2.0) + (Z - 2.0) / Z * np.log((Z - 2.0) / (2.0 * Z))
                 - 2.0 / Z * np.log(Z))


def mutual_info_max_gamma(gamma: float) -> float:
    """Same quantity parametrized by the advantage Gamma in [2, 4]."""
    if not (2.0 <= gamma <= 4.0):
        raise ValueError("Gamma must lie in [2, 4]")
    out = 2.0 * log(2.0) + gamma / 4.0 * np.log(gamma / 8.0)
    rest = 1.0 - gamma / 4.0
    if rest > 0:
        out += rest * np.log(0.5 - gamma / 8.0)
    return float(out)


def classicality_check(trajectory) -> tuple[bool, float]:
    """True iff every state is diagonal in the product energy basis (tol 1e-10)."""
    worst = 0.0
    for rho in trajectory:
        a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
        off = a - np.diag(np.diag(a))
        worst = max(worst, float(np.abs(off).max()))
    return worst <= 1e-10, worst
