"""Repeated-interaction (collision) engine with thermodynamic bookkeeping.

Each step couples the battery to a fresh thermal ancilla through
U = exp(-i (H_S + H_R + (eps/sqrt(dt)) V) dt) and traces the ancilla out.
Work is the joint energy change, heat the energy deposited in the ancilla.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qcore import (
    DensityMatrix,
    HermitianOperator,
    dagger,
    ergotropy,
    matrix_exp,
    thermal_state,
)


@dataclass(frozen=True)
class CollisionSpec:
    """Battery/ancilla Hamiltonians and the unscaled interaction.

    `V_unscaled` is the operator multiplying eps/sqrt(delta_t); the scaling
    is applied at collision time so delta_t can be swept freely.
    """

    H_S: HermitianOperator
    H_R: HermitianOperator
    V_unscaled: HermitianOperator
    epsilon: float
    delta_t: float
    beta: float

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if self.V_unscaled.dim != self.H_S.dim * self.H_R.dim:
            raise ValueError("dim(V) must equal dim(H_S) * dim(H_R)")


@dataclass(frozen=True)
class ThermoLedger:
    """Cumulative work, heat and system energy change; W = dE_system + heat."""

    work: float = 0.0
    heat: float = 0.0
    dE_system: float = 0.0
    steps: int = 0

    def add(self, other: "ThermoLedger") -> "ThermoLedger":
        return ThermoLedger(
            self.work + other.work,
            self.heat + other.heat,
            self.dE_system + other.dE_system,
            self.steps + other.steps,
        )


def _joint_propagator(spec: CollisionSpec) -> np.ndarray:
    dS, dR = spec.H_S.dim, spec.H_R.dim
    H = (
        np.kron(spec.H_S.entries, np.eye(dR))
        + np.kron(np.eye(dS), spec.H_R.entries)
        + (spec.epsilon / np.sqrt(spec.delta_t)) * spec.V_unscaled.entries
    )
    return matrix_exp(-1j * H * spec.delta_t)


def _collide_raw(rho: np.ndarray, spec: CollisionSpec, U: np.ndarray,
                 tau: np.ndarray):
    """Collision on raw arrays; returns (rho', dE_S, heat)."""
    dS, dR = spec.H_S.dim, spec.H_R.dim
    after = U @ np.kron(rho, tau) @ dagger(U)
    blocks = after.reshape(dS, dR, dS, dR)
    rho_out = np.einsum("irjr->ij", blocks)
    rho_R = np.einsum("rirj->ij", blocks)
    dE_S = float(np.real(np.trace(spec.H_S.entries @ (rho_out - rho))))
    heat = float(np.real(np.trace(spec.H_R.entries @ (rho_R - tau))))
    return rho_out, dE_S, heat


def collide(rho_S: DensityMatrix, spec: CollisionSpec):
    """One collision; returns (rho_S', per-step ThermoLedger)."""
    if rho_S.dim != spec.H_S.dim:
        raise ValueError("state dimension does not match H_S")
    tau = thermal_state(spec.H_R, spec.beta).entries
    U = _joint_propagator(spec)
    rho_out, dE_S, heat = _collide_raw(rho_S.entries, spec, U, tau)
    ledger = ThermoLedger(work=dE_S + heat, heat=heat, dE_system=dE_S, steps=1)
    return DensityMatrix(rho_out, rho_S.basis_dims), ledger


def run_repeated(rho0: DensityMatrix, spec: CollisionSpec, n_steps: int, record_every: int = 1):
    """n_steps collisions with fresh ancillas; returns (trajectory, ThermoLedger).

    The trajectory holds every record_every-th state including start and end.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if rho0.dim != spec.H_S.dim:
        raise ValueError("state dimension does not match H_S")
    U = _joint_propagator(spec)
    tau = thermal_state(spec.H_R, spec.beta).entries
    rho = rho0.entries
    work = heat = dE = 0.0
    traj = [rho0]
    for k in range(n_steps):
        rho, dE_S, q = _collide_raw(rho, spec, U, tau)
        work += dE_S + q
        heat += q
        dE += dE_S
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            m = 0.5 * (rho + dagger(rho))
            traj.append(DensityMatrix(m, rho0.basis_dims))
            rho = m
    return traj, ThermoLedger(work=work, heat=heat, dE_system=dE, steps=n_steps)


@dataclass(frozen=True)
class EfficiencyReport:
    eta_heat: float
    eta_ergo: float
    charged: bool  # False flags a run with non-positive external work


def charging_efficiency(ledger: ThermoLedger, rho_final: DensityMatrix,
                        H_S: HermitianOperator) -> EfficiencyReport:
    """eta_heat = 1 - Q/W and eta_ergo = ergotropy(rho_final)/W."""
    if ledger.work <= 0:
        return EfficiencyReport(float("nan"), float("nan"), charged=False)
    eta_heat = 1.0 - ledger.heat / ledger.work
    eta_ergo = ergotropy(rho_final, H_S) / ledger.work
    return EfficiencyReport(eta_heat, eta_ergo, charged=True)


def charging_interaction() -> HermitianOperator:
    """Single-battery charging interaction sigma+ sigma+ + sigma- sigma- (unscaled)."""
    from .qcore import SIGMA_MINUS, SIGMA_PLUS

    V = np.kron(SIGMA_PLUS, SIGMA_PLUS) + np.kron(SIGMA_MINUS, SIGMA_MINUS)
    return HermitianOperator(V, "V_charge")


def lindblad_faithful_dt(epsilon: float) -> float:
    """Default step keeping the O(dt) discretization error below ~1e-3."""
    return 1e-3 / epsilon**2
