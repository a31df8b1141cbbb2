"""Markovian generator from a collision spec, propagation, and steady states.

The dissipator is the double-commutator form obtained in the dt -> 0 limit
of the repeated-interaction scheme:

    D(rho) = -(eps^2/2) tr_R [V, [V, rho x tau_R]],   tau_R = e^{-beta H_R}/Z,

with V the unscaled interaction (the 1/sqrt(dt) factors cancel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import CollisionSpec
from .qcore import (
    DensityMatrix,
    HermitianOperator,
    Superoperator,
    comm,
    dagger,
    matrix_exp,
    thermal_state,
    trace_preservation_defect,
    unvec,
    vec,
)


@dataclass(frozen=True)
class Liouvillian:
    generator: Superoperator
    system_dim: int
    spec: CollisionSpec


def _dissipator_action(spec: CollisionSpec):
    """Returns rho -> D(rho) as a callable on raw arrays."""
    dS, dR = spec.H_S.dim, spec.H_R.dim
    tau = thermal_state(spec.H_R, spec.beta).entries
    V = spec.V_unscaled.entries

    def act(rho: np.ndarray) -> np.ndarray:
        joint = np.kron(rho, tau)
        inner = comm(V, comm(V, joint))
        reduced = np.einsum("irjr->ij", inner.reshape(dS, dR, dS, dR))
        return -0.5 * spec.epsilon**2 * reduced

    return act


def _build_superop(dim: int, act) -> np.ndarray:
    """Assemble the matrix of a linear map from its action on basis matrices."""
    sup = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            E = np.zeros((dim, dim), dtype=complex)
            E[i, j] = 1.0
            sup[:, i * dim + j] = act(E).reshape(-1)
    return sup


def dissipator(spec: CollisionSpec) -> Superoperator:
    """Superoperator of the double-commutator dissipator."""
    return Superoperator(_build_superop(spec.H_S.dim, _dissipator_action(spec)))


def liouvillian(spec: CollisionSpec) -> Liouvillian:
    """L = -i[H_S, .] + D, validated for trace preservation and spectrum."""
    d = spec.H_S.dim
    HS = spec.H_S.entries
    diss = _dissipator_action(spec)

    def act(rho):
        return -1j * comm(HS, rho) + diss(rho)

    sup = Superoperator(_build_superop(d, act))
    defect = trace_preservation_defect(sup)
    scale = max(np.abs(sup.entries).max(), 1.0)
    if defect > 1e-10 * scale:
        raise ValueError(f"generator is not trace preserving: defect {defect:.3e}")
    w = np.linalg.eigvals(sup.entries)
    if w.real.max() > 1e-10 * scale:
        raise ValueError("generator has eigenvalues with positive real part")
    if np.abs(w).min() > 1e-10 * scale:
        raise ValueError("generator has no stationary direction")
    return Liouvillian(sup, d, spec)


def propagate(L: Liouvillian, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """exp(L t) applied to rho0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    out = unvec(matrix_exp(L.generator.entries * t) @ vec(rho0.entries))
    out = 0.5 * (out + dagger(out))
    return DensityMatrix(out, rho0.basis_dims)


def steady_states(L: Liouvillian, sv_tol: float = 1e-10):
    """Kernel of the generator, Hermitized and filtered to valid states.

    Returns (states, unique) where unique means exactly one valid state
    spans the kernel. An ill-conditioned kernel (smallest nonzero singular
    value under 1e-8) raises.
    """
    A = L.generator.entries
    U, s, Vh = np.linalg.svd(A)
    scale = max(s.max(), 1.0)
    null_mask = s < sv_tol * scale
    n_null = int(null_mask.sum())
    if n_null == 0:
        raise ValueError("no kernel vector found")
    nonzero = s[~null_mask]
    if nonzero.size and nonzero.min() < 1e-8 * scale:
        raise ValueError("numerically ill-conditioned kernel")
    states = []
    d = L.system_dim
    for k in range(n_null):
        v = Vh[len(s) - n_null + k].conj()
        m = unvec(v)
        m = 0.5 * (m + dagger(m))
        tr = np.trace(m).real
        if abs(tr) < 1e-12:
            continue  # traceless kernel direction, not normalizable to a state
        m = m / tr
        w = np.linalg.eigvalsh(m)
        if w.min() < -1e-9:
            continue  # indefinite direction, reported via the unique flag only
        states.append(DensityMatrix(m, (d,)))
    unique = n_null == 1 and len(states) == 1
    return states, unique


def verify_h0(H_S: HermitianOperator, H_R: HermitianOperator,
              V: HermitianOperator, H0: HermitianOperator):
    """Residuals (||[H_S, H0]||, ||[V, H0 x I + I x H_R]||) of the steady-state design conditions."""
    r1 = float(np.abs(comm(H_S.entries, H0.entries)).max())
    dS, dR = H0.dim, H_R.dim
    big = np.kron(H0.entries, np.eye(dR)) + np.kron(np.eye(dS), H_R.entries)
    r2 = float(np.abs(comm(V.entries, big)).max())
    return r1, r2
