"""Dense linear algebra and quantum-information primitives.

Conventions used throughout the package:
  * two-level basis index 0 = excited state, so sigma_z = diag(1, -1) and
    H = (omega/2) sigma_z puts index 0 at energy +omega/2;
  * density matrices are vectorized row-major, vec(rho) = rho.reshape(-1),
    i.e. (rho00, rho01, rho10, rho11) for a qubit;
  * entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
ENTROPY_CUTOFF = 1e-14

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |e><g|
SIGMA_MINUS = SIGMA_PLUS.conj().T                                # |g><e|


def _as_array(obj) -> np.ndarray:
    if isinstance(obj, (DensityMatrix, HermitianOperator, Superoperator)):
        return obj.entries
    return np.asarray(obj, dtype=complex)


def _freeze(a: np.ndarray) -> np.ndarray:
    # always copy so freezing never flips a caller-owned buffer to read-only
    a = np.array(a, dtype=complex, order="C")
    a.setflags(write=False)
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite state."""

    entries: np.ndarray
    basis_dims: tuple[int, ...] = ()

    def __post_init__(self):
        a = _freeze(_as_array(self.entries))
        object.__setattr__(self, "entries", a)
        d = a.shape[0]
        if a.ndim != 2 or a.shape[1] != d:
            raise ValueError("density matrix must be square")
        dims = tuple(self.basis_dims) if self.basis_dims else (d,)
        if math.prod(dims) != d:
            raise ValueError(f"basis_dims {dims} do not multiply to dim {d}")
        object.__setattr__(self, "basis_dims", dims)
        herm = np.abs(a - dagger(a)).max()
        if herm > HERM_TOL:
            raise ValueError(f"not Hermitian: max |rho - rho^dag| = {herm:.3e}")
        tr = abs(np.trace(a) - 1.0)
        if tr > TRACE_TOL:
            raise ValueError(f"trace deviates from 1 by {tr:.3e}")
        w = np.linalg.eigvalsh(a)
        if w.min() < -PSD_TOL:
            raise ValueError(f"negative eigenvalue {w.min():.3e}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian observable or Hamiltonian with an optional label."""

    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = _freeze(_as_array(self.entries))
        object.__setattr__(self, "entries", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("operator must be square")
        herm = np.abs(a - dagger(a)).max()
        if herm > HERM_TOL:
            raise ValueError(f"not Hermitian: {herm:.3e}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Superoperator:
    """d^2 x d^2 matrix acting on row-major vectorized states."""

    entries: np.ndarray
    vectorization_convention = "row-major"  # vec(rho) = rho.reshape(-1)

    def __post_init__(self):
        a = _freeze(_as_array(self.entries))
        object.__setattr__(self, "entries", a)
        n = a.shape[0]
        d = round(math.isqrt(n))
        if a.ndim != 2 or a.shape[1] != n or d * d != n:
            raise ValueError("superoperator must be d^2 x d^2")

    @property
    def system_dim(self) -> int:
        return math.isqrt(self.entries.shape[0])


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        v = self.eigenvectors
        gram = dagger(v) @ v
        if np.abs(gram - np.eye(v.shape[1])).max() > 1e-10:
            raise ValueError("eigenvectors are not orthonormal")


def spectral(H) -> SpectralDecomposition:
    a = _as_array(H)
    w, v = np.linalg.eigh(a)
    dec = SpectralDecomposition(_freeze(w.astype(complex)).real, _freeze(v))
    recon = (v * w) @ dagger(v)
    if np.abs(recon - a).max() > 1e-9 * max(np.abs(a).max(), 1.0):
        raise ValueError("spectral reconstruction error above tolerance")
    return dec


def vec(mat: np.ndarray) -> np.ndarray:
    """Row-major vectorization."""
    return np.asarray(mat, dtype=complex).reshape(-1)


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    d = math.isqrt(v.size)
    return v.reshape(d, d)


def kron(a, b):
    """Tensor product; preserves DensityMatrix/HermitianOperator type and basis_dims."""
    am, bm = _as_array(a), _as_array(b)
    out = np.kron(am, bm)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(out, a.basis_dims + b.basis_dims)
    if isinstance(a, HermitianOperator) and isinstance(b, HermitianOperator):
        label = " x ".join(s for s in (a.label, b.label) if s)
        return HermitianOperator(out, label)
    return out


def partial_trace(rho, keep) -> DensityMatrix:
    """Trace out all subsystems not listed in `keep` (indices into basis_dims)."""
    if isinstance(rho, DensityMatrix):
        dims = rho.basis_dims
        a = rho.entries
    else:
        raise TypeError("partial_trace expects a DensityMatrix with basis_dims")
    keep = sorted(set(int(k) for k in np.atleast_1d(keep)))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"subsystem index out of range for {n} subsystems")
    traced = [i for i in range(n) if i not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise ValueError("too many subsystems")
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in traced:
        col[i] = row[i]
    out_sub = "".join(row[i] for i in keep) + "".join(letters[n + i] for i in keep)
    expr = "".join(row) + "".join(col) + "->" + out_sub
    reduced = np.einsum(expr, a.reshape(dims + dims))
    new_dims = tuple(dims[i] for i in keep)
    d = math.prod(new_dims)
    return DensityMatrix(reduced.reshape(d, d), new_dims)


def thermal_state(H, beta: float, basis_dims=()) -> DensityMatrix:
    """Gibbs state e^{-beta H} / Z; beta may be negative (inverted populations)."""
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    dec = spectral(H)
    w = dec.eigenvalues
    x = -beta * w
    x -= x.max()  # overflow guard; cancels in the ratio
    p = np.exp(x)
    p /= p.sum()
    rho = (dec.eigenvectors * p) @ dagger(dec.eigenvectors)
    rho = 0.5 * (rho + dagger(rho))
    return DensityMatrix(rho, basis_dims)


def _clipped_eigvals(rho) -> np.ndarray:
    """Eigenvalues with round-off negatives in [-PSD_TOL, 0) clipped and renormalized."""
    w = np.linalg.eigvalsh(_as_array(rho))
    if w.min() < -PSD_TOL:
        raise ValueError(f"state eigenvalue {w.min():.3e} below tolerance")
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def vn_entropy(rho) -> float:
    """Von Neumann entropy in nats."""
    w = _clipped_eigvals(rho)
    w = w[w > ENTROPY_CUTOFF]
    return float(-(w * np.log(w)).sum())


def mutual_information(rho: DensityMatrix, keep_a) -> float:
    """I(A:B) = S(A) + S(B) - S(AB) for the bipartition keep_a | rest."""
    keep_a = sorted(set(int(k) for k in np.atleast_1d(keep_a)))
    keep_b = [i for i in range(len(rho.basis_dims)) if i not in keep_a]
    sa = vn_entropy(partial_trace(rho, keep_a))
    sb = vn_entropy(partial_trace(rho, keep_b))
    return sa + sb - vn_entropy(rho)


def energy_projectors(H, tol: float = 1e-9) -> list[np.ndarray]:
    """Projectors onto the eigenspaces of H, grouping near-degenerate levels."""
    dec = spectral(H)
    w, v = dec.eigenvalues, dec.eigenvectors
    scale = max(np.abs(w).max(), 1.0)
    groups: list[list[int]] = []
    for i, val in enumerate(w):
        if groups and abs(val - w[groups[-1][0]]) <= tol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [v[:, g] @ dagger(v[:, g]) for g in groups]


def dephase_full(rho, H) -> np.ndarray:
    """Project out all coherences between eigenspaces of H (returns a raw array)."""
    a = _as_array(rho)
    return sum(P @ a @ P for P in energy_projectors(H))


def rel_entropy_coherence(rho, H) -> float:
    """S(dephased rho) - S(rho), coherence relative to the eigenbasis of H."""
    a = _as_array(rho)
    c = vn_entropy(DensityMatrix(dephase_full(a, H))) - vn_entropy(rho)
    return max(c, 0.0)


def passive_state(rho, H) -> DensityMatrix:
    """Pair descending state populations with ascending energies of H."""
    p = np.sort(_clipped_eigvals(rho))[::-1]
    dec = spectral(H)
    out = (dec.eigenvectors * p) @ dagger(dec.eigenvectors)
    return DensityMatrix(0.5 * (out + dagger(out)))


def ergotropy(rho, H) -> float:
    """Maximum unitary work extraction tr(rho H) - tr(rho_passive H)."""
    a = _as_array(rho)
    h = _as_array(H)
    e_now = float(np.real(np.trace(a @ h)))
    e_passive = float(np.real(np.trace(passive_state(rho, H).entries @ h)))
    return max(e_now - e_passive, 0.0)


def matrix_exp(M: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring via scipy)."""
    return scipy.linalg.expm(np.asarray(M, dtype=complex))


def trace_distance(rho, sigma) -> float:
    """(1/2) ||rho - sigma||_1 for Hermitian arguments."""
    d = _as_array(rho) - _as_array(sigma)
    w = np.linalg.eigvalsh(0.5 * (d + dagger(d)))
    return 0.5 * float(np.abs(w).sum())


def qubit_hamiltonian(omega: float, label: str = "H_S") -> HermitianOperator:
    """(omega/2) sigma_z with index 0 the excited level."""
    return HermitianOperator(0.5 * omega * SIGMA_Z, label)


def embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Single-qubit operator acting on `site` of an n-qubit register."""
    out = np.array([[1.0 + 0j]])
    for i in range(n_sites):
        out = np.kron(out, op if i == site else I2)
    return out


def sum_qubit_hamiltonian(omega: float, n_sites: int) -> np.ndarray:
    return sum(embed(0.5 * omega * SIGMA_Z, i, n_sites) for i in range(n_sites))


def trace_preservation_defect(L: Superoperator) -> float:
    """Max |row of vec-trace applied to L|; zero for a trace-preserving generator."""
    d = L.system_dim
    tvec = vec(np.eye(d))
    return float(np.abs(tvec @ L.entries).max())
