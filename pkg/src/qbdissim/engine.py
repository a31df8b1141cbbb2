"""Five-stroke heat engine between negative-temperature steady states.

Strokes: (1) unitary population inversion at gap omega_h, (2) sudden quench
omega_h -> omega_c, (3) driven dissipative charging on the cold bath (double
quench, optionally dephased), (4) quench back, (5) relaxation on the hot
bath. Unitary/quench strokes take zero time; t_cycle is split equally
between the two open strokes (configurable).

Work ledger entries W1..W5 are external work inputs (negative = extracted);
Qh is heat absorbed from the hot bath, Qc heat deposited into the cold one,
so W_net (extracted) = Qh - Qc at the periodic steady cycle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from math import pi

import numpy as np

from .control import (
    DriveParams,
    Protocol,
    Segment,
    driven_run,
    generator,
    h_alpha,
)
from .qcore import (
    DensityMatrix,
    SIGMA_X,
    dagger,
    matrix_exp,
    rel_entropy_coherence,
    thermal_state,
    trace_distance,
    unvec,
    vec,
)


@dataclass(frozen=True)
class CycleSpec:
    omega_c: float
    omega_h: float
    beta_c: float
    beta_h: float
    epsilon: float
    t_d: float
    t_cycle: float
    coherent: bool = True
    dephasing_p: float = 1.0
    cold_stroke_fraction: float = 0.5

    def __post_init__(self):
        if not (self.omega_h >= self.omega_c > 0):
            raise ValueError("need omega_h >= omega_c > 0")
        if not (self.beta_c >= self.beta_h >= 0):
            raise ValueError("need beta_c >= beta_h >= 0")
        if self.t_cycle <= 0:
            raise ValueError("t_cycle must be positive")
        if not (0 < self.cold_stroke_fraction < 1):
            raise ValueError("cold_stroke_fraction must lie in (0, 1)")

    @property
    def eps2(self) -> float:
        return self.epsilon**2


@dataclass(frozen=True)
class CycleLedger:
    W1: float
    W2: float
    W3: float
    W4: float
    W5: float
    Qh: float
    Qc: float
    W_net: float
    eta: float
    power: float
    coherence_max: float


def _stroke3_protocol(spec: CycleSpec) -> Protocol:
    t3 = spec.t_cycle * spec.cold_stroke_fraction
    td = min(spec.t_d, t3)
    if td >= t3:
        return Protocol((Segment(t3, 1.0),))
    return Protocol((Segment(td, 1.0), Segment(t3 - td, 0.0)))


def _stroke3_coherence_max(spec: CycleSpec, rho_in: DensityMatrix,
                           n_samples: int = 60) -> float:
    """Max relative entropy of coherence along the coherent stroke 3.

    Samples the sigma_x segment and the early part of the alpha = 0 tail,
    each against the instantaneous Hamiltonian.
    """
    t3 = spec.t_cycle * spec.cold_stroke_fraction
    td = min(spec.t_d, t3)
    cold = (spec.omega_c, spec.epsilon, spec.beta_c)
    M1 = generator(1.0, *cold).entries
    H1 = h_alpha(1.0, spec.omega_c)
    v0 = vec(rho_in.entries)
    c_max = 0.0
    for t in np.linspace(0.0, td, n_samples):
        rho = unvec(matrix_exp(M1 * t) @ v0)
        rho = DensityMatrix(0.5 * (rho + dagger(rho)))
        c_max = max(c_max, rel_entropy_coherence(rho, H1))
    if t3 > td:
        v_td = matrix_exp(M1 * td) @ v0
        M0 = generator(0.0, *cold).entries
        H0 = h_alpha(0.0, spec.omega_c)
        t_tail = min(t3 - td, 3.0 / spec.eps2)
        for t in np.linspace(0.0, t_tail, n_samples // 2):
            rho = unvec(matrix_exp(M0 * t) @ v_td)
            rho = DensityMatrix(0.5 * (rho + dagger(rho)))
            c_max = max(c_max, rel_entropy_coherence(rho, H0))
    return c_max


def run_cycle(spec: CycleSpec, rho_start: DensityMatrix | None = None):
    """One cycle from rho_start (default: hot negative-temperature state).

    Returns (rho_end, CycleLedger, strokes) where strokes maps stroke names
    to (time, state) trajectories.
    """
    Hh = h_alpha(0.0, spec.omega_h)
    Hc = h_alpha(0.0, spec.omega_c)
    rho1 = rho_start if rho_start is not None else thermal_state(Hh, -spec.beta_h)

    # stroke 1: population inversion
    rho2 = DensityMatrix(SIGMA_X @ rho1.entries @ SIGMA_X)
    W1 = float(np.real(np.trace(Hh @ (rho2.entries - rho1.entries))))
    # stroke 2: gap quench omega_h -> omega_c, state unchanged
    W2 = float(np.real(np.trace((Hc - Hh) @ rho2.entries)))

    # stroke 3: driven charging on the cold bath
    cold = DriveParams(spec.omega_c, spec.epsilon, spec.beta_c)
    protocol = _stroke3_protocol(spec)
    traj3, led3 = driven_run(
        protocol, cold,
        dephasing_p=0.0 if spec.coherent else spec.dephasing_p,
        full_projection=(not spec.coherent) and spec.dephasing_p >= 1.0,
        rho0=rho2, record=True)
    rho4 = traj3[-1][1]
    W3 = led3.W_drive + led3.W_interaction
    Qc = led3.Q

    # stroke 4: quench back
    W4 = float(np.real(np.trace((Hh - Hc) @ rho4.entries)))
    rho5 = rho4

    # stroke 5: relaxation on the hot bath (alpha = 0 throughout)
    hot = DriveParams(spec.omega_h, spec.epsilon, spec.beta_h)
    t5 = spec.t_cycle * (1.0 - spec.cold_stroke_fraction)
    traj5, led5 = driven_run(
        Protocol((Segment(t5, 0.0),)), hot,
        dephasing_p=0.0 if spec.coherent else spec.dephasing_p,
        full_projection=(not spec.coherent) and spec.dephasing_p >= 1.0,
        rho0=rho5, record=True)
    rho1_next = traj5[-1][1]
    Qh = -led5.Q
    W5 = led5.W_drive + led5.W_interaction

    if spec.coherent:
        c_max = _stroke3_coherence_max(spec, rho2)
    else:
        # recorded dephased states are post-projection; measure, do not assume
        c_max = max(
            rel_entropy_coherence(state, h_alpha(seg.alpha, spec.omega_c))
            for seg, (_, state) in zip(protocol.segments, traj3[1:]))

    W_net = Qh - Qc
    eta = W_net / abs(Qh) if Qh != 0 else float("nan")
    ledger = CycleLedger(W1, W2, W3, W4, W5, Qh, Qc, W_net, eta,
                         W_net / spec.t_cycle, c_max)
    strokes = {"stroke3": traj3, "stroke5": traj5,
               "states": {"rho1": rho1, "rho2": rho2, "rho4": rho4, "rho5": rho5,
                          "rho1_next": rho1_next}}
    return rho1_next, ledger, strokes


def iterate_to_limit_cycle(spec: CycleSpec, tol: float = 1e-8, max_cycles: int = 10_000):
    """Iterate cycles until the cycle-start state stops changing.

    Returns (ledger, rho_start, n_cycles, converged) at the periodic steady
    cycle; ledger comes from one extra cycle run from the converged start.
    """
    rho = thermal_state(h_alpha(0.0, spec.omega_h), -spec.beta_h)
    converged = False
    n = 0
    for n in range(1, max_cycles + 1):
        rho_next, _, _ = run_cycle(spec, rho)
        if trace_distance(rho_next, rho) <= tol:
            rho = rho_next
            converged = True
            break
        rho = rho_next
    rho_out, ledger, _ = run_cycle(spec, rho)
    return ledger, rho, n, converged


def otto_efficiency(omega_c: float, omega_h: float) -> float:
    if omega_c <= 0 or omega_h <= 0:
        raise ValueError("gaps must be positive")
    return 1.0 - omega_c / omega_h


def analytic_Qh(spec: CycleSpec) -> float:
    """(omega_h/2)(tanh(beta_c omega_c/2) - tanh(beta_h omega_h/2))."""
    return 0.5 * spec.omega_h * (np.tanh(spec.beta_c * spec.omega_c / 2.0)
                                 - np.tanh(spec.beta_h * spec.omega_h / 2.0))


def _xseg_coefficients(spec: CycleSpec):
    """Exact constants of the sigma_x-segment Bloch dynamics.

    The (z, q) pair with q = i(rho01 - rho10) obeys
        dz/dt = omega q - eps^2 (z - b),  dq/dt = -omega z - (eps^2/2) q,
    giving envelope sigma = (3/4) eps^2, frequency Omega = sqrt(omega^2 -
    eps^4/16), steady offset S = (omega^2 + eps^4 e^{beta_c omega_c/2}/Z_c) /
    (2 omega^2 + eps^4), and a sine component seeded by q(0) = 0 != q_steady.
    """
    w, e2 = spec.omega_c, spec.eps2
    b = np.tanh(spec.beta_c * w / 2.0)
    sigma = 0.75 * e2
    delta = 0.25 * e2  # (pop - coh)/2 rate split
    disc = w * w - delta * delta
    if disc <= 0:
        raise ValueError("overdamped regime (Omega imaginary) is unsupported")
    Omega = np.sqrt(disc)
    z_st = e2 * e2 * b / (2.0 * w * w + e2 * e2)
    q_st = -2.0 * w * e2 * b / (2.0 * w * w + e2 * e2)
    Zh = 2.0 * np.cosh(spec.beta_h * spec.omega_h / 2.0)
    z0 = 2.0 * np.exp(-spec.beta_h * spec.omega_h / 2.0) / Zh - 1.0
    Zc_cos = z0 - z_st
    Zc_sin = (-delta * Zc_cos - w * q_st) / Omega
    return b, sigma, Omega, z_st, q_st, Zc_cos, Zc_sin


def analytic_rho00_x(t: float, spec: CycleSpec) -> float:
    """Excited population during the sigma_x segment of stroke 3.

    rho00(t) = e^{-sigma t} [B cos(Omega t) + B' sin(Omega t)] + S with the
    constants of _xseg_coefficients; B enforces rho00(0) =
    e^{-beta_h omega_h/2}/Z_h, the passive thermal start.
    """
    b, sigma, Omega, z_st, q_st, Zc, Zs = _xseg_coefficients(spec)
    z = np.exp(-sigma * t) * (Zc * np.cos(Omega * t) + Zs * np.sin(Omega * t)) + z_st
    return float(0.5 * (1.0 + z))


def analytic_Qc_full(spec: CycleSpec) -> float:
    """Closed-form heat into the cold bath over stroke 3 (z-phase to completion).

    Integrates the heat current (omega eps^2/2)(b - z(t)) over the x segment
    exactly and adds the z-segment total (omega/2)(b - z(t_d)).
    """
    w, e2, td = spec.omega_c, spec.eps2, spec.t_d
    b, sigma, Omega, z_st, q_st, Zc, Zs = _xseg_coefficients(spec)
    den = sigma * sigma + Omega * Omega
    etd = np.exp(-sigma * td)
    Ic = (sigma - etd * (sigma * np.cos(Omega * td) - Omega * np.sin(Omega * td))) / den
    Is = (Omega - etd * (sigma * np.sin(Omega * td) + Omega * np.cos(Omega * td))) / den
    Qx = 0.5 * w * e2 * ((b - z_st) * td - (Zc * Ic + Zs * Is))
    z_td = etd * (Zc * np.cos(Omega * td) + Zs * np.sin(Omega * td)) + z_st
    Qz = 0.5 * w * (b - z_td)
    return float(Qx + Qz)


def _check_weak_regime(spec: CycleSpec):
    r = spec.eps2 / spec.omega_c
    if r > 0.3:
        raise ValueError(f"eps^2/omega_c = {r:.3f} outside the weak-coupling regime")
    if r > 0.1:
        warnings.warn(f"eps^2/omega_c = {r:.3f} above 0.1; weak forms degrade",
                      stacklevel=2)


def analytic_Qc_weak(spec: CycleSpec) -> float:
    """First order in eps^2/omega_c with t_d ~ pi/omega_c:

    Qc = (omega_c/2)(b - a) + pi eps^2 (b/2 + 3a/8),
    a = tanh(beta_h omega_h/2), b = tanh(beta_c omega_c/2).
    """
    _check_weak_regime(spec)
    b = np.tanh(spec.beta_c * spec.omega_c / 2.0)
    a = np.tanh(spec.beta_h * spec.omega_h / 2.0)
    return float(0.5 * spec.omega_c * (b - a) + pi * spec.eps2 * (b / 2.0 + 3.0 * a / 8.0))


def efficiency_weak(spec: CycleSpec) -> float:
    """eta = eta_Otto - pi eps^2 (4b + 3a)/(16 |Qh|); never exceeds eta_Otto."""
    _check_weak_regime(spec)
    return 1.0 - abs(analytic_Qc_weak(spec)) / abs(analytic_Qh(spec))


def finite_time_sweep(spec: CycleSpec, t_cycles, tol: float = 1e-8,
                      max_cycles: int = 10_000):
    """Limit-cycle eta/power per duration for coherent and dephased variants.

    Returns (rows, window) where rows have keys t_cycle/variant/eta/power/
    W_net/converged and window is the list of durations with coherent
    W_net > 0 >= dephased W_net.
    """
    rows = []
    window = []
    for tc in t_cycles:
        if tc <= 0:
            raise ValueError("t_cycle values must be positive")
        per_variant = {}
        for variant in ("coherent", "dephased"):
            s = replace(spec, t_cycle=float(tc), coherent=(variant == "coherent"))
            ledger, _, n, converged = iterate_to_limit_cycle(s, tol, max_cycles)
            rows.append({
                "t_cycle": float(tc), "variant": variant, "eta": ledger.eta,
                "power": ledger.power, "W_net": ledger.W_net,
                "converged": converged, "cycles": n,
            })
            per_variant[variant] = ledger.W_net
        if per_variant["coherent"] > 0 >= per_variant["dephased"]:
            window.append(float(tc))
    return rows, window


def coherence_power_correlation(spec: CycleSpec, omega_h_values, beta_h_values,
                                tol: float = 1e-8):
    """(C_max, P_coherent - P_dephased) over an (omega_h, beta_h) grid.

    Returns (rows, spearman_rank_correlation).
    """
    rows = []
    for wh in omega_h_values:
        for bh in beta_h_values:
            s_c = replace(spec, omega_h=float(wh), beta_h=float(bh), coherent=True)
            s_d = replace(spec, omega_h=float(wh), beta_h=float(bh), coherent=False)
            led_c, _, _, _ = iterate_to_limit_cycle(s_c, tol)
            led_d, _, _, _ = iterate_to_limit_cycle(s_d, tol)
            rows.append({
                "omega_h": float(wh), "beta_h": float(bh),
                "C_max": led_c.coherence_max,
                "P_coherent": led_c.power, "P_dephased": led_d.power,
                "P_diff": led_c.power - led_d.power,
            })
    c = np.array([r["C_max"] for r in rows])
    d = np.array([r["P_diff"] for r in rows])
    return rows, spearman(c, d)


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman rank correlation (average ranks on ties)."""
    def ranks(a):
        order = np.argsort(a, kind="stable")
        r = np.empty(len(a))
        r[order] = np.arange(len(a), dtype=float)
        # average tied ranks
        vals, inv, counts = np.unique(a, return_inverse=True, return_counts=True)
        sums = np.zeros(len(vals))
        np.add.at(sums, inv, r)
        return sums[inv] / counts[inv]
    rx, ry = ranks(np.asarray(x, float)), ranks(np.asarray(y, float))
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    return float((rx * ry).sum() / denom) if denom > 0 else 0.0
