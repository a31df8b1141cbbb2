import numpy as np
import pytest

from qbdissim.collision import CollisionSpec, charging_interaction
from qbdissim.control import (
    DriveParams,
    Protocol,
    Segment,
    constant_protocol,
    dephase,
    double_quench,
    driven_run,
    generator,
    h_alpha,
    optimize_protocol,
    propagate_protocol,
)
from qbdissim.lindblad import liouvillian, propagate
from qbdissim.qcore import (
    DensityMatrix,
    SIGMA_X,
    SIGMA_Z,
    matrix_exp,
    qubit_hamiltonian,
    rel_entropy_coherence,
    thermal_state,
    trace_distance,
    vec,
)
from conftest import random_density

OMEGA, EPS, BETA = 1.5, 0.5, 1.0
PARAMS = DriveParams(OMEGA, EPS, BETA)


class TestHamiltonian:
    def test_alpha_zero(self):
        assert np.abs(h_alpha(0.0, OMEGA) - 0.5 * OMEGA * SIGMA_Z).max() == 0.0

    def test_alpha_one(self):
        assert np.abs(h_alpha(1.0, OMEGA) - 0.5 * OMEGA * SIGMA_X).max() == 0.0

    def test_alpha_half_eigenvalues(self):
        w = np.linalg.eigvalsh(h_alpha(0.5, OMEGA))
        expected = OMEGA / (2 * np.sqrt(2))
        assert np.allclose(np.sort(w), [-expected, expected])

    def test_alpha_out_of_range(self):
        with pytest.raises(ValueError):
            h_alpha(1.2, OMEGA)


class TestGenerator:
    def test_trace_preservation_columns(self):
        for alpha in (0.0, 0.3, 1.0):
            M = generator(alpha, OMEGA, EPS, BETA).entries
            pop_rows = M[0] + M[3]
            assert np.abs(pop_rows).max() < 1e-14

    def test_alpha_zero_equals_single_battery_liouvillian(self):
        H = qubit_hamiltonian(OMEGA)
        L = liouvillian(CollisionSpec(H, H, charging_interaction(), EPS, 1e-3, BETA))
        M = generator(0.0, OMEGA, EPS, BETA)
        assert np.abs(M.entries - L.generator.entries).max() < 1e-14

    def test_coherence_entries(self):
        # coherence decay eps^2/2 with phase -i omega (1 - alpha); this is the
        # collision-model rate (the displayed matrix's eps^2/4 is half of it,
        # inconsistent with its own tau_par = 1/eps^2)
        for alpha in (0.0, 0.4):
            M = generator(alpha, OMEGA, EPS, BETA).entries
            assert abs(M[1, 1] - (-EPS**2 / 2 - 1j * OMEGA * (1 - alpha))) < 1e-14
            assert abs(M[2, 2] - (-EPS**2 / 2 + 1j * OMEGA * (1 - alpha))) < 1e-14
            assert M[1, 2] == 0.0 and M[2, 1] == 0.0

    def test_exp_agrees_with_lindblad_propagate(self, rng):
        H = qubit_hamiltonian(OMEGA)
        L = liouvillian(CollisionSpec(H, H, charging_interaction(), EPS, 1e-3, BETA))
        M = generator(0.0, OMEGA, EPS, BETA)
        rho = random_density(rng, 2)
        for t in (0.5, 2.0):
            via_m = matrix_exp(M.entries * t) @ vec(rho.entries)
            via_l = vec(propagate(L, rho, t).entries)
            assert np.abs(via_m - via_l).max() < 1e-10

    def test_hamiltonian_part_is_commutator(self, rng):
        # alpha couplings match -i[H(alpha), rho] exactly
        alpha = 0.7
        M = generator(alpha, OMEGA, 0.0, BETA).entries
        rho = random_density(rng, 2).entries
        H = h_alpha(alpha, OMEGA)
        got = (M @ vec(rho)).reshape(2, 2)
        want = -1j * (H @ rho - rho @ H)
        assert np.abs(got - want).max() < 1e-13


class TestPropagateProtocol:
    def test_vanishing_duration_returns_initial_state(self, rng):
        rho0 = random_density(rng, 2)
        traj = propagate_protocol(Protocol((Segment(1e-12, 0.7),)), rho0, PARAMS)
        assert trace_distance(traj[-1][1], rho0) < 1e-10

    def test_constant_alpha_zero_matches_relaxation_law(self):
        # populations follow the single-exponential law with tau = 1/eps^2
        rho0 = thermal_state(h_alpha(0.0, OMEGA), BETA)
        H = h_alpha(0.0, OMEGA)
        e0 = np.trace(rho0.entries @ H).real
        e_ss = np.trace(thermal_state(H, -BETA).entries @ H).real
        traj = propagate_protocol(constant_protocol(6.0, 0.0), rho0, PARAMS,
                                  samples_per_segment=12)
        for t, state in traj[1:]:
            e_t = np.trace(state.entries @ H).real
            expected = e_ss + (e0 - e_ss) * np.exp(-EPS**2 * t)
            assert abs(e_t - expected) < 1e-10

    def test_double_quench_charges_faster(self):
        # stored energy strictly above the constant-alpha curve at
        # intermediate times
        rho0 = thermal_state(h_alpha(0.0, OMEGA), BETA)
        H = h_alpha(0.0, OMEGA)
        dq = propagate_protocol(double_quench(2.0, 8.0), rho0, PARAMS,
                                samples_per_segment=8)
        const = propagate_protocol(constant_protocol(8.0, 0.0), rho0, PARAMS,
                                   samples_per_segment=16)
        e_dq = {round(t, 9): np.trace(s.entries @ H).real for t, s in dq}
        e_c = {round(t, 9): np.trace(s.entries @ H).real for t, s in const}
        shared = sorted(set(e_dq) & set(e_c))
        mid = [t for t in shared if 1.0 <= t <= 7.5]
        assert mid and all(e_dq[t] > e_c[t] for t in mid)

    def test_protocol_json_roundtrip(self):
        p = double_quench(2.0, 8.0)
        q = Protocol.from_json(p.to_json())
        assert q.segments == p.segments


class TestDephase:
    def test_p_zero_is_identity(self, rng):
        rho = random_density(rng, 2)
        out = dephase(rho, 0.0, h_alpha(0.0, OMEGA))
        assert trace_distance(out, rho) < 1e-14

    def test_energy_diagonal_state_fixed(self):
        rho = DensityMatrix(np.diag([0.2, 0.8]).astype(complex))
        out = dephase(rho, 1.0, h_alpha(0.0, OMEGA))
        assert trace_distance(out, rho) < 1e-14

    def test_p_one_halves_coherences(self):
        plus = DensityMatrix(0.5 * np.ones((2, 2), dtype=complex))
        out = dephase(plus, 1.0, h_alpha(0.0, OMEGA))
        # (1/2)|+><+| + (1/2) I/2: off-diagonals halved
        assert abs(out.entries[0, 1] - 0.25) < 1e-14
        assert abs(out.entries[0, 0] - 0.5) < 1e-14

    def test_energy_never_changes(self, rng):
        for alpha in (0.0, 0.6, 1.0):
            H = h_alpha(alpha, OMEGA)
            for p in (0.1, 0.5, 1.0):
                rho = random_density(rng, 2)
                out = dephase(rho, p, H)
                de = np.trace(H @ (out.entries - rho.entries)).real
                assert abs(de) < 1e-12

    def test_p_out_of_range(self, rng):
        with pytest.raises(ValueError):
            dephase(random_density(rng, 2), 1.5, h_alpha(0.0, OMEGA))


class TestDrivenRun:
    def test_constant_alpha_heat_efficiency_half(self):
        # alpha = 0, p = 0: no drive work, eta_heat -> 1/2 at full charge
        _, led = driven_run(constant_protocol(80.0, 0.0), PARAMS)
        assert abs(led.W_drive) < 1e-12
        W = led.W_drive + led.W_interaction
        assert abs((1 - led.Q / W) - 0.5) < 1e-3

    def test_first_law_closes(self):
        for p in (0.0, 0.4, 1.0):
            _, led = driven_run(double_quench(2.0, 10.0), PARAMS, dephasing_p=p)
            assert abs(led.W_drive + led.W_interaction - led.dE - led.Q) < 1e-8

    def test_double_quench_beats_constant(self):
        # both power (dE/t) and ergotropy-per-work exceed the undriven run
        t_total = 8.0
        _, led_dq = driven_run(double_quench(2.0, t_total), PARAMS)
        _, led_c = driven_run(constant_protocol(t_total, 0.0), PARAMS)
        W_dq = led_dq.W_drive + led_dq.W_interaction
        W_c = led_c.W_drive + led_c.W_interaction
        assert led_dq.dE / led_c.dE > 1.0
        assert (led_dq.ergotropy_final / W_dq) / (led_c.ergotropy_final / W_c) > 1.0

    def test_dephasing_monotonically_degrades(self):
        t_total = 8.0
        powers, etas = [], []
        for p in np.arange(0.0, 1.01, 0.2):
            _, led = driven_run(double_quench(2.0, t_total), PARAMS,
                                dephasing_p=float(p))
            W = led.W_drive + led.W_interaction
            powers.append(led.dE / t_total)
            etas.append(led.ergotropy_final / W)
        assert all(a >= b - 1e-9 for a, b in zip(powers, powers[1:]))
        assert all(a >= b - 1e-9 for a, b in zip(etas, etas[1:]))

    def test_fully_dephased_still_beats_constant(self):
        t_total = 10.0
        _, led_d = driven_run(double_quench(2.0, t_total), PARAMS,
                              dephasing_p=1.0, full_projection=True)
        _, led_c = driven_run(constant_protocol(t_total, 0.0), PARAMS)
        W_d = led_d.W_drive + led_d.W_interaction
        W_c = led_c.W_drive + led_c.W_interaction
        assert led_d.ergotropy_final / W_d > led_c.ergotropy_final / W_c

    def test_coherence_witness(self):
        # coherence is positive strictly between the quenches and absent for
        # the undriven protocol
        rho0 = thermal_state(h_alpha(0.0, OMEGA), BETA)
        traj = propagate_protocol(double_quench(2.0, 8.0), rho0, PARAMS,
                                  samples_per_segment=5)
        during = [rel_entropy_coherence(s, h_alpha(1.0, OMEGA))
                  for t, s in traj if 0 < t < 2.0]
        assert all(c > 1e-4 for c in during)
        traj_c = propagate_protocol(constant_protocol(8.0, 0.0), rho0, PARAMS,
                                    samples_per_segment=8)
        for t, s in traj_c:
            assert rel_entropy_coherence(s, h_alpha(0.0, OMEGA)) < 1e-12

    def test_heat_matches_collision_accounting(self):
        # the augmented-propagator heat integral agrees with the ancilla
        # energy bookkeeping of the collision engine, to O(dt)
        from qbdissim.collision import CollisionSpec, charging_interaction, run_repeated

        H = qubit_hamiltonian(OMEGA)
        rho0 = thermal_state(H, BETA)
        t_total = 4.0
        _, led_gen = driven_run(constant_protocol(t_total, 0.0), PARAMS, rho0=rho0)
        diffs = []
        for dt in (4e-3, 2e-3):
            spec = CollisionSpec(H, H, charging_interaction(), EPS, dt, BETA)
            _, led_col = run_repeated(rho0, spec, round(t_total / dt),
                                      record_every=10**9)
            diffs.append(abs(led_col.heat - led_gen.Q))
        assert diffs[0] < 1e-4
        assert 1.6 <= diffs[0] / diffs[1] <= 2.4  # O(dt) agreement

    def test_strong_coupling_reversal(self):
        # at eps^2 >= 4 the coherent-over-constant power ratio drops below
        # its weak-coupling value
        def ratio(eps):
            params = DriveParams(OMEGA, eps, BETA)
            _, dq = driven_run(double_quench(2.0, 8.0), params)
            _, c = driven_run(constant_protocol(8.0, 0.0), params)
            return dq.dE / c.dE

        assert ratio(2.0) < ratio(EPS)  # eps^2 = 4 vs 0.25


class TestOptimizer:
    def test_gradient_matches_independent_central_difference(self, rng):
        # cached-propagator gradient vs a naive full-propagation stencil
        n_seg = 6
        dt = 0.8
        rho0 = thermal_state(h_alpha(0.0, OMEGA), BETA)

        def objective(alphas):
            segs = tuple(Segment(dt, float(np.clip(a, 0, 1))) for a in alphas)
            traj = propagate_protocol(Protocol(segs), rho0, PARAMS)
            return traj[-1][1].entries[0, 0].real

        from qbdissim.control import generator as gen
        from qbdissim.qcore import matrix_exp as expm

        def cached_gradient(alphas):
            props = [expm(gen(a, OMEGA, EPS, BETA).entries * dt) for a in alphas]
            prefix = [vec(rho0.entries)]
            for P in props[:-1]:
                prefix.append(P @ prefix[-1])
            suffix = [None] * (len(alphas) + 1)
            suffix[len(alphas)] = np.array([1, 0, 0, 0], dtype=complex)
            for k in range(len(alphas) - 1, 0, -1):
                suffix[k] = suffix[k + 1] @ props[k]
            g = np.zeros(len(alphas))
            h = 1e-6
            for k in range(len(alphas)):
                up = expm(gen(min(alphas[k] + h, 1), OMEGA, EPS, BETA).entries * dt)
                dn = expm(gen(max(alphas[k] - h, 0), OMEGA, EPS, BETA).entries * dt)
                span = min(alphas[k] + h, 1) - max(alphas[k] - h, 0)
                g[k] = (suffix[k + 1] @ ((up - dn) / span @ prefix[k])).real
            return g

        for _ in range(20):
            alphas = rng.uniform(0.05, 0.95, size=n_seg)
            g_fast = cached_gradient(alphas)
            h = 1e-7
            g_naive = np.zeros(n_seg)
            for k in range(n_seg):
                ap = alphas.copy()
                am = alphas.copy()
                ap[k] += h
                am[k] -= h
                g_naive[k] = (objective(ap) - objective(am)) / (2 * h)
            scale = max(np.abs(g_naive).max(), 1e-12)
            assert np.abs(g_fast - g_naive).max() / scale < 1e-4

    def test_constant_zero_is_stationary(self):
        # the undriven protocol generates no coherence, so the population
        # gradient vanishes identically; the finite-difference residual is a
        # pure O(h) curvature artifact and must shrink linearly with h
        from qbdissim.control import generator as gen

        dt = 0.75
        rho0 = thermal_state(h_alpha(0.0, OMEGA), BETA)

        def fd_grad(h):
            base = vec(rho0.entries)
            P0 = matrix_exp(gen(0.0, OMEGA, EPS, BETA).entries * dt)
            for _ in range(8):
                base = P0 @ base
            worst = 0.0
            for k in range(8):
                pert = vec(rho0.entries)
                for i in range(8):
                    a = h if i == k else 0.0
                    pert = matrix_exp(gen(a, OMEGA, EPS, BETA).entries * dt) @ pert
                worst = max(worst, abs((pert[0].real - base[0].real) / h))
            return worst

        g6, g7 = fd_grad(1e-6), fd_grad(1e-7)
        assert g7 < 1e-7
        assert g7 < 0.2 * g6  # linear-in-h artifact, not a real gradient

    def test_optimizer_beats_feasible_baseline(self):
        # any-seed sanity: optimized final population >= the alpha == 0 value
        res = optimize_protocol(6.0, 12, PARAMS, seed=11, max_iter=800,
                                restarts=2)
        rho0 = thermal_state(h_alpha(0.0, OMEGA), BETA)
        traj = propagate_protocol(constant_protocol(6.0, 0.0), rho0, PARAMS)
        baseline = traj[-1][1].entries[0, 0].real
        assert res.objective >= baseline - 1e-9

    def test_requires_two_segments(self):
        with pytest.raises(ValueError):
            optimize_protocol(4.0, 1, PARAMS)
