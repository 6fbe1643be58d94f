import numpy as np
import pytest

from foragersim.diagnostics import EnergyConfig
from foragersim.model import (
    Constant,
    ConstantPlusCosine,
    FieldState,
    FromFile,
    GaussianBump,
    InitialCondition,
    ModelParams,
    build_grid,
    equilibrium_w,
    init_state,
    mass_and_mean,
)
from foragersim.stepping import (
    StepControl,
    cfl_dt,
    imex_step,
    run_simulation,
)

P = ModelParams(chi1=1.0, chi2=1.0, d=1.0, lam=1.0, mu=1.0, r=1.0)


def homogeneous_ic(p, ubar=0.6, vbar=0.4):
    wstar = equilibrium_w(p, ubar, vbar)
    return InitialCondition(u=Constant(ubar), v=Constant(vbar), w=Constant(wstar))


class TestCflDt:
    def test_homogeneous_state_hits_dt_max(self):
        g = build_grid(16, 1.0)
        state = init_state(homogeneous_ic(P), g)
        ctrl = StepControl(t_end=1.0, dt_max=0.02)
        assert cfl_dt(state, P, g, ctrl) == 0.02

    def test_hand_value(self):
        # w jumps by 0.1 across one dx=0.1 face: gradient 1; chi1=2 -> speed 2
        g = build_grid(10, 1.0)
        w = np.ones(10)
        w[5:] += 0.1
        state = FieldState(0.0, np.ones(10), np.ones(10), w)
        p = ModelParams(chi1=2.0, chi2=1.0, d=1.0, lam=1.0, mu=1.0, r=1.0)
        ctrl = StepControl(t_end=1.0, dt_max=1e9, safety=0.5)
        assert cfl_dt(state, p, g, ctrl) == pytest.approx(0.025)

    def test_safety_scales_linearly(self):
        g = build_grid(10, 1.0)
        u = np.linspace(0.5, 1.5, 10)
        state = FieldState(0.0, u, np.ones(10), np.ones(10))
        full = cfl_dt(state, P, g, StepControl(t_end=1.0, dt_max=1e9, safety=1.0))
        half = cfl_dt(state, P, g, StepControl(t_end=1.0, dt_max=1e9, safety=0.5))
        assert half == pytest.approx(0.5 * full)


class TestImexStep:
    def test_homogeneous_steady_state_is_fixed(self):
        g = build_grid(64, 1.0)
        state = init_state(homogeneous_ic(P), g)
        wstar = state.w[0]
        for _ in range(100):
            state = imex_step(state, P, g, 0.01)
        assert np.max(np.abs(state.u - 0.6)) <= 1e-13
        assert np.max(np.abs(state.v - 0.4)) <= 1e-13
        assert np.max(np.abs(state.w - wstar)) <= 1e-13

    def test_effectively_pure_diffusion_is_monotone(self):
        # vanishing taxis and consumption: u, v behave as heat equations
        p = ModelParams(chi1=1e-300, chi2=1e-300, d=1.0, lam=1e-300, mu=1.0, r=0.0)
        g = build_grid(32, 1.0)
        ic = InitialCondition(
            u=GaussianBump(center=0.5, width=0.05, height=2.0, baseline=0.1),
            v=GaussianBump(center=0.3, width=0.08, height=1.0, baseline=0.2),
            w=Constant(1.0),
        )
        state = init_state(ic, g)
        mass_u0, _ = mass_and_mean(state.u, g)
        sup_prev = state.u.max()
        for _ in range(50):
            state = imex_step(state, p, g, 0.005)
            assert state.u.max() <= sup_prev + 1e-13
            sup_prev = state.u.max()
        mass_u, _ = mass_and_mean(state.u, g)
        assert mass_u == pytest.approx(mass_u0, rel=1e-13)

    def test_single_step_matches_dense_oracle(self):
        # independent evaluation: dense backward-Euler matrices + explicit
        # donor-cell arithmetic, no shared code with the stepper
        n = 4
        g = build_grid(n, 1.0)
        dx = g.dx
        p = ModelParams(chi1=0.8, chi2=1.1, d=0.7, lam=0.9, mu=0.6, r=0.4)
        u = np.array([0.2, 1.0, 0.5, 0.3])
        v = np.array([0.4, 0.1, 0.8, 0.6])
        w = np.array([1.2, 0.5, 0.9, 1.4])
        dt = 0.02

        def upwind_tendency(dens, pot, chi):
            flux = np.zeros(n + 1)
            for j in range(n - 1):
                vel = chi * (pot[j + 1] - pot[j]) / dx
                donor = dens[j] if vel > 0 else dens[j + 1] if vel < 0 else 0.5 * (dens[j] + dens[j + 1])
                flux[j + 1] = vel * donor
            return -(flux[1:] - flux[:-1]) / dx

        lap = np.zeros((n, n))
        for i in range(n):
            lap[i, i] = -2.0
            if i > 0:
                lap[i, i - 1] = 1.0
            if i < n - 1:
                lap[i, i + 1] = 1.0
        lap[0, 0] = -1.0
        lap[-1, -1] = -1.0
        lap /= dx**2

        u_star = u + dt * upwind_tendency(u, w, p.chi1)
        v_star = v + dt * upwind_tendency(v, u, p.chi2)
        eye = np.eye(n)
        u_exp = np.linalg.solve(eye / dt - lap, u_star / dt)
        v_exp = np.linalg.solve(eye / dt - lap, v_star / dt)
        absorb = p.lam * (u_exp + v_exp) + p.mu
        w_exp = np.linalg.solve(eye / dt - p.d * lap + np.diag(absorb), w / dt + p.r)

        new = imex_step(FieldState(0.0, u, v, w), p, g, dt)
        assert np.max(np.abs(new.u - u_exp)) <= 1e-12
        assert np.max(np.abs(new.v - v_exp)) <= 1e-12
        assert np.max(np.abs(new.w - w_exp)) <= 1e-12
        assert new.t == pytest.approx(dt)

    def test_masses_conserved_over_many_steps(self):
        g = build_grid(64, 1.0)
        ic = InitialCondition(
            u=ConstantPlusCosine(base=0.7, amplitude=0.2, mode=1),
            v=ConstantPlusCosine(base=0.3, amplitude=0.1, mode=2),
            w=GaussianBump(center=0.5, width=0.1, height=1.0, baseline=0.5),
        )
        state = init_state(ic, g)
        mu0, _ = mass_and_mean(state.u, g)
        mv0, _ = mass_and_mean(state.v, g)
        for _ in range(500):
            dt = cfl_dt(state, P, g, StepControl(t_end=10.0, dt_max=0.01))
            state = imex_step(state, P, g, dt)
        mu1, _ = mass_and_mean(state.u, g)
        mv1, _ = mass_and_mean(state.v, g)
        assert abs(mu1 - mu0) <= 1e-12 * mu0
        assert abs(mv1 - mv0) <= 1e-12 * mv0

    def test_positivity_and_nutrient_bound_on_rough_run(self):
        g = build_grid(48, 1.0)
        p = ModelParams(chi1=2.0, chi2=3.0, d=0.5, lam=1.5, mu=0.8, r=0.6)
        ic = InitialCondition(
            u=GaussianBump(center=0.2, width=0.04, height=3.0, baseline=0.0),
            v=GaussianBump(center=0.8, width=0.05, height=2.0, baseline=0.0),
            w=GaussianBump(center=0.5, width=0.2, height=1.5, baseline=0.2),
        )
        state = init_state(ic, g)
        w0_max = state.w.max()
        t = 0.0
        for _ in range(400):
            dt = cfl_dt(state, p, g, StepControl(t_end=10.0, dt_max=0.005))
            state = imex_step(state, p, g, dt)
            t += dt
            assert state.u.min() >= 0.0 and state.v.min() >= 0.0
            assert state.w.min() > 0.0
            bound = p.r / p.mu + w0_max * np.exp(-p.mu * t)
            assert state.w.max() <= bound + 1e-8 * (p.r / p.mu + w0_max)

    def test_rejects_nonpositive_dt(self):
        g = build_grid(8, 1.0)
        state = init_state(homogeneous_ic(P), g)
        with pytest.raises(ValueError):
            imex_step(state, P, g, 0.0)


class TestRunSimulation:
    def test_homogeneous_terminates_steady_at_first_possible_check(self):
        g = build_grid(32, 1.0)
        ctrl = StepControl(t_end=50.0, output_every=0.1, steady_tol=1e-9)
        traj = run_simulation(homogeneous_ic(P), P, g, ctrl)
        assert traj.termination == "steady_state"
        # two consecutive records are needed
        assert traj.final_state.t == pytest.approx(0.2)
        assert len(traj.records) == 2

    def test_short_run_emits_exactly_one_final_record(self):
        g = build_grid(16, 1.0)
        ic = InitialCondition(
            u=ConstantPlusCosine(base=1.0, amplitude=0.1, mode=1),
            v=Constant(0.5),
            w=Constant(1.0),
        )
        ctrl = StepControl(t_end=0.1, output_every=10.0, steady_tol=1e-30)
        traj = run_simulation(ic, P, g, ctrl)
        assert traj.termination == "reached_t_end"
        assert len(traj.records) == 1
        assert traj.records[0].t == pytest.approx(0.1)

    def test_record_times_strictly_increasing_on_cadence(self):
        g = build_grid(32, 1.0)
        ic = InitialCondition(
            u=ConstantPlusCosine(base=1.0, amplitude=0.05, mode=1),
            v=Constant(0.5),
            w=Constant(1.0),
        )
        ctrl = StepControl(t_end=0.75, output_every=0.1, steady_tol=1e-30)
        traj = run_simulation(ic, P, g, ctrl)
        times = [rec.t for rec in traj.records]
        assert times == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75])
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_snapshots_at_requested_times(self):
        g = build_grid(16, 1.0)
        ic = homogeneous_ic(P)
        ctrl = StepControl(
            t_end=0.5, output_every=0.2, steady_tol=1e-30, snapshot_times=(0.0, 0.13, 0.5)
        )
        traj = run_simulation(ic, P, g, ctrl)
        assert [s.t for s in traj.snapshots] == pytest.approx([0.0, 0.13, 0.5])

    def test_invariant_violation_reports_error_with_last_good_state(self, tmp_path):
        # a cell-scale nutrient dip with safety=1 makes the donor-cell update
        # lose through both faces and go negative
        n = 8
        g = build_grid(n, 1.0)
        u = np.zeros(n)
        u[4] = 1.0
        np.savetxt(tmp_path / "u.txt", u)
        w = np.ones(n)
        w[4] = 0.05
        np.savetxt(tmp_path / "w.txt", w)
        ic = InitialCondition(
            u=FromFile(str(tmp_path / "u.txt")),
            v=Constant(0.5),
            w=FromFile(str(tmp_path / "w.txt")),
        )
        p = ModelParams(chi1=50.0, chi2=1e-9, d=1e-9, lam=1e-9, mu=1e-9, r=0.0)
        ctrl = StepControl(t_end=1.0, output_every=0.01, safety=1.0, dt_max=1.0, steady_tol=1e-30)
        traj = run_simulation(ic, p, g, ctrl)
        assert traj.termination == "error"
        assert "negative at cell" in traj.error_message
        traj.final_state.check_invariants(neg_tol=1e-12)  # last good state

    def test_refinement_decreases_error(self):
        # coarse solutions approach a finer-grid, finer-step reference
        p = ModelParams(chi1=1.0, chi2=1.0, d=0.5, lam=0.5, mu=0.5, r=0.25)

        def final_state(n, dt, t_end=0.1):
            g = build_grid(n, 1.0)
            ic = InitialCondition(
                u=ConstantPlusCosine(base=1.0, amplitude=0.01, mode=1),
                v=ConstantPlusCosine(base=0.5, amplitude=0.01, mode=2),
                w=ConstantPlusCosine(base=1.0, amplitude=0.01, mode=1),
            )
            state = init_state(ic, g)
            for _ in range(int(round(t_end / dt))):
                state = imex_step(state, p, g, dt)
            return state

        ref = final_state(512, 2.5e-4)

        def err(n, dt):
            s = final_state(n, dt)
            f = 512 // n
            return max(
                np.max(np.abs(getattr(s, c) - getattr(ref, c).reshape(-1, f).mean(axis=1)))
                for c in "uvw"
            )

        e_coarse = err(32, 4e-3)
        e_fine = err(128, 1e-3)
        assert e_fine < e_coarse

    def test_energy_config_is_accepted(self):
        g = build_grid(16, 1.0)
        traj = run_simulation(
            homogeneous_ic(P), P, g,
            StepControl(t_end=0.3, output_every=0.1, steady_tol=1e-30),
            EnergyConfig(b_mode=2.0),
        )
        assert all(rec.b_used == 2.0 for rec in traj.records)
