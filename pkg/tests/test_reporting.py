import json

import pytest

from foragersim.diagnostics import fit_decay_rate
from foragersim.model import (
    Constant,
    ConstantPlusCosine,
    EquilibriumInfo,
    InitialCondition,
    ModelParams,
    build_grid,
    equilibrium_w,
)
from foragersim.reporting import (
    TIMESERIES_HEADER,
    MarginInfo,
    build_summary,
    count_violations,
    write_snapshot,
    write_summary,
    write_timeseries,
)
from foragersim.stepping import StepControl, Trajectory, run_simulation

P = ModelParams(chi1=1.0, chi2=1.0, d=1.0, lam=1.0, mu=1.0, r=1.0)


def homogeneous_traj(t_end=0.5, n=16):
    g = build_grid(n, 1.0)
    wstar = equilibrium_w(P, 0.6, 0.4)
    ic = InitialCondition(u=Constant(0.6), v=Constant(0.4), w=Constant(wstar))
    ctrl = StepControl(t_end=t_end, output_every=0.1, steady_tol=1e-30)
    return run_simulation(ic, P, g, ctrl), g


def perturbed_traj(t_end=1.0, n=32):
    g = build_grid(n, 1.0)
    ic = InitialCondition(
        u=ConstantPlusCosine(base=0.9, amplitude=0.01, mode=1),
        v=ConstantPlusCosine(base=0.1, amplitude=0.01, mode=1),
        w=Constant(0.5),
    )
    ctrl = StepControl(t_end=t_end, output_every=0.05, steady_tol=1e-30)
    return run_simulation(ic, P, g, ctrl), g


class TestTimeseries:
    def test_empty_trajectory_header_only(self, tmp_path):
        traj, g = homogeneous_traj()
        empty = Trajectory(
            records=[], snapshots=[], termination="reached_t_end",
            equilibrium=traj.equilibrium, final_state=traj.final_state,
            w0_max=traj.w0_max,
        )
        path = write_timeseries(empty, str(tmp_path))
        lines = open(path).read().splitlines()
        assert lines == [TIMESERIES_HEADER]

    def test_homogeneous_run_deviation_columns_at_roundoff_floor(self, tmp_path):
        # the implicit solves leave the constant state only up to a few ulps,
        # so the written deviations sit at the roundoff floor, not literal 0.0
        traj, _ = homogeneous_traj()
        path = write_timeseries(traj, str(tmp_path))
        lines = open(path).read().splitlines()
        header = lines[0].split(",")
        for row in lines[1:]:
            cells = dict(zip(header, row.split(",")))
            assert abs(float(cells["linf_dev_u"])) <= 1e-13
            assert abs(float(cells["linf_dev_v"])) <= 1e-13
            assert abs(float(cells["linf_dev_w"])) <= 1e-13
            assert float(cells["mass_u"]) == pytest.approx(0.6, abs=1e-14)

    def test_column_count_matches_header_on_every_row(self, tmp_path):
        traj, _ = perturbed_traj()
        path = write_timeseries(traj, str(tmp_path))
        lines = open(path).read().splitlines()
        width = len(lines[0].split(","))
        assert width == 24
        assert all(len(row.split(",")) == width for row in lines[1:])
        assert len(lines) == len(traj.records) + 1

    def test_full_precision_round_trip(self, tmp_path):
        traj, _ = perturbed_traj()
        path = write_timeseries(traj, str(tmp_path))
        lines = open(path).read().splitlines()
        header = lines[0].split(",")
        first = dict(zip(header, lines[1].split(",")))
        assert float(first["mass_u"]) == traj.records[0].mass_u
        assert float(first["F"]) == traj.records[0].energy
        assert float(first["D"]) == traj.records[0].dissipation

    def test_deterministic_bytes(self, tmp_path):
        t1, _ = perturbed_traj()
        t2, _ = perturbed_traj()
        p1 = write_timeseries(t1, str(tmp_path / "a"))
        p2 = write_timeseries(t2, str(tmp_path / "b"))
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestSnapshots:
    def test_snapshot_schema(self, tmp_path):
        traj, g = homogeneous_traj()
        path = write_snapshot(traj.final_state, g, str(tmp_path))
        lines = open(path).read().splitlines()
        assert lines[0] == "x,u,v,w"
        assert len(lines) == g.n + 1
        x0 = float(lines[1].split(",")[0])
        assert x0 == pytest.approx(g.dx / 2)


class TestSummary:
    def test_summary_wstar_bit_identical(self, tmp_path):
        traj, _ = homogeneous_traj()
        path = write_summary(traj, P, None, traj.equilibrium, None, 0.5, str(tmp_path))
        doc = json.load(open(path))
        assert doc["equilibrium"]["wstar"] == equilibrium_w(P, 0.6, 0.4)
        assert doc["converged"] in (True, False)

    def test_summary_rejects_mismatched_equilibrium(self, tmp_path):
        traj, _ = homogeneous_traj()
        wrong = EquilibriumInfo(ubar0=0.6, vbar0=0.4, wstar=0.123)
        with pytest.raises(ValueError):
            write_summary(traj, P, None, wrong, None, 0.5, str(tmp_path))

    def test_summary_fields(self, tmp_path):
        traj, _ = perturbed_traj()
        fit = fit_decay_rate(
            [r.t for r in traj.records], [r.linf_dev_u for r in traj.records], 0.5
        )
        margin = MarginInfo(margin=123.0, normalized=True)
        path = write_summary(traj, P, fit, traj.equilibrium, margin, 0.5, str(tmp_path))
        doc = json.load(open(path))
        assert set(doc) == {
            "termination", "converged", "error", "t_final", "records",
            "final_deviations", "equilibrium", "decay_fit", "stability",
            "energy", "invariant_violations",
        }
        assert doc["decay_fit"]["alpha"] == fit.alpha
        assert doc["stability"]["margin"] == 123.0
        assert doc["termination"] == "reached_t_end"
        assert doc["converged"] is False
        assert doc["final_deviations"]["u"] == traj.records[-1].linf_dev_u
        assert doc["invariant_violations"]["w_bound"] == 0
        assert doc["invariant_violations"]["positivity"] == 0

    def test_violation_counts_clean_run(self):
        traj, _ = perturbed_traj()
        counts = count_violations(traj, P)
        assert all(v == 0 for v in counts.values())

    def test_build_summary_without_records(self):
        traj, _ = homogeneous_traj()
        empty = Trajectory(
            records=[], snapshots=[], termination="error",
            equilibrium=traj.equilibrium, final_state=traj.final_state,
            w0_max=traj.w0_max, error_message="boom",
        )
        doc = build_summary(empty, P, None, None, 0.5)
        assert doc["t_final"] is None
        assert doc["error"] == "boom"
