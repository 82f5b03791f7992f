"""End-to-end checks for the bundled preset configurations.

Each preset is loaded, validated, and run through the experiment runner
exactly once per session (see ``conftest.preset_run``); the tests here then
assert the documented outcome of each preset and the runtime budget.
"""

from aggdiff import io_csv

RUNTIME_BUDGET_SECONDS = 300.0


def _diagnostics(outdir):
    return io_csv.read_diagnostics_csv(outdir / "diagnostics.csv")


class TestStabilityEps0002:
    def test_completes_within_budget(self, preset_run):
        _, _, _, elapsed = preset_run("stability-eps0.002")
        assert elapsed < RUNTIME_BUDGET_SECONDS

    def test_artifacts_present(self, preset_run):
        config, _, outdir, _ = preset_run("stability-eps0.002")
        assert (outdir / "diagnostics.csv").exists()
        assert (outdir / "summary.csv").exists()
        for t in config.snapshot_times:
            assert (outdir / io_csv.snapshot_filename(t)).exists()

    def test_final_distance_to_steady_below_1e3(self, preset_run):
        _, summary, _, _ = preset_run("stability-eps0.002")
        assert summary["final_w2_to_ref"] < 1e-3

    def test_distance_series_decreases(self, preset_run):
        _, _, outdir, _ = preset_run("stability-eps0.002")
        rows = _diagnostics(outdir)
        w2 = [row.w2_to_ref for row in rows]
        assert w2[-1] < 0.1 * w2[0]


class TestDecayEps2:
    def test_completes_within_budget(self, preset_run):
        _, _, _, elapsed = preset_run("decay-eps2")
        assert elapsed < RUNTIME_BUDGET_SECONDS

    def test_peak_height_monotone_decreasing(self, preset_run):
        _, _, outdir, _ = preset_run("decay-eps2")
        rows = _diagnostics(outdir)
        linf = [row.linf for row in rows]
        assert all(b < a for a, b in zip(linf, linf[1:]))

    def test_profile_spreads(self, preset_run):
        _, summary, outdir, _ = preset_run("decay-eps2")
        rows = _diagnostics(outdir)
        assert summary["m2_increased"] == "yes"
        assert rows[-1].m2 > rows[0].m2


class TestOscillatingDelta005:
    def test_completes_within_budget(self, preset_run):
        _, _, _, elapsed = preset_run("oscillating-eps0.5-delta0.05")
        assert elapsed < RUNTIME_BUDGET_SECONDS

    def test_artifacts_present(self, preset_run):
        config, _, outdir, _ = preset_run("oscillating-eps0.5-delta0.05")
        assert (outdir / "diagnostics.csv").exists()
        assert (outdir / "trajectory.csv").exists()
        for t in config.snapshot_times:
            assert (outdir / io_csv.snapshot_filename(t)).exists()

    def test_second_moment_rises_on_initial_window(self, preset_run):
        _, _, outdir, _ = preset_run("oscillating-eps0.5-delta0.05")
        rows = _diagnostics(outdir)
        m2 = [row.m2 for row in rows]
        assert m2[1] > m2[0]


class TestStabilityEps05:
    def test_completes_within_budget(self, preset_run):
        _, _, _, elapsed = preset_run("stability-eps0.5")
        assert elapsed < RUNTIME_BUDGET_SECONDS

    def test_distance_to_steady_shrinks(self, preset_run):
        _, _, outdir, _ = preset_run("stability-eps0.5")
        rows = _diagnostics(outdir)
        w2 = [row.w2_to_ref for row in rows]
        assert w2[-1] < 0.1 * w2[0]

    def test_hypothesis_check_reports_violated(self, preset_run):
        _, summary, _, _ = preset_run("stability-eps0.5")
        assert summary["hypothesis_support"] == "violated"
