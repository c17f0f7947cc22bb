import numpy as np
import pytest

from choquard import (
    DegenerateFieldError,
    InvalidParameterError,
    Params,
    RadialField,
    SolveOptions,
    build_grid,
    continue_exponent,
    default_initial_guess,
    detect_dichotomy,
    ground_state,
    half_mass_radius,
    sample,
)
from choquard.extremals import talenti
from choquard.functionals import breakdown, energy_of, nehari_of, pohozaev_of
from choquard.solver import ContinuationSpec, SolveReport, _schedule

PEKAR = Params(N=3, alpha=2.0, p=2.0, q=3.0)


def _report_from_field(field, params):
    bd = breakdown(field, params)
    return SolveReport(
        profile=field, params=params, breakdown=bd,
        J=energy_of(bd, params), P=pohozaev_of(bd, params), nehari=nehari_of(bd, params),
        residual_norm=1.0, iterations=0, linf=float(np.max(np.abs(field.values))),
        half_mass_radius=half_mass_radius(field), status="max_iter",
    )


class TestOptions:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(tol_residual=0.0),
            dict(max_iter=0),
            dict(backtrack=1.0),
            dict(backtrack=0.0),
            dict(step=0.0),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(InvalidParameterError):
            SolveOptions(**kwargs)

    def test_continuation_spec_validation(self):
        with pytest.raises(InvalidParameterError):
            ContinuationSpec("sideways", 3)
        with pytest.raises(InvalidParameterError):
            ContinuationSpec("p-upper", -1)


class TestGroundState:
    def test_zero_init_rejected(self, pekar_grid):
        zero = sample(pekar_grid, np.zeros_like)
        with pytest.raises(DegenerateFieldError):
            ground_state(PEKAR, zero, SolveOptions())

    def test_converged_invariants(self, pekar_report):
        rep = pekar_report
        assert rep.status == "converged"
        assert rep.residual_norm <= 1e-6
        scale = rep.breakdown.kinetic + rep.breakdown.mass
        assert abs(rep.P) <= 1e-5 * scale
        assert abs(rep.nehari) <= 1e-4 * scale
        assert rep.J > 0

    def test_positive_and_nonincreasing(self, pekar_report):
        vals = pekar_report.profile.values
        assert vals.min() >= -1e-10
        assert np.max(np.diff(vals)) <= 1e-8 * vals.max()

    def test_monotone_descent_of_projected_phase(self):
        grid = build_grid(3, 30.0, 512, scheme="graded")
        trace: list = []
        ground_state(PEKAR, default_initial_guess(grid), SolveOptions(), trace=trace)
        js = [t["J"] for t in trace if t["phase"] == "projected"]
        assert len(js) >= 3
        assert all(b <= a + 1e-12 * abs(a) for a, b in zip(js, js[1:]))

    def test_report_metrics_consistent(self, pekar_report):
        profile = pekar_report.profile
        assert pekar_report.linf == pytest.approx(np.max(np.abs(profile.values)))
        assert pekar_report.half_mass_radius == pytest.approx(
            half_mass_radius(profile), rel=1e-12
        )
        # half the mass really is inside that radius
        g = profile.grid
        inside = g.nodes <= pekar_report.half_mass_radius
        mass_in = float((g.volume_weights * profile.values**2)[inside].sum())
        total = float((g.volume_weights * profile.values**2).sum())
        assert mass_in == pytest.approx(0.5 * total, rel=1e-2)

    def test_matches_bvp_oracle(self, pekar_report, pekar_grid, pekar_oracle):
        diff = np.abs(pekar_report.profile.values - pekar_oracle(pekar_grid.nodes))
        assert diff.max() < 1e-3


class TestSchedule:
    def test_requires_strictly_subcritical_start(self):
        critical = Params(N=3, alpha=2.0, p=5.0, q=3.0)
        with pytest.raises(InvalidParameterError):
            _schedule(critical, "p-upper", 2)

    def test_halving_gaps(self):
        start = Params(N=4, alpha=1.0, p=2.0, q=3.0)
        sched = _schedule(start, "p-upper", 3)
        gaps = [start.p_upper - s.p for s in sched]
        assert gaps == pytest.approx([0.5, 0.25, 0.125, 0.0625])
        sched_q = _schedule(start, "q-upper", 2)
        assert [s.q for s in sched_q] == pytest.approx([3.0, 3.5, 3.75])
        symmetric = Params(N=4, alpha=1.0, p=1.25 + 0.75, q=4.0 - 0.75)
        sched_d = _schedule(symmetric, "double", 1)
        assert sched_d[1].p == pytest.approx(1.25 + 0.375)
        assert sched_d[1].q == pytest.approx(4.0 - 0.375)

    def test_double_target_requires_matching_gaps(self):
        bad = Params(N=3, alpha=2.0, p=2.0, q=3.5)
        with pytest.raises(InvalidParameterError):
            _schedule(bad, "double", 1)
        a0 = 1.0 / 3.0
        good = Params(N=3, alpha=2.0, p=5.0 / 3.0 + a0, q=6.0 - a0)
        sched = _schedule(good, "double", 2)
        assert sched[2].p == pytest.approx(5.0 / 3.0 + a0 / 4)
        assert sched[2].q == pytest.approx(6.0 - a0 / 4)

    def test_lower_critical_continuation_with_p_below_two(self):
        # exponents p < 2 exercise the odd-power right-hand side on fields
        # with exact zeros in the dilated tail
        grid = build_grid(3, 30.0, 1024, scheme="graded")
        start = Params(N=3, alpha=2.0, p=2.2, q=2.8)
        reports = continue_exponent(start, "p-lower", 2, SolveOptions(max_iter=600), grid)
        assert [round(r.params.p, 4) for r in reports] == [2.2, 1.9333, 1.8]
        assert all(r.status == "converged" for r in reports)

    def test_stalled_projection_hands_off_to_polish(self):
        # near-critical q at coarse resolution: the projected phase stalls
        # at its resampling floor but the polish still drives the residual
        # to tolerance (the P-identity stays resolution-limited)
        grid = build_grid(3, 30.0, 1024, scheme="graded")
        params = Params(N=3, alpha=2.0, p=2.0, q=6.0 - 1.0 / 3.0, mu=2.0, lam=2.0)
        rep = ground_state(params, default_initial_guess(grid), SolveOptions(max_iter=3000))
        assert rep.residual_norm <= 1e-6
        assert rep.iterations < 1000

    def test_zero_steps_single_solve(self):
        grid = build_grid(3, 30.0, 1024, scheme="graded")
        start = Params(N=3, alpha=2.0, p=2.0, q=3.0)
        reports = continue_exponent(start, "p-upper", 0, SolveOptions(), grid)
        assert len(reports) == 1
        assert reports[0].params.p == 2.0
        assert reports[0].status == "converged"


class TestContinuation:
    def test_n4_levels_monotone_and_converged(self, n4_continuation):
        reports = n4_continuation.reports
        assert len(reports) == 7
        assert all(r.status == "converged" for r in reports)
        levels = [r.J for r in reports]
        diffs = [abs(b - a) for a, b in zip(levels, levels[1:])]
        assert all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
        assert all(level > 0 for level in levels)

    def test_lam0_linf_grows_monotonically(self, n4_continuation_lam0):
        linfs = [r.linf for r in n4_continuation_lam0.reports]
        tail = linfs[1:]
        assert all(b > a for a, b in zip(tail, tail[1:]))

    def test_lam0_classified_concentrating(self, n4_continuation_lam0):
        assert detect_dichotomy(n4_continuation_lam0.reports) == "concentrating"

    def test_lam1_classified_converged(self, n4_continuation):
        assert detect_dichotomy(n4_continuation.reports) == "converged"

    def test_warm_started_levels_never_jump_up(self, n4_continuation):
        # approaching the upper-critical exponent lowers the level; allow
        # only the 1e-2 c slack of the empirical monotone-trend test
        levels = [r.J for r in n4_continuation.reports]
        for cur, nxt in zip(levels, levels[1:]):
            assert nxt <= cur + 1e-2 * cur


class TestDetectDichotomy:
    def test_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            detect_dichotomy([])

    def test_constant_tail_converged(self, pekar_report):
        assert detect_dichotomy([pekar_report, pekar_report]) == "converged"

    def test_synthetic_bubbles_concentrating(self):
        # N=5 bubbles have core-dominated mass: half-mass radius ~ eps
        grid = build_grid(5, 10.0, 1024, scheme="graded")
        params = Params(N=5, alpha=2.0, p=1.6, q=2.5)
        reports = [
            _report_from_field(talenti(grid, 1.0 / n), params) for n in (1, 2, 3, 4, 6)
        ]
        assert reports[-1].linf > 10 * reports[0].linf
        assert detect_dichotomy(reports) == "concentrating"

    def test_synthetic_shrinking_gaussians_vanishing(self):
        grid = build_grid(3, 15.0, 256, scheme="graded")
        params = Params(N=3, alpha=2.0, p=2.0, q=3.0)
        fields = [
            RadialField(grid, amp * np.exp(-(grid.nodes**2))) for amp in (1.0, 1e-4)
        ]
        reports = [_report_from_field(f, params) for f in fields]
        assert detect_dichotomy(reports) == "vanishing"
