from __future__ import annotations

import itertools
import math
import random

import pytest
from scipy import stats as scipy_stats

from scenefuzz.data import deny_list_for
from scenefuzz.generate import GeneratorConfig, generate_suite
from scenefuzz.metrics import (
    AggregateRow,
    aggregate_results,
    diff_metric,
    mann_whitney_u,
    mut_over_def,
    paired_t,
    trajectory_coverage,
    transfer_rate,
)
from scenefuzz.oracles import EpisodeResult
from scenefuzz.scene import SceneError, TaskKind


class TestTransferRate:
    def test_step_averages_from_fractions(self):
        tr = transfer_rate([0.233, 0.157, 0.128])
        assert math.isclose(tr[0], 0.233, abs_tol=1e-12)
        assert math.isclose(tr[1], 0.157 / 0.233, abs_tol=1e-12)
        assert math.isclose(tr[2], 0.128 / 0.157, abs_tol=1e-12)

    def test_zero_guard(self):
        assert transfer_rate([0.0, 0.0, 0.0]) == [0.0, None, None]

    def test_identity(self):
        assert transfer_rate([1.0, 1.0, 1.0]) == [1.0, 1.0, 1.0]

    def test_consistency_product(self):
        rates = [0.8, 0.4, 0.1]
        tr = transfer_rate(rates)
        prod = 1.0
        for t, r in zip(tr, rates):
            prod *= t
            assert math.isclose(prod, r, rel_tol=1e-12)


class TestDiffMetric:
    def test_relative_drop(self):
        d = diff_metric(0.128, 0.033)
        assert math.isclose(d, (0.033 - 0.128) / 0.128, rel_tol=1e-12)
        assert abs(d * 100 - (-74.2)) < 0.05

    def test_equal_rates(self):
        assert diff_metric(0.5, 0.5) == 0.0

    def test_zero_baseline_is_undefined(self):
        assert diff_metric(0.0, 0.001) is None

    def test_negative_baseline_rejected(self):
        with pytest.raises(ValueError):
            diff_metric(-0.1, 0.0)


class TestMutOverDef:
    def test_lighting_totals(self):
        assert math.isclose(mut_over_def(1434, 878.4), 0.6125523, abs_tol=1e-6)

    def test_per_model_row(self):
        r = mut_over_def(217, 169.0)
        assert abs(100 * r - 77.9) < 0.05

    def test_per_task_row(self):
        r = mut_over_def(895, 404.0)
        assert abs(100 * r - 45.1) < 0.05

    def test_repeats_averaged(self):
        assert mut_over_def(10, [8.0, 9.0, 10.0]) == 0.9

    def test_equal_is_one(self):
        assert mut_over_def(42, 42.0) == 1.0

    def test_zero_default_undefined(self):
        assert mut_over_def(0, 3.0) is None


class TestCoverage:
    def test_single_scene_covers_one_cell(self):
        cov = trajectory_coverage([(0.0, 0.0)])
        assert cov.covered == 1 and cov.ratio == 0.01

    def test_full_coverage_from_grid_sweep(self):
        pts = []
        for i in range(10):
            for j in range(10):
                pts.append((-0.4 + 0.08 * i + 0.04, -0.4 + 0.08 * j + 0.04))
        assert trajectory_coverage(pts).ratio == 1.0

    def test_expected_occupancy_small_suite(self, db, deny):
        # mean over seeds should track 1 - (1 - 1/100)^10 = 0.0956
        ratios = []
        for seed in range(30):
            scenes = generate_suite(
                db, TaskKind.PICK_UP, GeneratorConfig(seed=seed, n_confound=0), 10, deny
            )
            ratios.append(trajectory_coverage(scenes).ratio)
        mean = sum(ratios) / len(ratios)
        assert abs(mean - 0.0956) < 0.02

    def test_monotone_for_nested_suites(self, db, deny):
        scenes = generate_suite(
            db, TaskKind.PICK_UP, GeneratorConfig(seed=3, n_confound=0), 200, deny
        )
        last = 0.0
        for n in (10, 50, 100, 200):
            r = trajectory_coverage(scenes[:n]).ratio
            assert r >= last
            last = r

    def test_out_of_bounds_position_rejected(self):
        with pytest.raises(SceneError):
            trajectory_coverage([(0.5, 0.0)])


class TestAggregation:
    def _result(self, task, g, m, s):
        return EpisodeResult(
            scene_id="x",
            task=task,
            grasp_correct=g,
            mid_step=m,
            success=s,
            confounder_contacts=0,
            frames_to_success=None,
            termination="max_steps",
        )

    def test_counts_and_rates(self):
        rows = aggregate_results(
            [
                ("p", self._result(TaskKind.PICK_UP, True, True, True)),
                ("p", self._result(TaskKind.PICK_UP, True, True, False)),
                ("p", self._result(TaskKind.PICK_UP, True, False, False)),
                ("p", self._result(TaskKind.PICK_UP, False, False, False)),
            ]
        )
        (row,) = rows
        assert (row.grasp_count, row.mid_count, row.success_count, row.n) == (3, 2, 1, 4)
        assert row.rates == (0.75, 0.5, 0.25)

    def test_monotonicity_enforced(self):
        with pytest.raises(ValueError, match="monotone"):
            AggregateRow(
                policy="p", task=TaskKind.PICK_UP, n=2, grasp_count=0, mid_count=1, success_count=0
            )


# ---------------------------------------------------------------------------
# Statistical tests vs independent oracles
# ---------------------------------------------------------------------------


def brute_force_u(a, b):
    """U for sample a by direct pair counting (ties count half)."""
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def normal_sf_via_erf(z: float) -> float:
    return 0.5 * (1.0 - math.erf(z / math.sqrt(2.0)))


def mw_p_oracle(a, b):
    """Tie-corrected normal approximation computed via the distributed form."""
    n1, n2 = len(a), len(b)
    n = n1 + n2
    u = brute_force_u(a, b)
    counts = {}
    for v in list(a) + list(b):
        counts[v] = counts.get(v, 0) + 1
    tie_sum = sum(t**3 - t for t in counts.values())
    var = (n1 * n2 * (n + 1)) / 12.0 - (n1 * n2 * tie_sum) / (12.0 * n * (n - 1))
    if var <= 0:
        return None
    z = (u - n1 * n2 / 2.0) / math.sqrt(var)
    return 2.0 * normal_sf_via_erf(abs(z))


def t_p_oracle(t: float, dof: int) -> float:
    """Two-sided p via Simpson quadrature of the Student t density.

    Integrates the central mass on [-|t|, |t|] (finite interval, so no tail
    truncation) and returns its complement.
    """
    c = math.gamma((dof + 1) / 2.0) / (math.sqrt(dof * math.pi) * math.gamma(dof / 2.0))

    def pdf(x: float) -> float:
        return c * (1.0 + x * x / dof) ** (-(dof + 1) / 2.0)

    a, b = -abs(t), abs(t)
    steps = max(20000, 2 * int(2000 * abs(t)))
    h = (b - a) / steps
    total = pdf(a) + pdf(b)
    for i in range(1, steps):
        total += pdf(a + i * h) * (4 if i % 2 else 2)
    return 1.0 - total * h / 3.0


class TestMannWhitney:
    def test_full_separation(self):
        u, p, eff = mann_whitney_u([1, 2, 3], [4, 5, 6])
        assert u == 0.0 and eff == 1.0

    def test_symmetric_samples(self):
        u, p, eff = mann_whitney_u([1, 2, 3], [1, 2, 3])
        assert u == 4.5 and eff == 0.0  # n^2/2 with n=3
        assert math.isclose(p, 1.0, abs_tol=1e-12)

    def test_all_tied_degenerate(self):
        u, p, eff = mann_whitney_u([5, 5], [5, 5])
        assert p is None and eff == 0.0

    def test_against_brute_force_exhaustive_small(self):
        # every pair of samples with sizes <= 3 over a 3-value domain
        domain = (0, 1, 2)
        for n1 in (1, 2, 3):
            for n2 in (1, 2, 3):
                for a in itertools.product(domain, repeat=n1):
                    for b in itertools.product(domain, repeat=n2):
                        u, p, eff = mann_whitney_u(a, b)
                        assert abs(u - brute_force_u(a, b)) < 1e-9
                        assert abs(eff - (1 - 2 * u / (n1 * n2))) < 1e-9
                        p2 = mw_p_oracle(a, b)
                        if p is None or p2 is None:
                            assert p is None and p2 is None
                        else:
                            assert abs(p - p2) < 1e-9

    def test_against_brute_force_random_up_to_8(self):
        rng = random.Random(17)
        for _ in range(400):
            n1, n2 = rng.randint(1, 8), rng.randint(1, 8)
            a = [rng.randint(0, 6) * 0.5 for _ in range(n1)]
            b = [rng.randint(0, 6) * 0.5 for _ in range(n2)]
            u, p, eff = mann_whitney_u(a, b)
            assert abs(u - brute_force_u(a, b)) < 1e-9
            p2 = mw_p_oracle(a, b)
            if p is not None:
                assert abs(p - p2) < 1e-9

    def test_against_scipy_asymptotic(self):
        rng = random.Random(23)
        for _ in range(200):
            a = [rng.gauss(0, 1) for _ in range(rng.randint(2, 8))]
            b = [rng.gauss(0.5, 1) for _ in range(rng.randint(2, 8))]
            u, p, _ = mann_whitney_u(a, b)
            ref = scipy_stats.mannwhitneyu(
                a, b, alternative="two-sided", method="asymptotic", use_continuity=False
            )
            assert abs(u - ref.statistic) < 1e-9
            assert abs(p - ref.pvalue) < 1e-9

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            mann_whitney_u([], [1.0])


class TestPairedT:
    def test_identical_samples(self):
        t, p, d = paired_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert t == 0.0 and d == 0.0 and p is None

    def test_constant_shift_degenerate(self):
        t, p, d = paired_t([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
        assert t is None and p is None and d is None

    def test_textbook_pair_closed_form(self):
        a = [4.0, 5.0, 6.0, 7.0]
        b = [1.0, 2.0, 4.0, 3.0]
        diffs = [x - y for x, y in zip(a, b)]
        n = len(diffs)
        mean = sum(diffs) / n
        sd = math.sqrt(sum((x - mean) ** 2 for x in diffs) / (n - 1))
        t, p, d = paired_t(a, b)
        assert abs(t - mean / (sd / math.sqrt(n))) < 1e-12
        assert abs(d - mean / sd) < 1e-12
        assert abs(p - t_p_oracle(t, n - 1)) < 1e-9

    def test_against_quadrature_random_up_to_8(self):
        rng = random.Random(31)
        for _ in range(100):
            n = rng.randint(2, 8)
            a = [rng.gauss(0, 1) for _ in range(n)]
            b = [rng.gauss(0.3, 1) for _ in range(n)]
            t, p, d = paired_t(a, b)
            if t is None:
                continue
            assert abs(p - t_p_oracle(t, n - 1)) < 1e-9

    def test_against_scipy(self):
        rng = random.Random(37)
        for _ in range(100):
            n = rng.randint(2, 8)
            a = [rng.gauss(0, 1) for _ in range(n)]
            b = [rng.gauss(0.3, 1) for _ in range(n)]
            t, p, d = paired_t(a, b)
            ref = scipy_stats.ttest_rel(a, b)
            assert abs(t - ref.statistic) < 1e-9
            assert abs(p - ref.pvalue) < 1e-9

    def test_unequal_lengths_rejected(self):
        with pytest.raises(ValueError):
            paired_t([1.0], [1.0, 2.0])
