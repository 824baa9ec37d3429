import pytest

from payinsights.model import (
    Cohort,
    CohortKey,
    CompensationEntry,
    CompensationType,
    RawSubmission,
)
from payinsights.outliers import (
    ExternalLimitRow,
    OutlierReport,
    SanityLimits,
    TitleRegionLimits,
    box_whisker_limits,
    map_external_limits,
    run_outlier_pipeline,
    stage1_sanity,
    stage2_external,
    stage3_box_whisker,
)

US_LIMITS = SanityLimits(
    {
        "US": {
            CompensationType.BASE_SALARY: (15080.0, 2_000_000.0),
            CompensationType.ANNUAL_BONUS: (0.0, 10_000_000.0),
        }
    }
)


def sub(base, bonus=None, country="US", title="T", region="R"):
    amounts = {CompensationType.BASE_SALARY: float(base)}
    if bonus is not None:
        amounts[CompensationType.ANNUAL_BONUS] = float(bonus)
    return RawSubmission(title, country, region, (), CompensationEntry(amounts))


class TestStage1:
    def test_minimum_wage_inclusive(self):
        kept, report = stage1_sanity([sub(15080)], US_LIMITS)
        assert len(kept) == 1
        assert report.entries_removed == 0

    def test_upper_bound_exceeded(self):
        kept, report = stage1_sanity([sub(2_000_001)], US_LIMITS)
        assert kept == []
        assert report.entries_removed == 1

    def test_bonus_clipped(self):
        kept, report = stage1_sanity([sub(100_000, bonus=1e9)], US_LIMITS)
        assert kept[0].entry.amounts[CompensationType.ANNUAL_BONUS] == 1e7
        assert report.values_clipped == 1

    def test_unknown_country_quarantined(self):
        kept, report = stage1_sanity([sub(100_000, country="ZZ")], US_LIMITS)
        assert kept == []
        assert report.quarantined == 1


class TestExternalLimits:
    def test_single_row(self):
        row = ExternalLimitRow("occ", "ext", 40000, 50000, 60000, 70000, 80000)
        limits, _ = map_external_limits(
            [row], {"occ": ["T"]}, {"ext": ["R"]}
        )
        assert limits.get("T", "R") == (20000.0, 110000.0)

    def test_min_max_aggregation(self):
        rows = [
            ExternalLimitRow("o1", "e", 0, 50000, 60000, 70000, 80000),
            ExternalLimitRow("o2", "e", 0, 45000, 55000, 60000, 70000),
        ]
        limits, _ = map_external_limits(
            rows, {"o1": ["T"], "o2": ["T"]}, {"e": ["R"]}
        )
        lo, hi = limits.get("T", "R")
        r1, r2 = rows[0].box_whisker_limits(), rows[1].box_whisker_limits()
        assert lo == min(r1[0], r2[0])
        assert hi == max(r1[1], r2[1])
        assert lo <= min(r1[0], r2[0]) and hi >= max(r1[1], r2[1])

    def test_degenerate_iqr_flagged(self):
        row = ExternalLimitRow("o", "e", 50000, 50000, 50000, 50000, 50000)
        assert row.box_whisker_limits() == (50000.0, 50000.0)
        _, report = map_external_limits([row], {"o": ["T"]}, {"e": ["R"]})
        assert report.degenerate_limits == ["o/e"]

    def test_lower_floored_at_zero(self):
        row = ExternalLimitRow("o", "e", 0, 1000, 5000, 100000, 200000)
        lo, _ = row.box_whisker_limits()
        assert lo == 0.0


class TestStage2:
    def setup_method(self):
        self.limits = TitleRegionLimits({("T", "R"): (20000.0, 110000.0)})

    def test_outside_removed(self):
        kept, report = stage2_external([sub(200000)], self.limits)
        assert kept == []
        assert report.entries_removed == 1

    def test_inside_retained(self):
        kept, _ = stage2_external([sub(60000)], self.limits)
        assert len(kept) == 1

    def test_unmapped_passes_through(self):
        kept, _ = stage2_external([sub(10**7, title="other")], self.limits)
        assert len(kept) == 1


def cohort(bases, bonuses=None):
    entries = []
    for i, b in enumerate(bases):
        amounts = {CompensationType.BASE_SALARY: float(b)}
        if bonuses is not None and bonuses[i] is not None:
            amounts[CompensationType.ANNUAL_BONUS] = float(bonuses[i])
        entries.append(CompensationEntry(amounts))
    return Cohort(CohortKey("T", "US", "R"), entries)


class TestStage3:
    def test_hand_oracle(self):
        c = cohort([40000, 50000, 60000, 70000, 200000])
        assert box_whisker_limits([40000, 50000, 60000, 70000, 200000]) == (
            20000.0,
            110000.0,
        )
        cleaned, report = stage3_box_whisker(c)
        bases = sorted(
            e.amounts[CompensationType.BASE_SALARY] for e in cleaned.entries
        )
        assert bases == [40000, 50000, 60000, 70000]
        assert report.entries_removed == 1

    def test_constant_data_nothing_removed(self):
        cleaned, report = stage3_box_whisker(cohort([50000] * 6))
        assert len(cleaned.entries) == 6
        assert report.entries_removed == 0

    def test_non_base_clipped_not_dropped(self):
        c = cohort(
            [50000, 51000, 52000, 53000],
            bonuses=[10000, 11000, 12000, 500000],
        )
        cleaned, report = stage3_box_whisker(c)
        assert len(cleaned.entries) == 4
        bonuses = [e.amounts[CompensationType.ANNUAL_BONUS] for e in cleaned.entries]
        lo, hi = box_whisker_limits([10000, 11000, 12000, 500000])
        assert max(bonuses) == hi
        assert report.values_clipped >= 1

    def test_type_dropped_when_outlier_fraction_high(self):
        # One of four bonus values beyond the whiskers; f_type_max=0 drops
        # the whole type.
        bonuses = [10000, 10000, 10000, 900000]
        c = cohort([50000, 51000, 52000, 53000], bonuses=bonuses)
        lo, hi = box_whisker_limits(bonuses)
        assert sum(1 for v in bonuses if v < lo or v > hi) == 1
        cleaned, report = stage3_box_whisker(c, f_type_max=0.0)
        assert report.types_dropped == [("T|US|R", "ANNUAL_BONUS")]
        for e in cleaned.entries:
            assert CompensationType.ANNUAL_BONUS not in e.amounts

    def test_cohort_dropped_when_base_fraction_high(self):
        c = cohort([50000, 50000, 50000, 5, 10**7])
        cleaned, report = stage3_box_whisker(c, f_cohort_max=0.2)
        assert cleaned is None
        assert report.cohorts_dropped == ["T|US|R"]

    def test_no_base_outliers_after_pruning_under_input_limits(self):
        import random

        rng = random.Random(3)
        bases = [rng.lognormvariate(11.3, 0.4) for _ in range(50)]
        c = cohort(bases)
        lo, hi = box_whisker_limits(bases)
        cleaned, _ = stage3_box_whisker(c)
        for e in cleaned.entries:
            assert lo <= e.amounts[CompensationType.BASE_SALARY] <= hi

    def test_inlier_never_removed(self):
        bases = [40000, 45000, 50000, 55000, 60000, 65000]
        lo, hi = box_whisker_limits(bases)
        cleaned, _ = stage3_box_whisker(cohort(bases))
        kept = {e.amounts[CompensationType.BASE_SALARY] for e in cleaned.entries}
        for b in bases:
            if lo <= b <= hi:
                assert b in kept


class TestPipeline:
    def test_stage_ordering(self):
        # A $3M base entry dies at stage 1 and never reaches stage 3.
        subs = [sub(3_000_000)] + [sub(60000 + i) for i in range(10)]
        cohorts, report = run_outlier_pipeline(subs, US_LIMITS, k_min=3)
        key = CohortKey("T", "US", "R")
        assert len(cohorts[key].entries) == 10

    def test_clean_lognormal_low_removal(self):
        import random

        rng = random.Random(5)
        subs = []
        for t in range(10):
            for _ in range(100):
                subs.append(sub(rng.lognormvariate(11.3, 0.25), title=f"T{t}"))
        cohorts, report = run_outlier_pipeline(subs, US_LIMITS, k_min=3)
        total_kept = sum(len(c.entries) for c in cohorts.values())
        assert report.entries_removed / 1000 < 0.02

    def test_report_counts_consistent(self):
        subs = [sub(60000 + 1000 * i) for i in range(10)] + [sub(2_500_000)]
        cohorts, report = run_outlier_pipeline(subs, US_LIMITS, k_min=3)
        kept = sum(len(c.entries) for c in cohorts.values())
        assert kept + report.entries_removed + report.quarantined == 11

    def test_merge_is_associative_enough(self):
        a = OutlierReport("a", entries_removed=1)
        b = OutlierReport("b", values_clipped=2)
        m = a.merge(b)
        assert m.entries_removed == 1 and m.values_clipped == 2
