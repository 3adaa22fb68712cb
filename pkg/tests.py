"""
Comprehensive Unit Tests for the sdMAF Scanner
Tests estimators, Wald tests, the regression oracle, ingest, null simulation,
calibration, the scan pipeline and the command line
"""

import gzip
import itertools
import math
import os
import shutil
import tempfile
import unittest
from functools import partial
from unittest import mock

import numpy as np
import pandas as pd

from config.settings import ScanConfig, SimulationConfig, parse_tests
from core_stats.chisq import TestResult, _log_upper_gamma_cf, chisq_logsf, chisq_median, chisq_sf, neg_log10_p
from core_stats.errors import (
    ConfigError,
    DuplicateSample,
    EmptyManifest,
    EmptyStratum,
    InputError,
    InvalidCounts,
    InvalidFrequencies,
    InvalidProbability,
    MalformedVcfLine,
    OverlappingIntervals,
    SingularConstraint,
    UnknownRegionLabel,
    UnknownSexToken,
)
from core_stats.genotypes import (
    DiploidCounts,
    HaploidCounts,
    Ploidy,
    PopulationStratumPair,
    RegionClass,
    StratumEstimate,
    estimate_stratum,
    sigma2_hat,
    variance_term,
)
from core_stats.oracle import (
    fit_model,
    hypothesis_eta_diff,
    hypothesis_eta_zero,
    hypothesis_gamma_zero,
    hypothesis_multi,
    hypothesis_omnibus_diff,
    oracle_wald,
    rebaseline,
)
from core_stats.wald_tests import (
    sdmaf_all_pairs,
    sdmaf_multi,
    sdmaf_omnibus_diff,
    sdmaf_pair_diff,
    sdmaf_per_population,
    sdmaf_pooled,
    sdmaf_single,
)
from ingest.manifest import FEMALE, MALE, load_manifest, parse_sex
from ingest.qc_stats import IngestQC
from ingest.regions import RegionInterval, build_region_map, load_region_map
from ingest.vcf_stream import DIPLOID, HAPLOID, INVALID, MISSING, assemble_record, parse_gt, stream_variants
from main import main
from scan_report.calibration import (
    StatisticCollector,
    genomic_lambda,
    hist_export,
    ks_distance,
    lambda_for_selector,
    maf_strata,
    qq_export,
    qq_from_results,
)
from scan_report.miami import miami_export
from scan_report.results import (
    ResultWriter,
    ScanPlan,
    compute_row,
    compute_rows,
    header_columns,
    population_labels,
    read_results,
    recompute_row,
)
from scan_report.scanner import run_scan, run_simulation, sidecar_path
from scan_report.significance import SignificanceTracker
from scan_report.worker_pool import WorkerPool
from simulate.frequency_table import read_frequency_table, write_frequency_table
from simulate.null_models import (
    NullProtocol,
    NullSpec,
    StratumFrequencies,
    VariantFrequencies,
    frequencies_from_records,
    parse_sizes,
    reference_stratum_sizes,
    simulate_betweenpop_null,
    simulate_multipop_null,
    synthetic_frequencies,
)
from simulate.samplers import binomial_draw, multinomial_draw, variant_rng

HERE = os.path.dirname(os.path.abspath(__file__))
TESTDATA = os.path.join(HERE, "testdata")
VCF = os.path.join(TESTDATA, "small.vcf")
MANIFEST = os.path.join(TESTDATA, "manifest.tsv")
REGIONS = os.path.join(TESTDATA, "regions.tsv")
GOLDEN = os.path.join(TESTDATA, "golden.tsv")

AUTO = RegionClass.AUTOSOMAL
PAR = RegionClass.X_PAR
NPR = RegionClass.X_NPR
REGIONS_ALL = (AUTO, PAR, NPR)

FEMALE_40 = DiploidCounts(36, 48, 16)
MALE_30 = DiploidCounts(49, 42, 9)
MALE_30_HAPLOID = HaploidCounts(70, 30)


def random_counts(rng, n, p, ploidy):
    """Counts of one stratum with no zero-variance draws"""
    while True:
        if ploidy is Ploidy.HAPLOID:
            n_B = int(rng.binomial(n, p))
            counts = HaploidCounts(n - n_B, n_B)
        else:
            draw = rng.multinomial(n, [(1 - p) ** 2, 2 * p * (1 - p), p * p])
            counts = DiploidCounts(*(int(v) for v in draw))
        if max(counts.as_tuple()) < counts.total():
            return counts


def random_pairs(rng, k, region):
    pairs = []
    for idx in range(k):
        p = float(rng.uniform(0.1, 0.9))
        female = random_counts(rng, int(rng.integers(5, 501)), p, Ploidy.DIPLOID)
        male = random_counts(rng, int(rng.integers(5, 501)), p, region.male_ploidy)
        pairs.append(PopulationStratumPair(f"P{idx}", female, male))
    return pairs


def relative_gap(a, b):
    return abs(a - b) / max(1.0, abs(b))


class CoreStatsTestCase(unittest.TestCase):
    """Estimators, Wald tests and chi-square tails"""

    @classmethod
    def setUpClass(cls):
        print("\n" + "=" * 60)
        print("sdMAF Scanner - Unit Test Suite")
        print("=" * 60)
        print("Testing: core statistics, oracle, ingest, simulation, scan")
        print("=" * 60 + "\n")

    # Test 1: Stratum estimates
    def test_01_stratum_estimates(self):
        """Allele frequency and HWD estimates"""
        print("\n1. Testing stratum estimates...")

        est = estimate_stratum(DiploidCounts(25, 50, 25))
        self.assertAlmostEqual(est.p_hat, 0.5)
        self.assertAlmostEqual(est.delta_hat, 0.0)

        est = estimate_stratum(DiploidCounts(50, 0, 50))
        self.assertAlmostEqual(est.p_hat, 0.5)
        self.assertAlmostEqual(est.delta_hat, 0.25)

        est = estimate_stratum(MALE_30_HAPLOID)
        self.assertAlmostEqual(est.p_hat, 0.3)
        self.assertIsNone(est.delta_hat)

        with self.assertRaises(EmptyStratum):
            estimate_stratum(DiploidCounts(0, 0, 0))
        with self.assertRaises(InvalidCounts):
            DiploidCounts(-1, 2, 3)
        print("   Estimates match hand values")

    # Test 2: Variance terms
    def test_02_variance_terms(self):
        """Wald denominator contributions"""
        print("\n2. Testing variance terms...")

        diploid = StratumEstimate(p_hat=0.4, delta_hat=0.0, n=100, ploidy=Ploidy.DIPLOID)
        haploid = StratumEstimate(p_hat=0.3, delta_hat=None, n=100, ploidy=Ploidy.HAPLOID)
        mono = StratumEstimate(p_hat=0.0, delta_hat=0.0, n=50, ploidy=Ploidy.DIPLOID)
        self.assertAlmostEqual(variance_term(diploid), 0.0012, places=15)
        self.assertAlmostEqual(variance_term(haploid), 0.0021, places=15)
        self.assertEqual(variance_term(mono), 0.0)

        for est in (diploid, haploid):
            self.assertAlmostEqual(variance_term(est), sigma2_hat(est) / (4 * est.n), places=15)
        print("   Variance terms match hand values and the moment identity")

    # Test 3: HWD bounds
    def test_03_delta_bounds(self):
        """delta_hat stays in its admissible range"""
        print("\n3. Testing delta bounds...")

        rng = np.random.default_rng(11)
        for _ in range(500):
            counts = DiploidCounts(*(int(v) for v in rng.integers(0, 50, size=3)))
            if counts.total() == 0:
                continue
            est = estimate_stratum(counts)
            p = est.p_hat
            self.assertGreaterEqual(est.delta_hat, -min(p, 1 - p) ** 2 - 1e-12)
            self.assertLessEqual(est.delta_hat, p * (1 - p) + 1e-12)
        print("   500 random strata within bounds")

    # Test 4: Single-population examples
    def test_04_single_population(self):
        """Single-population test on hand-evaluated strata"""
        print("\n4. Testing single-population test...")

        same = sdmaf_single(PopulationStratumPair("A", FEMALE_40, FEMALE_40), AUTO)
        self.assertEqual(same.statistic, 0.0)
        self.assertEqual(same.p_value, 1.0)

        auto = sdmaf_single(PopulationStratumPair("A", FEMALE_40, MALE_30), AUTO)
        self.assertAlmostEqual(auto.statistic, 0.01 / 0.00225, places=9)
        self.assertAlmostEqual(auto.p_value, 0.03501, delta=1e-4)
        self.assertEqual(auto.df, 1)

        npr = sdmaf_single(PopulationStratumPair("A", FEMALE_40, MALE_30_HAPLOID), NPR)
        self.assertAlmostEqual(npr.statistic, 0.01 / 0.0033, places=9)
        self.assertAlmostEqual(npr.p_value, 0.08173, delta=1e-4)

        with self.assertRaises(InvalidCounts):
            sdmaf_single(PopulationStratumPair("A", FEMALE_40, MALE_30_HAPLOID), AUTO)
        with self.assertRaises(InvalidCounts):
            sdmaf_single(PopulationStratumPair("A", FEMALE_40, MALE_30), NPR)
        print(f"   W = {auto.statistic:.4f} (autosomal), {npr.statistic:.4f} (NPR)")

    # Test 5: Multi-population and pooled examples
    def test_05_multi_and_pooled(self):
        """Multi-population and pooled tests"""
        print("\n5. Testing multi-population and pooled tests...")

        pair = PopulationStratumPair("A", FEMALE_40, MALE_30)
        multi = sdmaf_multi([pair, PopulationStratumPair("B", FEMALE_40, MALE_30)], AUTO)
        self.assertAlmostEqual(multi.statistic, 2 * 0.01 / 0.00225, places=9)
        self.assertEqual(multi.df, 2)
        self.assertAlmostEqual(multi.p_value, 0.01174, delta=1e-5)

        zero = sdmaf_multi([PopulationStratumPair(f"P{i}", FEMALE_40, FEMALE_40) for i in range(5)], AUTO)
        self.assertEqual((zero.statistic, zero.df, zero.p_value), (0.0, 5, 1.0))

        pooled = sdmaf_pooled([pair, PopulationStratumPair("B", FEMALE_40, MALE_30)], AUTO)
        direct = sdmaf_single(PopulationStratumPair("AB", DiploidCounts(72, 96, 32), DiploidCounts(98, 84, 18)), AUTO)
        self.assertAlmostEqual(pooled.statistic, direct.statistic, places=12)

        swapped = PopulationStratumPair("B", MALE_30, FEMALE_40)
        cancelled = sdmaf_pooled([pair, swapped], AUTO)
        self.assertAlmostEqual(cancelled.statistic, 0.0, places=12)
        print(f"   multi W = {multi.statistic:.4f}, df = {multi.df}, p = {multi.p_value:.5f}")

    # Test 6: Pairwise and omnibus differences
    def test_06_difference_tests(self):
        """Between-population difference tests"""
        print("\n6. Testing difference tests...")

        pos = PopulationStratumPair("K", FEMALE_40, MALE_30)
        neg = PopulationStratumPair("L", MALE_30, FEMALE_40)
        diff = sdmaf_pair_diff(pos, neg, AUTO)
        self.assertAlmostEqual(diff.statistic, 0.04 / 0.0045, places=9)
        self.assertAlmostEqual(diff.p_value, 0.00287, delta=5e-5)
        self.assertEqual(sdmaf_pair_diff(pos, pos, AUTO).statistic, 0.0)

        # X non-PAR: denominator uses p(1-p)/n for the males
        npr_k = PopulationStratumPair("K", FEMALE_40, MALE_30_HAPLOID)
        npr_l = PopulationStratumPair("L", DiploidCounts(49, 42, 9), HaploidCounts(60, 40))
        expected = (0.1 - (-0.1)) ** 2 / (0.0012 + 0.0021 + 0.00105 + 0.0024)
        self.assertAlmostEqual(sdmaf_pair_diff(npr_k, npr_l, NPR).statistic, expected, places=9)

        common = [PopulationStratumPair(f"P{i}", FEMALE_40, MALE_30) for i in range(4)]
        self.assertAlmostEqual(sdmaf_omnibus_diff(common, AUTO).statistic, 0.0, places=12)
        self.assertEqual(sdmaf_omnibus_diff(common, AUTO).df, 3)

        matrix = sdmaf_all_pairs([pos, neg, common[0]], AUTO)
        self.assertEqual([labels for labels, _ in matrix], [("K", "L"), ("K", "P0"), ("L", "P0")])
        print(f"   pair-diff W = {diff.statistic:.4f}, p = {diff.p_value:.6f}")

    # Test 7: Reduction identities
    def test_07_reductions(self):
        """K=1 multi equals single; K=2 omnibus equals pair-diff"""
        print("\n7. Testing reduction identities...")

        rng = np.random.default_rng(7)
        for region in REGIONS_ALL:
            for _ in range(1000):
                one = random_pairs(rng, 1, region)
                self.assertEqual(sdmaf_multi(one, region).statistic, sdmaf_single(one[0], region).statistic)
                self.assertEqual(sdmaf_pooled(one, region).statistic, sdmaf_single(one[0], region).statistic)
                two = random_pairs(rng, 2, region)
                self.assertEqual(
                    sdmaf_omnibus_diff(two, region).statistic,
                    sdmaf_pair_diff(two[0], two[1], region).statistic,
                )
        print("   3000 instances reduce exactly")

    # Test 8: Invariances
    def test_08_invariances(self):
        """Permutation, allele-label and symmetry invariances"""
        print("\n8. Testing invariances...")

        rng = np.random.default_rng(8)
        for region in REGIONS_ALL:
            for k in (2, 3, 4):
                pairs = random_pairs(rng, k, region)
                reference = sdmaf_omnibus_diff(pairs, region).statistic
                for order in itertools.permutations(pairs):
                    self.assertLess(relative_gap(sdmaf_omnibus_diff(list(order), region).statistic, reference), 1e-12)
                    self.assertLess(relative_gap(sdmaf_multi(list(order), region).statistic,
                                                 sdmaf_multi(pairs, region).statistic), 1e-12)

                flipped = [pair.flipped() for pair in pairs]
                self.assertLess(relative_gap(sdmaf_omnibus_diff(flipped, region).statistic, reference), 1e-10)
                self.assertLess(relative_gap(sdmaf_multi(flipped, region).statistic,
                                             sdmaf_multi(pairs, region).statistic), 1e-10)
                self.assertLess(relative_gap(sdmaf_pooled(flipped, region).statistic,
                                             sdmaf_pooled(pairs, region).statistic), 1e-10)
                self.assertEqual(sdmaf_pair_diff(pairs[0], pairs[1], region).statistic,
                                 sdmaf_pair_diff(pairs[1], pairs[0], region).statistic)
        print("   Orderings, relabelling and argument swaps leave W unchanged")

    # Test 9: Sample-size scaling
    def test_09_scaling(self):
        """Multiplying every count by m multiplies W by m"""
        print("\n9. Testing sample-size scaling...")

        rng = np.random.default_rng(9)
        for region in REGIONS_ALL:
            pairs = random_pairs(rng, 3, region)
            scaled = [pair.scaled(3) for pair in pairs]
            for test in (sdmaf_multi, sdmaf_pooled, sdmaf_omnibus_diff):
                self.assertLess(relative_gap(test(scaled, region).statistic, 3 * test(pairs, region).statistic), 1e-10)
        print("   W scales linearly with sample size")

    # Test 10: Degenerate strata
    def test_10_degenerate_strata(self):
        """Monomorphic strata give W = 0, p = 1, never infinities"""
        print("\n10. Testing degenerate strata...")

        mono = PopulationStratumPair("M", DiploidCounts(40, 0, 0), DiploidCounts(30, 0, 0))
        result = sdmaf_single(mono, AUTO)
        self.assertEqual((result.statistic, result.p_value), (0.0, 1.0))
        self.assertFalse(result.is_na)

        informative = PopulationStratumPair("A", FEMALE_40, MALE_30)
        omnibus = sdmaf_omnibus_diff([mono, informative, PopulationStratumPair("B", MALE_30, FEMALE_40)], AUTO)
        self.assertEqual(omnibus.df, 1)
        too_few = sdmaf_omnibus_diff([mono, informative], AUTO)
        self.assertTrue(too_few.is_na)
        self.assertEqual(len(sdmaf_per_population([mono, informative], AUTO)), 2)
        print("   Zero-variance populations handled")

    # Test 11: Chi-square tails
    def test_11_chisq_tails(self):
        """Tail probabilities, log tails and medians"""
        print("\n11. Testing chi-square tails...")

        for w in np.linspace(0.0, 200.0, 801):
            self.assertAlmostEqual(chisq_sf(float(w), 1), math.erfc(math.sqrt(w / 2.0)), delta=1e-12)
        self.assertEqual(chisq_sf(0.0, 3), 1.0)
        self.assertAlmostEqual(chisq_sf(29.7168, 1), 5.0e-8, delta=5e-11)
        self.assertAlmostEqual(neg_log10_p(29.7168, 1), 7.3, delta=0.01)
        self.assertAlmostEqual(chisq_sf(4.4444, 1), 0.03501, delta=2e-5)

        for df in (1, 2, 3, 4, 5):
            values = [neg_log10_p(float(w), df) for w in range(0, 5001)]
            self.assertTrue(all(math.isfinite(v) for v in values))
            self.assertTrue(all(b > a for a, b in zip(values[1:], values[2:])))

        self.assertAlmostEqual(_log_upper_gamma_cf(2.0, 50.0), math.log(chisq_sf(100.0, 4)), delta=1e-10)
        self.assertAlmostEqual(chisq_logsf(100.0, 4), math.log(chisq_sf(100.0, 4)), delta=1e-12)
        self.assertAlmostEqual(chisq_median(1), 0.454936423119572, places=10)
        self.assertAlmostEqual(chisq_median(2), 2.0 * math.log(2.0), places=10)

        with self.assertRaises(InputError):
            chisq_sf(-1.0, 1)
        with self.assertRaises(InputError):
            chisq_sf(1.0, 0)
        print("   Tails accurate and -log10 p monotone up to W = 5000")

    # Test 12: p-value underflow
    def test_12_underflow(self):
        """Huge statistics keep a finite -log10 p"""
        print("\n12. Testing p-value underflow...")

        result = TestResult.from_statistic(5000.0, 1)
        self.assertGreater(result.p_value, 0.0)
        self.assertTrue(math.isfinite(result.neg_log10_p))
        self.assertGreater(result.neg_log10_p, 1000.0)
        self.assertTrue(result.is_significant(5e-8))
        print(f"   -log10 p = {result.neg_log10_p:.1f}")

    # Test 41: Tail monotone in df
    def test_41_chisq_df_monotone(self):
        """Upper tail strictly increases with df at fixed w > 0"""
        print("\n41. Testing chi-square tail against df...")

        for w in (0.5, 5.0, 50.0, 700.0, 2000.0, 5000.0):
            log_tails = [chisq_logsf(w, df) for df in range(1, 9)]
            self.assertTrue(all(math.isfinite(value) for value in log_tails))
            self.assertTrue(all(b > a for a, b in zip(log_tails, log_tails[1:])), f"w={w}: {log_tails}")
            if w <= 50.0:
                tails = [chisq_sf(w, df) for df in range(1, 9)]
                self.assertTrue(all(b > a for a, b in zip(tails, tails[1:])))
        # w = 2000 with df >= 2 goes through the continued fraction
        self.assertEqual(chisq_sf(2000.0, 4), 0.0)
        print("   Tail increases with df, linear and log space")


class OracleTestCase(unittest.TestCase):
    """Closed forms against the regression-model Wald statistic"""

    # Test 13: Oracle equivalence
    def test_13_oracle_equivalence(self):
        """Closed-form W equals the quadratic-form W on random instances"""
        print("\n13. Testing oracle equivalence...")

        rng = np.random.default_rng(2023)
        for region in REGIONS_ALL:
            for _ in range(1000):
                k = int(rng.integers(1, 6))
                pairs = random_pairs(rng, k, region)

                single = sdmaf_single(pairs[0], region).statistic
                self.assertLess(relative_gap(single, oracle_wald(pairs, region, hypothesis_gamma_zero(k))), 1e-10)
                multi = sdmaf_multi(pairs, region).statistic
                self.assertLess(relative_gap(multi, oracle_wald(pairs, region, hypothesis_multi(k))), 1e-10)
                if k < 2:
                    continue
                l = int(rng.integers(1, k))
                diff = sdmaf_pair_diff(pairs[0], pairs[l], region).statistic
                self.assertLess(relative_gap(diff, oracle_wald(pairs, region, hypothesis_eta_zero(k, l))), 1e-10)
                omnibus = sdmaf_omnibus_diff(pairs, region).statistic
                self.assertLess(
                    relative_gap(omnibus, oracle_wald(pairs, region, hypothesis_omnibus_diff(k))), 1e-10
                )
        print("   3000 instances agree to 1e-10")

    # Test 14: Re-baselining
    def test_14_rebaseline(self):
        """eta_a - eta_b = 0 equals eta = 0 after re-baselining on a"""
        print("\n14. Testing re-baselining...")

        rng = np.random.default_rng(14)
        for region in REGIONS_ALL:
            for _ in range(50):
                pairs = random_pairs(rng, 4, region)
                a, b = 1, 3
                direct = oracle_wald(pairs, region, hypothesis_eta_diff(4, a, b))
                moved = rebaseline(pairs, a)
                self.assertIs(moved[0], pairs[a])
                via_baseline = oracle_wald(moved, region, hypothesis_eta_zero(4, moved.index(pairs[b])))
                self.assertLess(relative_gap(direct, via_baseline), 1e-10)
                self.assertLess(relative_gap(direct, sdmaf_pair_diff(pairs[a], pairs[b], region).statistic), 1e-10)
        print("   Difference contrasts match re-baselined contrasts")

    # Test 15: Oracle guards
    def test_15_oracle_guards(self):
        """Monomorphic strata and malformed hypotheses are rejected"""
        print("\n15. Testing oracle guards...")

        mono = PopulationStratumPair("M", DiploidCounts(10, 0, 0), DiploidCounts(12, 3, 1))
        with self.assertRaises(SingularConstraint):
            fit_model([mono], AUTO)
        pair = PopulationStratumPair("A", FEMALE_40, MALE_30)
        with self.assertRaises(SingularConstraint):
            oracle_wald([pair], AUTO, np.zeros((1, 4)))
        with self.assertRaises(SingularConstraint):
            oracle_wald([pair], AUTO, np.zeros((1, 2)))
        theta, inverse_fisher = fit_model([pair], AUTO)
        self.assertAlmostEqual(theta[1], 2 * 0.1, places=12)
        self.assertEqual(inverse_fisher.shape, (2, 2))
        print("   Singular cases raise SingularConstraint")


class IngestTestCase(unittest.TestCase):
    """Manifest, region map and VCF streaming"""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def _write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        return path

    # Test 16: Manifest
    def test_16_manifest(self):
        """Manifest parsing, sex tokens and stratum sizes"""
        print("\n16. Testing manifest...")

        manifest = load_manifest(MANIFEST)
        self.assertEqual(manifest.populations, ["AFR", "EUR"])
        self.assertEqual(manifest.stratum_sizes(), {"AFR": (3, 3), "EUR": (3, 3)})
        self.assertEqual(parse_sex("F"), FEMALE)
        self.assertEqual(parse_sex("1"), MALE)
        with self.assertRaises(UnknownSexToken):
            parse_sex("x")

        dup = self._write("dup.tsv", "sample_id\tsex\tpopulation\nS1\tmale\tA\nS1\tfemale\tA\n")
        with self.assertRaises(DuplicateSample):
            load_manifest(dup)
        empty = self._write("empty.tsv", "sample_id\tsex\tpopulation\n")
        with self.assertRaises(EmptyManifest):
            load_manifest(empty)
        one_sex = self._write("one.tsv", "sample_id\tsex\tpopulation\nS1\tmale\tA\nS2\tfemale\tA\nS3\tfemale\tB\n")
        self.assertEqual(load_manifest(one_sex).testable_populations(), ["A"])
        print("   Manifest loaded with 2 populations")

    # Test 17: Region map
    def test_17_region_map(self):
        """PAR / NPR classification"""
        print("\n17. Testing region map...")

        region_map = load_region_map(REGIONS)
        self.assertEqual(region_map.classify("chr7", 100), AUTO)
        self.assertEqual(region_map.classify("X", 49999), PAR)
        self.assertEqual(region_map.classify("chrX", 2781478), PAR)
        self.assertEqual(region_map.classify("X", 2781479), NPR)
        self.assertEqual(region_map.classify("X", 155800000), PAR)
        self.assertEqual(region_map.band_name("X", 155800000), "PAR2")
        self.assertEqual(load_region_map(None).classify("X", 50000), AUTO)

        default = load_region_map(os.path.join(HERE, "data", "grch38_x_regions.tsv"))
        self.assertEqual(default.classify("X", 90000000), PAR)
        self.assertEqual(default.band_name("X", 100), "")

        with self.assertRaises(OverlappingIntervals):
            build_region_map("X", [RegionInterval(0, 10, PAR, "a"), RegionInterval(5, 20, PAR, "b")])
        bad = self._write("bad.tsv", "X\t0\t10\tPSEUDO\n")
        with self.assertRaises(UnknownRegionLabel):
            load_region_map(bad)
        print("   Half-open intervals classify correctly")

    # Test 18: GT parsing
    def test_18_parse_gt(self):
        """Genotype strings"""
        print("\n18. Testing GT parsing...")

        self.assertEqual(parse_gt("0/1"), (DIPLOID, 1))
        self.assertEqual(parse_gt("1|1"), (DIPLOID, 2))
        self.assertEqual(parse_gt("1"), (HAPLOID, 1))
        self.assertEqual(parse_gt("./."), (MISSING, None))
        self.assertEqual(parse_gt("0/."), (MISSING, None))
        self.assertEqual(parse_gt("0/2"), (INVALID, None))
        print("   GT strings classified")

    # Test 19: VCF stream
    def test_19_vcf_stream(self):
        """Counts, orientation, region classes and QC"""
        print("\n19. Testing VCF stream...")

        qc = IngestQC()
        records = list(stream_variants(VCF, load_manifest(MANIFEST), load_region_map(REGIONS), 0.05, qc=qc))
        by_id = {record.id: record for record in records}
        self.assertEqual(
            [record.id for record in records],
            ["rs1", "7:200:C:T", "rs6", "rs7", "rs8", "rs10", "rs11", "rs12"],
        )

        rs1 = by_id["rs1"]
        self.assertEqual(rs1.region, AUTO)
        self.assertEqual(rs1.minor_allele, "G")
        self.assertEqual(rs1.strata[0].female, DiploidCounts(1, 1, 1))
        self.assertEqual(rs1.strata[0].male, DiploidCounts(2, 1, 0))
        self.assertAlmostEqual(rs1.whole_sample_maf, 7 / 24)

        missing = by_id["7:200:C:T"]
        self.assertEqual(missing.strata[0].female, DiploidCounts(0, 1, 0))
        self.assertEqual(missing.missing[0], ("AFR", 2, 0))

        rs7 = by_id["rs7"]
        self.assertEqual(rs7.region, NPR)
        self.assertEqual(rs7.strata[0].male, HaploidCounts(1, 1))
        self.assertEqual(rs7.strata[1].male, HaploidCounts(2, 1))
        self.assertEqual(by_id["rs8"].strata[0].male, HaploidCounts(2, 1))

        rs10 = by_id["rs10"]
        self.assertEqual(rs10.minor_allele, "A")
        self.assertFalse(rs10.minor_is_alt)
        self.assertEqual(rs10.strata[1].female, DiploidCounts(3, 0, 0))

        self.assertEqual(by_id["rs6"].region, PAR)
        self.assertEqual(by_id["rs11"].region, PAR)

        stats = qc.get_stats()
        self.assertEqual(stats["variants_read"], 12)
        self.assertEqual(stats["variants_passed"], 8)
        self.assertEqual(stats["skipped_multiallelic"], 1)
        self.assertEqual(stats["skipped_non_snp"], 1)
        self.assertEqual(stats["skipped_malformed"], 1)
        self.assertEqual(stats["filtered_maf"], 1)
        self.assertEqual(stats["het_male_exclusions"], 1)
        self.assertEqual(stats["unmatched_samples"], 1)
        print(f"   {len(records)} variants passed: {stats}")

    # Test 20: Malformed-line policy
    def test_20_malformed_abort(self):
        """on_malformed='abort' raises with the line number"""
        print("\n20. Testing malformed-line abort...")

        stream = stream_variants(
            VCF, load_manifest(MANIFEST), load_region_map(REGIONS), 0.05, on_malformed="abort"
        )
        with self.assertRaises(MalformedVcfLine) as ctx:
            list(stream)
        self.assertEqual(ctx.exception.line_number, 13)

        gz_path = os.path.join(self.tmp, "small.vcf.gz")
        with open(VCF, "rb") as src, gzip.open(gz_path, "wb") as dst:
            dst.write(src.read())
        records = list(stream_variants(gz_path, load_manifest(MANIFEST), load_region_map(REGIONS), 0.05))
        self.assertEqual(len(records), 8)
        print("   Abort reports line 13; gzip input streams the same variants")

    # Test 47: VCF layout errors
    def test_47_vcf_layout(self):
        """Column-count mismatches, blank lines and a missing header"""
        print("\n47. Testing VCF layout errors...")

        with open(VCF, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        header, rs1, rs10 = lines[:4], lines[4], lines[13]

        odd = os.path.join(self.tmp, "odd.vcf")
        with open(odd, "w", encoding="utf-8") as handle:
            handle.write("\n".join(header + [rs1 + "\t0/0", "", rs10]) + "\n")
        qc = IngestQC()
        records = list(stream_variants(odd, load_manifest(MANIFEST), load_region_map(REGIONS), 0.05, qc=qc))
        self.assertEqual([record.id for record in records], ["rs10"])
        self.assertEqual(qc.get_stats()["skipped_malformed"], 1)
        with self.assertRaises(MalformedVcfLine) as ctx:
            list(stream_variants(odd, load_manifest(MANIFEST), load_region_map(REGIONS), 0.05, on_malformed="abort"))
        self.assertEqual((ctx.exception.line_number, ctx.exception.position), (5, "100"))

        headless = os.path.join(self.tmp, "headless.vcf")
        with open(headless, "w", encoding="utf-8") as handle:
            handle.write("\n".join([lines[0], rs1]) + "\n")
        with self.assertRaises(InputError):
            list(stream_variants(headless, load_manifest(MANIFEST), load_region_map(REGIONS), 0.05))

        empty = os.path.join(self.tmp, "empty.vcf")
        open(empty, "w", encoding="utf-8").close()
        with self.assertRaises(InputError):
            list(stream_variants(empty, load_manifest(MANIFEST), load_region_map(REGIONS), 0.05))
        print("   Extra column skipped at line 5; headerless and empty files rejected")


class SimulateTestCase(unittest.TestCase):
    """Samplers and null models"""

    # Test 21: Samplers
    def test_21_samplers(self):
        """Binomial and multinomial draws"""
        print("\n21. Testing samplers...")

        rng = variant_rng(1, 0)
        self.assertEqual(multinomial_draw(rng, 0, (0.2, 0.3, 0.5)), (0, 0, 0))
        self.assertEqual(binomial_draw(rng, 40, 0.0), 0)
        self.assertEqual(binomial_draw(rng, 40, 1.0), 40)
        self.assertEqual(multinomial_draw(rng, 25, (1.0, 0.0, 0.0)), (25, 0, 0))
        self.assertEqual(sum(multinomial_draw(rng, 1000, (0.2, 0.3, 0.5))), 1000)

        draws = [binomial_draw(rng, 100, 0.3) for _ in range(100000)]
        self.assertAlmostEqual(float(np.mean(draws)), 30.0, delta=0.05)

        with self.assertRaises(InvalidProbability):
            binomial_draw(rng, 10, 1.5)
        with self.assertRaises(InvalidProbability):
            multinomial_draw(rng, 10, (0.5, 0.6, 0.1))
        print("   Draws exact at the edges, mean within 0.05 of 30")

    # Test 22: Multi-population null marginals
    def test_22_multipop_marginals(self):
        """Empirical genotype frequencies converge to the source"""
        print("\n22. Testing multi-population null marginals...")

        n = 10 ** 6
        freqs = (0.25, 0.5, 0.25)
        spec = NullSpec(NullProtocol.MULTIPOP, (("P", n, n),), seed=5)
        variant = VariantFrequencies("v1", AUTO, (StratumFrequencies("P", freqs, freqs),))
        record = next(simulate_multipop_null(spec, [variant]))
        pair = record.strata[0]
        for counts in (pair.female, pair.male):
            for observed, expected in zip(counts.as_tuple(), freqs):
                self.assertAlmostEqual(observed / n, expected, delta=0.002)

        npr_freqs = (0.49, 0.42, 0.09)
        variant = VariantFrequencies("v2", NPR, (StratumFrequencies("P", npr_freqs, (0.7, 0.3)),))
        record = next(simulate_multipop_null(spec, [variant]))
        self.assertAlmostEqual(record.strata[0].male.n_B / n, 0.3, delta=0.0014)

        degenerate = VariantFrequencies("v3", AUTO, (StratumFrequencies("P", (1.0, 0.0, 0.0), (1.0, 0.0, 0.0)),))
        small = NullSpec(NullProtocol.MULTIPOP, (("P", 20, 20),), seed=5)
        record = next(simulate_multipop_null(small, [degenerate]))
        result = sdmaf_single(record.strata[0], AUTO)
        self.assertEqual((result.statistic, result.p_value), (0.0, 1.0))
        print("   Female and male marginals within 3 sigma")

    # Test 23: Determinism
    def test_23_determinism(self):
        """Same seed gives identical streams; a different seed does not"""
        print("\n23. Testing determinism...")

        sizes = reference_stratum_sizes()
        labels = [label for label, _, _ in sizes]

        def run(seed, protocol):
            spec = NullSpec(protocol, sizes, seed)
            freqs = synthetic_frequencies(50, labels, PAR, seed)
            generator = simulate_multipop_null if protocol is NullProtocol.MULTIPOP else simulate_betweenpop_null
            return [record.strata for record in generator(spec, freqs)]

        for protocol in NullProtocol:
            self.assertEqual(run(42, protocol), run(42, protocol))
            self.assertNotEqual(run(42, protocol), run(43, protocol))
        with self.assertRaises(InputError):
            simulate_betweenpop_null(NullSpec(NullProtocol.MULTIPOP, sizes, 1), [])
        self.assertEqual(parse_sizes("A:10:12,B:3:4"), (("A", 10, 12), ("B", 3, 4)))
        print("   Streams reproducible per seed")

    # Test 24: Between-population null
    def test_24_betweenpop_omnibus_mean(self):
        """Omnibus W averages K - 1 under a common sdMAF"""
        print("\n24. Testing between-population null...")

        sizes = tuple((f"P{i}", 2000, 2000) for i in range(5))
        spec = NullSpec(NullProtocol.BETWEENPOP, sizes, seed=24)
        labels = [label for label, _, _ in sizes]
        freqs = synthetic_frequencies(10000, labels, AUTO, 24, sdmaf_shift=0.05)
        statistics = []
        for record in simulate_betweenpop_null(spec, freqs):
            result = sdmaf_omnibus_diff(record.strata, AUTO)
            if not result.is_na and result.df == 4:
                statistics.append(result.statistic)
        self.assertGreater(len(statistics), 9000)
        self.assertAlmostEqual(float(np.mean(statistics)), 4.0, delta=0.2)
        print(f"   mean omnibus W = {np.mean(statistics):.3f} over {len(statistics)} variants")

    # Test 25: Frequency table
    def test_25_frequency_table(self):
        """Observed frequencies survive the TSV format"""
        print("\n25. Testing frequency table...")

        tmp = tempfile.mkdtemp()
        try:
            records = list(stream_variants(VCF, load_manifest(MANIFEST), load_region_map(REGIONS), 0.05))
            path = os.path.join(tmp, "freqs.tsv")
            self.assertEqual(write_frequency_table(path, frequencies_from_records(records)), 8)
            loaded = read_frequency_table(path)
            self.assertEqual(len(loaded), 8)
            rs7 = next(v for v in loaded if v.variant_id == "rs7")
            self.assertEqual(rs7.region, NPR)
            self.assertEqual(rs7.labels, ("AFR", "EUR", "ALL"))
            self.assertAlmostEqual(rs7.get("AFR").male[1], 0.5, places=9)
            self.assertEqual(len(rs7.get("ALL").male), 2)

            bad = os.path.join(tmp, "bad.tsv")
            with open(bad, "w", encoding="utf-8") as handle:
                handle.write("id\tregion\tpopulation\tf_bb\tf_Bb\tf_BB\tm_bb\tm_Bb\tm_BB\n")
                handle.write("v\tautosomal\tA\t0.5\t0.5\t0.5\t0.25\t0.5\t0.25\n")
            with self.assertRaises(InvalidFrequencies):
                read_frequency_table(bad)
        finally:
            shutil.rmtree(tmp, ignore_errors=True)
        print("   Frequency table read back with region-specific shapes")


class CalibrationTestCase(unittest.TestCase):
    """Type-I error under both null protocols"""

    N_VARIANTS = 24000

    @classmethod
    def _rows(cls, protocol, region, tests, n, seed, fixed_maf=None, hwd_fraction=0.5):
        sizes = reference_stratum_sizes()
        spec = NullSpec(protocol, sizes, seed)
        labels = [label for label, _, _ in sizes]
        freqs = synthetic_frequencies(n, labels, region, seed, hwd_fraction=hwd_fraction, fixed_maf=fixed_maf)
        generator = simulate_multipop_null if protocol is NullProtocol.MULTIPOP else simulate_betweenpop_null
        plan = ScanPlan(tuple(sorted(labels)), "EUR", tests)
        return [
            compute_row(record, plan)
            for record in generator(spec, freqs)
            if all(maf >= 0.05 for maf in record.population_maf)
        ]

    @classmethod
    def setUpClass(cls):
        cls.multipop = {
            region: cls._rows(NullProtocol.MULTIPOP, region, ("multi",), cls.N_VARIANTS, 100 + idx)
            for idx, region in enumerate(REGIONS_ALL)
        }
        cls.betweenpop = {
            region: cls._rows(NullProtocol.BETWEENPOP, region, ("pair-diff", "omnibus-diff"), cls.N_VARIANTS, 200 + idx)
            for idx, region in enumerate(REGIONS_ALL)
        }

    # Test 26: Multi-population calibration
    def test_26_multipop_calibration(self):
        """Multi-population test is calibrated under the multi-population null"""
        print("\n26. Testing multi-population calibration...")

        for region, rows in self.multipop.items():
            self.assertGreaterEqual(len(rows), 20000)
            statistics = [row.multi.statistic for row in rows if not row.multi.is_na]
            p_values = [row.multi.p_value for row in rows if not row.multi.is_na]
            lam = genomic_lambda(statistics, 5)
            ks = ks_distance(p_values)
            self.assertGreaterEqual(lam, 0.9)
            self.assertLessEqual(lam, 1.1)
            self.assertLess(ks, 0.02)
            print(f"   {region.value}: lambda = {lam:.3f}, KS = {ks:.4f}, n = {len(rows)}")

    # Test 27: Between-population calibration
    def test_27_betweenpop_calibration(self):
        """Difference tests are calibrated under a common sdMAF"""
        print("\n27. Testing between-population calibration...")

        for region, rows in self.betweenpop.items():
            self.assertGreaterEqual(len(rows), 20000)
            for label in ("AFR", "AMR", "EAS", "SAS"):
                results = [row.result(f"diff:{label}") for row in rows]
                lam = genomic_lambda([r.statistic for r in results if not r.is_na], 1)
                self.assertGreaterEqual(lam, 0.9)
                self.assertLessEqual(lam, 1.1)
            omnibus = [row.omnibus.statistic for row in rows if not row.omnibus.is_na and row.omnibus.df == 4]
            lam = genomic_lambda(omnibus, 4)
            self.assertGreaterEqual(lam, 0.9)
            self.assertLessEqual(lam, 1.1)
            print(f"   {region.value}: omnibus lambda = {lam:.3f}")

    # Test 28: Pooled-test conservatism
    def test_28_pooled_conservatism(self):
        """Pooling across populations with different MAFs is conservative"""
        print("\n28. Testing pooled-test conservatism...")

        fixed = {"AFR": 0.08, "AMR": 0.08, "EAS": 0.08, "EUR": 0.5, "SAS": 0.5}
        for idx, region in enumerate(REGIONS_ALL):
            rows = self._rows(NullProtocol.MULTIPOP, region, ("pooled",), 5000, 300 + idx,
                              fixed_maf=fixed, hwd_fraction=0.0)
            statistics = [row.pooled.statistic for row in rows if not row.pooled.is_na]
            p_values = np.array([row.pooled.p_value for row in rows if not row.pooled.is_na])
            lam = genomic_lambda(statistics, 1)
            upper_half = float(np.mean(p_values > 0.5))
            if region is NPR:
                self.assertLess(lam, 1.0)
            else:
                self.assertLess(lam, 0.9)
                self.assertGreater(upper_half, 0.55)
            print(f"   {region.value}: pooled lambda = {lam:.3f}, P(p > 0.5) = {upper_half:.3f}")


class ScanReportTestCase(unittest.TestCase):
    """Scan pipeline, exports and summaries"""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def _scan(self, name, **overrides):
        out = os.path.join(self.tmp, name)
        config = ScanConfig.from_env(vcf=VCF, manifest=MANIFEST, regions=REGIONS, out=out, **overrides)
        return out, run_scan(config)

    # Test 29: Hand-derived scan values
    def test_29_scan_values(self):
        """Published columns carry the hand-evaluated statistics"""
        print("\n29. Testing scan values...")

        out, summary = self._scan("results.tsv")
        self.assertEqual(summary.variants, 8)
        table = read_results(out)
        rows = table.set_index("id")

        rs1 = rows.loc["rs1"]
        self.assertEqual(rs1["f_gt:AFR"], "1,1,1")
        self.assertAlmostEqual(float(rs1["single_W:AFR"]), 1.5, places=9)
        self.assertAlmostEqual(float(rs1["single_W:EUR"]), 0.75, places=9)
        self.assertAlmostEqual(float(rs1["multi_W"]), 2.25, places=9)
        self.assertEqual(rs1["multi_df"], "2")
        self.assertAlmostEqual(float(rs1["pooled_W"]), 2.16, places=9)
        self.assertAlmostEqual(float(rs1["diff_W:EUR"]), 0.25, places=9)
        self.assertAlmostEqual(float(rs1["omnibus_W"]), 0.25, places=9)
        self.assertEqual(rs1["d:AFR"], "0.333333")

        self.assertEqual(rows.loc["rs7", "region"], "NPR")
        self.assertEqual(rows.loc["rs7", "m_gt:AFR"], "1,1")
        self.assertEqual(rows.loc["rs7", "delta_m:AFR"], "NA")
        self.assertEqual(rows.loc["rs10", "minor"], "A")
        self.assertEqual(rows.loc["rs12", "single_p:AFR"], "1.00000e+00")
        self.assertEqual(rows.loc["7:200:C:T", "n_f:AFR"], "1")

        self.assertEqual(population_labels(table), ["AFR", "EUR"])
        self.assertTrue(os.path.exists(sidecar_path(out, "qc")))
        self.assertTrue(os.path.exists(sidecar_path(out, "summary")))
        self.assertTrue(os.path.exists(sidecar_path(out, "lambda")))
        print(f"   {summary.variants} rows with hand-derived W values")

    # Test 30: Worker-count determinism
    def test_30_worker_determinism(self):
        """Byte-identical output for 1 and 3 workers, plain and gzip"""
        print("\n30. Testing worker-count determinism...")

        one, _ = self._scan("one.tsv", workers=1)
        three, _ = self._scan("three.tsv", workers=3)
        with open(one, "rb") as a, open(three, "rb") as b:
            self.assertEqual(a.read(), b.read())

        gz_one, _ = self._scan("one.tsv.gz", workers=1)
        gz_three, _ = self._scan("three.tsv.gz", workers=3)
        with open(gz_one, "rb") as a, open(gz_three, "rb") as b:
            self.assertEqual(a.read(), b.read())
        self.assertEqual(len(read_results(gz_one)), 8)

        sizes = (("A", 80, 70), ("B", 60, 90))
        spec = NullSpec(NullProtocol.MULTIPOP, sizes, 3)
        records = list(simulate_multipop_null(spec, synthetic_frequencies(40, ["A", "B"], AUTO, 3)))
        plan = ScanPlan(("A", "B"), "A")
        batch = partial(compute_rows, plan=plan)
        inline = list(WorkerPool(workers=1, batch_size=7).map_ordered(batch, records))
        parallel = list(WorkerPool(workers=2, batch_size=7).map_ordered(batch, records))
        self.assertEqual(inline, parallel)
        print("   Outputs identical across worker counts")

    # Test 31: Round-trip recompute
    def test_31_recompute(self):
        """Pooled and multi W recompute from the published counts"""
        print("\n31. Testing recompute from published counts...")

        out, _ = self._scan("results.tsv")
        table = read_results(out)
        labels = population_labels(table)
        for _, row in table.iterrows():
            recomputed = recompute_row(row, labels)
            for test in ("multi", "pooled"):
                published = row[f"{test}_W"]
                if published == "NA":
                    self.assertIsNone(recomputed[test])
                else:
                    self.assertLess(relative_gap(recomputed[test], float(published)), 1e-9)
        print(f"   {len(table)} rows recomputed within 1e-9")

    # Test 32: Empty scan
    def test_32_empty_scan(self):
        """No passing variants: header-only table, zero counts"""
        print("\n32. Testing empty scan...")

        header_only = os.path.join(self.tmp, "empty.vcf")
        with open(VCF, encoding="utf-8") as src, open(header_only, "w", encoding="utf-8") as dst:
            dst.writelines(line for line in src if line.startswith("#"))
        out = os.path.join(self.tmp, "empty.tsv")
        summary = run_scan(ScanConfig.from_env(vcf=header_only, manifest=MANIFEST, out=out))
        self.assertEqual(summary.variants, 0)
        self.assertTrue(all(count == 0 for count in summary.significant.values()))
        with open(out, encoding="utf-8") as handle:
            self.assertEqual(len(handle.readlines()), 1)
        print("   Empty input handled")

    # Test 33: Significance tracking
    def test_33_significance_tracker(self):
        """Discordance sets are disjoint and single-test"""
        print("\n33. Testing significance tracker...")

        plan = ScanPlan(("A", "B"), "A", ("multi", "pooled"))
        strong = PopulationStratumPair("A", DiploidCounts(100, 0, 100), DiploidCounts(200, 0, 0))
        opposite = PopulationStratumPair("B", DiploidCounts(200, 0, 0), DiploidCounts(100, 0, 100))
        null = PopulationStratumPair("B", FEMALE_40, FEMALE_40)

        def row(name, pairs):
            record = assemble_record("1", len(name), name, "A", "G", AUTO,
                                     [(p.population_label, p.female, p.male) for p in pairs])
            return compute_row(record, plan)

        tracker = SignificanceTracker(5e-8, plan.selectors())
        tracker.record(row("cancel", [strong, opposite]))
        tracker.record(row("both", [strong, null]))
        tracker.record(row("none", [PopulationStratumPair("A", FEMALE_40, FEMALE_40), null]))

        only_multi, only_pooled = tracker.discordance("multi", "pooled")
        self.assertEqual([key[2] for key in only_multi], ["cancel"])
        self.assertEqual(only_pooled, [])
        self.assertFalse(set(only_multi) & set(only_pooled))
        self.assertEqual(tracker.significant_count("multi"), 2)
        top = tracker.top_discordant("multi", "pooled")
        self.assertEqual(top[0]["id"], "cancel")
        self.assertEqual(tracker.get_stats()["pooled"]["tested"], 3)

        other = SignificanceTracker(5e-8, plan.selectors())
        other.record(row("later", [strong, opposite]))
        tracker.merge(other)
        self.assertEqual(tracker.significant_count("multi"), 3)
        print("   Discordance sets correct")

    # Test 34: Genomic lambda
    def test_34_genomic_lambda(self):
        """Lambda definition and edge cases"""
        print("\n34. Testing genomic lambda...")

        self.assertAlmostEqual(genomic_lambda([chisq_median(1)] * 11, 1), 1.0, places=12)
        self.assertEqual(genomic_lambda([0.0] * 5, 1), 0.0)
        sample = np.random.default_rng(34).chisquare(1, size=100000)
        self.assertAlmostEqual(genomic_lambda(sample, 1), 1.0, delta=0.02)
        self.assertAlmostEqual(genomic_lambda([0.5] * 3, 1, from_p=True), 1.0, places=9)
        with self.assertRaises(InputError):
            genomic_lambda([np.nan, np.nan], 1)

        collector = StatisticCollector()
        collector.add("multi", "autosomal", TestResult.from_statistic(chisq_median(2), 2))
        collector.add("multi", "autosomal", TestResult.not_available(2, "x"))
        table = collector.lambda_table()
        self.assertEqual(len(table), 1)
        self.assertAlmostEqual(float(table.loc[0, "lambda"]), 1.0, places=9)
        print("   Lambda exact on the reference median")

    # Test 35: QQ export
    def test_35_qq_export(self):
        """Expected quantiles i/(n+1) and MAF strata"""
        print("\n35. Testing QQ export...")

        qq = qq_export([0.5, 0.25, 0.125], [0.1, 0.2, 0.3], strata=1)
        self.assertEqual(list(qq["expected_p"]), [0.25, 0.5, 0.75])
        self.assertEqual(list(qq["observed_p"]), [0.125, 0.25, 0.5])

        rng = np.random.default_rng(35)
        p_values = rng.uniform(size=4000)
        maf = rng.uniform(0.05, 0.5, size=4000)
        qq = qq_export(p_values, maf, strata=4)
        self.assertEqual(sorted(set(qq["stratum"])), ["Q1", "Q2", "Q3", "Q4", "all"])
        full = qq[qq["stratum"] == "all"]
        self.assertLess(float(np.max(np.abs(full["observed_p"] - full["expected_p"]))), 0.03)
        for name in ("Q1", "Q2", "Q3", "Q4"):
            self.assertEqual(int((qq["stratum"] == name).sum()), 1000)
        q1 = qq[qq["stratum"] == "Q1"]
        q4 = qq[qq["stratum"] == "Q4"]
        self.assertLess(float(q1["maf_high"].iloc[0]), float(q4["maf_low"].iloc[0]))
        print("   QQ strata equal-sized and near the diagonal")

    # Test 36: Miami export
    def test_36_miami_export(self):
        """Display truncation at p = 0.1; NA rows kept"""
        print("\n36. Testing Miami export...")

        table = pd.DataFrame({
            "chrom": ["X", "X", "X"],
            "pos": ["10", "20", "30"],
            "id": ["a", "b", "c"],
            "ref": ["A", "A", "A"],
            "alt": ["G", "G", "G"],
            "minor": ["G", "G", "G"],
            "region": ["PAR", "NPR", "NPR"],
            "maf": ["0.1", "0.2", "0.3"],
            "multi_W": ["1", "30", "NA"],
            "multi_df": ["5", "5", "5"],
            "multi_p": ["9.62566e-01", "1.46973e-05", "NA"],
            "pooled_W": ["6.634896601", "1", "NA"],
            "pooled_p": ["1.00000e-02", "3.17311e-01", "1.00000e-02"],
        })
        export = miami_export(table, "multi", "pooled")
        self.assertAlmostEqual(export.loc[0, "display_a"], 1.0)
        self.assertAlmostEqual(export.loc[0, "nlp_a"], neg_log10_p(1.0, 5), places=12)
        self.assertAlmostEqual(export.loc[1, "display_a"], neg_log10_p(30.0, 5), places=12)
        self.assertTrue(np.isnan(export.loc[2, "display_a"]))
        self.assertAlmostEqual(export.loc[0, "display_b"], 2.0, places=6)
        self.assertAlmostEqual(export.loc[2, "nlp_b"], 2.0, places=12)
        self.assertEqual(len(export), 3)
        with self.assertRaises(InputError):
            miami_export(table, "omnibus", "pooled")

        value, n, df = lambda_for_selector(table, "multi")
        self.assertEqual((n, df), (2, 5))
        print("   Truncation rule applied to display columns only")

    # Test 37: Plan and header layout
    def test_37_plan_layout(self):
        """Column layout follows the test selection"""
        print("\n37. Testing plan layout...")

        plan = ScanPlan(("AFR", "EUR", "SAS"), "EUR", ("multi", "pair-diff"))
        columns = header_columns(plan)
        self.assertIn("diff_W:AFR", columns)
        self.assertNotIn("diff_W:EUR", columns)
        self.assertNotIn("pooled_W", columns)
        self.assertEqual(plan.selectors(), ["multi", "diff:AFR", "diff:SAS"])

        everything = ScanPlan(("AFR", "EUR", "SAS"), "AFR", all_pairs=True)
        self.assertIn("diff_p:EUR|SAS", header_columns(everything))
        with self.assertRaises(ConfigError):
            ScanPlan(("AFR",), "EUR")
        print(f"   {len(columns)} columns for the reduced plan")

    # Test 42: Golden scan
    def test_42_golden_scan(self):
        """Scan of the fixture matches the golden table byte for byte"""
        print("\n42. Testing golden scan output...")

        with open(GOLDEN, "rb") as handle:
            golden = handle.read()
        for workers in (1, 3):
            out, summary = self._scan(f"golden_{workers}.tsv", workers=workers)
            self.assertEqual(summary.variants, 8)
            with open(out, "rb") as handle:
                self.assertEqual(handle.read(), golden, f"workers={workers}")
        print("   Identical to golden.tsv for 1 and 3 workers")

    # Test 43: Underflowing p-values
    def test_43_underflowing_p(self):
        """Miami and QQ exports keep the log-space -log10 p past double range"""
        print("\n43. Testing exports on underflowing p-values...")

        plan = ScanPlan(("A", "B"), "A", ("multi", "pooled"))
        split = [
            (label, DiploidCounts(4900, 100, 0), DiploidCounts(0, 100, 4900))
            for label in ("A", "B")
        ]
        row = compute_row(assemble_record("1", 100, "split", "A", "G", AUTO, split), plan)
        out = os.path.join(self.tmp, "split.tsv")
        with ResultWriter(out, plan) as writer:
            writer.write(row)
        table = read_results(out)
        self.assertLess(float(table.loc[0, "multi_p"]), 1e-300)

        expected_multi = neg_log10_p(float(table.loc[0, "multi_W"]), 2)
        expected_pooled = neg_log10_p(float(table.loc[0, "pooled_W"]), 1)
        self.assertGreater(expected_multi, 1e5)

        export = miami_export(table, "multi", "pooled")
        self.assertLess(relative_gap(export.loc[0, "nlp_a"], expected_multi), 1e-9)
        self.assertLess(relative_gap(export.loc[0, "nlp_b"], expected_pooled), 1e-9)
        self.assertLess(relative_gap(export.loc[0, "display_a"], expected_multi), 1e-9)

        qq = qq_from_results(table, "multi", strata=4)
        self.assertEqual(list(qq["stratum"]), ["all", "Q1"])
        self.assertTrue(all(relative_gap(value, expected_multi) < 1e-9 for value in qq["observed_nlp"]))
        print(f"   -log10 p = {expected_multi:.1f} carried into both exports")

    # Test 44: Small QQ and histogram exports
    def test_44_small_exports(self):
        """Fewer values than MAF strata; p-value histogram bins"""
        print("\n44. Testing small QQ and histogram exports...")

        qq = qq_export([0.5], [0.2], strata=4)
        self.assertEqual(list(qq["stratum"]), ["all", "Q1"])
        qq = qq_export([0.5, 0.1, 0.9], [0.3, 0.1, 0.2], strata=4)
        self.assertEqual(sorted(set(qq["stratum"])), ["Q1", "Q2", "Q3", "all"])
        self.assertEqual(list(qq.loc[qq["stratum"] == "Q1", "observed_p"]), [0.1])
        self.assertEqual([group.size for group in maf_strata([0.3, 0.3, 0.3, 0.3, 0.1], 2)], [3, 2])
        self.assertEqual(list(maf_strata([0.3, 0.3, 0.3, 0.3, 0.1], 2)[0]), [4, 0, 1])

        hist = hist_export([0.0, 0.25, 0.5, 1.0, np.nan], bins=2)
        self.assertEqual(list(hist["count"]), [2, 2])
        self.assertEqual(list(hist["density"]), [1.0, 1.0])
        self.assertEqual(list(hist["bin_high"]), [0.5, 1.0])

        uniform = np.random.default_rng(44).uniform(size=20000)
        hist = hist_export(uniform, bins=20)
        self.assertEqual(int(hist["count"].sum()), 20000)
        self.assertLess(float(np.max(np.abs(hist["density"] - 1.0))), 0.15)
        with self.assertRaises(InputError):
            hist_export([np.nan])
        with self.assertRaises(InputError):
            hist_export([0.5], bins=0)
        print("   Empty strata dropped; uniform p-values give a flat histogram")

    # Test 45: Failed writes leave no output
    def test_45_failed_write(self):
        """An error mid-stream removes the partial result table"""
        print("\n45. Testing failed result writes...")

        plan = ScanPlan(("A",), "A", ("pooled",))
        row = compute_row(assemble_record("1", 5, "v", "A", "G", AUTO, [("A", FEMALE_40, MALE_30)]), plan)
        path = os.path.join(self.tmp, "partial.tsv.gz")
        with self.assertRaises(RuntimeError):
            with ResultWriter(path, plan) as writer:
                writer.write(row)
                raise RuntimeError("worker died")
        self.assertFalse(os.path.exists(path))
        self.assertFalse(os.path.exists(path + ".partial"))

        with ResultWriter(path, plan) as writer:
            writer.write(row)
        self.assertFalse(os.path.exists(path + ".partial"))
        self.assertEqual(len(read_results(path)), 1)

        out = os.path.join(self.tmp, "aborted.tsv")
        with self.assertRaises(MalformedVcfLine):
            self._scan("aborted.tsv", on_malformed="abort")
        self.assertFalse(os.path.exists(out))
        self.assertFalse(os.path.exists(out + ".partial"))
        print("   No result table left behind after a failure")


class ConfigAndCliTestCase(unittest.TestCase):
    """Configuration layer and command line"""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    # Test 38: Configuration
    def test_38_config(self):
        """Environment defaults, overrides and validation"""
        print("\n38. Testing configuration...")

        with mock.patch.dict(os.environ, {"SDMAF_SIGNIFICANCE": "1e-5", "SDMAF_WORKERS": "2"}):
            config = ScanConfig.from_env(vcf="a", manifest="b", out="c", workers=None)
            self.assertEqual(config.significance, 1e-5)
            self.assertEqual(config.workers, 2)
            self.assertEqual(ScanConfig.from_env(vcf="a", manifest="b", out="c", workers=4).workers, 4)

        with self.assertRaises(ConfigError):
            ScanConfig.from_env(vcf="a", manifest="b", out="c", significance=1.5)
        with self.assertRaises(ConfigError):
            ScanConfig.from_env(vcf="a", manifest="b", out="c", tests="multi,bogus")
        with self.assertRaises(ConfigError):
            ScanConfig.from_env(vcf="a", manifest="b", out="c", workers=0)

        config = ScanConfig.from_env(vcf="a", manifest="b", out="c")
        self.assertEqual(config.resolve_baseline(["EUR", "AFR"]).baseline, "AFR")
        with self.assertRaises(ConfigError):
            ScanConfig.from_env(vcf="a", manifest="b", out="c", baseline="SAS").resolve_baseline(["AFR"])

        self.assertEqual(parse_tests("pooled,multi"), ("multi", "pooled"))
        with self.assertRaises(ConfigError):
            SimulationConfig.from_env(out="x", freqs="f", synthetic=10)
        print("   Settings validated")

    # Test 39: CLI scan and summaries
    def test_39_cli(self):
        """scan, lambda, qq and miami subcommands"""
        print("\n39. Testing command line...")

        out = os.path.join(self.tmp, "cli.tsv")
        freqs = os.path.join(self.tmp, "freqs.tsv")
        code = main([
            "scan", "--vcf", VCF, "--manifest", MANIFEST, "--regions", REGIONS,
            "--out", out, "--export-freqs", freqs, "--baseline", "EUR",
        ])
        self.assertEqual(code, 0)
        self.assertIn("diff_W:AFR", read_results(out).columns)
        self.assertTrue(os.path.exists(freqs))

        self.assertEqual(main(["lambda", "--input", out, "--test", "pooled"]), 0)
        qq_out = os.path.join(self.tmp, "qq.tsv")
        self.assertEqual(main(["qq", "--input", out, "--strata", "2", "--out", qq_out]), 0)
        miami_out = os.path.join(self.tmp, "miami.tsv")
        self.assertEqual(main(["miami", "--input", out, "--regions", REGIONS, "--out", miami_out]), 0)
        self.assertEqual(len(pd.read_csv(miami_out, sep="\t")), 8)

        sim_out = os.path.join(self.tmp, "sim.tsv")
        self.assertEqual(main(["simulate", "--freqs", freqs, "--sizes", "AFR:40:40,EUR:50:30",
                               "--seed", "9", "--out", sim_out]), 0)
        with open(sim_out, encoding="utf-8") as handle:
            self.assertTrue(handle.readline().startswith("# protocol=multipop seed=9"))

        self.assertEqual(main(["lambda", "--input", os.path.join(self.tmp, "missing.tsv")]), 1)
        self.assertEqual(main(["scan", "--vcf", VCF, "--manifest", MANIFEST, "--out", out, "--baseline", "XYZ"]), 1)
        print("   Subcommands succeed; input errors exit with 1")

    # Test 40: Simulation runner
    def test_40_run_simulation(self):
        """Synthetic between-population run with header and lambda sidecar"""
        print("\n40. Testing simulation runner...")

        out = os.path.join(self.tmp, "sim.tsv.gz")
        config = SimulationConfig.from_env(
            protocol="betweenpop", synthetic=300, region="NPR", seed=4, out=out,
            sizes=(("A", 120, 110), ("B", 90, 100), ("C", 100, 100)),
        )
        summary = run_simulation(config)
        self.assertGreater(summary.variants, 200)
        with gzip.open(out, "rt", encoding="utf-8") as handle:
            header = handle.readline()
        self.assertIn("protocol=betweenpop", header)
        self.assertIn("region=NPR", header)
        self.assertEqual(len(read_results(out)), summary.variants)
        lambdas = pd.read_csv(sidecar_path(out, "lambda"), sep="\t")
        self.assertIn("omnibus", set(lambdas["test"]))
        print(f"   {summary.variants} simulated variants written")

    # Test 46: CLI usage errors and histogram
    def test_46_cli_usage_and_hist(self):
        """Usage errors exit with 1; hist subcommand"""
        print("\n46. Testing CLI usage errors and hist...")

        for argv in (["scan", "--vcf", VCF], ["frobnicate"], ["qq", "--input", "x", "--strata", "many"]):
            with self.assertRaises(SystemExit) as ctx:
                main(argv)
            self.assertEqual(ctx.exception.code, 1, argv)

        out = os.path.join(self.tmp, "cli.tsv")
        self.assertEqual(main(["scan", "--vcf", VCF, "--manifest", MANIFEST, "--regions", REGIONS, "--out", out]), 0)
        hist_out = os.path.join(self.tmp, "hist.tsv")
        self.assertEqual(main(["hist", "--input", out, "--test", "pooled", "--bins", "4", "--out", hist_out]), 0)
        hist = pd.read_csv(hist_out, sep="\t")
        self.assertEqual(len(hist), 4)
        self.assertEqual(int(hist["count"].sum()), 8)
        self.assertEqual(main(["hist", "--input", out, "--bins", "0"]), 1)
        print("   Usage errors exit with 1; histogram written")


def run_tests():
    """Run all tests with detailed output"""
    loader = unittest.TestLoader()
    test_suite = unittest.TestSuite()
    for case in (
        CoreStatsTestCase,
        OracleTestCase,
        IngestTestCase,
        SimulateTestCase,
        CalibrationTestCase,
        ScanReportTestCase,
        ConfigAndCliTestCase,
    ):
        test_suite.addTests(loader.loadTestsFromTestCase(case))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(test_suite)

    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)
    print(f"Tests run: {result.testsRun}")
    print(f"Successes: {result.testsRun - len(result.failures) - len(result.errors)}")
    print(f"Failures: {len(result.failures)}")
    print(f"Errors: {len(result.errors)}")

    if result.testsRun > 0:
        success_rate = ((result.testsRun - len(result.failures) - len(result.errors)) / result.testsRun * 100)
        print(f"Success rate: {success_rate:.1f}%")

    if result.failures:
        print("\nFAILURES:")
        for test, _ in result.failures:
            print(f"  - {test}")

    if result.errors:
        print("\nERRORS:")
        for test, _ in result.errors:
            print(f"  - {test}")

    if not result.failures and not result.errors:
        print("\nALL TESTS PASSED")

    print("=" * 60)
    return result.wasSuccessful()


if __name__ == "__main__":
    print("sdMAF Scanner - Unit Test Suite")
    print("=" * 60)

    try:
        success = run_tests()
        exit(0 if success else 1)
    except KeyboardInterrupt:
        print("\n\nTests interrupted by user")
        exit(1)
