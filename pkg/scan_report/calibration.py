"""
Calibration
Genomic-control lambda, Kolmogorov-Smirnov distance to Uniform(0,1),
MAF-stratified QQ data and p-value histograms for result p-values
"""

from __future__ import annotations

import logging
from collections import defaultdict

import numpy as np
import pandas as pd
from scipy import stats

from core_stats.chisq import chisq_median
from core_stats.errors import InputError
from scan_report.results import numeric_column, selector_columns, selector_nlp

logger = logging.getLogger(__name__)

QQ_COLUMNS = [
    "stratum", "maf_low", "maf_high", "rank",
    "expected_p", "observed_p", "expected_nlp", "observed_nlp", "lambda",
]
LAMBDA_COLUMNS = ["test", "region", "df", "n", "median_W", "lambda", "ks"]
HIST_COLUMNS = ["bin_low", "bin_high", "count", "density", "expected_count"]


def _finite(values):
    values = np.asarray(values, dtype=float)
    return values[np.isfinite(values)]


def genomic_lambda(values, df, from_p=False):
    """
    Genomic-control inflation factor median(W) / median(chi-square df)

    Args:
        values: Wald statistics, or p-values when from_p is set; NaN = NA
        df: Degrees of freedom of the reference distribution
        from_p: Convert p-values back to statistics by tail inversion

    Returns:
        lambda (float)

    Raises:
        InputError: every value is NA
    """
    values = _finite(values)
    if values.size == 0:
        raise InputError("Cannot compute lambda: no non-NA values")
    if from_p:
        values = stats.chi2.isf(np.clip(values, 0.0, 1.0), df)
    return float(np.median(values) / chisq_median(int(df)))


def ks_distance(p_values):
    """Kolmogorov-Smirnov distance of the p-values to Uniform(0, 1)"""
    p_values = _finite(p_values)
    if p_values.size == 0:
        raise InputError("Cannot compute KS distance: no non-NA p-values")
    return float(stats.kstest(p_values, "uniform").statistic)


def lambda_for_selector(table, selector, df=None):
    """
    Lambda of one test in a result table

    Uses the published W when every non-NA row shares one df, otherwise
    inverts the p-values at the requested (or most common) df.

    Returns:
        (lambda, n, df)
    """
    w, p, dfs = selector_columns(table, selector)
    present = np.isfinite(p)
    if not present.any():
        raise InputError(f"Cannot compute lambda for {selector}: no non-NA values")
    observed_dfs = dfs[present & np.isfinite(dfs)]
    modal_df = int(pd.Series(observed_dfs).mode().iloc[0]) if observed_dfs.size else 1
    target_df = int(df) if df is not None else modal_df

    if np.all(observed_dfs == target_df) and np.isfinite(w[present]).all():
        value = genomic_lambda(w[present], target_df)
    else:
        logger.warning(f"{selector}: df varies or differs from {target_df}; lambda computed from p-values")
        value = genomic_lambda(p[present], target_df, from_p=True)
    return value, int(present.sum()), target_df


def _qq_block(name, p_values, nlp, maf, lam):
    # most significant first, ranked on -log10 p so underflowed p keep their order
    order = np.argsort(-nlp, kind="stable")
    n = order.size
    expected = np.arange(1, n + 1) / (n + 1.0)
    return pd.DataFrame({
        "stratum": name,
        "maf_low": float(np.min(maf)) if maf.size else np.nan,
        "maf_high": float(np.max(maf)) if maf.size else np.nan,
        "rank": np.arange(1, n + 1),
        "expected_p": expected,
        "observed_p": p_values[order],
        "expected_nlp": -np.log10(expected),
        "observed_nlp": nlp[order],
        "lambda": lam,
    }, columns=QQ_COLUMNS)


def maf_strata(maf, strata):
    """
    Split value indices into equal-sized whole-sample-MAF groups

    Returns:
        List of index arrays, lowest MAF first; empty groups (fewer values
        than strata) are dropped
    """
    order = np.argsort(np.asarray(maf, dtype=float), kind="stable")
    return [group for group in np.array_split(order, strata) if group.size]


def qq_export(p_values, maf, df=1, strata=4, statistics=None, nlp=None):
    """
    QQ data for the full set and each whole-sample-MAF stratum

    Observed p-values are sorted ascending and paired with the uniform
    expected quantiles i / (n + 1). Strata are equal-sized MAF quantile
    groups (quartiles by default).

    Args:
        p_values: Observed p-values (NaN = NA, dropped)
        maf: Whole-sample MAF per value
        df: Degrees of freedom for the stratum lambda
        strata: Number of MAF groups (1 = full set only)
        statistics: Optional W per value; lambda is taken from p otherwise
        nlp: Optional -log10 p per value computed in log space; -log10 of
            p_values otherwise

    Returns:
        pandas DataFrame with QQ_COLUMNS
    """
    p_values = np.asarray(p_values, dtype=float)
    maf = np.asarray(maf, dtype=float)
    keep = np.isfinite(p_values)
    if not keep.any():
        raise InputError("QQ export needs at least one non-NA p-value")
    if nlp is None:
        with np.errstate(divide="ignore"):
            nlp = -np.log10(p_values)
    nlp = np.asarray(nlp, dtype=float)[keep]
    p_values, maf = p_values[keep], maf[keep]
    w = None if statistics is None else np.asarray(statistics, dtype=float)[keep]

    def _lambda(index):
        if w is not None and np.isfinite(w[index]).all():
            return genomic_lambda(w[index], df)
        return genomic_lambda(p_values[index], df, from_p=True)

    everything = np.arange(p_values.size)
    blocks = [_qq_block("all", p_values, nlp, maf, _lambda(everything))]
    if strata > 1:
        for number, index in enumerate(maf_strata(maf, strata), start=1):
            blocks.append(_qq_block(f"Q{number}", p_values[index], nlp[index], maf[index], _lambda(index)))

    table = pd.concat(blocks, ignore_index=True)
    logger.info(f"QQ data: {p_values.size} p-values in {len(blocks) - 1} MAF strata")
    return table


def qq_from_results(table, selector, strata=4):
    """qq_export for one test of a result table"""
    w, p, dfs = selector_columns(table, selector)
    present = dfs[np.isfinite(p)]
    df = int(pd.Series(present).mode().iloc[0]) if present.size else 1
    statistics = w if np.all(present == df) else None
    return qq_export(
        p,
        numeric_column(table, "maf"),
        df=df,
        strata=strata,
        statistics=statistics,
        nlp=selector_nlp(table, selector),
    )


def hist_export(p_values, bins=20):
    """
    p-value histogram data on equal-width bins of [0, 1]

    Under a calibrated null every bin holds about n / bins values.

    Args:
        p_values: Observed p-values (NaN = NA, dropped)
        bins: Number of bins

    Returns:
        pandas DataFrame with HIST_COLUMNS
    """
    if bins < 1:
        raise InputError(f"Histogram needs at least one bin, got {bins}")
    p_values = _finite(p_values)
    if p_values.size == 0:
        raise InputError("Histogram export needs at least one non-NA p-value")
    counts, edges = np.histogram(np.clip(p_values, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    width = 1.0 / bins
    return pd.DataFrame({
        "bin_low": edges[:-1],
        "bin_high": edges[1:],
        "count": counts,
        "density": counts / (p_values.size * width),
        "expected_count": p_values.size * width,
    }, columns=HIST_COLUMNS)


def hist_from_results(table, selector, bins=20):
    """hist_export for one test of a result table"""
    _, p, _ = selector_columns(table, selector)
    return hist_export(p, bins=bins)


def write_table(path, table, float_format="%.6g"):
    """Write a TSV export (pandas)"""
    table.to_csv(path, sep="\t", index=False, float_format=float_format, na_rep="NA")
    logger.info(f"Wrote {len(table)} rows to {path}")


class StatisticCollector:
    """
    Accumulates Wald statistics per (test, region, df) for lambda summaries
    """

    def __init__(self):
        self.values = defaultdict(list)

    def add(self, selector, region, result):
        """Record one TestResult (NA results are ignored)"""
        if result is None or result.is_na:
            return
        self.values[(selector, region, result.df)].append(result.statistic)

    def record_row(self, row, selectors):
        for selector in selectors:
            self.add(selector, row.region.value, row.result(selector))

    def merge(self, other):
        for key, values in other.values.items():
            self.values[key].extend(values)
        return self

    def lambda_table(self):
        """
        Lambda and KS distance per test and region class

        Returns:
            pandas DataFrame with LAMBDA_COLUMNS, sorted by test, region, df
        """
        rows = []
        for (selector, region, df), values in sorted(self.values.items()):
            values = np.asarray(values, dtype=float)
            rows.append({
                "test": selector,
                "region": region,
                "df": df,
                "n": values.size,
                "median_W": float(np.median(values)),
                "lambda": genomic_lambda(values, df),
                "ks": ks_distance(stats.chi2.sf(values, df)),
            })
        return pd.DataFrame(rows, columns=LAMBDA_COLUMNS)
