"""
Scan Results
Per-variant result rows: computing every requested test for one variant,
formatting the row as TSV, and reading result tables back
"""

from __future__ import annotations

import gzip
import io
import logging
import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
import pandas as pd

from config.settings import TEST_NAMES
from core_stats.chisq import TestResult, neg_log10_p
from core_stats.errors import ConfigError, EmptyStratum, InputError
from core_stats.genotypes import PopulationStratumPair, RegionClass, counts_from_tuple, estimate_stratum
from core_stats.wald_tests import (
    NA_TOO_FEW,
    sdmaf_multi,
    sdmaf_omnibus_diff,
    sdmaf_pair_diff,
    sdmaf_pooled,
    sdmaf_single,
)

logger = logging.getLogger(__name__)

NA = "NA"
NA_EMPTY = "empty stratum"
PAIR_SEPARATOR = "|"

FIXED_COLUMNS = ("chrom", "pos", "id", "ref", "alt", "minor", "region", "maf")


@dataclass(frozen=True)
class ScanPlan:
    """
    Which tests to run and how to lay out the columns

    populations are in column (alphabetical) order; pairwise differences
    are taken against the baseline unless all_pairs is set.
    """

    populations: tuple
    baseline: str
    tests: tuple = field(default=TEST_NAMES)
    all_pairs: bool = False

    def __post_init__(self):
        if not self.populations:
            raise ConfigError("Scan plan needs at least one population")
        if self.baseline not in self.populations:
            raise ConfigError(f"Baseline {self.baseline!r} is not among {list(self.populations)}")

    def runs(self, test_name):
        return test_name in self.tests

    def diff_labels(self):
        """Column labels of the pairwise-difference tests"""
        if self.all_pairs:
            return [f"{a}{PAIR_SEPARATOR}{b}" for a, b in combinations(self.populations, 2)]
        return [label for label in self.populations if label != self.baseline]

    def diff_pairs(self):
        """(first, second) population labels per pairwise-difference column"""
        if self.all_pairs:
            return list(combinations(self.populations, 2))
        return [(self.baseline, label) for label in self.populations if label != self.baseline]

    def selectors(self):
        """Test selectors understood by ResultRow.result and the exports"""
        names = []
        if self.runs("single"):
            names.extend(f"single:{label}" for label in self.populations)
        if self.runs("multi"):
            names.append("multi")
        if self.runs("pooled"):
            names.append("pooled")
        if self.runs("pair-diff"):
            names.extend(f"diff:{label}" for label in self.diff_labels())
        if self.runs("omnibus-diff"):
            names.append("omnibus")
        return names


@dataclass(frozen=True)
class PopulationColumns:
    """Per-population estimates; None marks an empty stratum"""

    label: str
    female: object
    male: object
    p_f: Optional[float]
    p_m: Optional[float]
    delta_f: Optional[float]
    delta_m: Optional[float]
    d: Optional[float]
    single: Optional[TestResult] = None


@dataclass(frozen=True)
class ResultRow:
    chrom: str
    pos: int
    id: str
    ref: str
    alt: str
    minor: str
    region: RegionClass
    maf: float
    populations: tuple
    multi: Optional[TestResult] = None
    pooled: Optional[TestResult] = None
    diffs: tuple = field(default_factory=tuple)
    omnibus: Optional[TestResult] = None

    def result(self, selector):
        """
        Look up one test result

        Args:
            selector: "multi", "pooled", "omnibus", "single:POP" or "diff:LABEL"

        Returns:
            TestResult, or None if the test was not run
        """
        if selector == "multi":
            return self.multi
        if selector == "pooled":
            return self.pooled
        if selector == "omnibus":
            return self.omnibus
        kind, _, label = selector.partition(":")
        if kind == "single":
            for column in self.populations:
                if column.label == label:
                    return column.single
        elif kind == "diff":
            for diff_label, diff in self.diffs:
                if diff_label == label:
                    return diff
        return None


def _guarded(compute, df):
    try:
        return compute()
    except EmptyStratum:
        return TestResult.not_available(df, NA_EMPTY)


def _population_columns(pair, region, plan):
    try:
        female = estimate_stratum(pair.female)
        male = estimate_stratum(pair.male)
    except EmptyStratum:
        female = male = None

    single = None
    if plan.runs("single"):
        single = _guarded(lambda: sdmaf_single(pair, region), 1)

    return PopulationColumns(
        label=pair.population_label,
        female=pair.female,
        male=pair.male,
        p_f=female.p_hat if female else None,
        p_m=male.p_hat if male else None,
        delta_f=female.delta_hat if female else None,
        delta_m=male.delta_hat if male else None,
        d=(female.p_hat - male.p_hat) if female else None,
        single=single,
    )


def compute_row(record, plan):
    """
    Run every test in the plan on one variant

    Args:
        record: VariantRecord
        plan: ScanPlan

    Returns:
        ResultRow
    """
    by_label = {pair.population_label: pair for pair in record.strata}
    try:
        pairs = [by_label[label] for label in plan.populations]
    except KeyError as e:
        raise InputError(f"Variant {record.id} has no counts for population {e.args[0]}") from None
    region = record.region
    k = len(pairs)

    multi = pooled = omnibus = None
    diffs = ()
    if plan.runs("multi"):
        multi = _guarded(lambda: sdmaf_multi(pairs, region), k)
    if plan.runs("pooled"):
        pooled = _guarded(lambda: sdmaf_pooled(pairs, region), 1)
    if plan.runs("pair-diff"):
        diffs = tuple(
            (label, _guarded(lambda a=first, b=second: sdmaf_pair_diff(by_label[a], by_label[b], region), 1))
            for label, (first, second) in zip(plan.diff_labels(), plan.diff_pairs())
        )
    if plan.runs("omnibus-diff"):
        if k < 2:
            omnibus = TestResult.not_available(1, NA_TOO_FEW)
        else:
            omnibus = _guarded(lambda: sdmaf_omnibus_diff(pairs, region), k - 1)

    return ResultRow(
        chrom=record.chrom,
        pos=record.pos,
        id=record.id,
        ref=record.ref,
        alt=record.alt,
        minor=record.minor_allele,
        region=region,
        maf=record.whole_sample_maf,
        populations=tuple(_population_columns(pair, region, plan) for pair in pairs),
        multi=multi,
        pooled=pooled,
        diffs=diffs,
        omnibus=omnibus,
    )


def compute_rows(records, plan):
    """compute_row over a batch; the unit of work handed to the worker pool"""
    return [compute_row(record, plan) for record in records]


# formatting

def format_p(value):
    return NA if value is None else f"{value:.5e}"


def format_statistic(value):
    return NA if value is None else f"{value:.12g}"


def format_estimate(value):
    return NA if value is None else f"{value:.6f}"


def format_counts(counts):
    return ",".join(str(value) for value in counts.as_tuple())


def header_columns(plan):
    """Column names of the result table for a plan"""
    columns = list(FIXED_COLUMNS)
    for label in plan.populations:
        columns.extend(
            f"{name}:{label}"
            for name in ("f_gt", "m_gt", "n_f", "n_m", "p_f", "p_m", "delta_f", "delta_m", "d")
        )
        if plan.runs("single"):
            columns.extend((f"single_W:{label}", f"single_p:{label}"))
    if plan.runs("multi"):
        columns.extend(("multi_W", "multi_df", "multi_p"))
    if plan.runs("pooled"):
        columns.extend(("pooled_W", "pooled_p"))
    if plan.runs("pair-diff"):
        for label in plan.diff_labels():
            columns.extend((f"diff_W:{label}", f"diff_p:{label}"))
    if plan.runs("omnibus-diff"):
        columns.extend(("omnibus_W", "omnibus_df", "omnibus_p"))
    return columns


def format_row(row, plan):
    """Field strings of one row, aligned with header_columns(plan)"""
    fields = [
        row.chrom,
        str(row.pos),
        row.id,
        row.ref,
        row.alt,
        row.minor,
        row.region.value,
        format_estimate(row.maf),
    ]
    for column in row.populations:
        fields.extend((
            format_counts(column.female),
            format_counts(column.male),
            str(column.female.total()),
            str(column.male.total()),
            format_estimate(column.p_f),
            format_estimate(column.p_m),
            format_estimate(column.delta_f),
            format_estimate(column.delta_m),
            format_estimate(column.d),
        ))
        if plan.runs("single"):
            fields.extend((format_statistic(column.single.statistic), format_p(column.single.p_value)))
    if plan.runs("multi"):
        fields.extend((format_statistic(row.multi.statistic), str(row.multi.df), format_p(row.multi.p_value)))
    if plan.runs("pooled"):
        fields.extend((format_statistic(row.pooled.statistic), format_p(row.pooled.p_value)))
    if plan.runs("pair-diff"):
        for _, diff in row.diffs:
            fields.extend((format_statistic(diff.statistic), format_p(diff.p_value)))
    if plan.runs("omnibus-diff"):
        fields.extend((
            format_statistic(row.omnibus.statistic),
            str(row.omnibus.df),
            format_p(row.omnibus.p_value),
        ))
    return fields


class _GzipTextWriter(io.TextIOWrapper):
    """Text writer over a gzip stream with a fixed header (no name, mtime 0)"""

    def __init__(self, path):
        raw = open(path, "wb")
        super().__init__(
            gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0),
            encoding="utf-8",
            newline="\n",
        )
        self._raw = raw

    def close(self):
        try:
            super().close()
        finally:
            self._raw.close()


def open_text_output(path, compress=None):
    """Open an output table for writing; '.gz' paths are gzip-compressed unless compress says otherwise"""
    if compress is None:
        compress = str(path).endswith(".gz")
    if compress:
        return _GzipTextWriter(path)
    return open(path, "w", encoding="utf-8", newline="\n")


class ResultWriter:
    """
    Streams result rows to a TSV in the order they are written

    Rows go to "<path>.partial", renamed over path when the writer closes
    cleanly; an exception inside the with block removes the partial file.
    """

    def __init__(self, path, plan, comments=()):
        """
        Initialize result writer

        Args:
            path: Output path (".gz" compresses)
            plan: ScanPlan deciding the columns
            comments: Lines written first, each prefixed with '#'
        """
        self.path = path
        self.plan = plan
        self.rows_written = 0
        self.partial_path = f"{path}.partial"
        self._handle = open_text_output(self.partial_path, compress=str(path).endswith(".gz"))
        for line in comments:
            self._handle.write(f"# {line}\n")
        self._handle.write("\t".join(header_columns(plan)) + "\n")

        logger.info(f"Result writer opened: {path} ({len(header_columns(plan))} columns)")

    def write(self, row):
        self._handle.write("\t".join(format_row(row, self.plan)) + "\n")
        self.rows_written += 1

    def close(self, commit=True):
        if self._handle.closed:
            return
        self._handle.close()
        if commit:
            os.replace(self.partial_path, self.path)
            logger.info(f"Result writer closed: {self.rows_written} rows in {self.path}")
        else:
            os.remove(self.partial_path)
            logger.warning(f"Result writer discarded {self.partial_path} after {self.rows_written} rows")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close(commit=exc_type is None)
        return False


# reading

def read_results(path):
    """
    Read a result table

    Args:
        path: TSV written by ResultWriter, plain or gzip; '#' lines skipped

    Returns:
        pandas DataFrame of strings ("NA" kept verbatim)
    """
    try:
        table = pd.read_csv(path, sep="\t", comment="#", dtype=str, keep_default_na=False, compression="infer")
    except pd.errors.EmptyDataError:
        raise InputError(f"Result table is empty: {path}") from None
    missing = [col for col in FIXED_COLUMNS if col not in table.columns]
    if missing:
        raise InputError(f"{path} is not a result table; missing columns {missing}")
    logger.info(f"Result table loaded from {path}: {len(table)} rows")
    return table


def numeric_column(table, column):
    """Float array of a result column with NA as nan"""
    if column not in table.columns:
        raise InputError(f"Result table has no column {column!r}")
    return pd.to_numeric(table[column].replace(NA, np.nan), errors="coerce").to_numpy(dtype=float)


def _column_names(selector):
    kind, _, label = selector.partition(":")
    if kind in ("multi", "pooled", "omnibus") and not label:
        return f"{kind}_W", f"{kind}_p", (f"{kind}_df" if kind != "pooled" else None)
    if kind == "single" and label:
        return f"single_W:{label}", f"single_p:{label}", None
    if kind == "diff" and label:
        return f"diff_W:{label}", f"diff_p:{label}", None
    raise InputError(f"Unknown test selector {selector!r}; use multi, pooled, omnibus, single:POP or diff:POP")


def selector_columns(table, selector):
    """
    Statistic, p-value and df arrays of one test in a result table

    Returns:
        (w, p, df) float arrays; df is all ones for 1-df tests
    """
    w_column, p_column, df_column = _column_names(selector)
    w = numeric_column(table, w_column)
    p = numeric_column(table, p_column)
    df = numeric_column(table, df_column) if df_column else np.ones(len(table))
    return w, p, df


def selector_nlp(table, selector):
    """
    -log10 p of one test, taken from the published W and df in log space

    The printed p column underflows to 0 for very large W; it is only used
    for rows without a statistic.

    Returns:
        float array, NaN where the test is NA
    """
    w, p, dfs = selector_columns(table, selector)
    with np.errstate(divide="ignore", invalid="ignore"):
        nlp = -np.log10(p)
    for i in np.flatnonzero(np.isfinite(w) & np.isfinite(dfs) & (w >= 0)):
        nlp[i] = neg_log10_p(float(w[i]), int(dfs[i]))
    return nlp


def population_labels(table):
    """Population labels of a result table, in column order"""
    return [column.split(":", 1)[1] for column in table.columns if column.startswith("f_gt:")]


def recompute_row(row, populations):
    """
    Recompute the pooled and multi-population W from a row's published counts

    Args:
        row: Mapping of column -> string (a read_results row)
        populations: Population labels

    Returns:
        {"multi": W or None, "pooled": W or None}
    """
    region = RegionClass.parse(row["region"])
    pairs = [
        PopulationStratumPair(
            label,
            counts_from_tuple(row[f"f_gt:{label}"].split(",")),
            counts_from_tuple(row[f"m_gt:{label}"].split(",")),
        )
        for label in populations
    ]
    multi = _guarded(lambda: sdmaf_multi(pairs, region), len(pairs))
    pooled = _guarded(lambda: sdmaf_pooled(pairs, region), 1)
    return {"multi": multi.statistic, "pooled": pooled.statistic}
