"""
Scanner
Runs the sdMAF tests over a VCF scan or a simulated null stream: one
reader, ordered parallel computation, one writer, then the summaries
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from functools import partial

import pandas as pd

from core_stats.genotypes import RegionClass
from ingest.manifest import load_manifest
from ingest.qc_stats import IngestQC
from ingest.regions import load_region_map
from ingest.vcf_stream import passes_maf_filter, stream_variants
from scan_report.calibration import StatisticCollector, write_table
from scan_report.results import ResultWriter, ScanPlan, compute_rows
from scan_report.significance import TOP_DISCORDANT, SignificanceTracker
from scan_report.worker_pool import WorkerPool
from simulate.frequency_table import read_frequency_table, write_frequency_table
from simulate.null_models import (
    NullProtocol,
    NullSpec,
    frequencies_from_records,
    reference_stratum_sizes,
    simulate_betweenpop_null,
    simulate_multipop_null,
    synthetic_frequencies,
)

logger = logging.getLogger(__name__)

# the comparison reported in the summary
COMPARED_TESTS = ("multi", "pooled")

DISCORDANT_COLUMNS = ["chrom", "pos", "id", "region", "only", "nlp_a", "nlp_b", "gap", "top"]


def sidecar_path(out, kind):
    """'results.tsv.gz' + 'qc' -> 'results.qc.tsv'"""
    stem = str(out)
    for suffix in (".gz", ".tsv", ".txt"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    return f"{stem}.{kind}.tsv"


@dataclass
class ScanSummary:
    """Counts and summaries of one run"""

    variants: int = 0
    significant: dict = field(default_factory=dict)
    tested: dict = field(default_factory=dict)
    discordant: dict = field(default_factory=dict)
    top_discordant: list = field(default_factory=list)
    lambdas: pd.DataFrame = field(default_factory=pd.DataFrame)
    qc: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    @classmethod
    def build(cls, variants, tracker, collector, qc=None):
        summary = cls(
            variants=variants,
            significant={name: tracker.significant_count(name) for name in tracker.selectors},
            tested={name: tracker.tested[name] for name in tracker.selectors},
            lambdas=collector.lambda_table(),
            qc=qc.get_stats() if qc is not None else {},
        )
        test_a, test_b = COMPARED_TESTS
        if test_a in tracker.selectors and test_b in tracker.selectors:
            only_a, only_b = tracker.discordance(test_a, test_b)
            summary.discordant = {f"{test_a}_only": len(only_a), f"{test_b}_only": len(only_b)}
            summary.top_discordant = tracker.top_discordant(test_a, test_b, n=None)
        return summary

    def metrics(self):
        """(metric, value) pairs of the summary table"""
        items = [("variants", self.variants)]
        items.extend((f"significant:{name}", count) for name, count in self.significant.items())
        items.extend((f"tested:{name}", count) for name, count in self.tested.items())
        items.extend(self.discordant.items())
        return items

    def write(self, out):
        """
        Write the summary, discordance and lambda sidecars next to out

        Returns:
            {kind: path} of the files written
        """
        summary_path = sidecar_path(out, "summary")
        with open(summary_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("metric\tvalue\n")
            for metric, value in self.metrics():
                handle.write(f"{metric}\t{value}\n")
        self.outputs["summary"] = summary_path

        lambda_path = sidecar_path(out, "lambda")
        write_table(lambda_path, self.lambdas)
        self.outputs["lambda"] = lambda_path

        if self.discordant:
            discordant_path = sidecar_path(out, "discordant")
            table = pd.DataFrame(self.top_discordant, columns=DISCORDANT_COLUMNS[:-1])
            table["top"] = [1 if idx < TOP_DISCORDANT else 0 for idx in range(len(table))]
            write_table(discordant_path, table)
            self.outputs["discordant"] = discordant_path

        logger.info(f"Summary: {dict(self.metrics())}")
        return dict(self.outputs)


def _consume(rows, writer, tracker, collector, selectors):
    count = 0
    for row in rows:
        writer.write(row)
        tracker.record(row)
        collector.record_row(row, selectors)
        count += 1
    return count


def _keep_records(records, sink):
    for record in records:
        sink.append(record)
        yield record


def run_scan(config):
    """
    Scan a VCF with every configured test

    Args:
        config: ScanConfig

    Returns:
        ScanSummary (its outputs map names the files written)
    """
    manifest = load_manifest(config.manifest)
    region_map = load_region_map(config.regions)
    config = config.resolve_baseline(manifest.testable_populations())
    plan = ScanPlan(
        populations=tuple(sorted(manifest.testable_populations())),
        baseline=config.baseline,
        tests=config.tests,
        all_pairs=config.all_pairs,
    )
    logger.info(f"Scan: populations={list(plan.populations)}, baseline={plan.baseline}, tests={list(plan.tests)}")

    qc = IngestQC()
    records = stream_variants(
        config.vcf, manifest, region_map, config.maf_threshold, qc=qc, on_malformed=config.on_malformed
    )
    exported = []
    if config.export_freqs:
        records = _keep_records(records, exported)

    pool = WorkerPool(workers=config.workers)
    tracker = SignificanceTracker(config.significance, plan.selectors())
    collector = StatisticCollector()
    with ResultWriter(config.out, plan) as writer:
        rows = pool.map_ordered(partial(compute_rows, plan=plan), records)
        variants = _consume(rows, writer, tracker, collector, plan.selectors())

    summary = ScanSummary.build(variants, tracker, collector, qc)
    summary.outputs["results"] = config.out
    qc_path = sidecar_path(config.out, "qc")
    qc.write_tsv(qc_path)
    summary.outputs["qc"] = qc_path
    if config.export_freqs:
        write_frequency_table(config.export_freqs, frequencies_from_records(exported))
        summary.outputs["freqs"] = config.export_freqs
    summary.write(config.out)
    logger.info(f"Worker pool: {pool.get_stats()}")
    return summary


def _maf_filtered(records, threshold, counter):
    for record in records:
        if passes_maf_filter(record, threshold):
            yield record
        else:
            counter["filtered"] += 1


def run_simulation(config):
    """
    Simulate a null dataset and run the tests on it

    Args:
        config: SimulationConfig

    Returns:
        ScanSummary; the result table starts with a '#' line recording
        protocol, seed and sizes
    """
    protocol = NullProtocol.parse(config.protocol)
    spec = NullSpec(protocol=protocol, sizes=tuple(config.sizes) or reference_stratum_sizes(), seed=config.seed)
    populations = tuple(sorted(spec.populations))
    plan = ScanPlan(
        populations=populations,
        baseline=config.baseline or populations[0],
        tests=config.tests,
    )

    if config.freqs:
        source = f"freqs={config.freqs}"
        variants = read_frequency_table(config.freqs)
    else:
        region = RegionClass.parse(config.region)
        source = f"synthetic={config.synthetic} region={region.value}"
        variants = synthetic_frequencies(
            config.synthetic,
            spec.populations,
            region,
            config.seed,
            hwd_fraction=config.hwd_fraction,
            sdmaf_shift=config.sdmaf_shift,
        )

    if protocol is NullProtocol.MULTIPOP:
        records = simulate_multipop_null(spec, variants)
    else:
        records = simulate_betweenpop_null(spec, variants)
    counter = {"filtered": 0}
    records = _maf_filtered(records, config.maf_threshold, counter)

    pool = WorkerPool(workers=config.workers)
    tracker = SignificanceTracker(config.significance, plan.selectors())
    collector = StatisticCollector()
    comments = [f"{spec.describe()} {source} maf={config.maf_threshold}"]
    with ResultWriter(config.out, plan, comments=comments) as writer:
        rows = pool.map_ordered(partial(compute_rows, plan=plan), records)
        variants_written = _consume(rows, writer, tracker, collector, plan.selectors())

    logger.info(f"Simulation: {variants_written} variants kept, {counter['filtered']} removed by the MAF filter")
    summary = ScanSummary.build(variants_written, tracker, collector)
    summary.outputs["results"] = config.out
    summary.write(config.out)
    for _, row in summary.lambdas.iterrows():
        logger.info(f"lambda {row['test']} [{row['region']}, df={row['df']}]: {row['lambda']:.4f} (n={row['n']})")
    return summary


def output_directory_ready(path):
    """Create the parent directory of an output path if needed"""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return parent
