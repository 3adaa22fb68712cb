"""
Ingest QC Statistics
Tracks and reports what the VCF stream read, skipped and excluded
"""

import logging
import time

logger = logging.getLogger(__name__)


class IngestQC:
    """
    Counters for one pass over a VCF file
    """

    FIELDS = (
        "variants_read",
        "variants_passed",
        "skipped_multiallelic",
        "skipped_non_snp",
        "skipped_malformed",
        "filtered_maf",
        "het_male_exclusions",
        "unexpected_ploidy_calls",
        "unmatched_samples",
    )

    def __init__(self):
        self.start_time = time.time()
        for name in self.FIELDS:
            setattr(self, name, 0)

        logger.debug("Ingest QC initialized")

    def record_variant(self):
        self.variants_read += 1

    def record_pass(self):
        self.variants_passed += 1

    def record_multiallelic(self):
        self.skipped_multiallelic += 1

    def record_non_snp(self):
        self.skipped_non_snp += 1

    def record_malformed(self):
        self.skipped_malformed += 1

    def record_maf_filtered(self):
        self.filtered_maf += 1

    def record_het_males(self, count):
        """Male heterozygous calls in the X non-PAR, excluded from counts"""
        self.het_male_exclusions += count

    def record_unexpected_ploidy(self, count):
        self.unexpected_ploidy_calls += count

    def get_stats(self):
        """Get all counters plus elapsed time"""
        stats = {name: getattr(self, name) for name in self.FIELDS}
        stats["elapsed_seconds"] = round(time.time() - self.start_time, 3)
        return stats

    def merge(self, other):
        """Add another pass's counters into this one"""
        for name in self.FIELDS:
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self

    def write_tsv(self, path):
        """
        Write the QC summary

        Args:
            path: Output path; one 'metric<TAB>value' line per counter
        """
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("metric\tvalue\n")
            for name in self.FIELDS:
                handle.write(f"{name}\t{getattr(self, name)}\n")
        logger.info(f"QC summary written to {path}")

    def reset(self):
        """Reset all counters"""
        self.start_time = time.time()
        for name in self.FIELDS:
            setattr(self, name, 0)
        logger.debug("Ingest QC reset")
