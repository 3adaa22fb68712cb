"""
VCF Stream
Single-pass reader that turns VCF data lines into per-stratum genotype
counts, oriented to the whole-sample minor allele and MAF-filtered
"""

from __future__ import annotations

import gzip
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import vcf

from core_stats.errors import InputError, MalformedVcfLine
from core_stats.genotypes import DiploidCounts, HaploidCounts, PopulationStratumPair, RegionClass
from ingest.manifest import FEMALE
from ingest.qc_stats import IngestQC
from ingest.regions import normalize_chrom

logger = logging.getLogger(__name__)

ON_MALFORMED_CHOICES = ("skip", "abort")
_NUCLEOTIDES = frozenset("ACGT")
_ALLELE_SPLIT = re.compile(r"[/|]")

# parse_gt kinds
MISSING = "missing"
DIPLOID = "diploid"
HAPLOID = "haploid"
INVALID = "invalid"


@dataclass(frozen=True)
class VariantRecord:
    """One bi-allelic SNP with per-population stratum counts"""

    chrom: str
    pos: int
    id: str
    ref: str
    alt: str
    minor_allele: str
    region: RegionClass
    strata: tuple
    population_maf: tuple
    whole_sample_maf: float
    missing: tuple = field(default_factory=tuple)

    @property
    def populations(self):
        return tuple(pair.population_label for pair in self.strata)

    @property
    def minor_is_alt(self):
        return self.minor_allele == self.alt


@lru_cache(maxsize=4096)
def parse_gt(gt):
    """
    Classify one GT string

    Args:
        gt: e.g. "0/1", "1|1", "0", ".", "./.", "0/."

    Returns:
        (kind, value): (MISSING, None), (DIPLOID, alt dosage 0-2),
        (HAPLOID, allele 0-1) or (INVALID, None)
    """
    parts = _ALLELE_SPLIT.split(gt.strip())
    if any(part == "." for part in parts):
        return (MISSING, None)
    if not all(part.isdigit() for part in parts):
        return (INVALID, None)
    alleles = [int(part) for part in parts]
    if any(allele > 1 for allele in alleles):
        return (INVALID, None)
    if len(alleles) == 1:
        return (HAPLOID, alleles[0])
    if len(alleles) == 2:
        return (DIPLOID, alleles[0] + alleles[1])
    return (INVALID, None)


def passes_maf_filter(record, threshold):
    """True if every population's MAF is at least the threshold"""
    return all(maf >= threshold for maf in record.population_maf)


def _population_maf(female, male):
    total = female.allele_total() + male.allele_total()
    if total == 0:
        return 0.0
    q = (female.allele_count() + male.allele_count()) / total
    return min(q, 1.0 - q)


def assemble_record(chrom, pos, variant_id, ref, alt, region, alt_strata, stratum_sizes=None):
    """
    Orient counts to the minor allele and build a VariantRecord

    Args:
        chrom, pos, variant_id, ref, alt: Variant identity
        region: RegionClass
        alt_strata: [(label, DiploidCounts, male counts)] with B = alt allele
        stratum_sizes: Optional {label: (n_female, n_male)} for missing tallies

    Returns:
        VariantRecord; the minor allele is the one with pooled frequency
        <= 0.5, ties going to the alt allele
    """
    alt_alleles = sum(f.allele_count() + m.allele_count() for _, f, m in alt_strata)
    all_alleles = sum(f.allele_total() + m.allele_total() for _, f, m in alt_strata)
    alt_freq = alt_alleles / all_alleles if all_alleles else 0.0
    minor_is_alt = alt_freq <= 0.5

    strata = []
    for label, female, male in alt_strata:
        pair = PopulationStratumPair(label, female, male)
        strata.append(pair if minor_is_alt else pair.flipped())

    missing = ()
    if stratum_sizes is not None:
        missing = tuple(
            (pair.population_label,
             stratum_sizes[pair.population_label][0] - pair.female.total(),
             stratum_sizes[pair.population_label][1] - pair.male.total())
            for pair in strata
        )

    return VariantRecord(
        chrom=chrom,
        pos=pos,
        id=variant_id,
        ref=ref,
        alt=alt,
        minor_allele=alt if minor_is_alt else ref,
        region=region,
        strata=tuple(strata),
        population_maf=tuple(_population_maf(pair.female, pair.male) for pair in strata),
        whole_sample_maf=min(alt_freq, 1.0 - alt_freq),
        missing=missing,
    )


class _StratumColumns:
    """VCF column indices of one population's females and males"""

    def __init__(self, label):
        self.label = label
        self.female = []
        self.male = []


def _tally_female(gts, qc):
    dosage = [0, 0, 0]
    for gt, count in gts.items():
        kind, value = parse_gt(gt)
        if kind == DIPLOID:
            dosage[value] += count
        elif kind == HAPLOID:
            qc.record_unexpected_ploidy(count)
        elif kind == INVALID:
            raise ValueError(f"invalid GT {gt!r}")
    return DiploidCounts(*dosage)


def _tally_male(gts, region, qc):
    if region is not RegionClass.X_NPR:
        dosage = [0, 0, 0]
        for gt, count in gts.items():
            kind, value = parse_gt(gt)
            if kind == DIPLOID:
                dosage[value] += count
            elif kind == HAPLOID:
                qc.record_unexpected_ploidy(count)
            elif kind == INVALID:
                raise ValueError(f"invalid GT {gt!r}")
        return DiploidCounts(*dosage)

    alleles = [0, 0]
    for gt, count in gts.items():
        kind, value = parse_gt(gt)
        if kind == HAPLOID:
            alleles[value] += count
        elif kind == DIPLOID:
            # homozygous diploid calls stand for the hemizygous allele
            if value == 1:
                qc.record_het_males(count)
            else:
                alleles[value // 2] += count
        elif kind == INVALID:
            raise ValueError(f"invalid GT {gt!r}")
    return HaploidCounts(*alleles)


def _open_text(path):
    with open(path, "rb") as handle:
        magic = handle.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


class _TrackedLines:
    """Line iterator feeding vcf.Reader; remembers where the last data line came from"""

    def __init__(self, handle):
        self._handle = handle
        self.line_number = 0
        self.position = "?"
        self.n_fields = 0
        self.header_fields = None

    def __iter__(self):
        return self

    def __next__(self):
        line = next(self._handle)
        self.line_number += 1
        text = line.rstrip("\r\n")
        if text.startswith("#CHROM"):
            self.header_fields = text.count("\t") + 1
        elif text.strip() and not text.startswith("#"):
            fields = text.split("\t", 2)
            self.position = fields[1] if len(fields) > 1 else "?"
            self.n_fields = text.count("\t") + 1
        return line


def _open_reader(vcf_path, handle):
    lines = _TrackedLines(handle)
    try:
        reader = vcf.Reader(fsock=lines, compressed=False, strict_whitespace=True)
    except StopIteration:
        raise InputError(f"{vcf_path}: no #CHROM header line") from None
    except (SyntaxError, ValueError) as e:
        raise InputError(f"{vcf_path}: unreadable VCF header: {e}") from None
    if lines.header_fields is None:
        raise InputError(f"{vcf_path}: data line {lines.line_number} before the #CHROM header")
    return reader, lines


def _call_gt(call):
    gt = getattr(call.data, "GT", None)
    if gt is None:
        raise ValueError(f"sample {call.sample} has no GT value")
    return gt


def _extract_gts(calls, columns):
    return Counter(_call_gt(calls[col]) for col in columns)


def stream_variants(vcf_path, manifest, region_map, maf_threshold, qc=None, on_malformed="skip"):
    """
    Stream MAF-filtered bi-allelic SNPs with per-stratum counts

    Args:
        vcf_path: Plain or gzip-compressed VCF
        manifest: SampleManifest
        region_map: RegionMap
        maf_threshold: Minimum MAF required in every population
        qc: IngestQC to update (a fresh one if None)
        on_malformed: "skip" (warn and count) or "abort" (raise)

    Yields:
        VariantRecord in file order

    Raises:
        MalformedVcfLine: malformed data line with on_malformed="abort"
    """
    if on_malformed not in ON_MALFORMED_CHOICES:
        raise InputError(f"on_malformed must be one of {ON_MALFORMED_CHOICES}, got {on_malformed!r}")
    qc = qc if qc is not None else IngestQC()
    populations = manifest.testable_populations()
    sizes = manifest.stratum_sizes()
    stratum_sizes = {pop: sizes[pop] for pop in populations}
    warned_sex_chrom = False

    with _open_text(vcf_path) as handle:
        reader, lines = _open_reader(vcf_path, handle)
        strata = _read_header(reader.samples, manifest, populations, qc)

        while True:
            try:
                variant = next(reader)
            except StopIteration:
                break
            except (ValueError, IndexError, TypeError, KeyError) as e:
                variant, reason = None, str(e) or type(e).__name__

            qc.record_variant()
            try:
                if variant is None:
                    raise MalformedVcfLine(lines.line_number, lines.position, reason)
                record = _tally_variant(variant, lines, strata, region_map, stratum_sizes, qc)
            except MalformedVcfLine as e:
                if on_malformed == "abort":
                    raise
                qc.record_malformed()
                logger.warning(f"Skipping malformed VCF {e}")
                continue

            if record is None:
                continue
            if region_map.is_empty and not warned_sex_chrom and normalize_chrom(record.chrom).upper() == "X":
                logger.warning("X-chromosome variants found but no region file given: analysed as autosomal")
                warned_sex_chrom = True
            if not passes_maf_filter(record, maf_threshold):
                qc.record_maf_filtered()
                continue
            qc.record_pass()
            yield record

    logger.info(f"VCF stream finished: {qc.get_stats()}")


def _read_header(sample_names, manifest, populations, qc):
    by_label = {pop: _StratumColumns(pop) for pop in populations}

    unmatched = 0
    seen = set()
    for offset, name in enumerate(sample_names):
        info = manifest.get(name)
        if info is None:
            unmatched += 1
            continue
        seen.add(name)
        if info.population not in by_label:
            continue
        target = by_label[info.population]
        (target.female if info.sex == FEMALE else target.male).append(offset)

    qc.unmatched_samples = unmatched
    if unmatched:
        logger.warning(f"{unmatched} VCF samples are not in the manifest and were ignored")
    absent = len(manifest.samples) - len(seen)
    if absent:
        logger.warning(f"{absent} manifest samples are not in the VCF; counted as missing")
    return [by_label[pop] for pop in populations]


def _tally_variant(variant, lines, strata, region_map, stratum_sizes, qc):
    line_number, position = lines.line_number, lines.position
    n_columns = lines.header_fields
    if lines.n_fields < 8 or (n_columns > 8 and lines.n_fields != n_columns):
        raise MalformedVcfLine(line_number, position, f"expected {n_columns} columns, found {lines.n_fields}")

    chrom, pos, ref = variant.CHROM, variant.POS, variant.REF
    if len(variant.ALT) > 1:
        qc.record_multiallelic()
        return None
    alt = "" if variant.ALT[0] is None else str(variant.ALT[0])
    if len(ref) != 1 or len(alt) != 1 or ref.upper() not in _NUCLEOTIDES or alt.upper() not in _NUCLEOTIDES:
        qc.record_non_snp()
        return None

    if "GT" not in (variant.FORMAT or "").split(":"):
        raise MalformedVcfLine(line_number, position, "FORMAT has no GT field")

    # VCF POS is 1-based, region intervals are 0-based
    region = region_map.classify(chrom, pos - 1)

    alt_strata = []
    try:
        for stratum in strata:
            female = _tally_female(_extract_gts(variant.samples, stratum.female), qc)
            male = _tally_male(_extract_gts(variant.samples, stratum.male), region, qc)
            alt_strata.append((stratum.label, female, male))
    except (ValueError, IndexError) as e:
        raise MalformedVcfLine(line_number, position, str(e)) from None

    variant_id = variant.ID or f"{chrom}:{pos}:{ref}:{alt}"
    return assemble_record(chrom, pos, variant_id, ref, alt, region, alt_strata, stratum_sizes)
