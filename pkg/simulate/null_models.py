"""
Null Models
Genotype-count generators for the multi-population and between-population
null hypotheses, plus the synthetic and observed sources of genotype
frequencies they draw from
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from core_stats.errors import EmptyStratum, InputError, InvalidFrequencies
from core_stats.genotypes import DiploidCounts, HaploidCounts, Ploidy, RegionClass, pool_pairs
from ingest.vcf_stream import assemble_record
from simulate.samplers import (
    FREQUENCY_STREAM,
    binomial_draw,
    check_probabilities,
    multinomial_draw,
    variant_rng,
)

logger = logging.getLogger(__name__)

POOLED_LABEL = "ALL"
SIM_CHROM = "sim"
SIM_REF = "b"
SIM_ALT = "B"

# synthetic MAF range
MAF_LOW = 0.05
MAF_HIGH = 0.5


class NullProtocol(enum.Enum):
    MULTIPOP = "multipop"
    BETWEENPOP = "betweenpop"

    @classmethod
    def parse(cls, token):
        try:
            return cls(str(token).strip().lower())
        except ValueError:
            raise InputError(f"Unknown null protocol {token!r}; expected multipop or betweenpop") from None


@dataclass(frozen=True)
class StratumFrequencies:
    """
    Source frequencies of one population

    female is (bb, Bb, BB). male is (bb, Bb, BB) for diploid regions and the
    allele frequencies (b, B) for the X non-PAR.
    """

    label: str
    female: tuple
    male: tuple

    @property
    def female_maf(self):
        """Frequency of B among female alleles"""
        return self.female[2] + self.female[1] / 2.0

    @property
    def male_allele_frequency(self):
        if len(self.male) == 2:
            return self.male[1]
        return self.male[2] + self.male[1] / 2.0


@dataclass(frozen=True)
class VariantFrequencies:
    """Source frequencies of one variant across populations"""

    variant_id: str
    region: RegionClass
    strata: tuple = field(default_factory=tuple)

    def get(self, label):
        for stratum in self.strata:
            if stratum.label == label:
                return stratum
        raise InvalidFrequencies(f"Variant {self.variant_id}: no frequencies for population {label}")

    @property
    def labels(self):
        return tuple(stratum.label for stratum in self.strata)


@dataclass(frozen=True)
class NullSpec:
    """
    Null-model settings

    sizes holds (population, n_female, n_male) triples in output order.
    """

    protocol: NullProtocol
    sizes: tuple
    seed: int

    def __post_init__(self):
        if not self.sizes:
            raise InputError("NullSpec needs at least one population")
        for label, n_f, n_m in self.sizes:
            if int(n_f) != n_f or int(n_m) != n_m or n_f < 1 or n_m < 1:
                raise InputError(f"Stratum sizes must be positive integers, got {label}: {n_f}/{n_m}")
        if self.seed < 0:
            raise InputError(f"Seed must be non-negative, got {self.seed}")

    @property
    def populations(self):
        return tuple(label for label, _, _ in self.sizes)

    def stratum_sizes(self):
        return {label: (n_f, n_m) for label, n_f, n_m in self.sizes}

    def describe(self):
        """One-line description for output headers"""
        sizes = ",".join(f"{label}:{n_f}:{n_m}" for label, n_f, n_m in self.sizes)
        return f"protocol={self.protocol.value} seed={self.seed} sizes={sizes}"


def reference_stratum_sizes():
    """Female/male sizes of the five 1000 Genomes super-populations"""
    return (
        ("AFR", 342, 319),
        ("AMR", 177, 170),
        ("EAS", 260, 244),
        ("EUR", 263, 240),
        ("SAS", 229, 260),
    )


def parse_sizes(text):
    """
    Parse 'POP:n_female:n_male,...'

    Returns:
        Tuple of (label, n_female, n_male)
    """
    sizes = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise InputError(f"Stratum size {item!r} is not POP:n_female:n_male")
        try:
            sizes.append((parts[0], int(parts[1]), int(parts[2])))
        except ValueError:
            raise InputError(f"Stratum size {item!r} has non-integer counts") from None
    if not sizes:
        raise InputError("No stratum sizes given")
    return tuple(sizes)


def _draw_female(rng, n_f, freqs):
    return DiploidCounts(*multinomial_draw(rng, n_f, freqs))


def _draw_male(rng, n_m, region, genotype_freqs, allele_frequency):
    if region is RegionClass.X_NPR:
        n_B = binomial_draw(rng, n_m, allele_frequency)
        return HaploidCounts(n_m - n_B, n_B)
    return DiploidCounts(*multinomial_draw(rng, n_m, genotype_freqs))


def _build_record(spec, index, variant, alt_strata):
    return assemble_record(
        SIM_CHROM,
        index + 1,
        variant.variant_id,
        SIM_REF,
        SIM_ALT,
        variant.region,
        alt_strata,
        spec.stratum_sizes(),
    )


def simulate_variant(spec, index, variant):
    """
    Draw one variant's counts under the spec's protocol

    Args:
        spec: NullSpec
        index: 0-based variant index (selects the random stream)
        variant: VariantFrequencies

    Returns:
        VariantRecord
    """
    rng = variant_rng(spec.seed, index)
    alt_strata = []
    if spec.protocol is NullProtocol.MULTIPOP:
        for label, n_f, n_m in spec.sizes:
            source = variant.get(label)
            female = _draw_female(rng, n_f, source.female)
            # males share the female frequencies: no sdMAF within a population
            male = _draw_male(rng, n_m, variant.region, source.female, source.female_maf)
            alt_strata.append((label, female, male))
    else:
        pooled = variant.get(POOLED_LABEL)
        if variant.region is not RegionClass.X_NPR:
            check_probabilities(pooled.male)
        for label, n_f, n_m in spec.sizes:
            female = _draw_female(rng, n_f, pooled.female)
            male = _draw_male(rng, n_m, variant.region, pooled.male, pooled.male_allele_frequency)
            alt_strata.append((label, female, male))
    return _build_record(spec, index, variant, alt_strata)


def _simulate(spec, variant_freqs, protocol):
    if spec.protocol is not protocol:
        raise InputError(f"NullSpec protocol is {spec.protocol.value}, expected {protocol.value}")
    logger.info(f"Simulating null: {spec.describe()}")
    return _generate(spec, variant_freqs)


def _generate(spec, variant_freqs):
    count = 0
    for index, variant in enumerate(variant_freqs):
        yield simulate_variant(spec, index, variant)
        count += 1
    logger.info(f"Simulated {count} variants")


def simulate_multipop_null(spec, variant_freqs):
    """
    Null of no sdMAF in any population

    Every population's female and male strata draw from that population's
    female genotype frequencies (X non-PAR males: Binomial on the female
    allele frequency), so population-specific MAF and HWD are kept.

    Args:
        spec: NullSpec with protocol MULTIPOP
        variant_freqs: Iterable of VariantFrequencies with one stratum per
            population in spec.sizes

    Yields:
        VariantRecord per input variant, in order
    """
    return _simulate(spec, variant_freqs, NullProtocol.MULTIPOP)


def simulate_betweenpop_null(spec, pooled_freqs):
    """
    Null of a common sdMAF across populations

    Every population draws females from the pooled female frequencies and
    males from the pooled male frequencies (allele frequency in the X
    non-PAR), so any sdMAF is shared by all populations.

    Args:
        spec: NullSpec with protocol BETWEENPOP
        pooled_freqs: Iterable of VariantFrequencies holding an "ALL" stratum

    Yields:
        VariantRecord per input variant, in order
    """
    return _simulate(spec, pooled_freqs, NullProtocol.BETWEENPOP)


def _genotype_frequencies(p, delta):
    """(bb, Bb, BB) for allele frequency p and HWD coefficient delta"""
    hom_minor = max(0.0, p * p + delta)
    het = max(0.0, 2.0 * p * (1.0 - p) - 2.0 * delta)
    return (1.0 - hom_minor - het, het, hom_minor)


def _draw_hwd(rng, p, hwd_fraction):
    # admissible delta: -min(p, 1-p)^2 <= delta <= p(1-p)
    low = -min(p, 1.0 - p) ** 2
    high = p * (1.0 - p)
    return float(rng.uniform(hwd_fraction * low, hwd_fraction * high))


def _synthetic_stratum(rng, label, p_female, p_male, region, hwd_fraction):
    female = _genotype_frequencies(p_female, _draw_hwd(rng, p_female, hwd_fraction))
    if region is RegionClass.X_NPR:
        male = (1.0 - p_male, p_male)
    elif p_male == p_female:
        male = female
    else:
        male = _genotype_frequencies(p_male, _draw_hwd(rng, p_male, hwd_fraction))
    return StratumFrequencies(label, female, male)


def synthetic_frequencies(
    n_variants,
    populations,
    region,
    rng_seed,
    hwd_fraction=0.5,
    sdmaf_shift=0.02,
    fixed_maf=None,
):
    """
    Synthetic source frequencies

    Per population: MAF ~ Uniform[0.05, 0.5], HWD delta uniform on
    hwd_fraction of its admissible range, male frequencies equal to the
    female ones. The pooled "ALL" stratum gets its own female MAF and a
    male MAF shifted by Uniform(-sdmaf_shift, sdmaf_shift).

    Args:
        n_variants: Number of variants
        populations: Population labels
        region: RegionClass of every variant
        rng_seed: Non-negative seed
        hwd_fraction: Fraction of the admissible delta range in [0, 1]
        sdmaf_shift: Half-width of the pooled female/male MAF difference
        fixed_maf: Optional {label: MAF} pinning some populations' MAF

    Yields:
        VariantFrequencies
    """
    if not 0.0 <= hwd_fraction <= 1.0:
        raise InputError(f"hwd_fraction must lie in [0, 1], got {hwd_fraction}")
    if sdmaf_shift < 0.0:
        raise InputError(f"sdmaf_shift must be non-negative, got {sdmaf_shift}")
    fixed_maf = dict(fixed_maf or {})
    for label, maf in fixed_maf.items():
        if not 0.0 < maf <= 0.5:
            raise InputError(f"Fixed MAF for {label} must lie in (0, 0.5], got {maf}")

    logger.info(
        f"Synthetic frequencies: {n_variants} {region.value} variants, "
        f"populations={list(populations)}, hwd_fraction={hwd_fraction}, sdmaf_shift={sdmaf_shift}"
    )
    for index in range(n_variants):
        rng = variant_rng(rng_seed, index, FREQUENCY_STREAM)
        strata = []
        for label in populations:
            p = fixed_maf.get(label)
            if p is None:
                p = float(rng.uniform(MAF_LOW, MAF_HIGH))
            strata.append(_synthetic_stratum(rng, label, p, p, region, hwd_fraction))

        p_female = float(rng.uniform(MAF_LOW, MAF_HIGH))
        p_male = p_female + float(rng.uniform(-sdmaf_shift, sdmaf_shift)) if sdmaf_shift > 0.0 else p_female
        p_male = min(MAF_HIGH, max(MAF_LOW, p_male))
        strata.append(_synthetic_stratum(rng, POOLED_LABEL, p_female, p_male, region, hwd_fraction))
        yield VariantFrequencies(f"syn{index + 1}", region, tuple(strata))


def _proportions(counts):
    total = counts.total()
    if total == 0:
        raise EmptyStratum("empty stratum")
    return tuple(value / total for value in counts.as_tuple())


def frequencies_from_records(records):
    """
    Observed source frequencies from scanned variants

    Female genotype frequencies and male genotype (allele, X non-PAR)
    frequencies per population, plus the pooled "ALL" stratum. Variants
    with an empty stratum are skipped.

    Args:
        records: Iterable of VariantRecord

    Yields:
        VariantFrequencies, B being each record's minor allele
    """
    skipped = 0
    for record in records:
        try:
            strata = [
                StratumFrequencies(pair.population_label, _proportions(pair.female), _proportions(pair.male))
                for pair in record.strata
            ]
            pooled = pool_pairs(record.strata, POOLED_LABEL)
            strata.append(StratumFrequencies(POOLED_LABEL, _proportions(pooled.female), _proportions(pooled.male)))
        except EmptyStratum:
            skipped += 1
            logger.debug(f"{record.id}: empty stratum, no frequencies exported")
            continue
        yield VariantFrequencies(record.id, record.region, tuple(strata))
    if skipped:
        logger.warning(f"{skipped} variants with empty strata were left out of the frequency table")


def male_ploidy_matches(variant):
    """True if every male vector has the shape the region needs"""
    expected = 2 if variant.region.male_ploidy is Ploidy.HAPLOID else 3
    return all(len(stratum.male) == expected for stratum in variant.strata)
