"""
Frequency Table
Long-format TSV of per-population source genotype frequencies, written by
scan --export-freqs and read by simulate --freqs
"""

import logging

import pandas as pd

from core_stats.errors import InputError, InvalidFrequencies
from core_stats.genotypes import RegionClass
from simulate.null_models import StratumFrequencies, VariantFrequencies, male_ploidy_matches

logger = logging.getLogger(__name__)

COLUMNS = ("id", "region", "population", "f_bb", "f_Bb", "f_BB", "m_bb", "m_Bb", "m_BB")
FEMALE_COLUMNS = ["f_bb", "f_Bb", "f_BB"]
MALE_COLUMNS = ["m_bb", "m_Bb", "m_BB"]

# rounding slack accepted before renormalising
RENORMALISE_TOLERANCE = 1e-3


def _male_row(variant, stratum):
    if variant.region is RegionClass.X_NPR:
        # hemizygous males: allele frequencies in the homozygous columns
        return (stratum.male[0], 0.0, stratum.male[1])
    return tuple(stratum.male)


def write_frequency_table(path, variant_freqs):
    """
    Write source frequencies

    Args:
        path: Output TSV path (".gz" compresses)
        variant_freqs: Iterable of VariantFrequencies

    Returns:
        Number of variants written
    """
    rows = []
    variants = 0
    for variant in variant_freqs:
        variants += 1
        for stratum in variant.strata:
            rows.append((variant.variant_id, variant.region.value, stratum.label)
                        + tuple(stratum.female) + _male_row(variant, stratum))

    table = pd.DataFrame(rows, columns=list(COLUMNS))
    table.to_csv(path, sep="\t", index=False, float_format="%.10g")
    logger.info(f"Frequency table written to {path}: {variants} variants, {len(rows)} rows")
    return variants


def _normalise(values, what):
    values = [float(v) for v in values]
    if any(v < 0.0 or v != v for v in values):
        raise InvalidFrequencies(f"{what}: negative or missing frequency {values}")
    total = sum(values)
    if abs(total - 1.0) > RENORMALISE_TOLERANCE:
        raise InvalidFrequencies(f"{what}: frequencies sum to {total}, not 1")
    normalised = [v / total for v in values]
    # the last entry absorbs the rounding so the vector sums to 1 exactly
    normalised[-1] = max(0.0, 1.0 - sum(normalised[:-1]))
    return tuple(normalised)


def read_frequency_table(path):
    """
    Read source frequencies

    Args:
        path: TSV written by write_frequency_table

    Returns:
        List of VariantFrequencies in file order

    Raises:
        InvalidFrequencies: a vector deviates from summing to 1 by more than
            the rounding tolerance
    """
    try:
        table = pd.read_csv(path, sep="\t", dtype={"id": str, "region": str, "population": str}, comment="#")
    except pd.errors.EmptyDataError:
        raise InputError(f"Frequency table is empty: {path}") from None

    missing = [col for col in COLUMNS if col not in table.columns]
    if missing:
        raise InputError(f"Frequency table {path} is missing columns: {missing}")

    variants = []
    for variant_id, group in table.groupby("id", sort=False):
        regions = set(group["region"])
        if len(regions) != 1:
            raise InvalidFrequencies(f"Variant {variant_id} has rows for several regions: {sorted(regions)}")
        region = RegionClass.parse(regions.pop())

        strata = []
        for row in group.itertuples(index=False):
            what = f"{variant_id}/{row.population}"
            female = _normalise([getattr(row, col) for col in FEMALE_COLUMNS], f"{what} female")
            male = _normalise([getattr(row, col) for col in MALE_COLUMNS], f"{what} male")
            if region is RegionClass.X_NPR:
                if male[1] > RENORMALISE_TOLERANCE:
                    raise InvalidFrequencies(f"{what}: X non-PAR males cannot be heterozygous")
                male = _normalise([male[0], male[2]], f"{what} male")
            strata.append(StratumFrequencies(str(row.population), female, male))

        variant = VariantFrequencies(str(variant_id), region, tuple(strata))
        if not male_ploidy_matches(variant):
            raise InvalidFrequencies(f"Variant {variant_id}: male frequencies do not match region {region.value}")
        variants.append(variant)

    logger.info(f"Frequency table loaded from {path}: {len(variants)} variants")
    return variants
