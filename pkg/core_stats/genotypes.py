"""
Genotype Counts and Stratum Estimates
Count containers for one sex x population stratum and the closed-form
allele frequency / HWD estimators computed from them
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Union

from core_stats.errors import EmptyStratum, InputError, InvalidCounts

logger = logging.getLogger(__name__)


class RegionClass(enum.Enum):
    """Genomic region of a variant; decides male ploidy"""

    AUTOSOMAL = "autosomal"
    X_PAR = "PAR"
    X_NPR = "NPR"

    @classmethod
    def parse(cls, token):
        """
        Parse a region token (case-insensitive)

        Args:
            token: "autosomal", "PAR" or "NPR" (also "A", "XPar", "XNpr")

        Returns:
            RegionClass member
        """
        aliases = {
            "autosomal": cls.AUTOSOMAL,
            "a": cls.AUTOSOMAL,
            "par": cls.X_PAR,
            "xpar": cls.X_PAR,
            "npr": cls.X_NPR,
            "xnpr": cls.X_NPR,
        }
        try:
            return aliases[str(token).strip().lower()]
        except KeyError:
            raise InputError(f"Unknown region class: {token!r}") from None

    @property
    def male_ploidy(self):
        return Ploidy.HAPLOID if self is RegionClass.X_NPR else Ploidy.DIPLOID


class Ploidy(enum.Enum):
    DIPLOID = 2
    HAPLOID = 1


def _check_non_negative(values):
    for value in values:
        if int(value) != value or value < 0:
            raise InvalidCounts(f"Counts must be non-negative integers, got {values}")


@dataclass(frozen=True)
class DiploidCounts:
    """Tallies of bb / Bb / BB individuals (B is the minor allele)"""

    n_bb: int
    n_Bb: int
    n_BB: int

    def __post_init__(self):
        _check_non_negative((self.n_bb, self.n_Bb, self.n_BB))

    ploidy = Ploidy.DIPLOID

    def total(self):
        return self.n_bb + self.n_Bb + self.n_BB

    def allele_count(self):
        """Number of B alleles carried by the stratum"""
        return 2 * self.n_BB + self.n_Bb

    def allele_total(self):
        return 2 * self.total()

    def flipped(self):
        """Relabel b <-> B"""
        return DiploidCounts(self.n_BB, self.n_Bb, self.n_bb)

    def scaled(self, factor):
        return DiploidCounts(self.n_bb * factor, self.n_Bb * factor, self.n_BB * factor)

    def as_tuple(self):
        return (self.n_bb, self.n_Bb, self.n_BB)

    def __add__(self, other):
        if not isinstance(other, DiploidCounts):
            raise InvalidCounts("Cannot pool diploid and haploid counts")
        return DiploidCounts(self.n_bb + other.n_bb, self.n_Bb + other.n_Bb, self.n_BB + other.n_BB)


@dataclass(frozen=True)
class HaploidCounts:
    """Tallies of hemizygous b / B males (X-NPR)"""

    n_b: int
    n_B: int

    def __post_init__(self):
        _check_non_negative((self.n_b, self.n_B))

    ploidy = Ploidy.HAPLOID

    def total(self):
        return self.n_b + self.n_B

    def allele_count(self):
        return self.n_B

    def allele_total(self):
        return self.total()

    def flipped(self):
        return HaploidCounts(self.n_B, self.n_b)

    def scaled(self, factor):
        return HaploidCounts(self.n_b * factor, self.n_B * factor)

    def as_tuple(self):
        return (self.n_b, self.n_B)

    def __add__(self, other):
        if not isinstance(other, HaploidCounts):
            raise InvalidCounts("Cannot pool diploid and haploid counts")
        return HaploidCounts(self.n_b + other.n_b, self.n_B + other.n_B)


GenotypeCounts = Union[DiploidCounts, HaploidCounts]


def counts_from_tuple(values):
    """Build DiploidCounts from 3 values or HaploidCounts from 2"""
    values = tuple(int(v) for v in values)
    if len(values) == 3:
        return DiploidCounts(*values)
    if len(values) == 2:
        return HaploidCounts(*values)
    raise InvalidCounts(f"Expected 2 or 3 counts, got {len(values)}")


@dataclass(frozen=True)
class PopulationStratumPair:
    """Female and male strata of one population at one variant"""

    population_label: str
    female: DiploidCounts
    male: GenotypeCounts

    def check_region(self, region):
        """
        Validate count shapes against the region class

        Raises:
            InvalidCounts: female not diploid, or male ploidy wrong for region
        """
        if not isinstance(self.female, DiploidCounts):
            raise InvalidCounts(f"{self.population_label}: female counts must be diploid")
        if self.male.ploidy is not region.male_ploidy:
            raise InvalidCounts(
                f"{self.population_label}: male counts are {self.male.ploidy.name.lower()} "
                f"but region {region.value} needs {region.male_ploidy.name.lower()}"
            )

    def flipped(self):
        return PopulationStratumPair(self.population_label, self.female.flipped(), self.male.flipped())

    def scaled(self, factor):
        return PopulationStratumPair(self.population_label, self.female.scaled(factor), self.male.scaled(factor))


@dataclass(frozen=True)
class StratumEstimate:
    """Allele frequency and HWD estimate for one stratum"""

    p_hat: float
    delta_hat: Optional[float]
    n: int
    ploidy: Ploidy


def estimate_stratum(counts):
    """
    Estimate allele frequency and HWD for one stratum

    Args:
        counts: DiploidCounts or HaploidCounts

    Returns:
        StratumEstimate (delta_hat is None for haploid strata)

    Raises:
        EmptyStratum: if the stratum has no individuals
    """
    n = counts.total()
    if n < 1:
        raise EmptyStratum("Stratum has no called individuals")

    if counts.ploidy is Ploidy.HAPLOID:
        return StratumEstimate(p_hat=counts.n_B / n, delta_hat=None, n=n, ploidy=Ploidy.HAPLOID)

    p_hat = (2 * counts.n_BB + counts.n_Bb) / (2 * n)
    delta_hat = counts.n_BB / n - p_hat * p_hat
    return StratumEstimate(p_hat=p_hat, delta_hat=delta_hat, n=n, ploidy=Ploidy.DIPLOID)


def variance_term(est):
    """
    Contribution of one stratum to the Wald denominator

    Diploid: (p(1-p) + delta) / 2n; haploid: p(1-p) / n.
    """
    p = est.p_hat
    if est.ploidy is Ploidy.HAPLOID:
        return max(0.0, p * (1.0 - p)) / est.n
    return max(0.0, p * (1.0 - p) + est.delta_hat) / (2 * est.n)


def sigma2_hat(est):
    """ML variance of the genotype codes (0/1/2, or 0/2 for hemizygous males)"""
    p = est.p_hat
    if est.ploidy is Ploidy.HAPLOID:
        return 4.0 * p * (1.0 - p)
    return 2.0 * (p * (1.0 - p) + est.delta_hat)


def pool_pairs(pairs, label="pooled"):
    """Element-wise sum of female and male counts across populations"""
    pairs = list(pairs)
    if not pairs:
        raise InvalidCounts("Nothing to pool")
    female = pairs[0].female
    male = pairs[0].male
    for pair in pairs[1:]:
        female = female + pair.female
        male = male + pair.male
    return PopulationStratumPair(label, female, male)
