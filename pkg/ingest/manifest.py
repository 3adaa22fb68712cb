"""
Sample Manifest
Loads the sample -> (sex, population) table that stratifies every variant
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import pandas as pd

from core_stats.errors import DuplicateSample, EmptyManifest, InputError, UnknownSexToken

logger = logging.getLogger(__name__)

FEMALE = "female"
MALE = "male"

# PLINK convention: 1 = male, 2 = female
_SEX_TOKENS = {
    "female": FEMALE,
    "f": FEMALE,
    "2": FEMALE,
    "male": MALE,
    "m": MALE,
    "1": MALE,
}

REQUIRED_COLUMNS = ("sample_id", "sex", "population")


def parse_sex(token):
    """
    Normalise a sex token

    Args:
        token: "female"/"male", "F"/"M" or "2"/"1" (case-insensitive)

    Returns:
        FEMALE or MALE
    """
    try:
        return _SEX_TOKENS[str(token).strip().lower()]
    except KeyError:
        raise UnknownSexToken(f"Unknown sex token: {token!r}") from None


@dataclass(frozen=True)
class SampleInfo:
    sex: str
    population: str


@dataclass(frozen=True)
class SampleManifest:
    """Sample identifier -> SampleInfo, plus per-stratum sizes"""

    samples: dict = field(default_factory=dict)

    @property
    def populations(self):
        """Population labels in alphabetical order"""
        return sorted({info.population for info in self.samples.values()})

    @property
    def k(self):
        return len(self.populations)

    def stratum_size(self, population, sex):
        return sum(1 for info in self.samples.values() if info.population == population and info.sex == sex)

    def stratum_sizes(self):
        """{population: (n_female, n_male)}"""
        tally = Counter((info.population, info.sex) for info in self.samples.values())
        return {pop: (tally[(pop, FEMALE)], tally[(pop, MALE)]) for pop in self.populations}

    def testable_populations(self):
        """Populations with at least one female and one male"""
        return [pop for pop, (n_f, n_m) in self.stratum_sizes().items() if n_f > 0 and n_m > 0]

    def get(self, sample_id):
        return self.samples.get(sample_id)


def load_manifest(path):
    """
    Load a sample manifest

    Args:
        path: Tab-separated file with header sample_id, sex, population

    Returns:
        SampleManifest

    Raises:
        EmptyManifest: no sample rows
        DuplicateSample: a sample identifier appears twice
        UnknownSexToken: unrecognised sex value
    """
    try:
        table = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, comment=None)
    except pd.errors.EmptyDataError:
        raise EmptyManifest(f"Manifest is empty: {path}") from None

    table.columns = [str(col).strip().lower() for col in table.columns]
    missing = [col for col in REQUIRED_COLUMNS if col not in table.columns]
    if missing:
        raise InputError(f"Manifest {path} is missing columns: {missing}")
    if table.empty:
        raise EmptyManifest(f"Manifest has a header but no samples: {path}")

    samples = {}
    for row in table.itertuples(index=False):
        sample_id = str(row.sample_id).strip()
        if sample_id in samples:
            raise DuplicateSample(f"Duplicate sample id in manifest: {sample_id}")
        samples[sample_id] = SampleInfo(sex=parse_sex(row.sex), population=str(row.population).strip())

    manifest = SampleManifest(samples=samples)
    for pop, (n_f, n_m) in manifest.stratum_sizes().items():
        if n_f == 0 or n_m == 0:
            logger.warning(f"Population {pop} is untestable: {n_f} females, {n_m} males (needs both sexes)")

    logger.info(f"Manifest loaded: {len(samples)} samples, K={manifest.k} populations")
    return manifest
