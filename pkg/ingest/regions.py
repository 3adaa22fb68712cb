"""
Region Map
Classifies X-chromosome positions as PAR or NPR from a BED-like interval file
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field

import pandas as pd

from core_stats.errors import InputError, OverlappingIntervals, UnknownRegionLabel
from core_stats.genotypes import RegionClass

logger = logging.getLogger(__name__)

_LABELS = {"PAR": RegionClass.X_PAR, "NPR": RegionClass.X_NPR}


def normalize_chrom(name):
    """'chrX' -> 'X', 'chr7' -> '7'"""
    name = str(name).strip()
    return name[3:] if name.lower().startswith("chr") else name


@dataclass(frozen=True)
class RegionInterval:
    start: int
    end: int
    region: RegionClass
    name: str


@dataclass(frozen=True)
class RegionMap:
    """
    Sorted, non-overlapping half-open intervals on the sex chromosome

    Positions inside the sex chromosome but outside every interval are NPR;
    positions on any other chromosome are autosomal. A map with no
    chromosome classifies everything as autosomal.
    """

    chromosome: str = ""
    intervals: tuple = field(default_factory=tuple)

    def __post_init__(self):
        # cache interval starts for bisect lookups
        object.__setattr__(self, "_starts", [iv.start for iv in self.intervals])

    @property
    def is_empty(self):
        return not self.chromosome

    def _find(self, chrom, pos):
        if self.is_empty or normalize_chrom(chrom) != self.chromosome:
            return None
        idx = bisect.bisect_right(self._starts, pos) - 1
        if idx >= 0 and pos < self.intervals[idx].end:
            return self.intervals[idx]
        return None

    def classify(self, chrom, pos):
        """
        Region class of a 0-based position

        Args:
            chrom: Chromosome name ('X' or 'chrX' style)
            pos: 0-based base-pair position

        Returns:
            RegionClass
        """
        if self.is_empty or normalize_chrom(chrom) != self.chromosome:
            return RegionClass.AUTOSOMAL
        interval = self._find(chrom, pos)
        return interval.region if interval else RegionClass.X_NPR

    def band_name(self, chrom, pos):
        """Name of the interval holding the position, '' if none"""
        interval = self._find(chrom, pos)
        return interval.name if interval else ""


def build_region_map(chromosome, intervals):
    """
    Validate and assemble a RegionMap

    Args:
        chromosome: Sex chromosome name
        intervals: Iterable of RegionInterval

    Raises:
        OverlappingIntervals: two intervals overlap
    """
    ordered = sorted(intervals, key=lambda iv: (iv.start, iv.end))
    for iv in ordered:
        if iv.end <= iv.start:
            raise InputError(f"Empty or inverted interval [{iv.start}, {iv.end})")
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise OverlappingIntervals(
                f"Intervals [{prev.start}, {prev.end}) {prev.name} and [{cur.start}, {cur.end}) {cur.name} overlap"
            )
    return RegionMap(chromosome=normalize_chrom(chromosome), intervals=tuple(ordered))


def load_region_map(path=None):
    """
    Load a region file

    Args:
        path: BED-like TSV (chrom, start, end, label[, name]), 0-based
            half-open; None or an empty file means everything is autosomal

    Returns:
        RegionMap

    Raises:
        UnknownRegionLabel: label not PAR/NPR
        OverlappingIntervals: intervals overlap
    """
    if path is None:
        logger.info("No region file: all variants treated as autosomal")
        return RegionMap()

    try:
        table = pd.read_csv(path, sep="\t", header=None, comment="#", dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        logger.info(f"Region file {path} is empty: all variants treated as autosomal")
        return RegionMap()
    except pd.errors.ParserError as e:
        raise InputError(f"Cannot parse region file {path}: {e}") from e

    if table.shape[1] < 4:
        raise InputError(f"Region file {path} needs at least 4 columns (chrom, start, end, label)")

    chromosomes = {normalize_chrom(c) for c in table[0]}
    if len(chromosomes) != 1:
        raise InputError(f"Region file {path} must describe exactly one chromosome, found {sorted(chromosomes)}")

    intervals = []
    for idx, row in enumerate(table.itertuples(index=False, name=None)):
        label = str(row[3]).strip().upper()
        if label not in _LABELS:
            raise UnknownRegionLabel(f"Unknown region label {row[3]!r} on line {idx + 1} of {path}")
        name = str(row[4]).strip() if len(row) > 4 and str(row[4]).strip() else label
        try:
            start, end = int(row[1]), int(row[2])
        except ValueError:
            raise InputError(f"Non-integer coordinates on line {idx + 1} of {path}") from None
        intervals.append(RegionInterval(start=start, end=end, region=_LABELS[label], name=name))

    region_map = build_region_map(chromosomes.pop(), intervals)
    logger.info(f"Region map loaded: chromosome {region_map.chromosome}, {len(region_map.intervals)} intervals")
    return region_map
