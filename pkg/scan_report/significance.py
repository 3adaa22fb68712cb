"""
Significance Tracker
Counts genome-wide significant variants per test and compares two tests:
which variants only one of them detects, and where they disagree most
"""

import logging

logger = logging.getLogger(__name__)

TOP_DISCORDANT = 9


class SignificanceTracker:
    """
    Significance accumulator
    Tracks tested / NA / significant counts per test selector
    """

    def __init__(self, threshold=5e-8, selectors=()):
        """
        Initialize significance tracker

        Args:
            threshold: p-value below which a variant is significant
            selectors: Test selectors to track (see ResultRow.result)
        """
        self.threshold = threshold
        self.selectors = list(selectors)
        self.tested = {name: 0 for name in self.selectors}
        self.not_available = {name: 0 for name in self.selectors}
        self.significant = {name: [] for name in self.selectors}
        # -log10 p of every test for variants significant under any test
        self.hits = {}
        self.order = []

        logger.info(f"Significance Tracker initialized (threshold: {threshold}, tests: {self.selectors})")

    def record(self, row):
        """
        Record one ResultRow

        Returns:
            Selectors under which the row is significant
        """
        key = (row.chrom, row.pos, row.id)
        significant_under = []
        for name in self.selectors:
            result = row.result(name)
            if result is None:
                continue
            if result.is_na:
                self.not_available[name] += 1
                continue
            self.tested[name] += 1
            if result.is_significant(self.threshold):
                self.significant[name].append(key)
                significant_under.append(name)

        if significant_under:
            self.hits[key] = {
                "region": row.region.value,
                "nlp": {
                    name: (None if row.result(name) is None else row.result(name).neg_log10_p)
                    for name in self.selectors
                },
            }
            self.order.append(key)
            logger.debug(f"{row.id} significant under {significant_under}")
        return significant_under

    def significant_count(self, name):
        return len(self.significant.get(name, []))

    def discordance(self, test_a, test_b):
        """
        Variants significant under exactly one of two tests

        Returns:
            (only_a, only_b) lists of (chrom, pos, id) in input order;
            the two lists are disjoint
        """
        set_a = set(self.significant.get(test_a, []))
        set_b = set(self.significant.get(test_b, []))
        only_a = [key for key in self.significant.get(test_a, []) if key not in set_b]
        only_b = [key for key in self.significant.get(test_b, []) if key not in set_a]
        return only_a, only_b

    def top_discordant(self, test_a, test_b, n=TOP_DISCORDANT):
        """
        Discordant variants with the largest gap in -log10 p

        Args:
            n: Maximum number of variants; None returns all of them

        Returns:
            Dicts (chrom, pos, id, region, only, nlp_a, nlp_b, gap), largest
            gap first, ties in input order
        """
        only_a, only_b = self.discordance(test_a, test_b)
        rows = []
        for only, key in [(test_a, key) for key in only_a] + [(test_b, key) for key in only_b]:
            nlp = self.hits[key]["nlp"]
            nlp_a = nlp.get(test_a)
            nlp_b = nlp.get(test_b)
            gap = abs((nlp_a or 0.0) - (nlp_b or 0.0))
            rows.append({
                "chrom": key[0],
                "pos": key[1],
                "id": key[2],
                "region": self.hits[key]["region"],
                "only": only,
                "nlp_a": nlp_a,
                "nlp_b": nlp_b,
                "gap": gap,
            })
        position = {key: idx for idx, key in enumerate(self.order)}
        rows.sort(key=lambda r: (-r["gap"], position[(r["chrom"], r["pos"], r["id"])]))
        return rows if n is None else rows[:n]

    def merge(self, other):
        """Add another tracker's counts (other's variants come after this one's)"""
        if other.selectors != self.selectors or other.threshold != self.threshold:
            raise ValueError("Cannot merge trackers with different tests or thresholds")
        for name in self.selectors:
            self.tested[name] += other.tested[name]
            self.not_available[name] += other.not_available[name]
            self.significant[name].extend(other.significant[name])
        for key in other.order:
            if key not in self.hits:
                self.order.append(key)
            self.hits[key] = other.hits[key]
        return self

    def get_stats(self):
        """Get per-test counts"""
        return {
            name: {
                "tested": self.tested[name],
                "not_available": self.not_available[name],
                "significant": len(self.significant[name]),
            }
            for name in self.selectors
        }
