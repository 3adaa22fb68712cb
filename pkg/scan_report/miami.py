"""
Miami Plot Data
Side-by-side -log10 p of two tests per variant, with the display
truncation used when plotting (p > 0.1 drawn at 0.1)
"""

import logging

import numpy as np
import pandas as pd

from core_stats.errors import InputError
from scan_report.results import numeric_column, selector_nlp

logger = logging.getLogger(__name__)

# -log10(0.1)
DISPLAY_FLOOR = 1.0

MIAMI_COLUMNS = ["chrom", "pos", "id", "region", "band", "nlp_a", "nlp_b", "display_a", "display_b"]


def display_value(nlp):
    """Plotted height: -log10 p, with p > 0.1 drawn at 0.1; NaN stays NaN"""
    nlp = np.asarray(nlp, dtype=float)
    return np.where(np.isfinite(nlp), np.maximum(nlp, DISPLAY_FLOOR), np.nan)


def miami_export(table, test_a, test_b, region_map=None):
    """
    Miami-plot data for two tests

    Args:
        table: Result table from read_results
        test_a: Selector drawn above the axis (e.g. "multi")
        test_b: Selector drawn below the axis (e.g. "pooled")
        region_map: Optional RegionMap for the band name column

    Returns:
        pandas DataFrame with MIAMI_COLUMNS; -log10 p (from W, in log
        space) in nlp_*, the truncated heights in display_*; NA rows kept
    """
    try:
        nlp_a = selector_nlp(table, test_a)
        nlp_b = selector_nlp(table, test_b)
    except InputError as e:
        raise InputError(f"Miami export needs both tests in the table: {e}") from None

    positions = numeric_column(table, "pos").astype(np.int64)
    if region_map is not None:
        bands = [region_map.band_name(chrom, int(pos) - 1) for chrom, pos in zip(table["chrom"], positions)]
    else:
        bands = [""] * len(table)

    export = pd.DataFrame({
        "chrom": table["chrom"].to_numpy(),
        "pos": positions,
        "id": table["id"].to_numpy(),
        "region": table["region"].to_numpy(),
        "band": bands,
        "nlp_a": nlp_a,
        "nlp_b": nlp_b,
        "display_a": display_value(nlp_a),
        "display_b": display_value(nlp_b),
    }, columns=MIAMI_COLUMNS)
    logger.info(f"Miami data: {len(export)} variants, {test_a} above / {test_b} below")
    return export
