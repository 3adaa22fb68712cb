"""
Settings
Scan and simulation configuration read from the environment (optionally a
.env file) with explicit overrides from the command line
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace

from dotenv import load_dotenv

from core_stats.errors import ConfigError
from ingest.vcf_stream import ON_MALFORMED_CHOICES

logger = logging.getLogger(__name__)

TEST_NAMES = ("single", "multi", "pooled", "pair-diff", "omnibus-diff")

DEFAULT_MAF_THRESHOLD = 0.05
DEFAULT_SIGNIFICANCE = 5e-8
DEFAULT_WORKERS = 1
DEFAULT_ON_MALFORMED = "skip"
DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_SEED = 2023

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def load_environment(dotenv_path=None):
    """
    Load a .env file into the process environment

    Existing environment variables win over the file.

    Returns:
        True if a file was found and loaded
    """
    loaded = load_dotenv(dotenv_path=dotenv_path, override=False)
    if loaded:
        logger.debug(f"Environment loaded from {dotenv_path or '.env'}")
    return loaded


def configure_logging(level=None, verbose=False):
    """Configure root logging once for the CLI (stderr)"""
    if verbose:
        level = "DEBUG"
    level = (level or os.getenv("SDMAF_LOG_LEVEL", DEFAULT_LOG_LEVEL)).upper()
    numeric = logging.getLevelName(level)
    if not isinstance(numeric, int):
        raise ConfigError(f"Unknown log level {level!r}")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)


def _env_float(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from None


def _env_int(name, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None


def _env_str(name, default):
    raw = os.getenv(name)
    return default if raw is None or raw.strip() == "" else raw.strip()


def parse_tests(text):
    """'multi,pooled' -> ('multi', 'pooled'); 'all' selects every test"""
    if text is None:
        return TEST_NAMES
    if isinstance(text, (tuple, list)):
        items = [str(item).strip() for item in text]
    else:
        items = [item.strip() for item in str(text).split(",")]
    items = [item for item in items if item]
    if not items or items == ["all"]:
        return TEST_NAMES
    # keep the canonical order
    return tuple(name for name in TEST_NAMES if name in items) + tuple(
        item for item in items if item not in TEST_NAMES
    )


def _check_common(threshold, maf_threshold, workers, tests):
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"Significance threshold must lie in (0, 1), got {threshold}")
    if not 0.0 <= maf_threshold <= 0.5:
        raise ConfigError(f"MAF threshold must lie in [0, 0.5], got {maf_threshold}")
    if workers < 1:
        raise ConfigError(f"Worker count must be at least 1, got {workers}")
    unknown = [name for name in tests if name not in TEST_NAMES]
    if unknown:
        raise ConfigError(f"Unknown tests {unknown}; choose from {list(TEST_NAMES)}")
    if not tests:
        raise ConfigError("No tests selected")


def _drop_none(overrides):
    return {key: value for key, value in overrides.items() if value is not None}


@dataclass(frozen=True)
class ScanConfig:
    """
    Settings of one scan

    baseline None means the alphabetically first testable population.
    """

    vcf: str = ""
    manifest: str = ""
    out: str = ""
    regions: str = None
    maf_threshold: float = DEFAULT_MAF_THRESHOLD
    baseline: str = None
    significance: float = DEFAULT_SIGNIFICANCE
    tests: tuple = field(default=TEST_NAMES)
    workers: int = DEFAULT_WORKERS
    all_pairs: bool = False
    export_freqs: str = None
    on_malformed: str = DEFAULT_ON_MALFORMED

    @classmethod
    def from_env(cls, **overrides):
        """
        Build from SDMAF_* environment variables, then apply overrides

        Args:
            **overrides: Field values; None means "not given"

        Returns:
            Validated ScanConfig
        """
        values = {
            "regions": os.getenv("SDMAF_REGIONS") or None,
            "maf_threshold": _env_float("SDMAF_MAF_THRESHOLD", DEFAULT_MAF_THRESHOLD),
            "significance": _env_float("SDMAF_SIGNIFICANCE", DEFAULT_SIGNIFICANCE),
            "workers": _env_int("SDMAF_WORKERS", DEFAULT_WORKERS),
            "on_malformed": _env_str("SDMAF_ON_MALFORMED", DEFAULT_ON_MALFORMED),
        }
        values.update(_drop_none(overrides))
        if "tests" in values:
            values["tests"] = parse_tests(values["tests"])
        config = cls(**values)
        config.validate()
        return config

    def validate(self):
        """
        Raises:
            ConfigError: a setting is out of range
        """
        _check_common(self.significance, self.maf_threshold, self.workers, self.tests)
        if self.on_malformed not in ON_MALFORMED_CHOICES:
            raise ConfigError(f"on_malformed must be one of {ON_MALFORMED_CHOICES}, got {self.on_malformed!r}")
        if not self.vcf or not self.manifest or not self.out:
            raise ConfigError("A scan needs a VCF, a manifest and an output path")

    def resolve_baseline(self, populations):
        """
        Check the baseline against the testable populations

        Returns:
            Copy of the config with the baseline filled in
        """
        populations = sorted(populations)
        if not populations:
            raise ConfigError("No testable populations (each needs at least one female and one male)")
        if self.baseline is None:
            return replace(self, baseline=populations[0])
        if self.baseline not in populations:
            raise ConfigError(f"Baseline {self.baseline!r} is not a testable population: {populations}")
        return self


@dataclass(frozen=True)
class SimulationConfig:
    """Settings of one null simulation"""

    protocol: str = "multipop"
    sizes: tuple = field(default_factory=tuple)
    out: str = ""
    freqs: str = None
    synthetic: int = None
    region: str = "autosomal"
    seed: int = DEFAULT_SEED
    maf_threshold: float = DEFAULT_MAF_THRESHOLD
    significance: float = DEFAULT_SIGNIFICANCE
    baseline: str = None
    tests: tuple = field(default=TEST_NAMES)
    workers: int = DEFAULT_WORKERS
    hwd_fraction: float = 0.5
    sdmaf_shift: float = 0.02

    @classmethod
    def from_env(cls, **overrides):
        """Build from SDMAF_* environment variables, then apply overrides"""
        values = {
            "seed": _env_int("SDMAF_SEED", DEFAULT_SEED),
            "maf_threshold": _env_float("SDMAF_MAF_THRESHOLD", DEFAULT_MAF_THRESHOLD),
            "significance": _env_float("SDMAF_SIGNIFICANCE", DEFAULT_SIGNIFICANCE),
            "workers": _env_int("SDMAF_WORKERS", DEFAULT_WORKERS),
        }
        values.update(_drop_none(overrides))
        if "tests" in values:
            values["tests"] = parse_tests(values["tests"])
        config = cls(**values)
        config.validate()
        return config

    def validate(self):
        _check_common(self.significance, self.maf_threshold, self.workers, self.tests)
        if (self.freqs is None) == (self.synthetic is None):
            raise ConfigError("Give exactly one of a frequency table or a synthetic variant count")
        if self.synthetic is not None and self.synthetic < 0:
            raise ConfigError(f"Synthetic variant count must be non-negative, got {self.synthetic}")
        if self.seed < 0:
            raise ConfigError(f"Seed must be non-negative, got {self.seed}")
        if not 0.0 <= self.hwd_fraction <= 1.0:
            raise ConfigError(f"hwd_fraction must lie in [0, 1], got {self.hwd_fraction}")
        if not self.out:
            raise ConfigError("A simulation needs an output path")
        if self.baseline is not None and self.sizes and self.baseline not in [s[0] for s in self.sizes]:
            raise ConfigError(f"Baseline {self.baseline!r} is not among the simulated populations")
