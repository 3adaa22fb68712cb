"""
Errors
Exception hierarchy shared by every package
"""


class SdmafError(Exception):
    """Base class for all errors raised by this project"""


class InputError(SdmafError, ValueError):
    """Problem with user-supplied data or options (CLI exit code 1)"""


class EmptyStratum(InputError):
    """A sex x population stratum has no called individuals"""


class InvalidCounts(InputError):
    """Genotype counts are negative or have the wrong shape for the region"""


class DuplicateSample(InputError):
    """A sample identifier appears more than once in the manifest"""


class UnknownSexToken(InputError):
    """Sex column holds a value that is not female/male/F/M/1/2"""


class EmptyManifest(InputError):
    """Manifest file has no sample rows"""


class OverlappingIntervals(InputError):
    """Two region intervals overlap on the same chromosome"""


class UnknownRegionLabel(InputError):
    """Region label is neither PAR nor NPR"""


class MalformedVcfLine(InputError):
    """A VCF data line could not be parsed"""

    def __init__(self, line_number, position, reason):
        self.line_number = line_number
        self.position = position
        self.reason = reason
        super().__init__(f"line {line_number} (POS {position}): {reason}")


class InvalidFrequencies(InputError):
    """Genotype frequency vector is negative or does not sum to one"""


class InvalidProbability(InputError):
    """Sampler probability outside [0, 1]"""


class ConfigError(InputError):
    """Invalid scan or simulation configuration"""


class DegenerateVariance(SdmafError):
    """Wald denominator is zero while the numerator is not"""


class SingularConstraint(SdmafError):
    """Constraint-projected covariance in the oracle is singular"""
