# Core statistics package
# Contains stratum estimators, sdMAF Wald tests and chi-square tail helpers
