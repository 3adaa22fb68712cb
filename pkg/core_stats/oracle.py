"""
Regression Oracle
Wald statistics computed from the retrospective regression model itself:
individual-level genotype codes, ML estimates, and the inverse Fisher
information assembled from per-population 2x2 blocks. Used by the test
suite to verify the closed-form statistics; not part of the scan path.

Parameter order is theta = (alpha, gamma, gamma_1, eta_1, ..., gamma_{K-1}, eta_{K-1});
the first population is the baseline.
"""

from __future__ import annotations

import logging

import numpy as np

from core_stats.errors import EmptyStratum, SingularConstraint
from core_stats.genotypes import Ploidy

logger = logging.getLogger(__name__)


def genotype_codes(counts):
    """
    Expand counts to individual genotype codes

    Diploid strata give 0/1/2; hemizygous strata give 0/2.
    """
    if counts.ploidy is Ploidy.HAPLOID:
        return np.repeat([0.0, 2.0], [counts.n_b, counts.n_B])
    return np.repeat([0.0, 1.0, 2.0], [counts.n_bb, counts.n_Bb, counts.n_BB])


def _stratum_moments(counts):
    codes = genotype_codes(counts)
    if codes.size == 0:
        raise EmptyStratum("Stratum has no called individuals")
    # MLE of the error variance divides by n
    return codes.mean(), codes.var(ddof=0), codes.size


def fit_model(pairs, region):
    """
    ML estimates of the regression coefficients and the error variances

    Args:
        pairs: PopulationStratumPairs, baseline first
        region: RegionClass (used for shape validation)

    Returns:
        Tuple (theta_hat, inverse_fisher) with theta_hat of length 2K and
        inverse_fisher the 2K x 2K inverse information for the coefficients
    """
    blocks_inv = []
    means = []
    for pair in pairs:
        pair.check_region(region)
        mean_f, var_f, n_f = _stratum_moments(pair.female)
        mean_m, var_m, n_m = _stratum_moments(pair.male)
        if var_f <= 0.0 or var_m <= 0.0:
            raise SingularConstraint(f"{pair.population_label}: monomorphic stratum, information is infinite")
        means.append((mean_m, mean_f))

        t_k = n_f / var_f + n_m / var_m
        c_k = n_f / var_f
        block = np.array([[t_k, c_k], [c_k, c_k]])
        blocks_inv.append(np.linalg.inv(block))

    k = len(pairs)
    mean_m0, mean_f0 = means[0]
    theta = np.zeros(2 * k)
    theta[0] = mean_m0
    theta[1] = mean_f0 - mean_m0
    for idx in range(1, k):
        mean_mk, mean_fk = means[idx]
        theta[2 * idx] = mean_mk - mean_m0
        theta[2 * idx + 1] = (mean_fk - mean_mk) - (mean_f0 - mean_m0)

    # I = R J R' with J = blockdiag(B_k); I^-1 = R'^-1 J^-1 R^-1
    j_inv = np.zeros((2 * k, 2 * k))
    for idx, block_inv in enumerate(blocks_inv):
        j_inv[2 * idx:2 * idx + 2, 2 * idx:2 * idx + 2] = block_inv
    r_inv = np.eye(2 * k)
    for idx in range(1, k):
        r_inv[0:2, 2 * idx:2 * idx + 2] = -np.eye(2)
    inverse_fisher = r_inv.T @ j_inv @ r_inv
    return theta, inverse_fisher


def oracle_wald(pairs, region, hypothesis):
    """
    Wald statistic R(theta)' [C' I^-1 C]^-1 R(theta) for a linear hypothesis

    Args:
        pairs: PopulationStratumPairs, baseline first
        region: RegionClass
        hypothesis: Constraint matrix L (q x 2K); H0 is L theta = 0

    Returns:
        Wald statistic (float)

    Raises:
        SingularConstraint: projected covariance is singular
    """
    pairs = list(pairs)
    theta, inverse_fisher = fit_model(pairs, region)
    constraints = np.atleast_2d(np.asarray(hypothesis, dtype=float))
    if constraints.shape[1] != theta.size:
        raise SingularConstraint(f"Hypothesis has {constraints.shape[1]} columns, model has {theta.size}")

    restriction = constraints @ theta
    covariance = constraints @ inverse_fisher @ constraints.T
    if np.linalg.matrix_rank(covariance) < covariance.shape[0]:
        raise SingularConstraint("Constraint-projected covariance is singular")
    try:
        solved = np.linalg.solve(covariance, restriction)
    except np.linalg.LinAlgError as e:
        raise SingularConstraint(str(e)) from e
    return float(restriction @ solved)


def _unit_rows(k, indices):
    rows = np.zeros((len(indices), 2 * k))
    for row, col in enumerate(indices):
        rows[row, col] = 1.0
    return rows


def hypothesis_gamma_zero(k):
    """H0: gamma = 0 (no sdMAF in the baseline population)"""
    return _unit_rows(k, [1])


def hypothesis_multi(k):
    """H0: gamma = eta_1 = ... = eta_{K-1} = 0"""
    return _unit_rows(k, [1] + [2 * idx + 1 for idx in range(1, k)])


def hypothesis_eta_zero(k, l):
    """H0: eta_l = 0 (population l has the baseline's sdMAF)"""
    return _unit_rows(k, [2 * l + 1])


def hypothesis_eta_diff(k, first, second):
    """H0: eta_first - eta_second = 0"""
    row = np.zeros((1, 2 * k))
    row[0, 2 * first + 1] = 1.0
    row[0, 2 * second + 1] = -1.0
    return row


def hypothesis_omnibus_diff(k):
    """H0: eta_1 = ... = eta_{K-1} = 0"""
    return _unit_rows(k, [2 * idx + 1 for idx in range(1, k)])


def rebaseline(pairs, baseline_index):
    """Reorder populations so that pairs[baseline_index] becomes the baseline"""
    pairs = list(pairs)
    return [pairs[baseline_index]] + pairs[:baseline_index] + pairs[baseline_index + 1:]
