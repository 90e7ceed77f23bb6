"""Shared helpers: planted sensing instances and a brute-force support oracle."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize

from spoofdet.extractor import (
    SensingBatch,
    draw_gaussian_probes,
    gradient,
    loss,
    support_statistic,
)


def planted_batch(
    dimension: int,
    n_samples: int,
    support,
    magnitudes,
    rng,
    calibrate: bool = True,
):
    """Noiseless planted instance: samples are the squared probe responses
    of a sparse vector with the given support and entry magnitudes (random
    phases).  With ``calibrate`` the probes are rescaled so the empirical
    mean response energy equals the vector's squared norm, making the
    planted vector an exactly-zero-loss point.
    """
    gen = np.random.default_rng(rng)
    phi_star = np.zeros(dimension, dtype=np.complex128)
    for idx, mag in zip(support, magnitudes):
        phi_star[idx] = mag * np.exp(2j * np.pi * gen.uniform())
    probes = draw_gaussian_probes(n_samples, dimension, gen)
    zeta = probes.conj() @ phi_star
    if calibrate:
        mean_sq = float(np.mean(np.abs(zeta) ** 2))
        if mean_sq > 0:
            probes = probes * (np.linalg.norm(phi_star) / math.sqrt(mean_sq))
            zeta = probes.conj() @ phi_star
    samples = np.abs(zeta) ** 2
    return SensingBatch(probes=probes, samples=samples), phi_star


def _restricted_objective(batch: SensingBatch, support, x: np.ndarray):
    """Loss and real-paired gradient restricted to a coordinate subset."""
    size = len(support)
    phi = np.zeros(batch.dimension, dtype=np.complex128)
    phi[list(support)] = x[:size] + 1j * x[size:]
    value = loss(batch, phi)
    grad = gradient(batch, phi)[list(support)]
    return value, np.concatenate([2.0 * grad.real, 2.0 * grad.imag])


def brute_force_sparse_support(
    batch: SensingBatch,
    max_sparsity: int = 2,
    random_starts: int = 3,
    seed: int = 0,
) -> tuple:
    """Exhaustive oracle: enumerate every support of size <= ``max_sparsity``
    and minimize the loss restricted to it (multi-start quasi-Newton);
    return the support achieving the smallest minimum.  Smaller supports win
    ties, because sizes are scanned in increasing order and replacements
    require strict improvement.
    """
    gen = np.random.default_rng(seed)
    stat = support_statistic(batch)
    scale = math.sqrt(max(batch.sample_mean, 1e-12))
    tie_slack = 1e-9 * max(batch.sample_mean, 1.0) ** 2

    best_value = math.inf
    best_support: tuple = ()
    for size in range(1, max_sparsity + 1):
        for support in itertools.combinations(range(batch.dimension), size):
            informed = np.concatenate(
                [np.sqrt(stat[list(support)]), np.zeros(size)]
            )
            starts = [informed] + [
                gen.normal(scale=scale, size=2 * size)
                for _ in range(random_starts)
            ]
            value = math.inf
            for x0 in starts:
                result = minimize(
                    lambda x: _restricted_objective(batch, support, x),
                    x0,
                    jac=True,
                    method="BFGS",
                    options={"maxiter": 80, "gtol": 1e-12},
                )
                value = min(value, float(result.fun))
            if value < best_value - tie_slack:
                best_value = value
                best_support = support
    return tuple(sorted(best_support))
