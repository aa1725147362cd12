"""Independent reference values for the Monte Carlo harness.

The discrete scheme is linear in the noise, so the expected squared
difference of two rungs is a quadratic form in the tfGn covariance. Impulse
responses give the weights; no sampling is involved.
"""

import numpy as np

from tfspde import solver, spectral, tfgn


def _impulse_weights(frac, tau, steps, ratio=1):
    """w[:, j]: terminal response of each mode to a unit increment in step j."""
    n = frac.size
    imp = np.zeros((steps, n, steps))
    for j in range(steps):
        imp[j, :, j] = 1.0
    _, _, u = solver.integrate(np.zeros(n), imp, frac, tau, ratio, solver.Forcing.linear())
    return u.T


def _deterministic(u0, frac, tau, steps):
    n = frac.size
    _, _, u = solver.integrate(u0, np.zeros((n, steps)), frac, tau, 1, solver.Forcing.linear())
    return u


def exact_temporal_errors(alpha, rho, hurst, mu, horizon, modes_per_dim, resolutions):
    basis = spectral.build_basis(2, modes_per_dim)
    u0 = spectral.project(lambda x, y: x ** 2 * y ** 2, basis).coeffs
    fine = int(np.lcm.reduce(resolutions))
    cov = tfgn.increment_covariance(tfgn.TemperingParams(hurst, mu),
                                    tfgn.TimeGrid(horizon, fine)).matrix
    sigma = basis.eigenvalues ** -rho
    frac = spectral.fractional_eigenvalues(basis, alpha)
    weights, det = {}, {}
    for m in resolutions:
        w = _impulse_weights(frac, horizon / m, m)
        weights[m] = np.repeat(w, fine // m, axis=1) * sigma[:, None]
        det[m] = _deterministic(u0, frac, horizon / m, m)
    errs = []
    for a, b in zip(resolutions, resolutions[1:]):
        dw = weights[b] - weights[a]
        errs.append(np.sqrt(np.einsum("mi,ij,mj->", dw, cov, dw) + np.sum((det[b] - det[a]) ** 2)))
    return errs


def exact_spatial_errors(alpha, rho, hurst, mu, horizon, steps, resolutions):
    big = spectral.build_basis(2, max(resolutions))
    cov = tfgn.increment_covariance(tfgn.TemperingParams(hurst, mu),
                                    tfgn.TimeGrid(horizon, steps)).matrix
    frac = spectral.fractional_eigenvalues(big, alpha)
    sigma = big.eigenvalues ** -rho
    tau = horizon / steps
    # every mode is an independent scalar recursion: one impulse run suffices
    n = big.size
    imp = np.zeros((n, steps))
    imp[:, 0] = 1.0
    _, _, u = solver.integrate(np.zeros(n), imp, frac, tau, 1, solver.Forcing.linear(), record="all")
    resp = u[1:].T[:, ::-1]                      # response at T to a kick at step j
    noise_var = sigma ** 2 * np.einsum("mi,ij,mj->m", resp, cov, resp)
    full = spectral.project(lambda x, y: x ** 2 * y ** 2, big).coeffs
    det = _deterministic(full, frac, tau, steps)
    errs = []
    for a, b in zip(resolutions, resolutions[1:]):
        inner = spectral.build_basis(2, a).positions_in(big)
        outer = spectral.build_basis(2, b).positions_in(big)
        gap = np.setdiff1d(outer, inner)
        errs.append(np.sqrt(np.sum(noise_var[gap]) + np.sum(det[gap] ** 2)))
    return errs
