"""Reference computations that share no code with the package.

Each oracle evaluates the exact model by brute force (quadrature, dense
linear algebra, exhaustive sums) instead of the closed forms the package uses.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp, roots_hermite


def _wrapped_gaussian_comb(u, phi, n_p, var):
    """sum over all integers m of N(phi - u - 2 pi m / n_p; 0, var), as log."""
    step = 2 * math.pi / n_p
    sd = math.sqrt(var)
    d0 = phi - u
    # all shifts within 12 sd of zero, plus a margin of one step
    m_lo = np.floor((d0.min() - 12 * sd) / step) - 1
    m_hi = np.ceil((d0.max() + 12 * sd) / step) + 1
    m = np.arange(m_lo, m_hi + 1)
    d = d0[:, None] - step * m[None, :]
    return logsumexp(-0.5 * d**2 / var, axis=1) - 0.5 * math.log(2 * math.pi * var)


def amplitude_posterior_quadrature(y, radii, pmf, n_p, sigma_theta_sq, sigma_n_sq, nodes=2048):
    """Exact ring posterior of the phase-noise channel.

    q(r | y) ~ P(r) sum_l (1/n_p) int N(theta; 0, s_th) CN(y; r e^{j(g_l + theta)}, s_n) dtheta.

    Substituting u = angle(y) - g_l - theta folds the sum over phases into one
    periodic integral over u in [-pi, pi), evaluated by the (spectrally
    accurate) periodic trapezoid rule.
    """
    u = -math.pi + 2 * math.pi * np.arange(nodes) / nodes
    if nodes % n_p == 0:
        # the comb has period 2 pi / n_p: evaluate one period and tile it
        period = nodes // n_p
        log_w = np.tile(_wrapped_gaussian_comb(u[:period], float(np.angle(y)), n_p, sigma_theta_sq), n_p)
    else:
        log_w = _wrapped_gaussian_comb(u, float(np.angle(y)), n_p, sigma_theta_sq)
    a = abs(y)
    radii = np.asarray(radii, dtype=float)
    kappa = 2 * a * radii / sigma_n_sq
    # |y - r e^{j phi}|^2 = (a - r)^2 + 2 a r (1 - cos(angle(y) - phi))
    log_s = logsumexp(kappa[:, None] * (np.cos(u) - 1.0)[None, :] + log_w[None, :], axis=1)
    out = np.log(pmf) - (a - radii) ** 2 / sigma_n_sq + log_s
    return np.exp(out - logsumexp(out))


def phase_posterior_quadrature(y, r, n_p, sigma_theta_sq, sigma_n_sq, nodes=2001):
    """Exact first-stage phase posterior by trapezoid over theta in [-6 sd, 6 sd]."""
    sd = math.sqrt(sigma_theta_sq)
    theta = np.linspace(-6 * sd, 6 * sd, nodes)
    w = np.full(nodes, theta[1] - theta[0])
    w[[0, -1]] *= 0.5
    gammas = 2 * math.pi * np.arange(n_p) / n_p
    kappa = 2 * abs(y) * r / sigma_n_sq
    phi = float(np.angle(y))
    log_prior = -0.5 * theta**2 / sigma_theta_sq + np.log(w)
    ll = kappa * (np.cos(phi - gammas[:, None] - theta[None, :]) - 1.0) + log_prior
    out = logsumexp(ll, axis=1)
    return np.exp(out - logsumexp(out))


def dense_gaussian_smoother(z, v, mu_delta, sigma_theta_sq, measured):
    """Leave-one-out marginals of a stationary AR(1) chain by block conditioning.

    ``z, v`` are measurement values and variances; ``measured`` masks which
    positions carry a measurement. Returns (mean, variance) per position,
    each excluding the measurement at that position.
    """
    n = len(z)
    idx = np.arange(n)
    cov = sigma_theta_sq * mu_delta ** np.abs(idx[:, None] - idx[None, :])
    mean = np.zeros(n)
    var = np.zeros(n)
    for i in range(n):
        obs = np.flatnonzero(measured & (idx != i))
        if obs.size == 0:
            mean[i] = 0.0
            var[i] = cov[i, i]
            continue
        s_oo = cov[np.ix_(obs, obs)] + np.diag(v[obs])
        s_io = cov[i, obs]
        sol = np.linalg.solve(s_oo, np.column_stack([z[obs], s_io]))
        mean[i] = s_io @ sol[:, 0]
        var[i] = cov[i, i] - s_io @ sol[:, 1]
    return mean, var


def awgn_mi_gauss_hermite(points, pmf, sigma_n_sq, order=60):
    """I(X;Y) in bits for Y = X + CN(0, s) by tensor Gauss-Hermite quadrature."""
    t, w = roots_hermite(order)
    sd = math.sqrt(sigma_n_sq / 2)
    # noise samples n = sqrt(2) sd (t_a + j t_b), weights w_a w_b / pi
    nr, ni = np.meshgrid(math.sqrt(2) * sd * t, math.sqrt(2) * sd * t, indexing="ij")
    wq = (w[:, None] * w[None, :]).ravel() / math.pi
    noise = (nr + 1j * ni).ravel()
    mi = 0.0
    for x, px in zip(points, pmf):
        y = x + noise
        d = np.abs(y[:, None] - points[None, :]) ** 2
        log_num = -np.abs(noise) ** 2 / sigma_n_sq
        log_den = logsumexp(-d / sigma_n_sq, b=pmf[None, :], axis=1)
        mi += px * float(np.sum(wq * (log_num - log_den)))
    return mi / math.log(2)


def gaussian_rms_width(t, power):
    """RMS width of a pulse from its power profile."""
    e = np.sum(power)
    tc = np.sum(t * power) / e
    return math.sqrt(np.sum((t - tc) ** 2 * power) / e)
