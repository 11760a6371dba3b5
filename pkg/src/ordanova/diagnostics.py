"""Monte Carlo error diagnostics for correlated draws."""

import numpy as np

__all__ = ["effective_sample_size", "mcse_mean"]


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance estimates at all lags, via FFT."""
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[:n]
    return acov / n


def effective_sample_size(x: np.ndarray) -> float:
    """Effective sample size of a scalar chain.

    Uses Geyer's initial positive sequence: sums of adjacent autocorrelation
    pairs are accumulated until the first non-positive pair. A constant
    chain is treated as independent (returns its length).
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 4:
        return float(n)
    acov = _autocovariance(x)
    if acov[0] <= 0.0:
        return float(n)
    rho = acov / acov[0]
    tau = 1.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        t += 2
    ess = n / tau
    return float(min(max(ess, 1.0), n))


def mcse_mean(x: np.ndarray) -> float:
    """Monte Carlo standard error of the mean of a scalar chain."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 2:
        return float("nan")
    sd = float(np.std(x, ddof=1))
    return sd / np.sqrt(effective_sample_size(x))
