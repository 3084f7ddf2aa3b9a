"""Zero-mean Gaussian-process regression with a squared-exponential ARD kernel."""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

JITTER0 = 1e-8


class CholeskyFailure(np.linalg.LinAlgError):
    pass


def se_kernel(A, B, lengthscales, signal_var):
    A = np.asarray(A, float) / lengthscales
    B = np.asarray(B, float) / lengthscales
    d2 = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * A @ B.T
    return signal_var * np.exp(-0.5 * np.maximum(d2, 0.0))


def stable_cholesky(K, max_tries: int = 6):
    """Lower Cholesky factor, adding escalating diagonal jitter from 1e-8 if needed."""
    try:
        return cholesky(K, lower=True), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER0
    for _ in range(max_tries):
        try:
            return cholesky(K + jitter * np.eye(len(K)), lower=True), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise CholeskyFailure(f"kernel matrix not positive definite even with jitter {jitter / 10:g}")


class GaussianProcess:
    def __init__(self, lengthscales, signal_var: float = 1.0, noise_var: float = 1e-6):
        self.lengthscales = np.atleast_1d(np.asarray(lengthscales, float))
        self.signal_var = float(signal_var)
        self.noise_var = float(noise_var)
        self.X = None

    def fit(self, X, y) -> "GaussianProcess":
        self.X = np.atleast_2d(np.asarray(X, float))
        self.y = np.asarray(y, float).ravel()
        K = se_kernel(self.X, self.X, self.lengthscales, self.signal_var) + self.noise_var * np.eye(len(self.X))
        self.L, self.jitter = stable_cholesky(K)
        self.alpha = cho_solve((self.L, True), self.y)
        return self

    def predict(self, Xs) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent variance at ``Xs``."""
        Xs = np.atleast_2d(np.asarray(Xs, float))
        if self.X is None:
            return np.zeros(len(Xs)), np.full(len(Xs), self.signal_var)
        Ks = se_kernel(Xs, self.X, self.lengthscales, self.signal_var)
        mean = Ks @ self.alpha
        v = solve_triangular(self.L, Ks.T, lower=True)
        var = self.signal_var - (v ** 2).sum(0)
        return mean, np.maximum(var, 0.0)

    def predict_with_grad(self, x):
        """Mean, std and their gradients at a single point ``x``."""
        x = np.asarray(x, float).ravel()
        k = se_kernel(x[None, :], self.X, self.lengthscales, self.signal_var)[0]
        dk = -k[:, None] * (x[None, :] - self.X) / self.lengthscales ** 2     # (n, d)
        mean = float(k @ self.alpha)
        dmean = self.alpha @ dk
        kinv_k = cho_solve((self.L, True), k)
        var = max(self.signal_var - float(k @ kinv_k), 1e-18)
        dvar = -2.0 * kinv_k @ dk
        std = np.sqrt(var)
        return mean, std, dmean, dvar / (2.0 * std)

    def log_marginal_likelihood(self) -> float:
        n = len(self.y)
        return float(-0.5 * self.y @ self.alpha - np.log(np.diag(self.L)).sum() - 0.5 * n * np.log(2 * np.pi))


def fit_hyperparameters(X, y, rng, n_starts: int = 4, bounds=((-3.0, 1.5), (-3.0, 1.5), (-12.0, -2.0)),
                        init=None, max_fev: int = 600) -> GaussianProcess:
    """Maximise the marginal likelihood over log length-scales, log signal and log noise
    variance with multi-start Nelder-Mead."""
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    d = X.shape[1]
    (ll_lo, ll_hi), (sv_lo, sv_hi), (nv_lo, nv_hi) = bounds
    lo = np.array([ll_lo] * d + [sv_lo, nv_lo])
    hi = np.array([ll_hi] * d + [sv_hi, nv_hi])

    def nll(theta):
        theta = np.clip(theta, lo, hi)
        gp = GaussianProcess(np.exp(theta[:d]), np.exp(theta[d]), np.exp(theta[d + 1]))
        try:
            gp.fit(X, y)
        except CholeskyFailure:
            return 1e10
        return -gp.log_marginal_likelihood()

    starts = [np.array([np.log(0.3)] * d + [0.0, np.log(1e-4)])]
    if init is not None:
        starts.append(np.asarray(init, float))
    starts += [rng.uniform(lo, hi) for _ in range(max(0, n_starts - len(starts)))]
    best = None
    for x0 in starts:
        res = minimize(nll, x0, method="Nelder-Mead", options={"maxfev": max_fev, "xatol": 1e-3,
                                                                 "fatol": 1e-4})
        if best is None or res.fun < best.fun:
            best = res
    theta = np.clip(best.x, lo, hi)
    gp = GaussianProcess(np.exp(theta[:d]), np.exp(theta[d]), np.exp(theta[d + 1])).fit(X, y)
    gp.theta = theta
    return gp
