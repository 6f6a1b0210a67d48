"""Bootstrap ensemble of linear outcome models with a separable effect head.

Each member is a ridge regression on a bootstrap resample of the design
``[1, x, t, t * x]``, so the fitted surface decomposes into a baseline head
``mu(x)`` and an effect head ``tau(x)`` with ``f(x, t) = mu(x) + t * tau(x)``.
The spread across members stands in for posterior draws; beliefs are obtained
by fitting a Gaussian to those draws (the sample-based posterior route).
"""

from __future__ import annotations

import numpy as np

from .beliefs import (
    CateModel,
    JointGaussianBelief,
    MomentBundle,
    SamplePosterior,
    empirical_gaussian_fit,
    quantity_labels,
)
from .errors import InputError, NumericalError


class EnsembleLinearModel(CateModel):
    """Fitted bootstrap ensemble; immutable, predictions are pure."""

    def __init__(self, mu_weights, tau_weights, ridge, seed, noise_var):
        # weights: (n_members, d + 1) with the intercept first
        self.mu_weights = mu_weights
        self.tau_weights = tau_weights
        self.ridge = float(ridge)
        self.seed = seed
        self._noise_var = float(noise_var)

    @property
    def n_members(self) -> int:
        return self.mu_weights.shape[0]

    @property
    def noise_variance(self) -> float:
        return self._noise_var

    # -- member predictions ----------------------------------------------

    @staticmethod
    def _design(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.hstack([np.ones((x.shape[0], 1)), x])

    def member_mu(self, x) -> np.ndarray:
        """(n_members, n) baseline-head predictions."""
        return self.mu_weights @ self._design(x).T

    def member_tau(self, x) -> np.ndarray:
        """(n_members, n) effect-head predictions."""
        return self.tau_weights @ self._design(x).T

    def member_f(self, x, t) -> np.ndarray:
        t = np.asarray(t, dtype=float).reshape(1, -1)
        return self.member_mu(x) + t * self.member_tau(x)

    # -- CateModel surface -------------------------------------------------

    def tau_mean(self, x) -> np.ndarray:
        return self.member_tau(x).mean(axis=0)

    def tau_sd(self, x) -> np.ndarray:
        return self.member_tau(x).std(axis=0, ddof=1)

    def tau_draws(self, x, k, rng: np.random.Generator) -> np.ndarray:
        draws = self.member_tau(np.atleast_2d(np.asarray(x, dtype=float)))[:, 0]
        return rng.choice(draws, size=int(k), replace=True)

    def moment_bundle(self, cand_x, cand_t, target_x) -> MomentBundle:
        fc = self.member_f(cand_x, cand_t)            # (m_members, n_c)
        mu = self.member_mu(target_x)                 # (m_members, m)
        tau = self.member_tau(target_x)
        f0, f1 = mu, mu + tau
        n = self.n_members

        def cov_cols(a, b):
            ac = a - a.mean(axis=0)
            bc = b - b.mean(axis=0)
            return ac.T @ bc / (n - 1)

        f0c = f0 - f0.mean(axis=0)
        f1c = f1 - f1.mean(axis=0)
        return MomentBundle(
            y_mean=fc.mean(axis=0),
            y_var=fc.var(axis=0, ddof=1) + self._noise_var,
            f0_var=f0.var(axis=0, ddof=1),
            f1_var=f1.var(axis=0, ddof=1),
            f01_cov=np.sum(f0c * f1c, axis=0) / (n - 1),
            tau_var=tau.var(axis=0, ddof=1),
            cy0=cov_cols(fc, f0),
            cy1=cov_cols(fc, f1),
        )

    def tau_joint_cov(self, target_x) -> np.ndarray:
        tau = self.member_tau(target_x)
        tc = tau - tau.mean(axis=0)
        cov = tc.T @ tc / (self.n_members - 1)
        return 0.5 * (cov + cov.T)

    def po_joint_cov(self, target_x) -> np.ndarray:
        mu = self.member_mu(target_x)
        tau = self.member_tau(target_x)
        m = mu.shape[1]
        stacked = np.empty((self.n_members, 2 * m))
        stacked[:, 0::2] = mu
        stacked[:, 1::2] = mu + tau
        sc = stacked - stacked.mean(axis=0)
        cov = sc.T @ sc / (self.n_members - 1)
        return 0.5 * (cov + cov.T)

    def latent_cov(self, xa, ta, xb, tb) -> np.ndarray:
        fa = self.member_f(xa, ta)
        fb = self.member_f(xb, tb)
        fac = fa - fa.mean(axis=0)
        fbc = fb - fb.mean(axis=0)
        return fac.T @ fbc / (self.n_members - 1)

    def _target_means(self, target_x):
        mu = self.member_mu(target_x).mean(axis=0)
        tau = self.member_tau(target_x).mean(axis=0)
        return mu, mu + tau

    def predictive_belief(self, candidate, target_x) -> JointGaussianBelief:
        """Empirical-Gaussian belief from member draws, noise added to Var[y]."""
        samples = posterior_draws(self, candidate, target_x)
        belief = empirical_gaussian_fit(samples)
        belief.cov[0, 0] += self._noise_var
        return belief


def fit_ensemble(x, t, y, n_members: int = 32, ridge: float = 1e-4, rng=None) -> EnsembleLinearModel:
    """Fit the bootstrap ensemble; deterministic given the rng seed.

    Members whose bootstrap resample contains a single treatment arm have
    their effect head shrunk to zero (the contrast is unidentified there).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.asarray(t, dtype=int).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if int(n_members) < 2:
        raise InputError(f"need at least 2 ensemble members, got {n_members}")
    if ridge <= 0:
        raise InputError("ridge penalty must be > 0")
    if y.size < 2:
        raise InputError("need at least 2 labeled points")
    if np.any((t != 0) & (t != 1)):
        raise InputError("treatments must be 0 or 1")
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    seed_state = rng.bit_generator.state  # recorded for reproducibility audits

    n, d = x.shape
    base = np.hstack([np.ones((n, 1)), x])
    width = d + 1
    mu_w = np.empty((int(n_members), width))
    tau_w = np.empty((int(n_members), width))
    for j in range(int(n_members)):
        idx = rng.integers(0, n, size=n)
        zb = np.hstack([base[idx], t[idx, None] * base[idx]])
        penalty = np.full(2 * width, ridge)
        if len(np.unique(t[idx])) < 2:
            penalty[width:] = 1e8  # single-arm resample: pin the effect head at 0
        lhs = zb.T @ zb + np.diag(penalty)
        try:
            w = np.linalg.solve(lhs, zb.T @ y[idx])
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"ensemble member {j}: normal equations are singular") from exc
        mu_w[j] = w[:width]
        tau_w[j] = w[width:]

    model = EnsembleLinearModel(mu_w, tau_w, ridge, seed_state, noise_var=1.0)
    resid = y - model.member_f(x, t).mean(axis=0)
    model._noise_var = float(np.mean(resid**2))
    return model


def posterior_draws(model: EnsembleLinearModel, candidate, target_x) -> SamplePosterior:
    """One row per member over (f at candidate, f0/f1/tau at each target)."""
    cx, ct = candidate
    cx = np.atleast_1d(np.asarray(cx, dtype=float))[None, :]
    target_x = np.atleast_2d(np.asarray(target_x, dtype=float))
    m = target_x.shape[0]
    fc = model.member_f(cx, [int(ct)])[:, 0]
    mu = model.member_mu(target_x)
    tau = model.member_tau(target_x)
    draws = np.empty((model.n_members, 1 + 3 * m))
    draws[:, 0] = fc
    draws[:, 1::3] = mu
    draws[:, 2::3] = mu + tau
    draws[:, 3::3] = tau
    return SamplePosterior(draws=draws, labels=quantity_labels(m))
