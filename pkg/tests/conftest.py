import numpy as np
import pytest

from cate_al.beliefs import CateModel, MomentBundle
from cate_al.gp import CmgpParams, NsgpParams, fit_gp
from cate_al.kernels import CoregionalizationConfig, KernelConfig, cmgp_gram, nsgp_gram


def brute_force_conditioning(params, train_x, train_t, train_y, query_x, query_t, noise_var):
    """Naive joint-GP conditioning on the stacked Gram matrix.

    Independent oracle: builds the full prior over train + query points and
    conditions with a dense solve, no Cholesky reuse, no centering tricks
    beyond the train-mean shift.
    """
    train_x = np.atleast_2d(train_x)
    query_x = np.atleast_2d(query_x)
    if isinstance(params, CmgpParams):
        def gram(xa, ta, xb, tb):
            return cmgp_gram(xa, ta, xb, tb, params.kernel, params.coreg)
    else:
        def gram(xa, ta, xb, tb):
            return nsgp_gram(xa, ta, xb, tb, params.kernel0, params.kernel1, params.cross_rho)

    k_tt = gram(train_x, train_t, train_x, train_t) + noise_var * np.eye(len(train_t))
    k_tq = gram(train_x, train_t, query_x, query_t)
    k_qq = gram(query_x, query_t, query_x, query_t)
    yc = np.asarray(train_y, dtype=float) - np.mean(train_y)
    solve = np.linalg.solve(k_tt, np.column_stack([yc[:, None], k_tq]))
    mean = np.mean(train_y) + k_tq.T @ solve[:, 0]
    cov = k_qq - k_tq.T @ solve[:, 1:]
    return mean, 0.5 * (cov + cov.T)


def random_cmgp_params(rng, dim=1, family="rbf"):
    b11 = rng.uniform(0.3, 2.0)
    b22 = rng.uniform(0.3, 2.0)
    b12 = rng.uniform(-0.9, 0.9) * np.sqrt(b11 * b22)
    return CmgpParams(
        kernel=KernelConfig(
            family=family,
            lengthscales=rng.uniform(0.3, 2.5, dim),
            signal_variance=1.0,
            noise_variance=rng.uniform(0.05, 0.8),
        ),
        coreg=CoregionalizationConfig(task_covariance=np.array([[b11, b12], [b12, b22]])),
    )


def random_nsgp_params(rng, dim=1, family="matern52"):
    noise = rng.uniform(0.05, 0.8)
    return NsgpParams(
        kernel0=KernelConfig(family=family, lengthscales=rng.uniform(0.3, 2.5, dim),
                             signal_variance=rng.uniform(0.3, 2.0), noise_variance=noise),
        kernel1=KernelConfig(family=family, lengthscales=rng.uniform(0.3, 2.5, dim),
                             signal_variance=rng.uniform(0.3, 2.0), noise_variance=noise),
        cross_rho=rng.uniform(-0.9, 0.9),
    )


def random_fitted_gp(rng, n=8, dim=1, kind="cmgp"):
    x = rng.normal(size=(n, dim))
    t = rng.integers(0, 2, n)
    if not (t == 0).any():
        t[0] = 0
    if not (t == 1).any():
        t[-1] = 1
    y = rng.normal(size=n)
    params = random_cmgp_params(rng, dim) if kind == "cmgp" else random_nsgp_params(rng, dim)
    return fit_gp(x, t, y, params)


class StubModel(CateModel):
    """Hand-specified predictive moments for formula-level acquisition tests.

    Covers a single candidate against fixed targets; latent queries fall back
    to the prescribed variances with zero cross terms unless given.
    """

    def __init__(self, y_var, f0_var, f1_var, f01_cov, cy0, cy1, noise=1.0, tau_mean_value=0.0):
        self._y_var = np.atleast_1d(np.asarray(y_var, dtype=float))
        self._f0 = np.asarray(f0_var, dtype=float)
        self._f1 = np.asarray(f1_var, dtype=float)
        self._f01 = np.asarray(f01_cov, dtype=float)
        self._cy0 = np.atleast_2d(np.asarray(cy0, dtype=float))
        self._cy1 = np.atleast_2d(np.asarray(cy1, dtype=float))
        self._noise = float(noise)
        self._tau_mean = float(tau_mean_value)

    @property
    def noise_variance(self):
        return self._noise

    def tau_mean(self, x):
        return np.full(np.atleast_2d(x).shape[0], self._tau_mean)

    def tau_sd(self, x):
        v = self._f0 + self._f1 - 2.0 * self._f01
        return np.sqrt(np.maximum(v[: np.atleast_2d(x).shape[0]], 0.0))

    def tau_draws(self, x, k, rng):
        return rng.normal(self._tau_mean, self.tau_sd(np.atleast_2d(x))[0], size=k)

    def moment_bundle(self, cand_x, cand_t, target_x):
        n_c = np.atleast_2d(cand_x).shape[0]
        return MomentBundle(
            y_mean=np.zeros(n_c),
            y_var=np.broadcast_to(self._y_var, (n_c,)).copy(),
            f0_var=self._f0,
            f1_var=self._f1,
            f01_cov=self._f01,
            tau_var=self._f0 + self._f1 - 2.0 * self._f01,
            cy0=np.broadcast_to(self._cy0, (n_c, self._f0.size)).copy(),
            cy1=np.broadcast_to(self._cy1, (n_c, self._f1.size)).copy(),
        )

    def tau_joint_cov(self, target_x):
        return np.diag(self._f0 + self._f1 - 2.0 * self._f01)

    def po_joint_cov(self, target_x):
        m = self._f0.size
        cov = np.zeros((2 * m, 2 * m))
        cov[0::2, 0::2] = np.diag(self._f0)
        cov[1::2, 1::2] = np.diag(self._f1)
        cov[0::2, 1::2] = np.diag(self._f01)
        cov[1::2, 0::2] = np.diag(self._f01)
        return cov

    def latent_cov(self, xa, ta, xb, tb):
        return np.zeros((np.atleast_2d(xa).shape[0], np.atleast_2d(xb).shape[0]))

    def latent_var(self, x, t):
        return np.broadcast_to(self._y_var - self._noise, (np.atleast_2d(x).shape[0],)).copy()

    def _target_means(self, target_x):
        m = np.atleast_2d(target_x).shape[0]
        return np.zeros(m), np.full(m, self._tau_mean)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
