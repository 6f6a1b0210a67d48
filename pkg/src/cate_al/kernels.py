"""Covariance kernels for the treatment-effect GP estimators.

Two single-output stationary families (RBF and Matern-5/2 with per-dimension
lengthscales) and two joint kernels over (covariate, treatment) pairs:

* a coregionalized kernel, ``B[t, t'] * k(x, x')``, where ``B`` is a 2x2 PSD
  task-covariance matrix shared by both arms, and
* a per-arm kernel that gives each treatment arm its own stationary kernel
  and couples the arms through a cross-covariance built from the overlap of
  the two arm kernels.

Scalar entry points mirror the vectorized Gram builders used by the model
fitting code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InputError

KERNEL_FAMILIES = ("rbf", "matern52")

_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class KernelConfig:
    """Hyperparameters of one stationary kernel.

    Parameters
    ----------
    family : str
        "rbf" or "matern52".
    lengthscales : array_like, shape (d,)
        Positive per-dimension lengthscales.
    signal_variance : float
        Positive prior variance k(x, x).
    noise_variance : float
        Positive observation-noise variance attached to this kernel's GP.
    jitter : float
        Base diagonal jitter used when factorizing Gram matrices,
        in [1e-10, 1e-3].
    """

    family: str = "rbf"
    lengthscales: np.ndarray = field(default_factory=lambda: np.ones(1))
    signal_variance: float = 1.0
    noise_variance: float = 0.1
    jitter: float = 1e-8

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}; expected one of {KERNEL_FAMILIES}")
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or ls.size == 0:
            raise InputError("lengthscales must be a non-empty 1-d array")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise InputError("lengthscales must be finite and > 0")
        object.__setattr__(self, "lengthscales", ls)
        for name in ("signal_variance", "noise_variance"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise InputError(f"{name} must be finite and > 0, got {v}")
            object.__setattr__(self, name, v)
        j = float(self.jitter)
        if not (1e-10 <= j <= 1e-3):
            raise InputError(f"jitter must lie in [1e-10, 1e-3], got {j}")
        object.__setattr__(self, "jitter", j)

    @property
    def input_dim(self) -> int:
        return self.lengthscales.size


@dataclass(frozen=True)
class CoregionalizationConfig:
    """2x2 symmetric PSD task covariance coupling the two treatment arms."""

    task_covariance: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        b = np.asarray(self.task_covariance, dtype=float)
        if b.shape != (2, 2):
            raise InputError(f"task_covariance must be 2x2, got shape {b.shape}")
        if not np.all(np.isfinite(b)):
            raise InputError("task_covariance must be finite")
        if abs(b[0, 1] - b[1, 0]) > 1e-10 * max(1.0, np.abs(b).max()):
            raise InputError("task_covariance must be symmetric")
        b = 0.5 * (b + b.T)
        if np.linalg.eigvalsh(b).min() < -1e-10 * max(1.0, np.abs(b).max()):
            raise InputError("task_covariance must be positive semi-definite")
        object.__setattr__(self, "task_covariance", b)

    @classmethod
    def from_cholesky(cls, l11: float, l21: float, l22: float) -> "CoregionalizationConfig":
        """Build B = L L^T from lower-triangular entries; PSD by construction."""
        low = np.array([[l11, 0.0], [l21, l22]], dtype=float)
        return cls(task_covariance=low @ low.T)


def _check_dim(x: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (cfg.input_dim,):
        raise InputError(f"input has dimension {x.shape}, kernel expects ({cfg.input_dim},)")
    return x


def _check_treatment(t) -> int:
    t = int(t)
    if t not in (0, 1):
        raise InputError(f"treatment must be 0 or 1, got {t}")
    return t


def _sq_dist(xa: np.ndarray, xb: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    """Squared scaled distance matrix sum_d ((a_d - b_d) / l_d)^2."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    return cdist(xa / lengthscales, xb / lengthscales, "sqeuclidean")


def _rbf_from_r2(r2: np.ndarray, signal_variance: float) -> np.ndarray:
    return signal_variance * np.exp(-0.5 * r2)


def _matern52_from_r2(r2: np.ndarray, signal_variance: float) -> np.ndarray:
    r = np.sqrt(np.maximum(r2, 0.0))
    a = _SQRT5 * r
    return signal_variance * (1.0 + a + (5.0 / 3.0) * r2) * np.exp(-a)


def kernel_gram(xa: np.ndarray, xb: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Gram matrix of the configured stationary kernel between two point sets."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    if xa.shape[1] != cfg.input_dim or xb.shape[1] != cfg.input_dim:
        raise InputError(
            f"points have dimensions {xa.shape[1]}/{xb.shape[1]}, kernel expects {cfg.input_dim}"
        )
    r2 = _sq_dist(xa, xb, cfg.lengthscales)
    if cfg.family == "rbf":
        return _rbf_from_r2(r2, cfg.signal_variance)
    return _matern52_from_r2(r2, cfg.signal_variance)


def rbf_kernel(x1, x2, cfg: KernelConfig) -> float:
    """signal_variance * exp(-0.5 * sum_d ((x1_d - x2_d) / l_d)^2)."""
    if cfg.family != "rbf":
        raise InputError("rbf_kernel requires an rbf config")
    x1 = _check_dim(x1, cfg)
    x2 = _check_dim(x2, cfg)
    return float(kernel_gram(x1[None, :], x2[None, :], cfg)[0, 0])


def matern52_kernel(x1, x2, cfg: KernelConfig) -> float:
    """Matern-5/2 value (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r) scaled by signal_variance."""
    if cfg.family != "matern52":
        raise InputError("matern52_kernel requires a matern52 config")
    x1 = _check_dim(x1, cfg)
    x2 = _check_dim(x2, cfg)
    return float(kernel_gram(x1[None, :], x2[None, :], cfg)[0, 0])


# -- coregionalized two-arm kernel -------------------------------------------


def cmgp_gram(
    xa: np.ndarray,
    ta: np.ndarray,
    xb: np.ndarray,
    tb: np.ndarray,
    kcfg: KernelConfig,
    ccfg: CoregionalizationConfig,
) -> np.ndarray:
    """Gram of the coregionalized kernel B[t, t'] * k(x, x')."""
    ta = np.asarray(ta, dtype=int)
    tb = np.asarray(tb, dtype=int)
    if np.any((ta != 0) & (ta != 1)) or np.any((tb != 0) & (tb != 1)):
        raise InputError("treatments must be 0 or 1")
    base = kernel_gram(xa, xb, kcfg)
    return ccfg.task_covariance[np.ix_(ta, tb)] * base


def cmgp_joint_kernel(p1, p2, kcfg: KernelConfig, ccfg: CoregionalizationConfig) -> float:
    """Scalar coregionalized kernel between two (covariate, treatment) pairs."""
    x1, t1 = p1
    x2, t2 = p2
    t1 = _check_treatment(t1)
    t2 = _check_treatment(t2)
    x1 = _check_dim(x1, kcfg)
    x2 = _check_dim(x2, kcfg)
    return float(cmgp_gram(x1[None, :], [t1], x2[None, :], [t2], kcfg, ccfg)[0, 0])


# -- per-arm kernel with overlap cross-covariance ----------------------------
#
# Arm marginals are k0 (control) and k1 (treated). The cross-arm covariance is
# rho * c01(x, x') where c01 is the overlap kernel of the two arm kernels: same
# family, per-dimension lengthscale mixing, and an amplitude penalty that keeps
# the joint two-arm prior positive semi-definite for any |rho| <= 1 (spectral
# bound; exponent 1/2 per dimension for rbf, nu = 5/2 for matern52).


def _overlap_gram(xa: np.ndarray, xb: np.ndarray, cfg0: KernelConfig, cfg1: KernelConfig) -> np.ndarray:
    if cfg0.family != cfg1.family:
        raise InputError("both arm kernels must share the same family")
    l0, l1 = cfg0.lengthscales, cfg1.lengthscales
    if l0.size != l1.size:
        raise InputError("arm kernels must share the input dimension")
    amp = np.sqrt(cfg0.signal_variance * cfg1.signal_variance)
    ratio = 2.0 * l0 * l1 / (l0**2 + l1**2)
    if cfg0.family == "rbf":
        mix = np.sqrt(0.5 * (l0**2 + l1**2))
        r2 = _sq_dist(xa, xb, mix)
        return float(amp * np.prod(np.sqrt(ratio))) * _rbf_from_r2(r2, 1.0)
    mix = np.sqrt(2.0 * l0**2 * l1**2 / (l0**2 + l1**2))
    r2 = _sq_dist(xa, xb, mix)
    return float(amp * np.prod(ratio**2.5)) * _matern52_from_r2(r2, 1.0)


def nsgp_gram(
    xa: np.ndarray,
    ta: np.ndarray,
    xb: np.ndarray,
    tb: np.ndarray,
    kcfg0: KernelConfig,
    kcfg1: KernelConfig,
    rho: float = 0.5,
) -> np.ndarray:
    """Gram of the per-arm kernel: k0 within control, k1 within treated,
    rho-scaled overlap kernel across arms."""
    if not -1.0 <= rho <= 1.0:
        raise InputError(f"cross-arm coupling must lie in [-1, 1], got {rho}")
    ta = np.asarray(ta, dtype=int)
    tb = np.asarray(tb, dtype=int)
    if np.any((ta != 0) & (ta != 1)) or np.any((tb != 0) & (tb != 1)):
        raise InputError("treatments must be 0 or 1")
    k0 = kernel_gram(xa, xb, kcfg0)
    k1 = kernel_gram(xa, xb, kcfg1)
    cross = rho * _overlap_gram(xa, xb, kcfg0, kcfg1)
    m0a = (ta == 0)[:, None]
    m0b = (tb == 0)[None, :]
    out = np.where(
        m0a & m0b, k0, np.where(~m0a & ~m0b, k1, cross)
    )
    return out


def nsgp_joint_kernel(p1, p2, kcfg0: KernelConfig, kcfg1: KernelConfig, rho: float = 0.5) -> float:
    """Scalar per-arm kernel between two (covariate, treatment) pairs."""
    x1, t1 = p1
    x2, t2 = p2
    t1 = _check_treatment(t1)
    t2 = _check_treatment(t2)
    x1 = _check_dim(x1, kcfg0)
    x2 = _check_dim(x2, kcfg0)
    return float(nsgp_gram(x1[None, :], [t1], x2[None, :], [t2], kcfg0, kcfg1, rho)[0, 0])
