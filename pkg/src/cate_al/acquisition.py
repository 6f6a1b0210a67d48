"""Utility functions scoring pool candidates for outcome acquisition.

Every method maps a fitted :class:`~cate_al.beliefs.CateModel` and a pool of
(covariate, treatment) candidates to one utility score per candidate. The
information-theoretic methods reduce to closed-form Gaussian mutual
information between the candidate's noisy outcome and predictive quantities
at a target set: the per-target contrast, the per-target potential-outcome
pair, their global joint vectors, factual outcomes, or latent-function
variances for the parameter-style baselines.

Scoring is pure given an immutable model; the loop writes scores by pool
index so parallel evaluation order never changes results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.stats import norm

from .beliefs import CateModel, JointGaussianBelief, VARIANCE_FLOOR
from .errors import InputError, NumericalError

DET_FLOOR = 1e-300

METHOD_NAMES = (
    "random",
    "causal_epig_tau",
    "causal_epig_mu",
    "causal_epig_mu_additive",
    "causal_epig_tau_global",
    "causal_epig_mu_global",
    "epig_factual",
    "mu_bald",
    "tau_bald",
    "mu_pi_bald",
    "mu_rho_bald",
    "sundin",
    "coreset_qhte",
    "causal_eig",
)

_PROPENSITY_METHODS = ("mu_pi_bald",)


@dataclass(frozen=True)
class AcquisitionMethod:
    """Named acquisition method with its method-specific parameters."""

    name: str
    target_cap: int | None = None   # optional cap on |X_tar| used in scoring
    sundin_samples: int = 100       # posterior draws per candidate
    eig_grid_size: int = 100        # reference-grid size for causal_eig
    epig_sample_size: int = 100     # sampled (x*, t*) pairs for factual EPIG

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise InputError(f"unknown acquisition method {self.name!r}; expected one of {METHOD_NAMES}")
        if self.target_cap is not None and self.target_cap < 1:
            raise InputError("target_cap must be >= 1 when set")
        if self.sundin_samples < 2:
            raise InputError("sundin_samples must be >= 2")
        if self.eig_grid_size < 1:
            raise InputError("eig_grid_size must be >= 1")
        if self.epig_sample_size < 1:
            raise InputError("epig_sample_size must be >= 1")

    @property
    def needs_propensity(self) -> bool:
        return self.name in _PROPENSITY_METHODS


# -- Gaussian mutual information ---------------------------------------------


def gaussian_mi_scalar(var_a: float, var_b: float, cov_ab: float) -> float:
    """MI of two jointly Gaussian scalars: 1/2 log(va vb / (va vb - cov^2)).

    Returns 0 when either variance sits at the certainty floor or the
    covariance is 0; raises :class:`NumericalError` when |cov| exceeds the
    Cauchy-Schwarz bound beyond rounding slack.
    """
    va, vb, c = float(var_a), float(var_b), float(cov_ab)
    if va < 0 or vb < 0:
        raise InputError("variances must be nonnegative")
    if abs(c) > np.sqrt(max(va * vb, 0.0)) * (1.0 + 1e-6):
        raise NumericalError(f"covariance {c} exceeds the variance bound sqrt({va} * {vb})")
    if va <= VARIANCE_FLOOR or vb <= VARIANCE_FLOOR or c == 0.0:
        return 0.0
    prod = max(va * vb, DET_FLOOR)
    det = max(prod - c * c, DET_FLOOR)
    return max(0.5 * float(np.log(prod / det)), 0.0)


def _mi_scalar_vec(var_a: np.ndarray, var_b: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Broadcast variant of :func:`gaussian_mi_scalar` used by the scorers."""
    va, vb, c = np.broadcast_arrays(var_a, var_b, cov)
    bound = np.sqrt(np.maximum(va * vb, 0.0)) * (1.0 + 1e-6)
    if np.any(np.abs(c) > bound):
        worst = float(np.max(np.abs(c) - bound))
        raise NumericalError(f"covariance exceeds the variance bound by up to {worst}")
    prod = np.maximum(va * vb, DET_FLOOR)
    det = np.maximum(prod - c * c, DET_FLOOR)
    out = 0.5 * np.log(prod / det)
    out = np.where((va <= VARIANCE_FLOOR) | (vb <= VARIANCE_FLOOR) | (c == 0.0), 0.0, out)
    return np.maximum(out, 0.0)


def gaussian_mi_block(belief: JointGaussianBelief, block_a, block_b) -> float:
    """MI between two disjoint label blocks: 1/2 log(|Saa| |Sbb| / |S|).

    All three determinants come from one jitter-shifted copy of the joint
    block, so rank deficiencies (for example duplicated quantities) perturb
    the joint and its marginals identically and cancel in the ratio. Blocks
    whose variances all sit at the certainty floor carry no information and
    score 0.
    """
    block_a = list(block_a)
    block_b = list(block_b)
    if not block_a or not block_b:
        raise InputError("both blocks must be non-empty")
    if set(block_a) & set(block_b):
        raise InputError(f"blocks overlap: {sorted(set(block_a) & set(block_b))}")
    ia = belief.indices(block_a)
    ib = belief.indices(block_b)
    diag = np.diag(belief.cov)
    if np.all(diag[ia] <= VARIANCE_FLOOR) or np.all(diag[ib] <= VARIANCE_FLOOR):
        return 0.0
    # canonical (belief-order) union keeps MI(a;b) == MI(b;a) bitwise
    union = np.array(sorted(set(ia) | set(ib)), dtype=int)
    joint = belief.cov[np.ix_(union, union)]
    pos = {g: i for i, g in enumerate(union)}
    pa = np.array([pos[i] for i in ia])
    pb = np.array([pos[i] for i in ib])

    # exact factorization when clearly positive definite; otherwise a firm
    # relative jitter large enough that the spurious determinant
    # contributions of degenerate directions cancel above rounding noise
    scale = max(float(np.mean(np.diag(joint))), VARIANCE_FLOOR)
    for jitter in (0.0, 1e-8, 1e-6):
        shifted = joint if jitter == 0.0 else joint + jitter * scale * np.eye(joint.shape[0])
        try:
            lj = cholesky(shifted, lower=True)
            la = cholesky(shifted[np.ix_(pa, pa)], lower=True)
            lb = cholesky(shifted[np.ix_(pb, pb)], lower=True)
        except np.linalg.LinAlgError:
            continue
        if jitter == 0.0 and np.diag(lj).min() ** 2 < 1e-10 * scale:
            continue  # near-singular; redo with explicit regularization
        ld = lambda f: 2.0 * float(np.sum(np.log(np.diag(f))))
        return max(0.5 * (ld(la) + ld(lb) - ld(lj)), 0.0)
    raise NumericalError(f"belief block of size {joint.shape[0]} is not factorizable even with jitter")


def mc_mi_oracle(belief: JointGaussianBelief, block_a, block_b, n_samples: int, rng) -> float:
    """Monte-Carlo MI estimate H(a) + H(b) - H(a, b) from sampled covariances.

    Test oracle: draws from the belief, accumulates second moments in chunks,
    and evaluates the Gaussian entropies with sample log-determinants.
    """
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    block_a = list(block_a)
    block_b = list(block_b)
    if set(block_a) & set(block_b):
        raise InputError("blocks overlap")
    ia = belief.indices(block_a)
    ib = belief.indices(block_b)
    union = np.array(sorted(set(ia) | set(ib)), dtype=int)
    pos = {g: i for i, g in enumerate(union)}
    pa = np.array([pos[i] for i in ia])
    pb = np.array([pos[i] for i in ib])

    cov = belief.cov[np.ix_(union, union)]
    k = cov.shape[0]
    scale = max(float(np.mean(np.diag(cov))), VARIANCE_FLOOR)
    L = cholesky(cov + 1e-12 * scale * np.eye(k), lower=True)

    n = int(n_samples)
    total = np.zeros(k)
    outer = np.zeros((k, k))
    chunk = 1_000_000
    done = 0
    while done < n:
        take = min(chunk, n - done)
        z = rng.standard_normal((take, k)) @ L.T
        total += z.sum(axis=0)
        outer += z.T @ z
        done += take
    mean = total / n
    sample_cov = (outer - n * np.outer(mean, mean)) / (n - 1)

    def ld(idx):
        sign, val = np.linalg.slogdet(sample_cov[np.ix_(idx, idx)])
        if sign <= 0:
            raise NumericalError("sample covariance is not positive definite")
        return val

    return 0.5 * (ld(pa) + ld(pb) - ld(np.arange(k)))


# -- individual utility functions --------------------------------------------


def _as_candidate(candidate):
    cx, ct = candidate
    cx = np.atleast_1d(np.asarray(cx, dtype=float))[None, :]
    ct = np.array([int(ct)])
    if ct[0] not in (0, 1):
        raise InputError("candidate treatment must be 0 or 1")
    return cx, ct


def _as_targets(targets) -> np.ndarray:
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[0] == 0:
        raise InputError("target set must be non-empty")
    return targets


def causal_epig_tau(model: CateModel, candidate, targets) -> float:
    """Mean over targets of MI between the candidate's outcome and the contrast."""
    cx, ct = _as_candidate(candidate)
    targets = _as_targets(targets)
    b = model.moment_bundle(cx, ct, targets)
    return float(np.mean(_mi_scalar_vec(b.y_var[:, None], b.tau_var[None, :], b.cy_tau)))


def _mu_joint_mi(bundle) -> np.ndarray:
    """(n_c, m) MI between y and the per-target (f0, f1) pair, closed form."""
    vy = bundle.y_var[:, None]
    eps = 1e-12 * np.maximum(np.maximum(bundle.f0_var, bundle.f1_var), 1.0)
    v0 = bundle.f0_var + eps
    v1 = bundle.f1_var + eps
    c01 = bundle.f01_cov
    det2 = np.maximum(v0 * v1 - c01**2, DET_FLOOR)[None, :]
    q = bundle.cy0**2 * v1[None, :] - 2.0 * bundle.cy0 * bundle.cy1 * c01[None, :] + bundle.cy1**2 * v0[None, :]
    ratio = np.clip(q / np.maximum(det2 * vy, DET_FLOOR), 0.0, 1.0 - 1e-15)
    out = -0.5 * np.log1p(-ratio)
    degenerate = ((bundle.f0_var <= VARIANCE_FLOOR) & (bundle.f1_var <= VARIANCE_FLOOR))[None, :]
    out = np.where(degenerate | (vy <= VARIANCE_FLOOR), 0.0, out)
    return np.maximum(out, 0.0)


def causal_epig_mu(model: CateModel, candidate, targets) -> float:
    """Mean over targets of MI between the candidate's outcome and both
    potential-outcome surfaces jointly."""
    cx, ct = _as_candidate(candidate)
    targets = _as_targets(targets)
    b = model.moment_bundle(cx, ct, targets)
    return float(np.mean(_mu_joint_mi(b)))


def causal_epig_mu_additive(model: CateModel, candidate, targets) -> float:
    """Additive variant: per-target MI with f0 plus MI with f1, averaged."""
    cx, ct = _as_candidate(candidate)
    targets = _as_targets(targets)
    b = model.moment_bundle(cx, ct, targets)
    mi0 = _mi_scalar_vec(b.y_var[:, None], b.f0_var[None, :], b.cy0)
    mi1 = _mi_scalar_vec(b.y_var[:, None], b.f1_var[None, :], b.cy1)
    return float(np.mean(mi0 + mi1))


def _global_quad_mi(y_var: np.ndarray, q: np.ndarray, joint_cov: np.ndarray) -> np.ndarray:
    """MI(y; full target vector) per candidate from one factorization of the
    target-target covariance: -1/2 log(1 - q^T S^-1 q / Var[y])."""
    scale = max(float(np.mean(np.diag(joint_cov))), VARIANCE_FLOOR)
    if scale <= VARIANCE_FLOOR:
        return np.zeros(y_var.shape[0])
    L = None
    for jitter in (1e-12, 1e-10, 1e-8, 1e-6):
        try:
            L = cholesky(joint_cov + jitter * scale * np.eye(joint_cov.shape[0]), lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if L is None:
        raise NumericalError("target-target covariance failed to factorize at maximum jitter")
    w = solve_triangular(L, q.T, lower=True)
    quad = np.sum(w * w, axis=0)
    ratio = np.clip(quad / np.maximum(y_var, VARIANCE_FLOOR), 0.0, 1.0 - 1e-15)
    out = -0.5 * np.log1p(-ratio)
    return np.where(y_var <= VARIANCE_FLOOR, 0.0, np.maximum(out, 0.0))


def causal_epig_global(model: CateModel, candidate, targets, estimand: str = "tau") -> float:
    """MI between the candidate's outcome and the whole target vector jointly."""
    if estimand not in ("tau", "po"):
        raise InputError(f"estimand must be 'tau' or 'po', got {estimand!r}")
    cx, ct = _as_candidate(candidate)
    targets = _as_targets(targets)
    b = model.moment_bundle(cx, ct, targets)
    if estimand == "tau":
        q = b.cy_tau
        joint = model.tau_joint_cov(targets)
    else:
        m = targets.shape[0]
        q = np.empty((1, 2 * m))
        q[:, 0::2] = b.cy0
        q[:, 1::2] = b.cy1
        joint = model.po_joint_cov(targets)
    return float(_global_quad_mi(b.y_var, q, joint)[0])


def epig_factual(model: CateModel, candidate, pool_distribution_sample) -> float:
    """Mean MI between the candidate's outcome and sampled factual outcomes."""
    xs, ts = pool_distribution_sample
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ts = np.asarray(ts, dtype=int).reshape(-1)
    if xs.shape[0] == 0:
        raise InputError("factual EPIG needs a non-empty sample of (x*, t*) pairs")
    cx, ct = _as_candidate(candidate)
    cross = model.latent_cov(cx, ct, xs, ts)
    y_var = model.latent_var(cx, ct) + model.noise_variance
    star_var = model.latent_var(xs, ts) + model.noise_variance
    return float(np.mean(_mi_scalar_vec(y_var[:, None], star_var[None, :], cross)))


def mu_bald(model: CateModel, candidate) -> float:
    """Latent-function information of the candidate's own arm:
    1/2 log(1 + Var[f_t(x)] / noise)."""
    cx, ct = _as_candidate(candidate)
    vf = model.latent_var(cx, ct)[0]
    return 0.5 * float(np.log1p(vf / model.noise_variance))


def tau_bald(model: CateModel, candidate) -> float:
    """Contrast-information analogue; the contrast of two noisy observations
    carries twice the noise variance."""
    cx, _ = _as_candidate(candidate)
    v_tau = float(model.tau_sd(cx)[0]) ** 2
    return 0.5 * float(np.log1p(v_tau / (2.0 * model.noise_variance)))


def combined_bald(model: CateModel, candidate, variant: str, propensity_model=None, pool_tau_sd_max: float | None = None) -> float:
    """Weighted mu-BALD: counterfactual-scarcity weight (mu_pi) or normalized
    contrast-spread weight (mu_rho)."""
    if variant not in ("mu_pi", "mu_rho"):
        raise InputError(f"variant must be 'mu_pi' or 'mu_rho', got {variant!r}")
    base = mu_bald(model, candidate)
    cx, ct = _as_candidate(candidate)
    if variant == "mu_pi":
        if propensity_model is None:
            raise InputError("mu_pi weighting needs a fitted propensity model")
        pi = predict_pi(propensity_model, cx)[0]
        w = 1.0 - pi if ct[0] == 1 else pi
    else:
        if pool_tau_sd_max is None or pool_tau_sd_max <= 0:
            raise InputError("mu_rho weighting needs the pool's maximum contrast sd")
        w = float(model.tau_sd(cx)[0]) / float(pool_tau_sd_max)
    return base * float(w)


def bernoulli_entropy(p) -> np.ndarray:
    """Entropy of Bernoulli(p) in nats with the 0 log 0 := 0 convention."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log(p), 0.0) - np.where(q > 0, q * np.log(q), 0.0)
    return h


def sign_ambiguity_score(tau_draws: np.ndarray) -> float:
    """Sign-ambiguity information from contrast draws at one covariate.

    gamma_k = Phi(-|tau_k| / sd(tau)); score is the Jensen gap
    H(Bern(mean gamma)) - mean H(Bern(gamma_k)), zero when the draws agree.
    """
    draws = np.asarray(tau_draws, dtype=float).reshape(-1)
    if draws.size < 2:
        raise InputError("need at least 2 contrast draws")
    sd = draws.std()
    if sd <= 0.0:
        return 0.0
    gamma = norm.cdf(-np.abs(draws) / sd)
    return float(max(bernoulli_entropy(gamma.mean()) - bernoulli_entropy(gamma).mean(), 0.0))


def sundin_gamma(model: CateModel, candidate, k: int = 100, rng=None) -> float:
    """Sign-ambiguity utility from k draws of the candidate's contrast posterior."""
    if int(k) < 2:
        raise InputError("need at least 2 posterior draws")
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    cx, _ = _as_candidate(candidate)
    draws = model.tau_draws(cx[0], int(k), rng)
    return sign_ambiguity_score(draws)


def coreset_qhte(model: CateModel, pool, labeled) -> np.ndarray:
    """Per-candidate minimum posterior-metric distance to the labeled set of
    the candidate's own arm; candidates in an unlabeled arm get the pool
    maximum plus one.

    The squared distance is Var[f_t(x)] + Var[f_t(x')] - 2 Cov[f_t(x), f_t(x')].
    """
    px, pt = pool
    lx, lt = labeled
    px = np.atleast_2d(np.asarray(px, dtype=float))
    pt = np.asarray(pt, dtype=int).reshape(-1)
    lx = np.atleast_2d(np.asarray(lx, dtype=float)) if np.size(lx) else np.zeros((0, px.shape[1]))
    lt = np.asarray(lt, dtype=int).reshape(-1)

    scores = np.full(pt.size, np.nan)
    for arm in (0, 1):
        cand = np.flatnonzero(pt == arm)
        if cand.size == 0:
            continue
        anchors = np.flatnonzero(lt == arm)
        if anchors.size == 0:
            continue
        arm_t = np.full(cand.size, arm)
        anchor_t = np.full(anchors.size, arm)
        var_c = model.latent_var(px[cand], arm_t)
        var_a = model.latent_var(lx[anchors], anchor_t)
        cross = model.latent_cov(px[cand], arm_t, lx[anchors], anchor_t)
        d2 = var_c[:, None] + var_a[None, :] - 2.0 * cross
        scores[cand] = np.sqrt(np.maximum(d2, 0.0)).min(axis=1)

    known = np.isfinite(scores)
    sentinel = (scores[known].max() if known.any() else 0.0) + 1.0
    return np.where(known, scores, sentinel)


def causal_eig(model: CateModel, candidate, reference_grid) -> float:
    """MI between the candidate's outcome and the contrast evaluated on a
    fixed reference grid (nonparametric stand-in for effect parameters)."""
    return causal_epig_global(model, candidate, reference_grid, estimand="tau")


def random_acq(pool_size: int, rng) -> np.ndarray:
    """I.i.d. Uniform(0, 1) utility scores."""
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    return rng.uniform(size=int(pool_size))


# -- propensity ----------------------------------------------------------------


@dataclass
class PropensityModel:
    """Ridge-regularized logistic regression over [1, x]."""

    weights: np.ndarray
    converged: bool = True


def fit_propensity(x, t, ridge: float = 1e-3, max_iter: int = 100, tol: float = 1e-8) -> PropensityModel:
    """Damped-Newton logistic fit of treatment on covariates."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.asarray(t, dtype=float).reshape(-1)
    if x.shape[0] != t.size:
        raise InputError("covariates and treatments disagree in length")
    if np.any((t != 0.0) & (t != 1.0)):
        raise InputError("treatments must be 0 or 1")
    z = np.hstack([np.ones((x.shape[0], 1)), x])
    w = np.zeros(z.shape[1])

    def nll(wv):
        logits = z @ wv
        return float(np.sum(np.logaddexp(0.0, logits) - t * logits) + 0.5 * ridge * wv @ wv)

    cur = nll(w)
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-(z @ w)))
        grad = z.T @ (p - t) + ridge * w
        if np.linalg.norm(grad) < tol:
            return PropensityModel(weights=w)
        h = z.T @ (z * (p * (1.0 - p))[:, None]) + ridge * np.eye(z.shape[1])
        try:
            step = np.linalg.solve(h, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("propensity Hessian is singular") from exc
        damp = 1.0
        for _ in range(30):
            trial = w - damp * step
            val = nll(trial)
            if val <= cur:
                w, cur = trial, val
                break
            damp *= 0.5
        else:
            break
    p = 1.0 / (1.0 + np.exp(-(z @ w)))
    grad = z.T @ (p - t) + ridge * w
    if np.linalg.norm(grad) >= max(tol, 1e-5 * (1.0 + abs(cur))):
        raise NumericalError(f"propensity fit did not converge: |grad| = {np.linalg.norm(grad):.3g}")
    return PropensityModel(weights=w)


def predict_pi(model: PropensityModel, x) -> np.ndarray:
    """Predicted treatment probability, clamped to [0.01, 0.99]."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.hstack([np.ones((x.shape[0], 1)), x])
    p = 1.0 / (1.0 + np.exp(-(z @ model.weights)))
    return np.clip(p, 0.01, 0.99)


# -- pool scoring ---------------------------------------------------------------


@dataclass
class ScoringContext:
    """Round-level inputs shared by every candidate score."""

    targets: np.ndarray
    labeled_x: np.ndarray
    labeled_t: np.ndarray
    rng: np.random.Generator
    propensity: PropensityModel | None = None

    def capped_targets(self, cap: int | None) -> np.ndarray:
        if cap is None or self.targets.shape[0] <= cap:
            return self.targets
        idx = self.rng.choice(self.targets.shape[0], size=cap, replace=False)
        return self.targets[np.sort(idx)]


def score_pool(method: AcquisitionMethod, model: CateModel, pool_x, pool_t, ctx: ScoringContext) -> np.ndarray:
    """Vectorized utility scores for every pool candidate, by pool index."""
    pool_x = np.atleast_2d(np.asarray(pool_x, dtype=float))
    pool_t = np.asarray(pool_t, dtype=int).reshape(-1)
    n = pool_t.size
    name = method.name

    if name == "random":
        return random_acq(n, ctx.rng)

    if name in ("coreset_qhte",):
        return coreset_qhte(model, (pool_x, pool_t), (ctx.labeled_x, ctx.labeled_t))

    if name in ("mu_bald", "mu_pi_bald", "mu_rho_bald"):
        vf = model.latent_var(pool_x, pool_t)
        base = 0.5 * np.log1p(vf / model.noise_variance)
        if name == "mu_bald":
            return base
        if name == "mu_pi_bald":
            if ctx.propensity is None:
                raise InputError("mu_pi_bald requires a fitted propensity model in the context")
            pi = predict_pi(ctx.propensity, pool_x)
            w = np.where(pool_t == 1, 1.0 - pi, pi)
            return base * w
        sd = model.tau_sd(pool_x)
        top = sd.max()
        return base * (sd / top if top > 0 else np.zeros_like(sd))

    if name == "tau_bald":
        v_tau = model.tau_sd(pool_x) ** 2
        return 0.5 * np.log1p(v_tau / (2.0 * model.noise_variance))

    if name == "sundin":
        scores = np.empty(n)
        for i in range(n):
            draws = model.tau_draws(pool_x[i], method.sundin_samples, ctx.rng)
            scores[i] = sign_ambiguity_score(draws)
        return scores

    if name == "epig_factual":
        take = min(method.epig_sample_size, n)
        pick = ctx.rng.choice(n, size=take, replace=False)
        xs, ts = pool_x[pick], pool_t[pick]
        cross = model.latent_cov(pool_x, pool_t, xs, ts)
        y_var = model.latent_var(pool_x, pool_t) + model.noise_variance
        star_var = model.latent_var(xs, ts) + model.noise_variance
        return np.mean(_mi_scalar_vec(y_var[:, None], star_var[None, :], cross), axis=1)

    if name == "causal_eig":
        grid = pool_x[: min(method.eig_grid_size, n)]
        bundle = model.moment_bundle(pool_x, pool_t, grid)
        return _global_quad_mi(bundle.y_var, bundle.cy_tau, model.tau_joint_cov(grid))

    targets = ctx.capped_targets(method.target_cap)
    if targets.shape[0] == 0:
        raise InputError("target set must be non-empty")
    bundle = model.moment_bundle(pool_x, pool_t, targets)

    if name == "causal_epig_tau":
        return np.mean(_mi_scalar_vec(bundle.y_var[:, None], bundle.tau_var[None, :], bundle.cy_tau), axis=1)
    if name == "causal_epig_mu":
        return np.mean(_mu_joint_mi(bundle), axis=1)
    if name == "causal_epig_mu_additive":
        mi0 = _mi_scalar_vec(bundle.y_var[:, None], bundle.f0_var[None, :], bundle.cy0)
        mi1 = _mi_scalar_vec(bundle.y_var[:, None], bundle.f1_var[None, :], bundle.cy1)
        return np.mean(mi0 + mi1, axis=1)
    if name in ("causal_epig_tau_global", "causal_epig_mu_global"):
        # the global formulation conditions each candidate on the full joint
        # target vector: one factorization of the target-target covariance
        # per candidate, cubic in the target count
        if name == "causal_epig_tau_global":
            q = bundle.cy_tau
            joint = model.tau_joint_cov(targets)
        else:
            m = targets.shape[0]
            q = np.empty((pool_t.size, 2 * m))
            q[:, 0::2] = bundle.cy0
            q[:, 1::2] = bundle.cy1
            joint = model.po_joint_cov(targets)
        return np.array([
            _global_quad_mi(bundle.y_var[i : i + 1], q[i : i + 1], joint)[0] for i in range(pool_t.size)
        ])

    raise InputError(f"no scorer wired for method {name!r}")
