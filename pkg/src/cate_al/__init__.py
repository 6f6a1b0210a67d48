"""Active learning benchmark harness for conditional average treatment effects."""

__version__ = "0.1.0"

from .acquisition import (
    AcquisitionMethod,
    causal_eig,
    causal_epig_global,
    causal_epig_mu,
    causal_epig_mu_additive,
    causal_epig_tau,
    combined_bald,
    coreset_qhte,
    epig_factual,
    fit_propensity,
    gaussian_mi_block,
    gaussian_mi_scalar,
    mc_mi_oracle,
    mu_bald,
    predict_pi,
    random_acq,
    score_pool,
    sundin_gamma,
    tau_bald,
)
from .active_loop import (
    ActiveState,
    LabelOracle,
    LoopConfig,
    run_active_learning,
    select_batch,
    set_acquisition_target,
    warm_start,
)
from .beliefs import (
    CateModel,
    JointGaussianBelief,
    SamplePosterior,
    empirical_gaussian_fit,
)
from .dgp import (
    Dataset,
    SplitSpec,
    gen_actg_outcomes,
    gen_causalbald,
    gen_hahn,
    gen_ihdp_outcomes,
    load_covariates_csv,
    make_benchmark,
    make_splits,
)
from .ensemble import EnsembleLinearModel, fit_ensemble, posterior_draws
from .errors import InputError, NumericalError
from .evaluation import RunRecord, aggregate_runs, relative_improvement, sqrt_pehe
from .gp import (
    CmgpParams,
    NsgpParams,
    SearchConfig,
    fit_gp,
    joint_belief,
    optimize_hyperparams,
)
from .kernels import (
    CoregionalizationConfig,
    KernelConfig,
    cmgp_joint_kernel,
    matern52_kernel,
    nsgp_joint_kernel,
    rbf_kernel,
)
