"""Weighted-data mean-field VB fitters and their exact oracles."""
from .gaussian import GaussianMeanPrior, exact_gaussian_mean_posterior, fit_gaussian_mean_mfvb
from .gmm import GmmPrior, exact_nig_posterior, fit_gmm_cavi
from .posterior import (
    BernoulliBlock,
    DirichletBlock,
    FitConfig,
    GaussianBlock,
    InvGammaBlock,
    MeanFieldPosterior,
    ObservationSet,
)
from .spike_slab import SpikeSlabPrior, coefficient_estimate, fit_spike_slab_vb
from .symmetric_mixture import (
    complete_data_loglik,
    fit_symmetric_mixture_vb,
    symmetric_mixture_asymptotic_var,
    symmetric_mixture_mvle,
    symmetric_mixture_vll,
)

__all__ = [
    "BernoulliBlock",
    "DirichletBlock",
    "FitConfig",
    "GaussianBlock",
    "GaussianMeanPrior",
    "GmmPrior",
    "InvGammaBlock",
    "MeanFieldPosterior",
    "ObservationSet",
    "SpikeSlabPrior",
    "coefficient_estimate",
    "complete_data_loglik",
    "exact_gaussian_mean_posterior",
    "exact_nig_posterior",
    "fit_gaussian_mean_mfvb",
    "fit_gmm_cavi",
    "fit_spike_slab_vb",
    "fit_symmetric_mixture_vb",
    "symmetric_mixture_asymptotic_var",
    "symmetric_mixture_mvle",
    "symmetric_mixture_vll",
]
