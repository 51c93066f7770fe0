"""
Module ebayes - hyperparamètres, tendance et statistiques modérées
"""

from .hyperprior import (
    Hyperprior,
    assign_d0g,
    equalize_df,
    estimate_hyperprior,
    fit_fdist,
    fit_fdist_robustly,
    outlier_posterior,
    solve_d_outlier,
    variance_normal_deviates,
    winsorize,
)
from .trend import fit_trend
from .modstats import (
    TopTableRow,
    bh_adjust,
    moderated_F,
    moderated_t,
    squeeze_var,
    top_table,
)

__all__ = [
    'Hyperprior',
    'assign_d0g',
    'equalize_df',
    'estimate_hyperprior',
    'fit_fdist',
    'fit_fdist_robustly',
    'outlier_posterior',
    'solve_d_outlier',
    'variance_normal_deviates',
    'winsorize',
    'fit_trend',
    'TopTableRow',
    'bh_adjust',
    'moderated_F',
    'moderated_t',
    'squeeze_var',
    'top_table',
]
