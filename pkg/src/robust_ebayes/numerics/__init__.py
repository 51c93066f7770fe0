"""
Module numérique - fonctions spéciales, lois F/t et quadrature
"""

from .specfun import (
    digamma, trigamma, trigamma_inverse,
    f_cdf, f_sf, f_quantile, f_isf, f_pdf, f_logpdf, t_tail2,
)
from .quadrature import (
    QuadratureRule, WinsorSpec, gauss_legendre,
    winsorized_logF_moments, winsorized_quantiles,
)

__all__ = [
    'digamma', 'trigamma', 'trigamma_inverse',
    'f_cdf', 'f_sf', 'f_quantile', 'f_isf', 'f_pdf', 'f_logpdf', 't_tail2',
    'QuadratureRule', 'WinsorSpec', 'gauss_legendre',
    'winsorized_logF_moments', 'winsorized_quantiles',
]
