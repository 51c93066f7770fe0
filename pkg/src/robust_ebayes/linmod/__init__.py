"""
Module linmod - modèles linéaires génomiques
"""

from .genewise import (
    DesignMatrix, ExpressionSet, GeneFit, GenewiseFit,
    coefficient_index, fit_gene, fit_all,
)

__all__ = [
    'DesignMatrix',
    'ExpressionSet',
    'GeneFit',
    'GenewiseFit',
    'coefficient_index',
    'fit_gene',
    'fit_all',
]
