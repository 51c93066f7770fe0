"""
robust-ebayes: Bayes empirique robuste pour l'expression différentielle

Ce package modère les variances résiduelles de milliers de modèles
linéaires génomiques en les rapprochant d'une loi a priori estimée sur
l'ensemble des gènes. L'estimation robuste protège la loi a priori des
gènes hypervariables, qui reçoivent individuellement moins de degrés de
liberté a priori.

Fonctionnalités principales:
- Modèles linéaires par gène (poids, valeurs manquantes)
- Hyperparamètres standard ou robustes, avec ou sans tendance
- Statistiques t et F modérées, FDR de Benjamini-Hochberg
- Banc de simulation (erreur de type I, puissance/FDR, estimation)
- Interface CLI et API Python

Exemple d'usage rapide:
    >>> from robust_ebayes import fit_expression_files
    >>> result = fit_expression_files('expr.tsv', 'design.tsv', robust=True)
    >>> print(f"d0 estimé: {result['summary']['d0']:.2f}")
"""

__version__ = "1.0.0"
__author__ = "Équipe robust-ebayes"
__email__ = "contact@robust-ebayes.org"
__license__ = "MIT"

# Import des modules principaux
from .core import RobustEBSystem, RunConfig
from .ebayes import Hyperprior, TopTableRow, estimate_hyperprior, squeeze_var, top_table
from .exceptions import ConfigError, DataError, DomainError, NumericalError, RobustEBError
from .linmod import DesignMatrix, ExpressionSet, GenewiseFit, fit_all
from .numerics import WinsorSpec
from .simulation import SimConfig, simulate_dataset


# Fonctions utilitaires pour usage rapide
def fit_expression_files(expression_path, design_path, weights_path=None, **config):
    """
    Analyse complète à partir de fichiers TSV

    Args:
        expression_path (str): Fichier d'expression
        design_path (str): Fichier du plan d'expérience
        weights_path (str, optional): Fichier de poids
        **config: Configuration du système (robust, trend, coefficient, ...)

    Returns:
        dict: fit, hyperprior, top_table, z_variance, summary
    """
    system = RobustEBSystem(config)
    return system.run(expression_path, design_path, weights_path)


def squeeze_variances(s2, df, robust=False, covariate=None):
    """
    Variances a posteriori en une ligne

    Args:
        s2: Variances résiduelles
        df: Degrés de liberté résiduels
        robust (bool): Estimation robuste des hyperparamètres
        covariate: Covariable de tendance (optionnelle)

    Returns:
        tuple: (variances a posteriori, Hyperprior)
    """
    hp = estimate_hyperprior(s2, df, covariate=covariate, robust=robust)
    return squeeze_var(s2, df, hp), hp


# Exports publics
__all__ = [
    # Classes principales
    'RobustEBSystem',
    'RunConfig',
    'DesignMatrix',
    'ExpressionSet',
    'GenewiseFit',
    'Hyperprior',
    'TopTableRow',
    'WinsorSpec',
    'SimConfig',

    # Fonctions
    'fit_all',
    'estimate_hyperprior',
    'squeeze_var',
    'top_table',
    'simulate_dataset',
    'fit_expression_files',
    'squeeze_variances',

    # Exceptions
    'RobustEBError',
    'ConfigError',
    'DataError',
    'DomainError',
    'NumericalError',

    # Métadonnées
    '__version__',
    '__author__',
    '__email__',
    '__license__',
]


# Validation de l'environnement au chargement
def _validate_environment():
    """Validation de l'environnement d'exécution"""
    import sys

    if sys.version_info < (3, 8):
        raise RuntimeError("robust-ebayes nécessite Python 3.8 ou supérieur")


_validate_environment()
