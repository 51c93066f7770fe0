"""
Tendance de la variance a priori en fonction d'une covariable

Lissage lowess (régression linéaire locale, poids tricubes) de
statsmodels, avec itérations de robustesse optionnelles.
"""

import logging
from typing import Optional

import numpy as np
from statsmodels.nonparametric.smoothers_lowess import lowess

from ..exceptions import DataError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_SPAN = 0.4
DEFAULT_ROBUST_ITERATIONS = 3
MIN_GENES_FOR_TREND = 50


def fit_trend(z, covariate, robust: bool = True, span: float = DEFAULT_SPAN,
              iterations: Optional[int] = None) -> np.ndarray:
    """
    Ajuste une tendance lisse de z en fonction de la covariable

    En dessous de MIN_GENES_FOR_TREND gènes, ou pour une covariable
    constante, la tendance est la moyenne de z.

    Args:
        z: Valeurs à lisser (typiquement log s²)
        covariate: Covariable (typiquement l'expression moyenne A_g)
        robust: Itérations de robustesse (défaut: 3)
        span: Fraction des points utilisée par chaque régression locale
        iterations: Nombre d'itérations de robustesse (remplace le défaut)

    Returns:
        Valeurs ajustées, une par gène
    """
    z = np.asarray(z, dtype=float)
    covariate = np.asarray(covariate, dtype=float)
    if z.ndim != 1 or z.shape != covariate.shape:
        raise DataError(f"fit_trend: dimensions incompatibles {z.shape} / {covariate.shape}")
    if z.size == 0:
        raise DataError("fit_trend: aucune valeur")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(covariate))):
        raise DataError("fit_trend: valeurs non finies")
    if not 0.0 < span <= 1.0:
        raise DomainError(f"fit_trend: span={span} doit être dans ]0, 1]")

    if iterations is None:
        iterations = DEFAULT_ROBUST_ITERATIONS if robust else 0
    elif not robust:
        iterations = 0

    if z.size < MIN_GENES_FOR_TREND:
        logger.warning(f"Tendance: {z.size} gènes (< {MIN_GENES_FOR_TREND}), ajustement constant")
        return np.full(z.shape, z.mean())
    spread = np.ptp(covariate)
    if spread == 0.0:
        logger.warning("Tendance: covariable constante, ajustement constant")
        return np.full(z.shape, z.mean())
    if np.ptp(z) == 0.0:
        return z.copy()

    fitted = lowess(z, covariate, frac=span, it=int(iterations), delta=0.01 * spread,
                    is_sorted=False, return_sorted=False)
    fitted = np.asarray(fitted, dtype=float)
    if not np.all(np.isfinite(fitted)):
        # lowess rend NaN lorsque tous les poids d'un voisinage s'annulent
        bad = ~np.isfinite(fitted)
        if bad.all():
            logger.warning("Tendance: lissage non défini, ajustement constant")
            return np.full(z.shape, z.mean())
        order = np.argsort(covariate[~bad], kind='stable')
        fitted[bad] = np.interp(covariate[bad], covariate[~bad][order], fitted[~bad][order])
    logger.debug(f"Tendance lowess: span={span}, itérations={iterations}")
    return fitted
