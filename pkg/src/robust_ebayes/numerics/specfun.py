"""
Fonctions spéciales et lois de probabilité

digamma/trigamma, inverse de la trigamma, lois F et t de Student.
Les degrés de liberté du dénominateur peuvent être infinis: la loi F
dégénère alors vers la loi chi-deux/d1, et la loi t vers la loi normale.

Toutes les fonctions acceptent des scalaires ou des tableaux numpy et
rendent un float pour des arguments scalaires.
"""

import logging
from typing import Tuple

import numpy as np
from scipy import special, stats

from ..exceptions import DomainError

logger = logging.getLogger(__name__)

# En dessous de ce seuil, trigamma_inverse rend +inf
TRIGAMMA_INVERSE_FLOOR = 1e-10

_TRIGAMMA_INVERSE_TOL = 1e-12
_TRIGAMMA_INVERSE_MAXITER = 100


def _prepare(*args) -> Tuple[bool, list]:
    """Convertit les arguments en tableaux float diffusés"""
    scalar = all(np.ndim(a) == 0 for a in args)
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
    return scalar, [np.array(a, dtype=float) for a in arrays]


def _result(value: np.ndarray, scalar: bool):
    return float(value) if scalar else value


def _require(condition: np.ndarray, message: str):
    if not np.all(condition):
        raise DomainError(message)


def _check_df(d1: np.ndarray, d2: np.ndarray):
    _require(np.isfinite(d1) & (d1 > 0), "degrés de liberté d1 doivent être finis et > 0")
    _require(~np.isnan(d2) & (d2 > 0), "degrés de liberté d2 doivent être > 0")


def digamma(x):
    """
    Fonction digamma ψ(x)

    Args:
        x: Argument(s) strictement positif(s) et fini(s)

    Returns:
        ψ(x)
    """
    scalar, (x,) = _prepare(x)
    _require(np.isfinite(x) & (x > 0), "digamma: x doit être fini et > 0")
    return _result(special.digamma(x), scalar)


def trigamma(x):
    """
    Fonction trigamma ψ'(x)

    Args:
        x: Argument(s) strictement positif(s) et fini(s)

    Returns:
        ψ'(x)
    """
    scalar, (x,) = _prepare(x)
    _require(np.isfinite(x) & (x > 0), "trigamma: x doit être fini et > 0")
    return _result(special.polygamma(1, x), scalar)


def trigamma_inverse(y):
    """
    Inverse de la fonction trigamma

    Itération de Newton sur 1/ψ'(x), initialisée à 0.5 + 1/y (ou 1/√y
    pour y > 1e7), qui converge de façon monotone.

    Args:
        y: Valeur(s) strictement positive(s)

    Returns:
        x tel que ψ'(x) = y; +inf lorsque y < TRIGAMMA_INVERSE_FLOOR
    """
    scalar, (y,) = _prepare(y)
    _require(np.isfinite(y) & (y > 0), "trigamma_inverse: y doit être fini et > 0")

    x = np.full(y.shape, np.inf)
    active = y >= TRIGAMMA_INVERSE_FLOOR
    if np.any(active):
        ya = y[active]
        xa = np.where(ya > 1e7, 1.0 / np.sqrt(ya), 0.5 + 1.0 / ya)
        for _ in range(_TRIGAMMA_INVERSE_MAXITER):
            tri = special.polygamma(1, xa)
            dif = tri * (1.0 - tri / ya) / special.polygamma(2, xa)
            xa = xa + dif
            if np.max(np.abs(dif) / xa) < _TRIGAMMA_INVERSE_TOL:
                break
        else:
            logger.warning("trigamma_inverse: nombre maximal d'itérations atteint")
        x[active] = xa
    return _result(x, scalar)


def f_cdf(x, d1, d2):
    """
    Fonction de répartition de la loi F(d1, d2)

    Args:
        x: Quantile(s) >= 0
        d1: Degrés de liberté du numérateur (> 0)
        d2: Degrés de liberté du dénominateur (> 0, +inf autorisé)

    Returns:
        P(F <= x)
    """
    scalar, (x, d1, d2) = _prepare(x, d1, d2)
    _require(~np.isnan(x) & (x >= 0), "f_cdf: x doit être >= 0")
    _check_df(d1, d2)
    out = np.empty(x.shape)
    inf2 = np.isinf(d2)
    fin = ~inf2
    out[fin] = special.fdtr(d1[fin], d2[fin], x[fin])
    out[inf2] = special.chdtr(d1[inf2], d1[inf2] * x[inf2])
    return _result(out, scalar)


def f_sf(x, d1, d2):
    """
    Fonction de survie de la loi F(d1, d2), calculée dans la queue droite

    Args:
        x: Quantile(s) >= 0
        d1: Degrés de liberté du numérateur
        d2: Degrés de liberté du dénominateur (+inf autorisé)

    Returns:
        P(F > x)
    """
    scalar, (x, d1, d2) = _prepare(x, d1, d2)
    _require(~np.isnan(x) & (x >= 0), "f_sf: x doit être >= 0")
    _check_df(d1, d2)
    out = np.empty(x.shape)
    inf2 = np.isinf(d2)
    fin = ~inf2
    out[fin] = special.fdtrc(d1[fin], d2[fin], x[fin])
    out[inf2] = special.chdtrc(d1[inf2], d1[inf2] * x[inf2])
    return _result(out, scalar)


def f_quantile(p, d1, d2):
    """
    Quantile de la loi F(d1, d2)

    Args:
        p: Probabilité(s) dans ]0, 1[
        d1: Degrés de liberté du numérateur
        d2: Degrés de liberté du dénominateur (+inf autorisé)

    Returns:
        x tel que P(F <= x) = p
    """
    scalar, (p, d1, d2) = _prepare(p, d1, d2)
    _require(~np.isnan(p) & (p > 0) & (p < 1), "f_quantile: p doit être dans ]0, 1[")
    _check_df(d1, d2)
    out = np.empty(p.shape)
    inf2 = np.isinf(d2)
    fin = ~inf2
    out[fin] = special.fdtri(d1[fin], d2[fin], p[fin])
    out[inf2] = 2.0 * special.gammaincinv(d1[inf2] / 2.0, p[inf2]) / d1[inf2]
    return _result(out, scalar)


def f_isf(q, d1, d2):
    """
    Quantile de queue droite de la loi F(d1, d2)

    Précis lorsque q est petit (là où f_quantile(1 - q) perd des chiffres).

    Args:
        q: Probabilité(s) de survie dans ]0, 1[
        d1: Degrés de liberté du numérateur
        d2: Degrés de liberté du dénominateur (+inf autorisé)

    Returns:
        x tel que P(F > x) = q
    """
    scalar, (q, d1, d2) = _prepare(q, d1, d2)
    _require(~np.isnan(q) & (q > 0) & (q < 1), "f_isf: q doit être dans ]0, 1[")
    _check_df(d1, d2)
    out = np.empty(q.shape)
    inf2 = np.isinf(d2)
    fin = ~inf2
    out[fin] = stats.f.isf(q[fin], d1[fin], d2[fin])
    out[inf2] = 2.0 * special.gammainccinv(d1[inf2] / 2.0, q[inf2]) / d1[inf2]
    return _result(out, scalar)


def f_pdf(x, d1, d2):
    """
    Densité de la loi F(d1, d2)

    Args:
        x: Point(s) >= 0
        d1: Degrés de liberté du numérateur
        d2: Degrés de liberté du dénominateur (+inf autorisé)

    Returns:
        Valeur de la densité
    """
    return np.exp(f_logpdf(x, d1, d2))


def f_logpdf(x, d1, d2):
    """Logarithme de la densité de la loi F(d1, d2) (-inf hors du support)"""
    scalar, (x, d1, d2) = _prepare(x, d1, d2)
    _require(~np.isnan(x) & (x >= 0), "f_pdf: x doit être >= 0")
    _check_df(d1, d2)
    out = np.empty(x.shape)
    inf2 = np.isinf(d2)
    fin = ~inf2
    out[fin] = stats.f.logpdf(x[fin], d1[fin], d2[fin])
    # chi-deux/d1: densité d1 * pdf_chi2(d1 x)
    out[inf2] = np.log(d1[inf2]) + stats.chi2.logpdf(d1[inf2] * x[inf2], d1[inf2])
    return _result(out, scalar)


def t_tail2(x, df):
    """
    Probabilité bilatérale P(|T| >= |x|) de la loi t de Student

    Args:
        x: Statistique(s) t (NaN propagé)
        df: Degrés de liberté (> 0, +inf pour la loi normale)

    Returns:
        p-valeur bilatérale
    """
    scalar, (x, df) = _prepare(x, df)
    _require(~np.isnan(df) & (df > 0), "t_tail2: df doit être > 0")
    out = np.empty(x.shape)
    infdf = np.isinf(df)
    fin = ~infdf
    out[fin] = 2.0 * special.stdtr(df[fin], -np.abs(x[fin]))
    out[infdf] = 2.0 * special.ndtr(-np.abs(x[infdf]))
    return _result(np.minimum(out, 1.0), scalar)
