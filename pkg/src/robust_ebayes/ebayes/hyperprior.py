"""
Estimation des hyperparamètres de la loi a priori des variances

Loi a priori σ²_g ~ s0² d0 / χ²_{d0}. Deux estimateurs:

- standard: moments de log s²_g (digamma/trigamma);
- robuste: moments winsorisés, puis détection des gènes hypervariables
  et degrés de liberté a priori propres à chaque gène
  d0g = π_g·d0 + (1 − π_g)·d_outlier.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy import optimize, stats
from statsmodels.stats.multitest import multipletests

from ..exceptions import DataError, DomainError, NumericalError
from ..numerics import (
    WinsorSpec, digamma, trigamma, trigamma_inverse,
    f_cdf, f_sf, f_quantile, f_isf, winsorized_logF_moments,
)
from ..numerics.quadrature import DEFAULT_NODES
from ..performance import timed
from .trend import DEFAULT_ROBUST_ITERATIONS, DEFAULT_SPAN, MIN_GENES_FOR_TREND, fit_trend

logger = logging.getLogger(__name__)

# Borne inférieure de recherche de d0 (estimateur robuste)
D0_LOWER = 1e-2

# Variances nulles: plancher relatif à la médiane (estimateur standard)
ZERO_VARIANCE_FLOOR = 1e-5

# Degrés de liberté consommés par la tendance lowess dans la variance de e_g
TREND_EQUIVALENT_DF = 4

# Seuil FDR (Benjamini-Hochberg) des p-valeurs de la queue haute au-delà
# duquel un gène à d0g < d0 n'est pas compté comme hypervariable
OUTLIER_FDR = 1e-3

# Point de départ de la recherche de d_outlier lorsque d0 = +inf
_D_OUTLIER_START_INF = 1e6
_D_OUTLIER_TOL = 1e-9
# Étapes de sécante au-delà desquelles on bascule sur brentq
_D_OUTLIER_MAX_ITER = 3
# Grille d'encadrement en log d: étendue et nombre de points
_D_OUTLIER_LOG_SPAN = 40.0
_D_OUTLIER_GRID = 8192


@dataclass(frozen=True, eq=False)
class Hyperprior:
    """
    Hyperparamètres estimés

    Attributes:
        d0: Degrés de liberté a priori (+inf autorisé)
        s02: Variance a priori s0²_g par gène (constante sans tendance)
        d0g: Degrés de liberté a priori par gène, dans [d_outlier, d0]
        d_outlier: Degrés de liberté des gènes hypervariables (<= d0)
        pi_g: Probabilité a posteriori de ne pas être hypervariable
        trend_enabled: s0²_g dépend d'une covariable
        robust: Estimation robuste
        diagnostics: Quantités intermédiaires (z̄, s²_z, quantiles...)
    """

    d0: float
    s02: np.ndarray
    d0g: np.ndarray
    d_outlier: float
    pi_g: np.ndarray
    trend_enabled: bool = False
    robust: bool = False
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        d0 = float(self.d0)
        d_outlier = float(self.d_outlier)
        s02 = np.atleast_1d(np.asarray(self.s02, dtype=float))
        d0g = np.atleast_1d(np.asarray(self.d0g, dtype=float))
        pi_g = np.atleast_1d(np.asarray(self.pi_g, dtype=float))
        if not (d0 > 0) or not (0 < d_outlier <= d0):
            raise DomainError(f"Hyperprior: d0={d0}, d_outlier={d_outlier} invalides")
        if not (s02.shape == d0g.shape == pi_g.shape) or s02.ndim != 1:
            raise DomainError("Hyperprior: vecteurs par gène de longueurs différentes")
        if np.any(~np.isfinite(s02) | (s02 <= 0)):
            raise DomainError("Hyperprior: s02 doit être fini et > 0")
        if np.any((pi_g < 0) | (pi_g > 1)):
            raise DomainError("Hyperprior: pi_g doit être dans [0, 1]")
        for name, value in (('s02', s02), ('d0g', d0g), ('pi_g', pi_g)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'd0', d0)
        object.__setattr__(self, 'd_outlier', d_outlier)

    @property
    def n_genes(self) -> int:
        return self.s02.size

    @property
    def outlier_mask(self) -> np.ndarray:
        """
        Gènes hypervariables

        d0g < d0 et, lorsque l'estimateur robuste les fournit, p-valeur
        ajustée (BH) de la queue haute <= OUTLIER_FDR. Le rétrécissement de
        π_g par le minimum des moyennes cumulées touche aussi des gènes
        ordinaires; ceux-là gardent un d0g à peine inférieur à d0 sans être
        comptés.
        """
        mask = self.d0g < self.d0
        adjusted = self.diagnostics.get('outlier_fdr')
        if adjusted is None:
            return mask
        adjusted = np.asarray(adjusted, dtype=float)
        with np.errstate(invalid='ignore'):
            return mask & (adjusted <= OUTLIER_FDR)

    @property
    def n_outliers(self) -> int:
        return int(self.outlier_mask.sum())

    @property
    def n_below_d0(self) -> int:
        """Gènes dont d0g < d0, hypervariables ou non"""
        return int(np.sum(self.d0g < self.d0))

    @property
    def s02_scalar(self) -> Optional[float]:
        """s0² commun, ou None lorsqu'une tendance est ajustée"""
        return None if self.trend_enabled else float(self.s02[0])

    @classmethod
    def standard(cls, d0: float, s02, n_genes: int, trend_enabled: bool = False,
                 diagnostics: Optional[Dict[str, Any]] = None) -> 'Hyperprior':
        """Hyperparamètres sans gène hypervariable (d0g ≡ d0, π ≡ 1)"""
        s02 = np.broadcast_to(np.asarray(s02, dtype=float), (n_genes,)).copy()
        return cls(d0=d0, s02=s02, d0g=np.full(n_genes, float(d0)), d_outlier=d0,
                   pi_g=np.ones(n_genes), trend_enabled=trend_enabled, robust=False,
                   diagnostics=diagnostics or {})


def _as_vectors(s2, df) -> Tuple[np.ndarray, np.ndarray]:
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    if s2.ndim != 1:
        raise DataError(f"Variances: vecteur attendu, forme {s2.shape}")
    try:
        df = np.broadcast_to(np.asarray(df, dtype=float), s2.shape).copy()
    except ValueError:
        raise DataError("Degrés de liberté: longueur différente des variances")
    if np.any(s2 < 0):
        raise DataError("Variances négatives")
    return s2, df


def _as_covariate(covariate, shape) -> Optional[np.ndarray]:
    if covariate is None:
        return None
    covariate = np.asarray(covariate, dtype=float)
    if covariate.shape != shape:
        raise DataError(f"Covariable: forme {covariate.shape}, attendu {shape}")
    return covariate


def _usable(s2: np.ndarray, df: np.ndarray, covariate: Optional[np.ndarray]) -> np.ndarray:
    ok = np.isfinite(s2) & np.isfinite(df) & (df > 0)
    if covariate is not None:
        ok &= np.isfinite(covariate)
    if ok.sum() < 2:
        raise DataError(f"Estimation des hyperparamètres: {int(ok.sum())} gène(s) utilisable(s), 2 requis")
    return ok


def _fill_by_covariate(log_values: np.ndarray, ok: np.ndarray,
                       covariate: Optional[np.ndarray]) -> np.ndarray:
    """Étend aux gènes exclus une quantité (log) connue sur les gènes utilisés"""
    out = np.empty(ok.shape)
    out[ok] = log_values
    missing = ~ok
    if missing.any():
        out[missing] = np.median(log_values)
        if covariate is not None:
            known = covariate[ok]
            order = np.argsort(known, kind='stable')
            target = missing & np.isfinite(covariate)
            out[target] = np.interp(covariate[target], known[order], log_values[order])
    return out


def _log_with_floor(s2: np.ndarray) -> np.ndarray:
    positive = s2[s2 > 0]
    if positive.size == 0:
        raise NumericalError("Toutes les variances résiduelles sont nulles")
    floor = ZERO_VARIANCE_FLOOR * np.median(positive)
    if np.any(s2 < floor):
        logger.debug(f"{int(np.sum(s2 < floor))} variance(s) relevée(s) au plancher {floor:.3g}")
    return np.log(np.maximum(s2, floor))


def fit_fdist(s2, df, covariate=None, span: float = DEFAULT_SPAN) -> Tuple[float, Union[float, np.ndarray]]:
    """
    Estimateur standard (moments) de d0 et s0²

    Avec covariable, le centre de e_g = log s²_g − ψ(d_g/2) + log(d_g/2)
    est une tendance lowess (non robuste) de la covariable.

    Args:
        s2: Variances résiduelles (NaN = absente)
        df: Degrés de liberté résiduels (les gènes à df = 0 sont ignorés)
        covariate: Covariable optionnelle (expression moyenne)
        span: Largeur de lissage de la tendance

    Returns:
        (d0, s02): s02 scalaire sans covariable, vecteur par gène sinon
    """
    s2, df = _as_vectors(s2, df)
    covariate = _as_covariate(covariate, s2.shape)
    ok = _usable(s2, df, covariate)
    x, d = s2[ok], df[ok]
    n = x.size

    if np.ptp(x) == 0.0:
        if x[0] == 0.0:
            raise NumericalError("Toutes les variances résiduelles sont nulles")
        logger.warning("Variances toutes égales: d0 = +inf")
        if covariate is None:
            return float('inf'), float(x[0])
        return float('inf'), np.full(s2.shape, x[0])

    z = _log_with_floor(x)
    e = z - digamma(d / 2.0) + np.log(d / 2.0)

    if covariate is None:
        center = np.full(n, e.mean())
        lost_df = 1
    else:
        center = fit_trend(e, covariate[ok], robust=False, span=span)
        lost_df = TREND_EQUIVALENT_DF if n >= MIN_GENES_FOR_TREND and n > TREND_EQUIVALENT_DF else 1
    evar = np.sum((e - center) ** 2) / (n - lost_df) - np.mean(trigamma(d / 2.0))

    if evar > 0:
        d0 = 2.0 * trigamma_inverse(evar)
    else:
        d0 = float('inf')
    if np.isfinite(d0):
        log_s02 = center + digamma(d0 / 2.0) - np.log(d0 / 2.0)
    else:
        logger.warning("Variance de log s² non supérieure à la variance d'échantillonnage: d0 = +inf")
        log_s02 = center

    if covariate is None:
        s02 = float(np.exp(log_s02[0]))
    else:
        s02 = np.exp(_fill_by_covariate(log_s02, ok, covariate))
    logger.debug(f"fit_fdist: d0={d0:.4g}, n={n}")
    return float(d0), s02


def equalize_df(s2, df, d0: float, s02) -> np.ndarray:
    """
    Ramène des variances à degrés de liberté inégaux au degré commun d = max(df)

    Chaque s²_g est remplacée par s0²·F⁻¹_{d,d0}(F_{d_g,d0}(s²_g/s0²)), en
    passant par la queue droite pour les probabilités supérieures à 1/2.

    Args:
        s2: Variances résiduelles
        df: Degrés de liberté (> 0)
        d0: Degrés de liberté a priori (estimation standard)
        s02: Variance a priori (scalaire ou vecteur)

    Returns:
        Variances transformées (inchangées là où df = d)
    """
    s2, df = _as_vectors(s2, df)
    if np.any(~np.isfinite(df) | (df <= 0)):
        raise DomainError("equalize_df: degrés de liberté doivent être finis et > 0")
    s02 = np.broadcast_to(np.asarray(s02, dtype=float), s2.shape)
    d = df.max()
    out = s2.copy()
    change = (df != d) & (s2 > 0)
    if not change.any():
        return out

    ratio = s2[change] / s02[change]
    d_g = df[change]
    lower = f_cdf(ratio, d_g, d0)
    upper = f_sf(ratio, d_g, d0)
    use_upper = upper < 0.5
    new_ratio = np.empty(ratio.shape)
    if use_upper.any():
        new_ratio[use_upper] = f_isf(np.maximum(upper[use_upper], np.finfo(float).tiny), d, d0)
    if (~use_upper).any():
        new_ratio[~use_upper] = f_quantile(np.minimum(lower[~use_upper], 1.0 - np.finfo(float).eps), d, d0)

    transformed = new_ratio * s02[change]
    if not np.all(np.isfinite(transformed)):
        raise NumericalError("equalize_df: valeurs non finies après transformation")
    out[change] = transformed
    logger.debug(f"equalize_df: {int(change.sum())} variance(s) ramenée(s) à d={d:g}")
    return out


def winsorize(s2, spec: WinsorSpec) -> Tuple[np.ndarray, float, float]:
    """
    Winsorisation empirique

    Les quantiles empiriques p_l et 1 − p_u sont calculés par
    interpolation linéaire des statistiques d'ordre.

    Args:
        s2: Valeurs à winsoriser
        spec: Proportions des queues

    Returns:
        (valeurs bornées, q_l, q_u)
    """
    if not isinstance(spec, WinsorSpec):
        raise DomainError("winsorize: spec doit être un WinsorSpec")
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    if s2.size == 0 or not np.all(np.isfinite(s2)):
        raise DataError("winsorize: valeurs absentes ou non finies")
    q_l = float(np.quantile(s2, spec.p_l))
    q_u = float(np.quantile(s2, 1.0 - spec.p_u))
    return np.clip(s2, q_l, q_u), q_l, q_u


def _winsorized_phi(d_g: float, d0: float, spec: WinsorSpec, k: int) -> float:
    return winsorized_logF_moments(d_g, d0, spec, k)[1]


def _solve_robust_d0(s2z: float, d_g: float, spec: WinsorSpec, k: int) -> float:
    """Résout s²_z = φ(d_g, d0) sur d0 ∈ [D0_LOWER, +inf]"""
    phi_inf = _winsorized_phi(d_g, np.inf, spec, k)
    if s2z <= phi_inf:
        return float('inf')
    phi_low = _winsorized_phi(d_g, D0_LOWER, spec, k)
    if s2z >= phi_low:
        logger.warning(f"d0 non encadré dans [{D0_LOWER}, +inf] (s²_z={s2z:.4g}): d0 = +inf")
        return float('inf')

    # u = d0 / (1 + d0) ramène l'intervalle à [u_low, 1], u = 1 <=> d0 = +inf
    def objective(u: float) -> float:
        d0 = np.inf if u >= 1.0 else u / (1.0 - u)
        return _winsorized_phi(d_g, d0, spec, k) - s2z

    u_low = D0_LOWER / (1.0 + D0_LOWER)
    u, result = optimize.brentq(objective, u_low, 1.0, xtol=1e-15, maxiter=200, full_output=True)
    if not result.converged:
        raise NumericalError("Résolution de d0 robuste: pas de convergence")
    logger.debug(f"d0 robuste: {result.iterations} itérations de Brent")
    return float('inf') if u >= 1.0 else float(u / (1.0 - u))


def _log_hazard_gap(survival):
    """log(−log S) − log(log 2): croissant en log d, nul à la médiane"""
    with np.errstate(divide='ignore'):
        return np.log(-np.log(survival)) - np.log(np.log(2.0))


def _bracket_d_outlier(s2max_ratio: float, d_g: float, start: float) -> Tuple[float, float]:
    """
    Encadre d_outlier sur une grille géométrique de ]0, start]

    Un seul appel vectorisé de f_sf; S(d) décroît en d et S(start) < 0.5.

    Returns:
        (bas, haut) avec S(bas) >= 0.5 > S(haut)
    """
    grid = start * np.exp(np.linspace(-_D_OUTLIER_LOG_SPAN, 0.0, _D_OUTLIER_GRID))
    survival = f_sf(s2max_ratio, d_g, grid)
    above = np.flatnonzero(survival >= 0.5)
    if above.size == 0 or above[-1] == grid.size - 1:
        raise NumericalError("solve_d_outlier: racine non encadrée")
    i = int(above[-1])
    return float(grid[i]), float(grid[i + 1])


def solve_d_outlier(s2max_ratio: float, d_g: float, d0: float,
                    full_output: bool = False) -> Union[float, Tuple[float, int]]:
    """
    Degrés de liberté des gènes hypervariables

    d_outlier place le plus grand rapport s²_g/s0²_g à la médiane de
    F(d_g, d_outlier). Le résultat est plafonné à d0.

    La racine est encadrée sur une grille en log d, puis affinée par
    sécante (regula falsi, variante Illinois) sur log(−log S) en fonction
    de log d, quasi linéaire: trois étapes au plus suffisent en pratique
    pour |S − 0.5| <= 1e-9. Au-delà, brentq termine dans l'encadrement.

    Args:
        s2max_ratio: max_g s²_g/s0²_g (> 0)
        d_g: Degrés de liberté résiduels
        d0: Degrés de liberté a priori (+inf autorisé)
        full_output: Rendre aussi le nombre d'étapes d'affinage

    Returns:
        d_outlier dans ]0, d0], ou (d_outlier, étapes) avec full_output
    """
    if not (np.isfinite(s2max_ratio) and s2max_ratio > 0):
        raise DomainError(f"solve_d_outlier: rapport {s2max_ratio} doit être fini et > 0")
    if not (np.isfinite(d_g) and d_g > 0) or not d0 > 0:
        raise DomainError(f"solve_d_outlier: degrés de liberté invalides ({d_g}, {d0})")

    def done(d: float, steps: int):
        d = float(min(d, d0))
        return (d, steps) if full_output else d

    if f_sf(s2max_ratio, d_g, d0) >= 0.5:
        return done(d0, 0)
    start = d0 if np.isfinite(d0) else _D_OUTLIER_START_INF
    if f_sf(s2max_ratio, d_g, start) >= 0.5:
        return done(start, 0)

    low, high = _bracket_d_outlier(s2max_ratio, d_g, start)
    t_a, t_b = np.log(low), np.log(high)
    g_a = _log_hazard_gap(f_sf(s2max_ratio, d_g, low))
    g_b = _log_hazard_gap(f_sf(s2max_ratio, d_g, high))
    kept = 0
    for step in range(1, _D_OUTLIER_MAX_ITER + 1):
        t = t_b - g_b * (t_b - t_a) / (g_b - g_a)
        if not t_a < t < t_b:
            t = 0.5 * (t_a + t_b)
        survival = f_sf(s2max_ratio, d_g, np.exp(t))
        if abs(survival - 0.5) <= _D_OUTLIER_TOL:
            logger.debug(f"d_outlier={np.exp(t):.6g} après {step} étape(s) de sécante")
            return done(np.exp(t), step)
        g = _log_hazard_gap(survival)
        if survival >= 0.5:
            t_a, g_a = t, g
            if kept == 1:
                g_b *= 0.5
            kept = 1
        else:
            t_b, g_b = t, g
            if kept == -1:
                g_a *= 0.5
            kept = -1

    root, result = optimize.brentq(lambda x: f_sf(s2max_ratio, d_g, x) - 0.5,
                                   np.exp(t_a), np.exp(t_b), xtol=1e-14, rtol=1e-14,
                                   maxiter=200, full_output=True)
    logger.debug(f"d_outlier: sécante non convergée, brentq en {result.iterations} itérations")
    return done(root, _D_OUTLIER_MAX_ITER + result.iterations)


def outlier_posterior(p) -> np.ndarray:
    """
    Probabilités π_g de ne pas être hypervariable

    π_g = min(1, p_g/r_g) avec r_g = (rang moyen − 0.5)/G, puis, dans
    l'ordre croissant des p_g: moyennes cumulées, remplacement du préfixe
    jusqu'à leur minimum par ce minimum, maximum cumulé. Les ex-aequo
    reçoivent la même valeur.

    Args:
        p: p-valeurs de la queue haute, dans [0, 1]

    Returns:
        π_g, non décroissant en p_g
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1 or np.any(np.isnan(p) | (p < 0) | (p > 1)):
        raise DomainError("outlier_posterior: p-valeurs dans [0, 1] attendues")
    G = p.size
    if G == 0:
        return np.empty(0)

    r = (stats.rankdata(p) - 0.5) / G
    pi = np.minimum(1.0, p / r)

    order = np.argsort(p, kind='stable')
    sorted_pi = pi[order]
    cumulative_mean = np.cumsum(sorted_pi) / np.arange(1, G + 1)
    g_min = int(np.argmin(cumulative_mean))
    sorted_pi[:g_min + 1] = cumulative_mean[g_min]
    sorted_pi = np.maximum.accumulate(sorted_pi)

    out = np.empty(G)
    out[order] = sorted_pi
    _, groups = np.unique(p, return_inverse=True)
    group_max = np.zeros(groups.max() + 1)
    np.maximum.at(group_max, groups, out)
    return group_max[groups]


def assign_d0g(hp: Hyperprior) -> Hyperprior:
    """Degrés de liberté par gène d0g = π_g·d0 + (1 − π_g)·d_outlier"""
    pi = hp.pi_g
    with np.errstate(invalid='ignore'):
        d0g = pi * hp.d0 + (1.0 - pi) * hp.d_outlier
    d0g = np.where(pi == 1.0, hp.d0, np.where(pi == 0.0, hp.d_outlier, d0g))
    d0g = np.clip(d0g, hp.d_outlier, hp.d0)
    return replace(hp, d0g=d0g)


@timed()
def fit_fdist_robustly(s2, df, spec: WinsorSpec = WinsorSpec(), covariate=None,
                       k: int = DEFAULT_NODES, span: float = DEFAULT_SPAN,
                       iterations: int = DEFAULT_ROBUST_ITERATIONS) -> Hyperprior:
    """
    Estimateur robuste des hyperparamètres

    Étapes: égalisation des degrés de liberté, tendance lowess robuste
    (avec covariable), winsorisation, appariement des moments winsorisés,
    p-valeurs de la queue haute, π_g, d_outlier et d0g.

    Args:
        s2: Variances résiduelles (NaN = absente)
        df: Degrés de liberté résiduels
        spec: Proportions winsorisées
        covariate: Covariable optionnelle (expression moyenne)
        k: Noeuds de quadrature
        span: Largeur de lissage
        iterations: Itérations de robustesse du lowess

    Returns:
        Hyperprior complet
    """
    s2, df = _as_vectors(s2, df)
    covariate = _as_covariate(covariate, s2.shape)
    ok = _usable(s2, df, covariate)
    G = s2.size
    x, d = s2[ok], df[ok]
    trend_enabled = covariate is not None

    if np.ptp(x) == 0.0:
        if x[0] == 0.0:
            raise NumericalError("Toutes les variances résiduelles sont nulles")
        logger.warning("Variances toutes égales: d0 = +inf, aucun gène hypervariable")
        hp = Hyperprior.standard(np.inf, x[0], G, trend_enabled=trend_enabled)
        return replace(hp, robust=True)

    if np.ptp(d) > 0:
        d0_pre, s02_pre = fit_fdist(x, d, None if covariate is None else covariate[ok], span=span)
        x = equalize_df(x, d, d0_pre, s02_pre)
    d_common = float(d.max())

    if trend_enabled:
        trend = fit_trend(_log_with_floor(x), covariate[ok], robust=True, span=span,
                          iterations=iterations)
    else:
        trend = np.zeros(x.size)
    ratio = x / np.exp(trend)

    clamped, q_l, q_u = winsorize(ratio, spec)
    if q_l <= 0.0:
        positive = ratio[ratio > 0]
        if positive.size == 0:
            raise NumericalError("Toutes les variances résiduelles sont nulles")
        logger.warning(f"Quantile bas nul: variances nulles relevées à {positive.min():.3g}")
        clamped = np.maximum(clamped, positive.min())
    z = np.log(clamped)
    zbar = float(z.mean())
    s2z = float(z.var(ddof=1))

    d0 = _solve_robust_d0(s2z, d_common, spec, k)
    nu = winsorized_logF_moments(d_common, d0, spec, k)[0]
    log_s02_ok = zbar - nu + trend

    s02_ok = np.exp(log_s02_ok)
    scaled = x / s02_ok
    p_upper = f_sf(scaled, d_common, d0)
    pi_ok = outlier_posterior(p_upper)
    d_outlier = solve_d_outlier(float(scaled.max()), d_common, d0)

    pi_g = np.ones(G)
    pi_g[ok] = pi_ok
    if trend_enabled:
        s02 = np.exp(_fill_by_covariate(log_s02_ok, ok, covariate))
    else:
        s02 = np.full(G, float(s02_ok[0]))

    outlier_p = np.full(G, np.nan)
    outlier_p[ok] = p_upper
    outlier_fdr = np.full(G, np.nan)
    outlier_fdr[ok] = multipletests(p_upper, method='fdr_bh')[1]
    diagnostics = {
        'zbar': zbar, 's2z': s2z, 'q_l': q_l, 'q_u': q_u, 'nu': float(nu),
        'df_common': d_common, 'n_used': int(ok.sum()), 'outlier_p': outlier_p,
        'outlier_fdr': outlier_fdr,
    }

    hp = Hyperprior(d0=d0, s02=s02, d0g=np.full(G, d0), d_outlier=d_outlier, pi_g=pi_g,
                    trend_enabled=trend_enabled, robust=True, diagnostics=diagnostics)
    hp = assign_d0g(hp)
    logger.info(f"✓ Hyperparamètres robustes: d0={d0:.4g}, d_outlier={d_outlier:.4g}, "
                f"{hp.n_outliers} gène(s) hypervariable(s)")
    return hp


def estimate_hyperprior(s2, df, covariate=None, robust: bool = False,
                        spec: WinsorSpec = WinsorSpec(), k: int = DEFAULT_NODES,
                        span: float = DEFAULT_SPAN,
                        iterations: int = DEFAULT_ROBUST_ITERATIONS) -> Hyperprior:
    """
    Estimation standard ou robuste, rendue sous la même forme

    Args:
        s2: Variances résiduelles (NaN = absente)
        df: Degrés de liberté résiduels
        covariate: Covariable optionnelle
        robust: Estimateur robuste
        spec: Proportions winsorisées (robuste)
        k: Noeuds de quadrature (robuste)
        span: Largeur de lissage
        iterations: Itérations de robustesse du lowess (robuste)

    Returns:
        Hyperprior
    """
    if robust:
        return fit_fdist_robustly(s2, df, spec=spec, covariate=covariate, k=k,
                                  span=span, iterations=iterations)
    s2, _ = _as_vectors(s2, df)
    d0, s02 = fit_fdist(s2, df, covariate=covariate, span=span)
    logger.info(f"✓ Hyperparamètres standard: d0={d0:.4g}")
    return Hyperprior.standard(d0, s02, s2.size, trend_enabled=covariate is not None)


def variance_normal_deviates(s2, df, hp: Hyperprior) -> np.ndarray:
    """
    Écarts normaux équivalents des variances résiduelles

    z_g = Φ⁻¹(F_{d_g,d0g}(s²_g/s0²_g)), pour un graphe de probabilité des
    écarts-types génomiques. NaN pour les gènes sans variance.

    Args:
        s2: Variances résiduelles
        df: Degrés de liberté résiduels
        hp: Hyperparamètres

    Returns:
        Écarts normaux, un par gène
    """
    s2, df = _as_vectors(s2, df)
    if s2.size != hp.n_genes:
        raise DataError(f"variance_normal_deviates: {s2.size} gènes, hyperparamètres pour {hp.n_genes}")
    out = np.full(s2.shape, np.nan)
    ok = np.isfinite(s2) & np.isfinite(df) & (df > 0)
    if not ok.any():
        return out
    ratio = s2[ok] / hp.s02[ok]
    lower = f_cdf(ratio, df[ok], hp.d0g[ok])
    upper = f_sf(ratio, df[ok], hp.d0g[ok])
    out[ok] = np.where(lower < 0.5, stats.norm.ppf(lower), stats.norm.isf(upper))
    return out
