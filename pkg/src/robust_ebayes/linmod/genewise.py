"""
Modèles linéaires génomiques (un ajustement par gène)

Moindres carrés pondérés par décomposition QR de √W·X. Les observations
manquantes ou de poids nul sont retirées gène par gène.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg

from ..exceptions import ConfigError, DataError
from ..performance import ParallelProcessor, timed

logger = logging.getLogger(__name__)


def _is_full_rank(r: np.ndarray, n_rows: int) -> bool:
    """Test de rang plein sur la diagonale du facteur R"""
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.max() == 0:
        return False
    tol = diag.max() * max(n_rows, r.shape[1]) * np.finfo(float).eps
    return bool(diag.min() > tol)


def coefficient_index(column_names: Sequence, coef: Union[int, str, None]) -> int:
    """
    Résout un coefficient du plan d'expérience

    Args:
        column_names: Noms des colonnes du plan
        coef: None (dernière colonne), index entier (base 0), nom de
            colonne, ou chaîne numérique (base 1)

    Returns:
        Index base 0
    """
    names = list(column_names)
    p = len(names)
    if coef is None:
        return p - 1
    if isinstance(coef, str):
        if coef in names:
            return names.index(coef)
        if coef.strip().isdigit():
            index = int(coef) - 1
            if 0 <= index < p:
                return index
        raise ConfigError(f"Coefficient inconnu: '{coef}' (colonnes: {names})")
    if isinstance(coef, bool) or not isinstance(coef, (int, np.integer)):
        raise ConfigError(f"Coefficient invalide: {coef!r}")
    if not -p <= coef < p:
        raise ConfigError(f"Index de coefficient hors limites: {coef}")
    return int(coef) % p


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Plan d'expérience n×p de rang colonne plein"""

    X: np.ndarray
    column_names: Tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"Plan d'expérience: matrice 2D attendue, forme {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("Plan d'expérience: valeurs non finies")
        names = tuple(str(name) for name in self.column_names)
        if len(names) != X.shape[1]:
            raise DataError(f"Plan d'expérience: {len(names)} noms pour {X.shape[1]} colonnes")
        if len(set(names)) != len(names):
            raise DataError("Plan d'expérience: noms de colonnes dupliqués")
        _, r = np.linalg.qr(X)
        if X.shape[0] < X.shape[1] or not _is_full_rank(r, X.shape[0]):
            raise DataError("Plan d'expérience: rang colonne incomplet")
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'column_names', names)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_coef(self) -> int:
        return self.X.shape[1]

    @classmethod
    def two_group(cls, n1: int, n2: int) -> 'DesignMatrix':
        """Plan à deux groupes: ordonnée à l'origine + indicatrice du groupe 2"""
        group2 = np.r_[np.zeros(n1), np.ones(n2)]
        return cls(np.column_stack([np.ones(n1 + n2), group2]), ('Intercept', 'Group2'))

    def coefficient_index(self, coef: Union[int, str, None]) -> int:
        """Index base 0 d'un coefficient (voir coefficient_index)"""
        return coefficient_index(self.column_names, coef)


@dataclass(frozen=True, eq=False)
class ExpressionSet:
    """Matrice G×n de log-expressions, poids de précision optionnels"""

    values: np.ndarray
    gene_ids: Tuple[str, ...]
    sample_ids: Tuple[str, ...]
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"Expressions: matrice 2D attendue, forme {values.shape}")
        n_genes, n_samples = values.shape
        if n_genes < 2 or n_samples < 2:
            raise DataError(f"Expressions: au moins 2 gènes et 2 échantillons requis ({values.shape})")
        gene_ids = tuple(str(g) for g in self.gene_ids)
        sample_ids = tuple(str(s) for s in self.sample_ids)
        if len(gene_ids) != n_genes or len(sample_ids) != n_samples:
            raise DataError("Expressions: identifiants incompatibles avec la matrice")
        if len(set(gene_ids)) != n_genes:
            raise DataError("Expressions: identifiants de gènes dupliqués")
        if len(set(sample_ids)) != n_samples:
            raise DataError("Expressions: identifiants d'échantillons dupliqués")
        if np.any(np.isinf(values)):
            raise DataError("Expressions: valeurs infinies")
        weights = self.weights
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != values.shape:
                raise DataError(f"Poids: forme {weights.shape} différente des expressions {values.shape}")
            if np.any(~np.isfinite(weights) | (weights < 0)):
                raise DataError("Poids: valeurs négatives ou non finies")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'gene_ids', gene_ids)
        object.__setattr__(self, 'sample_ids', sample_ids)

    @property
    def n_genes(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class GeneFit:
    """Ajustement d'un gène; s2 vaut None lorsque df_residual = 0"""

    beta_hat: np.ndarray
    unscaled_sd: np.ndarray
    cov_unscaled: np.ndarray
    s2: Optional[float]
    df_residual: float
    avg_expr: float
    usable: bool = True


def _unusable_fit(p: int, avg_expr: float) -> GeneFit:
    nan_p = np.full(p, np.nan)
    return GeneFit(beta_hat=nan_p, unscaled_sd=nan_p.copy(), cov_unscaled=np.full((p, p), np.nan),
                   s2=None, df_residual=0.0, avg_expr=avg_expr, usable=False)


def fit_gene(y, design: DesignMatrix, w=None) -> GeneFit:
    """
    Ajustement des moindres carrés pondérés pour un gène

    Args:
        y: Vecteur de n log-expressions (NaN = manquant)
        design: Plan d'expérience
        w: Poids de précision (> 0; 0 retire l'observation)

    Returns:
        GeneFit (usable=False si le plan réduit perd son rang)
    """
    y = np.asarray(y, dtype=float)
    n, p = design.n_samples, design.n_coef
    if y.shape != (n,):
        raise DataError(f"fit_gene: {y.shape[0] if y.ndim == 1 else y.shape} valeurs pour {n} échantillons")
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DataError("fit_gene: poids de longueur incompatible")

    available = np.isfinite(y)
    avg_expr = float(np.mean(y[available])) if available.any() else float('nan')
    observed = available & np.isfinite(w) & (w > 0)
    n_used = int(observed.sum())
    if n_used < p:
        return _unusable_fit(p, avg_expr)

    sqrt_w = np.sqrt(w[observed])
    xw = design.X[observed] * sqrt_w[:, None]
    yw = y[observed] * sqrt_w
    q, r = np.linalg.qr(xw)
    if not _is_full_rank(r, n_used):
        return _unusable_fit(p, avg_expr)

    beta = linalg.solve_triangular(r, q.T @ yw)
    resid = yw - xw @ beta
    df = n_used - p
    s2 = float(resid @ resid / df) if df > 0 else None
    r_inv = linalg.solve_triangular(r, np.eye(p))
    cov = r_inv @ r_inv.T
    return GeneFit(beta_hat=beta, unscaled_sd=np.sqrt(np.diag(cov)), cov_unscaled=cov,
                   s2=s2, df_residual=float(df), avg_expr=avg_expr, usable=True)


class GenewiseFit(Sequence):
    """
    Ajustements de tous les gènes, stockés en tableaux

    Se comporte comme une séquence de GeneFit (ordre des gènes conservé).
    s2 vaut NaN lorsqu'il est absent (df_residual = 0 ou gène inutilisable).
    """

    def __init__(self, beta_hat: np.ndarray, cov_unscaled: np.ndarray, s2: np.ndarray,
                 df_residual: np.ndarray, avg_expr: np.ndarray, usable: np.ndarray,
                 gene_ids: Tuple[str, ...], column_names: Tuple[str, ...]):
        self.beta_hat = beta_hat
        self.cov_unscaled = cov_unscaled
        self.s2 = s2
        self.df_residual = df_residual
        self.avg_expr = avg_expr
        self.usable = usable
        self.gene_ids = tuple(gene_ids)
        self.column_names = tuple(column_names)
        self.unscaled_sd = np.sqrt(np.diagonal(cov_unscaled, axis1=1, axis2=2))

    def __len__(self) -> int:
        return len(self.gene_ids)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        s2 = self.s2[index]
        return GeneFit(beta_hat=self.beta_hat[index], unscaled_sd=self.unscaled_sd[index],
                       cov_unscaled=self.cov_unscaled[index],
                       s2=None if np.isnan(s2) else float(s2),
                       df_residual=float(self.df_residual[index]),
                       avg_expr=float(self.avg_expr[index]), usable=bool(self.usable[index]))

    @property
    def n_usable(self) -> int:
        return int(self.usable.sum())

    @property
    def has_variance(self) -> np.ndarray:
        """Gènes disposant d'une variance résiduelle (df > 0)"""
        return self.usable & (self.df_residual > 0)


@timed()
def fit_all(data: ExpressionSet, design: DesignMatrix,
            processor: Optional[ParallelProcessor] = None) -> GenewiseFit:
    """
    Ajuste le modèle linéaire à chaque gène

    Les gènes complets et de poids unitaires partagent une seule
    décomposition QR; les autres sont ajustés individuellement
    (éventuellement en parallèle, résultats identiques au séquentiel).

    Args:
        data: Matrice d'expression
        design: Plan d'expérience
        processor: Processeur parallèle (optionnel)

    Returns:
        GenewiseFit
    """
    if data.n_samples != design.n_samples:
        raise DataError(f"Dimensions incompatibles: {data.n_samples} échantillons, "
                        f"plan à {design.n_samples} lignes")

    G, n, p = data.n_genes, data.n_samples, design.n_coef
    Y, W = data.values, data.weights

    beta = np.full((G, p), np.nan)
    cov = np.full((G, p, p), np.nan)
    s2 = np.full(G, np.nan)
    df = np.zeros(G)
    avg = np.full(G, np.nan)
    usable = np.zeros(G, dtype=bool)

    regular = np.all(np.isfinite(Y), axis=1)
    if W is not None:
        regular &= np.all(W == 1.0, axis=1)

    if regular.any():
        q, r = np.linalg.qr(design.X)
        Yr = Y[regular]
        beta_r = linalg.solve_triangular(r, (Yr @ q).T).T
        resid = Yr - beta_r @ design.X.T
        r_inv = linalg.solve_triangular(r, np.eye(p))
        beta[regular] = beta_r
        cov[regular] = r_inv @ r_inv.T
        df[regular] = n - p
        if n > p:
            s2[regular] = np.sum(resid ** 2, axis=1) / (n - p)
        avg[regular] = Yr.mean(axis=1)
        usable[regular] = True

    irregular = np.flatnonzero(~regular)
    if irregular.size:
        logger.debug(f"{irregular.size} gènes avec valeurs manquantes ou pondérés")

        def _fit(i: int) -> GeneFit:
            return fit_gene(Y[i], design, None if W is None else W[i])

        fits = (processor or ParallelProcessor(max_workers=1)).map(_fit, irregular)
        for i, gene_fit in zip(irregular, fits):
            beta[i] = gene_fit.beta_hat
            cov[i] = gene_fit.cov_unscaled
            df[i] = gene_fit.df_residual
            s2[i] = np.nan if gene_fit.s2 is None else gene_fit.s2
            avg[i] = gene_fit.avg_expr
            usable[i] = gene_fit.usable

    n_unusable = int((~usable).sum())
    if n_unusable:
        logger.warning(f"{n_unusable} gène(s) inutilisable(s): rang insuffisant après retrait des manquants")
    logger.info(f"✓ Ajustement terminé: {G} gènes, {p} coefficients")
    return GenewiseFit(beta, cov, s2, df, avg, usable, data.gene_ids, design.column_names)
