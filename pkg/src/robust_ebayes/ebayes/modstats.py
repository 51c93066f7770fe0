"""
Statistiques modérées

Variances a posteriori, statistiques t et F modérées, ajustement FDR
de Benjamini-Hochberg et table des résultats triée.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from statsmodels.stats.multitest import multipletests

from ..exceptions import ConfigError, DataError, DomainError, NumericalError
from ..linmod.genewise import GenewiseFit, coefficient_index
from ..numerics import f_sf, t_tail2
from .hyperprior import Hyperprior

logger = logging.getLogger(__name__)

Coefficient = Union[int, str, None]


@dataclass(frozen=True)
class TopTableRow:
    """Ligne de la table des résultats (NaN = statistique absente)"""

    gene_id: str
    logFC: float
    avg_expr: float
    t_mod: float
    p_value: float
    fdr: float
    df_total: float
    s2_post: float
    d0g: float
    F: Optional[float] = None


def posterior_variances(s2, df, d0g, s02) -> np.ndarray:
    """
    s̃²_g = (d0g·s0²_g + d_g·s²_g)/(d0g + d_g)

    s̃²_g = s0²_g lorsque d_g = 0, s²_g absente, ou d0g = +inf.
    """
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    df = np.broadcast_to(np.asarray(df, dtype=float), s2.shape)
    d0g = np.broadcast_to(np.asarray(d0g, dtype=float), s2.shape)
    s02 = np.broadcast_to(np.asarray(s02, dtype=float), s2.shape)
    out = np.array(s02, dtype=float)
    use = np.isfinite(s2) & (df > 0) & np.isfinite(d0g)
    out[use] = (d0g[use] * s02[use] + df[use] * s2[use]) / (d0g[use] + df[use])
    return out


def squeeze_var(s2, df, hp: Hyperprior) -> np.ndarray:
    """
    Variances a posteriori avec les hyperparamètres par gène

    Args:
        s2: Variances résiduelles (NaN = absente)
        df: Degrés de liberté résiduels
        hp: Hyperparamètres

    Returns:
        s̃²_g
    """
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    if s2.size != hp.n_genes:
        raise DataError(f"squeeze_var: {s2.size} variances, hyperparamètres pour {hp.n_genes} gènes")
    return posterior_variances(s2, df, hp.d0g, hp.s02)


def _unwrap(values: np.ndarray):
    return float(values) if values.ndim == 0 else values


def moderated_t(fit, j: int, s2_post, df_total) -> Tuple:
    """
    Statistique t modérée et p-valeur bilatérale exacte

    Args:
        fit: GeneFit ou GenewiseFit
        j: Index (base 0) du coefficient
        s2_post: Variance(s) a posteriori
        df_total: d_g + d0g

    Returns:
        (t, p): NaN lorsque la statistique n'est pas définie
    """
    beta = np.asarray(fit.beta_hat, dtype=float)[..., j]
    sd = np.asarray(fit.unscaled_sd, dtype=float)[..., j]
    s2_post = np.asarray(s2_post, dtype=float)
    df_total = np.asarray(df_total, dtype=float)
    beta, sd, s2_post, df_total = np.broadcast_arrays(beta, sd, s2_post, df_total)

    defined = np.isfinite(beta) & (sd > 0) & np.isfinite(s2_post) & (s2_post > 0) & (df_total > 0)
    t = np.full(beta.shape, np.nan)
    p = np.full(beta.shape, np.nan)
    if np.any(defined):
        t[defined] = beta[defined] / (np.sqrt(s2_post[defined]) * sd[defined])
        p[defined] = t_tail2(t[defined], df_total[defined])
    return _unwrap(t), _unwrap(p)


def moderated_F(fit, subset: Sequence[int], s2_post, d0g) -> Tuple:
    """
    Statistique F modérée pour un ensemble de coefficients

    F = β̂ᵀ V⁻¹ β̂ / (r·s̃²_g), V la sous-matrice de covariance non
    normalisée, p-valeur sur (r, d_g + d0g) degrés de liberté.

    Args:
        fit: GeneFit ou GenewiseFit
        subset: Indices (base 0) des coefficients
        s2_post: Variance(s) a posteriori
        d0g: Degrés de liberté a priori par gène

    Returns:
        (F, p)
    """
    index = [int(i) for i in subset]
    if not index:
        raise ConfigError("moderated_F: ensemble de coefficients vide")
    if len(set(index)) != len(index):
        raise ConfigError("moderated_F: coefficients dupliqués")
    r = len(index)

    beta = np.asarray(fit.beta_hat, dtype=float)[..., index]
    cov = np.asarray(fit.cov_unscaled, dtype=float)[..., index, :][..., :, index]
    s2_post = np.broadcast_to(np.asarray(s2_post, dtype=float), beta.shape[:-1])
    df_total = np.broadcast_to(np.asarray(fit.df_residual, dtype=float) + np.asarray(d0g, dtype=float),
                               beta.shape[:-1])

    defined = (np.all(np.isfinite(beta), axis=-1) & np.all(np.isfinite(cov), axis=(-2, -1))
               & np.isfinite(s2_post) & (s2_post > 0) & (df_total > 0))
    F = np.full(beta.shape[:-1], np.nan)
    p = np.full(beta.shape[:-1], np.nan)
    if np.any(defined):
        b = beta[defined]
        try:
            solved = np.linalg.solve(cov[defined], b[..., None])[..., 0]
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"moderated_F: sous-matrice de covariance singulière ({e})")
        F[defined] = np.sum(b * solved, axis=-1) / (r * s2_post[defined])
        p[defined] = f_sf(np.maximum(F[defined], 0.0), r, df_total[defined])
    return _unwrap(F), _unwrap(p)


def bh_adjust(p) -> np.ndarray:
    """
    Ajustement de Benjamini-Hochberg (step-up)

    Les valeurs NaN restent NaN et ne comptent pas dans le nombre de tests.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    finite = np.isfinite(p)
    if np.any((p[finite] < 0) | (p[finite] > 1)):
        raise DomainError("bh_adjust: p-valeurs dans [0, 1] attendues")
    out = np.full(p.shape, np.nan)
    if finite.any():
        out[finite] = multipletests(p[finite], method='fdr_bh')[1]
    return out


def _sort_key(row: TopTableRow):
    absent = np.isnan(row.p_value)
    return (absent, 0.0 if absent else row.p_value, row.gene_id)


def top_table(fit: GenewiseFit, hp: Hyperprior, coef: Union[Coefficient, Sequence[Coefficient]] = None,
              sort: bool = True, fdr_cutoff: Optional[float] = None) -> List[TopTableRow]:
    """
    Table des résultats par gène

    Un coefficient unique donne une statistique t; plusieurs coefficients
    donnent une statistique F (logFC et t valent alors NaN).

    Args:
        fit: Ajustements génomiques
        hp: Hyperparamètres
        coef: Nom, index base 0, chaîne base 1, ou liste de ceux-ci
        sort: Trier par p-valeur croissante (ex-aequo: gene_id)
        fdr_cutoff: Ne garder que les gènes de FDR <= seuil

    Returns:
        Lignes de la table
    """
    if hp.n_genes != len(fit):
        raise DataError(f"top_table: {len(fit)} gènes, hyperparamètres pour {hp.n_genes}")
    if fdr_cutoff is not None and not 0.0 < fdr_cutoff <= 1.0:
        raise ConfigError(f"Seuil FDR {fdr_cutoff} hors de ]0, 1]")

    s2_post = squeeze_var(fit.s2, fit.df_residual, hp)
    df_total = fit.df_residual + hp.d0g

    if isinstance(coef, (list, tuple)) and len(coef) > 1:
        subset = [coefficient_index(fit.column_names, c) for c in coef]
        F, p = moderated_F(fit, subset, s2_post, hp.d0g)
        logfc = np.full(len(fit), np.nan)
        t = np.full(len(fit), np.nan)
    else:
        if isinstance(coef, (list, tuple)):
            coef = coef[0] if coef else None
        j = coefficient_index(fit.column_names, coef)
        t, p = moderated_t(fit, j, s2_post, df_total)
        logfc = fit.beta_hat[:, j]
        F = None

    fdr = bh_adjust(p)
    rows = [
        TopTableRow(gene_id=fit.gene_ids[g], logFC=float(logfc[g]), avg_expr=float(fit.avg_expr[g]),
                    t_mod=float(t[g]), p_value=float(p[g]), fdr=float(fdr[g]),
                    df_total=float(df_total[g]), s2_post=float(s2_post[g]), d0g=float(hp.d0g[g]),
                    F=None if F is None else float(F[g]))
        for g in range(len(fit))
    ]
    if sort:
        rows.sort(key=_sort_key)
    if fdr_cutoff is not None:
        rows = [row for row in rows if row.fdr <= fdr_cutoff]
    logger.info(f"✓ Table des résultats: {len(rows)} gène(s)")
    return rows
