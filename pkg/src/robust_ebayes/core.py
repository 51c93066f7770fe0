"""
Cœur du système robust-ebayes

Orchestration: ajustement génomique → hyperparamètres → variances
a posteriori → statistiques modérées → table des résultats.
"""

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dataio import (
    read_design, read_expression, render_json, render_outliers,
    render_top_table, write_outputs as write_rendered,
)
from .ebayes.hyperprior import Hyperprior, estimate_hyperprior, variance_normal_deviates
from .ebayes.modstats import TopTableRow, top_table
from .exceptions import ConfigError, DomainError
from .linmod.genewise import DesignMatrix, ExpressionSet, GenewiseFit, coefficient_index, fit_all
from .numerics import WinsorSpec
from .numerics.quadrature import DEFAULT_NODES
from .performance import ParallelProcessor, global_monitor

logger = logging.getLogger(__name__)

TOP_TABLE_FILE = 'toptable.tsv'
SUMMARY_FILE = 'summary.json'
OUTLIERS_FILE = 'outliers.tsv'

# Points de la grille de tendance rapportée dans le résumé
TREND_GRID_POINTS = 11


def parse_coefficients(coef: Any) -> Union[None, int, str, List[Union[int, str]]]:
    """
    Normalise la sélection de coefficients

    "A,B" ou ["A", "B"] sélectionne plusieurs coefficients (test F);
    un nom, une chaîne numérique (base 1) ou None en sélectionne un seul.
    """
    if coef is None:
        return None
    if isinstance(coef, str):
        parts = [part.strip() for part in coef.split(',') if part.strip()]
        if not parts:
            return None
        return parts if len(parts) > 1 else parts[0]
    if isinstance(coef, (list, tuple)):
        if not coef:
            return None
        return list(coef) if len(coef) > 1 else coef[0]
    if isinstance(coef, (int, np.integer)) and not isinstance(coef, bool):
        return int(coef)
    raise ConfigError(f"Coefficient invalide: {coef!r}")


def validate_config(config: Dict[str, Any]) -> WinsorSpec:
    """
    Valide (et normalise en place) une configuration complète du système

    Args:
        config: Dictionnaire de configuration

    Returns:
        Proportions winsorisées correspondantes
    """
    unknown = set(config) - set(RobustEBSystem._default_config())
    if unknown:
        raise ConfigError(f"Clés de configuration inconnues: {sorted(unknown)}")

    try:
        spec = WinsorSpec.from_pair(config['winsor_tail_p'])
    except (DomainError, TypeError, ValueError) as e:
        raise ConfigError(f"winsor_tail_p invalide: {e}")
    config['winsor_tail_p'] = (spec.p_l, spec.p_u)
    config['coefficient'] = parse_coefficients(config['coefficient'])

    fdr = config['fdr_cutoff']
    if fdr is not None and not (isinstance(fdr, (int, float)) and 0.0 < fdr <= 1.0):
        raise ConfigError(f"fdr_cutoff={fdr} doit être dans ]0, 1]")
    span = config['trend_span']
    if not (isinstance(span, (int, float)) and 0.0 < span <= 1.0):
        raise ConfigError(f"trend_span={span} doit être dans ]0, 1]")
    iterations = config['trend_robust_iterations']
    if not isinstance(iterations, int) or iterations < 0:
        raise ConfigError(f"trend_robust_iterations={iterations} doit être un entier >= 0")
    nodes = config['quadrature_nodes']
    if not isinstance(nodes, int) or nodes < 16:
        raise ConfigError(f"quadrature_nodes={nodes} doit être un entier >= 16")
    workers = config['max_workers']
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError(f"max_workers={workers} doit être un entier >= 1")
    for key in ('robust', 'trend', 'parallel'):
        if not isinstance(config[key], bool):
            raise ConfigError(f"{key} doit être un booléen")
    return spec


class RobustEBSystem:
    """
    Système intégré d'analyse par Bayes empirique robuste
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialisation du système

        Args:
            config: Configuration (partielle) du système
        """
        self.config = {**self._default_config(), **(config or {})}
        self._validate_config()

        self.performance_monitor = global_monitor
        self.parallel_processor = self._make_processor()

        logger.info(f"Système robust-ebayes initialisé (robuste={self.config['robust']}, "
                    f"tendance={self.config['trend']})")

    @staticmethod
    def _default_config() -> Dict[str, Any]:
        """Configuration par défaut"""
        return {
            'robust': False,
            'trend': False,
            'winsor_tail_p': (0.05, 0.10),
            'coefficient': None,
            'fdr_cutoff': None,
            'trend_span': 0.4,
            'trend_robust_iterations': 3,
            'quadrature_nodes': DEFAULT_NODES,
            'parallel': True,
            'max_workers': None,
        }

    def _validate_config(self):
        """Validation de la configuration"""
        self.winsor_spec = validate_config(self.config)

    def _make_processor(self) -> ParallelProcessor:
        if not self.config['parallel']:
            return ParallelProcessor(max_workers=1)
        return ParallelProcessor(max_workers=self.config['max_workers'])

    def update_config(self, new_config: Dict[str, Any]):
        """
        Mise à jour de la configuration

        Args:
            new_config: Nouvelle configuration partielle
        """
        previous = dict(self.config)
        self.config.update(new_config)
        try:
            self._validate_config()
        except ConfigError:
            self.config = previous
            self._validate_config()
            raise
        self.parallel_processor = self._make_processor()
        logger.info("Configuration mise à jour")

    def fit(self, data: ExpressionSet, design: DesignMatrix) -> GenewiseFit:
        """Étape 1: ajustement du modèle linéaire de chaque gène"""
        return fit_all(data, design, processor=self.parallel_processor)

    def estimate(self, fit: GenewiseFit) -> Hyperprior:
        """Étape 2: hyperparamètres (standard ou robustes, avec ou sans tendance)"""
        return estimate_hyperprior(
            fit.s2, fit.df_residual,
            covariate=fit.avg_expr if self.config['trend'] else None,
            robust=self.config['robust'],
            spec=self.winsor_spec,
            k=self.config['quadrature_nodes'],
            span=self.config['trend_span'],
            iterations=self.config['trend_robust_iterations'],
        )

    def run(self, expr: Union[ExpressionSet, str, Path], design: Union[DesignMatrix, str, Path],
            weights: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
        """
        Analyse complète

        Args:
            expr: ExpressionSet, ou chemin du fichier d'expression
            design: DesignMatrix, ou chemin du fichier de plan
            weights: Chemin du fichier de poids (avec un chemin d'expression)

        Returns:
            Dictionnaire: fit, hyperprior, top_table, z_variance, summary
        """
        data = expr if isinstance(expr, ExpressionSet) else read_expression(expr, weights)
        if not isinstance(design, DesignMatrix):
            design = read_design(design, data.n_samples, data.sample_ids)

        logger.info("Étape 1: Ajustement des modèles linéaires...")
        fit = self.fit(data, design)

        logger.info("Étape 2: Estimation des hyperparamètres...")
        hp = self.estimate(fit)

        logger.info("Étape 3: Statistiques modérées...")
        rows = top_table(fit, hp, coef=self.config['coefficient'], sort=True,
                         fdr_cutoff=self.config['fdr_cutoff'])
        z_variance = variance_normal_deviates(fit.s2, fit.df_residual, hp)

        summary = self.summarize(fit, hp, rows)
        logger.info(f"✓ Analyse terminée: d0={hp.d0:.4g}, {hp.n_outliers} gène(s) hypervariable(s)")
        return {'fit': fit, 'hyperprior': hp, 'top_table': rows,
                'z_variance': z_variance, 'summary': summary}

    def _coefficient_names(self, fit: GenewiseFit) -> List[str]:
        coef = self.config['coefficient']
        selected = coef if isinstance(coef, list) else [coef]
        return [fit.column_names[coefficient_index(fit.column_names, c)] for c in selected]

    def _trend_grid(self, fit: GenewiseFit, hp: Hyperprior) -> Optional[List[Dict[str, float]]]:
        if not hp.trend_enabled:
            return None
        ok = np.isfinite(fit.avg_expr)
        a, s02 = fit.avg_expr[ok], hp.s02[ok]
        order = np.argsort(a, kind='stable')
        grid = np.quantile(a, np.linspace(0.0, 1.0, TREND_GRID_POINTS))
        values = np.interp(grid, a[order], s02[order])
        return [{'AveExpr': float(x), 's02': float(y)} for x, y in zip(grid, values)]

    def summarize(self, fit: GenewiseFit, hp: Hyperprior, rows: Sequence[TopTableRow]) -> Dict[str, Any]:
        """
        Résumé de l'ajustement

        Returns:
            Dictionnaire sérialisable (hyperparamètres, degrés de liberté,
            nombre de gènes hypervariables et significatifs)
        """
        df = fit.df_residual[fit.usable]
        significant_cutoff = self.config['fdr_cutoff'] or 0.05
        n_significant = sum(1 for row in rows if row.fdr <= significant_cutoff)
        diagnostics = {key: value for key, value in hp.diagnostics.items() if np.ndim(value) == 0}
        return {
            'n_genes': len(fit),
            'n_usable': fit.n_usable,
            'coefficients': self._coefficient_names(fit),
            'robust': hp.robust,
            'trend': hp.trend_enabled,
            'winsor_tail_p': list(self.config['winsor_tail_p']),
            'd0': hp.d0,
            's02': hp.s02_scalar,
            'trend_grid': self._trend_grid(fit, hp),
            'd_outlier': hp.d_outlier,
            'n_outliers': hp.n_outliers,
            'n_below_d0': hp.n_below_d0,
            'df_residual': sorted({float(d) for d in df}),
            'fdr_cutoff': significant_cutoff,
            'n_significant': n_significant,
            'diagnostics': diagnostics,
        }

    def render_outputs(self, result: Dict[str, Any]) -> Dict[str, str]:
        """Rend toutes les sorties en mémoire (rien n'est écrit)"""
        fit, hp = result['fit'], result['hyperprior']
        return {
            TOP_TABLE_FILE: render_top_table(result['top_table']),
            SUMMARY_FILE: render_json(result['summary']),
            OUTLIERS_FILE: render_outliers(fit.gene_ids, fit.s2, hp, result['z_variance']),
        }

    def write_outputs(self, result: Dict[str, Any], out_dir: Union[str, Path]) -> Dict[str, Path]:
        """
        Écrit toptable.tsv, summary.json et outliers.tsv

        Args:
            result: Résultat de run()
            out_dir: Répertoire de sortie (créé si besoin)

        Returns:
            Chemins écrits
        """
        written = write_rendered(out_dir, self.render_outputs(result))
        logger.info(f"✓ Résultats écrits dans {out_dir}")
        return written

    def get_system_status(self) -> Dict[str, Any]:
        """
        État du système

        Returns:
            Configuration et temps d'exécution mesurés
        """
        return {
            'config': dict(self.config),
            'workers': self.parallel_processor.max_workers,
            'performance': self.performance_monitor.get_stats(),
        }


@dataclass
class RunConfig:
    """Configuration d'une exécution de la commande fit"""

    expression: Optional[str] = None
    design: Optional[str] = None
    weights: Optional[str] = None
    output: Optional[str] = None
    robust: bool = False
    trend: bool = False
    winsor_tail_p: Tuple[float, float] = (0.05, 0.10)
    coefficient: Any = None
    fdr_cutoff: Optional[float] = None
    trend_span: float = 0.4
    trend_robust_iterations: int = 3
    quadrature_nodes: int = DEFAULT_NODES
    parallel: bool = True
    max_workers: Optional[int] = None
    seed: Optional[int] = None

    _PATH_KEYS = ('expression', 'design', 'weights', 'output', 'seed')

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Construit et valide depuis un dictionnaire (fichier de configuration)"""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Clés de configuration inconnues: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config

    def system_config(self) -> Dict[str, Any]:
        """Clés transmises à RobustEBSystem"""
        return {key: value for key, value in asdict(self).items() if key not in self._PATH_KEYS}

    def validate(self):
        """Valide les options (lève ConfigError)"""
        config = {**RobustEBSystem._default_config(), **self.system_config()}
        validate_config(config)
        self.winsor_tail_p = config['winsor_tail_p']
        self.coefficient = config['coefficient']
