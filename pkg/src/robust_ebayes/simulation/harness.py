"""
Banc de simulation du modèle hiérarchique

Génère des jeux de données à deux groupes selon la loi a priori des
variances, avec gènes hypervariables et gènes différentiellement
exprimés optionnels, puis compare les estimateurs standard et robuste:
erreur de type I, fausses découvertes et puissance, recouvrement des
hyperparamètres.

Chaque réplication tire son générateur (PCG64) d'un SeedSequence
dérivé de la graine de la configuration: les résultats ne dépendent ni
du nombre de workers ni de l'ordre d'exécution.
"""

import logging
import threading
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..ebayes.hyperprior import Hyperprior, estimate_hyperprior
from ..ebayes.modstats import bh_adjust, moderated_t, squeeze_var
from ..exceptions import ConfigError
from ..linmod.genewise import DesignMatrix, ExpressionSet, GenewiseFit, fit_all
from ..numerics import WinsorSpec
from ..numerics.quadrature import DEFAULT_NODES
from ..performance import ParallelProcessor, timed

logger = logging.getLogger(__name__)

METHODS = ('standard', 'robust')
TYPE1_CUTOFFS = (0.001, 0.01, 0.05, 0.1)
FDR_CUTOFFS = tuple(round(0.01 * i, 2) for i in range(1, 11))
TOP_N = 500
KS_LEVEL = 0.01

ProgressCallback = Callable[[int], None]


@dataclass
class SimConfig:
    """Paramètres d'un jeu de données simulé"""

    n_genes: int = 10000
    n_samples: int = 6
    d0_true: float = 4.0
    s02_true: float = 0.04
    n_outliers: int = 0
    d0_outlier_true: float = 0.5
    n_de: int = 0
    lfc_sd: float = 2.0
    seed: int = 0

    def __post_init__(self):
        self.d0_true = float(self.d0_true)
        self.s02_true = float(self.s02_true)
        self.d0_outlier_true = float(self.d0_outlier_true)
        self.lfc_sd = float(self.lfc_sd)
        if self.n_genes < 2:
            raise ConfigError(f"n_genes={self.n_genes} doit être >= 2")
        if self.n_samples < 3:
            raise ConfigError(f"n_samples={self.n_samples} doit être >= 3 (deux groupes, d_g > 0)")
        if not self.d0_true > 0:
            raise ConfigError(f"d0_true={self.d0_true} doit être > 0")
        if not (np.isfinite(self.s02_true) and self.s02_true > 0):
            raise ConfigError(f"s02_true={self.s02_true} doit être fini et > 0")
        if not (np.isfinite(self.d0_outlier_true) and self.d0_outlier_true > 0):
            raise ConfigError(f"d0_outlier_true={self.d0_outlier_true} doit être fini et > 0")
        if self.n_outliers < 0 or self.n_de < 0:
            raise ConfigError("n_outliers et n_de doivent être >= 0")
        if self.n_outliers + self.n_de > self.n_genes:
            raise ConfigError(f"n_outliers + n_de = {self.n_outliers + self.n_de} dépasse n_genes={self.n_genes}")
        if not (np.isfinite(self.lfc_sd) and self.lfc_sd >= 0):
            raise ConfigError(f"lfc_sd={self.lfc_sd} doit être >= 0")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed={self.seed} doit être un entier 64 bits non signé")

    @property
    def group_sizes(self) -> Tuple[int, int]:
        n1 = self.n_samples // 2
        return n1, self.n_samples - n1

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SimConfig':
        """Construit depuis un dictionnaire (section `simulation` du fichier de configuration)"""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Clés de simulation inconnues: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SimTruth:
    """Valeurs vraies d'un jeu simulé"""

    sigma2: np.ndarray
    de_flags: np.ndarray
    outlier_flags: np.ndarray
    true_lfc: np.ndarray


def simulate_dataset(cfg: SimConfig, rng: Optional[np.random.Generator] = None
                     ) -> Tuple[ExpressionSet, DesignMatrix, SimTruth]:
    """
    Génère un jeu de données selon le modèle hiérarchique

    σ²_g ~ s0²·d0g/χ²_{d0g} (d0g = d0_true, ou d0_outlier_true pour les
    gènes hypervariables); les gènes DE reçoivent un décalage N(0, lfc_sd²)
    dans le second groupe. Gènes DE et hypervariables sont disjoints.

    Args:
        cfg: Configuration
        rng: Générateur (défaut: PCG64 initialisé avec cfg.seed)

    Returns:
        (expressions, plan d'expérience, valeurs vraies)
    """
    rng = rng if rng is not None else np.random.Generator(np.random.PCG64(cfg.seed))
    G = cfg.n_genes
    n1, n2 = cfg.group_sizes

    permutation = rng.permutation(G)
    outlier_flags = np.zeros(G, dtype=bool)
    outlier_flags[permutation[:cfg.n_outliers]] = True
    de_flags = np.zeros(G, dtype=bool)
    de_flags[permutation[cfg.n_outliers:cfg.n_outliers + cfg.n_de]] = True

    d0g = np.where(outlier_flags, cfg.d0_outlier_true, cfg.d0_true)
    sigma2 = np.full(G, cfg.s02_true)
    finite = np.isfinite(d0g)
    if finite.any():
        sigma2[finite] = cfg.s02_true * d0g[finite] / rng.chisquare(d0g[finite])

    true_lfc = np.zeros(G)
    true_lfc[de_flags] = rng.normal(0.0, cfg.lfc_sd, size=int(de_flags.sum()))

    noise = rng.standard_normal((G, cfg.n_samples))
    values = noise * np.sqrt(sigma2)[:, None]
    values[:, n1:] += true_lfc[:, None]

    width = len(str(G))
    gene_ids = tuple(f"gene{g + 1:0{width}d}" for g in range(G))
    sample_ids = tuple([f"A{i + 1}" for i in range(n1)] + [f"B{i + 1}" for i in range(n2)])
    data = ExpressionSet(values=values, gene_ids=gene_ids, sample_ids=sample_ids)
    truth = SimTruth(sigma2=sigma2, de_flags=de_flags, outlier_flags=outlier_flags, true_lfc=true_lfc)
    return data, DesignMatrix.two_group(n1, n2), truth


@dataclass(frozen=True, eq=False)
class MethodOutcome:
    """Résultat d'un estimateur sur un jeu simulé"""

    method: str
    hyperprior: Hyperprior
    p_values: np.ndarray


def analyse_dataset(fit: GenewiseFit, robust: bool, spec: WinsorSpec = WinsorSpec(),
                    k: int = DEFAULT_NODES) -> MethodOutcome:
    """Hyperparamètres et p-valeurs t modérées du dernier coefficient"""
    hp = estimate_hyperprior(fit.s2, fit.df_residual, robust=robust, spec=spec, k=k)
    s2_post = squeeze_var(fit.s2, fit.df_residual, hp)
    _, p = moderated_t(fit, fit.beta_hat.shape[1] - 1, s2_post, fit.df_residual + hp.d0g)
    return MethodOutcome(METHODS[int(robust)], hp, np.asarray(p))


def _replicate(cfg: SimConfig, n_reps: int, task: Callable, processor: Optional[ParallelProcessor],
               progress: Optional[ProgressCallback]) -> List[Any]:
    """Exécute task(data, design, truth) sur n_reps jeux indépendants, dans l'ordre"""
    if n_reps < 1:
        raise ConfigError(f"n_reps={n_reps} doit être >= 1")
    seeds = np.random.SeedSequence(int(cfg.seed)).spawn(n_reps)
    lock = threading.Lock()

    def run(index: int):
        rng = np.random.Generator(np.random.PCG64(seeds[index]))
        data, design, truth = simulate_dataset(cfg, rng)
        result = task(data, design, truth)
        if progress is not None:
            with lock:
                progress(1)
        return result

    processor = processor or ParallelProcessor(max_workers=1)
    logger.info(f"Simulation: {n_reps} réplication(s) de {cfg.n_genes} gènes")
    return processor.map(run, range(n_reps))


def _both_methods(data: ExpressionSet, design: DesignMatrix, spec: WinsorSpec,
                  k: int) -> Dict[str, MethodOutcome]:
    fit = fit_all(data, design)
    return {method: analyse_dataset(fit, robust=(method == 'robust'), spec=spec, k=k)
            for method in METHODS}


def _mc_se(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else float('nan')


@dataclass
class Type1Result:
    """Taux de rejet moyens sous l'hypothèse nulle globale"""

    table: pd.DataFrame
    ks_pass_rate: Dict[str, float]
    config: SimConfig
    n_reps: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'evaluation': 'type1',
            'config': self.config.to_dict(),
            'n_reps': self.n_reps,
            'ks_level': KS_LEVEL,
            'ks_pass_rate': self.ks_pass_rate,
            'rows': self.table.to_dict(orient='records'),
        }


@timed()
def evaluate_type1(cfg: SimConfig, n_reps: int, cutoffs: Sequence[float] = TYPE1_CUTOFFS,
                   spec: WinsorSpec = WinsorSpec(), k: int = DEFAULT_NODES,
                   processor: Optional[ParallelProcessor] = None,
                   progress: Optional[ProgressCallback] = None) -> Type1Result:
    """
    Erreur de type I des deux estimateurs

    Pour chaque réplication, la proportion de gènes de p-valeur <= seuil
    est calculée, puis moyennée sur les réplications. Un test de
    Kolmogorov-Smirnov d'uniformité des p-valeurs (niveau 1 %) est
    appliqué à chaque réplication.

    Args:
        cfg: Configuration sans gène DE ni hypervariable
        n_reps: Nombre de réplications
        cutoffs: Seuils nominaux
        spec: Proportions winsorisées
        k: Noeuds de quadrature
        processor: Processeur parallèle
        progress: Rappel appelé après chaque réplication

    Returns:
        Type1Result
    """
    if cfg.n_de != 0 or cfg.n_outliers != 0:
        raise ConfigError("evaluate_type1: configuration nulle requise (n_de = n_outliers = 0)")
    cutoffs = np.asarray(cutoffs, dtype=float)
    if np.any((cutoffs <= 0) | (cutoffs > 1)):
        raise ConfigError("evaluate_type1: seuils dans ]0, 1] attendus")

    def task(data, design, truth):
        outcomes = _both_methods(data, design, spec, k)
        summary = {}
        for method, outcome in outcomes.items():
            p = outcome.p_values
            rates = np.array([np.mean(p <= c) for c in cutoffs])
            ks_pass = stats.kstest(p, 'uniform').pvalue > KS_LEVEL
            summary[method] = (rates, ks_pass)
        return summary

    results = _replicate(cfg, n_reps, task, processor, progress)
    rows = []
    ks_pass_rate = {}
    for method in METHODS:
        rates = np.array([r[method][0] for r in results])
        ks_pass_rate[method] = float(np.mean([r[method][1] for r in results]))
        for i, cutoff in enumerate(cutoffs):
            rows.append({'method': method, 'cutoff': float(cutoff),
                         'rejection_rate': float(rates[:, i].mean()),
                         'mc_se': _mc_se(rates[:, i])})
    logger.info(f"✓ Erreur de type I: {n_reps} réplication(s)")
    return Type1Result(pd.DataFrame(rows), ks_pass_rate, cfg, n_reps)


@dataclass
class PowerFdrResult:
    """Courbes de fausses découvertes et puissance aux seuils FDR"""

    curves: pd.DataFrame
    power: pd.DataFrame
    config: SimConfig
    n_reps: int

    def to_dict(self) -> Dict[str, Any]:
        false_at_top = {}
        for method, group in self.curves.groupby('method', sort=False):
            false_at_top[method] = float(group['false_discoveries'].iloc[-1])
        return {
            'evaluation': 'power',
            'config': self.config.to_dict(),
            'n_reps': self.n_reps,
            'top_n': int(self.curves['rank'].max()),
            'false_discoveries_at_top_n': false_at_top,
            'power': self.power.to_dict(orient='records'),
        }


@timed()
def evaluate_power_fdr(cfg: SimConfig, n_reps: int, fdr_cutoffs: Sequence[float] = FDR_CUTOFFS,
                       top_n: int = TOP_N, spec: WinsorSpec = WinsorSpec(), k: int = DEFAULT_NODES,
                       processor: Optional[ParallelProcessor] = None,
                       progress: Optional[ProgressCallback] = None) -> PowerFdrResult:
    """
    Fausses découvertes parmi les gènes les mieux classés et puissance

    Args:
        cfg: Configuration avec n_de > 0
        n_reps: Nombre de réplications
        fdr_cutoffs: Seuils FDR (Benjamini-Hochberg)
        top_n: Nombre de gènes classés suivis
        spec: Proportions winsorisées
        k: Noeuds de quadrature
        processor: Processeur parallèle
        progress: Rappel appelé après chaque réplication

    Returns:
        PowerFdrResult: courbe moyenne du nombre cumulé de fausses
        découvertes au rang 1..top_n, puissance et FDR réalisée moyennes
    """
    if cfg.n_de < 1:
        raise ConfigError("evaluate_power_fdr: n_de > 0 requis")
    depth = min(int(top_n), cfg.n_genes)
    cutoffs = np.asarray(fdr_cutoffs, dtype=float)

    def task(data, design, truth):
        outcomes = _both_methods(data, design, spec, k)
        summary = {}
        for method, outcome in outcomes.items():
            p = np.where(np.isnan(outcome.p_values), 1.0, outcome.p_values)
            order = np.argsort(p, kind='stable')[:depth]
            false_curve = np.cumsum(~truth.de_flags[order])
            fdr = bh_adjust(p)
            power, realized = [], []
            for c in cutoffs:
                selected = fdr <= c
                n_selected = int(selected.sum())
                power.append(np.sum(selected & truth.de_flags) / cfg.n_de)
                realized.append(np.sum(selected & ~truth.de_flags) / n_selected if n_selected else 0.0)
            summary[method] = (false_curve, np.array(power), np.array(realized))
        return summary

    results = _replicate(cfg, n_reps, task, processor, progress)
    curve_rows, power_rows = [], []
    ranks = np.arange(1, depth + 1)
    for method in METHODS:
        curves = np.array([r[method][0] for r in results], dtype=float)
        powers = np.array([r[method][1] for r in results])
        realized = np.array([r[method][2] for r in results])
        se = np.std(curves, axis=0, ddof=1) / np.sqrt(n_reps) if n_reps > 1 else np.full(depth, np.nan)
        curve_rows.append(pd.DataFrame({'method': method, 'rank': ranks,
                                        'false_discoveries': curves.mean(axis=0), 'mc_se': se}))
        for i, c in enumerate(cutoffs):
            power_rows.append({'method': method, 'fdr_cutoff': float(c),
                               'power': float(powers[:, i].mean()), 'power_se': _mc_se(powers[:, i]),
                               'realized_fdr': float(realized[:, i].mean())})
    logger.info(f"✓ Puissance et FDR: {n_reps} réplication(s)")
    return PowerFdrResult(pd.concat(curve_rows, ignore_index=True), pd.DataFrame(power_rows), cfg, n_reps)


@dataclass
class RecoveryResult:
    """Estimations des hyperparamètres par réplication et leurs résumés"""

    estimates: pd.DataFrame
    summary: pd.DataFrame
    config: SimConfig
    n_reps: int

    @property
    def robust_closer_fraction(self) -> float:
        """Proportion des réplications où d0 robuste est plus proche de la vérité"""
        wide = self.estimates.pivot(index='replication', columns='method', values='d0')
        truth = self.config.d0_true
        with np.errstate(invalid='ignore'):
            robust_err = np.abs(np.log(wide['robust'] / truth))
            standard_err = np.abs(np.log(wide['standard'] / truth))
        return float(np.mean(robust_err < standard_err))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'evaluation': 'recovery',
            'config': self.config.to_dict(),
            'n_reps': self.n_reps,
            'robust_closer_fraction': self.robust_closer_fraction,
            'summary': self.summary.to_dict(orient='records'),
        }


def five_number_summary(values) -> Dict[str, float]:
    """min, quartiles, médiane, max (valeurs infinies conservées)"""
    values = np.sort(np.asarray(values, dtype=float))
    q25, median, q75 = np.quantile(values, [0.25, 0.5, 0.75])
    return {'min': float(values[0]), 'q25': float(q25), 'median': float(median),
            'q75': float(q75), 'max': float(values[-1])}


@timed()
def evaluate_hyperparam_recovery(cfg: SimConfig, n_reps: int, spec: WinsorSpec = WinsorSpec(),
                                 k: int = DEFAULT_NODES, processor: Optional[ParallelProcessor] = None,
                                 progress: Optional[ProgressCallback] = None) -> RecoveryResult:
    """
    Distribution des estimations (d0, s0²) des deux estimateurs

    Args:
        cfg: Configuration
        n_reps: Nombre de réplications
        spec: Proportions winsorisées
        k: Noeuds de quadrature
        processor: Processeur parallèle
        progress: Rappel appelé après chaque réplication

    Returns:
        RecoveryResult
    """
    def task(data, design, truth):
        fit = fit_all(data, design)
        estimates = {}
        for method in METHODS:
            hp = estimate_hyperprior(fit.s2, fit.df_residual, robust=(method == 'robust'), spec=spec, k=k)
            estimates[method] = (hp.d0, hp.s02_scalar, hp.n_outliers)
        return estimates

    results = _replicate(cfg, n_reps, task, processor, progress)
    estimate_rows = [
        {'replication': i, 'method': method, 'd0': r[method][0], 's02': r[method][1],
         'n_outliers': r[method][2]}
        for i, r in enumerate(results) for method in METHODS
    ]
    estimates = pd.DataFrame(estimate_rows)
    summary_rows = []
    for method in METHODS:
        subset = estimates[estimates['method'] == method]
        for parameter, truth in (('d0', cfg.d0_true), ('s02', cfg.s02_true)):
            summary_rows.append({'method': method, 'parameter': parameter, 'truth': truth,
                                 **five_number_summary(subset[parameter])})
    logger.info(f"✓ Recouvrement des hyperparamètres: {n_reps} réplication(s)")
    return RecoveryResult(estimates, pd.DataFrame(summary_rows), cfg, n_reps)
