"""
Quadrature de Gauss-Legendre et moments du log de la loi F winsorisée

Les noeuds et poids sont obtenus par la méthode de Golub-Welsch: valeurs
propres de la matrice de Jacobi tridiagonale des polynômes de Legendre.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import linalg

from ..exceptions import DomainError
from .specfun import f_logpdf, f_quantile, f_isf

logger = logging.getLogger(__name__)

DEFAULT_NODES = 128

# Écart minimal 1 − b du changement de variable u = f/(1+f)
UNIT_MIN_GAP = 1e-2


@dataclass(frozen=True)
class WinsorSpec:
    """Proportions winsorisées dans les queues basse et haute"""

    p_l: float = 0.05
    p_u: float = 0.10

    def __post_init__(self):
        for name, value in (('p_l', self.p_l), ('p_u', self.p_u)):
            if not (0.0 < value < 0.5):
                raise DomainError(f"WinsorSpec: {name}={value} doit être dans ]0, 0.5[")

    @classmethod
    def from_pair(cls, pair) -> 'WinsorSpec':
        """Construit depuis une paire (p_l, p_u) ou une valeur unique"""
        values = np.atleast_1d(np.asarray(pair, dtype=float))
        if values.size == 1:
            return cls(float(values[0]), float(values[0]))
        if values.size != 2:
            raise DomainError("WinsorSpec: une ou deux proportions attendues")
        return cls(float(values[0]), float(values[1]))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Règle de quadrature sur [a, b]"""

    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        """Approximation de l'intégrale de func sur [a, b]"""
        return float(np.dot(self.weights, func(self.nodes)))

    def expectation(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        """E{func(U)} pour U uniforme sur [a, b]"""
        return self.integrate(func) / (self.b - self.a)


@lru_cache(maxsize=32)
def _legendre_reference(k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Noeuds et poids sur [-1, 1] (Golub-Welsch)"""
    if k == 1:
        nodes, weights = np.array([0.0]), np.array([2.0])
    else:
        i = np.arange(1, k)
        off_diagonal = i / np.sqrt(4.0 * i * i - 1.0)
        nodes, vectors = linalg.eigh_tridiagonal(np.zeros(k), off_diagonal)
        weights = 2.0 * vectors[0, :] ** 2
        # symétrie exacte autour de 0
        nodes = 0.5 * (nodes - nodes[::-1])
        weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(k: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """
    Règle de Gauss-Legendre à k noeuds sur [a, b]

    Exacte pour les polynômes de degré <= 2k - 1.

    Args:
        k: Nombre de noeuds (>= 1)
        a: Borne inférieure (finie)
        b: Borne supérieure (finie, > a)

    Returns:
        QuadratureRule
    """
    if int(k) != k or k < 1:
        raise DomainError(f"gauss_legendre: k={k} doit être un entier >= 1")
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise DomainError(f"gauss_legendre: intervalle [{a}, {b}] invalide")

    ref_nodes, ref_weights = _legendre_reference(int(k))
    half = 0.5 * (b - a)
    nodes = half * ref_nodes + 0.5 * (a + b)
    weights = half * ref_weights
    return QuadratureRule(nodes=nodes, weights=weights, a=float(a), b=float(b))


def winsorized_quantiles(d_g: float, d0: float, spec: WinsorSpec) -> Tuple[float, float]:
    """Quantiles q_l (queue basse p_l) et q_u (queue haute p_u) de F(d_g, d0)"""
    return float(f_quantile(spec.p_l, d_g, d0)), float(f_isf(spec.p_u, d_g, d0))


def winsorized_logF_moments(d_g: float, d0: float, spec: WinsorSpec = WinsorSpec(),
                            k: int = DEFAULT_NODES, variable: str = 'unit') -> Tuple[float, float]:
    """
    Espérance ν et variance φ de log win(f), f ~ F(d_g, d0)

    La partie centrale (q_l < f < q_u) est intégrée par Gauss-Legendre.
    Avec variable='unit' (défaut), l'intégrale est prise sur u = f/(1+f),
    entre a = q_l/(1+q_l) et b = q_u/(1+q_u). Lorsque 1 − b < UNIT_MIN_GAP
    (d0 petit), la densité en u est presque singulière en b et l'intégrale
    est prise sur t = log f, comme avec variable='log'.

    Args:
        d_g: Degrés de liberté résiduels (> 0)
        d0: Degrés de liberté a priori (> 0, +inf autorisé)
        spec: Proportions winsorisées
        k: Nombre de noeuds (>= 16)
        variable: 'unit' ou 'log'

    Returns:
        (nu, phi)
    """
    if not isinstance(spec, WinsorSpec):
        raise DomainError("winsorized_logF_moments: spec doit être un WinsorSpec")
    if k < 16:
        raise DomainError(f"winsorized_logF_moments: k={k} doit être >= 16")
    if not (np.isfinite(d_g) and d_g > 0) or np.isnan(d0) or d0 <= 0:
        raise DomainError(f"winsorized_logF_moments: degrés de liberté invalides ({d_g}, {d0})")
    if variable not in ('unit', 'log'):
        raise DomainError(f"winsorized_logF_moments: variable inconnue '{variable}'")

    q_l, q_u = winsorized_quantiles(d_g, d0, spec)
    log_ql, log_qu = np.log(q_l), np.log(q_u)

    if variable == 'unit' and 1.0 / (1.0 + q_u) < UNIT_MIN_GAP:
        logger.debug(f"Quadrature en log f: q_u={q_u:.3g} trop proche de la borne du changement u")
        variable = 'log'

    if variable == 'log':
        rule = gauss_legendre(k, log_ql, log_qu)
        t = rule.nodes
        # densité de log f: pdf(e^t) e^t
        density = np.exp(f_logpdf(np.exp(t), d_g, d0) + t)
    else:
        rule = gauss_legendre(k, q_l / (1.0 + q_l), q_u / (1.0 + q_u))
        u = rule.nodes
        t = np.log(u / (1.0 - u))
        density = np.exp(f_logpdf(u / (1.0 - u), d_g, d0)) / (1.0 - u) ** 2

    nu = spec.p_l * log_ql + np.dot(rule.weights, t * density) + spec.p_u * log_qu
    phi = (spec.p_l * (log_ql - nu) ** 2
           + np.dot(rule.weights, (t - nu) ** 2 * density)
           + spec.p_u * (log_qu - nu) ** 2)
    return float(nu), float(phi)
