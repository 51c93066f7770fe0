"""
Module de performance pour robust-ebayes

Chronométrage des opérations et exécution parallèle ordonnée
(ajustements génomiques, réplications de simulation).
"""

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar
import logging

import psutil

logger = logging.getLogger(__name__)

# Types génériques
T = TypeVar('T')
F = TypeVar('F', bound=Callable)


class PerformanceMonitor:
    """
    Moniteur de performances: temps cumulés par opération
    """

    def __init__(self):
        self.operations: Dict[str, List[float]] = {}
        self._lock = threading.Lock()

    def start_operation(self, name: str) -> 'OperationTimer':
        """Démarre le chronométrage d'une opération"""
        return OperationTimer(self, name)

    def record_operation_time(self, name: str, duration: float):
        """Enregistre le temps d'une opération"""
        with self._lock:
            self.operations.setdefault(name, []).append(duration)

    def get_stats(self) -> Dict[str, Any]:
        """Retourne les statistiques par opération"""
        with self._lock:
            stats = {}
            for op_name, times in self.operations.items():
                if times:
                    stats[op_name] = {
                        'count': len(times),
                        'total_time': sum(times),
                        'avg_time': sum(times) / len(times),
                        'max_time': max(times),
                    }
            return stats

    def reset(self):
        """Remet à zéro les métriques"""
        with self._lock:
            self.operations.clear()


class OperationTimer:
    """Chronomètre d'opération avec contexte"""

    def __init__(self, monitor: PerformanceMonitor, operation_name: str):
        self.monitor = monitor
        self.operation_name = operation_name
        self.start_time = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start_time is not None:
            duration = time.perf_counter() - self.start_time
            self.monitor.record_operation_time(self.operation_name, duration)


class ParallelProcessor:
    """
    Processeur parallèle à résultats ordonnés

    Les résultats sont rendus dans l'ordre des entrées, quel que soit le
    nombre de workers: une exécution parallèle est identique à l'exécution
    séquentielle. Les tâches tournent sur des threads et peuvent être des
    fermetures locales.
    """

    def __init__(self, max_workers: Optional[int] = None):
        """
        Initialisation du processeur parallèle

        Args:
            max_workers: Nombre maximum de threads (défaut: nombre de CPU)
        """
        self.max_workers = max_workers or min(32, psutil.cpu_count() or 4)

    def map(self, func: Callable[[Any], T], items: Iterable[Any]) -> List[T]:
        """
        Applique une fonction à chaque élément

        Args:
            func: Fonction à appliquer
            items: Éléments à traiter

        Returns:
            Résultats dans l'ordre des éléments
        """
        items = list(items)
        if self.max_workers <= 1 or len(items) < 2:
            return [func(item) for item in items]

        workers = min(self.max_workers, len(items))
        logger.debug(f"Exécution parallèle: {len(items)} tâches sur {workers} threads")
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(func, items))


def timed(monitor: Optional[PerformanceMonitor] = None):
    """
    Décorateur pour mesurer le temps d'exécution

    Args:
        monitor: Moniteur de performance (défaut: moniteur global)
    """
    def decorator(func: F) -> F:
        @wraps(func)
        def wrapper(*args, **kwargs):
            target = monitor if monitor is not None else global_monitor
            operation_name = f"{func.__module__}.{func.__qualname__}"

            with target.start_operation(operation_name):
                return func(*args, **kwargs)

        return wrapper
    return decorator


# Moniteur global
global_monitor = PerformanceMonitor()
