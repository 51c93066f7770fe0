"""
Exceptions de robust-ebayes

Chaque classe porte le code de sortie utilisé par l'interface en ligne de commande.
"""

from typing import Optional


class RobustEBError(Exception):
    """Erreur de base du package"""

    exit_code = 1


class ConfigError(RobustEBError, ValueError):
    """Configuration ou option invalide"""

    exit_code = 2


class DomainError(RobustEBError, ValueError):
    """Argument hors du domaine d'une fonction numérique"""

    exit_code = 2


class DataError(RobustEBError, ValueError):
    """Données invalides (lecture, dimensions, rang du plan d'expérience)"""

    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = []
        if line is not None:
            location.append(f"ligne {line}")
        if column is not None:
            location.append(f"colonne {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class NumericalError(RobustEBError, ArithmeticError):
    """Échec numérique (valeur non finie, fonction de répartition défaillante)"""

    exit_code = 4
