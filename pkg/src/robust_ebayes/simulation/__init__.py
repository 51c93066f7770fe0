"""
Module simulation - banc d'essai du modèle hiérarchique
"""

from .harness import (
    FDR_CUTOFFS,
    TYPE1_CUTOFFS,
    MethodOutcome,
    PowerFdrResult,
    RecoveryResult,
    SimConfig,
    SimTruth,
    Type1Result,
    analyse_dataset,
    evaluate_hyperparam_recovery,
    evaluate_power_fdr,
    evaluate_type1,
    five_number_summary,
    simulate_dataset,
)

__all__ = [
    'FDR_CUTOFFS',
    'TYPE1_CUTOFFS',
    'MethodOutcome',
    'PowerFdrResult',
    'RecoveryResult',
    'SimConfig',
    'SimTruth',
    'Type1Result',
    'analyse_dataset',
    'evaluate_hyperparam_recovery',
    'evaluate_power_fdr',
    'evaluate_type1',
    'five_number_summary',
    'simulate_dataset',
]
