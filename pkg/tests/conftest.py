"""
Fixtures partagées des tests robust-ebayes
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from robust_ebayes.linmod import DesignMatrix, ExpressionSet
from robust_ebayes.simulation import SimConfig, simulate_dataset


def write_expression_tsv(path: Path, data: ExpressionSet, values=None):
    """Écrit une matrice d'expression au format d'entrée de la CLI"""
    values = data.values if values is None else values
    frame = pd.DataFrame(values, index=list(data.gene_ids), columns=list(data.sample_ids))
    frame.index.name = 'gene_id'
    frame.to_csv(path, sep='\t', na_rep='NA', float_format='%.10g')
    return path


def write_design_tsv(path: Path, design: DesignMatrix, sample_ids):
    frame = pd.DataFrame(design.X, index=list(sample_ids), columns=list(design.column_names))
    frame.index.name = 'sample'
    frame.to_csv(path, sep='\t', float_format='%g')
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cell_means_design():
    """Plan à deux groupes de 3, une colonne par groupe"""
    X = np.array([[1, 0]] * 3 + [[0, 1]] * 3, dtype=float)
    return DesignMatrix(X, ('A', 'B'))


@pytest.fixture
def small_sim():
    """Jeu simulé de 400 gènes × 6 échantillons avec gènes DE et hypervariables"""
    cfg = SimConfig(n_genes=400, n_samples=6, d0_true=4.0, s02_true=0.04,
                    n_outliers=10, n_de=40, lfc_sd=2.0, seed=7)
    return simulate_dataset(cfg)


@pytest.fixture
def tsv_inputs(tmp_path, small_sim):
    """Fichiers d'expression et de plan écrits dans un répertoire temporaire"""
    data, design, _ = small_sim
    expr = write_expression_tsv(tmp_path / 'expr.tsv', data)
    design_path = write_design_tsv(tmp_path / 'design.tsv', design, data.sample_ids)
    return expr, design_path
