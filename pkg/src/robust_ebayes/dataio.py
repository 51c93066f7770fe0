"""
Entrées/sorties TSV

Formats:
- expressions: en-tête, première colonne = identifiants des gènes, une
  colonne par échantillon; valeurs manquantes codées "NA";
- poids: même forme et mêmes identifiants que les expressions;
- plan d'expérience: en-tête, première colonne = identifiants des
  échantillons (dans l'ordre des colonnes d'expression), une colonne par
  coefficient.

Les tables écrites ont un ordre de colonnes fixe, 6 chiffres
significatifs, "NA" pour les valeurs absentes et des fins de ligne "\\n".
"""

import json
import logging
import os
import re
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import DataError
from .linmod.genewise import DesignMatrix, ExpressionSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

NA = "NA"

TOP_TABLE_COLUMNS = ('gene_id', 'logFC', 'AveExpr', 't', 'P.Value', 'adj.P.Val',
                     'df.total', 'df.prior', 's2.post')
F_TABLE_COLUMNS = ('gene_id', 'AveExpr', 'F', 'P.Value', 'adj.P.Val',
                   'df.total', 'df.prior', 's2.post')
OUTLIER_COLUMNS = ('gene_id', 's2', 'p.outlier', 'pi', 'df.prior', 'z.variance')

_PARSER_LINE = re.compile(r"line (\d+)")


def _read_raw(path: PathLike, what: str) -> pd.DataFrame:
    """Lit un TSV en chaînes, en-tête compris (ligne 0 = ligne 1 du fichier)"""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{what}: fichier introuvable: {path}")
    try:
        frame = pd.read_csv(path, sep='\t', header=None, dtype=str,
                            keep_default_na=False, na_filter=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"{what}: fichier vide: {path}")
    except pd.errors.ParserError as e:
        match = _PARSER_LINE.search(str(e))
        raise DataError(f"{what}: nombre de champs incohérent dans {path.name}",
                        line=int(match.group(1)) if match else None)
    except UnicodeDecodeError as e:
        raise DataError(f"{what}: encodage illisible ({e.reason})")

    if frame.shape[0] < 2:
        raise DataError(f"{what}: en-tête seul, aucune ligne de données")
    # lignes trop courtes: pandas complète par des valeurs manquantes
    short = frame.isna().to_numpy()
    if short.any():
        row, col = np.argwhere(short)[0]
        raise DataError(f"{what}: ligne incomplète", line=int(row) + 1, column=int(col) + 1)
    return frame.apply(lambda column: column.str.strip())


def _parse_numeric(cells: pd.DataFrame, what: str, allow_na: bool = True) -> np.ndarray:
    """
    Convertit un bloc de cellules en nombres

    Le bloc est la partie données du fichier (sans en-tête ni colonne
    d'identifiants): la cellule (i, j) est à la ligne i + 2, colonne j + 2.
    """
    missing = cells == NA
    numeric = cells.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=float)
    bad = (np.isnan(numeric) | np.isinf(numeric)) & ~missing.to_numpy()
    if not allow_na:
        bad |= missing.to_numpy()
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DataError(f"{what}: valeur non numérique ou non finie '{cells.iat[i, j]}'",
                        line=int(i) + 2, column=int(j) + 2)
    numeric[missing.to_numpy()] = np.nan
    return numeric


def _check_unique(values: Sequence[str], what: str, axis: str):
    seen = {}
    for position, value in enumerate(values):
        if value in seen:
            if axis == 'row':
                raise DataError(f"{what}: identifiant dupliqué '{value}'", line=position + 2, column=1)
            raise DataError(f"{what}: en-tête dupliqué '{value}'", line=1, column=position + 2)
        seen[value] = position


def read_expression(path: PathLike, weights_path: Optional[PathLike] = None) -> ExpressionSet:
    """
    Lit une matrice d'expression (et ses poids optionnels)

    Args:
        path: Fichier TSV des log-expressions
        weights_path: Fichier TSV des poids de précision (0 = observation retirée)

    Returns:
        ExpressionSet
    """
    frame = _read_raw(path, "Expressions")
    if frame.shape[1] < 3:
        raise DataError("Expressions: au moins 2 colonnes d'échantillons requises")
    sample_ids = list(frame.iloc[0, 1:])
    gene_ids = list(frame.iloc[1:, 0])
    _check_unique(sample_ids, "Expressions", 'column')
    _check_unique(gene_ids, "Expressions", 'row')
    values = _parse_numeric(frame.iloc[1:, 1:], "Expressions")

    weights = None
    if weights_path is not None:
        wframe = _read_raw(weights_path, "Poids")
        if wframe.shape != frame.shape:
            raise DataError(f"Poids: forme {wframe.shape[0] - 1}×{wframe.shape[1] - 1}, "
                            f"attendu {len(gene_ids)}×{len(sample_ids)}")
        mismatch = np.flatnonzero(wframe.iloc[1:, 0].to_numpy() != np.asarray(gene_ids))
        if mismatch.size:
            raise DataError("Poids: identifiants de gènes différents des expressions",
                            line=int(mismatch[0]) + 2, column=1)
        weights = _parse_numeric(wframe.iloc[1:, 1:], "Poids", allow_na=False)
        if np.any(weights < 0):
            i, j = np.argwhere(weights < 0)[0]
            raise DataError("Poids: valeur négative", line=int(i) + 2, column=int(j) + 2)

    logger.info(f"✓ Expressions lues: {len(gene_ids)} gènes × {len(sample_ids)} échantillons")
    return ExpressionSet(values=values, gene_ids=tuple(gene_ids), sample_ids=tuple(sample_ids),
                         weights=weights)


def read_design(path: PathLike, n_samples: int,
                sample_ids: Optional[Sequence[str]] = None) -> DesignMatrix:
    """
    Lit un plan d'expérience

    Args:
        path: Fichier TSV (une ligne par échantillon)
        n_samples: Nombre d'échantillons attendu
        sample_ids: Identifiants des colonnes d'expression (contrôle d'ordre)

    Returns:
        DesignMatrix
    """
    frame = _read_raw(path, "Plan d'expérience")
    if frame.shape[1] < 2:
        raise DataError("Plan d'expérience: au moins une colonne de coefficient requise")
    column_names = list(frame.iloc[0, 1:])
    _check_unique(column_names, "Plan d'expérience", 'column')
    rows = frame.shape[0] - 1
    if rows != n_samples:
        raise DataError(f"Plan d'expérience: {rows} lignes pour {n_samples} échantillons")
    X = _parse_numeric(frame.iloc[1:, 1:], "Plan d'expérience", allow_na=False)
    design_ids = list(frame.iloc[1:, 0])
    if sample_ids is not None and list(sample_ids) != design_ids:
        logger.warning("Identifiants du plan différents des colonnes d'expression: appariement par l'ordre")
    return DesignMatrix(X, tuple(column_names))


def format_value(value: Any) -> str:
    """Format fixe: 6 chiffres significatifs, NA, Inf"""
    if value is None:
        return NA
    if isinstance(value, str):
        return value
    value = float(value)
    if np.isnan(value):
        return NA
    if np.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return f"{value:.6g}"


def render_tsv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Table TSV terminée par un saut de ligne"""
    lines = ["\t".join(header)]
    lines.extend("\t".join(format_value(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def render_top_table(rows: Sequence) -> str:
    """Table des résultats (colonnes F si les lignes portent une statistique F)"""
    if rows and rows[0].F is not None:
        return render_tsv(F_TABLE_COLUMNS, (
            (r.gene_id, r.avg_expr, r.F, r.p_value, r.fdr, r.df_total, r.d0g, r.s2_post) for r in rows))
    return render_tsv(TOP_TABLE_COLUMNS, (
        (r.gene_id, r.logFC, r.avg_expr, r.t_mod, r.p_value, r.fdr, r.df_total, r.d0g, r.s2_post)
        for r in rows))


def render_frame(frame: pd.DataFrame) -> str:
    """DataFrame de simulation en TSV"""
    return frame.to_csv(sep='\t', index=False, float_format='%.6g', lineterminator='\n', na_rep=NA)


def json_safe(obj: Any) -> Any:
    """Convertit en types JSON stricts (NaN -> null, ±inf -> "Inf"/"-Inf")"""
    if isinstance(obj, Mapping):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "Inf" if value > 0 else "-Inf"
        return value
    return obj


def render_json(data: Mapping[str, Any]) -> str:
    return json.dumps(json_safe(data), indent=2, ensure_ascii=False) + "\n"


def atomic_write_text(path: PathLike, text: str):
    """Écrit un fichier via un fichier temporaire renommé en place"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(out_dir: PathLike, contents: Mapping[str, str]) -> Dict[str, Path]:
    """
    Écrit un ensemble de fichiers déjà rendus

    Tout le contenu est calculé avant le premier écrit: une erreur de
    calcul ne laisse aucun fichier partiel.
    """
    out_dir = Path(out_dir)
    written = {}
    for name, text in contents.items():
        target = out_dir / name
        atomic_write_text(target, text)
        written[name] = target
        logger.debug(f"Écrit: {target}")
    return written


def write_top_table(rows: Sequence, path: PathLike) -> Path:
    """Écrit la table des résultats"""
    atomic_write_text(path, render_top_table(rows))
    return Path(path)


def outlier_rows(gene_ids: Sequence[str], s2: np.ndarray, hp, z_variance: np.ndarray) -> Tuple:
    """Lignes des gènes hypervariables, triées par d0g croissant puis gene_id"""
    p_outlier = hp.diagnostics.get('outlier_p', np.full(hp.n_genes, np.nan))
    index = np.flatnonzero(hp.outlier_mask)
    index = sorted(index, key=lambda g: (hp.d0g[g], gene_ids[g]))
    return tuple((gene_ids[g], s2[g], p_outlier[g], hp.pi_g[g], hp.d0g[g], z_variance[g]) for g in index)


def render_outliers(gene_ids: Sequence[str], s2: np.ndarray, hp, z_variance: np.ndarray) -> str:
    return render_tsv(OUTLIER_COLUMNS, outlier_rows(gene_ids, s2, hp, z_variance))
