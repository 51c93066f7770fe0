#!/usr/bin/env python3
"""
Interface en ligne de commande pour robust-ebayes

Codes de sortie: 0 succès, 1 erreur inattendue, 2 usage ou configuration,
3 données, 4 échec numérique.

Fichiers écrits par `fit` (répertoire --out):
  toptable.tsv  gene_id, logFC, AveExpr, t, P.Value, adj.P.Val, df.total,
                df.prior, s2.post (F à la place de logFC/t avec --coef A,B)
  summary.json  d0, s02 ou grille de tendance, d_outlier, n_outliers, n_below_d0, ...
  outliers.tsv  gene_id, s2, p.outlier, pi, df.prior, z.variance

Fichiers écrits par `simulate`:
  type1.tsv / type1.json                 method, cutoff, rejection_rate, mc_se
  power_curves.tsv                       method, rank, false_discoveries, mc_se
  power.tsv / power.json                 method, fdr_cutoff, power, power_se, realized_fdr
  recovery.tsv / recovery_estimates.tsv  method, parameter, truth, min, q25, median, q75, max
  recovery.json
"""

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import yaml
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from . import __version__
from .core import RobustEBSystem, RunConfig
from .dataio import atomic_write_text, format_value, render_frame, render_json, write_outputs
from .exceptions import ConfigError, RobustEBError
from .performance import ParallelProcessor, global_monitor
from .simulation.harness import (
    SimConfig, evaluate_hyperparam_recovery, evaluate_power_fdr, evaluate_type1,
)

# Console Rich pour une belle sortie
console = Console()
err_console = Console(stderr=True)

logger = logging.getLogger(__name__)

SIMULATION_KEY = 'simulation'


def _setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=verbose, rich_tracebacks=verbose)],
        force=True,
    )


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Charge un fichier de configuration JSON ou YAML

    Args:
        path: Chemin du fichier (.yaml/.yml pour YAML, sinon JSON)

    Returns:
        Dictionnaire de configuration
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            if Path(path).suffix.lower() in ('.yaml', '.yml'):
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Fichier de configuration introuvable: {path}")
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Fichier de configuration illisible: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("Le fichier de configuration doit contenir un dictionnaire")
    return data


def split_config(data: Dict[str, Any]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Sépare la section `simulation` du reste de la configuration"""
    data = dict(data)
    simulation = data.pop(SIMULATION_KEY, None) or {}
    if not isinstance(simulation, dict):
        raise ConfigError("La section 'simulation' doit être un dictionnaire")
    return data, simulation


def parse_tail_pair(value: str) -> Tuple[float, float]:
    """Lit 'L,U' (ou une valeur unique pour les deux queues)"""
    try:
        parts = [float(part) for part in value.split(',')]
    except ValueError:
        raise ConfigError(f"--winsor-tail-p: nombres attendus, reçu '{value}'")
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) != 2:
        raise ConfigError(f"--winsor-tail-p: une ou deux valeurs attendues, reçu '{value}'")
    return parts[0], parts[1]


def handle_errors(func):
    """Convertit les exceptions en message rouge et code de sortie"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return func(*args, **kwargs)
        except RobustEBError as e:
            console.print(f"[red]Erreur: {e}[/red]")
            if ctx.obj and ctx.obj.get('verbose'):
                logger.exception("Détails")
            sys.exit(e.exit_code)
        except KeyboardInterrupt:
            console.print("\n[yellow]Interrompu par l'utilisateur[/yellow]")
            sys.exit(1)
        except Exception as e:
            console.print(f"[red]Erreur inattendue: {e}[/red]")
            if ctx.obj and ctx.obj.get('verbose'):
                logger.exception("Détails")
            sys.exit(1)
    return wrapper


def _print_performance():
    stats = global_monitor.get_stats()
    if not stats:
        return
    table = Table(title="Temps d'exécution")
    table.add_column("Opération", style="cyan")
    table.add_column("Appels", justify="right")
    table.add_column("Total (s)", justify="right", style="magenta")
    for name, values in sorted(stats.items()):
        table.add_row(name.rsplit('.', 1)[-1], str(values['count']), f"{values['total_time']:.3f}")
    console.print(table)


@click.group()
@click.version_option(version=__version__)
@click.option('--config', type=click.Path(dir_okay=False),
              help='Fichier de configuration JSON ou YAML')
@click.option('--verbose', '-v', is_flag=True, help='Mode verbeux')
@click.pass_context
def cli(ctx, config, verbose):
    """robust-ebayes: Bayes empirique robuste pour l'expression différentielle

    Modération des variances génomiques (loi a priori estimée de façon
    robuste aux gènes hypervariables), statistiques t et F modérées et
    banc de simulation.
    """
    ctx.ensure_object(dict)
    _setup_logging(verbose)
    ctx.obj['verbose'] = verbose

    # Chargement de la configuration
    ctx.obj['config'] = {}
    if config:
        try:
            ctx.obj['config'] = load_config_file(config)
        except ConfigError as e:
            console.print(f"[red]Erreur de chargement de config: {e}[/red]")
            sys.exit(e.exit_code)


@cli.command()
@click.option('--expr', 'expr_path', type=click.Path(dir_okay=False), help="Fichier TSV d'expression")
@click.option('--design', 'design_path', type=click.Path(dir_okay=False), help="Fichier TSV du plan d'expérience")
@click.option('--weights', 'weights_path', type=click.Path(dir_okay=False), help='Fichier TSV des poids (optionnel)')
@click.option('--robust/--no-robust', default=None, help='Estimation robuste des hyperparamètres')
@click.option('--trend/--no-trend', default=None, help="Variance a priori dépendant de l'expression moyenne")
@click.option('--winsor-tail-p', type=str, help='Proportions winsorisées L,U (défaut 0.05,0.1)')
@click.option('--coef', type=str, help='Coefficient (nom ou index base 1); A,B pour un test F')
@click.option('--fdr', type=float, help='Ne garder que les gènes de FDR <= seuil')
@click.option('--span', type=float, help='Largeur de lissage de la tendance')
@click.option('--workers', type=int, help='Nombre de workers')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), help='Répertoire de sortie')
@click.pass_context
@handle_errors
def fit(ctx, expr_path, design_path, weights_path, robust, trend, winsor_tail_p, coef, fdr, span,
        workers, out_dir):
    """Ajuster les modèles et écrire la table des résultats"""

    settings, _ = split_config(ctx.obj['config'])
    overrides = {
        'expression': expr_path, 'design': design_path, 'weights': weights_path,
        'output': out_dir, 'robust': robust, 'trend': trend, 'coefficient': coef,
        'fdr_cutoff': fdr, 'trend_span': span, 'max_workers': workers,
        'winsor_tail_p': parse_tail_pair(winsor_tail_p) if winsor_tail_p else None,
    }
    settings.update({key: value for key, value in overrides.items() if value is not None})
    run = RunConfig.from_dict(settings)
    for key, option in (('expression', '--expr'), ('design', '--design'), ('output', '--out')):
        if not getattr(run, key):
            raise ConfigError(f"Option requise: {option}")

    system = RobustEBSystem(run.system_config())
    with console.status("[bold green]Analyse en cours...", spinner="dots"):
        result = system.run(run.expression, run.design, run.weights)
        written = system.write_outputs(result, run.output)

    summary = result['summary']
    table = Table(title="Résumé de l'ajustement")
    table.add_column("Métrique", style="cyan")
    table.add_column("Valeur", style="magenta")
    table.add_row("Gènes (utilisables)", f"{summary['n_genes']} ({summary['n_usable']})")
    table.add_row("Méthode", "robuste" if summary['robust'] else "standard")
    table.add_row("Degrés de liberté résiduels", ", ".join(format_value(d) for d in summary['df_residual']))
    table.add_row("d0", format_value(summary['d0']))
    table.add_row("s0²", "tendance" if summary['trend'] else format_value(summary['s02']))
    table.add_row("d_outlier", format_value(summary['d_outlier']))
    table.add_row("Gènes hypervariables", str(summary['n_outliers']))
    table.add_row(f"Gènes FDR <= {summary['fdr_cutoff']}", str(summary['n_significant']))
    console.print(table)

    rows = result['top_table'][:10]
    if rows:
        top = Table(title="Meilleurs gènes")
        statistic = 'F' if rows[0].F is not None else 't'
        for column in ('gene_id', statistic, 'P.Value', 'adj.P.Val'):
            top.add_column(column)
        for row in rows:
            value = row.F if statistic == 'F' else row.t_mod
            top.add_row(row.gene_id, format_value(value), format_value(row.p_value), format_value(row.fdr))
        console.print(top)

    for path in written.values():
        console.print(f"[green]✓ {path}[/green]")
    if ctx.obj['verbose']:
        _print_performance()


def _simulation_outputs(evaluations: List[str], cfg: SimConfig, reps: int,
                        processor: ParallelProcessor) -> Dict[str, str]:
    """Exécute les évaluations demandées et rend les fichiers en mémoire"""
    contents = {}
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                  BarColumn(), TextColumn("{task.completed}/{task.total}"), TimeElapsedColumn(),
                  console=console) as progress:
        for evaluation in evaluations:
            task = progress.add_task(f"Simulation {evaluation}...", total=reps)

            def advance(n: int, task=task):
                progress.update(task, advance=n)

            if evaluation == 'type1':
                result = evaluate_type1(cfg, reps, processor=processor, progress=advance)
                contents['type1.tsv'] = render_frame(result.table)
                contents['type1.json'] = render_json(result.to_dict())
            elif evaluation == 'power':
                result = evaluate_power_fdr(cfg, reps, processor=processor, progress=advance)
                contents['power_curves.tsv'] = render_frame(result.curves)
                contents['power.tsv'] = render_frame(result.power)
                contents['power.json'] = render_json(result.to_dict())
            else:
                result = evaluate_hyperparam_recovery(cfg, reps, processor=processor, progress=advance)
                contents['recovery.tsv'] = render_frame(result.summary)
                contents['recovery_estimates.tsv'] = render_frame(result.estimates)
                contents['recovery.json'] = render_json(result.to_dict())
    return contents


@cli.command()
@click.option('--d0', type=float, help='d0 vrai (inf autorisé)')
@click.option('--s02', type=float, help='s0² vrai')
@click.option('--genes', type=int, help='Nombre de gènes')
@click.option('--samples', type=int, help="Nombre d'échantillons (deux groupes)")
@click.option('--outliers', type=int, help='Nombre de gènes hypervariables')
@click.option('--d0-outlier', type=float, help='d0 des gènes hypervariables')
@click.option('--de', type=int, help='Nombre de gènes différentiellement exprimés')
@click.option('--lfc-sd', type=float, help='Écart-type des log fold changes')
@click.option('--reps', type=int, default=20, show_default=True, help='Nombre de réplications')
@click.option('--seed', type=int, help='Graine')
@click.option('--null', 'null_only', is_flag=True, help="Erreur de type I sous l'hypothèse nulle globale")
@click.option('--evaluation', '-e', type=click.Choice(['type1', 'power', 'recovery']), multiple=True,
              help='Évaluation(s) à produire')
@click.option('--workers', type=int, help='Nombre de workers')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True, help='Répertoire de sortie')
@click.pass_context
@handle_errors
def simulate(ctx, d0, s02, genes, samples, outliers, d0_outlier, de, lfc_sd, reps, seed, null_only,
             evaluation, workers, out_dir):
    """Simuler des jeux de données et comparer les estimateurs"""

    _, settings = split_config(ctx.obj['config'])
    overrides = {
        'd0_true': d0, 's02_true': s02, 'n_genes': genes, 'n_samples': samples,
        'n_outliers': outliers, 'd0_outlier_true': d0_outlier, 'n_de': de,
        'lfc_sd': lfc_sd, 'seed': seed,
    }
    settings = {**settings, **{key: value for key, value in overrides.items() if value is not None}}
    cfg = SimConfig.from_dict(settings)
    if reps < 1:
        raise ConfigError(f"--reps={reps} doit être >= 1")

    evaluations = list(dict.fromkeys(evaluation))
    if null_only:
        if cfg.n_de or cfg.n_outliers:
            raise ConfigError("--null est incompatible avec --de ou --outliers non nuls")
        if evaluations and evaluations != ['type1']:
            raise ConfigError("--null ne produit que l'évaluation type1")
        evaluations = ['type1']
    elif not evaluations:
        evaluations = ['power'] if cfg.n_de > 0 else ['recovery']

    processor = ParallelProcessor(max_workers=workers)
    contents = _simulation_outputs(evaluations, cfg, reps, processor)
    for path in write_outputs(out_dir, contents).values():
        console.print(f"[green]✓ {path}[/green]")
    if ctx.obj['verbose']:
        _print_performance()


def config_template() -> Dict[str, Any]:
    """Configuration par défaut, section simulation comprise"""
    template = {key: value for key, value in RobustEBSystem._default_config().items()}
    template['winsor_tail_p'] = list(template['winsor_tail_p'])
    template.update({'expression': 'expression.tsv', 'design': 'design.tsv', 'output': 'resultats'})
    template[SIMULATION_KEY] = SimConfig().to_dict()
    return template


@cli.command()
@click.option('--output', '-o', type=click.Path(dir_okay=False), default='robust-ebayes.yaml',
              show_default=True, help='Fichier de sortie pour le template (.yaml ou .json)')
@handle_errors
def init_config(output):
    """Générer un template de configuration"""

    template = config_template()
    if Path(output).suffix.lower() in ('.yaml', '.yml'):
        text = yaml.safe_dump(template, sort_keys=False, allow_unicode=True)
    else:
        text = json.dumps(template, indent=2, ensure_ascii=False) + "\n"
    atomic_write_text(output, text)
    console.print(f"[green]✓ Template de configuration créé: {output}[/green]")
    console.print(Panel(text, title="Template généré", border_style="blue"))


@cli.command()
@click.argument('config_file', type=click.Path(dir_okay=False))
@handle_errors
def check_config(config_file):
    """Valider un fichier de configuration"""

    settings, simulation = split_config(load_config_file(config_file))
    run = RunConfig.from_dict(settings)
    cfg = SimConfig.from_dict(simulation)

    table = Table(title="Configuration")
    table.add_column("Clé", style="cyan")
    table.add_column("Valeur", style="magenta")
    for key, value in vars(run).items():
        table.add_row(key, str(value))
    for key, value in cfg.to_dict().items():
        table.add_row(f"{SIMULATION_KEY}.{key}", str(value))
    console.print(table)
    console.print("[green]✓ Configuration valide[/green]")


def main():
    """Point d'entrée principal"""
    try:
        cli()
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrompu par l'utilisateur[/yellow]")
        sys.exit(1)


if __name__ == '__main__':
    main()
