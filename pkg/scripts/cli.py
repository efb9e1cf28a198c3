#!/usr/bin/env python3
"""
Interface en ligne de commande de bessopt
=========================================

Précédence des paramètres : options de la commande > fichier YAML > valeurs
par défaut du schéma. Chaque commande écrit ``config_snapshot.yaml`` dans son
répertoire de sortie ; ``--replay`` relance la commande à l'identique.

Codes de sortie : 0 succès, 1 erreur du domaine, 2 erreur d'usage.
"""

import functools
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import click
import numpy as np
import pandas as pd
from loguru import logger

from analytics.efficiency import characterize, fit_constant_eta
from analytics.experiments import SweepSpec, run_benchmark, run_sensitivity, write_benchmark, write_sweep
from analytics.metrics import energy_shortfall, fec_used, loss_decomposition, rte
from control.mpc import MpcConfig, mpc_run
from control.persist import save_run, write_json
from core.config import config
from core.errors import BessError, ConfigurationError, UndefinedMetricError
from core.loader import build_scenarios, build_system, override_config, read_config_file, read_snapshot, write_snapshot
from core.logs import setup_logging
from core.schema import SystemConfigFile
from core.system import Scenario, TimeGrid, apply_soh
from market.prices import PriceSeries, load_prices, synth_prices
from optim.lp import LpParams, lp_solve
from optim.nl import NlParams, nl_optimize, nl_verify
from plant.simulator import PlantState, ledger_frame, simulate, write_ledger

SNAPSHOT_FILE = "config_snapshot.yaml"

# Options de commande surchargeant la section mpc du YAML
MPC_FLAGS = {
    "days": "days",
    "horizon_h": "horizon_h",
    "action_min": "action_horizon_min",
    "opt_dt": "opt_dt_s",
    "sim_dt": "sim_dt_s",
    "fec_per_day": "fec_per_day",
    "eta": "eta",
    "eta_conv": "eta_conv",
    "terminal_soc": "terminal_soc",
}


def _floats(ctx, param, value: Optional[str]) -> Optional[List[float]]:
    """Liste de réels séparés par des virgules"""
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"liste de réels attendue, reçu '{value}'")


def common_options(func: Callable) -> Callable:
    """Options partagées par toutes les commandes"""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="Fichier YAML de l'installation (défaut : fichier livré)"),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     help="Répertoire de sortie"),
        click.option("--seed", type=int, default=None, help="Graine des prix synthétiques"),
        click.option("--workers", type=click.IntRange(min=1), default=None, help="Processus parallèles"),
        click.option("--json", "as_json", is_flag=True, help="Résumé JSON sur la sortie standard"),
        click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
                     default=None, help="Niveau de log"),
        click.option("--replay", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Instantané de configuration à rejouer"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def mpc_options(func: Callable) -> Callable:
    options = [
        click.option("--days", type=float, default=None, help="Durée du run [j]"),
        click.option("--horizon-h", type=float, default=None, help="Horizon d'optimisation [h]"),
        click.option("--action-min", type=float, default=None, help="Horizon d'action [min]"),
        click.option("--opt-dt", type=float, default=None, help="Pas d'optimisation [s]"),
        click.option("--sim-dt", type=float, default=None, help="Pas de simulation [s]"),
        click.option("--fec-per-day", type=float, default=None, help="Plafond journalier de cycles"),
        click.option("--eta", type=float, default=None, help="η du LP (ajusté si absent)"),
        click.option("--eta-conv", type=float, default=None, help="η_conv du NL (ajusté si absent)"),
        click.option("--terminal-soc/--no-terminal-soc", default=None, help="SOC final >= SOC initial"),
        click.option("--prices", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="CSV timestamp,price_eur_mwh (défaut : prix synthétiques)"),
        click.option("--soc0", type=click.FloatRange(0.0, 1.0), default=0.5, show_default=True, help="SOC initial"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _configure(cfg: SystemConfigFile, params: Dict[str, Any]) -> SystemConfigFile:
    """Application des options explicites sur la configuration du fichier"""
    cfg = override_config(cfg, "mpc", {MPC_FLAGS[k]: params.get(k) for k in MPC_FLAGS})
    cfg = override_config(cfg, "market", {"seed": params.get("seed"), "csv": params.get("prices")})
    return cfg


def _scenarios(cfg: SystemConfigFile, soh: Optional[Sequence[float]]) -> List[Scenario]:
    known = build_scenarios(cfg)
    if not soh:
        return known
    by_soh = {s.soh_r: s for s in known}
    return [by_soh.get(v, Scenario(v)) for v in soh]


def _price_series(cfg: SystemConfigFile, hours: Optional[float] = None) -> PriceSeries:
    """Prix au pas d'optimisation couvrant le run plus un horizon (ou ``hours``)"""
    mpc, market = cfg.mpc, cfg.market
    span_h = hours if hours is not None else mpc.days * 24.0 + mpc.horizon_h
    steps = int(round(span_h * 3600.0 / mpc.opt_dt_s))
    grid = TimeGrid(pd.Timestamp(market.start), mpc.opt_dt_s, steps)
    if market.csv:
        return load_prices(market.csv, grid)
    return synth_prices(market.seed, grid, market.base_eur_mwh, market.daily_amplitude_eur_mwh, market.noise_sd_eur_mwh)


def _mpc_config(cfg: SystemConfigFile, optimizer: str, r_factor: Optional[float] = None) -> MpcConfig:
    return MpcConfig.from_section(cfg.mpc, optimizer, r_factor=r_factor)


def _emit(summary: Dict[str, Any], as_json: bool, lines: Sequence[str]) -> None:
    if as_json:
        click.echo(json.dumps(summary, sort_keys=True, indent=2, ensure_ascii=False))
    else:
        for line in lines:
            click.echo(line)


def command(name: str):
    """
    Enveloppe commune : logging, configuration, rejeu et instantané

    La fonction décorée reçoit (cfg, params, out_dir, workers) et renvoie
    (résumé, lignes lisibles).
    """
    def decorator(runner: Callable) -> Callable:
        @functools.wraps(runner)
        def wrapper(config_path, out_dir, seed, workers, as_json, log_level, replay, **params):
            setup_logging(log_level or config.log_level, config.log_file)
            params = {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()}
            params["seed"] = seed

            if replay:
                cfg, run = read_snapshot(replay)
                if run.get("command") != name:
                    raise ConfigurationError(f"instantané de la commande '{run.get('command')}', pas '{name}'")
                params = dict(run.get("params", {}))
                logger.info(f"Rejeu de {replay}")
            else:
                cfg = _configure(read_config_file(config_path or config.system_config), params)

            out = Path(out_dir) if out_dir else config.output_dir / name
            out.mkdir(parents=True, exist_ok=True)
            write_snapshot(out / SNAPSHOT_FILE, cfg, {"command": name, "params": params})

            summary, lines = runner(cfg, params, out, workers or config.workers)
            _emit(summary, as_json, lines)
            logger.success(f"✅ {name} terminé, sorties dans {out}")
        return wrapper
    return decorator


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(config.version, prog_name="bessopt")
def cli():
    """bessopt - planification et commande prédictive de stockage par batterie"""


@cli.command("characterize")
@click.option("--soh", callback=_floats, default=None, help="SOH_R, ex. 1.0,2.0,3.0")
@click.option("--soc", "soc_grid", callback=_floats, default="0.1,0.5,0.9", show_default=True, help="SOC de la carte")
@common_options
@command("characterize")
def characterize_cmd(cfg, params, out, workers):
    """Carte de rendement système / batterie / onduleur en décharge"""
    spec = build_system(cfg)
    frames, summary, lines = [], {"scenarios": []}, []
    for scenario in _scenarios(cfg, params.get("soh")):
        efficiency_map = characterize(spec, scenario, params["soc_grid"])
        frames.append(efficiency_map.to_frame().assign(scenario=scenario.label, soh_r=scenario.soh_r))
        entry = {"scenario": scenario.label, "soh_r": scenario.soh_r}
        if np.any(np.isclose(efficiency_map.soc_grid, 0.5)):
            entry["eta"] = fit_constant_eta(efficiency_map, include_battery=True)
            entry["eta_conv"] = fit_constant_eta(efficiency_map, include_battery=False)
            lines.append(f"📈 {scenario.label}: η = {entry['eta']:.4f}, η_conv = {entry['eta_conv']:.4f}")
        summary["scenarios"].append(entry)

    pd.concat(frames, ignore_index=True).to_csv(out / "efficiency_map.csv", index=False, float_format="%.17g")
    write_json(out / "summary.json", summary)
    return summary, lines


@cli.command("fit")
@click.option("--soh", callback=_floats, default=None, help="SOH_R, ex. 1.0,2.0,3.0")
@common_options
@command("fit")
def fit_cmd(cfg, params, out, workers):
    """Rendements constants ajustés à SOC 50 % (η système et η_conv)"""
    spec = build_system(cfg)
    rows = []
    for scenario in _scenarios(cfg, params.get("soh")):
        efficiency_map = characterize(spec, scenario, (0.5,))
        rows.append({
            "scenario": scenario.label,
            "soh_r": scenario.soh_r,
            "eta": fit_constant_eta(efficiency_map, include_battery=True),
            "eta_conv": fit_constant_eta(efficiency_map, include_battery=False),
        })
    pd.DataFrame(rows).to_csv(out / "fits.csv", index=False, float_format="%.17g")
    summary = {"fits": rows}
    write_json(out / "summary.json", summary)
    return summary, [f"📈 {r['scenario']}: η = {r['eta']:.4f}, η_conv = {r['eta_conv']:.4f}" for r in rows]


@cli.command("optimize")
@click.option("--optimizer", type=click.Choice(["lp", "nl"]), default="lp", show_default=True)
@click.option("--soh", type=float, default=1.0, show_default=True, help="SOH_R du scénario")
@click.option("--hours", type=float, default=None, help="Longueur du plan [h] (défaut : horizon MPC)")
@click.option("--r-factor", type=float, default=1.0, show_default=True, help="Facteur de résistance du modèle NL")
@click.option("--fec", type=float, default=None, help="Budget de cycles du plan (défaut : prorata journalier)")
@click.option("--debug-dump", is_flag=True, help="Modèle LP ou trace NL dans le répertoire de sortie")
@mpc_options
@common_options
@command("optimize")
def optimize_cmd(cfg, params, out, workers):
    """Un plan optimal sur un horizon, sans boucle fermée"""
    spec = build_system(cfg)
    scenario = _scenarios(cfg, [params["soh"]])[0]
    aged = apply_soh(spec, scenario)
    hours = params.get("hours") or cfg.mpc.horizon_h
    prices = _price_series(cfg, hours)
    fec = params.get("fec")
    fec = cfg.mpc.fec_per_day * hours / 24.0 if fec is None else fec
    mpc = _mpc_config(cfg, params["optimizer"])
    soc0 = params["soc0"]

    summary: Dict[str, Any] = {"optimizer": params["optimizer"], "scenario": scenario.label, "fec_budget": fec}
    if params["optimizer"] == "lp":
        eta = mpc.eta if mpc.eta is not None else fit_constant_eta(characterize(spec, scenario, (0.5,)))
        lp_params = LpParams.from_system(aged, eta=eta, dt=mpc.opt_dt, fec_budget=fec)
        solution = lp_solve(lp_params, prices, soc0, debug_path=out / "lp_model.txt" if params["debug_dump"] else None)
        schedule = solution.schedule
        summary.update(eta=eta, iterations=solution.iterations, projections=solution.projections)
    else:
        eta_conv = mpc.eta_conv
        if eta_conv is None:
            eta_conv = fit_constant_eta(characterize(spec, scenario, (0.5,)), include_battery=False)
        nl_params = NlParams.from_system(aged, eta_conv=eta_conv, dt=mpc.opt_dt, fec_budget=fec,
                                         r_factor=params["r_factor"])
        solution = nl_optimize(nl_params, prices, soc0, trace_path=out / "nl_trace.csv" if params["debug_dump"] else None)
        report = nl_verify(nl_params, solution, soc0)
        schedule = solution.schedule
        summary.update(eta_conv=eta_conv, iterations=solution.iterations, degraded=solution.degraded,
                       kkt_residual=solution.kkt_residual, max_residual=report.max_residual)

    frame = pd.DataFrame({
        "timestamp": schedule.grid.timestamps().strftime("%Y-%m-%dT%H:%M:%S"),
        "price_eur_mwh": prices.prices,
        "p_ac_w": schedule.p_ac,
        "soc_pred": schedule.soc_pred,
    })
    frame.to_csv(out / "schedule.csv", index=False, float_format="%.17g")
    summary.update(objective_eur=schedule.objective_value, revenue_eur=-schedule.objective_value)
    write_json(out / "summary.json", summary)
    return summary, [f"💶 Recette planifiée {-schedule.objective_value:.2f} € sur {hours:g} h"]


@cli.command("simulate")
@click.option("--soh", type=float, default=1.0, show_default=True, help="SOH_R du scénario")
@click.option("--targets", type=click.Path(exists=True, dir_okay=False), default=None,
              help="CSV avec une colonne p_ac_w (défaut : créneaux ±power)")
@click.option("--power", type=float, default=90000.0, show_default=True, help="Amplitude des créneaux [W]")
@click.option("--period-min", type=float, default=120.0, show_default=True, help="Durée d'un créneau [min]")
@click.option("--dt", type=float, default=60.0, show_default=True, help="Pas de simulation [s]")
@mpc_options
@common_options
@command("simulate")
def simulate_cmd(cfg, params, out, workers):
    """Exécution d'une suite de consignes AC sur l'installation simulée"""
    spec = build_system(cfg)
    scenario = _scenarios(cfg, [params["soh"]])[0]
    dt = params["dt"]
    if params.get("targets"):
        targets = pd.read_csv(params["targets"], float_precision="round_trip")["p_ac_w"].to_numpy(dtype=float)
    else:
        days = params.get("days") or cfg.mpc.days
        n = int(round(days * 86400.0 / dt))
        block = max(int(round(params["period_min"] * 60.0 / dt)), 1)
        targets = np.where((np.arange(n) // block) % 2 == 0, 1.0, -1.0) * params["power"]

    state0 = PlantState(soc=params["soc0"], clock=pd.Timestamp(cfg.market.start))
    results, final = simulate(apply_soh(spec, scenario), state0, targets, dt)
    ledger = ledger_frame(results)
    write_ledger(ledger, out / "ledger.csv")

    losses = loss_decomposition(ledger)
    try:
        run_rte: Optional[float] = rte(ledger, spec.e_nom)
    except UndefinedMetricError:
        run_rte = None
    summary = {
        "scenario": scenario.label,
        "rte": run_rte,
        "e_imb_wh": energy_shortfall(ledger),
        "fec_used": fec_used(ledger, spec.e_nom),
        "loss_battery_wh": losses.battery_wh,
        "loss_converter_wh": losses.converter_wh,
        "soc_end": final.soc,
    }
    write_json(out / "summary.json", summary)
    rte_text = "indéfini" if run_rte is None else f"{run_rte:.4f}"
    return summary, [f"🔋 {len(results)} pas simulés, RTE {rte_text}, SOC final {final.soc:.4f}"]


@cli.command("mpc-run")
@click.option("--optimizer", type=click.Choice(["lp", "nl"]), default="lp", show_default=True)
@click.option("--soh", type=float, default=1.0, show_default=True, help="SOH_R du scénario")
@click.option("--r-factor", type=float, default=1.0, show_default=True, help="Facteur de résistance du modèle NL")
@mpc_options
@common_options
@command("mpc-run")
def mpc_run_cmd(cfg, params, out, workers):
    """Run MPC en boucle fermée sur un scénario"""
    spec = build_system(cfg)
    scenario = _scenarios(cfg, [params["soh"]])[0]
    mpc = _mpc_config(cfg, params["optimizer"], params["r_factor"])
    result = mpc_run(mpc, spec, scenario, _price_series(cfg), params["soc0"])
    save_run(result, out, cfg, {"command": "mpc-run", "params": params})
    summary = result.summary.model_dump(mode="json")
    return summary, [
        f"💶 Recette {result.revenue:.2f} €",
        f"🔁 RTE {result.rte if result.rte is None else round(result.rte, 4)}",
        f"⚖️  E_imb {result.e_imb / 1000:.3f} kWh, {result.fec_used:.2f} cycles",
    ]


@cli.command("benchmark")
@click.option("--soh", callback=_floats, default=None, help="SOH_R, ex. 1.0,2.0,3.0 (défaut : scénarios du YAML)")
@mpc_options
@common_options
@command("benchmark")
def benchmark_cmd(cfg, params, out, workers):
    """LP et NL sur tous les scénarios"""
    spec = build_system(cfg)
    scenarios = _scenarios(cfg, params.get("soh"))
    result = run_benchmark(
        spec, scenarios, _price_series(cfg), _mpc_config(cfg, "lp"),
        soc0=params["soc0"], workers=workers, seed=cfg.market.seed,
    )
    write_benchmark(result, out, cfg, {"command": "benchmark", "params": params})
    summary = result.summary.model_dump(mode="json")
    lines = [
        f"📊 {c.optimizer.upper()} {c.scenario}: {c.revenue_eur:.2f} €, "
        f"RTE {c.rte if c.rte is None else round(c.rte, 4)}, E_imb {c.e_imb_wh / 1000:.3f} kWh"
        for c in result.cells
    ]
    return summary, lines


@cli.command("sweep")
@click.option("--kind", type=click.Choice(["lp-eta", "nl-r-factor"]), required=True)
@click.option("--values", callback=_floats, required=True, help="Valeurs balayées, ex. 0.5,0.75,1.25,1.5")
@click.option("--soh", type=float, default=3.0, show_default=True, help="SOH_R du scénario")
@mpc_options
@common_options
@command("sweep")
def sweep_cmd(cfg, params, out, workers):
    """Sensibilité au η du LP ou à la résistance du modèle NL"""
    spec = build_system(cfg)
    scenario = _scenarios(cfg, [params["soh"]])[0]
    sweep = SweepSpec(params["kind"], tuple(params["values"]), scenario)
    result = run_sensitivity(spec, sweep, _price_series(cfg), _mpc_config(cfg, sweep.optimizer),
                             soc0=params["soc0"], workers=workers)
    write_sweep(result, out, cfg, {"command": "sweep", "params": params})
    summary = {"points": [p.model_dump(mode="json") for p in result.points]}
    lines = [
        f"📉 {p.kind}={p.value:.4g}: Δ recette {p.delta_revenue_eur:+.2f} €, Δ E_imb {p.delta_e_imb_wh / 1000:+.3f} kWh"
        for p in result.points
    ]
    return summary, lines


@cli.command("prices")
@click.option("--input", "source", type=click.Path(exists=True, dir_okay=False), default=None,
              help="CSV à rééchantillonner (défaut : série synthétique)")
@click.option("--dt", type=float, default=None, help="Pas de sortie [s] (défaut : pas d'optimisation)")
@click.option("--days", type=float, default=None, help="Durée [j]")
@common_options
@command("prices")
def prices_cmd(cfg, params, out, workers):
    """Écriture d'une série de prix (synthétique ou rééchantillonnée)"""
    days = params.get("days") or cfg.mpc.days
    dt = params.get("dt") or cfg.mpc.opt_dt_s
    grid = TimeGrid(pd.Timestamp(cfg.market.start), dt, int(round(days * 86400.0 / dt)))
    market = cfg.market
    if params.get("source"):
        series = load_prices(params["source"], grid)
    else:
        series = synth_prices(market.seed, grid, market.base_eur_mwh, market.daily_amplitude_eur_mwh,
                              market.noise_sd_eur_mwh)
    series.to_csv(out / "prices.csv")
    summary = {
        "steps": grid.n_steps,
        "dt_s": dt,
        "mean_eur_mwh": series.time_weighted_mean(),
        "min_eur_mwh": float(np.min(series.prices)),
        "max_eur_mwh": float(np.max(series.prices)),
    }
    write_json(out / "summary.json", summary)
    return summary, [f"💹 {grid.n_steps} prix écrits, moyenne {summary['mean_eur_mwh']:.2f} €/MWh"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Point d'entrée : renvoie le code de sortie"""
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="bessopt", standalone_mode=False)
        return 0
    except click.UsageError as e:
        e.show()
        return 2
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        logger.error("🛑 Interrompu")
        return 1
    except BessError as e:
        field = getattr(e, "field", None)
        logger.error(f"❌ {type(e).__name__}: {e}" + (f" (champ {field})" if field else ""))
        return 1


if __name__ == "__main__":
    sys.exit(main())
