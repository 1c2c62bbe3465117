"""Command-line entry point wiring the pipeline stages together.

    video-r4 <subcommand> --config <path> [--seed N] [--out DIR]

Exit status: 0 success, 1 input or validation error, 2 internal error.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .captioner import make_captioner
from .config import PipelineConfig, load_config
from .corpus import load_corpus, read_jsonl, write_jsonl
from .errors import InputError
from .matching import (estimate_difficulty, evidence_from_json, evidence_to_json,
                       match_question)
from .metrics import evaluate, report_to_json, report_to_table
from .qc import ReviewStore, make_app
from .trajectory import (fill_placeholders, render_trajectory,
                         trajectory_from_json, trajectory_to_json,
                         validate_trajectory)
from .training.curriculum import (NAMED_PLANS, plan_from_json, run_schedule,
                                  save_checkpoint, schedule_report_to_json)
from .training.synthetic import SyntheticTask, SyntheticTaskConfig


def _prepare(config_path, out_dir) -> PipelineConfig:
    cfg = load_config(config_path)
    if out_dir:
        cfg = dataclasses.replace(cfg, out_dir=Path(out_dir))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg


def _load_evidence(cfg: PipelineConfig) -> list:
    path = cfg.out_dir / "evidence.jsonl"
    if not path.exists():
        raise InputError(f"missing {path}; run the match step first")
    return [evidence_from_json(raw) for raw in read_jsonl(path)]


def _load_trajectories(cfg: PipelineConfig, path: Path | None = None) -> list:
    path = path or cfg.qc_path("trajectories", "trajectories.jsonl")
    if not path.exists():
        raise InputError(f"missing trajectory file {path}")
    return [trajectory_from_json(raw) for raw in read_jsonl(path)]


def _build_store(cfg: PipelineConfig) -> ReviewStore:
    corpus = load_corpus(cfg.corpus_dir)
    evidence = {e.instance_id: e for e in _load_evidence(cfg)}
    trajectories = _load_trajectories(cfg)
    log_path = cfg.qc_path("decision_log", "qc_decisions.jsonl")
    return ReviewStore(corpus, trajectories, evidence, log_path)


@click.group()
def cli():
    """Video QA toolkit: evidence matching, trajectory synthesis, toy
    policy optimization, metrics, and review tooling."""


_config_opt = click.option("--config", "config_path", type=click.Path(),
                           default=None, help="Pipeline config file (YAML).")
_out_opt = click.option("--out", "out_dir", type=click.Path(), default=None,
                        help="Output directory (overrides config).")
_seed_opt = click.option("--seed", type=int, default=None,
                         help="Random seed (overrides config).")


@cli.command()
@_config_opt
@_out_opt
def match(config_path, out_dir):
    """Extract evidence records for every instance."""
    cfg = _prepare(config_path, out_dir)
    corpus = load_corpus(cfg.corpus_dir)
    if not corpus.instances:
        raise InputError(f"{cfg.corpus_dir}/instances.jsonl has no instances")
    lo, hi = cfg.matcher.difficulty_band
    records = []
    matched = unmatched = rl_kept = rl_dropped = 0
    for inst in corpus.instances:
        rec = match_question(inst, corpus, cfg.matcher)
        records.append(evidence_to_json(rec))
        if rec.matched:
            matched += 1
        else:
            unmatched += 1
            if lo <= estimate_difficulty(inst, corpus) <= hi:
                rl_kept += 1
            else:
                rl_dropped += 1
    write_jsonl(cfg.out_dir / "evidence.jsonl", records)
    click.echo(f"matched={matched} unmatched={unmatched} "
               f"rl_kept={rl_kept} rl_dropped={rl_dropped}")


@cli.command()
@_config_opt
@_out_opt
def synthesize(config_path, out_dir):
    """Render and fill trajectories for matched instances; quarantine
    anything that fails validation."""
    cfg = _prepare(config_path, out_dir)
    corpus = load_corpus(cfg.corpus_dir)
    evidence = {e.instance_id: e for e in _load_evidence(cfg)}
    client = make_captioner(cfg.captioner["kind"], cfg.captioner["base_url"],
                            cfg.captioner["timeout"])
    template_id = cfg.synthesis["template_id"]
    valid_rows, quarantined = [], []
    for inst in corpus.instances:
        ev = evidence.get(inst.id)
        if ev is None or not ev.matched:
            continue
        video = corpus.video_for(inst)
        traj = render_trajectory(ev, inst, template_id)
        traj = fill_placeholders(traj, client, video)
        report = validate_trajectory(traj, corpus, ev)
        if report.valid:
            valid_rows.append(trajectory_to_json(traj))
        else:
            quarantined.append({
                "trajectory": trajectory_to_json(traj),
                "violations": [{"code": v.code, "turn_index": v.turn_index,
                                "message": v.message} for v in report.violations]})
    write_jsonl(cfg.out_dir / "trajectories.jsonl", valid_rows)
    write_jsonl(cfg.out_dir / "quarantine.jsonl", quarantined)
    click.echo(f"synthesized={len(valid_rows)} quarantined={len(quarantined)}")


@cli.command()
@_config_opt
@_out_opt
@click.option("--trajectories", "traj_path", type=click.Path(), default=None,
              help="Trajectory file to validate (default: <out>/trajectories.jsonl).")
def validate(config_path, out_dir, traj_path):
    """Re-validate a trajectory file against corpus and evidence."""
    cfg = _prepare(config_path, out_dir)
    corpus = load_corpus(cfg.corpus_dir)
    evidence = {e.instance_id: e for e in _load_evidence(cfg)}
    trajectories = _load_trajectories(cfg, Path(traj_path) if traj_path else None)
    results = []
    invalid = 0
    for traj in trajectories:
        ev = evidence.get(traj.instance_id)
        if ev is None:
            raise InputError(f"trajectory {traj.id}: no evidence for {traj.instance_id}")
        report = validate_trajectory(traj, corpus, ev)
        invalid += not report.valid
        results.append({"id": traj.id, "valid": report.valid,
                        "violations": [{"code": v.code, "turn_index": v.turn_index,
                                        "message": v.message}
                                       for v in report.violations]})
    out_path = cfg.out_dir / "validation_report.json"
    out_path.write_text(json.dumps({"results": results}, indent=2) + "\n")
    click.echo(f"valid={len(results) - invalid} invalid={invalid}")


@cli.command()
@_config_opt
@_out_opt
@_seed_opt
def train(config_path, out_dir, seed):
    """Run the staged curriculum on the synthetic planted-word task."""
    cfg = _prepare(config_path, out_dir)
    tcfg = cfg.train
    task = SyntheticTask(SyntheticTaskConfig(**tcfg["task"]))
    run_seed = seed if seed is not None else int(tcfg["seed"])
    budgets = dict(sft_steps=int(tcfg["sft_steps"]), rl_steps=int(tcfg["rl_steps"]),
                   sft_lr=float(tcfg["sft_lr"]), rl_lr=float(tcfg["rl_lr"]))
    plans = []
    if tcfg.get("schedule_file"):
        raw = json.loads(Path(tcfg["schedule_file"]).read_text())
        plans.append(plan_from_json(raw))
    else:
        for name in tcfg["plans"]:
            factory = NAMED_PLANS.get(name)
            if factory is None:
                raise InputError(f"unknown plan {name!r}; expected one of "
                                 f"{sorted(NAMED_PLANS)}")
            kwargs = budgets if name != "crp_only" else {
                "sft_steps": budgets["sft_steps"], "sft_lr": budgets["sft_lr"]}
            plans.append(factory(**kwargs))
    ckpt_dir = cfg.out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    plan_reports = []
    for plan in plans:
        policy, report = run_schedule(plan, task, cfg.rewards, cfg.grpo,
                                      seed=run_seed)
        total_steps = sum(s.steps for s in plan.stages)
        save_checkpoint(ckpt_dir / f"{plan.name}.ckpt", policy,
                        stage=plan.stages[-1].name, step=total_steps,
                        seed=run_seed)
        plan_reports.append(schedule_report_to_json(report))
        ev = report.final_eval
        click.echo(f"plan={plan.name} final_mean_reward={ev['mean_reward']:.4f} "
                   f"em={ev['em']:.4f}")
    payload = {"seed": run_seed, "config_hash": cfg.config_hash,
               "kl_reference": "stage_initial", "plans": plan_reports}
    (cfg.out_dir / "schedule_report.json").write_text(
        json.dumps(payload, indent=2) + "\n")


@cli.command(name="eval")
@_config_opt
@_out_opt
@click.option("--predictions", "pred_path", type=click.Path(), default=None,
              help="Predictions file (default: <out>/predictions.jsonl).")
def eval_cmd(config_path, out_dir, pred_path):
    """Score predictions against gold answers."""
    cfg = _prepare(config_path, out_dir)
    corpus = load_corpus(cfg.corpus_dir)
    golds = {inst.id: inst.answers for inst in corpus.instances}
    path = Path(pred_path) if pred_path else cfg.out_dir / "predictions.jsonl"
    if not path.exists():
        raise InputError(f"missing predictions file {path}")
    entries = []
    for raw in read_jsonl(path):
        qid = raw.get("id")
        if qid not in golds:
            raise InputError(f"prediction for unknown instance {qid!r}")
        entries.append((qid, str(raw.get("prediction", "")), golds[qid]))
    report = evaluate(entries)
    payload = report_to_json(report)
    payload["config_hash"] = cfg.config_hash
    payload["normalization"] = ("lowercase, trim, collapse whitespace; "
                                "token bags additionally strip punctuation")
    (cfg.out_dir / "metric_report.json").write_text(
        json.dumps(payload, indent=2) + "\n")
    table = (f"# normalization: {payload['normalization']}\n"
             + report_to_table(report))
    (cfg.out_dir / "metric_report.txt").write_text(table + "\n")
    click.echo(table)


@cli.command(name="qc-serve")
@_config_opt
@_out_opt
def qc_serve(config_path, out_dir):
    """Serve the review workflow over HTTP."""
    import uvicorn

    cfg = _prepare(config_path, out_dir)
    store = _build_store(cfg)
    app = make_app(store)
    click.echo(f"serving {len(store.items)} items on "
               f"{cfg.qc['host']}:{cfg.qc['port']}")
    uvicorn.run(app, host=cfg.qc["host"], port=int(cfg.qc["port"]),
                log_level="warning")


@cli.command(name="qc-export")
@_config_opt
@_out_opt
def qc_export(config_path, out_dir):
    """Export curated (accepted + edited) trajectories plus a manifest."""
    cfg = _prepare(config_path, out_dir)
    store = _build_store(cfg)
    path = cfg.qc_path("export_path", "curated.jsonl")
    manifest = store.export(path)
    click.echo(json.dumps(manifest, sort_keys=True))


@cli.command()
@_config_opt
@_out_opt
def report(config_path, out_dir):
    """Render figures and a delimited summary from existing reports."""
    from .reporting import (metric_summary_rows, rows_to_tsv,
                            schedule_summary_rows, write_metric_figure,
                            write_schedule_figures)

    cfg = _prepare(config_path, out_dir)
    fig_dir = cfg.out_dir / "figures"
    sched_path = cfg.out_dir / "schedule_report.json"
    metric_path = cfg.out_dir / "metric_report.json"
    rows = []
    figures = []
    if sched_path.exists():
        train_report = json.loads(sched_path.read_text())
        figures.extend(write_schedule_figures(train_report, fig_dir))
        rows.extend(schedule_summary_rows(train_report))
    if metric_path.exists():
        metric_report = json.loads(metric_path.read_text())
        figures.append(write_metric_figure(metric_report, fig_dir))
        if rows:
            rows.append([])
        rows.extend(metric_summary_rows(metric_report))
    if not rows:
        raise InputError(f"no reports found under {cfg.out_dir}; "
                         "run train or eval first")
    tsv = rows_to_tsv([r if r else [""] for r in rows])
    (cfg.out_dir / "report.tsv").write_text(tsv + "\n")
    click.echo(tsv)
    for fig in figures:
        click.echo(f"figure: {fig}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
