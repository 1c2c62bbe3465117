"""Report rendering: matplotlib figures plus delimited summaries.

Consumes the structured report files written by the train and eval
commands and produces PNG curves alongside tab-separated tables.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def write_schedule_figures(train_report: dict, fig_dir: Path) -> list[Path]:
    """One figure per plan: per-stage curves over a shared step axis."""
    fig_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for plan in train_report.get("plans", []):
        fig, ax = plt.subplots(figsize=(7, 4))
        offset = 0
        for stage in plan["stages"]:
            xs = range(offset, offset + len(stage["curve"]))
            label = f"{stage['name']} ({stage['kind']})"
            ax.plot(list(xs), stage["curve"], label=label)
            offset += len(stage["curve"])
            ax.axvline(offset - 0.5, color="gray", linewidth=0.5, linestyle=":")
        ax.set_xlabel("step")
        ax.set_ylabel("loss / mean group reward")
        mean_reward = plan["final_eval"]["mean_reward"]
        ax.set_title(f"plan {plan['plan']} (final mean reward {mean_reward:.3f})")
        ax.legend(fontsize=8)
        fig.tight_layout()
        out = fig_dir / f"schedule_{plan['plan']}.png"
        fig.savefig(out, dpi=120)
        plt.close(fig)
        paths.append(out)
    return paths


def write_metric_figure(metric_report: dict, fig_dir: Path) -> Path:
    fig_dir.mkdir(parents=True, exist_ok=True)
    names = ["anls", "em", "macro_f1"]
    values = [metric_report[n] for n in names]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(names, values, color=["#4878d0", "#ee854a", "#6acc64"])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("answer metrics")
    for i, v in enumerate(values):
        ax.text(i, v + 0.02, f"{v:.3f}", ha="center", fontsize=9)
    fig.tight_layout()
    out = fig_dir / "metrics.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def schedule_summary_rows(train_report: dict) -> list[list[str]]:
    rows = [["plan", "stage", "kind", "steps", "final_value",
             "eval_mean_reward", "eval_em"]]
    for plan in train_report.get("plans", []):
        ev = plan["final_eval"]
        for stage in plan["stages"]:
            rows.append([plan["plan"], stage["name"], stage["kind"],
                         str(stage["steps"]), f"{stage['final_value']:.6f}",
                         "", ""])
        rows.append([plan["plan"], "(eval)", "", "",
                     "", f"{ev['mean_reward']:.6f}", f"{ev['em']:.4f}"])
    return rows


def metric_summary_rows(metric_report: dict) -> list[list[str]]:
    rows = [["id", "anls", "em", "f1"]]
    for row in metric_report.get("per_question", []):
        rows.append([row["id"], f"{row['anls']:.6f}", str(row["em"]),
                     f"{row['f1']:.6f}"])
    rows.append(["(mean)", f"{metric_report['anls']:.6f}",
                 f"{metric_report['em']:.4f}", f"{metric_report['macro_f1']:.6f}"])
    return rows


def rows_to_tsv(rows: list[list[str]]) -> str:
    return "\n".join("\t".join(row) for row in rows)
