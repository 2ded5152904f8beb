"""Report emission: step tables, transfer rates, coverage, robustness ratios.

Reports are a pure function of a campaign directory's contents: rows are
sorted before tabulation and floats use fixed formatting, so re-running the
emitter is byte-identical. Undefined cells render as "---".
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from typing import Any

from .campaign import (
    CONFOUND_LEVELS,
    PRESET_CAMERA,
    PRESET_CONFOUND,
    PRESET_INSTRUCTION,
    PRESET_LIGHTING,
    PRESET_UNSEEN,
    PRESETS,
    CampaignError,
)
from .metrics import (
    diff_metric,
    mann_whitney_u,
    mut_over_def,
    trajectory_coverage,
    transfer_rate,
)
from .scene import TaskKind

STEP_LABELS = {
    TaskKind.PICK_UP: ("Grasp", "Lift", "Success"),
    TaskKind.MOVE_NEAR: ("Grasp", "Move", "Success"),
    TaskKind.PUT_ON: ("Grasp", "Move", "Success"),
    TaskKind.PUT_IN: ("Grasp", "Move", "Success"),
}

UNDEF = "---"


def fmt_pct(x: float | None) -> str:
    return UNDEF if x is None else f"{100.0 * x:.1f}%"


def fmt_ratio(x: float | None) -> str:
    return UNDEF if x is None else f"{x:.3f}"


def fmt_count(x: float) -> str:
    return f"{x:.1f}" if x != int(x) else str(int(x))


def _load_rows(campaign_dir: Path) -> tuple[str, dict[TaskKind, list[dict[str, Any]]]]:
    rows_by_task: dict[TaskKind, list[dict[str, Any]]] = defaultdict(list)
    preset_found: set[str] = set()
    versions: set[int] = set()
    for preset in PRESETS:
        for task in TaskKind:
            path = campaign_dir / preset / task.value / "results.jsonl"
            if not path.exists():
                continue
            preset_found.add(preset)
            with path.open() as f:
                for line in f:
                    if not line.strip():
                        continue
                    row = json.loads(line)
                    versions.add(int(row.get("protocol_version", 0)))
                    rows_by_task[TaskKind(row["task"])].append(row)
    if not preset_found:
        raise CampaignError(f"no results.jsonl found under {campaign_dir}")
    if len(versions) > 1:
        raise CampaignError(f"mixed protocol versions in one results directory: {sorted(versions)}")
    if len(preset_found) > 1:
        raise CampaignError(f"multiple presets in one campaign directory: {sorted(preset_found)}")
    for task in rows_by_task:
        rows_by_task[task].sort(key=lambda r: (r["scene_hash"], r["repeat"]))
    return preset_found.pop(), rows_by_task


def _step_counts(rows: list[dict[str, Any]]) -> tuple[int, int, int, int]:
    n = len(rows)
    grasp = sum(1 for r in rows if r["grasp_correct"])
    mid = sum(1 for r in rows if r["mid_step"])
    succ = sum(1 for r in rows if r["success"])
    if not (succ <= mid <= grasp <= n):
        raise CampaignError(f"step counts not monotone: {succ} <= {mid} <= {grasp} <= {n}")
    return n, grasp, mid, succ


def _coverage_rows(campaign_dir: Path) -> list[tuple[str, float]]:
    out = []
    for manifest_path in sorted(campaign_dir.glob("suites/**/manifest.json")):
        manifest = json.loads(manifest_path.read_text())
        points = [tuple(e["target_a_xy"]) for e in manifest["scenes"]]
        cov = trajectory_coverage(points)
        label = str(manifest_path.parent.relative_to(campaign_dir / "suites"))
        out.append((label, cov.ratio))
    return out


def _csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(cells) for cells in rows)
    path.write_text("\n".join(lines) + "\n")


def emit_report(campaign_dir: str | Path) -> Path:
    """Write report.md plus CSV tables under <campaign>/report/."""
    campaign_dir = Path(campaign_dir)
    preset, rows_by_task = _load_rows(campaign_dir)
    report_dir = campaign_dir / "report"
    report_dir.mkdir(exist_ok=True)
    policy = "?"
    for rows in rows_by_task.values():
        if rows:
            policy = rows[0]["policy"]
            break

    md: list[str] = [f"# Campaign report: {preset}", "", f"Policy: `{policy}`", ""]

    # Step success table (repeat 0 = unmutated runs for mutation presets).
    md += ["## Step success", ""]
    step_csv: list[list[str]] = []
    md.append("| Task | n | Grasp | Lift/Move | Success |")
    md.append("|---|---|---|---|---|")
    step_rates: dict[TaskKind, tuple[float, float, float]] = {}
    for task in TaskKind:
        rows = rows_by_task.get(task, [])
        if not rows:
            md.append(f"| {task.value} | 0 | {UNDEF} | {UNDEF} | {UNDEF} |")
            step_csv.append([task.value, "0", UNDEF, UNDEF, UNDEF])
            continue
        n, grasp, mid, succ = _step_counts(rows)
        rates = (grasp / n, mid / n, succ / n)
        step_rates[task] = rates
        md.append(
            f"| {task.value} | {n} | {fmt_pct(rates[0])} | {fmt_pct(rates[1])} | {fmt_pct(rates[2])} |"
        )
        step_csv.append(
            [task.value, str(n), f"{rates[0]:.6f}", f"{rates[1]:.6f}", f"{rates[2]:.6f}"]
        )
    _csv(report_dir / "steps.csv", ["task", "n", "grasp", "mid", "success"], step_csv)

    # Transfer rates.
    md += ["", "## Transfer rates", "", "| Task | Tr1 | Tr2 | Tr3 |", "|---|---|---|---|"]
    tr_csv: list[list[str]] = []
    for task in TaskKind:
        if task not in step_rates:
            continue
        tr = transfer_rate(list(step_rates[task]))
        md.append(
            f"| {task.value} | {fmt_ratio(tr[0])} | {fmt_ratio(tr[1])} | {fmt_ratio(tr[2])} |"
        )
        tr_csv.append(
            [task.value] + [UNDEF if v is None else f"{v:.6f}" for v in tr]
        )
    _csv(report_dir / "transfer.csv", ["task", "tr1", "tr2", "tr3"], tr_csv)

    # Trajectory coverage of the campaign's own suites, when present.
    coverage = _coverage_rows(campaign_dir)
    if coverage:
        md += ["", "## Trajectory coverage (10x10 grid)", "", "| Suite | Coverage |", "|---|---|"]
        cov_csv = []
        for label, ratio in coverage:
            md.append(f"| {label} | {ratio:.2f} |")
            cov_csv.append([label, f"{ratio:.6f}"])
        _csv(report_dir / "coverage.csv", ["suite", "coverage"], cov_csv)

    # Preset-specific sections.
    if preset in (PRESET_LIGHTING, PRESET_CAMERA):
        md += ["", f"## Mutated vs default ({preset})", ""]
        md.append("| Task | Def. | Mut. | Mut./Def. |")
        md.append("|---|---|---|---|")
        mut_csv = []
        tot_def = 0
        tot_mut = 0.0
        for task in TaskKind:
            rows = rows_by_task.get(task, [])
            if not rows:
                continue
            # Def = number of distinct source scenes (all passed by construction);
            # Mut = mean passes per repeat.
            by_repeat: dict[int, int] = defaultdict(int)
            hashes = set()
            for r in rows:
                hashes.add(r["scene_hash"])
                if r["success"]:
                    by_repeat[r["repeat"]] += 1
            n_def = len(hashes)
            repeats = max(r["repeat"] for r in rows) + 1
            mean_mut = sum(by_repeat.get(k, 0) for k in range(repeats)) / repeats
            ratio = mut_over_def(n_def, mean_mut)
            tot_def += n_def
            tot_mut += mean_mut
            md.append(
                f"| {task.value} | {n_def} | {fmt_count(mean_mut)} | {fmt_pct(ratio)} |"
            )
            mut_csv.append([task.value, str(n_def), f"{mean_mut:.6f}",
                            UNDEF if ratio is None else f"{ratio:.6f}"])
        tot_ratio = mut_over_def(tot_def, tot_mut)
        md.append(f"| total | {tot_def} | {fmt_count(tot_mut)} | {fmt_pct(tot_ratio)} |")
        mut_csv.append(["total", str(tot_def), f"{tot_mut:.6f}",
                        UNDEF if tot_ratio is None else f"{tot_ratio:.6f}"])
        _csv(report_dir / "mutation.csv", ["task", "def", "mut", "mut_over_def"], mut_csv)

    if preset in (PRESET_UNSEEN, PRESET_INSTRUCTION):
        base_dir = None
        manifest_path = campaign_dir / "manifest.json"
        if manifest_path.exists():
            src = json.loads(manifest_path.read_text()).get("source")
            base_dir = Path(src) if src else None
        if base_dir and base_dir.exists():
            md += ["", "## Relative difference vs source campaign", ""]
            md.append("| Task | Source | This | Diff. |")
            md.append("|---|---|---|---|")
            diff_csv = []
            for task in TaskKind:
                rows = rows_by_task.get(task, [])
                src_rows = []
                for p in PRESETS:
                    path = base_dir / p / task.value / "results.jsonl"
                    if path.exists():
                        with path.open() as f:
                            src_rows.extend(json.loads(l) for l in f if l.strip())
                if not rows or not src_rows:
                    continue
                base_rate = sum(1 for r in src_rows if r["success"]) / len(src_rows)
                this_rate = sum(1 for r in rows if r["success"]) / len(rows)
                d = diff_metric(base_rate, this_rate)
                md.append(
                    f"| {task.value} | {fmt_pct(base_rate)} | {fmt_pct(this_rate)} | {fmt_pct(d)} |"
                )
                diff_csv.append([task.value, f"{base_rate:.6f}", f"{this_rate:.6f}",
                                 UNDEF if d is None else f"{d:.6f}"])
            _csv(report_dir / "diff.csv", ["task", "source", "this", "diff"], diff_csv)

    if preset == PRESET_CONFOUND:
        md += ["", "## Success by confounder count", ""]
        header = "| Task | " + " | ".join(f"n={k}" for k in CONFOUND_LEVELS) + " | U(0 vs 4) | p |"
        md.append(header)
        md.append("|" + "---|" * (len(CONFOUND_LEVELS) + 3))
        sweep_csv = []
        for task in TaskKind:
            rows = rows_by_task.get(task, [])
            if not rows:
                continue
            cells = []
            groups: dict[str, list[float]] = defaultdict(list)
            for r in rows:
                groups[r["group"]].append(1.0 if r["success"] else 0.0)
            for k in CONFOUND_LEVELS:
                sample = groups.get(f"n{k}", [])
                rate = sum(sample) / len(sample) if sample else None
                cells.append(fmt_pct(rate))
            stat_cells = [UNDEF, UNDEF]
            if groups.get("n0") and groups.get("n4"):
                u, p, _ = mann_whitney_u(groups["n0"], groups["n4"])
                stat_cells = [f"{u:.1f}", fmt_ratio(p)]
            md.append(f"| {task.value} | " + " | ".join(cells + stat_cells) + " |")
            sweep_csv.append([task.value] + cells + stat_cells)
        _csv(
            report_dir / "confound_sweep.csv",
            ["task"] + [f"n{k}" for k in CONFOUND_LEVELS] + ["u_stat", "p"],
            sweep_csv,
        )

    md += [
        "",
        "Notes: Lift/Move column is task 1's lift predicate and tasks 2-4's move",
        "predicate. Task 2 success requires the object to have been released.",
        "",
    ]
    out = report_dir / "report.md"
    out.write_text("\n".join(md))
    return out
