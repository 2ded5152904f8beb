"""Command-line interface.

Subcommands: gen, run, mutate, report, coverage, replay, render,
policy-host. A campaign exits 0 when it completes; individual policy
failures are recorded per episode and only fail the process under
--strict.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import replace
from pathlib import Path

from . import campaign as camp
from .data import data_path, default_paraphrases, deny_list_for, seen_db, unseen_db
from .generate import (
    GeneratorConfig,
    derive_seed,
    generate_suite,
    load_suite,
    mutate_camera,
    mutate_instruction,
    mutate_lighting,
    save_suite,
)
from .metrics import trajectory_coverage
from .policies import make_policy
from .policy import serve_stdio
from .render import render_rgb, write_ppm
from .report import emit_report
from .scene import TaskKind, load_object_db, load_scene, scene_hash
from .sim import init_world


def _db_from(args: argparse.Namespace):
    if args.db in (None, "seen"):
        return seen_db()
    if args.db == "unseen":
        return unseen_db()
    return load_object_db(args.db)


def _parse_tasks(spec: str | None) -> tuple[TaskKind, ...]:
    if not spec or spec == "all":
        return tuple(TaskKind)
    return tuple(TaskKind(t.strip()) for t in spec.split(","))


def _parse_confound(spec: str) -> int | tuple[int, int]:
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        return (int(lo), int(hi))
    return int(spec)


def cmd_gen(args: argparse.Namespace) -> int:
    db = _db_from(args)
    deny = deny_list_for(db)
    kind = TaskKind(args.task)
    cfg = GeneratorConfig(
        seed=args.seed,
        n_confound=_parse_confound(args.confound),
        safe_dist=args.safe_dist,
        lighting_flag=args.lighting,
        camera_flag=args.camera,
    )
    scenes = generate_suite(db, kind, cfg, args.count, deny)
    manifest = save_suite(scenes, args.out, kind, cfg)
    print(f"wrote {len(scenes)} scenes to {Path(args.out)} ({manifest.name})")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = camp.CampaignConfig(
        preset=args.preset,
        policy=args.policy,
        tasks=_parse_tasks(args.tasks),
        suite_size=args.size,
        repeats=args.repeats,
        seed=args.seed,
        workers=args.workers,
        db_path=None if args.db in (None, "seen", "unseen") else args.db,
        source=args.source,
        cheat=args.cheat,
        max_steps=args.max_steps,
        save_traces=args.traces,
    )
    summary = camp.run_campaign(cfg, args.out)
    print(
        f"{cfg.preset}: {summary.episodes} episodes "
        f"({summary.skipped} resumed, {summary.policy_errors} policy errors) -> {summary.out_dir}"
    )
    if args.report:
        print(f"report: {emit_report(summary.out_dir)}")
    if args.strict and summary.policy_errors:
        return 1
    return 0


def cmd_mutate(args: argparse.Namespace) -> int:
    db = _db_from(args)
    manifest, scenes = load_suite(args.suite)
    kind = TaskKind(manifest["task"])
    rng = random.Random(derive_seed(args.seed, "mutate", args.op))
    mutated = []
    for scene in scenes:
        if args.op == "lighting":
            direction = rng.choice(("decrease", "increase"))
            scene = replace(scene, lighting=mutate_lighting(scene.lighting, direction, rng))
        elif args.op == "camera":
            scene = replace(scene, camera=mutate_camera(scene.camera, rng))
        elif args.op == "instruction":
            scene = replace(
                scene, task=mutate_instruction(scene.task, default_paraphrases(), rng, db)
            )
        else:
            raise ValueError(f"unknown mutation op {args.op!r}")
        mutated.append(scene)
    gen_cfg = GeneratorConfig(seed=args.seed)
    save_suite(mutated, args.out, kind, gen_cfg)
    print(f"wrote {len(mutated)} {args.op}-mutated scenes to {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    out = emit_report(args.results_dir)
    print(out)
    return 0


def cmd_coverage(args: argparse.Namespace) -> int:
    rows, cols = (int(v) for v in args.grid.split("x"))
    manifest = json.loads((Path(args.suite) / "manifest.json").read_text())
    points = [tuple(e["target_a_xy"]) for e in manifest["scenes"]]
    cov = trajectory_coverage(points, grid=(rows, cols))
    print(f"{cov.covered}/{cov.total} cells covered: {cov.ratio:.3f}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    trace, result, row = camp.replay_scene(
        args.campaign, args.scene_hash, args.policy, cheat=args.cheat, max_steps=args.max_steps
    )
    print(json.dumps(result.as_dict(), indent=2, sort_keys=True))
    if row is not None:
        same = all(row[k] == result.as_dict()[k] for k in ("grasp_correct", "mid_step", "success"))
        print(f"recorded outcome {'matches' if same else 'DIFFERS from'} replay")
    if args.trace_out:
        print(f"trace: {trace.save(args.trace_out)}")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    db = _db_from(args)
    scene = load_scene(args.scene)
    obs = render_rgb(init_world(scene, db), scene, db)
    out = args.out or f"{scene.scene_id}.ppm"
    write_ppm(obs, out)
    print(f"{scene.scene_id} ({scene_hash(scene)}) -> {out}")
    return 0


def cmd_policy_host(args: argparse.Namespace) -> int:
    return serve_stdio(make_policy(args.policy, seed=args.seed))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root random seed")
    common.add_argument("--workers", type=int, default=1, help="parallel episode workers")
    common.add_argument(
        "--policy",
        default="oracle",
        help="policy descriptor: builtin name, cmd:<argv>, or tcp:<host>:<port>",
    )
    common.add_argument(
        "--db", default=None, help="object database: 'seen' (default), 'unseen', or a JSON path"
    )

    p = argparse.ArgumentParser(prog="scenefuzz", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a scene suite")
    g.add_argument("--task", required=True, choices=[t.value for t in TaskKind])
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--out", required=True)
    g.add_argument("--confound", default="0:3", help="fixed count or lo:hi range")
    g.add_argument("--safe-dist", type=float, default=0.15)
    g.add_argument("--lighting", action="store_true", help="mutate lighting at generation time")
    g.add_argument("--camera", action="store_true", help="mutate camera at generation time")
    g.set_defaults(fn=cmd_gen)

    r = sub.add_parser("run", parents=[common], help="run a campaign preset")
    r.add_argument("--preset", required=True, choices=list(camp.PRESETS))
    r.add_argument("--out", required=True)
    r.add_argument("--tasks", default="all", help="comma list of tasks (default all)")
    r.add_argument("--size", type=int, default=100, help="scenes per suite")
    r.add_argument("--repeats", type=int, default=3, help="mutation repeats (lighting/camera)")
    r.add_argument("--source", default=None, help="prior campaign dir (mutation presets)")
    r.add_argument("--max-steps", type=int, default=120)
    r.add_argument("--cheat", action="store_true", default=None, help="force privileged observations")
    r.add_argument("--traces", action="store_true", help="save per-episode traces")
    r.add_argument("--report", action="store_true", help="emit the report after the run")
    r.add_argument("--strict", action="store_true", help="exit nonzero on any policy error")
    r.set_defaults(fn=cmd_run)

    m = sub.add_parser("mutate", parents=[common], help="mutate an existing suite")
    m.add_argument("--suite", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--op", required=True, choices=["lighting", "camera", "instruction"])
    m.set_defaults(fn=cmd_mutate)

    rep = sub.add_parser("report", parents=[common], help="emit reports for a campaign")
    rep.add_argument("results_dir")
    rep.set_defaults(fn=cmd_report)

    c = sub.add_parser("coverage", parents=[common], help="trajectory coverage of a suite")
    c.add_argument("suite")
    c.add_argument("--grid", default="10x10")
    c.set_defaults(fn=cmd_coverage)

    rp = sub.add_parser("replay", parents=[common], help="re-run one scene by hash")
    rp.add_argument("campaign")
    rp.add_argument("scene_hash")
    rp.add_argument("--max-steps", type=int, default=120)
    rp.add_argument("--cheat", action="store_true", default=None)
    rp.add_argument("--trace-out", default=None)
    rp.set_defaults(fn=cmd_replay)

    rd = sub.add_parser("render", parents=[common], help="render a scene file to PPM")
    rd.add_argument("scene")
    rd.add_argument("--out", default=None)
    rd.set_defaults(fn=cmd_render)

    h = sub.add_parser("policy-host", parents=[common], help="serve a builtin policy on stdio")
    h.set_defaults(fn=cmd_policy_host)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (camp.CampaignError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
