#!/usr/bin/env python3
"""Run every shipped experiment config and report where the artifacts went.

Full reproduction takes a few minutes on one core; --quick shrinks the seed
counts for a smoke pass. Artifact directories keep the basename from each
config's out_dir but are rooted at --out.
"""

import argparse
from pathlib import Path

from steerkit.harness import load_config, run_from_config

CONFIG_NAMES = (
    "fig1.json",
    "sweep_distance.json",
    "sweep_map.json",
    "scale_distance.json",
    "single_synthetic.json",
    "single_distance.json",
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "--configs",
        type=Path,
        default=Path(__file__).resolve().parent.parent / "configs",
        help="directory holding the shipped config JSONs",
    )
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweep rows")
    ap.add_argument("--quick", action="store_true", help="small seed counts, smoke pass only")
    args = ap.parse_args()

    for name in CONFIG_NAMES:
        cfg = load_config(args.configs / name)
        out_dir = args.out / Path(cfg.out_dir).name
        seeds = cfg.seeds
        if args.quick:
            keep = 40 if cfg.experiment == "synthetic_fig1" else 1
            seeds = cfg.seeds[:keep]
        cfg = cfg.with_overrides(out_dir=str(out_dir), seeds=seeds, jobs=args.jobs)
        manifest = run_from_config(cfg)
        print(f"{name:>22} -> {out_dir}  (wall {manifest['wall_time_s']:.1f}s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
