"""Run the full pipeline on the default synthetic fleet for several seeds and tabulate the ARI.

    python scripts/seed_sweep.py --seeds 1 2 3 4 5 --out runs/sweep
"""

import argparse
import dataclasses
import json
import time
from pathlib import Path

from rogue_sensors import cli
from rogue_sensors.config import load_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=Path(__file__).parent / "configs" / "default.yaml")
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--out", type=Path, default=Path("runs/sweep"))
    ap.add_argument("--negative-mode", choices=["dtw", "random"], default=None)
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        cfg = load_config(args.config, seed=seed, out=str(args.out / f"seed{seed}"))
        if args.negative_mode:
            cfg = dataclasses.replace(cfg, train={**cfg.train, "negative_mode": args.negative_mode})
        t0 = time.perf_counter()
        try:
            cli.cmd_run(cfg)
            report = json.loads((Path(cfg.out) / "report.json").read_text())
            ari, eps, k = report["ari"], report["epsilon"]["epsilon"], report["n_clusters"]
        except cli.StageError as exc:
            ari, eps, k = None, None, None
            print(f"seed {seed}: {exc}")
        rows.append((seed, ari, eps, k, time.perf_counter() - t0))

    print(f"{'seed':>4}  {'ARI':>6}  {'eps':>7}  {'clusters':>8}  {'sec':>6}")
    for seed, ari, eps, k, sec in rows:
        fmt = lambda v, f: "-" if v is None else format(v, f)  # noqa: E731
        print(f"{seed:>4}  {fmt(ari, '6.3f')}  {fmt(eps, '7.4f')}  {fmt(k, '8d')}  {sec:6.1f}")
    good = sum(1 for r in rows if r[1] is not None and r[1] >= 0.8)
    print(f"ARI >= 0.8 on {good}/{len(rows)} seeds")


if __name__ == "__main__":
    main()
