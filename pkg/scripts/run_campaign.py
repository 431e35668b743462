"""Simulation campaign on the three-state benchmark; writes one results CSV.

    python3 scripts/run_campaign.py --out results.csv --reps 10 --M-max 100
"""

import argparse
import logging
import time

from sbshmm import io
from sbshmm.campaign import SimConfig, run_replication

log = logging.getLogger("campaign")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--config", help="SimConfig JSON; flags below override it")
    ap.add_argument("--n", type=float, nargs="+")
    ap.add_argument("--reps", type=int)
    ap.add_argument("--M-max", type=int)
    ap.add_argument("--variants", nargs="+")
    ap.add_argument("--cv", action="store_true")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = io.read_json(args.config) if args.config else {}
    for key, val in (("n_grid", args.n and [int(n) for n in args.n]), ("reps", args.reps),
                     ("M_max", args.M_max), ("variants", args.variants), ("seed", args.seed)):
        if val is not None:
            cfg[key] = val
    if args.cv:
        cfg["cv"] = True
    config = SimConfig.from_dict(cfg)
    io.write_json(args.out + ".config.json", config.to_dict())

    first = True
    for n in config.n_grid:
        for rep in range(config.reps):
            t = time.perf_counter()
            rows = run_replication(config, n, rep)
            # append as we go so an interrupted campaign keeps its finished replications
            io.write_results_csv(rows, args.out, append=not first)
            first = False
            log.info("n=%d rep=%d done in %.1fs", n, rep, time.perf_counter() - t)


if __name__ == "__main__":
    main()
