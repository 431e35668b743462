"""Per-state convergence slopes from a campaign results CSV.

Prints slope, standard error and number of points per (variant, state),
plus the median selected and oracle dimensions at every n.
"""

import argparse
from collections import defaultdict

import numpy as np

from sbshmm import io
from sbshmm.campaign import rates_from_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("results")
    ap.add_argument("--nmin", type=float, default=None)
    ap.add_argument("--method", default="spectral")
    args = ap.parse_args()
    rows = io.read_results_csv(args.results)

    for variant in sorted({r["variant"] for r in rows if r["method"] == args.method}):
        rep = rates_from_rows(rows, args.nmin, args.method, variant)
        for state, fit in rep.per_state.items():
            print(f"{variant:9s} {state:8s} slope {fit.slope:+.3f} +- {fit.stderr:.3f} "
                  f"({len(fit.points)} points)")

    dims = defaultdict(list)
    for r in rows:
        if r["method"] == args.method:
            dims[(r["variant"], r["n"], r["state"])].append((r["M_selected"], r["oracle_M"],
                                                             r["l2_error"], r["oracle_error"]))
    print("\nvariant   n        state    med M  med oracle M  med err  med oracle err")
    for (variant, n, state), v in sorted(dims.items()):
        a = np.median(np.array(v), axis=0)
        print(f"{variant:9s} {n:<8d} {state:8s} {a[0]:5.0f}  {a[1]:12.0f}  {a[2]:.4f}   {a[3]:.4f}")


if __name__ == "__main__":
    main()
