"""Search for tables that pass the per-vertex check but admit no coverage certificate."""

import argparse
import json

import numpy as np

from subdiff.certify import certify_vertex, falsify_equivalence, theorem2_check, truncated_rank_table


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k", type=int, nargs="+", default=[2, 3, 4, 5])
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--rng-seed", type=int, default=0)
    args = parser.parse_args()

    print("k  samples  divergences  most negative witness")
    for k in args.k:
        found = falsify_equivalence(k, args.samples, args.rng_seed)
        worst = min((certify_vertex(a).witness_value for a in found), default=0.0)
        print(f"{k}  {args.samples:7d}  {len(found):11d}  {worst:.4f}")

    a = truncated_rank_table(3, 2)
    cert = certify_vertex(a)
    print("\nk=3 truncated rank min(|s|,2)/2:")
    print(json.dumps({"table": a.tolist(),
                      "per_vertex_check": theorem2_check(a).passed,
                      "candidate_b": np.round(cert.candidate, 12).tolist(),
                      "witness_pattern": cert.witness_pattern,
                      "witness_value": cert.witness_value}, indent=2))


if __name__ == "__main__":
    main()
