#!/usr/bin/env python3
"""Conversation-frequency and dimension ablations on synthetic data.

Frequency: b(t) = n*floor(t/50) and n*floor(log t) for n in {1, 5, 10, 20}.
Dimension: d in {20, 30, 40, 50} with b(t) = 10*floor(t/50).
"""

import os
import sys

from conduel.cli import main

OUT = os.environ.get("CONDUEL_OUT", "out/fig3")

common = [
    "--algorithms", "conduel",
    "--t", "5000",
    "--seeds", "0:10",
    "--users", "20",
    "--pool-size", "50",
]

if __name__ == "__main__":
    extra = sys.argv[1:]
    code = main(["sweep", "--axis", "frequency", *common, "--out", os.path.join(OUT, "frequency"), *extra])
    if code == 0:
        code = main(
            ["sweep", "--axis", "dimension", "--schedule", "linear:10", *common,
             "--out", os.path.join(OUT, "dimension"), *extra]
        )
    sys.exit(code)
