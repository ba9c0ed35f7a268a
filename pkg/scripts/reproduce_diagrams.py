"""Write stochastic and deterministic bifurcation diagrams for the three builtin systems.

Usage: python scripts/reproduce_diagrams.py [OUTDIR] [extra stochbif flags...]

Equivalent to ``stochbif reproduce -o OUTDIR``.  Expect tens of minutes on one
CPU; ``--workers`` spreads the per-r scans over processes.
"""

import sys

from stochbif.cli import main

if __name__ == "__main__":
    outdir = sys.argv[1] if len(sys.argv) > 1 else "diagrams"
    sys.exit(main(["reproduce", "-o", outdir, *sys.argv[2:]]))
