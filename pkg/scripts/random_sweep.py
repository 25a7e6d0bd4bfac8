"""Small random-graph sweep of the relative errors e1, e2 (wraps ``sisbounds experiment``).

    python scripts/random_sweep.py OUT.csv [extra experiment flags]

Defaults: all three families, n in {20, 40}, beta-frac in {0.9, 0.7, 0.5},
5 realizations of 2000 paths each. Writes OUT.csv, OUT.summary.csv and
OUT.plot.py (run the latter with matplotlib installed).
"""

from __future__ import annotations

import sys

from sisbounds.cli import main

DEFAULTS = ["--families", "er,ba,nws", "--sizes", "20,40", "--beta-fracs", "0.9,0.7,0.5",
            "--realizations", "5", "--paths", "2000", "--horizon", "100", "--verbose"]

if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    sys.exit(main(["experiment", "--out", sys.argv[1], *DEFAULTS, *sys.argv[2:]]))
