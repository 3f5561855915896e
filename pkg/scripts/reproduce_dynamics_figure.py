#!/usr/bin/env python3
"""Reproduce the interpolated meta-training trajectory at the default
configuration (T=1000, tau=0.3, start (0.1, 0), r=1).

Writes dynamics.csv (per-step a_i, b_i), dynamics.json (summary), and
a manifest. Pass any `metasep dynamics` flag through, e.g.
--t-tasks 5000 or --seed 7.
"""

import sys

from metasep.cli import main

if __name__ == "__main__":
    sys.exit(main(["dynamics", *sys.argv[1:]]))
