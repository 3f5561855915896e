#!/usr/bin/env python3
"""Run every closed-form-vs-oracle verification suite and print the
max residual per suite. Exits nonzero if any suite fails. Use
--self-test-perturb to confirm the suites actually detect errors.
"""

import sys

from metasep.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify", *sys.argv[1:]]))
