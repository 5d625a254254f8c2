#!/usr/bin/env python3
"""Run the acceptance suite and print the one-line verdict of each criterion."""
import re
import subprocess
import sys

proc = subprocess.run([sys.executable, "-m", "pytest", "tests/test_acceptance.py", "-v", "-p", "no:cacheprovider"],
                      capture_output=True, text=True)
lines = [l for l in proc.stdout.splitlines() if re.match(r"criterion \d+:", l)]
print("\n".join(sorted(lines, key=lambda l: int(l.split()[1].rstrip(":")))))
print(f"pytest exit code {proc.returncode}")
sys.exit(proc.returncode)
