"""
Empirical phase diagram
=======================

Draw signals from a reference dictionary, run projected subgradient descent
on the empirical l1 objective from the reference itself, and check whether
it stays put. Cells where the theory says identifiable should come back with
tiny errors. This script runs a coarse grid in about a minute; pass
``--full`` for the ten-atom grid with ten batches (roughly 15 minutes per
model on one core).
"""
import argparse
import sys
from dataclasses import replace

from l1ident.experiment import agreement, figure1_config, phase_csv, run_phase_diagram

parser = argparse.ArgumentParser()
parser.add_argument("--full", action="store_true")
parser.add_argument("--model-kind", default="SG", choices=["SG", "BG"])
args = parser.parse_args()

cfg = figure1_config(args.model_kind)
if not args.full:
    cfg = replace(cfg, mu_values=cfg.mu_values[::4], sparsity_values=cfg.sparsity_values[::3], batches=2)

cells = run_phase_diagram(cfg)

# %%
# One character per cell: theory verdict (I/N/?) next to the empirical
# outcome (r recovered, n not recovered, a ambiguous).
mark = {"Identifiable": "I", "NotIdentifiable": "N", "Indeterminate": "?"}
emp = {"Recovered": "r", "NotRecovered": "n", "Ambiguous": "a"}
print("mu \\ sparsity", *cfg.sparsity_values)
for i, mu in enumerate(cfg.mu_values):
    row = cells[i * len(cfg.sparsity_values):(i + 1) * len(cfg.sparsity_values)]
    print(f"{mu:5.2f}        ", *(mark[c.theory_status.value] + emp[c.empirical_status.value] for c in row))

frac, n = agreement(cells, cfg.margin_band)
print(f"agreement {frac:.3f} over {n} cells with |margin| > {cfg.margin_band}")

# %%
# The CSV is the same as the one written by ``l1ident phase-diagram``.
sys.stdout.write(phase_csv(cells, cfg.margin_band).splitlines()[-1] + "\n")
