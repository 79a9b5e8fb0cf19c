# Long-horizon polarization: under exponential survival the terminal values
# M^u_T concentrate near 0 and 1 as the horizon grows.

import numpy as np

from defaultlab.default_measure import polarization_experiment

result = polarization_experiment(t_values=(5.0, 10.0, 20.0), n_paths=4000, seed=1)

print("interior mass of M^u_T in [0.05, 0.95]:")
for t_mult, frac in zip(result["t_values"], result["interior_fraction"]):
    print(f"  T = {t_mult:>4.0f}:  {frac:.4f}")
print("strictly decreasing:", result["monotone_decreasing"])

edges = result["bin_edges"]
print("\nterminal histogram at the longest horizon (row per bin):")
hist = result["histograms"][-1]
for lo, hi, mass in zip(edges[:-1], edges[1:], hist):
    bar = "#" * int(round(60 * mass))
    print(f"  [{lo:.2f}, {hi:.2f})  {mass:7.4f}  {bar}")
