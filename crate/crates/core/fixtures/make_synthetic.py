"""Regenerates synthetic_catalog.csv: three burst populations plus a few
incomplete rows, in the catalog CSV layout read by `fuzzyburst run`."""
import numpy as np

rng = np.random.default_rng(1991)
groups = [
    # count, mean log10 T90, sd, mean log10 H32, log10 fluence f2, log10 p256
    (45, -0.35, 0.30, 0.75, -7.2, 0.35),
    (60, 1.25, 0.25, 0.35, -6.6, 0.10),
    (55, 1.95, 0.25, 0.50, -5.6, 0.75),
]
rows = []
trigger = 100
for count, t90_mu, t90_sd, h_mu, f2_mu, p_mu in groups:
    for _ in range(count):
        t90 = 10 ** rng.normal(t90_mu, t90_sd)
        t50 = t90 * rng.uniform(0.25, 0.55)
        f2 = 10 ** rng.normal(f2_mu, 0.25)
        f3 = f2 * 10 ** rng.normal(h_mu, 0.12)
        f1 = f2 * rng.uniform(0.4, 1.0)
        f4 = f3 * rng.uniform(0.1, 0.9)
        p256 = 10 ** rng.normal(p_mu, 0.2)
        p64 = p256 * rng.uniform(1.0, 1.6)
        p1024 = p256 * rng.uniform(0.6, 1.0)
        rows.append([trigger, t50, t90, f1, f2, f3, f4, p64, p256, p1024])
        trigger += 1 + int(rng.integers(0, 3))
# incomplete records: missing f3, zero-coded f2, missing t50, missing p256
for col in (5, 4, 1, 8):
    r = list(rows[int(rng.integers(0, len(rows)))])
    r[0] = trigger
    trigger += 1
    r[col] = None if col != 4 else 0.0
    rows.append(r)

with open("synthetic_catalog.csv", "w", newline="\n") as f:
    f.write("trigger_id,t50,t90,f1,f2,f3,f4,p64,p256,p1024\n")
    for r in rows:
        cells = [str(r[0])] + ["" if v is None else ("0" if v == 0 else f"{v:.6g}") for v in r[1:]]
        f.write(",".join(cells) + "\n")
