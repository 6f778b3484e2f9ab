//! Matplotlib scripts that render the emitted CSV files. They read the CSV
//! from their own directory and write a PNG beside it.

use crate::Figure;

const PRELUDE: &str = r#"import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def rows(name):
    with open(HERE / name, newline="") as f:
        return [{k: float(v) for k, v in r.items()} for r in csv.DictReader(f)]

"#;

const FIG2A: &str = r#"
data = rows(CSV)
fig, ax = plt.subplots(figsize=(6, 4))
for beta_db in sorted({r["beta_db"] for r in data}):
    sel = sorted((r for r in data if r["beta_db"] == beta_db), key=lambda r: r["t_joint"])
    t_db = [10 * math.log10(r["t_joint"]) for r in sel]
    ax.plot(t_db, [r["s_analytical"] for r in sel], "-", label=f"analytical, beta={beta_db:g} dB")
    ax.errorbar(t_db, [r["s_mc"] for r in sel], yerr=[r["ci95"] for r in sel], fmt="o", ms=4,
                label=f"Monte Carlo, beta={beta_db:g} dB")
    ax.plot(t_db, [r["s_non_in"] for r in sel], ":", color="gray", label="non-IN")
ax.set_xlabel("request threshold T1 = T2 [dB]")
ax.set_ylabel("coverage probability")
ax.grid(True, alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(HERE / PNG, dpi=120)
"#;

const FIG2B: &str = r#"
data = rows(CSV)
series = defaultdict(list)
for r in data:
    series[(int(r["u_max"]), r["t1"], r["t2"])].append(r)
fig, ax = plt.subplots(figsize=(6, 4))
for (u, t1, t2), sel in sorted(series.items()):
    sel.sort(key=lambda r: r["beta_db"])
    beta = [10 ** (r["beta_db"] / 10) for r in sel]
    line, = ax.loglog(beta, [r["outage"] for r in sel], "-", label=f"U={u}, T1={t1:g}, T2={t2:g}")
    ax.loglog(beta, [r["outage_asymptotic"] for r in sel], "--", color=line.get_color(), lw=0.8)
ax.set_xlabel("SIR threshold beta")
ax.set_ylabel("outage probability")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(HERE / PNG, dpi=120)
"#;

pub fn script(figure: Figure, csv_name: &str, png_name: &str) -> String {
    let body = match figure {
        Figure::Fig2a => FIG2A,
        Figure::Fig2b => FIG2B,
    };
    format!("{PRELUDE}CSV = {csv_name:?}\nPNG = {png_name:?}\n{body}")
}
