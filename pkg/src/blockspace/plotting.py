"""Figure for sweep output, rendered off-screen next to the CSV."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_sweep(rows: Sequence[dict], parameter: str, path: str | Path) -> Path:
    """Clearing prices on top, market-clearing oracle gain below; filled markers mark equilibria."""
    path = Path(path)
    xs = [float(r["param_value"]) for r in rows]
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.6))
    mc = [r["clearing_price_mc"] for r in rows]
    top.plot(xs, mc, color="tab:blue", label="market-clearing price")
    for x, y, ok in zip(xs, mc, (r["mc_exists"] for r in rows)):
        top.plot(x, y, "o", color="tab:blue", fillstyle="full" if ok else "none")
    ps = [(x, r["best_ps_price"], r["ps_exists_any"]) for x, r in zip(xs, rows)
          if not math.isnan(r["best_ps_price"])]
    if ps:
        top.plot([p[0] for p in ps], [p[1] for p in ps], color="tab:orange", label="highest setter price")
        for x, y, ok in ps:
            top.plot(x, y, "s", color="tab:orange", fillstyle="full" if ok else "none")
    top.set_ylabel("price")
    top.legend(loc="best", fontsize="small")
    gains = [max(r["max_oracle_gain"], 1e-18) for r in rows]
    bottom.semilogy(xs, gains, "k.-")
    bottom.set_ylabel("oracle gain at market clearing")
    bottom.set_xlabel(parameter)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
