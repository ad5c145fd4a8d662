#!/usr/bin/env python3
"""Plot the CSV files written by maser-ldp.

    python3 scripts/plot.py OUT_DIR [--save FIG_DIR]

Every recognised CSV found in OUT_DIR gets one figure.
"""

import argparse
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def load(path):
    df = pd.read_csv(path, comment="#")
    with open(path) as f:
        last = f.read().rstrip("\n").rsplit("\n", 1)[-1]
    if "complete=false" in last:
        print(f"warning: {path} is incomplete")
    return df


def stationary(d, ax):
    ax.plot(d.alpha, d["mean"], "k-")
    ax.set(xlabel="alpha", ylabel="mean photon number")


def potential(d, ax):
    for (nex, alpha), g in d.groupby(["nex", "alpha"]):
        ax.plot(g.x, g.u_rescaled, label=f"nex={nex:g}")
    ax.set(xlabel="n / nex", ylabel="U / nex")
    ax.legend()


def potential_limit(d, ax):
    ax.plot(d.x, d.v, "k--")
    ax.set(xlabel="x", ylabel="v(x)")


def trajectory(d, ax):
    for path, g in d.groupby("path"):
        ax.step(g.time, g["count"], where="post", label=f"path {path}")
    ax.set(xlabel="t", ylabel="ground-state counts")
    ax.legend()


def grid(d, fig):
    axes = fig.subplots(1, 2)
    for ax, col in zip(axes, ["dlambda_ds", "gap"]):
        table = d.pivot(index="s", columns="alpha", values=col)
        im = ax.pcolormesh(table.columns, table.index, table.values, shading="nearest")
        fig.colorbar(im, ax=ax)
        ax.set(xlabel="alpha", ylabel="s", title=col)


def zoom(d, ax):
    for nex, g in d.groupby("nex"):
        ax.plot(g.s, g.dlambda_ds / nex, label=f"nex={nex:g}")
    ax.set(xlabel="s", ylabel="lambda'(s) / nex")
    ax.legend()


def spectrum(d, ax):
    for k, g in d.groupby("k"):
        ax.plot(g.alpha, g.eigenvalue, "k-", lw=0.8)
    ax.set(xlabel="alpha", ylabel="eigenvalue")


def cumulants(d, ax):
    for nex, g in d.groupby("nex"):
        ax.semilogy(g.alpha, g.v_rescaled, label=f"nex={nex:g}")
    ax.set(xlabel="alpha", ylabel="v / nex^1.6")
    ax.legend()


def ldp(d, ax):
    d = d[d.attainable]
    ax.plot(d.x, d.rate, "k-")
    ax.set(xlabel="x", ylabel="I(x)")


PLOTS = {
    "stationary": stationary,
    "potential": potential,
    "potential_limit": potential_limit,
    "trajectory": trajectory,
    "zoom": zoom,
    "spectrum": spectrum,
    "cumulants": cumulants,
    "ldp": ldp,
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--save", default=None, help="directory for PNG files")
    args = ap.parse_args()
    save = args.save or args.out_dir
    os.makedirs(save, exist_ok=True)
    names = ["grid", *PLOTS]
    for name in names:
        path = os.path.join(args.out_dir, f"{name}.csv")
        if not os.path.exists(path):
            continue
        d = load(path)
        if name == "grid":
            fig = plt.figure(figsize=(10, 4))
            grid(d, fig)
        else:
            fig, ax = plt.subplots(figsize=(6, 4))
            PLOTS[name](d, ax)
        fig.tight_layout()
        target = os.path.join(save, f"{name}.png")
        fig.savefig(target, dpi=120)
        plt.close(fig)
        print(f"wrote {target}")


if __name__ == "__main__":
    main()
