"""Report artifacts: SVG drawings, contribution CSVs, a text summary and PNG plots."""

from __future__ import annotations

import io
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from cheesetower.geometry import boundary_chain, chain_to_svg  # noqa: E402
from cheesetower.quadrature import boundary_measure, exp_model  # noqa: E402


def cut_overlays(tower, k: int, model=None) -> list[np.ndarray]:
    """z1-projections of every traced cut curve of the tower at truncation k."""
    if tower.kind != "exponential":
        return []
    model = model or exp_model(tower)
    out = []
    for n in range(1, tower.height + 1):
        out.extend(np.asarray(p.Z[:, 0]) for p in model.cut_components(n, k))
    return out


def summary_lines(verdict: dict) -> list[str]:
    if verdict["kind"] != "exponential":
        fc = verdict["fiber_counts"]
        lines = [f"stage {a['stage']}: |alpha|={a['abs_alpha']:.3e} < {a['bound']:.3e}  "
                 f"margin={a['regular_value_margin']:.3e}" for a in verdict["alphas"]]
        lines.append(f"fibers {fc['min']}..{fc['max']} of {fc['expected']}  "
                     f"halving residual {verdict['halving_max_residual']:.2e}")
        return lines
    gaps = {(g["stage"], g["truncation"]): g for g in verdict["nontriviality"]}
    lines = []
    for c in verdict["certificates"]:
        key = (c["stage"], c["truncation"])
        ok = "PASS" if c["pass_condition_8"] and c["pass_condition_9"] else "FAIL"
        line = (f"N={key[0]} k={key[1]} {ok} method={c['method']} prod_m={c['sheet_product']} "
                f"norm={c['lhs_norm']:.6f} bound={c['rhs_norm_bound']:.6f} delta={c['delta_margin']:.6f} "
                f"moment={c['moment_abs']:.6f} moment_bound={c['moment_bound']:.6f}")
        if key in gaps:
            line += f" gap={gaps[key]['gap']:.4f}"
        lines.append(line)
    return lines


def _png(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120)
    plt.close(fig)
    return buf.getvalue()


def _plot_cheese(tower, k: int, overlays) -> bytes:
    fig, ax = plt.subplots(figsize=(5, 5))
    for a in boundary_chain(tower.base, k).arcs:
        lo, hi = a.angle_range
        z = a.point(np.linspace(lo, hi, max(2, math.ceil((hi - lo) / 0.02) + 1)))
        ax.plot(z.real, z.imag, color="#204a87", lw=1)
    for z in overlays:
        ax.plot(z.real, z.imag, color="#cc0000", lw=0.8)
    ax.set_aspect("equal")
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.set_title(f"X^{k}: boundary and cut projections")
    return _png(fig)


def _plot_margins(verdict: dict) -> bytes:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.6))
    for k in verdict["truncations"]:
        rows = sorted((c for c in verdict["certificates"] if c["truncation"] == k), key=lambda c: c["stage"])
        N = [c["stage"] for c in rows]
        a1.plot(N, [c["delta_margin"] for c in rows], marker="o", label=f"k={k}")
        a2.plot(N, [c["moment_abs"] / c["moment_bound"] for c in rows], marker="o", label=f"k={k}")
    a1.axhline(verdict["certificates"][0]["target_delta"], color="gray", ls="--", lw=0.8)
    a2.axhline(1.0, color="gray", ls="--", lw=0.8)
    a1.set(xlabel="stage N", ylabel="norm margin")
    a2.set(xlabel="stage N", ylabel="|moment| / bound")
    a1.legend()
    fig.tight_layout()
    return _png(fig)


def write_report(tower, verdict: dict, out_dir, write) -> list[Path]:
    """Write every artifact into ``out_dir`` through ``write(path, str | bytes)``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    ks = verdict["truncations"] if tower.kind == "exponential" else [0]
    model = exp_model(tower) if tower.kind == "exponential" else None
    overlays = {k: cut_overlays(tower, k, model) for k in ks}
    for k in ks:
        p = out / f"cheese_k{k}.svg"
        write(p, chain_to_svg(tower.base, k, overlays[k]))
        written.append(p)
    if tower.kind == "exponential":
        for N in range(min(tower.height, 2) + 1):
            for k in ks:
                rep = boundary_measure(tower, N, k, "direct", model)
                p = out / f"contributions_N{N}_k{k}.csv"
                write(p, rep.contributions_csv())
                written.append(p)
    p = out / "summary.txt"
    write(p, "\n".join(summary_lines(verdict)) + "\n")
    written.append(p)
    kmax = max(ks)
    p = out / "cheese.png"
    write(p, _plot_cheese(tower, kmax, overlays[kmax]))
    written.append(p)
    if tower.kind == "exponential":
        p = out / "margins.png"
        write(p, _plot_margins(verdict))
        written.append(p)
    return written
