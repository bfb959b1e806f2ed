"""Optional PNG figures for a finished run directory (requires matplotlib)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .surface import read_surface_csv


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ImportError("plotting needs matplotlib; install simexplore[plot]") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _read_table(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = lines[0].split(",")
    body = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]) if len(lines) > 1 else np.empty((0, len(header)))
    return header, body


def plot_surface(csv_path: Path, png_path: Path, title: str) -> Path:
    plt = _pyplot()
    header, body = read_surface_csv(csv_path)
    dims = [h for h in header if h not in ("likelihood", "std_error")]
    z = body[:, header.index("likelihood")]
    fig, ax = plt.subplots(figsize=(5, 4))
    if len(dims) == 1:
        ax.plot(body[:, 0], z, marker=".")
        if "std_error" in header:
            se = body[:, header.index("std_error")]
            ax.fill_between(body[:, 0], z - 2 * se, z + 2 * se, alpha=0.3)
        ax.set_xlabel(dims[0])
        ax.set_ylabel("P(R | theta)")
    else:
        xs, ys = np.unique(body[:, 0]), np.unique(body[:, 1])
        grid = z.reshape(len(xs), len(ys))
        mesh = ax.pcolormesh(ys, xs, grid, shading="nearest", vmin=0, vmax=max(1e-12, grid.max()))
        fig.colorbar(mesh, ax=ax, label="P(R | theta)")
        ax.set_xlabel(dims[1])
        ax.set_ylabel(dims[0])
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return png_path


def plot_samples(csv_path: Path, png_path: Path) -> Path:
    plt = _pyplot()
    names, body = _read_table(csv_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    if len(names) == 1:
        ax.hist(body[:, 0], bins=30, density=True)
        ax.set_xlabel(names[0])
    else:
        ax.scatter(body[:, 1], body[:, 0], s=4, alpha=0.5)
        ax.set_xlabel(names[1])
        ax.set_ylabel(names[0])
    ax.set_title("retained chain samples")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return png_path


def render_run(out: Path) -> list[Path]:
    """Draw every figure the run directory has data for; returns the PNG paths."""
    out = Path(out)
    made = []
    plot_dir = out / "plots"
    plot_dir.mkdir(exist_ok=True)
    if (out / "surface.csv").exists():
        made.append(plot_surface(out / "surface.csv", plot_dir / "surface.png", "likelihood (KDE + importance sampling)"))
    if (out / "grid.csv").exists():
        made.append(plot_surface(out / "grid.csv", plot_dir / "grid.png", "grid baseline"))
    if (out / "samples.csv").exists():
        made.append(plot_samples(out / "samples.csv", plot_dir / "samples.png"))
    return made
