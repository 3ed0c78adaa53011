"""PNG rendering of polytopes.

matplotlib is an optional extra (``pip install artifact[plot]``) and is only
imported when a plot is requested, so the core package never depends on it.
"""
import numpy as np

from .polytope import Polytope


class PlottingUnavailable(RuntimeError):
    pass


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise PlottingUnavailable("matplotlib is not installed; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_polytope(P: Polytope, path, title: str = ""):
    """Write a PNG of a polygon (outline) or a 3-polytope (shaded facets)."""
    plt = _pyplot()
    if P.dim == 2:
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        order, _ = P.boundary_cycle()
        xy = P.vertices[np.append(order, order[0])]
        ax.fill(xy[:, 0], xy[:, 1], color="#c6dbef", zorder=1)
        ax.plot(xy[:, 0], xy[:, 1], color="#08519c", lw=1.5, zorder=2)
        ax.plot([0.0], [0.0], marker="+", color="k", ms=8)
        ax.set_aspect("equal")
        ax.grid(True, lw=0.3, alpha=0.5)
    elif P.dim == 3:
        from mpl_toolkits.mplot3d.art3d import Poly3DCollection

        fig = plt.figure(figsize=(5, 5))
        ax = fig.add_subplot(projection="3d")
        tris = [tri for f in P.facets if not f.empty for tri in f.simplices]
        ax.add_collection3d(Poly3DCollection(tris, facecolor="#9ecae1", edgecolor="none",
                                             alpha=0.6))
        for i, j in P.edges():
            seg = P.vertices[[i, j]]
            ax.plot(seg[:, 0], seg[:, 1], seg[:, 2], color="#08519c", lw=1.0)
        lo, hi = P.vertices.min(axis=0), P.vertices.max(axis=0)
        mid, half = 0.5 * (lo + hi), 0.5 * float(np.max(hi - lo))
        ax.set_xlim(mid[0] - half, mid[0] + half)
        ax.set_ylim(mid[1] - half, mid[1] + half)
        ax.set_zlim(mid[2] - half, mid[2] + half)
        ax.set_box_aspect((1, 1, 1))
    else:
        raise ValueError("plots are only produced for n = 2 and n = 3")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    # drop the Software tag so reruns produce identical files
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
