import logging

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger('plotting')

# Fixed element ids so repeated runs write identical SVG files
matplotlib.rcParams['svg.hashsalt'] = 'smoothfem'

MARKERS = ('o', 's', '^', 'v', 'D', 'x')


def convergence_plot(curves, path, ylabel='relative energy error', title=None):
    """
    Log-log chart of error against mesh size with a slope-1 guide line

    Args:
        curves: mapping label -> list of (h, error), plotted in insertion order
        path: SVG file to write
    """
    fig, ax = plt.subplots(figsize=(6, 5))
    all_h = []
    anchor = None
    for index, (label, points) in enumerate(curves.items()):
        points = sorted(points)
        if not points:
            continue
        h = np.array([p[0] for p in points])
        e = np.array([p[1] for p in points])
        ax.loglog(h, e, marker=MARKERS[index % len(MARKERS)], label=label)
        all_h.extend(h.tolist())
        if anchor is None:
            anchor = (h[-1], e[-1])

    if anchor is not None and len(set(all_h)) > 1:
        hs = np.array([min(all_h), max(all_h)])
        ax.loglog(hs, anchor[1] * hs / anchor[0], 'k--', lw=0.8, label='slope 1')

    ax.grid(True, which='major')
    ax.set_xlabel('h')
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(loc='lower right')
    fig.savefig(path, format='svg', bbox_inches='tight', metadata={'Date': None})
    plt.close(fig)
    logger.info(f"Wrote convergence plot {path}")
    return path
