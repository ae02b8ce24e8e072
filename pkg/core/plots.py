# core/plots.py
"""
SVG line charts for PR curves, bench timings and technique selection traces
"""

import io
from typing import Dict, Sequence, Tuple

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from utils.logger import logger


Series = Dict[str, Tuple[Sequence[float], Sequence[float]]]


def svg_line_chart(series: Series, title: str, x_label: str, y_label: str,
                   step: bool = False, log_x: bool = False) -> str:
    """Render named (x, y) series into one self-contained SVG document"""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        for name, (xs, ys) in series.items():
            if step:
                ax.step(list(xs), list(ys), where='post', label=name)
            else:
                ax.plot(list(xs), list(ys), marker='o', markersize=3, label=name)
        if log_x:
            ax.set_xscale('log')
        ax.set_title(title)
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.grid(True, alpha=0.3)
        if len(series) > 1:
            ax.legend(loc='best')

        buffer = io.StringIO()
        fig.savefig(buffer, format='svg', bbox_inches='tight')
    finally:
        plt.close(fig)

    logger.debug(f"Rendered chart '{title}' with {len(series)} series", "PLOTS")
    return buffer.getvalue()


def write_svg(svg: str, path) -> None:
    with open(path, 'w') as f:
        f.write(svg)
    logger.info(f"Wrote {path}", "PLOTS")
