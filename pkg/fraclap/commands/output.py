import json
import logging
import os
from typing import Dict

from fraclap import __version__

logger = logging.getLogger(__name__)

PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Log-log plot of energy errors against the number of elements.

Generated by fraclap {version} (config {config_hash}). Needs matplotlib.
"""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
FILES = {files}
REFERENCE_RATE = {rate}


def read(path):
    with open(os.path.join(HERE, path)) as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    return [int(r["n_elements"]) for r in rows], [float(r["error"]) for r in rows]


def main():
    fig, ax = plt.subplots()
    anchor = None
    for label, path in FILES.items():
        n, error = read(path)
        ax.loglog(n, error, "o-", label=label)
        if anchor is None and n:
            anchor = (n[0], error[0])
    if anchor is not None:
        n0, e0 = anchor
        xs = [n0, 10 * n0]
        ax.loglog(xs, [e0 * (x / n0) ** REFERENCE_RATE for x in xs], "k--", label=f"slope {{REFERENCE_RATE:.2f}}")
    ax.set_xlabel("#T")
    ax.set_ylabel("energy error")
    ax.legend()
    fig.savefig(os.path.join(HERE, "rates.png"), dpi=150)


if __name__ == "__main__":
    main()
'''


def metadata_header(settings, **extra) -> Dict[str, object]:
    header: Dict[str, object] = {
        "version": __version__,
        "config_hash": settings.config_hash(),
        "command": settings.command,
        "domain": settings.domain,
    }
    header.update(extra)
    return header


def output_path(settings, name: str) -> str:
    os.makedirs(settings.out, exist_ok=True)
    return os.path.join(settings.out, name)


def write_plot_script(settings, files: Dict[str, str], reference_rate: float) -> str:
    """Plain-text matplotlib script next to the CSV files it reads."""
    relative = {label: os.path.basename(path) for label, path in files.items()}
    path = output_path(settings, "plot_rates.py")
    with open(path, "w", encoding="utf-8") as f:
        f.write(PLOT_TEMPLATE.format(version=__version__, config_hash=settings.config_hash()[:12],
                                     files=json.dumps(relative, indent=4, sort_keys=True), rate=repr(reference_rate)))
    logger.info(f"Wrote plot script {path}")
    return path


def write_json(settings, name: str, payload: dict) -> str:
    path = output_path(settings, name)
    document = {"metadata": metadata_header(settings), **payload}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path
