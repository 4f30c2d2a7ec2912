"""Figures written next to the CLI's tabular output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from terrasim.partition_router import PARTITIONS  # noqa: E402
from terrasim.simkernel.ledger import CATEGORIES, CAUSES, HOUR, ROW_LABELS, DowntimeLedger  # noqa: E402
from terrasim.simkernel.report import AvailabilityReport  # noqa: E402
from terrasim.storage import StorageCalibration, standard_profiles, throughput  # noqa: E402

# fixed metadata keeps PNG bytes stable across runs
_META = {"Software": None}


def downtime_by_category(report: AvailabilityReport, path) -> None:
    x = np.arange(len(CAUSES))
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for i, cat in enumerate(CATEGORIES):
        hours = [report.cell_s(c, cat) / HOUR for c in CAUSES]
        ax.bar(x + (i - 0.5) * 0.38, hours, 0.38, label=cat)
    ax.set_xticks(x, [ROW_LABELS[c] for c in CAUSES], fontsize=8)
    ax.set_ylabel("hours")
    ax.set_title(f"Downtime by category ({report.percent_available:.2f}% available)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def outage_timeline(ledger: DowntimeLedger, path) -> None:
    fig, ax = plt.subplots(figsize=(8, 2.5))
    colors = {"planned": "tab:blue", "unplanned": "tab:red"}
    for row, p in enumerate(PARTITIONS):
        for cat in CATEGORIES:
            spans = [(iv.start / 86400, max(iv.duration / 86400, 0.5))
                     for iv in ledger.intervals if iv.partition == p and iv.category == cat]
            if spans:
                ax.broken_barh(spans, (row - 0.35, 0.7), color=colors[cat])
    ax.set_yticks(range(len(PARTITIONS)), PARTITIONS)
    ax.set_xlim(0, ledger.horizon_s / 86400)
    ax.set_xlabel("day (outages widened to stay visible)")
    ax.set_title("Partition outages")
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def throughput_curves(path, calibration: StorageCalibration | None = None, max_volumes: int = 10) -> None:
    n = np.arange(1, max_volumes + 1)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for prof in standard_profiles():
        if prof.queue_depth != 4:
            continue
        ax.plot(n, [throughput(prof, int(k), calibration).mbps for k in n], marker="o", label=prof.label)
    ax.set_xlabel("active volumes")
    ax.set_ylabel("MB/s")
    ax.set_title("Aggregate throughput envelope")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
