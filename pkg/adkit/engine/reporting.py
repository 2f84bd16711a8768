"""Metric report files.

Each report is written twice: a nested JSON document and a CSV table with
one row per category, then a ``MEAN`` row, in a fixed column order.
"""

import json
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import pandas as pd
from tabulate import tabulate

from adkit.core.exceptions import PreconditionError
from adkit.data.dataset import order_categories
from adkit.schemas.metrics import MEAN_ROW, REPORT_COLUMNS, MetricReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def report_frame(report: MetricReport) -> pd.DataFrame:
    """One row per category plus the ``MEAN`` row."""
    rows = [{"category": c, **m.as_row()} for c, m in report.per_category.items()]
    rows.append({"category": MEAN_ROW, **report.aggregate.as_row()})
    return pd.DataFrame(rows, columns=["category", *REPORT_COLUMNS])


def log_table(frame: pd.DataFrame, title: str) -> None:
    logger.info(f"{title}\n" + tabulate(frame, headers="keys", tablefmt="github", floatfmt=".4f", showindex=False))


def write_report(report: MetricReport, directory: PathLike, stem: str) -> Tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.csv``.

    Returns:
        Paths of the JSON and CSV files
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / f"{stem}.json"
    csv_path = directory / f"{stem}.csv"
    json_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    frame = report_frame(report)
    frame.to_csv(csv_path, index=False)
    log_table(frame, stem)
    logger.info(f"Report written to {json_path} and {csv_path}")
    return json_path, csv_path


def aggregate_reports(reports: Sequence[MetricReport]) -> pd.DataFrame:
    """Mean and population standard deviation of every metric over seeds.

    Returns:
        Frame with ``category`` then ``<metric>`` and ``<metric>_std`` for
        every report column, categories in benchmark order, ``MEAN`` last

    Raises:
        PreconditionError: If no reports are given or their categories differ
    """
    if not reports:
        raise PreconditionError("no reports to aggregate")
    categories = set(reports[0].per_category)
    if any(set(r.per_category) != categories for r in reports):
        raise PreconditionError("reports cover different categories")

    stacked = pd.concat([report_frame(r) for r in reports], ignore_index=True)
    grouped = stacked.groupby("category", sort=False)[REPORT_COLUMNS]
    means = grouped.mean()
    stds = grouped.std(ddof=0)

    order: List[str] = [*order_categories(list(categories)), MEAN_ROW]
    columns = {}
    for column in REPORT_COLUMNS:
        columns[column] = means.loc[order, column]
        columns[f"{column}_std"] = stds.loc[order, column]
    frame = pd.DataFrame(columns, index=order)
    frame.index.name = "category"
    return frame.reset_index()


def write_aggregate(frame: pd.DataFrame, directory: PathLike, stem: str = "report-aggregate") -> Tuple[Path, Path]:
    """Write an aggregate frame as nested JSON and CSV."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / f"{stem}.json"
    csv_path = directory / f"{stem}.csv"

    document = {}
    for record in frame.to_dict(orient="records"):
        category = record.pop("category")
        document[category] = {
            column: {"mean": float(record[column]), "std": float(record[f"{column}_std"])}
            for column in REPORT_COLUMNS
        }
    json_path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    frame.to_csv(csv_path, index=False)
    log_table(frame[["category", *REPORT_COLUMNS]], f"{stem} (mean over seeds)")
    logger.info(f"Aggregate report written to {json_path} and {csv_path}")
    return json_path, csv_path
