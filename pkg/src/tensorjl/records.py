from pathlib import Path
from pydantic import BaseModel
from tensorjl.config import settings
from typing import List
from typing import Optional
import pandas as pd


COLUMNS = [
    "schema_version",
    "experiment",
    "regime",
    "family",
    "rank",
    "k",
    "trial",
    "seed",
    "metric",
    "value",
    "wall_time_s",
    "rng",
    "threads",
]


class ResultRecord(BaseModel):
    """One CSV row: a measured metric of one trial (or a per-configuration summary)."""

    schema_version: int = settings.SCHEMA_VERSION
    experiment: str
    regime: str
    family: str
    rank: Optional[int] = None
    k: Optional[int] = None
    trial: Optional[int] = None
    seed: Optional[int] = None
    metric: str
    value: float
    wall_time_s: Optional[float] = None
    rng: str = settings.RNG_ALGORITHM
    threads: int = 1


def to_frame(records: List[ResultRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([r.model_dump() for r in records], columns=COLUMNS)
    for column in ("rank", "k", "trial", "seed"):
        frame[column] = frame[column].astype("Int64")
    return frame


def summarize(records: List[ResultRecord]) -> List[ResultRecord]:
    """Per-configuration mean and standard error rows for every per-trial metric."""
    trial_rows = [r for r in records if r.trial is not None]
    if not trial_rows:
        return []
    frame = to_frame(trial_rows)
    keys = ["experiment", "regime", "family", "rank", "k", "metric", "threads"]
    grouped = frame.groupby(keys, sort=False, dropna=False)["value"]
    stats = grouped.agg(mean="mean", sem="sem", n="count").reset_index()
    summary = []
    for row in stats.itertuples(index=False):
        common = dict(
            experiment=row.experiment,
            regime=row.regime,
            family=row.family,
            rank=None if pd.isna(row.rank) else int(row.rank),
            k=None if pd.isna(row.k) else int(row.k),
            threads=int(row.threads),
        )
        summary.append(
            ResultRecord(metric=f"{row.metric}_mean", value=row.mean, **common)
        )
        summary.append(
            ResultRecord(
                metric=f"{row.metric}_stderr",
                value=0.0 if row.n < 2 else row.sem,
                **common,
            )
        )
    return summary


def write_csv(records: List[ResultRecord], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    to_frame(records).to_csv(path, index=False, encoding="utf-8")
    return path
