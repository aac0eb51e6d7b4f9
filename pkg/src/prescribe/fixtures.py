"""Synthetic bank-marketing-style demo dataset.

Column names follow the familiar UCI bank-marketing vocabulary (CAMPAIGN
calls, CONVERSION outcome, euribor3m, job, age, housing) but the rows come
from a documented structural model so effect and policy tests have analytic
ground truth. Generation is fully seeded.

Structural model (per client):
  euribor3m ~ one of {1.344, 1.811, 4.021, 4.964}, equal weights
  job       ~ {admin, technician, blue-collar, services, management}
  age       ~ uniform integers 22..64
  housing   ~ Bernoulli(0.55)
  CAMPAIGN  | euribor3m: more calls were historically made when rates were
              high (confounding), values 0..5
  CONVERSION ~ Bernoulli(p),
      p = base(euribor3m) + gain(job, euribor3m) * min(CAMPAIGN, 3) / 3
  where high-rate, office-job clients respond strongly to extra calls and
  low-rate clients convert at a higher base rate regardless.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dataset import DatasetMetadata, DataTable, load_metadata, load_table

EURIBOR_LEVELS = [1.344, 1.811, 4.021, 4.964]
JOBS = ["admin", "technician", "blue-collar", "services", "management"]
RESPONSIVE_JOBS = {"admin", "management"}


def _conversion_probability(job: str, euribor: float, campaign: int) -> float:
    high_rate = euribor >= 4.0
    base = 0.02 if high_rate else 0.15
    if high_rate:
        gain = 0.35 if job in RESPONSIVE_JOBS else 0.12
    else:
        gain = 0.10 if job in RESPONSIVE_JOBS else 0.04
    p = base + gain * min(campaign, 3) / 3.0
    return min(max(p, 0.01), 0.95)


def generate_bank_csv(path: str | Path, n: int = 2000, seed: int = 11) -> Path:
    rng = np.random.default_rng(seed)
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age", "job", "euribor3m", "housing", "CAMPAIGN", "CONVERSION"])
        for _ in range(n):
            euribor = EURIBOR_LEVELS[int(rng.integers(0, len(EURIBOR_LEVELS)))]
            job = JOBS[int(rng.integers(0, len(JOBS)))]
            age = int(rng.integers(22, 65))
            housing = "yes" if rng.random() < 0.55 else "no"
            # historical calling leaned into high-rate periods
            mean_calls = 3.2 if euribor >= 4.0 else 1.2
            campaign = int(np.clip(rng.poisson(mean_calls), 0, 5))
            p = _conversion_probability(job, euribor, campaign)
            conversion = "yes" if rng.random() < p else "no"
            writer.writerow([age, job, f"{euribor:.3f}", housing, campaign, conversion])
    return path


def bank_metadata_dict(csv_path: str | Path) -> dict:
    return {
        "title": "Bank Marketing",
        "path": str(csv_path),
        "action": "CAMPAIGN",
        "outcome": "CONVERSION",
        "columns": [
            {"name": "age", "dtype": "numeric", "description": "client age in years"},
            {"name": "job", "dtype": "categorical", "description": "client occupation"},
            {
                "name": "euribor3m",
                "dtype": "numeric",
                "description": "3-month Euribor rate at contact time",
            },
            {"name": "housing", "dtype": "boolean", "description": "has a housing loan"},
            {
                "name": "CAMPAIGN",
                "dtype": "numeric",
                "description": "number of calls made to the client this campaign",
            },
            {
                "name": "CONVERSION",
                "dtype": "boolean",
                "description": "client subscribed to the term deposit",
            },
        ],
    }


def demo_dataset(
    out_dir: str | Path, n: int = 2000, seed: int = 11
) -> tuple[DatasetMetadata, DataTable]:
    """Write the demo CSV + metadata under out_dir and load both back."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = generate_bank_csv(out / "bank.csv", n=n, seed=seed)
    meta_path = out / "bank_meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(bank_metadata_dict(csv_path), fh, indent=2)
    meta = load_metadata(meta_path)
    table = load_table(meta)
    return meta, table
