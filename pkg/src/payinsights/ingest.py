"""File ingestion: submissions, external wage data, mapping files, overrides."""

from __future__ import annotations

import csv
import json
from typing import Iterable

from .model import (
    REFINEMENT_DIMENSIONS,
    CompensationEntry,
    CompensationType,
    RawSubmission,
)
from .outliers import ExternalLimitRow

_AMOUNT_KEYS = {
    "base_salary": CompensationType.BASE_SALARY,
    "annual_bonus": CompensationType.ANNUAL_BONUS,
    "sign_on_bonus": CompensationType.SIGN_ON_BONUS,
    "commission": CompensationType.COMMISSION,
    "stock": CompensationType.STOCK,
    "tips": CompensationType.TIPS,
    "other": CompensationType.OTHER,
}


def parse_submission(obj: dict, line_no: int = 0) -> RawSubmission:
    for attr in ("title", "country", "region"):
        if not obj.get(attr):
            raise ValueError(f"line {line_no}: missing root attribute {attr!r}")
    amounts_raw = obj.get("amounts") or {}
    if "base_salary" not in amounts_raw:
        raise ValueError(f"line {line_no}: missing base_salary")
    amounts = {}
    for k, v in amounts_raw.items():
        if k not in _AMOUNT_KEYS:
            raise ValueError(f"line {line_no}: unknown amount key {k!r}")
        amounts[_AMOUNT_KEYS[k]] = float(v)
    attributes = tuple(
        (dim, str(obj[dim])) for dim in REFINEMENT_DIMENSIONS if obj.get(dim)
    )
    return RawSubmission(
        title=str(obj["title"]),
        country=str(obj["country"]),
        region=str(obj["region"]),
        attributes=attributes,
        entry=CompensationEntry(amounts, submission_id=str(obj.get("submission_id", ""))),
    )


def load_submissions(path: str) -> tuple[list[RawSubmission], list[str]]:
    """Newline-delimited JSON submissions; bad records are reported, not fatal."""
    subs, diagnostics = [], []
    with open(path) as f:
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                subs.append(parse_submission(json.loads(line), i))
            except (ValueError, KeyError, json.JSONDecodeError) as e:
                diagnostics.append(str(e))
    return subs, diagnostics


def write_submissions(path: str, submissions: Iterable[RawSubmission]) -> None:
    reverse = {v: k for k, v in _AMOUNT_KEYS.items()}
    with open(path, "w") as f:
        for sub in submissions:
            obj = {
                "title": sub.title,
                "country": sub.country,
                "region": sub.region,
                "amounts": {
                    reverse[t]: v for t, v in sorted(sub.entry.amounts.items(), key=lambda kv: kv[0].value)
                },
            }
            for dim, value in sub.attributes:
                obj[dim] = value
            if sub.entry.submission_id:
                obj["submission_id"] = sub.entry.submission_id
            f.write(json.dumps(obj, sort_keys=True) + "\n")


def load_external_wage_rows(path: str) -> list[ExternalLimitRow]:
    rows = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            rows.append(
                ExternalLimitRow(
                    occupation_id=row["occ_id"],
                    external_region_id=row["ext_region_id"],
                    p10=float(row["p10"]),
                    p25=float(row["p25"]),
                    p50=float(row["p50"]),
                    p75=float(row["p75"]),
                    p90=float(row["p90"]),
                )
            )
    return rows


def load_many_to_many(path: str, from_col: str, to_col: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.setdefault(row[from_col], []).append(row[to_col])
    return out


def load_similar_map(path: str) -> dict[str, list[str]]:
    """JSON map of id -> ranked list of similar ids."""
    with open(path) as f:
        d = json.load(f)
    return {str(k): [str(x) for x in v] for k, v in d.items()}
