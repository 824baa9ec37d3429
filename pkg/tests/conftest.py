import json

import numpy as np
import pytest

from payinsights.evalharness import SyntheticSpec, generate
from payinsights.ingest import write_submissions
from payinsights.model import CompensationEntry, CompensationType, RawSubmission


def _segment(rng, title, region, attrs, mu, sd, n, start_id):
    subs = []
    for i in range(n):
        base = float(np.exp(rng.normal(mu, sd)))
        bonus = float(np.exp(rng.normal(mu - 2.0, sd)))
        subs.append(
            RawSubmission(
                title, "US", region, attrs,
                CompensationEntry(
                    {
                        CompensationType.BASE_SALARY: base,
                        CompensationType.ANNUAL_BONUS: bonus,
                    },
                    submission_id=f"fx{start_id + i}",
                ),
            )
        )
    return subs


def fixture_submissions(seed=123):
    """Synthetic corpus plus a hand-built engineer/bay-area segment with
    industry-refined cohorts (but no company-refined ones) for
    generalization-probing tests."""
    rng = np.random.default_rng(seed)
    spec = SyntheticSpec(
        n_roots=8,
        refinement_dims=("company", "industry"),
        branching=2,
        child_size_range=(4, 30),
        root_extra_range=(25, 45),
        seed=seed,
    )
    subs, _truth = generate(spec)
    subs = list(subs)
    i = 0
    subs += _segment(rng, "software-engineer", "sf-bay-area", (), 11.8, 0.25, 40, i)
    subs += _segment(
        rng, "software-engineer", "sf-bay-area",
        (("industry", "internet"),), 11.9, 0.2, 25, i := i + 1000,
    )
    subs += _segment(
        rng, "software-engineer", "sf-bay-area",
        (("industry", "finance"),), 11.95, 0.2, 8, i := i + 1000,
    )
    return subs


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory):
    """Submissions file plus a config pointing at it."""
    root = tmp_path_factory.mktemp("fixture")
    submissions = root / "submissions.ndjson"
    write_submissions(str(submissions), fixture_submissions())
    store_out = root / "store.ndjson"
    config = {
        "paths": {
            "submissions": str(submissions),
            "store_out": str(store_out),
        },
        "params": {"k_min": 3, "h": 20},
        "seed": 7,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    return {
        "root": root,
        "submissions": submissions,
        "config": config_path,
        "store_out": store_out,
    }


@pytest.fixture(scope="session")
def fixture_store(fixture_paths):
    from payinsights.build import build_store
    from payinsights.config import Config

    store, _report, _warnings = build_store(Config.load(str(fixture_paths["config"])))
    return store
