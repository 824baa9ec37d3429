"""Read-only query service over an insight store: criteria, facets, related,
and top finders with generalization probing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from fastapi import Depends, FastAPI, Header, HTTPException, Query

from .model import REFINEMENT_DIMENSIONS, CohortKey, Insight
from .pipeline import InsightStore

DEFAULT_DROP_ORDER = REFINEMENT_DIMENSIONS


def _insight_payload(insights: Sequence[Insight]) -> list[dict]:
    return [
        {
            "type": i.comp_type.value,
            "p10": i.p10,
            "median": i.median,
            "p90": i.p90,
            "count": i.count,
            "histogram": [list(b) for b in i.histogram] if i.histogram else None,
            "smoothed": i.smoothed,
            "source": i.source,
        }
        for i in insights
    ]


@dataclass
class InsightService:
    store: InsightStore
    drop_order: Sequence[str] = DEFAULT_DROP_ORDER

    def generalization_chain(self, key: CohortKey) -> list[tuple[CohortKey, str]]:
        """Successive single-attribute drops in configured order, ending at
        the root."""
        chain = []
        current = key
        while current.refinements:
            dims = current.refinement_dims()
            dim = next((d for d in self.drop_order if d in dims), dims[0])
            current = current.without(dim)
            chain.append((current, dim))
        return chain

    def find_criteria(self, key: CohortKey, allow_generalization: bool = True) -> dict:
        hits = self.store.lookup(key)
        if hits:
            return {
                "status": "found",
                "served_key": key.canonical(),
                "payload": _insight_payload(hits),
                "generalization_steps": [],
            }
        if allow_generalization:
            steps: list[str] = []
            for candidate, dropped in self.generalization_chain(key):
                steps.append(dropped)
                hits = self.store.lookup(candidate)
                if hits:
                    return {
                        "status": "generalized",
                        "served_key": candidate.canonical(),
                        "payload": _insight_payload(hits),
                        "generalization_steps": steps,
                    }
        return {
            "status": "not-found",
            "served_key": None,
            "payload": [],
            "generalization_steps": [],
        }

    def find_facets(self, key: CohortKey) -> dict:
        canon = key.root.canonical()
        if canon not in self.store.insights:
            return {"status": "not-found", "served_key": None, "payload": {},
                    "generalization_steps": []}
        return {
            "status": "found",
            "served_key": canon,
            "payload": self.store.facets.get(canon, {}),
            "generalization_steps": [],
        }

    def find_related(self, key: CohortKey) -> dict:
        canon = key.root.canonical()
        if canon not in self.store.insights:
            return {"status": "not-found", "served_key": None, "payload": [],
                    "generalization_steps": []}
        payload = [
            {"key": neighbor, "insights": _insight_payload(self.store.insights[neighbor])}
            for neighbor in self.store.related.get(canon, [])
            if neighbor in self.store.insights
        ]
        return {"status": "found", "served_key": canon, "payload": payload,
                "generalization_steps": []}

    def find_top(self, key: CohortKey, dimension: str) -> dict:
        if dimension not in REFINEMENT_DIMENSIONS:
            raise ValueError(f"unknown dimension {dimension!r}")
        canon = key.root.canonical()
        if canon not in self.store.insights:
            return {"status": "not-found", "served_key": None, "payload": [],
                    "generalization_steps": []}
        ranked = self.store.top.get(canon, {}).get(dimension, [])
        payload = [
            {"key": k, "insights": _insight_payload(self.store.insights[k])}
            for k in ranked
            if k in self.store.insights
        ]
        return {"status": "found", "served_key": canon, "payload": payload,
                "generalization_steps": []}


def key_from_params(
    title: str,
    country: str,
    region: str,
    company: str | None = None,
    industry: str | None = None,
    experience_band: str | None = None,
    degree: str | None = None,
    company_size: str | None = None,
) -> CohortKey:
    refinements = tuple(
        (dim, value)
        for dim, value in (
            ("company", company),
            ("industry", industry),
            ("experience_band", experience_band),
            ("degree", degree),
            ("company_size", company_size),
        )
        if value
    )
    return CohortKey(title, country, region, refinements)


def create_app(
    service: InsightService, api_token: str | None = None
) -> FastAPI:
    app = FastAPI(title="payinsights")

    def check_token(x_api_token: str | None = Header(default=None)):
        if api_token is not None and x_api_token != api_token:
            raise HTTPException(status_code=401, detail="invalid token")

    def key_dep(
        title: str = Query(...),
        country: str = Query(...),
        region: str = Query(...),
        company: str | None = None,
        industry: str | None = None,
        experience_band: str | None = None,
        degree: str | None = None,
        company_size: str | None = None,
    ) -> CohortKey:
        return key_from_params(
            title, country, region, company, industry,
            experience_band, degree, company_size,
        )

    @app.get("/status")
    def status():
        return {"build_id": service.store.build_id}

    @app.get("/insights/criteria", dependencies=[Depends(check_token)])
    def criteria(
        key: CohortKey = Depends(key_dep), allow_generalization: bool = True
    ):
        return service.find_criteria(key, allow_generalization)

    @app.get("/insights/facets", dependencies=[Depends(check_token)])
    def facets(key: CohortKey = Depends(key_dep)):
        return service.find_facets(key)

    @app.get("/insights/related", dependencies=[Depends(check_token)])
    def related(key: CohortKey = Depends(key_dep)):
        return service.find_related(key)

    @app.get("/insights/top", dependencies=[Depends(check_token)])
    def top(key: CohortKey = Depends(key_dep), dimension: str = Query(...)):
        try:
            return service.find_top(key, dimension)
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))

    return app
