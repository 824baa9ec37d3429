from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from payinsights.model import CohortKey
from payinsights.pipeline import InsightStore
from payinsights.service import InsightService, create_app, key_from_params


@pytest.fixture(scope="module")
def service(fixture_store):
    return InsightService(fixture_store)


@pytest.fixture(scope="module")
def client(service):
    return TestClient(create_app(service))


SWE = {"title": "software-engineer", "country": "US", "region": "sf-bay-area"}


class TestCriteria:
    def test_exact_hit(self, service):
        resp = service.find_criteria(key_from_params(**SWE))
        assert resp["status"] == "found"
        assert resp["served_key"] == "software-engineer|US|sf-bay-area"
        assert resp["generalization_steps"] == []
        assert resp["payload"]

    def test_company_generalizes_to_industry(self, service):
        # The company-refined key is absent; probing drops company first and
        # lands on the industry-refined cohort.
        key = key_from_params(**SWE, company="slack", industry="internet")
        resp = service.find_criteria(key)
        assert resp["status"] == "generalized"
        assert resp["served_key"] == "software-engineer|US|sf-bay-area|industry=internet"
        assert resp["generalization_steps"] == ["company"]

    def test_probes_to_root(self, service):
        key = key_from_params(**SWE, company="slack", industry="aerospace")
        resp = service.find_criteria(key)
        assert resp["status"] == "generalized"
        assert resp["served_key"] == "software-engineer|US|sf-bay-area"
        assert resp["generalization_steps"] == ["company", "industry"]

    def test_generalization_disabled(self, service):
        key = key_from_params(**SWE, company="slack")
        resp = service.find_criteria(key, allow_generalization=False)
        assert resp["status"] == "not-found"
        assert resp["served_key"] is None

    def test_nothing_anywhere(self, service):
        resp = service.find_criteria(
            key_from_params("no-such-title", "US", "nowhere", company="x")
        )
        assert resp["status"] == "not-found"

    def test_chain_strictly_decreasing(self, service):
        key = key_from_params(
            **SWE, company="a", industry="b", degree="c", experience_band="d"
        )
        chain = service.generalization_chain(key)
        counts = [len(k.refinements) for k, _ in chain]
        assert counts == sorted(counts, reverse=True)
        assert len(chain) == len(key.refinements)
        assert chain[-1][0].is_root


class TestFacets:
    def test_industry_facet_present(self, service):
        resp = service.find_facets(key_from_params(**SWE))
        assert resp["status"] == "found"
        assert "internet" in resp["payload"].get("industry", [])

    def test_unknown_root(self, service):
        resp = service.find_facets(key_from_params("ghost", "US", "nowhere"))
        assert resp["status"] == "not-found"

    def test_referential_integrity(self, service, fixture_store):
        for canon in fixture_store.insights:
            root = CohortKey.from_canonical(canon).root
            resp = service.find_facets(root)
            if resp["status"] != "found":
                continue
            for dim, values in resp["payload"].items():
                for value in values:
                    refined = CohortKey(
                        root.title, root.country, root.region, ((dim, value),)
                    )
                    assert service.find_criteria(refined)["status"] == "found"


class TestTopAndRelated:
    def test_top_sorted(self, service, fixture_store):
        for canon, dims in fixture_store.top.items():
            root = CohortKey.from_canonical(canon)
            for dim, ranked in dims.items():
                resp = service.find_top(root, dim)
                assert [p["key"] for p in resp["payload"]] == ranked
                medians = []
                for p in resp["payload"]:
                    base = [i for i in p["insights"] if i["type"] == "BASE_SALARY"]
                    if base:
                        medians.append(base[0]["median"])
                assert medians == sorted(medians, reverse=True)

    def test_top_resolves_via_criteria(self, service, fixture_store):
        for canon, dims in fixture_store.top.items():
            for ranked in dims.values():
                for key_str in ranked:
                    key = CohortKey.from_canonical(key_str)
                    assert service.find_criteria(key)["status"] == "found"

    def test_related_resolves(self, service, fixture_store):
        for canon in fixture_store.related:
            resp = service.find_related(CohortKey.from_canonical(canon))
            for p in resp["payload"]:
                key = CohortKey.from_canonical(p["key"])
                assert service.find_criteria(key)["status"] == "found"

    def test_unknown_dimension(self, service):
        with pytest.raises(ValueError):
            service.find_top(key_from_params(**SWE), "hair-color")


class TestHttp:
    def test_status_build_id(self, client, fixture_store):
        r = client.get("/status")
        assert r.status_code == 200
        assert r.json()["build_id"] == fixture_store.build_id

    def test_criteria_endpoint(self, client):
        r = client.get("/insights/criteria", params=SWE)
        assert r.status_code == 200
        assert r.json()["status"] == "found"

    def test_generalization_over_http(self, client):
        r = client.get(
            "/insights/criteria",
            params={**SWE, "company": "slack", "industry": "internet"},
        )
        body = r.json()
        assert body["status"] == "generalized"
        assert body["generalization_steps"] == ["company"]

    def test_top_endpoint_bad_dimension(self, client):
        r = client.get("/insights/top", params={**SWE, "dimension": "nope"})
        assert r.status_code == 400

    def test_token_guard(self, service):
        guarded = TestClient(create_app(service, api_token="sekrit"))
        assert guarded.get("/insights/criteria", params=SWE).status_code == 401
        ok = guarded.get(
            "/insights/criteria", params=SWE, headers={"X-API-Token": "sekrit"}
        )
        assert ok.status_code == 200

    def test_concurrent_matches_sequential(self, client, fixture_store):
        keys = sorted(fixture_store.insights)[:50]
        requests = []
        for i in range(200):
            canon = keys[i % len(keys)]
            key = CohortKey.from_canonical(canon)
            params = {"title": key.title, "country": key.country, "region": key.region}
            for dim, value in key.refinements:
                params[dim] = value
            if i % 3 == 0:
                requests.append(("/insights/criteria", params))
            elif i % 3 == 1:
                requests.append(("/insights/facets", params))
            else:
                requests.append(("/insights/top", {**params, "dimension": "company"}))

        sequential = [client.get(u, params=p).json() for u, p in requests]
        with ThreadPoolExecutor(max_workers=16) as pool:
            concurrent = list(
                pool.map(lambda up: client.get(up[0], params=up[1]).json(), requests)
            )
        assert concurrent == sequential
