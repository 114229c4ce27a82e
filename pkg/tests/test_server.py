import json
import threading
import time
import urllib.request
from pathlib import Path

import pytest
from jsonschema import Draft7Validator

from starcube.datagen import GenSpec, generate
from starcube.engine import Engine
from starcube.server import WarehouseApi, make_server

from conftest import FIGURE3_DIR, run_config

SCHEMA_DOC = json.loads(
    (Path(__file__).resolve().parents[1] / "docs" / "api-schema.json").read_text()
)


def _validator(name: str) -> Draft7Validator:
    return Draft7Validator({"$defs": SCHEMA_DOC["$defs"], "$ref": f"#/$defs/{name}"})


def _check(name: str, payload: dict):
    errors = list(_validator(name).iter_errors(payload))
    assert not errors, errors


@pytest.fixture
def api(figure3_engine):
    return WarehouseApi(figure3_engine)


class TestCatalog:
    def test_catalog_shape(self, api):
        status, doc = api.handle("GET", "/catalog", {}, None)
        assert status == 200
        _check("Catalog", doc)
        assert len(doc["dimensions"]) == 6
        time_dim = next(d for d in doc["dimensions"] if d["name"] == "time")
        assert [l["name"] for l in time_dim["levels"]] == ["day", "month", "quarter", "year"]

    def test_epoch_increases_after_commit(self, api, figure3_engine):
        _, before = api.handle("GET", "/catalog", {}, None)
        figure3_engine.store.insert_members("payment", [
            {"code_paiement": "99", "libelle_paiement": "AUTRE"},
        ])
        _, after = api.handle("GET", "/catalog", {}, None)
        assert after["epoch"] > before["epoch"]

    def test_view_staleness_reported(self, tmp_path):
        engine = Engine.open_or_create(tmp_path / "wh")
        api = WarehouseApi(engine)
        from starcube.cube import GroupBySpec
        from starcube.mview import MViewDef

        engine.mviews.define(MViewDef(
            name="V",
            spec=GroupBySpec.from_levels(engine.schema, {"regime": "regime"}),
            measures=(("sum", "montant"),),
        ))
        _, doc = api.handle("GET", "/catalog", {}, None)
        assert doc["mviews"][0]["stale"] is True
        _check("Catalog", doc)


class TestMembers:
    def test_governorate_members(self, api):
        status, doc = api.handle(
            "GET", "/dimensions/office/members", {"level": "governorate"}, None
        )
        assert status == 200
        _check("MembersPage", doc)
        assert 0 < doc["total"] <= 24
        labels = [m["label"] for m in doc["members"]]
        assert labels == sorted(labels)

    def test_children_of_year(self, api):
        status, doc = api.handle(
            "GET", "/dimensions/time/members",
            {"level": "quarter", "parent": "2009"}, None,
        )
        assert status == 200
        keys = [m["key"] for m in doc["members"]]
        assert keys == ["2009-Q1", "2009-Q2"] or len(keys) <= 4
        assert all(k.startswith("2009") for k in keys)

    def test_unknown_parent_404(self, api):
        status, doc = api.handle(
            "GET", "/dimensions/time/members",
            {"level": "quarter", "parent": "1900"}, None,
        )
        assert status == 404
        _check("ErrorBody", doc)

    def test_unknown_dimension_404(self, api):
        status, doc = api.handle("GET", "/dimensions/agency/members", {}, None)
        assert status == 404
        _check("ErrorBody", doc)

    def test_paging_stable(self, api):
        _, page1 = api.handle("GET", "/dimensions/office/members",
                              {"level": "office", "page_size": "3"}, None)
        _, page2 = api.handle("GET", "/dimensions/office/members",
                              {"level": "office", "page": "2", "page_size": "3"}, None)
        assert len(page1["members"]) == 3
        assert page1["members"] != page2["members"]


class TestQuery:
    def test_report_rows_via_api(self, api):
        status, doc = api.handle("POST", "/query", {}, {
            "query": {"group_by": {"office": "governorate",
                                   "prestation": "prestation"}},
            "echo": "t1",
        })
        assert status == 200
        _check("QueryResponse", doc)
        assert doc["echo"] == "t1"
        rows = {tuple(r["labels"]): r["values"][0] for r in doc["grid"]["rows"]}
        assert rows[("ARIANA", "66")] == 591330
        assert rows[("ARIANA", "79")] == -298209150

    def test_empty_result_is_200(self, api):
        status, doc = api.handle("POST", "/query", {}, {
            "query": {"group_by": {"office": "governorate"},
                      "time_range": {"from": "1990-01-01", "to": "1990-01-02"}},
        })
        assert status == 200
        assert doc["grid"]["rows"] == []

    def test_malformed_level_is_400_with_field(self, api):
        status, doc = api.handle("POST", "/query", {}, {
            "query": {"group_by": {"office": "region"}},
        })
        assert status == 400
        _check("ErrorBody", doc)
        assert doc["field"] == "group_by"

    def test_plan_provenance_present(self, api):
        _, doc = api.handle("POST", "/query", {}, {
            "query": {"group_by": {"regime": "regime"}},
        })
        assert doc["plan"]["kind"] == "mview"
        assert doc["plan"]["elapsed_ms"] >= 0

    def test_force_plan(self, api):
        _, doc = api.handle("POST", "/query", {}, {
            "query": {"group_by": {"regime": "regime"}}, "force_plan": "scan",
        })
        assert doc["plan"]["kind"] == "scan"


class TestAdmin:
    def test_refresh_views_noop(self, api):
        status, doc = api.handle("POST", "/admin/refresh-views", {}, {})
        assert status == 200
        _check("RefreshResponse", doc)
        assert doc["refreshed"] == 0

    def test_etl_run_and_poll(self, tmp_path):
        gen_dir = tmp_path / "gen"
        generate(GenSpec(seed=3, facts=300, insured=30), gen_dir)
        engine = Engine.open_or_create(tmp_path / "wh")
        api = WarehouseApi(engine)
        status, doc = api.handle("POST", "/admin/etl-run", {}, {
            "config": str(gen_dir / "pipeline.toml"),
        })
        assert status == 200
        _check("JobStatus", doc)
        job = doc["job"]
        for _ in range(200):
            status, doc = api.handle("GET", f"/admin/jobs/{job}", {}, None)
            if doc["status"] != "running":
                break
            time.sleep(0.01)
        assert doc["status"] == "done", doc
        _check("JobStatus", doc)
        assert doc["report"]["targets"]["fact"]["inserted"] == 300
        assert engine.view().facts.row_count == 300

    def test_concurrent_admin_409(self, figure3_engine, tmp_path):
        api = WarehouseApi(figure3_engine)
        api._admin_lock.acquire()
        try:
            status, doc = api.handle("POST", "/admin/refresh-views", {}, {})
            assert status == 409
            _check("ErrorBody", doc)
            status, _ = api.handle("POST", "/admin/etl-run", {},
                                   {"config": str(FIGURE3_DIR / "pipeline.toml")})
            assert status == 409
        finally:
            api._admin_lock.release()

    def test_unknown_job_404(self, api):
        status, _ = api.handle("GET", "/admin/jobs/deadbeef", {}, None)
        assert status == 404

    def test_no_engine_503(self):
        api = WarehouseApi(None)
        status, doc = api.handle("GET", "/catalog", {}, None)
        assert status == 503
        _check("ErrorBody", doc)


class TestLiveServer:
    @pytest.fixture
    def served(self, tmp_path):
        engine = Engine.open_or_create(tmp_path / "wh")
        run_config(engine, FIGURE3_DIR / "pipeline.toml")
        httpd = make_server(engine, host="127.0.0.1", port=0)
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        yield engine, f"http://127.0.0.1:{httpd.server_address[1]}"
        httpd.shutdown()

    def _post(self, base, path, doc):
        req = urllib.request.Request(
            base + path, data=json.dumps(doc).encode(),
            headers={"Content-Type": "application/json"}, method="POST",
        )
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())

    def _get(self, base, path):
        with urllib.request.urlopen(base + path) as resp:
            return resp.status, json.loads(resp.read())

    def test_http_round_trip(self, served):
        _engine, base = served
        status, catalog = self._get(base, "/catalog")
        assert status == 200
        _check("Catalog", catalog)
        status, doc = self._post(base, "/query", {
            "query": {"group_by": {"office": "governorate"}}, "echo": "live",
        })
        assert status == 200
        _check("QueryResponse", doc)
        assert doc["echo"] == "live"

    def test_api_cli_equivalence(self, served):
        engine, base = served
        from starcube.query import query_from_doc

        qdoc = {"group_by": {"office": "governorate", "prestation": "prestation"}}
        _, api_doc = self._post(base, "/query", {"query": qdoc})
        cli_grid = engine.execute(query_from_doc(engine.schema, qdoc))
        api_rows = [(tuple(r["labels"]), tuple(r["values"])) for r in api_doc["grid"]["rows"]]
        cli_rows = [(r.labels, r.values) for r in cli_grid.rows]
        assert api_rows == cli_rows

    def test_read_during_write_sees_single_epoch(self, served):
        engine, base = served
        totals = {}
        for epoch_tag in ("before", "after"):
            if epoch_tag == "after":
                # commit more facts mid-flight
                engine.store.insert_facts([{
                    "num_assure": "A0000001", "code_br": "10",
                    "date_mvt": "2009-09-09", "code_paiement": "01",
                    "code_regime": "01", "code_prestation": "66", "montant": 1000,
                }])
            _, doc = self._post(base, "/query", {"query": {}})
            totals[epoch_tag] = (doc["epoch"], doc["grid"]["rows"][0]["values"][0])
        assert totals["after"][0] > totals["before"][0]
        assert totals["after"][1] == totals["before"][1] + 1000

    def test_error_body_shape_over_http(self, served):
        _engine, base = served
        req = urllib.request.Request(
            base + "/query", data=b'{"query": {"group_by": {"office": "region"}}}',
            headers={"Content-Type": "application/json"}, method="POST",
        )
        try:
            urllib.request.urlopen(req)
            raise AssertionError("expected 400")
        except urllib.error.HTTPError as err:
            assert err.code == 400
            doc = json.loads(err.read())
            _check("ErrorBody", doc)
            assert doc["field"] == "group_by"
