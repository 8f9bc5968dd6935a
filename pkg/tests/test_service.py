import io
import json

import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image

from paintword.imageops import mask_to_png_bytes
from paintword.registry import default_registry
from paintword.service import ServiceConfig, create_app, load_config

QUICK_SCHEDULE = {"phases": [
    {"method": "cma", "budget": 50, "sigma0": 0.3},
    {"method": "grad", "budget": 5, "step_size": 0.05},
]}
SLOW_SCHEDULE = {"phases": [{"method": "cma", "budget": 5000, "sigma0": 0.3}]}


def make_mask_png(size=24, dims=(64, 64)):
    m = torch.zeros(*dims)
    lo = (dims[0] - size) // 2
    m[lo:lo + size, lo:lo + size] = 1.0
    return mask_to_png_bytes(m)


@pytest.fixture(scope="module")
def client():
    app = create_app(ServiceConfig(preview_every=10),
                     registry=default_registry(include_trained=False))
    with TestClient(app) as c:
        yield c


def create_session(client, seed=7, generator="toy-feature"):
    r = client.post("/v1/sessions", json={"generator": generator,
                                          "scorer": "toy-colorshape",
                                          "seed": seed})
    assert r.status_code == 201
    return r.json()


def collect_stream(client, url):
    events = []
    with client.stream("GET", url) as resp:
        assert resp.status_code == 200
        current = {}
        for line in resp.iter_lines():
            if line.startswith("event: "):
                current["event"] = line[len("event: "):]
            elif line.startswith("data: "):
                current["data"] = json.loads(line[len("data: "):])
            elif line == "":
                if current:
                    events.append(current)
                    if current.get("event") in ("done", "error"):
                        break
                    current = {}
    return events


class TestHappyPath:
    def test_full_sequence(self, client):
        created = create_session(client)
        sid = created["session_id"]

        img = client.get(created["image_url"])
        assert img.status_code == 200
        assert img.headers["content-type"] == "image/png"
        pil = Image.open(io.BytesIO(img.content))
        assert pil.size == (64, 64)

        r = client.put(f"/v1/sessions/{sid}/mask", content=make_mask_png())
        assert r.status_code == 200
        assert r.json()["mask_coverage"] == pytest.approx(24 * 24 / 4096)

        r = client.post(f"/v1/sessions/{sid}/edits",
                        json={"text": "red", "schedule": QUICK_SCHEDULE})
        assert r.status_code == 202
        launched = r.json()

        events = collect_stream(client, launched["stream_url"])
        kinds = [e["event"] for e in events]
        assert kinds.count("done") == 1
        assert "progress" in kinds
        progress = [e["data"] for e in events if e["event"] == "progress"]
        for rec in progress:
            for key in ("step", "evals", "loss_sem", "loss_img", "loss_total"):
                assert key in rec
        assert any("preview_png_b64" in rec for rec in progress)
        assert all("realism_proxy" in rec for rec in progress)
        done = [e["data"] for e in events if e["event"] == "done"][0]
        assert "final_loss" in done and "image_url" in done

        r = client.post(f"/v1/sessions/{sid}/edits/{launched['edit_id']}/accept")
        assert r.status_code == 200
        summary = r.json()
        assert summary["state"] == "idle"
        assert len(summary["history"]) == 1

    def test_repeated_gets_identical(self, client):
        created = create_session(client, seed=8)
        a = client.get(created["image_url"]).content
        b = client.get(created["image_url"]).content
        assert a == b

    def test_models_listing(self, client):
        r = client.get("/v1/models")
        assert r.status_code == 200
        names = {m["name"]: m for m in r.json()["models"]}
        assert "toy-feature" in names and "toy-colorshape" in names
        assert names["toy-feature"]["kind"] == "generator"
        assert names["toy-feature"]["capabilities"]["splitKind"] == "feature-map"


class TestErrors:
    def test_unknown_model(self, client):
        r = client.post("/v1/sessions", json={"generator": "nope",
                                              "scorer": "toy-colorshape"})
        assert r.status_code == 404
        assert r.json()["code"] == "UNKNOWN_MODEL"

    def test_unknown_session(self, client):
        r = client.get("/v1/sessions/deadbeef/image")
        assert r.status_code == 404
        assert r.json()["code"] == "UNKNOWN_SESSION"

    def test_missing_fields(self, client):
        r = client.post("/v1/sessions", json={"generator": "toy-feature"})
        assert r.status_code == 400
        assert r.json()["code"] == "INVALID_CONFIG"

    def test_wrong_mask_dims(self, client):
        sid = create_session(client, seed=9)["session_id"]
        r = client.put(f"/v1/sessions/{sid}/mask",
                       content=make_mask_png(size=8, dims=(32, 32)))
        assert r.status_code == 400
        assert r.json()["code"] == "DIMENSION_MISMATCH"

    def test_empty_mask(self, client):
        sid = create_session(client, seed=9)["session_id"]
        r = client.put(f"/v1/sessions/{sid}/mask",
                       content=mask_to_png_bytes(torch.zeros(64, 64)))
        assert r.status_code == 400
        assert r.json()["code"] == "EMPTY_MASK"

    def test_undecodable_mask(self, client):
        sid = create_session(client, seed=9)["session_id"]
        r = client.put(f"/v1/sessions/{sid}/mask", content=b"not a png")
        assert r.status_code == 400
        assert r.json()["code"] == "DIMENSION_MISMATCH"

    def test_empty_prompt(self, client):
        sid = create_session(client, seed=10)["session_id"]
        client.put(f"/v1/sessions/{sid}/mask", content=make_mask_png())
        r = client.post(f"/v1/sessions/{sid}/edits", json={"text": "  "})
        assert r.status_code == 400
        assert r.json()["code"] == "EMPTY_PROMPT"

    def test_unknown_token(self, client):
        sid = create_session(client, seed=10)["session_id"]
        client.put(f"/v1/sessions/{sid}/mask", content=make_mask_png())
        r = client.post(f"/v1/sessions/{sid}/edits",
                        json={"text": "banana", "schedule": QUICK_SCHEDULE})
        assert r.status_code == 400
        assert r.json()["code"] == "UNKNOWN_TOKEN"

    def test_edit_without_mask(self, client):
        sid = create_session(client, seed=11)["session_id"]
        r = client.post(f"/v1/sessions/{sid}/edits",
                        json={"text": "red", "schedule": QUICK_SCHEDULE})
        assert r.status_code == 400
        assert r.json()["code"] == "EMPTY_MASK"

    def test_busy_and_not_completed(self, client):
        sid = create_session(client, seed=12, generator="toy-style")["session_id"]
        client.put(f"/v1/sessions/{sid}/mask", content=make_mask_png())
        r = client.post(f"/v1/sessions/{sid}/edits",
                        json={"text": "red", "schedule": SLOW_SCHEDULE})
        assert r.status_code == 202
        eid = r.json()["edit_id"]

        r2 = client.post(f"/v1/sessions/{sid}/edits",
                         json={"text": "blue", "schedule": QUICK_SCHEDULE})
        assert r2.status_code == 409
        assert r2.json()["code"] == "BUSY"

        # wait for completion via the stream, then exercise accept twice
        collect_stream(client, f"/v1/sessions/{sid}/edits/{eid}/stream")
        r3 = client.post(f"/v1/sessions/{sid}/edits/{eid}/accept")
        assert r3.status_code == 200
        r4 = client.post(f"/v1/sessions/{sid}/edits/{eid}/accept")
        assert r4.status_code == 409
        assert r4.json()["code"] == "ALREADY_ACCEPTED"

    def test_accept_unknown_edit(self, client):
        sid = create_session(client, seed=13)["session_id"]
        r = client.post(f"/v1/sessions/{sid}/edits/none/accept")
        assert r.status_code == 404
        assert r.json()["code"] == "UNKNOWN_EDIT"

    def test_revert(self, client):
        sid = create_session(client, seed=14)["session_id"]
        before = client.get(f"/v1/sessions/{sid}/image").content
        client.put(f"/v1/sessions/{sid}/mask", content=make_mask_png())
        r = client.post(f"/v1/sessions/{sid}/edits",
                        json={"text": "blue", "schedule": QUICK_SCHEDULE})
        eid = r.json()["edit_id"]
        collect_stream(client, f"/v1/sessions/{sid}/edits/{eid}/stream")
        r = client.post(f"/v1/sessions/{sid}/edits/{eid}/revert")
        assert r.status_code == 200
        assert client.get(f"/v1/sessions/{sid}/image").content == before


class TestConfig:
    def test_defaults(self):
        cfg = load_config(env={})
        assert cfg.port == 8765 and cfg.preview_every == 25
        assert cfg.cma_evaluations == 3000 and cfg.grad_steps == 300

    def test_file_and_env_overrides(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"port": 9000, "preview_every": 5}))
        cfg = load_config(p, env={"PAINTWORD_PORT": "9100"})
        assert cfg.port == 9100         # env wins
        assert cfg.preview_every == 5   # file wins over default

    def test_yaml(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text("host: 0.0.0.0\ncma_evaluations: 100\n")
        cfg = load_config(p, env={})
        assert cfg.host == "0.0.0.0" and cfg.cma_evaluations == 100

    def test_unknown_key(self, tmp_path):
        from paintword.errors import InvalidConfig
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"nope": 1}))
        with pytest.raises(InvalidConfig):
            load_config(p, env={})

    def test_bad_env(self):
        from paintword.errors import InvalidConfig
        with pytest.raises(InvalidConfig):
            load_config(env={"PAINTWORD_PORT": "abc"})
