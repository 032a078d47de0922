import json

import pytest
from fastapi.testclient import TestClient

from refground.scene import scene_to_dict
from refground.service import create_app, replay_journal

from conftest import make_region, make_scene


def three_cups_doc():
    scene = make_scene([
        make_region("c1", -0.85), make_region("c2", 0.0), make_region("c3", 0.85),
        make_region("ball", 0.45, category="ball", color="blue", y_world=1.25),
    ])
    return scene_to_dict(scene)


def cup_ball_doc():
    scene = make_scene([
        make_region("cup", -0.5, category="cup", color="red"),
        make_region("ball", 0.5, category="ball", color="blue"),
    ])
    return scene_to_dict(scene)


@pytest.fixture
def client():
    return TestClient(create_app())


def create(client, doc) -> str:
    response = client.post("/sessions", json=doc)
    assert response.status_code == 201
    return response.json()["id"]


class TestSessions:
    def test_create_returns_id_and_scene(self, client):
        response = client.post("/sessions", json=cup_ball_doc())
        assert response.status_code == 201
        body = response.json()
        assert body["id"]
        assert {r["id"] for r in body["scene"]["regions"]} == {"cup", "ball"}

    def test_two_creates_distinct_ids(self, client):
        assert create(client, cup_ball_doc()) != create(client, cup_ball_doc())

    def test_malformed_scene_names_field(self, client):
        doc = cup_ball_doc()
        doc["regions"][0]["attrs"]["color"] = "nope"
        response = client.post("/sessions", json=doc)
        assert response.status_code == 422
        assert "regions[0].attrs.color" in response.json()["detail"]

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/zzz").status_code == 404
        response = client.post("/sessions/zzz/instruction", json={"text": "the cup"})
        assert response.status_code == 404

    def test_get_session_state(self, client):
        sid = create(client, cup_ball_doc())
        body = client.get(f"/sessions/{sid}").json()
        assert body["id"] == sid
        assert body["dialog_open"] is False
        assert body["revision"] == 1


class TestInstruction:
    def test_unique_selection(self, client):
        sid = create(client, cup_ball_doc())
        view = client.post(f"/sessions/{sid}/instruction",
                           json={"text": "the red cup"}).json()
        assert view["kind"] == "unique"
        assert view["selected"] == "cup"
        assert view["trace"]["self"]

    def test_ambiguous_opens_dialog(self, client):
        sid = create(client, three_cups_doc())
        view = client.post(f"/sessions/{sid}/instruction",
                           json={"text": "pick up the cup"}).json()
        assert view["kind"] == "question"
        assert view["question"]["text"].startswith("Do you mean ")
        assert sorted(view["candidates"]) == ["c1", "c2", "c3"]
        assert client.get(f"/sessions/{sid}").json()["dialog_open"] is True

    def test_instruction_rejected_while_dialog_open(self, client):
        sid = create(client, three_cups_doc())
        client.post(f"/sessions/{sid}/instruction", json={"text": "the cup"})
        response = client.post(f"/sessions/{sid}/instruction",
                               json={"text": "the ball"})
        assert response.status_code == 409

    def test_empty_utterance_422(self, client):
        sid = create(client, cup_ball_doc())
        response = client.post(f"/sessions/{sid}/instruction", json={"text": "  "})
        assert response.status_code == 422

    def test_revision_increases(self, client):
        sid = create(client, cup_ball_doc())
        v1 = client.post(f"/sessions/{sid}/instruction",
                         json={"text": "the red cup"}).json()
        v2 = client.post(f"/sessions/{sid}/instruction",
                         json={"text": "the blue ball"}).json()
        assert v2["revision"] > v1["revision"]


class TestResponse:
    def test_yes_resolves(self, client):
        sid = create(client, three_cups_doc())
        q = client.post(f"/sessions/{sid}/instruction", json={"text": "the cup"}).json()
        view = client.post(f"/sessions/{sid}/response", json={"text": "yes"}).json()
        assert view["kind"] == "resolved"
        assert view["selected"] == q["question"]["target"]

    def test_no_asks_next_question(self, client):
        sid = create(client, three_cups_doc())
        q1 = client.post(f"/sessions/{sid}/instruction", json={"text": "the cup"}).json()
        view = client.post(f"/sessions/{sid}/response", json={"text": "no"}).json()
        assert view["kind"] == "question"
        assert view["question"]["target"] != q1["question"]["target"]
        assert len(view["candidates"]) == 2

    def test_correcting_response_resolves(self, client):
        sid = create(client, three_cups_doc())
        client.post(f"/sessions/{sid}/instruction", json={"text": "the cup"})
        view = client.post(f"/sessions/{sid}/response",
                           json={"text": "no, the red cup on the right"}).json()
        assert view["kind"] == "resolved"
        assert view["selected"] == "c3"

    def test_response_without_dialog_409(self, client):
        sid = create(client, cup_ball_doc())
        response = client.post(f"/sessions/{sid}/response", json={"text": "yes"})
        assert response.status_code == 409

    def test_exhaustion(self, client):
        sid = create(client, three_cups_doc())
        client.post(f"/sessions/{sid}/instruction", json={"text": "the cup"})
        view = None
        for _ in range(3):
            view = client.post(f"/sessions/{sid}/response", json={"text": "no"}).json()
        assert view["kind"] == "exhausted"


class TestIsolationAndEvents:
    def test_sessions_are_isolated(self, client):
        sid_a = create(client, three_cups_doc())
        sid_b = create(client, cup_ball_doc())
        client.post(f"/sessions/{sid_a}/instruction", json={"text": "the cup"})
        view_b = client.post(f"/sessions/{sid_b}/instruction",
                             json={"text": "the red cup"}).json()
        assert view_b["kind"] == "unique"
        assert client.get(f"/sessions/{sid_a}").json()["dialog_open"] is True
        assert client.get(f"/sessions/{sid_b}").json()["dialog_open"] is False

    def parse_events(self, text):
        events = []
        for block in text.strip().split("\n\n"):
            event = {}
            for line in block.splitlines():
                if line.startswith("event: "):
                    event["type"] = line[len("event: "):]
                elif line.startswith("data: "):
                    event["view"] = json.loads(line[len("data: "):])
                elif line.startswith("id: "):
                    event["revision"] = int(line[len("id: "):])
            if event:
                events.append(event)
        return events

    def test_event_stream_replay(self, client):
        sid = create(client, three_cups_doc())
        client.post(f"/sessions/{sid}/instruction", json={"text": "the cup"})
        client.post(f"/sessions/{sid}/response", json={"text": "no"})
        client.post(f"/sessions/{sid}/response", json={"text": "yes"})
        response = client.get(f"/sessions/{sid}/events?since=0&replay=1")
        assert response.status_code == 200
        events = self.parse_events(response.text)
        types = [e["type"] for e in events]
        assert types == ["question-asked", "question-asked", "resolved"]
        revisions = [e["revision"] for e in events]
        assert revisions == sorted(revisions)

    def test_narrowed_event_on_correction(self, client):
        doc = three_cups_doc()
        sid = create(client, doc)
        client.post(f"/sessions/{sid}/instruction", json={"text": "the cup"})
        # A correction that still leaves several candidates narrows the set.
        view = client.post(f"/sessions/{sid}/response",
                           json={"text": "no the red cup"}).json()
        events = self.parse_events(
            client.get(f"/sessions/{sid}/events?since=0&replay=1").text)
        types = [e["type"] for e in events]
        if view["kind"] == "question":
            assert "narrowed" in types

    def test_since_filter(self, client):
        sid = create(client, cup_ball_doc())
        v = client.post(f"/sessions/{sid}/instruction",
                        json={"text": "the red cup"}).json()
        events = self.parse_events(
            client.get(f"/sessions/{sid}/events?since={v['revision']}&replay=1").text)
        assert events == []


class TestJournalReplay:
    def test_replay_reproduces_views(self, tmp_path):
        journal_dir = str(tmp_path / "journal")
        app = create_app(journal_dir=journal_dir)
        client = TestClient(app)
        sid = create(client, three_cups_doc())
        views = [client.post(f"/sessions/{sid}/instruction",
                             json={"text": "the cup"}).json()]
        views.append(client.post(f"/sessions/{sid}/response",
                                 json={"text": "no"}).json())
        views.append(client.post(f"/sessions/{sid}/response",
                                 json={"text": "yes"}).json())

        fresh_app = create_app()
        replayed = replay_journal(fresh_app, f"{journal_dir}/{sid}.jsonl")
        assert replayed[0]["kind"] == "created"
        assert replayed[1:] == views
