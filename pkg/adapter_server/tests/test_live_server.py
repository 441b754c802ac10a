"""The protocol suite against a real uvicorn server on a socket."""

import threading
import time

import httpx
import pytest
import uvicorn

from adapter_server.app import create_app

from test_protocol import PATHS, QUESTION, validate_answers, validate_scores, validate_selection


@pytest.fixture(scope="module")
def live_url(engine):
    app = create_app(engine, auth_token="round-trip")
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    for _ in range(100):
        if server.started:
            break
        time.sleep(0.05)
    else:
        raise RuntimeError("uvicorn did not start")
    host, port = server.servers[0].sockets[0].getsockname()[:2]
    yield f"http://{host}:{port}"
    server.should_exit = True
    thread.join(timeout=5)


@pytest.fixture(scope="module")
def http(live_url):
    with httpx.Client(base_url=live_url, headers={"Authorization": "Bearer round-trip"}, timeout=30) as c:
        yield c


def test_health_over_socket(http):
    body = http.get("/v1/health").json()
    assert body["attention_layer"] == body["n_layers"] // 2 + 2


def test_score_judge_answer_over_socket(http):
    scores = http.post("/v1/score_paths", json={"question": QUESTION, "paths": PATHS}).json()["scores"]
    validate_scores(scores, len(PATHS))
    selected = http.post("/v1/judge", json={"question": QUESTION, "paths": PATHS}).json()["selected"]
    validate_selection(selected, len(PATHS))
    body = http.post("/v1/answer", json={"prompt": QUESTION, "max_new_tokens": 8}).json()
    validate_answers(body["answers"])


def test_missing_token_rejected(live_url):
    resp = httpx.get(f"{live_url}/v1/health")
    assert resp.status_code == 401
    assert resp.json() == {"error": "unauthorized"}
