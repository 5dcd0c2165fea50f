from __future__ import annotations

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from fewtune import (
    BudgetExceededError,
    HttpBackend,
    HttpBackendConfig,
    InferenceParams,
    MockBackend,
    MockMissError,
    MockScript,
    ModelRef,
    TransportError,
    default_inference_params,
)
from fewtune.backends import truncate_at_stop


def test_default_params():
    params = default_inference_params()
    assert params.temperature == 0.1
    assert params.top_k == 0.97
    assert params.max_total_tokens == 1024
    assert params.stop_strings == ("\n\n---\n\n",)


def test_params_validation():
    with pytest.raises(ValueError):
        InferenceParams(temperature=-0.1)
    with pytest.raises(ValueError):
        InferenceParams(max_total_tokens=0)


def test_model_ref():
    ref = ModelRef("base-7b")
    assert ref.wire_id == "base-7b"
    assert ref.with_adapter("adp-1").wire_id == "base-7b+adp-1"
    with pytest.raises(ValueError):
        ModelRef("")


def test_truncate_at_stop():
    assert truncate_at_stop("before\n\n---\n\nafter", ("\n\n---\n\n",)) == "before"
    assert truncate_at_stop("no stop here", ("\n\n---\n\n",)) == "no stop here"
    assert truncate_at_stop("a|b;c", (";", "|")) == "a"


def test_mock_lookup_precedence_and_determinism():
    script = MockScript(
        by_prompt={"exact prompt": "from prompt"},
        by_key={MockScript.key("m", "e"): "from key"},
        default="fallback",
    )
    backend = MockBackend(script)
    params = default_inference_params()
    ref = ModelRef("mock")
    tags = {"module_label": "m", "example_id": "e"}
    assert backend.generate(ref, "exact prompt", params, tags=tags) == "from prompt"
    assert backend.generate(ref, "other prompt", params, tags=tags) == "from key"
    assert backend.generate(ref, "other prompt", params, tags={"module_label": "x", "example_id": "y"}) == "fallback"
    for _ in range(3):
        assert backend.generate(ref, "other prompt", params, tags=tags) == "from key"


def test_mock_miss_without_default():
    backend = MockBackend(MockScript())
    with pytest.raises(MockMissError):
        backend.generate(ModelRef("mock"), "anything", default_inference_params(), tags={})


def test_mock_truncates_at_stop_string():
    backend = MockBackend(MockScript(default="kept\n\n---\n\ndropped"))
    out = backend.generate(ModelRef("mock"), "p", default_inference_params())
    assert out == "kept"


def test_budget_exceeded_on_long_prompt():
    backend = MockBackend(MockScript(default="x"))
    params = InferenceParams(max_total_tokens=8)
    prompt = "tok " * 8
    with pytest.raises(BudgetExceededError):
        backend.generate(ModelRef("mock"), prompt.strip(), params)
    # One token under the budget is fine.
    assert backend.generate(ModelRef("mock"), "tok " * 7, params) == "x"


def test_mock_script_file_round_trip(tmp_path):
    script = MockScript(
        by_prompt={"p1": "c1"},
        by_key={MockScript.key("m", "e1"): "c2"},
        default="d",
    )
    path = tmp_path / "script.json"
    script.to_file(path)
    loaded = MockScript.from_file(path)
    assert loaded.by_prompt == {"p1": "c1"}
    assert loaded.by_key == {"m@e1": "c2"}
    assert loaded.default == "d"


class _StubHandler(BaseHTTPRequestHandler):
    bodies: list[dict] = []
    plan: list[int] = []  # status codes to serve, last repeats
    completion = "served completion"

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        type(self).bodies.append({"body": body, "auth": self.headers.get("Authorization")})
        status = self.plan.pop(0) if len(self.plan) > 1 else self.plan[0]
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        if status == 200:
            payload = {"choices": [{"text": self.completion}]}
            self.wfile.write(json.dumps(payload).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    handler = _StubHandler
    handler.bodies = []
    handler.plan = [200]
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield handler, f"http://127.0.0.1:{server.server_address[1]}/v1/completions"
    server.shutdown()


def test_http_parameter_pass_through(stub_server):
    handler, endpoint = stub_server
    backend = HttpBackend(HttpBackendConfig(endpoint=endpoint, max_retries=0))
    params = InferenceParams(temperature=0.1, top_k=0.97, max_total_tokens=64)
    out = backend.generate(ModelRef("base-7b", adapter_id="adp-2"), "three token prompt", params)
    assert out == "served completion"
    body = handler.bodies[0]["body"]
    assert body["model"] == "base-7b+adp-2"
    assert body["prompt"] == "three token prompt"
    assert body["temperature"] == 0.1
    assert body["top_k"] == 0.97
    assert "top_p" not in body
    assert body["stop"] == ["\n\n---\n\n"]
    assert body["max_tokens"] == 64 - 3


def test_http_top_p_field_switch(stub_server):
    handler, endpoint = stub_server
    backend = HttpBackend(
        HttpBackendConfig(endpoint=endpoint, max_retries=0, sampling_field="top_p")
    )
    backend.generate(ModelRef("m"), "p", default_inference_params())
    body = handler.bodies[0]["body"]
    assert body["top_p"] == 0.97
    assert "top_k" not in body


def test_http_retry_resends_identical_body(stub_server):
    handler, endpoint = stub_server
    handler.plan = [500, 503, 200]
    backend = HttpBackend(
        HttpBackendConfig(endpoint=endpoint, max_retries=3, backoff_s=0.01)
    )
    out = backend.generate(ModelRef("m"), "same prompt", default_inference_params())
    assert out == "served completion"
    assert len(handler.bodies) == 3
    assert handler.bodies[0]["body"] == handler.bodies[1]["body"] == handler.bodies[2]["body"]


def test_http_retries_exhausted(stub_server):
    handler, endpoint = stub_server
    handler.plan = [500]
    backend = HttpBackend(HttpBackendConfig(endpoint=endpoint, max_retries=1, backoff_s=0.01))
    with pytest.raises(TransportError):
        backend.generate(ModelRef("m"), "p", default_inference_params())
    assert len(handler.bodies) == 2


def test_http_non_retryable_status_raises(stub_server):
    handler, endpoint = stub_server
    handler.plan = [400]
    backend = HttpBackend(HttpBackendConfig(endpoint=endpoint, max_retries=2, backoff_s=0.01))
    with pytest.raises(TransportError):
        backend.generate(ModelRef("m"), "p", default_inference_params())
    assert len(handler.bodies) == 1


def test_http_api_key_header(stub_server, monkeypatch):
    handler, endpoint = stub_server
    monkeypatch.setenv("FEWTUNE_API_KEY", "sekrit")
    backend = HttpBackend(HttpBackendConfig(endpoint=endpoint, max_retries=0))
    backend.generate(ModelRef("m"), "p", default_inference_params())
    assert handler.bodies[0]["auth"] == "Bearer sekrit"


def test_http_stop_truncation_client_side(stub_server):
    handler, endpoint = stub_server
    handler.completion = "first half\n\n---\n\nsecond half"
    backend = HttpBackend(HttpBackendConfig(endpoint=endpoint, max_retries=0))
    out = backend.generate(ModelRef("m"), "p", default_inference_params())
    assert out == "first half"
    handler.completion = "served completion"
