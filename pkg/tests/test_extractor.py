import json

import pytest

from appliance.errors import BackendUnavailable, ExtractionFailed
from appliance.extractor import (
    PARSE_CODE,
    ExtractionRequest,
    HttpBackend,
    HttpConfig,
    MockBackend,
    ScriptedBackend,
    extract_goal_with_validation,
    extract_with_validation,
    parse_goal_draft,
)
from appliance.extractor.http import load_prompt, strip_fences
from appliance.schema import ModelDocument, fixtures_root, load_bundle, load_bundles, save_model
from helpers import basic_dehumidifier, crafted_validator_cases

CASES = crafted_validator_cases()


def draft(model) -> str:
    return save_model(ModelDocument(model)).decode()


def test_empty_manual_is_rejected():
    with pytest.raises(ValueError):
        ExtractionRequest("   ")


class TestMock:
    def test_every_bundle_is_accepted_first_time(self):
        backend = MockBackend(fixtures_root())
        for b in load_bundles(fixtures_root()):
            doc = extract_with_validation(backend, ExtractionRequest("  " + b.manual_text.upper() + "\n"))
            assert doc.model == b.model_doc.model
            assert doc.provenance.kind == "extracted"
            assert doc.provenance.note == "accepted on attempt 1"

    def test_unknown_manual_fails_validation(self):
        with pytest.raises(ExtractionFailed) as e:
            extract_with_validation(MockBackend(fixtures_root()), ExtractionRequest("A toaster."))
        assert e.value.attempts == 3
        assert "V4" in {d.code for d in e.value.diagnostics}

    def test_humidity_goal(self):
        b = load_bundle(fixtures_root() / "dehumidifier")
        policy, goal = extract_goal_with_validation(MockBackend([b]), b.model_doc.model, "set the humidity to 50%.")
        assert goal.targets == {"variable_humidity": "50"}
        assert policy.features

    def test_unknown_instruction_binds_nothing(self):
        b = load_bundle(fixtures_root() / "dehumidifier")
        with pytest.raises(ExtractionFailed) as e:
            extract_goal_with_validation(MockBackend([b]), b.model_doc.model, "Make me a sandwich.")
        assert {d.code for d in e.value.diagnostics} == {"V9"}

    def test_bread_maker_goal_follows_policy(self):
        b = load_bundle(fixtures_root() / "bread_maker")
        t = b.tasks[0]
        policy, goal = extract_goal_with_validation(MockBackend([b]), b.model_doc.model, t.instruction)
        assert len(goal.assignments) == 5
        assert policy == t.policy
        assert list(policy.changing_variables) == ["menu", "crust", "loaf_size", "delay", "start"]


class TestValidationLoop:
    def test_fixed_on_second_attempt(self):
        backend = ScriptedBackend([draft(CASES["V3"][0]), draft(basic_dehumidifier())])
        doc = extract_with_validation(backend, ExtractionRequest("manual"))
        assert doc.model == basic_dehumidifier()
        assert doc.provenance.note == "accepted on attempt 2"
        assert backend.feedback_log[0] == ()
        assert {d.code for d in backend.feedback_log[1]} == {"V3"}

    def test_persistent_error_exhausts_attempts(self):
        backend = ScriptedBackend([draft(CASES["V6"][0])])
        with pytest.raises(ExtractionFailed) as e:
            extract_with_validation(backend, ExtractionRequest("manual"))
        assert e.value.attempts == 3
        assert len(backend.feedback_log) == 3
        assert {d.code for d in e.value.diagnostics} == {"V6"}

    def test_malformed_json_is_fed_back(self):
        backend = ScriptedBackend(["{not json", draft(basic_dehumidifier())])
        extract_with_validation(backend, ExtractionRequest("manual"))
        assert [d.code for d in backend.feedback_log[1]] == [PARSE_CODE]

    def test_attempt_budget_is_configurable(self):
        backend = ScriptedBackend(["{}"])
        with pytest.raises(ExtractionFailed):
            extract_with_validation(backend, ExtractionRequest("manual"), max_attempts=1)
        assert len(backend.feedback_log) == 1

    def test_goal_drafts_use_their_own_counter(self):
        good = json.dumps(
            {"task_policy": {"features": ["turn_on_off"]}, "goal_state": {"assignments": {"variable_power_on_off": "on"}}}
        )
        backend = ScriptedBackend([draft(basic_dehumidifier())], [good])
        extract_with_validation(backend, ExtractionRequest("manual"))
        _, goal = extract_goal_with_validation(backend, basic_dehumidifier(), "Turn it on.")
        assert goal.targets == {"variable_power_on_off": "on"}

    def test_goal_draft_shape(self):
        from appliance.errors import ParseError

        with pytest.raises(ParseError):
            parse_goal_draft('{"goal_state": {"assignments": {}}}')


class TestPrompts:
    def test_templates_have_their_slots(self):
        # substitute() raises KeyError on any slot left unfilled
        out = load_prompt("model_user").substitute(manual="MANUAL", panel_elements="PANEL", feedback="FB")
        assert {"MANUAL", "PANEL", "FB"} <= set(out.split())
        out = load_prompt("goal_user").substitute(model="MODEL", instruction="INSTR", feedback="")
        assert "MODEL" in out and "INSTR" in out
        assert "DIAGS" in load_prompt("feedback").substitute(diagnostics="DIAGS")

    def test_strip_fences(self):
        assert strip_fences('```json\n{"a": 1}\n```') == '{"a": 1}'
        assert strip_fences(' {"a": 1} ') == '{"a": 1}'


class TestHttp:
    httpx = pytest.importorskip("httpx")

    def backend(self, handler, **cfg):
        client = self.httpx.Client(transport=self.httpx.MockTransport(handler))
        return HttpBackend(HttpConfig("http://llm.invalid/v1/chat/completions", "m", **cfg), client)

    def reply(self, content):
        return self.httpx.Response(200, json={"choices": [{"message": {"content": content}}]})

    def test_round_trip_through_the_loop(self, monkeypatch):
        monkeypatch.setenv("APPLIANCE_API_KEY", "k")
        seen = []

        def handler(request):
            body = json.loads(request.content)
            seen.append((request.headers["authorization"], body))
            return self.reply("```json\n" + draft(basic_dehumidifier()) + "```")

        doc = extract_with_validation(self.backend(handler), ExtractionRequest("The power button toggles power."))
        assert doc.model == basic_dehumidifier()
        auth, body = seen[0]
        assert auth == "Bearer k"
        assert body["model"] == "m"
        assert "The power button toggles power." in body["messages"][1]["content"]

    def test_missing_key(self, monkeypatch):
        monkeypatch.delenv("APPLIANCE_API_KEY", raising=False)
        with pytest.raises(BackendUnavailable):
            self.backend(lambda r: self.reply("{}")).extract_model(ExtractionRequest("m"))

    def test_server_errors_are_retried(self, monkeypatch):
        monkeypatch.setenv("APPLIANCE_API_KEY", "k")
        calls = []

        def handler(request):
            calls.append(1)
            return self.httpx.Response(503) if len(calls) < 3 else self.reply("{}")

        assert self.backend(handler, retries=2).extract_model(ExtractionRequest("m")) == "{}"
        assert len(calls) == 3

    def test_client_error_is_not_retried(self, monkeypatch):
        monkeypatch.setenv("APPLIANCE_API_KEY", "k")
        calls = []

        def handler(request):
            calls.append(1)
            return self.httpx.Response(401, text="nope")

        with pytest.raises(BackendUnavailable):
            self.backend(handler).extract_model(ExtractionRequest("m"))
        assert len(calls) == 1

    def test_feedback_reaches_the_prompt(self, monkeypatch):
        monkeypatch.setenv("APPLIANCE_API_KEY", "k")
        bodies = []

        def handler(request):
            bodies.append(json.loads(request.content))
            return self.reply(draft(CASES["V3"][0]) if len(bodies) == 1 else draft(basic_dehumidifier()))

        extract_with_validation(self.backend(handler), ExtractionRequest("m"))
        assert "V3" in bodies[1]["messages"][1]["content"]

    def test_config_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"endpoint": "http://x", "model": "m", "retries": 0}))
        assert HttpConfig.load(p).retries == 0
        p.write_text(json.dumps({"endpoint": "http://x", "model": "m", "colour": 1}))
        with pytest.raises(ValueError):
            HttpConfig.load(p)
