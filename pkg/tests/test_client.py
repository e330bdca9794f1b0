import json

import pytest

from costkit.client import (
    AuthError,
    Cassette,
    CompletionRequest,
    CompletionResponse,
    LLMClient,
    MODE_RECORD,
    MODE_REPLAY_FALLTHROUGH,
    MODE_REPLAY_STRICT,
    ReplayMiss,
    RetryPolicy,
    TransportError,
    fingerprint,
)
from costkit.testing import ScriptedDomainModel, StubLLMServer


def _request(prompt="Say hi.", **kw):
    return CompletionRequest(model_id="test-model", prompt_text=prompt, **kw)


def _fast_client(base_url, sleeps=None, **kw):
    recorded = sleeps if sleeps is not None else []
    return LLMClient(
        base_url=base_url,
        retry=RetryPolicy(base_s=0.001, factor=2.0, max_attempts=kw.pop("max_attempts", 5)),
        sleeper=recorded.append,
        timeout_s=kw.pop("timeout_s", 5.0),
        **kw,
    )


class TestFingerprint:
    def test_depends_only_on_field_values(self):
        a = _request("Hello.", temperature=0.5, stop_sequences=("x",))
        b = _request("Hello.", temperature=0.5, stop_sequences=("x",))
        assert fingerprint(a) == fingerprint(b)

    def test_changes_with_any_field(self):
        base = _request("Hello.")
        assert fingerprint(base) != fingerprint(_request("Hello!"))
        assert fingerprint(base) != fingerprint(_request("Hello.", temperature=0.1))
        assert fingerprint(base) != fingerprint(_request("Hello.", max_tokens=9))

    def test_request_validation(self):
        with pytest.raises(ValueError):
            CompletionRequest(model_id="m", prompt_text="")
        with pytest.raises(ValueError):
            _request(temperature=3.0)


class TestReplay:
    def test_strict_hit_needs_no_endpoint(self):
        cassette = Cassette(MODE_REPLAY_STRICT)
        request = _request()
        cassette.entries[fingerprint(request)] = CompletionResponse(text="recorded")
        client = LLMClient(base_url="http://invalid.invalid")
        assert client.complete(request, cassette).text == "recorded"

    def test_strict_miss_raises(self):
        client = LLMClient(base_url="http://invalid.invalid")
        with pytest.raises(ReplayMiss):
            client.complete(_request(), Cassette(MODE_REPLAY_STRICT))

    def test_two_strict_runs_identical(self):
        cassette = Cassette(MODE_REPLAY_STRICT)
        requests = [_request(f"prompt {i}") for i in range(10)]
        for req in requests:
            cassette.entries[fingerprint(req)] = CompletionResponse(text=f"echo {req.prompt_text}")
        client = LLMClient(base_url="http://invalid.invalid")
        first = client.complete_batch(requests, cassette, max_in_flight=3)
        second = client.complete_batch(requests, cassette, max_in_flight=3)
        assert first == second


class TestTransport:
    def test_record_mode_persists_response(self, tmp_path):
        path = tmp_path / "cassette.json"
        with StubLLMServer(lambda p: f"echo: {p}") as stub:
            client = _fast_client(stub.url)
            cassette = Cassette(MODE_RECORD, path=path)
            response = client.complete(_request("Ping."), cassette)
        assert response.text == "echo: Ping."
        reloaded = Cassette(MODE_REPLAY_STRICT, path=path)
        offline = LLMClient(base_url="http://invalid.invalid")
        assert offline.complete(_request("Ping."), reloaded).text == "echo: Ping."

    def test_retries_through_429s_with_backoff(self):
        sleeps = []
        with StubLLMServer(lambda p: "ok", fail_statuses=[429, 429]) as stub:
            client = _fast_client(stub.url, sleeps=sleeps)
            response = client.complete(_request(), Cassette(MODE_RECORD))
        assert response.text == "ok"
        assert len(sleeps) >= 2

    def test_gives_up_after_attempt_cap(self):
        with StubLLMServer(lambda p: "ok", fail_statuses=[500] * 10) as stub:
            client = _fast_client(stub.url, max_attempts=3)
            with pytest.raises(TransportError, match="3 attempts"):
                client.complete(_request(), Cassette(MODE_RECORD))
        assert len(stub.fail_statuses) == 10 - 3

    def test_auth_error_never_retried(self):
        sleeps = []
        with StubLLMServer(lambda p: "ok", require_key="sekret") as stub:
            client = _fast_client(stub.url, sleeps=sleeps, api_key="wrong")
            with pytest.raises(AuthError):
                client.complete(_request(), Cassette(MODE_RECORD))
            assert stub.request_count == 1
        assert sleeps == []

    def test_fallthrough_records_misses(self, tmp_path):
        path = tmp_path / "cassette.json"
        with StubLLMServer(lambda p: "fresh") as stub:
            client = _fast_client(stub.url)
            cassette = Cassette(MODE_REPLAY_FALLTHROUGH, path=path)
            assert client.complete(_request(), cassette).text == "fresh"
            assert stub.request_count == 1
            # second call replays without touching the endpoint
            assert client.complete(_request(), cassette).text == "fresh"
            assert stub.request_count == 1

    def test_credential_never_written_to_cassette(self, tmp_path):
        path = tmp_path / "cassette.json"
        with StubLLMServer(lambda p: "ok", require_key="sekret-token") as stub:
            client = _fast_client(stub.url, api_key="sekret-token")
            client.complete(_request(), Cassette(MODE_RECORD, path=path))
        raw = path.read_text()
        assert "sekret-token" not in raw
        assert "Authorization" not in raw


class TestBatch:
    def test_bounded_concurrency_and_full_coverage(self):
        with StubLLMServer(lambda p: "ok", delay_s=0.02) as stub:
            client = _fast_client(stub.url)
            requests = [_request(f"prompt {i}") for i in range(40)]
            results = client.complete_batch(requests, Cassette(MODE_RECORD), max_in_flight=4)
            assert len(results) == 40
            assert [i for i, _ in results] == list(range(40))
            assert all(isinstance(r, CompletionResponse) for _, r in results)
            assert stub.max_concurrent <= 4
            assert stub.max_concurrent >= 2  # parallelism actually happened

    def test_empty_batch(self):
        client = LLMClient(base_url="http://invalid.invalid")
        assert client.complete_batch([], Cassette(MODE_REPLAY_STRICT)) == []

    def test_poisoned_request_is_isolated(self):
        cassette = Cassette(MODE_REPLAY_STRICT)
        requests = [_request(f"prompt {i}") for i in range(10)]
        for req in requests[:9]:
            cassette.entries[fingerprint(req)] = CompletionResponse(text="ok")
        client = LLMClient(base_url="http://invalid.invalid")
        results = client.complete_batch(requests, cassette, max_in_flight=4)
        failures = [(i, r) for i, r in results if isinstance(r, Exception)]
        assert len(failures) == 1
        assert failures[0][0] == 9
        assert isinstance(failures[0][1], ReplayMiss)


class TestScriptedModel:
    def test_object_list_response_parses(self):
        from costkit.parsing import parse_object_list
        from costkit.prompts import render_object_list_prompt

        model = ScriptedDomainModel()
        prompt = render_object_list_prompt("tabletop", 12).text
        objects, diags = parse_object_list(model.respond(prompt))
        assert len(objects) >= 12 - 1
        assert model.respond(prompt) == model.respond(prompt)

    def test_tabletop_steps_response_parses_clean(self):
        from costkit import presets
        from costkit.parsing import parse_steps_block
        from costkit.prompts import render_steps_prompt_fixed

        model = ScriptedDomainModel()
        prompt = render_steps_prompt_fixed(
            "Put the red circle block in the blue bowl.",
            ["Red circle block", "Blue bowl", "Green star block"],
            robot_info=presets.TABLETOP.robot_info,
            note=presets.TABLETOP.steps_note,
            example=presets.TABLETOP.steps_example,
        ).text
        outcome = parse_steps_block(model.respond(prompt))
        assert outcome.errors() == []
        actions = [s.action for s in outcome.value.steps]
        assert actions == ["Pick", "Place"]

    def test_kitchen_steps_response_has_required_objects(self):
        from costkit import presets
        from costkit.parsing import parse_steps_block
        from costkit.prompts import render_steps_prompt_flexible

        model = ScriptedDomainModel()
        prompt = render_steps_prompt_flexible(
            "Slice the washed lettuce and place it neatly on the tray.",
            note=presets.KITCHEN.steps_note,
            example=presets.KITCHEN.steps_example,
        ).text
        outcome = parse_steps_block(model.respond(prompt), expect_required_objects=True)
        assert outcome.errors() == []
        assert outcome.value.required_objects is not None
