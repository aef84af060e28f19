import json

import httpx
import pytest
from hypothesis import given, strategies as st

from docback.narrative import (PROMPT_ONLY, PROMPT_TEXT, Instruction, NarrativeBank,
                               NarrativeError, NarrativeRunError, PageSummary, bank_prefix,
                               bank_push, build_instruct_payload, instruct, load_prompt,
                               normalize, run_document, summarize)
from docback.providers import (API_KEY_ENV, ChatCompletionsProvider, ProviderConfig,
                               ProviderError, StubProvider, make_provider, prompt_task)


def _u(i, text=None):
    return Instruction(i, text or f"u{i}", "stub", PROMPT_TEXT)


def test_prompt_templates_versioned():
    assert prompt_task(load_prompt("summarize")) == "summarize"
    assert prompt_task(load_prompt("instruct")) == "instruct"
    assert "version: 1" in load_prompt("instruct")


def test_stub_summarize():
    stub = StubProvider()
    s = summarize("Volcanoes, Of The World! erupt often and loudly", stub, page_index=2)
    assert s.words == ("volcanoes", "of", "the", "world", "erupt")
    assert s.page_index == 2
    assert len(stub.calls) == 1


def test_summarize_blank_page_skips_provider():
    stub = StubProvider()
    s = summarize("   \n ", stub)
    assert s.empty and stub.calls == []


def test_summarize_degenerate_raises():
    class Quiet:
        id = "quiet"

        def complete(self, sp, up):
            return '  ""  '

    with pytest.raises(NarrativeError, match="quiet"):
        summarize("some text", Quiet())


def test_summary_truncated_to_five_words():
    class Chatty:
        id = "chatty"

        def complete(self, sp, up):
            return '"Molten Rivers Under A Grey Sky Tonight"'

    s = summarize("x", Chatty())
    assert s.words == ("molten", "rivers", "under", "a", "grey")


def test_stub_instruct_format():
    s = PageSummary(0, ("lava", "fields"))
    u = instruct(s, "muted watercolor", NarrativeBank(3), StubProvider())
    assert u.text == "background: lava fields; style: muted watercolor; continue: none"
    assert u.mode == PROMPT_TEXT and u.provider_id == "stub"


def test_prompt_only_mode():
    u = instruct(None, "muted watercolor", NarrativeBank(3), StubProvider(), page_index=4)
    assert u.mode == PROMPT_ONLY and u.page_index == 4
    assert u.text.startswith("background: none; style: muted watercolor")


def test_no_conditioning_signal():
    with pytest.raises(NarrativeError, match="conditioning"):
        instruct(PageSummary(0, ()), None, NarrativeBank(3), StubProvider())


def test_payload_order_and_omission():
    bank = NarrativeBank(3, (_u(0), _u(1)))
    p = build_instruct_payload(PageSummary(2, ("a", "b")), "style", bank)
    assert list(p) == ["history", "prompt", "summary"]
    assert p["history"] == ["u0", "u1"]
    assert list(build_instruct_payload(PageSummary(0, ("a",)), None, NarrativeBank(3))) == ["summary"]


def test_bank_fifo():
    bank = NarrativeBank(2)
    for i in range(4):
        bank = bank_push(bank, _u(i))
    assert bank.texts() == ["u2", "u3"]
    assert bank_push(NarrativeBank(0), _u(0)).entries == ()
    with pytest.raises(ValueError):
        NarrativeBank(1, (_u(0), _u(1)))


@given(st.integers(0, 6), st.integers(0, 12))
def test_bank_prefix_is_last_n(n, count):
    hist = [_u(i) for i in range(count)]
    bank = bank_prefix(hist, n)
    assert bank.texts() == [u.text for u in hist[max(0, count - n):]] if n else bank.texts() == []
    assert len(bank.entries) == min(n, count)


def test_bank_save_load(tmp_path):
    bank = NarrativeBank(2, (_u(0), _u(1)))
    bank.save(tmp_path / "bank.json")
    assert NarrativeBank.load(tmp_path / "bank.json") == bank


def test_run_document_history_window():
    stub = StubProvider()
    sums = [PageSummary(i, (f"theme{i}",)) for i in range(4)]
    out = run_document(sums, "muted", 2, stub)
    assert [u.page_index for u in out] == [0, 1, 2, 3]
    assert out[0].payload.get("history") is None
    assert out[3].payload["history"] == [out[1].text, out[2].text]
    # continuity: each instruction continues from the previous one
    for prev, cur in zip(out, out[1:]):
        assert cur.text.endswith("continue: " + prev.text)


def test_run_document_reproducible():
    sums = [PageSummary(i, (f"t{i}",)) for i in range(5)]
    runs = [[u.to_json() for u in run_document(sums, "p", 3, StubProvider())] for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]


def test_run_document_fail_fast():
    class Flaky(StubProvider):
        def complete(self, sp, up):
            if len(self.calls) == 2:
                raise ProviderError("flaky", "boom")
            return super().complete(sp, up)

    sums = [PageSummary(i, ("x",)) for i in range(4)]
    with pytest.raises(NarrativeRunError) as ei:
        run_document(sums, None, 2, Flaky())
    assert ei.value.last_completed_page == 1
    assert isinstance(ei.value.cause, ProviderError)


def test_instruction_first_sentence_only():
    class Wordy:
        id = "wordy"

        def complete(self, sp, up):
            return '  "Soft ash clouds over a grey sea.  Add birds!"\n'

    u = instruct(PageSummary(0, ("ash",)), None, NarrativeBank(), Wordy())
    assert u.text == "Soft ash clouds over a grey sea."


def test_normalize():
    assert normalize('  "a   b"  ') == "a b"
    assert normalize("“quoted”") == "quoted"


def test_instruction_json_round_trip():
    u = Instruction(3, "hello", "stub", PROMPT_ONLY, {"prompt": "p"})
    back = Instruction.from_json(json.loads(json.dumps(u.to_json())))
    assert back == u and back.payload == {"prompt": "p"}
    with pytest.raises(NarrativeError):
        Instruction(0, "two\nlines", "stub", PROMPT_TEXT)


# --- HTTP provider --------------------------------------------------------

def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def _ok(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def test_chat_provider_success():
    seen = {}

    def handler(req):
        seen["auth"] = req.headers["authorization"]
        seen["url"] = str(req.url)
        seen["body"] = json.loads(req.content)
        return _ok("misty dunes")

    p = ChatCompletionsProvider(ProviderConfig(endpoint_url="http://x/v1/", model="m"),
                                api_key="k", client=_client(handler))
    assert p.complete("sys", "user") == "misty dunes"
    assert seen["auth"] == "Bearer k"
    assert seen["url"] == "http://x/v1/chat/completions"
    assert [m["role"] for m in seen["body"]["messages"]] == ["system", "user"]
    assert p.id == "chat:m"


def test_chat_provider_retries_then_succeeds():
    calls = []
    sleeps = []

    def handler(req):
        calls.append(1)
        return httpx.Response(503) if len(calls) < 3 else _ok("ok")

    p = ChatCompletionsProvider(ProviderConfig(max_retries=3), api_key="k",
                                client=_client(handler), sleep=sleeps.append)
    assert p.complete("s", "u") == "ok"
    assert len(calls) == 3 and sleeps == [1.0, 2.0]


def test_chat_provider_gives_up():
    p = ChatCompletionsProvider(ProviderConfig(max_retries=2), api_key="k",
                                client=_client(lambda r: httpx.Response(429)), sleep=lambda s: None)
    with pytest.raises(ProviderError, match="3 attempts"):
        p.complete("s", "u")


def test_chat_provider_hard_error_not_retried():
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    p = ChatCompletionsProvider(ProviderConfig(), api_key="k", client=_client(handler),
                                sleep=lambda s: None)
    with pytest.raises(ProviderError, match="401") as ei:
        p.complete("s", "u")
    assert len(calls) == 1 and not ei.value.retriable


def test_chat_provider_malformed_response():
    p = ChatCompletionsProvider(ProviderConfig(), api_key="k",
                                client=_client(lambda r: httpx.Response(200, json={"x": 1})))
    with pytest.raises(ProviderError, match="malformed"):
        p.complete("s", "u")


def test_chat_provider_transport_error():
    def handler(req):
        raise httpx.ConnectError("down")

    p = ChatCompletionsProvider(ProviderConfig(max_retries=1), api_key="k",
                                client=_client(handler), sleep=lambda s: None)
    with pytest.raises(ProviderError, match="transport"):
        p.complete("s", "u")


def test_chat_provider_needs_env_key(monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    with pytest.raises(ProviderError, match=API_KEY_ENV):
        ChatCompletionsProvider(ProviderConfig())
    monkeypatch.setenv(API_KEY_ENV, "secret")
    assert ChatCompletionsProvider(ProviderConfig()).api_key == "secret"


def test_provider_config_rejects_keys(tmp_path):
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"model": "m", "api_key": "x"}))
    with pytest.raises(ValueError):
        ProviderConfig.load(f)
    f.write_text(json.dumps({"model": "m", "temperature": 0.0}))
    assert ProviderConfig.load(f).model == "m"


def test_make_provider_default_stub():
    assert isinstance(make_provider(None), StubProvider)
    assert isinstance(make_provider("stub"), StubProvider)
